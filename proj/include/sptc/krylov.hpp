#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sptc/errors.hpp"

namespace sptc {

struct KrylovStats {
    int steps = 0;
    int operator_applications = 0;
    double error_bound = 0.0;
};

/// exp(-i t H) psi for Hermitian H given as a matrix-free product.
///
/// Lanczos with full reorthogonalisation, restarted every `max_dim` vectors.
/// The Krylov space does not depend on the step length, so a rejected step is
/// retried in the same space with half the length. Each accepted step keeps
/// its a-posteriori error below tol * tau / t, so `tol` bounds the 2-norm error
/// of the final state.
inline Eigen::VectorXcd expm_multiply_hermitian(
    const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& apply_h,
    Eigen::VectorXcd psi, double t, double tol, int max_dim, KrylovStats* stats = nullptr) {
    if (tol <= 0) throw ParamError("krylov tolerance must be positive");
    if (max_dim < 2) throw ParamError("krylov subspace dimension must be >= 2");
    KrylovStats local;
    if (t == 0.0 || psi.norm() == 0.0) {
        if (stats) *stats = local;
        return psi;
    }
    const Eigen::Index n = psi.size();
    const int m_cap = static_cast<int>(std::min<Eigen::Index>(max_dim, n));
    double remaining = std::abs(t);
    const double sign = t > 0 ? 1.0 : -1.0;
    double tau = remaining;
    const double min_tau = std::abs(t) * 1e-13;

    Eigen::MatrixXcd V(n, m_cap + 1);
    Eigen::VectorXcd w(n);
    while (remaining > 0.0) {
        const double beta0 = psi.norm();
        V.col(0) = psi / beta0;
        std::vector<double> alpha, beta;
        int m = 0;
        bool breakdown = false;
        double beta_last = 0.0;
        for (int j = 0; j < m_cap; ++j) {
            apply_h(V.col(j), w);
            ++local.operator_applications;
            const double a = V.col(j).dot(w).real();
            alpha.push_back(a);
            // two passes of Gram-Schmidt against the whole basis
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXcd coeff = V.leftCols(j + 1).adjoint() * w;
                w.noalias() -= V.leftCols(j + 1) * coeff;
            }
            const double b = w.norm();
            m = j + 1;
            beta_last = b;
            if (b < 1e-13 * std::max(1.0, std::abs(a))) {
                breakdown = true;
                break;
            }
            if (j + 1 < m_cap) {
                beta.push_back(b);
                V.col(j + 1) = w / b;
            }
        }
        Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(m, m);
        for (int j = 0; j < m; ++j) Tm(j, j) = alpha[j];
        for (int j = 0; j + 1 < m; ++j) Tm(j, j + 1) = Tm(j + 1, j) = beta[j];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Tm);
        const Eigen::MatrixXd& Q = eig.eigenvectors();
        const Eigen::VectorXd& ev = eig.eigenvalues();

        while (true) {
            Eigen::VectorXcd phase(m);
            for (int k = 0; k < m; ++k) phase[k] = std::exp(std::complex<double>(0.0, -sign * tau * ev[k])) * Q(0, k);
            const Eigen::VectorXcd y = Q.cast<std::complex<double>>() * phase;
            const double err = breakdown ? 0.0 : beta0 * beta_last * std::abs(y[m - 1]);
            if (err <= tol * tau / std::abs(t) || breakdown) {
                psi = beta0 * (V.leftCols(m) * y);
                remaining -= tau;
                local.error_bound += err;
                ++local.steps;
                if (remaining < min_tau) remaining = 0.0;
                tau = std::min(remaining, 2.0 * tau);
                break;
            }
            tau *= 0.5;
            if (tau < min_tau) {
                if (stats) *stats = local;
                throw ConvergenceError("krylov step size underflow", err);
            }
        }
    }
    if (stats) *stats = local;
    return psi;
}

} // namespace sptc
