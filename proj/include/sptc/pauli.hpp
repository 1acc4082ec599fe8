#pragma once

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sptc/errors.hpp"

namespace sptc {

using cplx = std::complex<double>;

enum class Axis : std::uint8_t { X, Y, Z };

inline char axis_char(Axis a) {
    switch (a) {
    case Axis::X: return 'X';
    case Axis::Y: return 'Y';
    case Axis::Z: return 'Z';
    }
    return '?';
}

struct PauliFactor {
    int site; // 1-based
    Axis axis;

    friend bool operator==(const PauliFactor&, const PauliFactor&) = default;
};

/// coefficient * (product of single-site Paulis). Sites are 1-based and
/// strictly increasing; no factors means the identity.
class PauliString {
public:
    PauliString() = default;

    PauliString(double coefficient, std::vector<PauliFactor> factors)
        : coefficient_(coefficient), factors_(std::move(factors)) {
        std::sort(factors_.begin(), factors_.end(),
                  [](const PauliFactor& a, const PauliFactor& b) { return a.site < b.site; });
        for (std::size_t i = 0; i < factors_.size(); ++i) {
            if (factors_[i].site < 1) throw IndexError("pauli factor site must be >= 1");
            if (i > 0 && factors_[i].site == factors_[i - 1].site)
                throw ContractError("pauli string has repeated site " +
                                    std::to_string(factors_[i].site));
        }
    }

    PauliString(double coefficient, std::initializer_list<PauliFactor> factors)
        : PauliString(coefficient, std::vector<PauliFactor>(factors)) {}

    double coefficient() const noexcept { return coefficient_; }
    const std::vector<PauliFactor>& factors() const noexcept { return factors_; }
    bool is_identity() const noexcept { return factors_.empty(); }
    int min_site() const noexcept { return factors_.empty() ? 0 : factors_.front().site; }
    int max_site() const noexcept { return factors_.empty() ? 0 : factors_.back().site; }

    PauliString with_coefficient(double c) const {
        PauliString p = *this;
        p.coefficient_ = c;
        return p;
    }

    /// Throws IndexError if any factor lies outside 1..L.
    void check_sites(int L) const {
        for (const auto& f : factors_)
            if (f.site < 1 || f.site > L)
                throw IndexError("pauli factor on site " + std::to_string(f.site) +
                                 " outside 1.." + std::to_string(L));
    }

    std::string str() const {
        std::string s = std::to_string(coefficient_);
        for (const auto& f : factors_) {
            s += ' ';
            s += axis_char(f.axis);
            s += std::to_string(f.site);
        }
        return s;
    }

    friend bool operator==(const PauliString&, const PauliString&) = default;

private:
    double coefficient_ = 1.0;
    std::vector<PauliFactor> factors_;
};

/// Bit-mask form of a Pauli string over a 2^L basis with site 1 as the least
/// significant bit. P|i> = phase(i) |i ^ flip>, phase(i) = i^ny (-1)^popcount(i & zmask).
struct PauliMask {
    std::uint64_t flip = 0;  // X or Y
    std::uint64_t zmask = 0; // Y or Z
    int ny = 0;

    explicit PauliMask(const PauliString& p, int site_offset = 1) {
        for (const auto& f : p.factors()) {
            const std::uint64_t bit = std::uint64_t{1} << (f.site - site_offset);
            if (f.axis != Axis::Z) flip |= bit;
            if (f.axis != Axis::X) zmask |= bit;
            if (f.axis == Axis::Y) ++ny;
        }
    }

    cplx phase(std::uint64_t i) const noexcept {
        static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const int sign = (std::popcount(i & zmask) & 1) ? 2 : 0;
        return kIPow[(ny + sign) & 3];
    }
};

/// True if the two strings commute (even number of anticommuting sites).
inline bool commutes(const PauliString& a, const PauliString& b) {
    int anti = 0;
    std::size_t i = 0, j = 0;
    const auto& fa = a.factors();
    const auto& fb = b.factors();
    while (i < fa.size() && j < fb.size()) {
        if (fa[i].site < fb[j].site) {
            ++i;
        } else if (fb[j].site < fa[i].site) {
            ++j;
        } else {
            if (fa[i].axis != fb[j].axis) ++anti;
            ++i;
            ++j;
        }
    }
    return anti % 2 == 0;
}

} // namespace sptc
