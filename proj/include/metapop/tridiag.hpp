#ifndef METAPOP_TRIDIAG_HPP
#define METAPOP_TRIDIAG_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "metapop/errors.hpp"

namespace metapop {

/// Tridiagonal system  sub[i]*x[i-1] + diag[i]*x[i] + sup[i]*x[i+1] = rhs[i].
/// sub[0] and sup[n-1] are ignored. Solved in place by the Thomas algorithm;
/// all generator-derived systems in this project are diagonally dominant by
/// columns, for which elimination without pivoting is stable.
struct Tridiagonal {
    std::vector<double> sub, diag, sup;

    explicit Tridiagonal(std::size_t n) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
    std::size_t size() const { return diag.size(); }
};

inline std::vector<double> solve_tridiagonal(const Tridiagonal& m, std::vector<double> rhs) {
    const std::size_t n = m.size();
    if (rhs.size() != n) throw InvalidArgument("tridiagonal rhs size mismatch");
    if (n == 0) return {};

    std::vector<double> c(n, 0.0);
    double piv = m.diag[0];
    if (piv == 0.0 || !std::isfinite(piv)) throw SpectralDomainError("tridiagonal pivot breakdown at row 0");
    c[0] = m.sup[0] / piv;
    rhs[0] /= piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = m.diag[i] - m.sub[i] * c[i - 1];
        if (piv == 0.0 || !std::isfinite(piv))
            throw SpectralDomainError("tridiagonal pivot breakdown at row " + std::to_string(i));
        c[i] = m.sup[i] / piv;
        rhs[i] = (rhs[i] - m.sub[i] * rhs[i - 1]) / piv;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return rhs;
}

}  // namespace metapop

#endif  // METAPOP_TRIDIAG_HPP
