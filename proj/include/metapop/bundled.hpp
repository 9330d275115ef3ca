#ifndef METAPOP_BUNDLED_HPP
#define METAPOP_BUNDLED_HPP

#include "metapop/model.hpp"

namespace metapop::bundled {

/// Constant rates below replacement; the equilibrium mean is s/2 in closed
/// form, which pins the linear-solver path exactly.
inline RateModel linear_subcritical() {
    return build_rate_model(ConstantParams{1.0, 2.0}, /*gamma=*/1.0, /*nu=*/0.0, /*rho=*/1.0);
}

/// Constant rates with catastrophes; the reproduction number is 2/3 and
/// chi(lambda) = 1/(lambda + 3/2) in closed form.
inline RateModel linear_catastrophe() {
    return build_rate_model(ConstantParams{1.0, 1.0}, /*gamma=*/1.0, /*nu=*/0.5, /*rho=*/1.0);
}

/// The workhorse persistent model: density-dependent deaths
/// d_i = 1 + 3(i-1)/i with constant births 3.
inline RateModel logistic() {
    return build_rate_model(LogisticDeathParams{3.0, 1.0, 3.0}, /*gamma=*/1.0, /*nu=*/0.5, /*rho=*/1.0);
}

/// Same logistic variant, where nu is swept by threshold studies.
inline RateModel logistic_with_nu(double nu) {
    return build_rate_model(LogisticDeathParams{3.0, 1.0, 3.0}, /*gamma=*/1.0, nu, /*rho=*/1.0);
}

/// A milder density dependence, second strictly concave test point.
inline RateModel logistic_mild() {
    return build_rate_model(LogisticDeathParams{2.0, 1.0, 2.0}, /*gamma=*/1.0, /*nu=*/0.25, /*rho=*/1.0);
}

/// Tabulated births with genuine curvature over the first states
/// (total rates 2, 3, 3.75, then slope 1/2 forever), constant deaths.
inline RateModel curved_table() {
    TableParams p;
    p.b = {2.0, 1.5, 1.25};
    p.d = {1.0, 1.0, 1.0};
    p.b_inf = 0.5;
    p.d_inf = 1.0;
    return build_rate_model(p, /*gamma=*/1.0, /*nu=*/0.3, /*rho=*/1.0);
}

/// Births dominate deaths even at crowding; no positive equilibrium exists
/// and the threshold machinery must refuse.
inline RateModel h2_violating() {
    return build_rate_model(ConstantParams{2.0, 1.0}, /*gamma=*/1.0, /*nu=*/0.2, /*rho=*/1.0);
}

/// Borderline case: the tail gap is exactly zero.
inline RateModel h2_boundary() {
    return build_rate_model(ConstantParams{1.2, 1.0}, /*gamma=*/1.0, /*nu=*/0.2, /*rho=*/1.0);
}

/// Decaying per-capita births (table snapshot of 2 exp(-i)); the total birth
/// rate decreases, so the concavity hypothesis fails at the first index.
inline RateModel ricker_like() {
    TableParams p;
    p.b = {0.73575888234288465, 0.27067056647322538, 0.09957413673572789, 0.03663127777746836,
           0.01347589399817093};
    p.d = {1.0, 1.0, 1.0, 1.0, 1.0};
    p.b_inf = 0.0;
    p.d_inf = 1.0;
    return build_rate_model(p, /*gamma=*/1.0, /*nu=*/0.5, /*rho=*/1.0);
}

}  // namespace metapop::bundled

#endif  // METAPOP_BUNDLED_HPP
