#include "unisoft/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace unisoft {

void ProblemConstants::validate() const {
    if (d < 1) throw std::invalid_argument("constants.d must be >= 1");
    if (horizon < 1) throw std::invalid_argument("constants.horizon must be >= 1");
    if (delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("constants.delta must be a probability in (0,1)");
    if (delta_min <= 0.0) throw std::invalid_argument("constants.delta_min must be positive");
    if (lambda_plus <= 0.0) throw std::invalid_argument("constants.lambda_plus must be positive");
    if (lambda_reg <= 0.0) throw std::invalid_argument("constants.lambda_reg must be positive");
    if (c1 <= 0.0 || c2 <= 0.0) throw std::invalid_argument("constants.c1, c2 must be positive");
    if (c_beta < 0.0) throw std::invalid_argument("constants.c_beta must be >= 0");
}

double g_worstcase(long k, const ProblemConstants& pc, double beta_k) {
    pc.validate();
    if (k < 1) throw std::invalid_argument("g_worstcase: k must be >= 1");
    const double kk = static_cast<double>(k);
    const double h = pc.horizon, d = pc.d;
    return h * beta_k * std::sqrt(2.0 * d * kk * std::log1p(kk / pc.lambda_reg)) +
           2.0 * h * h * std::sqrt(kk * std::log(2.0 * h * kk / pc.delta));
}

namespace {

KappaResult kappa_impl(const ProblemConstants& pc, int d_pow_poly1, int d_pow_log1,
                       int d_pow_poly2, int d_pow_log2) {
    pc.validate();
    const double d = pc.d, h = pc.horizon, lp = pc.lambda_plus, dm = pc.delta_min;
    const double h4 = std::pow(h, 4.0), h5 = std::pow(h, 5.0);
    const double c1sq = pc.c1 * pc.c1, c2sq = pc.c2 * pc.c2;

    KappaResult out;
    out.branch_exploration = 48.0 * c1sq * h4 * std::pow(d, d_pow_poly1) / (lp * lp) *
                             std::log(32.0 * c1sq * h5 * std::pow(d, d_pow_log1) /
                                      (lp * lp * pc.delta));
    out.branch_gap = 432.0 * c2sq * h4 * std::pow(d, d_pow_poly2) / (dm * dm * lp * lp * lp) *
                     std::log(288.0 * std::pow(d, d_pow_log2) * h5 * c2sq /
                              (dm * dm * lp * lp * lp * pc.delta));
    if (out.branch_exploration >= out.branch_gap) {
        out.value = out.branch_exploration;
        out.binding_branch = 1;
    } else {
        out.value = out.branch_gap;
        out.binding_branch = 2;
    }
    return out;
}

}  // namespace

KappaResult kappa_bar_lsvi(const ProblemConstants& pc) { return kappa_impl(pc, 3, 4, 2, 3); }

KappaResult kappa_bar_eleanor(const ProblemConstants& pc) { return kappa_impl(pc, 2, 3, 1, 2); }

ConstantRegretExpressions constant_regret_expressions(const ProblemConstants& pc,
                                                      double kappa_bar) {
    pc.validate();
    if (kappa_bar <= 0.0)
        throw std::invalid_argument("constant_regret_expressions: kappa_bar must be positive");
    const double d = pc.d, h = pc.horizon;
    ConstantRegretExpressions out;
    out.lsvi = std::pow(d, 3.0) * std::pow(h, 5.0) / pc.delta_min *
               std::log(d * h * h * kappa_bar / pc.delta);
    const double tau = h * kappa_bar;
    out.eleanor = std::pow(h, 1.5) * d * std::sqrt(tau * std::log(tau / pc.delta));
    return out;
}

}  // namespace unisoft
