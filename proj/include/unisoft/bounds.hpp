#pragma once

namespace unisoft {

/// Problem-dependent quantities entering the closed-form bound evaluators.
struct ProblemConstants {
    int d = 1;
    int horizon = 1;
    double delta = 0.05;
    double delta_min = 1.0;    // minimum positive value gap
    double lambda_plus = 1.0;  // min over stages of the minimum positive eigenvalue
    double lambda_reg = 1.0;
    double c1 = 8.0;  // the derivation assumes c1 >= 8
    double c2 = 1.0;
    double c_beta = 0.2;

    void validate() const;
    bool c1_below_floor() const { return c1 < 8.0; }
};

/// Worst-case anytime regret envelope
///   H beta_k sqrt(2 d k log(1 + k/lambda)) + 2 H^2 sqrt(k log(2 H k / delta)).
double g_worstcase(long k, const ProblemConstants& pc, double beta_k);

/// A critical-time value together with which of its two branches binds
/// (1 = exploration/invertibility branch, 2 = gap branch).
struct KappaResult {
    double value = 0.0;
    int binding_branch = 0;
    double branch_exploration = 0.0;
    double branch_gap = 0.0;
};

/// Last episode with nonzero regret, upper bound for the single
/// representation learner:
///   max{ 48 c1^2 H^4 d^3 / l+^2 * log(32 c1^2 H^5 d^4 / (l+^2 delta)),
///        432 c2^2 H^4 d^2 / (D^2 l+^3) * log(288 d^3 H^5 c2^2 / (D^2 l+^3 delta)) }.
KappaResult kappa_bar_lsvi(const ProblemConstants& pc);

/// Same with every d exponent reduced by one (global-optimism variant).
KappaResult kappa_bar_eleanor(const ProblemConstants& pc);

/// The two displayed constant-regret expressions evaluated at unit hidden
/// constants. Order-level only; there is no sharp constant to reproduce.
struct ConstantRegretExpressions {
    double lsvi = 0.0;     // (d^3 H^5 / delta_min) log(d H^2 kappa / delta)
    double eleanor = 0.0;  // H^{3/2} d sqrt(tau log(tau/delta)), tau = H kappa
};

ConstantRegretExpressions constant_regret_expressions(const ProblemConstants& pc,
                                                      double kappa_bar);

}  // namespace unisoft
