#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "unisoft/feature_map.hpp"
#include "unisoft/mdp.hpp"
#include "unisoft/rng.hpp"

namespace unisoft {

constexpr double kDefaultRankTol = 1e-8;
constexpr double kDefaultCertTol = 1e-8;

/// Linear model backing rewards and transitions: r_h = phi_h . theta_h and
/// p_h(s'|.) = phi_h . mu_h(s').
///
/// mu covers stages 0..H-2 only. The transition out of the final stage
/// never enters a value, an occupancy, or a regression target, so it is
/// not part of the certified model.
struct LowRankModel {
    std::vector<Eigen::VectorXd> theta;  // [h] -> d_h, h = 0..H-1
    std::vector<Eigen::MatrixXd> mu;     // [h] -> S x d_h, h = 0..H-2 (row per s')
};

struct LowRankCheck {
    LowRankModel model;
    double max_residual = 0.0;  // max |phi.theta - r| and |phi.mu(s') - p| over equations
    bool certified = false;     // max_residual <= tol
};

/// Per-stage span diagnostics of a representation on an MDP.
struct StageDiagnostics {
    int reachable_span_rank = 0;
    int optimal_span_rank = 0;
    bool is_unisoft = false;
    Eigen::MatrixXd optimal_cov;  // Lambda_h* = sum_s rho*_h(s) phi*_h(s) phi*_h(s)^T
    double lambda_plus = 0.0;     // min strictly positive eigenvalue of optimal_cov
};

struct ReprDiagnostics {
    std::vector<StageDiagnostics> stages;
    double lambda_plus_overall = 0.0;  // min over stages
    bool all_unisoft = false;
    bool norm_warning = false;  // some ||phi|| exceeds the unit-ball convention
};

/// Fits (or checks) the linear reward/transition model of `fm` on `mdp`
/// and reports the worst absolute equation residual. When no model is
/// supplied, theta_h and each mu_h(s') are fitted by per-stage ordinary
/// least squares over the S*A equations.
LowRankCheck verify_low_rank(const TabularMdp& mdp, const FeatureMap& fm,
                             const std::optional<LowRankModel>& model = std::nullopt,
                             double tol = kDefaultCertTol);

/// Second moment of optimal-action features under the optimal occupancy,
/// one matrix per stage.
std::vector<Eigen::MatrixXd> optimal_covariance(const TabularMdp& mdp, const FeatureMap& fm);

/// Smallest eigenvalue of a symmetric PSD matrix exceeding
/// rank_tol * lambda_max; 0 for a numerically zero matrix. Throws on
/// non-symmetric input.
double min_positive_eigenvalue(const Eigen::MatrixXd& m, double rank_tol = kDefaultRankTol);

/// Stage-wise test of whether every reachable feature lies in the span of
/// optimal-action features on states the optimal policy visits.
ReprDiagnostics unisoft_check(const TabularMdp& mdp, const FeatureMap& fm,
                              double rank_tol = kDefaultRankTol);

/// Result of the mixing test across a family of representations.
struct MixingReport {
    /// witness[h](s, a) = smallest representation index whose optimal span
    /// covers phi^(j)_h(s,a); -1 where the pair is unreachable.
    std::vector<Eigen::MatrixXi> witness;
    /// Reachable (h, s, a) triples covered by no representation.
    std::vector<std::tuple<int, int, int>> failures;
    bool mixing_holds = false;
};

/// For each reachable (s,a,h), the smallest j with phi^(j)_h(s,a) inside
/// representation j's own optimal span. Mixing holds iff no failures.
MixingReport unisoft_mixing_check(const TabularMdp& mdp, const std::vector<FeatureMap>& fms,
                                  double rank_tol = kDefaultRankTol);

/// Doubles the feature dimension at one stage: optimal-action features
/// move to the upper block [0; phi], all others to the lower block
/// [phi; 0]; theta and mu at that stage are duplicated. The result is an
/// equally realizable representation that is no longer UniSOFT at `stage`
/// (whenever some suboptimal feature there is nonzero).
std::pair<FeatureMap, LowRankModel> make_non_unisoft(const FeatureMap& fm,
                                                     const LowRankModel& model,
                                                     const TabularMdp& mdp, int stage);

/// The built-in worked example: a two-stage, two-state, two-action MDP
/// with Bernoulli rewards and four representations of it. reps[0] and
/// reps[1] share models[0]; reps[2] and reps[3] are block transforms of
/// reps[1] and reps[0] at the first stage.
struct BuiltinExample {
    TabularMdp mdp;
    std::vector<FeatureMap> reps;
    std::vector<LowRankModel> models;  // one per representation
};

/// Currently the only name is "appendix-f". Throws std::invalid_argument
/// on unknown names.
BuiltinExample builtin_example(const std::string& name);

/// Monte-Carlo evidence for zero inherent Bellman error: samples bounded
/// linear Q_{h+1}, applies the Bellman operator, and measures the worst
/// sup-norm residual of the least-squares projection back onto the span
/// of stage-h features. A certified low-rank representation yields 0 up
/// to roundoff.
double ibe_monte_carlo(const TabularMdp& mdp, const FeatureMap& fm, int n_samples,
                       double bound_d, Rng& rng);

/// Suboptimal policy whose expected features leave the optimal span at the
/// first failing stage, constructed by a single-action deviation (plus a
/// reaching prefix when the deviation state is off the optimal trajectory).
struct NecessityWitness {
    int stage = 0;  // zero-based
    DeterministicPolicy policy;
    Eigen::VectorXd expected_features_at_stage;
    double span_residual = 0.0;  // distance of Psi^pi - Psi* to the optimal span
};

/// Returns a witness when UniSOFT fails at some stage, none when the
/// representation is UniSOFT everywhere (same rank_tol as unisoft_check).
/// Requires a unique optimal policy.
std::optional<NecessityWitness> find_necessity_witness(const TabularMdp& mdp,
                                                       const FeatureMap& fm,
                                                       double rank_tol = kDefaultRankTol);

struct EmpiricalCovariance {
    Eigen::MatrixXd matrix;  // (1/m) sum_i sum_t phi phi^T
    int rank = 0;
    double lambda_min = 0.0;
};

/// Average over trajectories of the within-trajectory sum of feature outer
/// products, with rank and minimum eigenvalue. Throws on empty input.
EmpiricalCovariance empirical_covariance(
    const std::vector<std::vector<Eigen::VectorXd>>& trajectories, int d,
    double rank_tol = kDefaultRankTol);

}  // namespace unisoft
