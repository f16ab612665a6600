#pragma once

#include <optional>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "unisoft/feature_map.hpp"
#include "unisoft/mdp.hpp"

namespace unisoft {

/// Confidence-radius schedules for the optimistic bonus.
///
/// AnytimeLsvi and AnytimeLeader grow logarithmically with the episode;
/// ExperimentFixedK is the constant radius used by the experiment
/// protocol, which plugs the total episode budget K into the log.
struct BetaSchedule {
    enum class Kind { AnytimeLsvi, AnytimeLeader, ExperimentFixedK };
    Kind kind = Kind::ExperimentFixedK;
    double c_beta = 0.2;
    double delta = 0.05;
    int num_reps = 1;               // N
    std::optional<int> fixed_k;     // K; required for ExperimentFixedK

    void validate() const;
};

/// Confidence radius at episode k for a stage of dimension d.
///   AnytimeLsvi:      c_beta * d * H * sqrt(log(2 d H k / delta))
///   AnytimeLeader:    c_beta * d * H * sqrt(N log(2 d N H k / delta))
///   ExperimentFixedK: c_beta * d * H * sqrt(log(d K))        for N = 1
///                     c_beta * d * H * sqrt(N log(N d K))    for N > 1
double beta_value(const BetaSchedule& schedule, int k, int d, int horizon);

/// One observed step of an episode.
struct Transition {
    int h = 0;
    int s = 0;
    int a = 0;
    double reward = 0.0;
    int next_state = 0;
};

/// Sufficient statistics of an optimistic least-squares learner over one
/// or more representations. With a single representation this is exactly
/// LSVI-UCB; with several, planning takes the per-(s,a) minimum of the
/// optimistic estimates.
///
/// All per-(s,a) statistics are aggregated, so one planning pass costs
/// O(H N (S A d^2 + d^3 + S^2 A)) independent of the episode count. The
/// aggregation is loss-free because features depend on (s,a) only.
struct LeaderState {
    std::vector<FeatureMap> reps;
    double lambda_reg = 1.0;
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    int episode = 1;  // current 1-based episode; advanced by the harness

    /// Clip optimistic values at 0 from below in addition to the min{H, .}
    /// cap. Can be disabled to reproduce the cap-only rule.
    bool floor_at_zero = true;

    std::vector<std::vector<Eigen::MatrixXd>> design;  // [h][j] -> d_j x d_j
    std::vector<Eigen::MatrixXd> reward_sum;           // [h] -> S x A
    std::vector<Eigen::MatrixXd> visit_count;          // [h] -> S x A (integral values)
    std::vector<Eigen::MatrixXd> transition_count;     // [h] -> (S*A) x S

    std::vector<Eigen::MatrixXd> q_bar;  // last plan's tabulated values, [h] -> S x A

    LeaderState(std::vector<FeatureMap> representations, double lambda = 1.0);

    int sa_index(int s, int a) const { return s * num_actions + a; }
};

/// Tabulated plan of one backward pass.
struct PlanResult {
    std::vector<Eigen::MatrixXd> q_bar;  // [h] -> S x A, clipped to [0, H]
    std::vector<Eigen::VectorXd> v_bar;  // [h] -> S
    DeterministicPolicy greedy;          // lowest action index on ties
};

/// Backward optimistic planning from the aggregated statistics. Also
/// stores the tabulated values into state.q_bar.
PlanResult leader_plan(LeaderState& state, const BetaSchedule& schedule);

/// Folds one observed transition into the sufficient statistics (the
/// episode counter is advanced by the harness, not here).
void leader_update(LeaderState& state, const Transition& t);

/// Solves lambda_mat * w = b for a symmetric positive-definite matrix.
/// Throws std::invalid_argument on a non-SPD input and std::runtime_error
/// if the relative residual exceeds 1e-10.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& lambda_mat, const Eigen::VectorXd& b);

/// Diagnostic comparison of a plan against the exact optimal values.
struct OptimismAudit {
    /// Fraction of initial-distribution support states with
    /// V_bar_1(s) >= V*_1(s) - 1e-9.
    double fraction = 0.0;
    /// All (h, s, a) with Q_bar below Q* by more than 1e-9.
    std::vector<std::tuple<int, int, int>> violations;
};

OptimismAudit optimism_audit(const PlanResult& plan, const ValueTables& optimal,
                             const Eigen::VectorXd& init_dist);

}  // namespace unisoft
