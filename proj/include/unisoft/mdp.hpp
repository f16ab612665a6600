#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "unisoft/feature_map.hpp"

namespace unisoft {

/// Reward noise applied when sampling episodes. Stored rewards are always
/// means; noise enters only at sampling time.
struct NoiseModel {
    enum class Kind { Bernoulli, Gaussian, Deterministic };
    Kind kind = Kind::Deterministic;
    double sigma = 0.0;  // Gaussian only

    static NoiseModel bernoulli() { return {Kind::Bernoulli, 0.0}; }
    static NoiseModel gaussian(double sigma) { return {Kind::Gaussian, sigma}; }
    static NoiseModel deterministic() { return {Kind::Deterministic, 0.0}; }
};

/// Finite time-inhomogeneous MDP with tabular states and actions.
///
/// Indexing is zero-based throughout: stages 0..H-1, states 0..S-1,
/// actions 0..A-1. State-action pairs are flattened as sa = s * A + a.
/// transition[h] has one row per (s,a) pair and one column per next state.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<Eigen::MatrixXd> reward;      // [h] -> S x A
    std::vector<Eigen::MatrixXd> transition;  // [h] -> (S*A) x S
    Eigen::VectorXd init_dist;                // S
    NoiseModel noise;

    int sa_index(int s, int a) const { return s * num_actions + a; }

    /// Checks shapes, probability sums (within 1e-12), entry signs, and the
    /// Bernoulli mean range. Throws std::invalid_argument naming the
    /// offending field.
    void validate() const;
};

constexpr double kProbabilityTol = 1e-12;
constexpr double kValueTiesTol = 1e-9;

/// One decision rule per stage: action[h][s].
struct DeterministicPolicy {
    std::vector<std::vector<int>> action;

    int at(int h, int s) const { return action[h][s]; }
    void validate(const TabularMdp& mdp) const;
};

/// Q and V tables; the terminal convention V_{H+1} = 0 is implicit.
struct ValueTables {
    std::vector<Eigen::MatrixXd> q;  // [h] -> S x A
    std::vector<Eigen::VectorXd> v;  // [h] -> S
};

/// Per-(stage, state, action) suboptimality gaps of the optimal tables.
struct GapTable {
    std::vector<Eigen::MatrixXd> gap;  // [h] -> S x A, >= 0
    double delta_min = 0.0;            // min over strictly positive gaps; +inf if none
    bool has_positive_gap = false;
    bool optimal_unique = true;
    std::vector<std::pair<int, int>> tie_locations;  // (h, s) where |Q diff| < tie tol
};

/// State and state-action visit distributions of a policy.
struct OccupancyMeasure {
    std::vector<Eigen::VectorXd> rho;     // [h] -> S
    std::vector<Eigen::MatrixXd> rho_sa;  // [h] -> S x A
};

struct BackwardInductionResult {
    ValueTables values;
    DeterministicPolicy policy;
    GapTable gaps;
};

/// Exact optimal tables, greedy policy (lowest action index on ties within
/// 1e-9), and the gap table in one backward pass.
BackwardInductionResult backward_induction(const TabularMdp& mdp);

/// Exact Q^pi, V^pi by backward recursion.
ValueTables policy_evaluation(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// Visit distributions of `policy` starting from the MDP's initial
/// distribution.
OccupancyMeasure occupancy(const TabularMdp& mdp, const DeterministicPolicy& policy);

/// Visit distributions of `policy` started deterministically in
/// `start_state` at the first stage.
OccupancyMeasure occupancy_from(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                int start_state);

/// Per stage, the (s,a) pairs visitable with positive probability by some
/// deterministic policy. Any-action forward propagation of state
/// reachability is exact for this policy class, and every reachable state
/// is paired with every action.
std::vector<std::vector<std::pair<int, int>>> reachable_sets(const TabularMdp& mdp);

/// Per stage, whether each state is visitable by some deterministic policy.
std::vector<std::vector<bool>> reachable_states(const TabularMdp& mdp);

/// Occupancy-weighted mean feature vector of `policy` at each stage.
std::vector<Eigen::VectorXd> expected_features(const TabularMdp& mdp,
                                               const DeterministicPolicy& policy,
                                               const FeatureMap& fm);

/// Expected sum of gaps accumulated by `policy` from `start_state`,
/// E_pi[sum_h gap_h(s_h, a_h) | s_1 = start]. Equals the exact value loss
/// V*_1(start) - V^pi_1(start).
double gap_decomposition_regret(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                const GapTable& gaps, int start_state);

}  // namespace unisoft
