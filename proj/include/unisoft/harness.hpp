#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unisoft/agents.hpp"
#include "unisoft/mdp.hpp"
#include "unisoft/rng.hpp"

namespace unisoft {

using Trajectory = std::vector<Transition>;

/// Samples one full episode: s_1 from the initial distribution, then for
/// each stage the policy's action, a reward drawn around the mean per the
/// MDP's noise model, and the next state. Exactly H steps.
Trajectory run_episode(const TabularMdp& mdp, const DeterministicPolicy& policy, Rng& rng);

struct EpisodeRecord {
    int init_state = 0;
    double instant_regret = 0.0;
    double cum_regret = 0.0;
};

struct DiagnosticRow {
    int episode = 0;
    int stage = 0;  // zero-based
    double min_eig_on_span = 0.0;
    double growth_bound_rhs = 0.0;
    bool growth_holds = true;
    bool growth_vacuous = false;
    double max_conf_width = 0.0;
    double width_envelope = 0.0;
    bool optimism_ok = true;
};

struct RegretTrace {
    std::uint64_t seed = 0;
    std::vector<EpisodeRecord> episodes;
    std::vector<DiagnosticRow> diagnostics;
};

enum class AgentKind { LsviUcb, LsviLeader };
enum class GrowthBoundMode { WorstCase, ObservedRegret };

/// Fully resolved experiment description (file/builtin indirection is
/// handled by the I/O layer before this point).
struct ExperimentConfig {
    TabularMdp mdp;
    std::vector<FeatureMap> representations;  // exactly the agent's inputs
    AgentKind agent = AgentKind::LsviUcb;
    BetaSchedule schedule;
    int episodes = 1;
    std::vector<std::uint64_t> seeds;
    int diagnostics_every = 100;  // 0 disables diagnostic sampling
    GrowthBoundMode growth_mode = GrowthBoundMode::WorstCase;
    double diag_delta = 0.05;
    double lambda_reg = 1.0;
    bool floor_q_at_zero = true;
    std::string out_dir;  // empty: keep results in memory only
    int threads = 1;
    bool dump_agent_state = false;

    void validate() const;
};

struct ExperimentResult {
    std::vector<RegretTrace> traces;  // one per seed, in config order
    std::vector<double> mean_cum_regret;  // per episode, across seeds
    std::vector<double> std_cum_regret;   // population standard deviation
};

/// Runs every seed (in parallel up to config.threads), accounting regret
/// exactly by policy evaluation of each episode's greedy plan. When
/// out_dir is set, per-seed trace and diagnostics CSVs, summary.csv and
/// metadata.json are written (atomically, one file per seed).
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Per-stage check of the design-matrix growth bound: the smallest
/// eigenvalue of the design matrix restricted to the span of
/// lambda_star[h] against
///   n lambda_h+ + lambda - g(n)/delta_min - 8 sqrt(n log(2 d H n / delta)),
/// where n is the number of absorbed episodes.
struct GrowthRecord {
    int stage = 0;
    double lhs_min_eig_on_span = 0.0;
    double rhs_bound = 0.0;
    bool holds = true;
    bool vacuous = false;   // rhs <= lambda: the bound says nothing yet
    bool skipped = false;   // rank-0 optimal covariance at this stage
};

std::vector<GrowthRecord> design_growth_diagnostic(const LeaderState& state,
                                                   const std::vector<Eigen::MatrixXd>& lambda_star,
                                                   const std::function<double(long)>& g,
                                                   double delta_min, double delta,
                                                   int rep_index = 0);

/// Exact maximum over reachable pairs of the optimistic bonus
/// beta_k ||phi||_{Lambda^-1} (minimum across representations when there
/// are several), next to the closed-form shrinkage envelope
///   beta_k (n + lambda - f(n)) / (n lambda_h+ + lambda - f(n))^{3/2},
/// f(n) = g(n) + 8 sqrt(n log(2 d H n / delta)). The envelope is +inf
/// while its denominator is not yet positive.
struct WidthRecord {
    int stage = 0;
    double max_width = 0.0;
    double envelope = 0.0;
};

std::vector<WidthRecord> confidence_width_diagnostic(
    const LeaderState& state, const BetaSchedule& schedule,
    const std::vector<std::vector<std::pair<int, int>>>& reachable_pairs,
    const std::vector<double>& lambda_plus_per_stage, const std::function<double(long)>& g,
    double delta);

struct PlateauResult {
    std::optional<int> kappa_hat;  // 1-based last episode with regret > eps
    bool plateaued = false;
};

/// kappa_hat is the last episode whose instantaneous regret exceeds eps;
/// the trace plateaued iff that happens no later than K - window.
PlateauResult plateau_detector(const RegretTrace& trace, int window, double eps);

}  // namespace unisoft
