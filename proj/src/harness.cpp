#include "unisoft/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "unisoft/bounds.hpp"
#include "unisoft/io.hpp"
#include "unisoft/linalg.hpp"
#include "unisoft/repr.hpp"

namespace unisoft {

Trajectory run_episode(const TabularMdp& mdp, const DeterministicPolicy& policy, Rng& rng) {
    policy.validate(mdp);
    const int S = mdp.num_states;
    Trajectory traj;
    traj.reserve(mdp.horizon);
    std::vector<double> row(S);
    int s = rng.categorical({mdp.init_dist.data(), static_cast<std::size_t>(S)});
    for (int h = 0; h < mdp.horizon; ++h) {
        const int a = policy.at(h, s);
        const double mean = mdp.reward[h](s, a);
        double r = mean;
        switch (mdp.noise.kind) {
            case NoiseModel::Kind::Bernoulli:
                r = rng.bernoulli(mean) ? 1.0 : 0.0;
                break;
            case NoiseModel::Kind::Gaussian:
                r = mean + mdp.noise.sigma * rng.gaussian();
                break;
            case NoiseModel::Kind::Deterministic:
                break;
        }
        for (int sn = 0; sn < S; ++sn) row[sn] = mdp.transition[h](mdp.sa_index(s, a), sn);
        const int snext = rng.categorical(row);
        traj.push_back({h, s, a, r, snext});
        s = snext;
    }
    return traj;
}

void ExperimentConfig::validate() const {
    mdp.validate();
    if (representations.empty())
        throw std::invalid_argument("config.representations must be non-empty");
    for (const auto& fm : representations) {
        fm.validate();
        if (fm.num_states != mdp.num_states || fm.num_actions != mdp.num_actions ||
            fm.horizon() != mdp.horizon)
            throw std::invalid_argument("config.representations: shape mismatch with the MDP");
    }
    if (agent == AgentKind::LsviUcb && representations.size() != 1)
        throw std::invalid_argument("config.agent: lsvi-ucb references exactly one representation");
    schedule.validate();
    if (schedule.num_reps != static_cast<int>(representations.size()))
        throw std::invalid_argument("config.schedule: N must equal the representation count");
    if (episodes < 1) throw std::invalid_argument("config.episodes must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("config.seeds must be non-empty");
    if (diagnostics_every < 0)
        throw std::invalid_argument("config.diagnostics_every must be >= 0");
    if (diag_delta <= 0.0 || diag_delta >= 1.0)
        throw std::invalid_argument("config.diag_delta must be a probability in (0,1)");
    if (lambda_reg <= 0.0) throw std::invalid_argument("config.lambda_reg must be positive");
    if (threads < 1) throw std::invalid_argument("config.threads must be >= 1");
}

namespace {

long absorbed_episodes(const LeaderState& state, int stage) {
    // Every episode contributes exactly one visit per stage.
    return static_cast<long>(std::llround(state.visit_count[stage].sum()));
}

double azuma_term(long n, int d, int horizon, double delta) {
    if (n <= 0) return 0.0;
    return 8.0 * std::sqrt(static_cast<double>(n) *
                           std::log(2.0 * d * horizon * static_cast<double>(n) / delta));
}

/// Value of the greedy policy, memoized per action table. Policies repeat
/// massively across episodes, so this removes most evaluation cost.
class PolicyValueCache {
  public:
    explicit PolicyValueCache(const TabularMdp& mdp) : mdp_(mdp) {}

    const Eigen::VectorXd& initial_values(const DeterministicPolicy& policy) {
        key_.clear();
        for (const auto& stage : policy.action)
            for (int a : stage) key_.push_back(static_cast<char>(a));
        auto it = cache_.find(key_);
        if (it == cache_.end())
            it = cache_.emplace(key_, policy_evaluation(mdp_, policy).v[0]).first;
        return it->second;
    }

  private:
    const TabularMdp& mdp_;
    std::string key_;
    std::unordered_map<std::string, Eigen::VectorXd> cache_;
};

}  // namespace

std::vector<GrowthRecord> design_growth_diagnostic(const LeaderState& state,
                                                   const std::vector<Eigen::MatrixXd>& lambda_star,
                                                   const std::function<double(long)>& g,
                                                   double delta_min, double delta, int rep_index) {
    if (rep_index < 0 || rep_index >= static_cast<int>(state.reps.size()))
        throw std::invalid_argument("design_growth_diagnostic: rep_index out of range");
    if (static_cast<int>(lambda_star.size()) != state.horizon)
        throw std::invalid_argument("design_growth_diagnostic: one optimal covariance per stage");
    if (delta_min <= 0.0)
        throw std::invalid_argument("design_growth_diagnostic: delta_min must be positive");

    std::vector<GrowthRecord> out(state.horizon);
    for (int h = 0; h < state.horizon; ++h) {
        auto& rec = out[h];
        rec.stage = h;
        const Eigen::MatrixXd basis = span_basis(lambda_star[h], kDefaultRankTol);
        if (basis.cols() == 0) {
            rec.skipped = true;
            continue;
        }
        const Eigen::MatrixXd restricted =
            basis.transpose() * state.design[h][rep_index] * basis;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(restricted);
        rec.lhs_min_eig_on_span = es.eigenvalues()(0);

        const long n = absorbed_episodes(state, h);
        const double lambda_plus = min_positive_eigenvalue(lambda_star[h]);
        if (n == 0) {
            rec.rhs_bound = state.lambda_reg;
        } else {
            rec.rhs_bound = static_cast<double>(n) * lambda_plus + state.lambda_reg -
                            g(n) / delta_min -
                            azuma_term(n, state.reps[rep_index].dims[h], state.horizon, delta);
        }
        rec.vacuous = rec.rhs_bound < 0.0;
        // Floating-point slack so the trivially tight n = 0 case (lhs and
        // rhs both equal to lambda) reports as holding.
        rec.holds = rec.lhs_min_eig_on_span >=
                    rec.rhs_bound - 1e-9 * std::max(1.0, std::abs(rec.rhs_bound));
    }
    return out;
}

std::vector<WidthRecord> confidence_width_diagnostic(
    const LeaderState& state, const BetaSchedule& schedule,
    const std::vector<std::vector<std::pair<int, int>>>& reachable_pairs,
    const std::vector<double>& lambda_plus_per_stage, const std::function<double(long)>& g,
    double delta) {
    if (static_cast<int>(reachable_pairs.size()) != state.horizon ||
        static_cast<int>(lambda_plus_per_stage.size()) != state.horizon)
        throw std::invalid_argument("confidence_width_diagnostic: per-stage inputs required");

    std::vector<WidthRecord> out(state.horizon);
    for (int h = 0; h < state.horizon; ++h) {
        auto& rec = out[h];
        rec.stage = h;
        std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
        std::vector<double> betas;
        for (std::size_t j = 0; j < state.reps.size(); ++j) {
            llts.emplace_back(state.design[h][j]);
            betas.push_back(beta_value(schedule, state.episode, state.reps[j].dims[h],
                                       state.horizon));
        }
        double max_width = 0.0;
        for (const auto& [s, a] : reachable_pairs[h]) {
            double width = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < state.reps.size(); ++j) {
                const Eigen::VectorXd f = state.reps[j].vec(h, s, a);
                width = std::min(width,
                                 betas[j] * std::sqrt(std::max(0.0, f.dot(llts[j].solve(f)))));
            }
            max_width = std::max(max_width, width);
        }
        rec.max_width = max_width;

        const long n = absorbed_episodes(state, h);
        const double f_n =
            (n == 0 ? 0.0 : g(n)) + azuma_term(n, state.reps[0].dims[h], state.horizon, delta);
        const double beta_env = *std::min_element(betas.begin(), betas.end());
        const double numer = static_cast<double>(n) + state.lambda_reg - f_n;
        const double denom =
            static_cast<double>(n) * lambda_plus_per_stage[h] + state.lambda_reg - f_n;
        rec.envelope = (denom > 0.0 && numer >= 0.0)
                           ? beta_env * numer / std::pow(denom, 1.5)
                           : std::numeric_limits<double>::infinity();
    }
    return out;
}

PlateauResult plateau_detector(const RegretTrace& trace, int window, double eps) {
    if (window < 1) throw std::invalid_argument("plateau_detector: window must be >= 1");
    PlateauResult out;
    const int k_total = static_cast<int>(trace.episodes.size());
    for (int k = 0; k < k_total; ++k)
        if (trace.episodes[k].instant_regret > eps) out.kappa_hat = k + 1;
    out.plateaued = !out.kappa_hat || *out.kappa_hat <= k_total - window;
    return out;
}

namespace {

struct SharedSetup {
    BackwardInductionResult bi;
    std::vector<std::vector<std::pair<int, int>>> reachable;
    std::vector<Eigen::MatrixXd> lambda_star;       // of representation 0
    std::vector<double> lambda_plus_per_stage;      // max across representations
    int d_max = 1;
    bool growth_possible = false;  // needs a positive minimum gap
};

RegretTrace run_single_seed(const ExperimentConfig& config, const SharedSetup& setup,
                            std::uint64_t seed) {
    RegretTrace trace;
    trace.seed = seed;
    trace.episodes.reserve(config.episodes);

    Rng rng = Rng::for_run(seed, 0);
    LeaderState state(config.representations, config.lambda_reg);
    state.floor_at_zero = config.floor_q_at_zero;
    PolicyValueCache values(config.mdp);

    ProblemConstants pc;
    pc.d = setup.d_max;
    pc.horizon = config.mdp.horizon;
    pc.delta = config.diag_delta;
    pc.delta_min = setup.bi.gaps.has_positive_gap ? setup.bi.gaps.delta_min : 1.0;
    pc.lambda_plus = 1.0;  // not used by g_worstcase
    pc.lambda_reg = config.lambda_reg;

    std::function<double(long)> g;
    if (config.growth_mode == GrowthBoundMode::WorstCase) {
        const BetaSchedule sched = config.schedule;
        const int d_max = setup.d_max, horizon = config.mdp.horizon;
        g = [pc, sched, d_max, horizon](long n) {
            return g_worstcase(n, pc,
                               beta_value(sched, static_cast<int>(n), d_max, horizon));
        };
    } else {
        g = [&trace](long n) {
            return trace.episodes[static_cast<std::size_t>(n) - 1].cum_regret;
        };
    }

    double cum = 0.0;
    for (int k = 1; k <= config.episodes; ++k) {
        state.episode = k;
        const PlanResult plan = leader_plan(state, config.schedule);
        const Trajectory traj = run_episode(config.mdp, plan.greedy, rng);
        const int s1 = traj.front().s;
        const double instant =
            setup.bi.values.v[0](s1) - values.initial_values(plan.greedy)(s1);
        cum += instant;
        trace.episodes.push_back({s1, instant, cum});
        for (const auto& step : traj) leader_update(state, step);

        if (config.diagnostics_every > 0 && k % config.diagnostics_every == 0) {
            const bool optimism_ok = plan.v_bar[0](s1) >= setup.bi.values.v[0](s1) - 1e-9;
            std::vector<GrowthRecord> growth;
            if (setup.growth_possible)
                growth = design_growth_diagnostic(state, setup.lambda_star, g,
                                                  setup.bi.gaps.delta_min, config.diag_delta, 0);
            const auto widths = confidence_width_diagnostic(
                state, config.schedule, setup.reachable, setup.lambda_plus_per_stage, g,
                config.diag_delta);
            for (int h = 0; h < config.mdp.horizon; ++h) {
                DiagnosticRow row;
                row.episode = k;
                row.stage = h;
                if (setup.growth_possible && !growth[h].skipped) {
                    row.min_eig_on_span = growth[h].lhs_min_eig_on_span;
                    row.growth_bound_rhs = growth[h].rhs_bound;
                    row.growth_holds = growth[h].holds;
                    row.growth_vacuous = growth[h].vacuous;
                } else {
                    row.min_eig_on_span = std::numeric_limits<double>::quiet_NaN();
                    row.growth_bound_rhs = std::numeric_limits<double>::quiet_NaN();
                }
                row.max_conf_width = widths[h].max_width;
                row.width_envelope = widths[h].envelope;
                row.optimism_ok = optimism_ok;
                trace.diagnostics.push_back(row);
            }
        }
    }

    if (!config.out_dir.empty()) {
        write_trace_csv(config.out_dir + "/trace_seed" + std::to_string(seed) + ".csv", trace);
        if (config.diagnostics_every > 0)
            write_diagnostics_csv(
                config.out_dir + "/diagnostics_seed" + std::to_string(seed) + ".csv", trace);
        if (config.dump_agent_state)
            write_agent_state_json(
                config.out_dir + "/agent_state_seed" + std::to_string(seed) + ".json", state);
    }
    return trace;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (!config.out_dir.empty()) ensure_directory(config.out_dir);

    SharedSetup setup;
    setup.bi = backward_induction(config.mdp);
    setup.reachable = reachable_sets(config.mdp);
    setup.lambda_star = optimal_covariance(config.mdp, config.representations[0]);
    setup.lambda_plus_per_stage.assign(config.mdp.horizon, 0.0);
    for (const auto& fm : config.representations) {
        const auto covs = optimal_covariance(config.mdp, fm);
        for (int h = 0; h < config.mdp.horizon; ++h)
            setup.lambda_plus_per_stage[h] =
                std::max(setup.lambda_plus_per_stage[h], min_positive_eigenvalue(covs[h]));
        for (int d : fm.dims) setup.d_max = std::max(setup.d_max, d);
    }
    setup.growth_possible = setup.bi.gaps.has_positive_gap;

    ExperimentResult result;
    result.traces.resize(config.seeds.size());

    const int workers =
        std::min<int>(config.threads, static_cast<int>(config.seeds.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= config.seeds.size()) return;
            try {
                result.traces[i] = run_single_seed(config, setup, config.seeds[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    result.mean_cum_regret.assign(config.episodes, 0.0);
    result.std_cum_regret.assign(config.episodes, 0.0);
    const double n = static_cast<double>(config.seeds.size());
    for (int k = 0; k < config.episodes; ++k) {
        double mean = 0.0;
        for (const auto& trace : result.traces) mean += trace.episodes[k].cum_regret;
        mean /= n;
        double var = 0.0;
        for (const auto& trace : result.traces) {
            const double diff = trace.episodes[k].cum_regret - mean;
            var += diff * diff;
        }
        result.mean_cum_regret[k] = mean;
        result.std_cum_regret[k] = std::sqrt(var / n);
    }

    if (!config.out_dir.empty()) {
        write_summary_csv(config.out_dir + "/summary.csv", result);
        write_experiment_metadata(config.out_dir + "/metadata.json", config);
    }
    return result;
}

}  // namespace unisoft
