#include "unisoft/agents.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace unisoft {

void BetaSchedule::validate() const {
    if (c_beta < 0.0) throw std::invalid_argument("schedule.c_beta must be >= 0");
    if (delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("schedule.delta must be a probability in (0,1)");
    if (num_reps < 1) throw std::invalid_argument("schedule.N must be >= 1");
    if (kind == Kind::ExperimentFixedK && (!fixed_k || *fixed_k < 1))
        throw std::invalid_argument("schedule.K is required for the fixed-K schedule");
}

double beta_value(const BetaSchedule& schedule, int k, int d, int horizon) {
    if (k < 1) throw std::invalid_argument("beta_value: k must be >= 1");
    schedule.validate();
    const double dd = d, h = horizon, n = schedule.num_reps;
    switch (schedule.kind) {
        case BetaSchedule::Kind::AnytimeLsvi:
            return schedule.c_beta * dd * h * std::sqrt(std::log(2.0 * dd * h * k / schedule.delta));
        case BetaSchedule::Kind::AnytimeLeader:
            return schedule.c_beta * dd * h *
                   std::sqrt(n * std::log(2.0 * dd * n * h * k / schedule.delta));
        case BetaSchedule::Kind::ExperimentFixedK: {
            const double kk = *schedule.fixed_k;
            if (schedule.num_reps == 1)
                return schedule.c_beta * dd * h * std::sqrt(std::log(dd * kk));
            return schedule.c_beta * dd * h * std::sqrt(n * std::log(n * dd * kk));
        }
    }
    throw std::logic_error("beta_value: unreachable");
}

LeaderState::LeaderState(std::vector<FeatureMap> representations, double lambda)
    : reps(std::move(representations)), lambda_reg(lambda) {
    if (reps.empty()) throw std::invalid_argument("LeaderState: at least one representation");
    if (lambda_reg <= 0.0) throw std::invalid_argument("LeaderState: lambda must be positive");
    num_states = reps[0].num_states;
    num_actions = reps[0].num_actions;
    horizon = reps[0].horizon();
    for (const auto& fm : reps) {
        fm.validate();
        if (fm.num_states != num_states || fm.num_actions != num_actions ||
            fm.horizon() != horizon)
            throw std::invalid_argument("LeaderState: representations disagree on the MDP shape");
    }
    design.resize(horizon);
    reward_sum.assign(horizon, Eigen::MatrixXd::Zero(num_states, num_actions));
    visit_count.assign(horizon, Eigen::MatrixXd::Zero(num_states, num_actions));
    transition_count.assign(
        horizon, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_states) * num_actions,
                                       num_states));
    for (int h = 0; h < horizon; ++h) {
        design[h].reserve(reps.size());
        for (const auto& fm : reps)
            design[h].push_back(lambda_reg *
                                Eigen::MatrixXd::Identity(fm.dims[h], fm.dims[h]));
    }
}

void leader_update(LeaderState& state, const Transition& t) {
    if (t.h < 0 || t.h >= state.horizon || t.s < 0 || t.s >= state.num_states || t.a < 0 ||
        t.a >= state.num_actions || t.next_state < 0 || t.next_state >= state.num_states)
        throw std::out_of_range("leader_update: transition index out of range");
    state.visit_count[t.h](t.s, t.a) += 1.0;
    state.reward_sum[t.h](t.s, t.a) += t.reward;
    state.transition_count[t.h](state.sa_index(t.s, t.a), t.next_state) += 1.0;
    for (std::size_t j = 0; j < state.reps.size(); ++j) {
        const Eigen::VectorXd f = state.reps[j].vec(t.h, t.s, t.a);
        state.design[t.h][j].noalias() += f * f.transpose();
    }
}

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& lambda_mat, const Eigen::VectorXd& b) {
    if (lambda_mat.rows() != lambda_mat.cols() || lambda_mat.rows() != b.size())
        throw std::invalid_argument("ridge_solve: shape mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(lambda_mat);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("ridge_solve: matrix is not positive definite");
    Eigen::VectorXd w = llt.solve(b);
    const double scale = std::max(1.0, b.norm());
    if ((lambda_mat * w - b).norm() > 1e-10 * scale)
        throw std::runtime_error("ridge_solve: solve residual above tolerance");
    return w;
}

PlanResult leader_plan(LeaderState& state, const BetaSchedule& schedule) {
    const int S = state.num_states, A = state.num_actions, H = state.horizon;
    const int n_reps = static_cast<int>(state.reps.size());
    if (schedule.num_reps != n_reps)
        throw std::invalid_argument("leader_plan: schedule.N must match the representation count");

    PlanResult plan;
    plan.q_bar.assign(H, Eigen::MatrixXd::Zero(S, A));
    plan.v_bar.assign(H, Eigen::VectorXd::Zero(S));
    plan.greedy.action.assign(H, std::vector<int>(S, 0));

    Eigen::VectorXd vnext = Eigen::VectorXd::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
        std::vector<Eigen::VectorXd> weights;
        std::vector<double> betas;
        llts.reserve(n_reps);
        weights.reserve(n_reps);
        betas.reserve(n_reps);
        for (int j = 0; j < n_reps; ++j) {
            const auto& fm = state.reps[j];
            llts.emplace_back(state.design[h][j]);
            if (llts.back().info() != Eigen::Success)
                throw std::runtime_error("leader_plan: design matrix lost positive definiteness");
            // Regression target from aggregates: for each visited pair,
            // reward_sum + sum_{s'} count(s') * v_next(s'), equal to the
            // per-sample sum because phi is a function of (s,a) alone.
            Eigen::VectorXd b = Eigen::VectorXd::Zero(fm.dims[h]);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    if (state.visit_count[h](s, a) <= 0.0) continue;
                    const int sa = state.sa_index(s, a);
                    const double target =
                        state.reward_sum[h](s, a) + state.transition_count[h].row(sa) * vnext;
                    b.noalias() += target * fm.phi[h].row(sa).transpose();
                }
            Eigen::VectorXd w = llts.back().solve(b);
            const double scale = std::max(1.0, b.norm());
            if ((state.design[h][j] * w - b).norm() > 1e-10 * scale)
                throw std::runtime_error("leader_plan: regression solve residual above tolerance");
            weights.push_back(std::move(w));
            betas.push_back(beta_value(schedule, state.episode, fm.dims[h], H));
        }
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const int sa = state.sa_index(s, a);
                double q = std::numeric_limits<double>::infinity();
                for (int j = 0; j < n_reps; ++j) {
                    const Eigen::VectorXd f = state.reps[j].phi[h].row(sa).transpose();
                    const double width2 = std::max(0.0, f.dot(llts[j].solve(f)));
                    const double candidate = f.dot(weights[j]) + betas[j] * std::sqrt(width2);
                    q = std::min(q, candidate);
                }
                q = std::min(q, static_cast<double>(H));
                if (state.floor_at_zero) q = std::max(q, 0.0);
                plan.q_bar[h](s, a) = q;
            }
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (plan.q_bar[h](s, a) > plan.q_bar[h](s, best)) best = a;
            plan.greedy.action[h][s] = best;
            plan.v_bar[h](s) = plan.q_bar[h](s, best);
        }
        vnext = plan.v_bar[h];
    }
    state.q_bar = plan.q_bar;
    return plan;
}

OptimismAudit optimism_audit(const PlanResult& plan, const ValueTables& optimal,
                             const Eigen::VectorXd& init_dist) {
    const int H = static_cast<int>(plan.q_bar.size());
    if (static_cast<int>(optimal.q.size()) != H || plan.q_bar.empty() ||
        plan.q_bar[0].rows() != optimal.q[0].rows() || plan.q_bar[0].cols() != optimal.q[0].cols())
        throw std::invalid_argument("optimism_audit: shape mismatch");
    OptimismAudit out;
    int support = 0, optimistic = 0;
    for (Eigen::Index s = 0; s < init_dist.size(); ++s) {
        if (init_dist(s) <= 0.0) continue;
        ++support;
        if (plan.v_bar[0](s) >= optimal.v[0](s) - 1e-9) ++optimistic;
    }
    out.fraction = support > 0 ? static_cast<double>(optimistic) / support : 1.0;
    for (int h = 0; h < H; ++h)
        for (Eigen::Index s = 0; s < plan.q_bar[h].rows(); ++s)
            for (Eigen::Index a = 0; a < plan.q_bar[h].cols(); ++a)
                if (plan.q_bar[h](s, a) < optimal.q[h](s, a) - 1e-9)
                    out.violations.emplace_back(h, static_cast<int>(s), static_cast<int>(a));
    return out;
}

}  // namespace unisoft
