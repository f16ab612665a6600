#include "unisoft/mdp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace unisoft {

void TabularMdp::validate() const {
    if (num_states <= 0) throw std::invalid_argument("num_states must be positive");
    if (num_actions <= 0) throw std::invalid_argument("num_actions must be positive");
    if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
    if (static_cast<int>(reward.size()) != horizon)
        throw std::invalid_argument("reward: expected one S x A table per stage");
    if (static_cast<int>(transition.size()) != horizon)
        throw std::invalid_argument("transition: expected one (S*A) x S table per stage");
    for (int h = 0; h < horizon; ++h) {
        if (reward[h].rows() != num_states || reward[h].cols() != num_actions)
            throw std::invalid_argument("reward: wrong shape at stage " + std::to_string(h));
        if (transition[h].rows() != static_cast<Eigen::Index>(num_states) * num_actions ||
            transition[h].cols() != num_states)
            throw std::invalid_argument("transition: wrong shape at stage " + std::to_string(h));
        for (int sa = 0; sa < num_states * num_actions; ++sa) {
            const auto row = transition[h].row(sa);
            if (row.minCoeff() < 0.0)
                throw std::invalid_argument("transition: negative entry at stage " +
                                            std::to_string(h));
            if (std::abs(row.sum() - 1.0) > kProbabilityTol)
                throw std::invalid_argument("transition: row does not sum to 1 at stage " +
                                            std::to_string(h));
        }
        if (noise.kind == NoiseModel::Kind::Bernoulli &&
            (reward[h].minCoeff() < 0.0 || reward[h].maxCoeff() > 1.0))
            throw std::invalid_argument(
                "reward: Bernoulli noise requires means in [0,1], violated at stage " +
                std::to_string(h));
    }
    if (init_dist.size() != num_states)
        throw std::invalid_argument("init_dist: wrong length");
    if (init_dist.minCoeff() < 0.0) throw std::invalid_argument("init_dist: negative entry");
    if (std::abs(init_dist.sum() - 1.0) > kProbabilityTol)
        throw std::invalid_argument("init_dist: does not sum to 1");
}

void DeterministicPolicy::validate(const TabularMdp& mdp) const {
    if (static_cast<int>(action.size()) != mdp.horizon)
        throw std::invalid_argument("policy: expected one decision rule per stage");
    for (int h = 0; h < mdp.horizon; ++h) {
        if (static_cast<int>(action[h].size()) != mdp.num_states)
            throw std::invalid_argument("policy: wrong number of states at stage " +
                                        std::to_string(h));
        for (int s = 0; s < mdp.num_states; ++s)
            if (action[h][s] < 0 || action[h][s] >= mdp.num_actions)
                throw std::invalid_argument("policy: action index out of range at stage " +
                                            std::to_string(h));
    }
}

BackwardInductionResult backward_induction(const TabularMdp& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    BackwardInductionResult out;
    out.values.q.resize(H);
    out.values.v.assign(H, Eigen::VectorXd::Zero(S));
    out.policy.action.assign(H, std::vector<int>(S, 0));
    out.gaps.gap.resize(H);
    out.gaps.delta_min = std::numeric_limits<double>::infinity();

    Eigen::VectorXd vnext = Eigen::VectorXd::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        Eigen::MatrixXd q(S, A);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a)
                q(s, a) = mdp.reward[h](s, a) + mdp.transition[h].row(mdp.sa_index(s, a)) * vnext;
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (q(s, a) > q(s, best)) best = a;
            out.policy.action[h][s] = best;
            out.values.v[h](s) = q(s, best);
            for (int a = 0; a < A; ++a)
                if (a != best && std::abs(q(s, a) - q(s, best)) < kValueTiesTol) {
                    out.gaps.optimal_unique = false;
                    out.gaps.tie_locations.emplace_back(h, s);
                    break;
                }
        }
        out.values.q[h] = q;
        out.gaps.gap[h] = out.values.v[h].replicate(1, A) - q;
        // Clamp tiny negatives from the subtraction above.
        out.gaps.gap[h] = out.gaps.gap[h].cwiseMax(0.0);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double g = out.gaps.gap[h](s, a);
                if (g > 0.0 && g < out.gaps.delta_min) {
                    out.gaps.delta_min = g;
                    out.gaps.has_positive_gap = true;
                }
            }
        vnext = out.values.v[h];
    }
    return out;
}

ValueTables policy_evaluation(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    policy.validate(mdp);
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    ValueTables out;
    out.q.resize(H);
    out.v.assign(H, Eigen::VectorXd::Zero(S));
    Eigen::VectorXd vnext = Eigen::VectorXd::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        Eigen::MatrixXd q(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                q(s, a) = mdp.reward[h](s, a) + mdp.transition[h].row(mdp.sa_index(s, a)) * vnext;
        out.q[h] = q;
        for (int s = 0; s < S; ++s) out.v[h](s) = q(s, policy.at(h, s));
        vnext = out.v[h];
    }
    return out;
}

namespace {

OccupancyMeasure occupancy_impl(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                Eigen::VectorXd rho1) {
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    OccupancyMeasure out;
    out.rho.resize(H);
    out.rho_sa.resize(H);
    Eigen::VectorXd rho = std::move(rho1);
    for (int h = 0; h < H; ++h) {
        out.rho[h] = rho;
        out.rho_sa[h] = Eigen::MatrixXd::Zero(S, A);
        for (int s = 0; s < S; ++s) out.rho_sa[h](s, policy.at(h, s)) = rho(s);
        if (h + 1 < H) {
            Eigen::VectorXd next = Eigen::VectorXd::Zero(S);
            for (int s = 0; s < S; ++s)
                next += rho(s) *
                        mdp.transition[h].row(mdp.sa_index(s, policy.at(h, s))).transpose();
            rho = next;
        }
    }
    return out;
}

}  // namespace

OccupancyMeasure occupancy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    policy.validate(mdp);
    return occupancy_impl(mdp, policy, mdp.init_dist);
}

OccupancyMeasure occupancy_from(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                int start_state) {
    policy.validate(mdp);
    if (start_state < 0 || start_state >= mdp.num_states)
        throw std::invalid_argument("start_state out of range");
    Eigen::VectorXd rho1 = Eigen::VectorXd::Zero(mdp.num_states);
    rho1(start_state) = 1.0;
    return occupancy_impl(mdp, policy, std::move(rho1));
}

std::vector<std::vector<bool>> reachable_states(const TabularMdp& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    std::vector<std::vector<bool>> reach(H, std::vector<bool>(S, false));
    for (int s = 0; s < S; ++s) reach[0][s] = mdp.init_dist(s) > 0.0;
    for (int h = 0; h + 1 < H; ++h)
        for (int s = 0; s < S; ++s) {
            if (!reach[h][s]) continue;
            for (int a = 0; a < A; ++a) {
                const auto row = mdp.transition[h].row(mdp.sa_index(s, a));
                for (int sn = 0; sn < S; ++sn)
                    if (row(sn) > 0.0) reach[h + 1][sn] = true;
            }
        }
    return reach;
}

std::vector<std::vector<std::pair<int, int>>> reachable_sets(const TabularMdp& mdp) {
    const auto reach = reachable_states(mdp);
    std::vector<std::vector<std::pair<int, int>>> out(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.num_states; ++s)
            if (reach[h][s])
                for (int a = 0; a < mdp.num_actions; ++a) out[h].emplace_back(s, a);
    return out;
}

std::vector<Eigen::VectorXd> expected_features(const TabularMdp& mdp,
                                               const DeterministicPolicy& policy,
                                               const FeatureMap& fm) {
    if (fm.horizon() != mdp.horizon || fm.num_states != mdp.num_states ||
        fm.num_actions != mdp.num_actions)
        throw std::invalid_argument("expected_features: feature map shape mismatch");
    const auto occ = occupancy(mdp, policy);
    std::vector<Eigen::VectorXd> out(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(fm.dims[h]);
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a)
                if (occ.rho_sa[h](s, a) > 0.0) psi += occ.rho_sa[h](s, a) * fm.vec(h, s, a);
        out[h] = psi;
    }
    return out;
}

double gap_decomposition_regret(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                const GapTable& gaps, int start_state) {
    const auto occ = occupancy_from(mdp, policy, start_state);
    double total = 0.0;
    for (int h = 0; h < mdp.horizon; ++h)
        total += (occ.rho_sa[h].array() * gaps.gap[h].array()).sum();
    return total;
}

}  // namespace unisoft
