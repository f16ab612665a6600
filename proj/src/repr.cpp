#include "unisoft/repr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "unisoft/linalg.hpp"

namespace unisoft {

void FeatureMap::validate() const {
    if (dims.empty()) throw std::invalid_argument("feature map: no stages");
    if (phi.size() != dims.size())
        throw std::invalid_argument("feature map: dims/phi stage count mismatch");
    for (std::size_t h = 0; h < dims.size(); ++h) {
        if (dims[h] <= 0)
            throw std::invalid_argument("feature map: non-positive dimension at stage " +
                                        std::to_string(h));
        if (phi[h].rows() != static_cast<Eigen::Index>(num_states) * num_actions ||
            phi[h].cols() != dims[h])
            throw std::invalid_argument("feature map: wrong phi shape at stage " +
                                        std::to_string(h));
    }
}

bool FeatureMap::within_unit_ball() const {
    for (const auto& stage : phi)
        for (Eigen::Index r = 0; r < stage.rows(); ++r)
            if (stage.row(r).norm() > 1.0 + 1e-9) return false;
    return true;
}

namespace {

void check_shapes(const TabularMdp& mdp, const FeatureMap& fm) {
    if (fm.horizon() != mdp.horizon || fm.num_states != mdp.num_states ||
        fm.num_actions != mdp.num_actions)
        throw std::invalid_argument("feature map does not match the MDP shape");
    fm.validate();
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.solve(b);
}

}  // namespace

LowRankCheck verify_low_rank(const TabularMdp& mdp, const FeatureMap& fm,
                             const std::optional<LowRankModel>& model, double tol) {
    check_shapes(mdp, fm);
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;

    LowRankCheck out;
    if (model) {
        if (static_cast<int>(model->theta.size()) != H ||
            static_cast<int>(model->mu.size()) != H - 1)
            throw std::invalid_argument("low-rank model: wrong number of stages");
        for (int h = 0; h < H; ++h) {
            if (model->theta[h].size() != fm.dims[h])
                throw std::invalid_argument("low-rank model: theta dimension mismatch at stage " +
                                            std::to_string(h));
            if (h + 1 < H && (model->mu[h].rows() != S || model->mu[h].cols() != fm.dims[h]))
                throw std::invalid_argument("low-rank model: mu shape mismatch at stage " +
                                            std::to_string(h));
        }
        out.model = *model;
    } else {
        out.model.theta.resize(H);
        out.model.mu.resize(H - 1);
        for (int h = 0; h < H; ++h) {
            Eigen::VectorXd r(S * A);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) r(mdp.sa_index(s, a)) = mdp.reward[h](s, a);
            out.model.theta[h] = least_squares(fm.phi[h], r);
            if (h + 1 < H) {
                out.model.mu[h] = Eigen::MatrixXd(S, fm.dims[h]);
                for (int sn = 0; sn < S; ++sn)
                    out.model.mu[h].row(sn) =
                        least_squares(fm.phi[h], mdp.transition[h].col(sn)).transpose();
            }
        }
    }

    double worst = 0.0;
    for (int h = 0; h < H; ++h) {
        const Eigen::VectorXd pred_r = fm.phi[h] * out.model.theta[h];
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                worst = std::max(worst,
                                 std::abs(pred_r(mdp.sa_index(s, a)) - mdp.reward[h](s, a)));
        if (h + 1 < H) {
            const Eigen::MatrixXd pred_p = fm.phi[h] * out.model.mu[h].transpose();
            worst = std::max(worst, (pred_p - mdp.transition[h]).cwiseAbs().maxCoeff());
        }
    }
    out.max_residual = worst;
    out.certified = worst <= tol;
    return out;
}

std::vector<Eigen::MatrixXd> optimal_covariance(const TabularMdp& mdp, const FeatureMap& fm) {
    check_shapes(mdp, fm);
    const auto bi = backward_induction(mdp);
    const auto occ = occupancy(mdp, bi.policy);
    std::vector<Eigen::MatrixXd> out(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(fm.dims[h], fm.dims[h]);
        for (int s = 0; s < mdp.num_states; ++s) {
            const double w = occ.rho[h](s);
            if (w <= 0.0) continue;
            const Eigen::VectorXd f = fm.vec(h, s, bi.policy.at(h, s));
            cov.noalias() += w * f * f.transpose();
        }
        out[h] = cov;
    }
    return out;
}

double min_positive_eigenvalue(const Eigen::MatrixXd& m, double rank_tol) {
    if (m.rows() != m.cols()) throw std::invalid_argument("min_positive_eigenvalue: not square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("min_positive_eigenvalue: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const auto& ev = es.eigenvalues();
    const double lambda_max = ev(ev.size() - 1);
    if (lambda_max <= 0.0) return 0.0;
    const double cutoff = rank_tol * lambda_max;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > cutoff) return ev(i);
    return 0.0;
}

namespace {

/// Rows {phi_h(s, pi*(s)) : rho*_h(s) > 0} for one stage.
Eigen::MatrixXd optimal_feature_stack(const TabularMdp& mdp, const FeatureMap& fm,
                                      const DeterministicPolicy& opt,
                                      const OccupancyMeasure& occ, int h) {
    std::vector<int> states;
    for (int s = 0; s < mdp.num_states; ++s)
        if (occ.rho[h](s) > 0.0) states.push_back(s);
    Eigen::MatrixXd stack(states.size(), fm.dims[h]);
    for (std::size_t i = 0; i < states.size(); ++i)
        stack.row(i) = fm.phi[h].row(mdp.sa_index(states[i], opt.at(h, states[i])));
    return stack;
}

}  // namespace

ReprDiagnostics unisoft_check(const TabularMdp& mdp, const FeatureMap& fm, double rank_tol) {
    check_shapes(mdp, fm);
    const auto bi = backward_induction(mdp);
    const auto occ = occupancy(mdp, bi.policy);
    const auto reach = reachable_states(mdp);
    const auto covs = optimal_covariance(mdp, fm);

    ReprDiagnostics out;
    out.stages.resize(mdp.horizon);
    out.all_unisoft = true;
    out.norm_warning = !fm.within_unit_ball();
    out.lambda_plus_overall = std::numeric_limits<double>::infinity();

    for (int h = 0; h < mdp.horizon; ++h) {
        auto& st = out.stages[h];
        const Eigen::MatrixXd opt_stack = optimal_feature_stack(mdp, fm, bi.policy, occ, h);
        const Eigen::MatrixXd opt_basis = span_basis(opt_stack, rank_tol);
        st.optimal_span_rank = static_cast<int>(opt_basis.cols());

        std::vector<Eigen::Index> reach_rows;
        for (int s = 0; s < mdp.num_states; ++s)
            if (reach[h][s])
                for (int a = 0; a < mdp.num_actions; ++a)
                    reach_rows.push_back(mdp.sa_index(s, a));
        Eigen::MatrixXd reach_stack(reach_rows.size(), fm.dims[h]);
        for (std::size_t i = 0; i < reach_rows.size(); ++i)
            reach_stack.row(i) = fm.phi[h].row(reach_rows[i]);
        st.reachable_span_rank = numeric_rank(reach_stack, rank_tol);

        st.is_unisoft = true;
        for (Eigen::Index i = 0; i < reach_stack.rows(); ++i) {
            const Eigen::VectorXd f = reach_stack.row(i).transpose();
            if (span_residual(opt_basis, f) > rank_tol * f.norm()) {
                st.is_unisoft = false;
                break;
            }
        }
        st.optimal_cov = covs[h];
        st.lambda_plus = min_positive_eigenvalue(covs[h], rank_tol);
        out.all_unisoft = out.all_unisoft && st.is_unisoft;
        out.lambda_plus_overall = std::min(out.lambda_plus_overall, st.lambda_plus);
    }
    return out;
}

MixingReport unisoft_mixing_check(const TabularMdp& mdp, const std::vector<FeatureMap>& fms,
                                  double rank_tol) {
    if (fms.empty()) throw std::invalid_argument("unisoft_mixing_check: empty representation list");
    for (const auto& fm : fms) check_shapes(mdp, fm);
    const auto bi = backward_induction(mdp);
    const auto occ = occupancy(mdp, bi.policy);
    const auto reach = reachable_states(mdp);

    MixingReport out;
    out.witness.assign(mdp.horizon,
                       Eigen::MatrixXi::Constant(mdp.num_states, mdp.num_actions, -1));
    for (int h = 0; h < mdp.horizon; ++h) {
        std::vector<Eigen::MatrixXd> bases;
        bases.reserve(fms.size());
        for (const auto& fm : fms)
            bases.push_back(span_basis(optimal_feature_stack(mdp, fm, bi.policy, occ, h), rank_tol));
        for (int s = 0; s < mdp.num_states; ++s) {
            if (!reach[h][s]) continue;
            for (int a = 0; a < mdp.num_actions; ++a) {
                int found = -1;
                for (std::size_t j = 0; j < fms.size(); ++j) {
                    const Eigen::VectorXd f = fms[j].vec(h, s, a);
                    if (span_residual(bases[j], f) <= rank_tol * f.norm()) {
                        found = static_cast<int>(j);
                        break;
                    }
                }
                out.witness[h](s, a) = found;
                if (found < 0) out.failures.emplace_back(h, s, a);
            }
        }
    }
    out.mixing_holds = out.failures.empty();
    return out;
}

std::pair<FeatureMap, LowRankModel> make_non_unisoft(const FeatureMap& fm,
                                                     const LowRankModel& model,
                                                     const TabularMdp& mdp, int stage) {
    check_shapes(mdp, fm);
    if (stage < 0 || stage >= mdp.horizon)
        throw std::invalid_argument("make_non_unisoft: stage out of range");
    const auto pre = verify_low_rank(mdp, fm, model, 1e-12);
    if (!pre.certified)
        throw std::invalid_argument("make_non_unisoft: model does not certify the feature map");
    const auto bi = backward_induction(mdp);

    FeatureMap out = fm;
    LowRankModel out_model = model;
    const int d = fm.dims[stage];
    out.dims[stage] = 2 * d;
    Eigen::MatrixXd phi2 =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mdp.num_states) * mdp.num_actions, 2 * d);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a) {
            const int sa = mdp.sa_index(s, a);
            if (a == bi.policy.at(stage, s))
                phi2.block(sa, d, 1, d) = fm.phi[stage].row(sa);
            else
                phi2.block(sa, 0, 1, d) = fm.phi[stage].row(sa);
        }
    out.phi[stage] = phi2;

    Eigen::VectorXd theta2(2 * d);
    theta2 << model.theta[stage], model.theta[stage];
    out_model.theta[stage] = theta2;
    if (stage + 1 < mdp.horizon) {
        Eigen::MatrixXd mu2(mdp.num_states, 2 * d);
        mu2 << model.mu[stage], model.mu[stage];
        out_model.mu[stage] = mu2;
    }
    return {std::move(out), std::move(out_model)};
}

BuiltinExample builtin_example(const std::string& name) {
    if (name != "appendix-f") throw std::invalid_argument("unknown example name: " + name);

    BuiltinExample ex;
    TabularMdp& m = ex.mdp;
    m.num_states = 2;
    m.num_actions = 2;
    m.horizon = 2;
    m.noise = NoiseModel::bernoulli();
    m.reward.resize(2);
    m.reward[0] = Eigen::MatrixXd::Ones(2, 2);
    m.reward[1] = Eigen::MatrixXd(2, 2);
    m.reward[1] << 1.0, 7.0 / 8.0, 1.0 / 2.0, 5.0 / 8.0;
    m.transition.resize(2);
    m.transition[0] = Eigen::MatrixXd(4, 2);
    m.transition[0] << 1.0, 0.0,            // (s1, a1)
        1.0 / 2.0, 1.0 / 2.0,               // (s1, a2)
        1.0 / 2.0, 1.0 / 2.0,               // (s2, a1)
        3.0 / 4.0, 1.0 / 4.0;               // (s2, a2)
    // The transition out of the final stage never enters any computation;
    // it is fixed to uniform so the bundle is a complete MDP.
    m.transition[1] = Eigen::MatrixXd::Constant(4, 2, 0.5);
    m.init_dist = Eigen::VectorXd::Constant(2, 0.5);
    m.validate();

    FeatureMap phi1;
    phi1.num_states = 2;
    phi1.num_actions = 2;
    phi1.dims = {2, 2};
    phi1.phi.resize(2);
    phi1.phi[0] = Eigen::MatrixXd(4, 2);
    phi1.phi[0] << 1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.75, 0.25;
    phi1.phi[1] = Eigen::MatrixXd(4, 2);
    phi1.phi[1] << 0.0, 1.0, 0.25, 0.75, 1.0, 0.0, 0.75, 0.25;

    FeatureMap phi2 = phi1;
    phi2.phi[1] = Eigen::MatrixXd(4, 2);
    phi2.phi[1] << 30.0 / 89.0, 74.0 / 89.0, 0.25, 0.75, 1.0, 0.0, 75.0 / 356.0, 185.0 / 356.0;

    LowRankModel shared;
    shared.theta.resize(2);
    shared.theta[0] = Eigen::VectorXd(2);
    shared.theta[0] << 1.0, 1.0;
    shared.theta[1] = Eigen::VectorXd(2);
    shared.theta[1] << 0.5, 1.0;
    shared.mu.resize(1);
    shared.mu[0] = Eigen::MatrixXd::Identity(2, 2);

    auto [phi3, model3] = make_non_unisoft(phi2, shared, m, 0);
    auto [phi4, model4] = make_non_unisoft(phi1, shared, m, 0);

    ex.reps = {std::move(phi1), std::move(phi2), std::move(phi3), std::move(phi4)};
    ex.models = {shared, shared, std::move(model3), std::move(model4)};
    return ex;
}

double ibe_monte_carlo(const TabularMdp& mdp, const FeatureMap& fm, int n_samples,
                       double bound_d, Rng& rng) {
    check_shapes(mdp, fm);
    if (n_samples < 1) throw std::invalid_argument("ibe_monte_carlo: n_samples must be >= 1");
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;

    // Column-space bases of the stacked feature matrices, one per stage.
    std::vector<Eigen::MatrixXd> col_bases(H);
    for (int h = 0; h < H; ++h)
        col_bases[h] = span_basis(fm.phi[h].transpose(), kDefaultRankTol);

    auto projection_residual = [&](int h, const Eigen::VectorXd& y) {
        const auto& u = col_bases[h];
        if (u.cols() == 0) return y.cwiseAbs().maxCoeff();
        return (y - u * (u.transpose() * y)).cwiseAbs().maxCoeff();
    };

    double worst = 0.0;

    // Final stage: the Bellman image is the reward vector itself.
    {
        Eigen::VectorXd y(S * A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) y(mdp.sa_index(s, a)) = mdp.reward[H - 1](s, a);
        worst = std::max(worst, projection_residual(H - 1, y));
    }

    for (int h = 0; h + 1 < H; ++h) {
        const int hn = h + 1;
        // Sample theta_{h+1} inside {theta : |phi.theta| <= D for all (s,a)}
        // by drawing uniformly from a ball of radius D / sigma_min within the
        // row space of the stacked stage-(h+1) features and rejecting
        // violators. Directions orthogonal to every feature are irrelevant.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(fm.phi[hn],
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sigma = svd.singularValues();
        if (sigma.size() == 0 || sigma(0) <= 0.0)
            throw std::invalid_argument("ibe_monte_carlo: degenerate feature span at stage " +
                                        std::to_string(hn));
        Eigen::Index r = 0;
        while (r < sigma.size() && sigma(r) > kDefaultRankTol * sigma(0)) ++r;
        const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
        const double radius = bound_d / sigma(r - 1);

        long attempts = 0;
        const long max_attempts = 20000L * n_samples;
        for (int sample = 0; sample < n_samples; ++sample) {
            Eigen::VectorXd theta;
            while (true) {
                if (++attempts > max_attempts)
                    throw std::runtime_error("ibe_monte_carlo: rejection sampling stalled");
                Eigen::VectorXd g(r);
                for (Eigen::Index i = 0; i < r; ++i) g(i) = rng.gaussian();
                const double gn = g.norm();
                if (gn == 0.0) continue;
                const double scale =
                    radius * std::pow(rng.uniform01(), 1.0 / static_cast<double>(r)) / gn;
                theta = v * (scale * g);
                if ((fm.phi[hn] * theta).cwiseAbs().maxCoeff() <= bound_d) break;
            }
            // Bellman image of Q_{h+1} = phi . theta over all stage-h pairs.
            Eigen::VectorXd qnext = fm.phi[hn] * theta;
            Eigen::VectorXd vnext(S);
            for (int s = 0; s < S; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A; ++a) best = std::max(best, qnext(mdp.sa_index(s, a)));
                vnext(s) = best;
            }
            Eigen::VectorXd y(S * A);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const int sa = mdp.sa_index(s, a);
                    y(sa) = mdp.reward[h](s, a) + mdp.transition[h].row(sa) * vnext;
                }
            worst = std::max(worst, projection_residual(h, y));
        }
    }
    return worst;
}

std::optional<NecessityWitness> find_necessity_witness(const TabularMdp& mdp,
                                                       const FeatureMap& fm, double rank_tol) {
    check_shapes(mdp, fm);
    const auto bi = backward_induction(mdp);
    if (!bi.gaps.optimal_unique)
        throw std::invalid_argument("find_necessity_witness: requires a unique optimal policy");
    const auto diag = unisoft_check(mdp, fm, rank_tol);

    int failing = -1;
    for (int h = 0; h < mdp.horizon; ++h)
        if (!diag.stages[h].is_unisoft) {
            failing = h;
            break;
        }
    if (failing < 0) return std::nullopt;

    const auto occ_star = occupancy(mdp, bi.policy);
    const auto reach = reachable_states(mdp);
    const Eigen::MatrixXd opt_basis =
        span_basis(optimal_feature_stack(mdp, fm, bi.policy, occ_star, failing), rank_tol);
    const Eigen::VectorXd psi_star = expected_features(mdp, bi.policy, fm)[failing];

    // Deviate from pi* at a single reachable (s,a) whose feature leaves the
    // optimal span. States off the optimal trajectory additionally get a
    // reaching prefix. Among all certified candidates keep the one whose
    // expected-feature difference sticks out of the span the most.
    std::optional<NecessityWitness> best;
    for (int s = 0; s < mdp.num_states; ++s) {
        if (!reach[failing][s]) continue;
        for (int a = 0; a < mdp.num_actions; ++a) {
            const Eigen::VectorXd f = fm.vec(failing, s, a);
            if (span_residual(opt_basis, f) <= rank_tol * f.norm()) continue;

            DeterministicPolicy pol = bi.policy;
            if (occ_star.rho[failing](s) <= 0.0) {
                // Reaching prefix: backward sets of states from which s is
                // attainable at the failing stage, then the lowest-index
                // action that keeps positive probability of staying inside.
                std::vector<std::vector<bool>> can(failing + 1,
                                                   std::vector<bool>(mdp.num_states, false));
                can[failing][s] = true;
                for (int t = failing - 1; t >= 0; --t)
                    for (int sp = 0; sp < mdp.num_states; ++sp)
                        for (int ap = 0; ap < mdp.num_actions; ++ap) {
                            double p = 0.0;
                            for (int sn = 0; sn < mdp.num_states; ++sn)
                                if (can[t + 1][sn]) p += mdp.transition[t](mdp.sa_index(sp, ap), sn);
                            if (p > 0.0) {
                                can[t][sp] = true;
                                break;
                            }
                        }
                for (int t = 0; t < failing; ++t)
                    for (int sp = 0; sp < mdp.num_states; ++sp) {
                        if (!can[t][sp]) continue;
                        for (int ap = 0; ap < mdp.num_actions; ++ap) {
                            double p = 0.0;
                            for (int sn = 0; sn < mdp.num_states; ++sn)
                                if (can[t + 1][sn]) p += mdp.transition[t](mdp.sa_index(sp, ap), sn);
                            if (p > 0.0) {
                                pol.action[t][sp] = ap;
                                break;
                            }
                        }
                    }
            }
            pol.action[failing][s] = a;

            const Eigen::VectorXd psi = expected_features(mdp, pol, fm)[failing];
            const double resid = span_residual(opt_basis, psi - psi_star);
            if (resid > rank_tol && (!best || resid > best->span_residual))
                best = NecessityWitness{failing, pol, psi, resid};
        }
    }
    if (!best)
        throw std::runtime_error(
            "find_necessity_witness: no deviation certified beyond the rank tolerance");
    return best;
}

EmpiricalCovariance empirical_covariance(
    const std::vector<std::vector<Eigen::VectorXd>>& trajectories, int d, double rank_tol) {
    if (trajectories.empty()) throw std::invalid_argument("empirical_covariance: no trajectories");
    if (d <= 0) throw std::invalid_argument("empirical_covariance: d must be positive");
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (const auto& traj : trajectories)
        for (const auto& f : traj) {
            if (f.size() != d)
                throw std::invalid_argument("empirical_covariance: feature length mismatch");
            acc.noalias() += f * f.transpose();
        }
    EmpiricalCovariance out;
    out.matrix = acc / static_cast<double>(trajectories.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix);
    const auto& ev = es.eigenvalues();
    const double lambda_max = std::max(ev(ev.size() - 1), 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > rank_tol * lambda_max && ev(i) > 0.0) ++rank;
    out.rank = rank;
    out.lambda_min = std::max(ev(0), 0.0);
    return out;
}

}  // namespace unisoft
