#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "unisoft/mdp.hpp"
#include "unisoft/repr.hpp"
#include "unisoft/rng.hpp"

using namespace unisoft;

namespace {

TabularMdp example_mdp() { return builtin_example("appendix-f").mdp; }

FeatureMap example_rep(int i) { return builtin_example("appendix-f").reps[i]; }

TabularMdp zero_reward_mdp() {
    TabularMdp mdp = example_mdp();
    mdp.noise = NoiseModel::deterministic();
    for (auto& r : mdp.reward) r.setZero();
    return mdp;
}

}  // namespace

TEST_CASE("backward induction reproduces the worked example's values and policy") {
    const auto bi = backward_induction(example_mdp());
    CHECK_NEAR(bi.values.v[0](0), 2.0, 1e-12);
    CHECK_NEAR(bi.values.v[0](1), 61.0 / 32.0, 1e-12);
    CHECK_NEAR(bi.values.v[1](0), 1.0, 1e-12);
    CHECK_NEAR(bi.values.v[1](1), 5.0 / 8.0, 1e-12);
    CHECK(bi.policy.action[0] == std::vector<int>{0, 1});
    CHECK(bi.policy.action[1] == std::vector<int>{0, 1});
    CHECK(bi.gaps.optimal_unique);
}

TEST_CASE("gap table matches hand backward induction and the enumeration oracle") {
    const auto mdp = example_mdp();
    const auto bi = backward_induction(mdp);
    CHECK_NEAR(bi.gaps.delta_min, 3.0 / 32.0, 1e-12);
    CHECK_NEAR(bi.gaps.gap[0](0, 1), 3.0 / 16.0, 1e-12);
    CHECK_NEAR(bi.gaps.gap[0](1, 0), 3.0 / 32.0, 1e-12);
    CHECK_NEAR(bi.gaps.gap[1](0, 1), 1.0 / 8.0, 1e-12);
    CHECK_NEAR(bi.gaps.gap[1](1, 0), 1.0 / 8.0, 1e-12);

    // Independent route: Q* as the policy-enumeration max, gaps from there.
    const auto oracle = testutil::oracle_optimal_tables(mdp);
    double oracle_delta_min = std::numeric_limits<double>::infinity();
    for (int h = 0; h < mdp.horizon; ++h)
        for (int s = 0; s < mdp.num_states; ++s)
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double gap = oracle.v[h][s] - oracle.q[h][s][a];
                CHECK_NEAR(bi.gaps.gap[h](s, a), gap, 1e-10);
                if (gap > 1e-12) oracle_delta_min = std::min(oracle_delta_min, gap);
            }
    CHECK_NEAR(bi.gaps.delta_min, oracle_delta_min, 1e-10);
}

TEST_CASE("zero-reward MDP has all-zero tables and a non-unique optimum") {
    const auto bi = backward_induction(zero_reward_mdp());
    for (const auto& q : bi.values.q) CHECK(q.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& g : bi.gaps.gap) CHECK(g.cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(bi.gaps.optimal_unique);
    CHECK_FALSE(bi.gaps.has_positive_gap);
}

TEST_CASE("policy evaluation agrees with the optimal tables on the greedy policy") {
    const auto mdp = example_mdp();
    const auto bi = backward_induction(mdp);
    const auto vals = policy_evaluation(mdp, bi.policy);
    for (int h = 0; h < mdp.horizon; ++h)
        CHECK((vals.v[h] - bi.values.v[h]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("policy evaluation matches hand recursion and a Monte-Carlo rollout oracle") {
    const auto mdp = example_mdp();
    DeterministicPolicy pol;
    pol.action = {{1, 0}, {0, 1}};
    const auto vals = policy_evaluation(mdp, pol);
    CHECK_NEAR(vals.v[0](0), 29.0 / 16.0, 1e-12);

    // Rollout oracle: one million Bernoulli episodes started at state 0.
    Rng rng(20240801);
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        int s = 0;
        double ret = 0.0;
        for (int h = 0; h < mdp.horizon; ++h) {
            const int a = pol.at(h, s);
            ret += rng.bernoulli(mdp.reward[h](s, a)) ? 1.0 : 0.0;
            std::vector<double> row(mdp.num_states);
            for (int sn = 0; sn < mdp.num_states; ++sn)
                row[sn] = mdp.transition[h](mdp.sa_index(s, a), sn);
            s = rng.categorical(row);
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - 29.0 / 16.0) <= 3.0 * se);
}

TEST_CASE("policy evaluation on the zero-reward MDP is identically zero") {
    const auto mdp = zero_reward_mdp();
    Rng rng(7);
    for (int i = 0; i < 5; ++i) {
        const auto vals = policy_evaluation(mdp, testutil::random_policy(rng, mdp));
        for (const auto& v : vals.v) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("occupancy of the worked example") {
    const auto mdp = example_mdp();
    const auto bi = backward_induction(mdp);

    SUBCASE("first stage is the initial distribution") {
        Rng rng(3);
        const auto occ = occupancy(mdp, testutil::random_policy(rng, mdp));
        CHECK((occ.rho[0] - mdp.init_dist).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("optimal policy: forward product of mu with the optimal rows") {
        const auto occ = occupancy(mdp, bi.policy);
        CHECK_NEAR(occ.rho[1](0), 7.0 / 8.0, 1e-12);
        CHECK_NEAR(occ.rho[1](1), 1.0 / 8.0, 1e-12);
    }
    SUBCASE("always the first action") {
        DeterministicPolicy pol;
        pol.action = {{0, 0}, {0, 0}};
        const auto occ = occupancy(mdp, pol);
        CHECK_NEAR(occ.rho[1](0), 3.0 / 4.0, 1e-12);
        CHECK_NEAR(occ.rho[1](1), 1.0 / 4.0, 1e-12);
    }
    SUBCASE("rho_sa is rho masked by the policy's action") {
        Rng rng(11);
        const auto pol = testutil::random_policy(rng, mdp);
        const auto occ = occupancy(mdp, pol);
        for (int h = 0; h < mdp.horizon; ++h) {
            CHECK_NEAR(occ.rho_sa[h].sum(), 1.0, 1e-12);
            for (int s = 0; s < mdp.num_states; ++s)
                for (int a = 0; a < mdp.num_actions; ++a)
                    CHECK(occ.rho_sa[h](s, a) == (a == pol.at(h, s) ? occ.rho[h](s) : 0.0));
        }
    }
}

TEST_CASE("occupancy sums to one at every stage for random MDPs") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mdp = testutil::random_mdp(rng, 3, 2, 4);
        const auto occ = occupancy(mdp, testutil::random_policy(rng, mdp));
        for (const auto& rho : occ.rho)
            CHECK_NEAR(rho.sum(), 1.0, 1e-12);
    }
}

TEST_CASE("reachable sets") {
    SUBCASE("worked example: every pair reachable at both stages") {
        const auto sets = reachable_sets(example_mdp());
        CHECK(sets[0].size() == 4);
        CHECK(sets[1].size() == 4);
    }
    SUBCASE("absorbing first state") {
        auto mdp = example_mdp();
        for (int sa = 0; sa < 4; ++sa) {
            mdp.transition[0](sa, 0) = 1.0;
            mdp.transition[0](sa, 1) = 0.0;
        }
        const auto sets = reachable_sets(mdp);
        CHECK(sets[1].size() == 2);
        for (const auto& [s, a] : sets[1]) CHECK(s == 0);
    }
    SUBCASE("different prefixes reach different states") {
        auto mdp = example_mdp();
        mdp.init_dist << 1.0, 0.0;
        // From state 0: first action goes to state 1, second stays.
        mdp.transition[0].row(0) << 0.0, 1.0;
        mdp.transition[0].row(1) << 1.0, 0.0;
        const auto sets = reachable_sets(mdp);
        CHECK(sets[1].size() == 4);

        // Enumeration oracle: union of occupancy supports over all policies.
        std::vector<std::vector<bool>> support(mdp.horizon,
                                               std::vector<bool>(mdp.num_states, false));
        testutil::for_each_policy(mdp.num_states, mdp.num_actions, mdp.horizon,
                                  [&](const DeterministicPolicy& pol) {
                                      const auto occ = occupancy(mdp, pol);
                                      for (int h = 0; h < mdp.horizon; ++h)
                                          for (int s = 0; s < mdp.num_states; ++s)
                                              if (occ.rho[h](s) > 0.0) support[h][s] = true;
                                  });
        const auto reach = reachable_states(mdp);
        for (int h = 0; h < mdp.horizon; ++h)
            for (int s = 0; s < mdp.num_states; ++s) CHECK(reach[h][s] == support[h][s]);
    }
}

TEST_CASE("expected features of the worked example") {
    const auto mdp = example_mdp();
    const auto phi1 = example_rep(0);
    const auto bi = backward_induction(mdp);
    const auto psi = expected_features(mdp, bi.policy, phi1);
    CHECK_NEAR(psi[0](0), 7.0 / 8.0, 1e-12);
    CHECK_NEAR(psi[0](1), 1.0 / 8.0, 1e-12);
    CHECK_NEAR(psi[1](0), 3.0 / 32.0, 1e-12);
    CHECK_NEAR(psi[1](1), 29.0 / 32.0, 1e-12);

    SUBCASE("constant features average to themselves") {
        FeatureMap constant;
        constant.num_states = 2;
        constant.num_actions = 2;
        constant.dims = {2, 2};
        Eigen::MatrixXd rows(4, 2);
        rows << 0.3, 0.4, 0.3, 0.4, 0.3, 0.4, 0.3, 0.4;
        constant.phi = {rows, rows};
        Rng rng(5);
        const auto psi_c = expected_features(mdp, testutil::random_policy(rng, mdp), constant);
        for (const auto& p : psi_c) {
            CHECK_NEAR(p(0), 0.3, 1e-12);
            CHECK_NEAR(p(1), 0.4, 1e-12);
        }
    }
    SUBCASE("shape mismatch is rejected") {
        auto bad = phi1;
        bad.dims.pop_back();
        bad.phi.pop_back();
        CHECK_THROWS_AS(expected_features(mdp, bi.policy, bad), std::invalid_argument);
    }
}

TEST_CASE("value loss of any policy equals its expected sum of gaps") {
    Rng rng(1234);
    for (int trial = 0; trial < 30; ++trial) {
        const int S = 2 + static_cast<int>(rng.uniform01() * 3);
        const int A = 2 + static_cast<int>(rng.uniform01() * 2);
        const int H = 1 + static_cast<int>(rng.uniform01() * 3);
        const auto mdp = testutil::random_mdp(rng, S, A, H);
        const auto bi = backward_induction(mdp);
        const auto pol = testutil::random_policy(rng, mdp);
        const auto vals = policy_evaluation(mdp, pol);
        for (int s = 0; s < S; ++s) {
            const double loss = bi.values.v[0](s) - vals.v[0](s);
            const double decomposed = gap_decomposition_regret(mdp, pol, bi.gaps, s);
            CHECK_NEAR(loss, decomposed, 1e-10);
        }
    }
}

TEST_CASE("backward induction equals brute-force policy enumeration on small MDPs") {
    Rng rng(777);
    const int shapes[][3] = {{2, 2, 2}, {3, 2, 2}, {2, 2, 3}, {2, 3, 2}, {1, 4, 3}, {4, 3, 1}};
    for (const auto& shape : shapes) {
        const auto mdp = testutil::random_mdp(rng, shape[0], shape[1], shape[2]);
        const auto bi = backward_induction(mdp);
        std::vector<double> best(mdp.num_states, -1e300);
        testutil::for_each_policy(mdp.num_states, mdp.num_actions, mdp.horizon,
                                  [&](const DeterministicPolicy& pol) {
                                      const auto t = testutil::oracle_policy_tables(mdp, pol);
                                      for (int s = 0; s < mdp.num_states; ++s)
                                          best[s] = std::max(best[s], t.v[0][s]);
                                  });
        for (int s = 0; s < mdp.num_states; ++s)
            CHECK_NEAR(bi.values.v[0](s), best[s], 1e-9);
    }
}

TEST_CASE("validation rejects malformed inputs") {
    auto mdp = example_mdp();
    SUBCASE("transition row off by more than the tolerance") {
        mdp.transition[0](0, 0) += 1e-6;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("negative transition entry") {
        mdp.transition[0](0, 0) = -0.1;
        mdp.transition[0](0, 1) = 1.1;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("Bernoulli rewards outside the unit interval") {
        mdp.reward[1](0, 0) = 1.5;
        CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    }
    SUBCASE("policy with an out-of-range action") {
        DeterministicPolicy pol;
        pol.action = {{0, 2}, {0, 0}};
        CHECK_THROWS_AS(pol.validate(mdp), std::invalid_argument);
    }
}
