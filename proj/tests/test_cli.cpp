#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "unisoft/cli.hpp"
#include "unisoft/io.hpp"
#include "unisoft/repr.hpp"

using namespace unisoft;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
    const std::string path = std::string(TEST_TMP_DIR) + "/" + name;
    fs::remove_all(path);
    fs::create_directories(path);
    return path;
}

}  // namespace

TEST_CASE("mdp, feature map, and model JSON round-trips are exact") {
    Rng rng(2024);
    const auto mdp = testutil::random_mdp(rng, 3, 2, 3, NoiseModel::gaussian(0.25));
    const TabularMdp back = mdp_from_json(mdp_to_json(mdp));
    CHECK(back.num_states == mdp.num_states);
    CHECK(back.noise.kind == NoiseModel::Kind::Gaussian);
    CHECK(back.noise.sigma == 0.25);
    for (int h = 0; h < mdp.horizon; ++h) {
        CHECK((back.reward[h] - mdp.reward[h]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.transition[h] - mdp.transition[h]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((back.init_dist - mdp.init_dist).cwiseAbs().maxCoeff() == 0.0);

    const auto& ex = builtin_example("appendix-f");
    for (int i = 0; i < 4; ++i) {
        const FeatureMap fm = feature_map_from_json(feature_map_to_json(ex.reps[i]));
        CHECK(fm.dims == ex.reps[i].dims);
        for (int h = 0; h < 2; ++h)
            CHECK((fm.phi[h] - ex.reps[i].phi[h]).cwiseAbs().maxCoeff() == 0.0);
    }
    const LowRankModel model = model_from_json(model_to_json(ex.models[0]));
    CHECK((model.theta[1] - ex.models[0].theta[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((model.mu[0] - ex.models[0].mu[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("example subcommand emits a loadable, exact bundle") {
    const std::string dir = tmp_dir("cli_example");
    CHECK(run_cli({"example", "--name", "appendix-f", "--out", dir}) == 0);
    for (const char* name : {"mdp.json", "phi1.json", "phi2.json", "phi3.json", "phi4.json",
                             "model.json"})
        CHECK(fs::exists(dir + "/" + name));

    const auto& ex = builtin_example("appendix-f");
    const TabularMdp mdp = mdp_from_json(load_json(dir + "/mdp.json"));
    CHECK(mdp.reward[1](0, 1) == 7.0 / 8.0);
    CHECK(mdp.transition[0](mdp.sa_index(1, 1), 0) == 0.75);
    const FeatureMap phi2 = feature_map_from_json(load_json(dir + "/phi2.json"));
    CHECK((phi2.phi[1] - ex.reps[1].phi[1]).cwiseAbs().maxCoeff() == 0.0);

    SUBCASE("emission is byte-stable") {
        const std::string dir2 = tmp_dir("cli_example2");
        CHECK(run_cli({"example", "--name", "appendix-f", "--out", dir2}) == 0);
        for (const char* name : {"mdp.json", "phi3.json", "model.json"})
            CHECK(read_file(dir + "/" + std::string(name)) ==
                  read_file(dir2 + "/" + std::string(name)));
    }
    SUBCASE("unknown names are rejected with the validation exit code") {
        CHECK(run_cli({"example", "--name", "unknown", "--out", dir}) == 2);
    }
}

TEST_CASE("check-repr reports per-stage verdicts and round-trips") {
    const std::string dir = tmp_dir("cli_check");
    REQUIRE(run_cli({"example", "--name", "appendix-f", "--out", dir}) == 0);
    const std::string report_path = dir + "/report.json";
    CHECK(run_cli({"check-repr", dir + "/mdp.json", dir + "/phi1.json", dir + "/phi2.json",
                   "--out", report_path}) == 0);

    const json report = load_json(report_path);
    REQUIRE(report.at("representations").size() == 2);
    const auto& r1 = report.at("representations")[0];
    const auto& r2 = report.at("representations")[1];
    CHECK(r1.at("unisoft") == json::array({true, true}));
    CHECK(r2.at("unisoft") == json::array({true, false}));
    CHECK(r1.at("low_rank").at("certified").get<bool>());

    // Round-trip: the reported numbers equal the recomputed diagnostics.
    const auto& ex = builtin_example("appendix-f");
    const auto diag = unisoft_check(ex.mdp, ex.reps[1], report.at("rank_tol").get<double>());
    CHECK(r2.at("lambda_plus_overall").get<double>() == diag.lambda_plus_overall);
    for (int h = 0; h < 2; ++h) {
        CHECK(r2.at("stages")[h].at("lambda_plus").get<double>() ==
              diag.stages[h].lambda_plus);
        CHECK(r2.at("stages")[h].at("optimal_span_rank").get<int>() ==
              diag.stages[h].optimal_span_rank);
    }
}

TEST_CASE("witness subcommand") {
    const std::string dir = tmp_dir("cli_witness");
    REQUIRE(run_cli({"example", "--name", "appendix-f", "--out", dir}) == 0);

    const std::string out = dir + "/witness.json";
    CHECK(run_cli({"witness", dir + "/mdp.json", dir + "/phi2.json", "--out", out}) == 0);
    const json w = load_json(out);
    CHECK(w.at("found").get<bool>());
    CHECK(w.at("stage").get<int>() == 2);  // reports one-based stages
    CHECK(w.at("span_residual").get<double>() > 0.01);

    CHECK(run_cli({"witness", dir + "/mdp.json", dir + "/phi1.json", "--out", out}) == 0);
    CHECK_FALSE(load_json(out).at("found").get<bool>());
}

TEST_CASE("bounds subcommand evaluates the closed forms") {
    const std::string dir = tmp_dir("cli_bounds");
    const std::string out = dir + "/bounds.json";
    CHECK(run_cli({"bounds", "--d", "2", "--horizon", "2", "--delta", "0.05", "--delta-min",
                   "0.09375", "--lambda-plus", "0.0197", "--out", out}) == 0);
    const json b = load_json(out);
    CHECK(b.at("kappa_lsvi").at("value").get<double>() > 1e10);
    CHECK(b.at("kappa_eleanor").at("value").get<double>() <=
          b.at("kappa_lsvi").at("value").get<double>());

    SUBCASE("constants can be pulled from an MDP plus feature map") {
        REQUIRE(run_cli({"example", "--name", "appendix-f", "--out", dir}) == 0);
        const std::string out2 = dir + "/bounds2.json";
        CHECK(run_cli({"bounds", "--mdp", dir + "/mdp.json", "--features", dir + "/phi1.json",
                       "--out", out2}) == 0);
        const json b2 = load_json(out2);
        CHECK_NEAR(b2.at("constants").at("delta_min").get<double>(), 3.0 / 32.0, 1e-12);
        CHECK_NEAR(b2.at("constants").at("lambda_plus").get<double>(),
                   (13.0 - 3.0 * std::sqrt(17.0)) / 32.0, 1e-9);
    }
    SUBCASE("invalid constants exit with the validation code") {
        CHECK(run_cli({"bounds", "--d", "2", "--horizon", "2", "--delta-min", "0",
                       "--lambda-plus", "0.1"}) == 2);
    }
}

TEST_CASE("run subcommand end to end") {
    const std::string dir = tmp_dir("cli_run");
    json config;
    config["mdp"] = {{"builtin", "appendix-f"}};
    config["representations"] = json::array({json{{"builtin", 0}}});
    config["agent"] = {{"type", "lsvi-ucb"}, {"rep", 0}};
    config["schedule"] = {{"kind", "experiment-fixed-k"}, {"c_beta", 0.2}};
    config["episodes"] = 40;
    config["seeds"] = {0, 1};
    config["diagnostics_every"] = 10;
    config["out_dir"] = "results";
    write_json(dir + "/config.json", config);

    CHECK(run_cli({"run", "--config", dir + "/config.json", "--dump-agent-state"}) == 0);
    CHECK(fs::exists(dir + "/results/trace_seed0.csv"));
    CHECK(fs::exists(dir + "/results/trace_seed1.csv"));
    CHECK(fs::exists(dir + "/results/summary.csv"));
    CHECK(fs::exists(dir + "/results/metadata.json"));

    SUBCASE("the agent-state dump satisfies the count identities") {
        const json state = load_json(dir + "/results/agent_state_seed0.json");
        for (const auto& st : state.at("stages")) {
            double visit_total = 0.0;
            for (const auto& row : st.at("visit_count"))
                for (const auto& v : row) visit_total += v.get<double>();
            CHECK(visit_total == 40.0);
            // Transition counts resolve the visits.
            double trans_total = 0.0;
            for (const auto& row : st.at("transition_count"))
                for (const auto& v : row) trans_total += v.get<double>();
            CHECK(trans_total == visit_total);
            // Designs stay symmetric.
            const auto& d0 = st.at("design")[0];
            CHECK(d0[0][1].get<double>() == d0[1][0].get<double>());
        }
    }
    SUBCASE("seed overrides change the seed set") {
        CHECK(run_cli({"run", "--config", dir + "/config.json", "--seeds", "7", "--out",
                       dir + "/alt"}) == 0);
        CHECK(fs::exists(dir + "/alt/trace_seed7.csv"));
        CHECK_FALSE(fs::exists(dir + "/alt/trace_seed0.csv"));
    }
    SUBCASE("metadata records the seed protocol") {
        const json meta = load_json(dir + "/results/metadata.json");
        CHECK(meta.at("seeds") == json::array({0, 1}));
        CHECK(meta.at("schedule").at("K").get<int>() == 40);  // defaults to the episode count
    }
}

TEST_CASE("run subcommand failure modes") {
    const std::string dir = tmp_dir("cli_run_fail");

    SUBCASE("missing config file is an I/O failure") {
        CHECK(run_cli({"run", "--config", dir + "/missing.json"}) == 3);
    }
    SUBCASE("malformed JSON is a validation failure") {
        atomic_write(dir + "/broken.json", "{not json");
        CHECK(run_cli({"run", "--config", dir + "/broken.json"}) == 2);
    }
    SUBCASE("a config naming a bad representation index is a validation failure") {
        json config;
        config["mdp"] = {{"builtin", "appendix-f"}};
        config["representations"] = json::array({json{{"builtin", 9}}});
        config["agent"] = {{"type", "lsvi-ucb"}, {"rep", 0}};
        config["schedule"] = {{"kind", "experiment-fixed-k"}};
        config["episodes"] = 5;
        config["seeds"] = {0};
        write_json(dir + "/bad.json", config);
        CHECK(run_cli({"run", "--config", dir + "/bad.json"}) == 2);
    }
    SUBCASE("unknown flags are validation failures") {
        CHECK(run_cli({"run", "--config", "x", "--definitely-not-a-flag"}) == 2);
    }
}

TEST_CASE("num_seeds expands to the default seed protocol") {
    const std::string dir = tmp_dir("cli_numseeds");
    json config;
    config["mdp"] = {{"builtin", "appendix-f"}};
    config["representations"] = json::array({json{{"builtin", 1}}});
    config["agent"] = {{"type", "lsvi-ucb"}, {"rep", 0}};
    config["schedule"] = {{"kind", "experiment-fixed-k"}, {"c_beta", 0.2}};
    config["episodes"] = 5;
    config["num_seeds"] = 3;
    write_json(dir + "/config.json", config);
    ExperimentConfig resolved = resolve_experiment(load_experiment_spec(dir + "/config.json"));
    CHECK(resolved.seeds == std::vector<std::uint64_t>{0, 1, 2});
}

TEST_CASE("help exits cleanly") {
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({}) == 2);  // a subcommand is required
}
