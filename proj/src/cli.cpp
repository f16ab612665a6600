#include "unisoft/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "unisoft/bounds.hpp"
#include "unisoft/harness.hpp"
#include "unisoft/io.hpp"
#include "unisoft/repr.hpp"

namespace unisoft {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

TabularMdp load_mdp_arg(const std::string& arg) {
    if (arg == "appendix-f") return builtin_example(arg).mdp;
    return mdp_from_json(load_json(arg));
}

int cmd_example(const std::string& name, const std::string& out_dir) {
    const BuiltinExample ex = builtin_example(name);
    ensure_directory(out_dir);
    write_json(out_dir + "/mdp.json", mdp_to_json(ex.mdp));
    for (std::size_t i = 0; i < ex.reps.size(); ++i)
        write_json(out_dir + "/phi" + std::to_string(i + 1) + ".json",
                   feature_map_to_json(ex.reps[i]));
    write_json(out_dir + "/model.json", model_to_json(ex.models[0]));
    std::cout << "wrote mdp.json, phi1.json..phi" << ex.reps.size() << ".json, model.json to "
              << out_dir << "\n";
    return kExitOk;
}

int cmd_check_repr(const std::string& mdp_arg, const std::vector<std::string>& fm_paths,
                   double rank_tol, const std::string& out_path) {
    const TabularMdp mdp = load_mdp_arg(mdp_arg);
    json report;
    report["mdp"] = mdp_arg;
    report["rank_tol"] = rank_tol;
    json reps = json::array();
    for (const auto& path : fm_paths) {
        const FeatureMap fm = feature_map_from_json(load_json(path));
        const ReprDiagnostics diag = unisoft_check(mdp, fm, rank_tol);
        const LowRankCheck lr = verify_low_rank(mdp, fm);
        json entry = diagnostics_to_json(diag);
        entry["source"] = path;
        entry["dims"] = fm.dims;
        entry["low_rank"] = {{"certified", lr.certified}, {"max_residual", lr.max_residual}};
        reps.push_back(entry);

        std::cout << path << ":\n";
        std::cout << "  dims:";
        for (int d : fm.dims) std::cout << ' ' << d;
        std::cout << "\n  low-rank: " << (lr.certified ? "certified" : "NOT certified")
                  << " (max residual " << format_double(lr.max_residual) << ")\n";
        std::cout << "  unisoft: [";
        for (std::size_t h = 0; h < diag.stages.size(); ++h)
            std::cout << (h ? ", " : "") << (diag.stages[h].is_unisoft ? "true" : "false");
        std::cout << "]\n";
        for (std::size_t h = 0; h < diag.stages.size(); ++h) {
            const auto& st = diag.stages[h];
            std::cout << "  stage " << h + 1 << ": reachable rank " << st.reachable_span_rank
                      << ", optimal rank " << st.optimal_span_rank << ", lambda+ "
                      << format_double(st.lambda_plus) << "\n";
        }
        if (diag.norm_warning)
            std::cout << "  warning: some feature norms exceed the unit-ball convention\n";
    }
    report["representations"] = std::move(reps);
    if (!out_path.empty()) write_json(out_path, report);
    return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& seeds_csv,
            const std::string& out_dir, int threads, bool dump_agent_state) {
    ExperimentSpec spec = load_experiment_spec(config_path);
    ExperimentConfig config = resolve_experiment(spec);
    if (!seeds_csv.empty()) {
        config.seeds.clear();
        std::stringstream ss(seeds_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            config.seeds.push_back(std::stoull(tok));
        }
        if (config.seeds.empty())
            throw std::invalid_argument("config.seeds: override list is empty");
    }
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (threads > 0) config.threads = threads;
    if (dump_agent_state) config.dump_agent_state = true;
    config.validate();

    const ExperimentResult result = run_experiment(config);
    const std::size_t last = result.mean_cum_regret.size() - 1;
    std::cout << "ran " << config.seeds.size() << " seed(s) x " << config.episodes
              << " episodes\n";
    std::cout << "mean cumulative regret at K: " << format_double(result.mean_cum_regret[last])
              << " (std " << format_double(result.std_cum_regret[last]) << ")\n";
    if (!config.out_dir.empty()) std::cout << "traces written to " << config.out_dir << "\n";
    return kExitOk;
}

int cmd_bounds(const std::optional<ProblemConstants>& direct, const std::string& mdp_arg,
               const std::string& fm_path, double c1, double c2, double delta,
               const std::string& out_path) {
    ProblemConstants pc;
    if (direct) {
        pc = *direct;
    } else {
        const TabularMdp mdp = load_mdp_arg(mdp_arg);
        const FeatureMap fm = feature_map_from_json(load_json(fm_path));
        const auto bi = backward_induction(mdp);
        if (!bi.gaps.has_positive_gap)
            throw std::invalid_argument("constants.delta_min: the MDP has no positive gap");
        const auto diag = unisoft_check(mdp, fm);
        pc.d = *std::max_element(fm.dims.begin(), fm.dims.end());
        pc.horizon = mdp.horizon;
        pc.delta_min = bi.gaps.delta_min;
        pc.lambda_plus = diag.lambda_plus_overall;
        pc.c1 = c1;
        pc.c2 = c2;
        pc.delta = delta;
        if (pc.lambda_plus <= 0.0)
            throw std::invalid_argument(
                "constants.lambda_plus: representation has a zero optimal covariance stage");
    }
    pc.validate();

    const KappaResult lsvi = kappa_bar_lsvi(pc);
    const KappaResult eleanor = kappa_bar_eleanor(pc);
    const ConstantRegretExpressions at_lsvi = constant_regret_expressions(pc, lsvi.value);
    const ConstantRegretExpressions at_eleanor = constant_regret_expressions(pc, eleanor.value);

    std::cout << "d=" << pc.d << " H=" << pc.horizon << " delta=" << format_double(pc.delta)
              << " delta_min=" << format_double(pc.delta_min)
              << " lambda+=" << format_double(pc.lambda_plus) << " c1=" << format_double(pc.c1)
              << " c2=" << format_double(pc.c2) << "\n";
    if (pc.c1_below_floor()) std::cout << "warning: c1 below the derivation's floor of 8\n";
    std::cout << "kappa_lsvi    = " << format_double(lsvi.value) << "  (branch "
              << lsvi.binding_branch << " binds)\n";
    std::cout << "kappa_eleanor = " << format_double(eleanor.value) << "  (branch "
              << eleanor.binding_branch << " binds)\n";
    std::cout << "constant-regret expressions (order-level, unit hidden constants):\n";
    std::cout << "  single-rep optimistic:  " << format_double(at_lsvi.lsvi) << "\n";
    std::cout << "  global-optimism route:  " << format_double(at_eleanor.eleanor) << "\n";

    if (!out_path.empty()) {
        json j;
        j["constants"] = {{"d", pc.d},
                          {"horizon", pc.horizon},
                          {"delta", pc.delta},
                          {"delta_min", pc.delta_min},
                          {"lambda_plus", pc.lambda_plus},
                          {"c1", pc.c1},
                          {"c2", pc.c2}};
        j["kappa_lsvi"] = {{"value", lsvi.value},
                           {"binding_branch", lsvi.binding_branch},
                           {"branch_exploration", lsvi.branch_exploration},
                           {"branch_gap", lsvi.branch_gap}};
        j["kappa_eleanor"] = {{"value", eleanor.value},
                              {"binding_branch", eleanor.binding_branch},
                              {"branch_exploration", eleanor.branch_exploration},
                              {"branch_gap", eleanor.branch_gap}};
        j["expressions"] = {{"lsvi", at_lsvi.lsvi}, {"eleanor", at_eleanor.eleanor}};
        write_json(out_path, j);
    }
    return kExitOk;
}

int cmd_witness(const std::string& mdp_arg, const std::string& fm_path, double rank_tol,
                const std::string& out_path) {
    const TabularMdp mdp = load_mdp_arg(mdp_arg);
    const FeatureMap fm = feature_map_from_json(load_json(fm_path));
    const auto witness = find_necessity_witness(mdp, fm, rank_tol);
    json j;
    if (!witness) {
        std::cout << "representation is UniSOFT at every stage; no witness\n";
        j["found"] = false;
    } else {
        std::cout << "witness at stage " << witness->stage + 1 << " (span residual "
                  << format_double(witness->span_residual) << ")\n";
        std::cout << "policy (stage: action per state):\n";
        for (std::size_t h = 0; h < witness->policy.action.size(); ++h) {
            std::cout << "  " << h + 1 << ":";
            for (int a : witness->policy.action[h]) std::cout << ' ' << a + 1;
            std::cout << "\n";
        }
        j["found"] = true;
        j["stage"] = witness->stage + 1;
        j["policy"] = witness->policy.action;
        json psi = json::array();
        for (Eigen::Index i = 0; i < witness->expected_features_at_stage.size(); ++i)
            psi.push_back(witness->expected_features_at_stage(i));
        j["expected_features"] = std::move(psi);
        j["span_residual"] = witness->span_residual;
    }
    if (!out_path.empty()) write_json(out_path, j);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Linear-MDP regret lab: representation diagnostics, optimistic learners, "
                 "and closed-form bound evaluators"};
    app.name("unisoft-lab");
    app.require_subcommand(1);

    auto* example = app.add_subcommand("example", "Emit a built-in MDP bundle with its "
                                                  "representations and model");
    std::string ex_name = "appendix-f";
    std::string ex_out = ".";
    example->add_option("--name", ex_name, "Example name")->capture_default_str();
    example->add_option("--out", ex_out, "Output directory")->capture_default_str();

    auto* check = app.add_subcommand("check-repr", "Span and low-rank diagnostics for one or "
                                                   "more feature maps");
    std::string ck_mdp;
    std::vector<std::string> ck_fms;
    double ck_tol = kDefaultRankTol;
    std::string ck_out;
    check->add_option("mdp", ck_mdp, "MDP bundle path or 'appendix-f'")->required();
    check->add_option("features", ck_fms, "Feature map file(s)")->required()->expected(-1);
    check->add_option("--rank-tol", ck_tol, "Relative rank tolerance")->capture_default_str();
    check->add_option("--out", ck_out, "Write the machine-readable report here");

    auto* run = app.add_subcommand("run", "Run a seeded regret experiment from a config file");
    std::string run_config, run_seeds, run_out;
    int run_threads = 0;
    bool run_dump = false;
    run->add_option("--config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--seeds", run_seeds, "Override seeds, comma separated");
    run->add_option("--out", run_out, "Override output directory");
    run->add_option("--threads", run_threads, "Worker threads (bounded by the seed count)");
    run->add_flag("--dump-agent-state", run_dump,
                  "Serialize per-seed sufficient statistics next to the traces");

    auto* bounds = app.add_subcommand("bounds", "Evaluate the critical-time and constant-regret "
                                                "formulas");
    int b_d = 0, b_h = 0;
    double b_delta = 0.05, b_delta_min = 0.0, b_lambda_plus = 0.0, b_c1 = 8.0, b_c2 = 1.0;
    std::string b_mdp, b_fm, b_out;
    bounds->add_option("--d", b_d, "Feature dimension");
    bounds->add_option("--horizon", b_h, "Horizon H");
    bounds->add_option("--delta", b_delta, "Failure probability")->capture_default_str();
    bounds->add_option("--delta-min", b_delta_min, "Minimum positive gap");
    bounds->add_option("--lambda-plus", b_lambda_plus, "Minimum positive eigenvalue");
    bounds->add_option("--c1", b_c1, "Universal constant c1")->capture_default_str();
    bounds->add_option("--c2", b_c2, "Universal constant c2")->capture_default_str();
    bounds->add_option("--mdp", b_mdp, "Pull delta_min from this MDP (path or 'appendix-f')");
    bounds->add_option("--features", b_fm, "Pull lambda+ from this feature map file");
    bounds->add_option("--out", b_out, "Write the machine-readable table here");

    auto* witness = app.add_subcommand("witness", "Construct the suboptimal-policy span witness "
                                                  "for a non-UniSOFT representation");
    std::string w_mdp, w_fm, w_out;
    double w_tol = kDefaultRankTol;
    witness->add_option("mdp", w_mdp, "MDP bundle path or 'appendix-f'")->required();
    witness->add_option("features", w_fm, "Feature map file")->required();
    witness->add_option("--rank-tol", w_tol, "Relative rank tolerance")->capture_default_str();
    witness->add_option("--out", w_out, "Write the machine-readable witness here");

    std::vector<const char*> argv;
    argv.push_back("unisoft-lab");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (app.got_subcommand(example)) return cmd_example(ex_name, ex_out);
        if (app.got_subcommand(check)) return cmd_check_repr(ck_mdp, ck_fms, ck_tol, ck_out);
        if (app.got_subcommand(run))
            return cmd_run(run_config, run_seeds, run_out, run_threads, run_dump);
        if (app.got_subcommand(bounds)) {
            std::optional<ProblemConstants> direct;
            if (b_mdp.empty() && b_fm.empty()) {
                ProblemConstants pc;
                pc.d = b_d;
                pc.horizon = b_h;
                pc.delta = b_delta;
                pc.delta_min = b_delta_min;
                pc.lambda_plus = b_lambda_plus;
                pc.c1 = b_c1;
                pc.c2 = b_c2;
                direct = pc;
            } else if (b_mdp.empty() || b_fm.empty()) {
                throw std::invalid_argument("bounds: --mdp and --features must be given together");
            }
            return cmd_bounds(direct, b_mdp, b_fm, b_c1, b_c2, b_delta, b_out);
        }
        if (app.got_subcommand(witness)) return cmd_witness(w_mdp, w_fm, w_tol, w_out);
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace unisoft
