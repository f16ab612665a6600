#include "unisoft/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace unisoft {

namespace fs = std::filesystem;

void ensure_directory(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading " + path);
    return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("error while writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
}

json load_json(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

const json& need(const json& j, const char* field, const std::string& where) {
    if (!j.contains(field))
        throw std::invalid_argument(where + ": missing field '" + field + "'");
    return j.at(field);
}

json matrix_rows(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_entries(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from(const json& j, const std::string& where) {
    if (!j.is_array()) throw std::invalid_argument(where + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

}  // namespace

json mdp_to_json(const TabularMdp& mdp) {
    json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["horizon"] = mdp.horizon;
    json reward = json::array();
    json transition = json::array();
    for (int h = 0; h < mdp.horizon; ++h) {
        json rh = json::array();
        json th = json::array();
        for (int s = 0; s < mdp.num_states; ++s) {
            json rs = json::array();
            json ts = json::array();
            for (int a = 0; a < mdp.num_actions; ++a) {
                rs.push_back(mdp.reward[h](s, a));
                json row = json::array();
                for (int sn = 0; sn < mdp.num_states; ++sn)
                    row.push_back(mdp.transition[h](mdp.sa_index(s, a), sn));
                ts.push_back(std::move(row));
            }
            rh.push_back(std::move(rs));
            th.push_back(std::move(ts));
        }
        reward.push_back(std::move(rh));
        transition.push_back(std::move(th));
    }
    j["reward"] = std::move(reward);
    j["transition"] = std::move(transition);
    j["init_dist"] = vector_entries(mdp.init_dist);
    json noise;
    switch (mdp.noise.kind) {
        case NoiseModel::Kind::Bernoulli: noise["kind"] = "bernoulli"; break;
        case NoiseModel::Kind::Gaussian:
            noise["kind"] = "gaussian";
            noise["sigma"] = mdp.noise.sigma;
            break;
        case NoiseModel::Kind::Deterministic: noise["kind"] = "deterministic"; break;
    }
    j["noise_model"] = std::move(noise);
    return j;
}

TabularMdp mdp_from_json(const json& j) {
    TabularMdp mdp;
    mdp.num_states = need(j, "num_states", "mdp").get<int>();
    mdp.num_actions = need(j, "num_actions", "mdp").get<int>();
    mdp.horizon = need(j, "horizon", "mdp").get<int>();
    if (mdp.num_states <= 0 || mdp.num_actions <= 0 || mdp.horizon <= 0)
        throw std::invalid_argument("mdp: num_states, num_actions, horizon must be positive");
    const auto& reward = need(j, "reward", "mdp");
    const auto& transition = need(j, "transition", "mdp");
    if (static_cast<int>(reward.size()) != mdp.horizon)
        throw std::invalid_argument("mdp.reward: expected one table per stage");
    if (static_cast<int>(transition.size()) != mdp.horizon)
        throw std::invalid_argument("mdp.transition: expected one table per stage");
    mdp.reward.resize(mdp.horizon);
    mdp.transition.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        mdp.reward[h] = Eigen::MatrixXd(mdp.num_states, mdp.num_actions);
        mdp.transition[h] =
            Eigen::MatrixXd(static_cast<Eigen::Index>(mdp.num_states) * mdp.num_actions,
                            mdp.num_states);
        const auto& rh = reward[h];
        const auto& th = transition[h];
        if (static_cast<int>(rh.size()) != mdp.num_states ||
            static_cast<int>(th.size()) != mdp.num_states)
            throw std::invalid_argument("mdp: wrong state count at stage " + std::to_string(h));
        for (int s = 0; s < mdp.num_states; ++s) {
            if (static_cast<int>(rh[s].size()) != mdp.num_actions ||
                static_cast<int>(th[s].size()) != mdp.num_actions)
                throw std::invalid_argument("mdp: wrong action count at stage " +
                                            std::to_string(h));
            for (int a = 0; a < mdp.num_actions; ++a) {
                mdp.reward[h](s, a) = rh[s][a].get<double>();
                const auto& row = th[s][a];
                if (static_cast<int>(row.size()) != mdp.num_states)
                    throw std::invalid_argument("mdp.transition: wrong row length at stage " +
                                                std::to_string(h));
                for (int sn = 0; sn < mdp.num_states; ++sn)
                    mdp.transition[h](mdp.sa_index(s, a), sn) = row[sn].get<double>();
            }
        }
    }
    mdp.init_dist = vector_from(need(j, "init_dist", "mdp"), "mdp.init_dist");
    const auto& noise = need(j, "noise_model", "mdp");
    const std::string kind = need(noise, "kind", "mdp.noise_model").get<std::string>();
    if (kind == "bernoulli") {
        mdp.noise = NoiseModel::bernoulli();
    } else if (kind == "gaussian") {
        mdp.noise = NoiseModel::gaussian(need(noise, "sigma", "mdp.noise_model").get<double>());
    } else if (kind == "deterministic") {
        mdp.noise = NoiseModel::deterministic();
    } else {
        throw std::invalid_argument("mdp.noise_model.kind: unknown kind '" + kind + "'");
    }
    mdp.validate();
    return mdp;
}

json feature_map_to_json(const FeatureMap& fm) {
    json j;
    j["dims"] = fm.dims;
    json phi = json::array();
    for (int h = 0; h < fm.horizon(); ++h) {
        json ph = json::array();
        for (int s = 0; s < fm.num_states; ++s) {
            json ps = json::array();
            for (int a = 0; a < fm.num_actions; ++a)
                ps.push_back(vector_entries(fm.vec(h, s, a)));
            ph.push_back(std::move(ps));
        }
        phi.push_back(std::move(ph));
    }
    j["phi"] = std::move(phi);
    return j;
}

FeatureMap feature_map_from_json(const json& j) {
    FeatureMap fm;
    const auto& dims = need(j, "dims", "feature map");
    for (const auto& d : dims) fm.dims.push_back(d.get<int>());
    const auto& phi = need(j, "phi", "feature map");
    if (phi.size() != fm.dims.size())
        throw std::invalid_argument("feature map: phi/dims stage count mismatch");
    if (phi.empty() || phi[0].empty() || phi[0][0].empty())
        throw std::invalid_argument("feature map: empty phi");
    fm.num_states = static_cast<int>(phi[0].size());
    fm.num_actions = static_cast<int>(phi[0][0].size());
    fm.phi.resize(fm.dims.size());
    for (std::size_t h = 0; h < fm.dims.size(); ++h) {
        fm.phi[h] = Eigen::MatrixXd(
            static_cast<Eigen::Index>(fm.num_states) * fm.num_actions, fm.dims[h]);
        if (static_cast<int>(phi[h].size()) != fm.num_states)
            throw std::invalid_argument("feature map: wrong state count at stage " +
                                        std::to_string(h));
        for (int s = 0; s < fm.num_states; ++s) {
            if (static_cast<int>(phi[h][s].size()) != fm.num_actions)
                throw std::invalid_argument("feature map: wrong action count at stage " +
                                            std::to_string(h));
            for (int a = 0; a < fm.num_actions; ++a) {
                const auto v = vector_from(phi[h][s][a], "feature map phi entry");
                if (v.size() != fm.dims[h])
                    throw std::invalid_argument("feature map: vector length != dims at stage " +
                                                std::to_string(h));
                fm.phi[h].row(static_cast<Eigen::Index>(s) * fm.num_actions + a) = v.transpose();
            }
        }
    }
    fm.validate();
    return fm;
}

json model_to_json(const LowRankModel& model) {
    json j;
    json theta = json::array();
    for (const auto& t : model.theta) theta.push_back(vector_entries(t));
    j["theta"] = std::move(theta);
    json mu = json::array();
    for (const auto& m : model.mu) mu.push_back(matrix_rows(m));
    j["mu"] = std::move(mu);
    return j;
}

LowRankModel model_from_json(const json& j) {
    LowRankModel model;
    for (const auto& t : need(j, "theta", "model"))
        model.theta.push_back(vector_from(t, "model.theta"));
    for (const auto& m : need(j, "mu", "model")) {
        if (!m.is_array() || m.empty())
            throw std::invalid_argument("model.mu: expected non-empty per-stage arrays");
        Eigen::MatrixXd rows(m.size(), m[0].size());
        for (std::size_t s = 0; s < m.size(); ++s)
            rows.row(s) = vector_from(m[s], "model.mu row").transpose();
        model.mu.push_back(std::move(rows));
    }
    return model;
}

json diagnostics_to_json(const ReprDiagnostics& diag) {
    json j;
    json stages = json::array();
    json unisoft = json::array();
    for (std::size_t h = 0; h < diag.stages.size(); ++h) {
        const auto& st = diag.stages[h];
        json s;
        s["stage"] = h + 1;
        s["reachable_span_rank"] = st.reachable_span_rank;
        s["optimal_span_rank"] = st.optimal_span_rank;
        s["unisoft"] = st.is_unisoft;
        s["lambda_plus"] = st.lambda_plus;
        s["optimal_cov"] = matrix_rows(st.optimal_cov);
        stages.push_back(std::move(s));
        unisoft.push_back(st.is_unisoft);
    }
    j["stages"] = std::move(stages);
    j["unisoft"] = std::move(unisoft);
    j["all_unisoft"] = diag.all_unisoft;
    j["lambda_plus_overall"] = diag.lambda_plus_overall;
    j["norm_warning"] = diag.norm_warning;
    return j;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    ExperimentSpec spec;
    spec.raw = load_json(path);
    spec.base_dir = fs::path(path).parent_path().string();
    return spec;
}

namespace {

std::string resolve_path(const std::string& base, const std::string& rel) {
    const fs::path p(rel);
    if (p.is_absolute() || base.empty()) return rel;
    return (fs::path(base) / p).string();
}

}  // namespace

ExperimentConfig resolve_experiment(const ExperimentSpec& spec) {
    const json& j = spec.raw;
    ExperimentConfig config;

    const auto& mdp_src = need(j, "mdp", "config");
    std::optional<BuiltinExample> builtin;
    if (mdp_src.is_object() && mdp_src.contains("builtin")) {
        builtin = builtin_example(mdp_src.at("builtin").get<std::string>());
        config.mdp = builtin->mdp;
    } else if (mdp_src.is_object() && mdp_src.contains("file")) {
        config.mdp =
            mdp_from_json(load_json(resolve_path(spec.base_dir, mdp_src.at("file").get<std::string>())));
    } else {
        throw std::invalid_argument("config.mdp: expected {\"builtin\": name} or {\"file\": path}");
    }

    std::vector<FeatureMap> pool;
    for (const auto& src : need(j, "representations", "config")) {
        if (src.is_object() && src.contains("builtin")) {
            if (!builtin)
                throw std::invalid_argument(
                    "config.representations: builtin index requires a builtin mdp");
            const int idx = src.at("builtin").get<int>();
            if (idx < 0 || idx >= static_cast<int>(builtin->reps.size()))
                throw std::invalid_argument("config.representations: builtin index out of range");
            pool.push_back(builtin->reps[idx]);
        } else if (src.is_object() && src.contains("file")) {
            pool.push_back(feature_map_from_json(
                load_json(resolve_path(spec.base_dir, src.at("file").get<std::string>()))));
        } else {
            throw std::invalid_argument(
                "config.representations: expected {\"builtin\": index} or {\"file\": path}");
        }
    }
    if (pool.empty()) throw std::invalid_argument("config.representations: must be non-empty");

    const auto& agent = need(j, "agent", "config");
    const std::string type = need(agent, "type", "config.agent").get<std::string>();
    std::vector<int> selected;
    if (type == "lsvi-ucb") {
        config.agent = AgentKind::LsviUcb;
        selected.push_back(agent.value("rep", 0));
    } else if (type == "lsvi-leader") {
        config.agent = AgentKind::LsviLeader;
        for (const auto& r : need(agent, "reps", "config.agent"))
            selected.push_back(r.get<int>());
    } else {
        throw std::invalid_argument("config.agent.type: unknown type '" + type + "'");
    }
    for (int idx : selected) {
        if (idx < 0 || idx >= static_cast<int>(pool.size()))
            throw std::invalid_argument("config.agent: representation index out of range");
        config.representations.push_back(pool[idx]);
    }

    const auto& sched = need(j, "schedule", "config");
    const std::string kind = need(sched, "kind", "config.schedule").get<std::string>();
    if (kind == "anytime-lsvi") {
        config.schedule.kind = BetaSchedule::Kind::AnytimeLsvi;
    } else if (kind == "anytime-leader") {
        config.schedule.kind = BetaSchedule::Kind::AnytimeLeader;
    } else if (kind == "experiment-fixed-k") {
        config.schedule.kind = BetaSchedule::Kind::ExperimentFixedK;
    } else {
        throw std::invalid_argument("config.schedule.kind: unknown kind '" + kind + "'");
    }
    config.schedule.c_beta = sched.value("c_beta", 0.2);
    config.schedule.delta = sched.value("delta", 0.05);
    if (sched.contains("K")) config.schedule.fixed_k = sched.at("K").get<int>();
    config.schedule.num_reps = static_cast<int>(config.representations.size());
    if (sched.contains("N") &&
        sched.at("N").get<int>() != config.schedule.num_reps)
        throw std::invalid_argument(
            "config.schedule.N: must equal the number of selected representations");

    config.episodes = need(j, "episodes", "config").get<int>();
    if (config.schedule.kind == BetaSchedule::Kind::ExperimentFixedK &&
        !config.schedule.fixed_k)
        config.schedule.fixed_k = config.episodes;

    if (j.contains("seeds")) {
        for (const auto& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
    } else if (j.contains("num_seeds")) {
        const int n = j.at("num_seeds").get<int>();
        if (n < 1) throw std::invalid_argument("config.num_seeds: must be >= 1");
        for (int i = 0; i < n; ++i) config.seeds.push_back(i);
    } else {
        throw std::invalid_argument("config: one of 'seeds' or 'num_seeds' is required");
    }

    config.diagnostics_every = j.value("diagnostics_every", 100);
    const std::string growth = j.value("growth_bound", std::string("worst-case"));
    if (growth == "worst-case") {
        config.growth_mode = GrowthBoundMode::WorstCase;
    } else if (growth == "observed") {
        config.growth_mode = GrowthBoundMode::ObservedRegret;
    } else {
        throw std::invalid_argument("config.growth_bound: expected 'worst-case' or 'observed'");
    }
    config.diag_delta = j.value("diag_delta", 0.05);
    config.lambda_reg = j.value("lambda_reg", 1.0);
    config.floor_q_at_zero = j.value("floor_q_at_zero", true);
    if (j.contains("out_dir"))
        config.out_dir = resolve_path(spec.base_dir, j.at("out_dir").get<std::string>());
    config.threads = j.value("threads", 1);
    config.dump_agent_state = j.value("dump_agent_state", false);

    config.validate();
    return config;
}

void write_trace_csv(const std::string& path, const RegretTrace& trace) {
    std::string out = "episode,instant_regret,cum_regret\n";
    for (std::size_t k = 0; k < trace.episodes.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',';
        out += format_double(trace.episodes[k].instant_regret);
        out += ',';
        out += format_double(trace.episodes[k].cum_regret);
        out += '\n';
    }
    atomic_write(path, out);
}

void write_diagnostics_csv(const std::string& path, const RegretTrace& trace) {
    std::string out =
        "episode,stage,min_eig_on_span,growth_bound_rhs,max_conf_width,width_envelope,"
        "optimism_ok\n";
    for (const auto& row : trace.diagnostics) {
        out += std::to_string(row.episode);
        out += ',';
        out += std::to_string(row.stage + 1);
        out += ',';
        out += format_double(row.min_eig_on_span);
        out += ',';
        out += format_double(row.growth_bound_rhs);
        out += ',';
        out += format_double(row.max_conf_width);
        out += ',';
        out += format_double(row.width_envelope);
        out += ',';
        out += row.optimism_ok ? '1' : '0';
        out += '\n';
    }
    atomic_write(path, out);
}

void write_summary_csv(const std::string& path, const ExperimentResult& result) {
    std::string out = "episode,mean_cum_regret,std_cum_regret\n";
    for (std::size_t k = 0; k < result.mean_cum_regret.size(); ++k) {
        out += std::to_string(k + 1);
        out += ',';
        out += format_double(result.mean_cum_regret[k]);
        out += ',';
        out += format_double(result.std_cum_regret[k]);
        out += '\n';
    }
    atomic_write(path, out);
}

void write_experiment_metadata(const std::string& path, const ExperimentConfig& config) {
    json j;
    j["episodes"] = config.episodes;
    j["seeds"] = config.seeds;
    j["agent"] = config.agent == AgentKind::LsviUcb ? "lsvi-ucb" : "lsvi-leader";
    json sched;
    switch (config.schedule.kind) {
        case BetaSchedule::Kind::AnytimeLsvi: sched["kind"] = "anytime-lsvi"; break;
        case BetaSchedule::Kind::AnytimeLeader: sched["kind"] = "anytime-leader"; break;
        case BetaSchedule::Kind::ExperimentFixedK: sched["kind"] = "experiment-fixed-k"; break;
    }
    sched["c_beta"] = config.schedule.c_beta;
    sched["delta"] = config.schedule.delta;
    sched["N"] = config.schedule.num_reps;
    if (config.schedule.fixed_k) sched["K"] = *config.schedule.fixed_k;
    j["schedule"] = std::move(sched);
    j["mdp"] = mdp_to_json(config.mdp);
    json reps = json::array();
    for (const auto& fm : config.representations) reps.push_back(feature_map_to_json(fm));
    j["representations"] = std::move(reps);
    j["diagnostics_every"] = config.diagnostics_every;
    j["growth_bound"] =
        config.growth_mode == GrowthBoundMode::WorstCase ? "worst-case" : "observed";
    j["diag_delta"] = config.diag_delta;
    j["lambda_reg"] = config.lambda_reg;
    j["floor_q_at_zero"] = config.floor_q_at_zero;
    write_json(path, j);
}

void write_agent_state_json(const std::string& path, const LeaderState& state) {
    json j;
    j["episode"] = state.episode;
    j["lambda_reg"] = state.lambda_reg;
    json stages = json::array();
    for (int h = 0; h < state.horizon; ++h) {
        json st;
        st["stage"] = h + 1;
        json designs = json::array();
        for (const auto& d : state.design[h]) designs.push_back(matrix_rows(d));
        st["design"] = std::move(designs);
        st["reward_sum"] = matrix_rows(state.reward_sum[h]);
        st["visit_count"] = matrix_rows(state.visit_count[h]);
        st["transition_count"] = matrix_rows(state.transition_count[h]);
        stages.push_back(std::move(st));
    }
    j["stages"] = std::move(stages);
    write_json(path, j);
}

}  // namespace unisoft
