#pragma once

#include <string>

#include <json.hpp>

#include "unisoft/agents.hpp"
#include "unisoft/harness.hpp"
#include "unisoft/mdp.hpp"
#include "unisoft/repr.hpp"

namespace unisoft {

using nlohmann::json;

/// Thrown for filesystem problems so the CLI can map them to its I/O exit
/// code, distinct from validation failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// MDP bundle: {num_states, num_actions, horizon, reward[h][s][a],
// transition[h][s][a][s'], init_dist[s], noise_model}.
json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const json& j);

// Feature map: {dims[h], phi[h][s][a] -> array}.
json feature_map_to_json(const FeatureMap& fm);
FeatureMap feature_map_from_json(const json& j);

// Linear model: {theta[h] -> array, mu[h][s'] -> array (H-1 stages)}.
json model_to_json(const LowRankModel& model);
LowRankModel model_from_json(const json& j);

json diagnostics_to_json(const ReprDiagnostics& diag);

/// Experiment description as stored in config files; sources are resolved
/// to a full ExperimentConfig by resolve_experiment.
struct ExperimentSpec {
    json raw;
    std::string base_dir;  // config file location; relative paths resolve against it
};

ExperimentSpec load_experiment_spec(const std::string& path);
ExperimentConfig resolve_experiment(const ExperimentSpec& spec);

// Files are written atomically: a sibling temp file is renamed over the
// destination.
void atomic_write(const std::string& path, const std::string& content);
void ensure_directory(const std::string& path);
std::string read_file(const std::string& path);
json load_json(const std::string& path);
void write_json(const std::string& path, const json& j);

/// Shortest round-trip decimal form used by every CSV column.
std::string format_double(double x);

void write_trace_csv(const std::string& path, const RegretTrace& trace);
void write_diagnostics_csv(const std::string& path, const RegretTrace& trace);
void write_summary_csv(const std::string& path, const ExperimentResult& result);
void write_experiment_metadata(const std::string& path, const ExperimentConfig& config);
void write_agent_state_json(const std::string& path, const LeaderState& state);

}  // namespace unisoft
