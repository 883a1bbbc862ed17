#pragma once

#include "discopt/ann.hpp"
#include "discopt/explorer.hpp"
#include "discopt/nsga2.hpp"
#include "discopt/rsm.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace discopt::io {

// Insertion-ordered so serialized files diff cleanly.
using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolkitVersion = "0.1.0";

Json to_json(const rsm::RsmModel& model);
rsm::RsmModel rsm_model_from_json(const Json& j);
Json to_json(const rsm::RsmModelSet& models);
rsm::RsmModelSet rsm_model_set_from_json(const Json& j);

Json to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const Json& j);
Json to_json(const ann::TrainConfig& cfg);
ann::TrainConfig train_config_from_json(const Json& j, ann::TrainConfig defaults = {});
Json to_json(const ann::TrainedNetwork& net);
ann::TrainedNetwork trained_network_from_json(const Json& j);
Json to_json(const ann::NeuralSurrogate& surrogate);
ann::NeuralSurrogate neural_surrogate_from_json(const Json& j);

Json to_json(const nsga2::GaConfig& cfg);
nsga2::GaConfig ga_config_from_json(const Json& j, nsga2::GaConfig defaults = {});

Json to_json(const explorer::ExplorationResult& result);
explorer::ExplorationResult exploration_from_json(const Json& j);
Json to_json(const explorer::StudyReport& report);
explorer::StudyReport study_from_json(const Json& j);

/// Result file wrapper: schema version, toolkit version, timestamp, echoed run configuration, payload.
struct Envelope {
    int schema_version{kSchemaVersion};
    std::string toolkit_version{kToolkitVersion};
    std::string timestamp;
    std::string kind;  // rsm_models | network | exploration | study
    Json config;
    Json payload;
};

Json to_json(const Envelope& env);
/// Throws ConfigError on a schema version this build does not read.
Envelope envelope_from_json(const Json& j);

void write_json(const Json& j, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

void write_envelope(const Envelope& env, const std::filesystem::path& path);
Envelope read_envelope(const std::filesystem::path& path);

/// Surrogate held by an rsm_models or network envelope.
explorer::Surrogate surrogate_from_envelope(const Envelope& env);

} // namespace discopt::io
