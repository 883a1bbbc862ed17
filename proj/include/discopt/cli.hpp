#pragma once

#include "discopt/explorer.hpp"
#include "discopt/serialize.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace discopt::cli {

enum class ExitCode : int {
    ok = 0,
    failure = 1,
    config = 2,
    io = 3,
    numerical = 4,
    empty_front = 5,
};

/// Fully resolved settings of one run.
struct RunConfig {
    DesignTag design{DesignTag::A};
    explorer::SurrogateSource source{explorer::SurrogateSource::rsm};
    std::uint64_t seed{1};
    std::size_t workers{1};
    double noise{0.01};
    std::size_t rows{0};  // 0: 127 rows for design A, 128 for B
    SamplingScheme scheme{SamplingScheme::latin_hypercube};
    double threshold_n{explorer::kDefaultBucklingThresholdN};

    std::string data;                 // dataset CSV
    std::string model;                // surrogate envelope
    std::vector<std::string> inputs;  // report envelopes
    std::string out;
    std::string timestamp;            // fixed envelope timestamp, empty for the current time

    std::vector<std::size_t> hidden{20, 20};
    std::size_t n_train{100};
    ann::TrainConfig train;

    explorer::StudyKind study{explorer::StudyKind::network_size};
    std::size_t trials{10};
    explorer::NetworkSizeGrid network_grid;
    explorer::TrainingSizeGrid size_grid;

    nsga2::GaConfig ga;

    std::size_t design_rows() const;
};

/// Built-in defaults as a config document. Every accepted key appears here.
io::Json default_config();

/// Checks types and ranges of a merged config document and builds the run settings.
/// Throws ConfigError naming the offending key.
RunConfig resolve(const io::Json& doc);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

std::optional<std::string> system_env(const std::string& name);

/// Environment variable that overrides a config key: DISCOPT_ plus the
/// upper-cased dotted path with dots replaced by underscores (ga.sbx_eta -> DISCOPT_GA_SBX_ETA).
std::string env_name(const std::string& dotted_key);

/// Applies one textual override, typed after the existing value at the dotted key.
void apply_override(io::Json& doc, const std::string& dotted_key, const std::string& text);

/// defaults < config file < environment < flags.
io::Json merge_layers(const io::Json* file_doc, const EnvLookup& env,
                      const std::vector<std::pair<std::string, std::string>>& flags);

/// Timestamp written into envelopes: the configured one, else SOURCE_DATE_EPOCH, else now (UTC, ISO 8601).
std::string envelope_timestamp(const RunConfig& cfg, const EnvLookup& env);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env = system_env);

} // namespace discopt::cli
