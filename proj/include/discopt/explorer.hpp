#pragma once

#include "discopt/ann.hpp"
#include "discopt/dataset.hpp"
#include "discopt/nsga2.hpp"
#include "discopt/rsm.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace discopt::explorer {

enum class SurrogateSource { rsm, ann };

std::string_view to_string(SurrogateSource s);
SurrogateSource surrogate_source_from_string(std::string_view s);

/// Immutable, cheaply copyable handle over either surrogate kind.
class Surrogate {
public:
    explicit Surrogate(rsm::RsmModelSet models);
    explicit Surrogate(ann::NeuralSurrogate network);

    SurrogateSource source() const;
    ResponseVector evaluate(const DesignPoint& x) const;
    void evaluate_batch(std::span<const DesignPoint> xs, std::span<ResponseVector> out) const;

    const rsm::RsmModelSet* rsm_models() const;
    const ann::NeuralSurrogate* network() const;

    /// FNV-1a hash over the model structure and the bit patterns of every parameter.
    std::string fingerprint() const;

private:
    std::shared_ptr<const std::variant<rsm::RsmModelSet, ann::NeuralSurrogate>> impl_;
};

inline constexpr double kDefaultBucklingThresholdN = 150.0;

/// Minimize (mass, stress) subject to buckling >= threshold over the disc design box.
struct DesignProblem {
    DesignTag design{DesignTag::A};
    Surrogate surrogate;
    double buckling_threshold_n{kDefaultBucklingThresholdN};
    Bounds bounds{Bounds::disc_default()};

    void validate() const;
};

nsga2::ProblemSpec build_problem(const DesignProblem& problem);

/// Objectives and constraint of one design, as the optimizer sees them.
nsga2::Evaluation evaluate_design(const DesignProblem& problem, const DesignPoint& x);

/// Largest basis across the published response models.
inline constexpr std::size_t kMinSynthesisRows = 4;

/// Oracle responses from the published response-surface models, each scaled
/// by (1 + e) with e ~ N(0, noise_std_fraction^2). Zero noise returns the oracle values exactly.
Dataset synthesize_dataset(DesignTag design, std::size_t n, SamplingScheme scheme, std::uint64_t seed,
                           double noise_std_fraction);

struct FrontPoint {
    DesignPoint x;
    ResponseVector responses;
    nsga2::Vector objectives;
};

/// Index of the point nearest the origin after normalizing each objective
/// over the front to zero mean and unit (population) std. A constant
/// objective contributes 0. Ties go to the lower index.
std::size_t select_optimum(std::span<const nsga2::Vector> front);

struct Extremes {
    std::size_t min_mass{};
    std::size_t min_stress{};
};

/// Argmin of the first and second objective, ties to the lower index.
Extremes extract_extremes(std::span<const nsga2::Vector> front);

/// Brute-force lattice oracle: evaluates levels^3 designs over the problem's
/// bounds, keeps the feasible ones and returns the exact non-dominated subset
/// in lattice order.
std::vector<FrontPoint> grid_pareto_oracle(const DesignProblem& problem, std::size_t levels, std::size_t workers = 1);

struct Provenance {
    DesignTag design{};
    SurrogateSource source{};
    std::string surrogate_fingerprint;
    double buckling_threshold_n{};
    nsga2::GaConfig ga;
};

struct ExplorationResult {
    std::vector<FrontPoint> front;  // sorted by (mass, stress)
    std::optional<std::size_t> min_mass;
    std::optional<std::size_t> min_stress;
    std::optional<std::size_t> optimum;
    std::vector<nsga2::GenerationSummary> history;
    Provenance provenance;

    bool empty() const { return front.empty(); }
};

ExplorationResult explore(const DesignProblem& problem, const nsga2::GaConfig& ga);

/// Builds the named points of an already extracted front.
ExplorationResult summarize_front(std::vector<FrontPoint> front, Provenance provenance);

enum class StudyKind { network_size, training_size };

std::string_view to_string(StudyKind k);
StudyKind study_kind_from_string(std::string_view s);

struct MeanStd {
    double mean{};
    std::optional<double> std;  // sample std, absent below two trials
};

struct StudyCell {
    std::vector<std::size_t> hidden_layers;
    std::size_t n_train{};
    std::vector<double> test_errors;  // per successful trial, mean over responses
    std::vector<double> all_errors;
    std::size_t divergences{};
    std::optional<MeanStd> test;
    std::optional<MeanStd> all;

    std::string key() const;
};

struct StudyReport {
    StudyKind kind{};
    DesignTag design{};
    std::size_t trials{};
    std::vector<StudyCell> cells;
};

struct StudyOptions {
    std::size_t trials{10};
    std::uint64_t seed{1};
    ann::TrainConfig train;
    std::size_t workers{1};
};

struct NetworkSizeGrid {
    std::vector<std::size_t> layers{1, 2, 3};
    std::vector<std::size_t> neurons{10, 20, 30, 40};
    std::size_t n_train{100};
};

struct TrainingSizeGrid {
    std::vector<std::size_t> sizes{40, 60, 80, 100, 120};
    std::vector<std::size_t> hidden_layers{20, 20};
};

/// Cells in layer-major order. Trial t uses the same split and initialization
/// seeds in every cell, so cells are compared on identical data.
StudyReport run_network_size_study(const Dataset& data, const NetworkSizeGrid& grid, const StudyOptions& options);

StudyReport run_training_size_study(const Dataset& data, const TrainingSizeGrid& grid, const StudyOptions& options);

MeanStd mean_std(std::span<const double> values);

struct ScatterRow {
    DesignPoint x;
    ResponseVector truth;
    ResponseVector mean;
    ResponseVector std;  // population std across surrogates
};

/// Ground truth against the mean and spread of several surrogates' predictions.
std::vector<ScatterRow> prediction_scatter(const Dataset& data, std::span<const Surrogate> surrogates);

} // namespace discopt::explorer
