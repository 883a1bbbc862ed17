#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace discopt {

/// One candidate disc geometry, in millimeters.
struct DesignPoint {
    double length_mm{};
    double width_mm{};
    double thickness_mm{};

    std::array<double, 3> as_array() const { return {length_mm, width_mm, thickness_mm}; }
    static DesignPoint from_array(std::span<const double> v);

    bool operator==(const DesignPoint&) const = default;
};

enum class Response { mass = 0, stress = 1, buckling = 2 };
inline constexpr std::array<Response, 3> kAllResponses{Response::mass, Response::stress, Response::buckling};

std::string_view to_string(Response r);
Response response_from_string(std::string_view name);

/// Mass (g), peak stress (MPa) and buckling load (N) of one design.
struct ResponseVector {
    double mass_g{};
    double stress_mpa{};
    double buckling_n{};

    double operator[](Response r) const;
    double& operator[](Response r);
    std::array<double, 3> as_array() const { return {mass_g, stress_mpa, buckling_n}; }
    static ResponseVector from_array(std::span<const double> v);

    bool finite() const;
    // Surrogate extrapolation can produce non-physical values; callers report it.
    bool physical() const { return mass_g > 0.0 && buckling_n > 0.0; }

    bool operator==(const ResponseVector&) const = default;
};

/// Axis-aligned design box, strictly increasing on every axis.
class Bounds {
public:
    Bounds(DesignPoint low, DesignPoint high);

    /// Length 24-40, width 3-9, thickness 0.3-0.9 mm.
    static Bounds disc_default();

    const DesignPoint& low() const { return low_; }
    const DesignPoint& high() const { return high_; }
    DesignPoint center() const;
    bool contains(const DesignPoint& x, double tol = 0.0) const;

private:
    DesignPoint low_;
    DesignPoint high_;
};

enum class DesignTag { A, B };

std::string_view to_string(DesignTag tag);
DesignTag design_tag_from_string(std::string_view s);

struct Sample {
    DesignPoint x;
    ResponseVector y;
};

/// Non-empty collection of design/response rows without duplicate designs.
class Dataset {
public:
    static constexpr double kDuplicateTolerance = 1e-9;

    Dataset(std::vector<Sample> rows, DesignTag tag);

    const std::vector<Sample>& rows() const { return rows_; }
    DesignTag tag() const { return tag_; }
    std::size_t size() const { return rows_.size(); }
    const Sample& operator[](std::size_t i) const { return rows_[i]; }

    std::vector<double> column(Response r) const;
    std::vector<DesignPoint> designs() const;
    std::vector<ResponseVector> responses() const;

    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<Sample> rows_;
    DesignTag tag_;
};

/// Indices (ascending) of the first pair of designs closer than the duplicate tolerance.
std::optional<std::pair<std::size_t, std::size_t>> find_duplicate_designs(std::span<const Sample> rows);

// Per-column mean and population standard deviation (denominator n).
struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> std;

    double normalize(std::size_t column, double value) const { return (value - mean[column]) / std[column]; }
    double denormalize(std::size_t column, double value) const { return value * std[column] + mean[column]; }
};

/// Computes column statistics of a row-major table; throws on zero variance.
NormalizationStats compute_stats(std::span<const std::vector<double>> columns);

std::pair<Dataset, NormalizationStats> normalize_responses(const Dataset& data);

std::vector<ResponseVector> denormalize(std::span<const ResponseVector> values, const NormalizationStats& stats);

enum class SamplingScheme { grid, latin_hypercube };

std::string_view to_string(SamplingScheme s);
SamplingScheme sampling_scheme_from_string(std::string_view s);

/// Deterministic design sampling. The grid scheme factors n into three level
/// counts (each >= 2, as balanced as possible) and includes the box corners.
std::vector<DesignPoint> sample_designs(const Bounds& bounds, std::size_t n, SamplingScheme scheme, std::uint64_t seed);

std::vector<DesignPoint> sample_grid(const Bounds& bounds, std::array<std::size_t, 3> levels);

struct Split {
    Dataset train;
    Dataset test;
};

/// Random partition into n_train training rows and the remainder.
Split split(const Dataset& data, std::size_t n_train, std::uint64_t seed);

inline constexpr std::string_view kCsvHeader = "length_mm,width_mm,thickness_mm,mass_g,stress_mpa,buckling_n";

void write_csv(const Dataset& data, const std::filesystem::path& path);
void write_csv(const Dataset& data, std::ostream& out);
Dataset read_csv(const std::filesystem::path& path, DesignTag tag);
Dataset read_csv(std::istream& in, DesignTag tag);

/// Shortest decimal text that reads back to the identical double (at most 17 significant digits).
std::string format_double(double v);

} // namespace discopt
