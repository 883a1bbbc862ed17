#include "discopt/dataset.hpp"

#include "discopt/errors.hpp"
#include "discopt/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace discopt {

DesignPoint DesignPoint::from_array(std::span<const double> v)
{
    if (v.size() != 3) {
        throw InvalidArgument(fmt::format("design vector needs 3 entries, got {}", v.size()));
    }
    return {v[0], v[1], v[2]};
}

std::string_view to_string(Response r)
{
    switch (r) {
    case Response::mass: return "mass";
    case Response::stress: return "stress";
    case Response::buckling: return "buckling";
    }
    return "?";
}

Response response_from_string(std::string_view name)
{
    for (auto r : kAllResponses) {
        if (to_string(r) == name) {
            return r;
        }
    }
    throw InvalidArgument(fmt::format("unknown response '{}'", name));
}

double ResponseVector::operator[](Response r) const
{
    switch (r) {
    case Response::mass: return mass_g;
    case Response::stress: return stress_mpa;
    case Response::buckling: return buckling_n;
    }
    return 0.0;
}

double& ResponseVector::operator[](Response r)
{
    switch (r) {
    case Response::mass: return mass_g;
    case Response::stress: return stress_mpa;
    case Response::buckling: break;
    }
    return buckling_n;
}

ResponseVector ResponseVector::from_array(std::span<const double> v)
{
    if (v.size() != 3) {
        throw InvalidArgument(fmt::format("response vector needs 3 entries, got {}", v.size()));
    }
    return {v[0], v[1], v[2]};
}

bool ResponseVector::finite() const
{
    return std::isfinite(mass_g) && std::isfinite(stress_mpa) && std::isfinite(buckling_n);
}

namespace {

void check_design(const DesignPoint& x)
{
    for (double v : x.as_array()) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw InvalidArgument(fmt::format("design ({}, {}, {}) must be finite and strictly positive",
                                              x.length_mm, x.width_mm, x.thickness_mm));
        }
    }
}

} // namespace

Bounds::Bounds(DesignPoint low, DesignPoint high) : low_(low), high_(high)
{
    check_design(low_);
    check_design(high_);
    auto lo = low_.as_array();
    auto hi = high_.as_array();
    for (std::size_t i = 0; i < 3; ++i) {
        if (!(lo[i] < hi[i])) {
            throw InvalidArgument(fmt::format("bounds axis {} is degenerate: low {} >= high {}", i, lo[i], hi[i]));
        }
    }
}

Bounds Bounds::disc_default()
{
    return Bounds({24.0, 3.0, 0.3}, {40.0, 9.0, 0.9});
}

DesignPoint Bounds::center() const
{
    return {0.5 * (low_.length_mm + high_.length_mm), 0.5 * (low_.width_mm + high_.width_mm),
            0.5 * (low_.thickness_mm + high_.thickness_mm)};
}

bool Bounds::contains(const DesignPoint& x, double tol) const
{
    auto v = x.as_array();
    auto lo = low_.as_array();
    auto hi = high_.as_array();
    for (std::size_t i = 0; i < 3; ++i) {
        if (v[i] < lo[i] - tol || v[i] > hi[i] + tol) {
            return false;
        }
    }
    return true;
}

std::string_view to_string(DesignTag tag)
{
    return tag == DesignTag::A ? "A" : "B";
}

DesignTag design_tag_from_string(std::string_view s)
{
    if (s == "A" || s == "a") {
        return DesignTag::A;
    }
    if (s == "B" || s == "b") {
        return DesignTag::B;
    }
    throw InvalidArgument(fmt::format("unknown design '{}', expected A or B", s));
}

Dataset::Dataset(std::vector<Sample> rows, DesignTag tag) : rows_(std::move(rows)), tag_(tag)
{
    if (rows_.empty()) {
        throw InvalidArgument("dataset must contain at least one row");
    }
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        check_design(rows_[i].x);
        if (!rows_[i].y.finite()) {
            throw InvalidArgument(fmt::format("row {} has a non-finite response", i));
        }
    }

    if (auto dup = find_duplicate_designs(rows_)) {
        throw InvalidArgument(fmt::format("rows {} and {} are duplicate designs", dup->first, dup->second));
    }
}

std::optional<std::pair<std::size_t, std::size_t>> find_duplicate_designs(std::span<const Sample> rows)
{
    // Sort an index by length so the scan only compares rows inside a length window.
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return rows[a].x.length_mm < rows[b].x.length_mm; });
    constexpr double tol = Dataset::kDuplicateTolerance;
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto const& a = rows[order[i]].x;
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            auto const& b = rows[order[j]].x;
            if (b.length_mm - a.length_mm > tol) {
                break;
            }
            if (std::abs(a.width_mm - b.width_mm) <= tol && std::abs(a.thickness_mm - b.thickness_mm) <= tol) {
                return std::pair{std::min(order[i], order[j]), std::max(order[i], order[j])};
            }
        }
    }
    return std::nullopt;
}

std::vector<double> Dataset::column(Response r) const
{
    std::vector<double> out;
    out.reserve(rows_.size());
    for (auto const& s : rows_) {
        out.push_back(s.y[r]);
    }
    return out;
}

std::vector<DesignPoint> Dataset::designs() const
{
    std::vector<DesignPoint> out;
    out.reserve(rows_.size());
    for (auto const& s : rows_) {
        out.push_back(s.x);
    }
    return out;
}

std::vector<ResponseVector> Dataset::responses() const
{
    std::vector<ResponseVector> out;
    out.reserve(rows_.size());
    for (auto const& s : rows_) {
        out.push_back(s.y);
    }
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const
{
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        out.push_back(rows_.at(i));
    }
    return Dataset(std::move(out), tag_);
}

NormalizationStats compute_stats(std::span<const std::vector<double>> columns)
{
    NormalizationStats stats;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        auto const& col = columns[c];
        if (col.size() < 2) {
            throw InvalidArgument("normalization needs at least two rows");
        }
        double const n = static_cast<double>(col.size());
        double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : col) {
            ss += (v - mean) * (v - mean);
        }
        double sd = std::sqrt(ss / n);
        if (!(sd > 1e-14 * std::max(1.0, std::abs(mean)))) {
            throw InvalidArgument(fmt::format("column {} has zero variance and cannot be normalized", c));
        }
        stats.mean.push_back(mean);
        stats.std.push_back(sd);
    }
    return stats;
}

std::pair<Dataset, NormalizationStats> normalize_responses(const Dataset& data)
{
    std::vector<std::vector<double>> cols;
    for (auto r : kAllResponses) {
        cols.push_back(data.column(r));
    }
    auto stats = compute_stats(cols);

    std::vector<Sample> rows = data.rows();
    for (auto& s : rows) {
        for (auto r : kAllResponses) {
            auto c = static_cast<std::size_t>(r);
            s.y[r] = stats.normalize(c, s.y[r]);
        }
    }
    return {Dataset(std::move(rows), data.tag()), std::move(stats)};
}

std::vector<ResponseVector> denormalize(std::span<const ResponseVector> values, const NormalizationStats& stats)
{
    if (stats.mean.size() != 3 || stats.std.size() != 3) {
        throw InvalidArgument("response statistics must cover exactly three columns");
    }
    std::vector<ResponseVector> out(values.begin(), values.end());
    for (auto& y : out) {
        for (auto r : kAllResponses) {
            y[r] = stats.denormalize(static_cast<std::size_t>(r), y[r]);
        }
    }
    return out;
}

std::string_view to_string(SamplingScheme s)
{
    return s == SamplingScheme::grid ? "grid" : "latin_hypercube";
}

SamplingScheme sampling_scheme_from_string(std::string_view s)
{
    if (s == "grid") {
        return SamplingScheme::grid;
    }
    if (s == "latin_hypercube" || s == "lhs") {
        return SamplingScheme::latin_hypercube;
    }
    throw InvalidArgument(fmt::format("unknown sampling scheme '{}'", s));
}

std::vector<DesignPoint> sample_grid(const Bounds& bounds, std::array<std::size_t, 3> levels)
{
    auto lo = bounds.low().as_array();
    auto hi = bounds.high().as_array();
    std::array<std::vector<double>, 3> axes;
    for (std::size_t a = 0; a < 3; ++a) {
        if (levels[a] < 2) {
            throw InvalidArgument("grid sampling needs at least two levels per axis");
        }
        for (std::size_t k = 0; k < levels[a]; ++k) {
            // Endpoints are assigned exactly so corner points hit the bounds bit for bit.
            double v = k + 1 == levels[a] ? hi[a] : lo[a] + (hi[a] - lo[a]) * static_cast<double>(k) / static_cast<double>(levels[a] - 1);
            axes[a].push_back(v);
        }
    }
    std::vector<DesignPoint> out;
    out.reserve(levels[0] * levels[1] * levels[2]);
    for (double l : axes[0]) {
        for (double b : axes[1]) {
            for (double t : axes[2]) {
                out.push_back({l, b, t});
            }
        }
    }
    return out;
}

namespace {

// Most balanced factorization n = a*b*c with every factor >= 2.
std::array<std::size_t, 3> grid_levels(std::size_t n)
{
    std::array<std::size_t, 3> best{0, 0, 0};
    std::size_t best_spread = std::numeric_limits<std::size_t>::max();
    for (std::size_t a = 2; a * a * a <= n; ++a) {
        if (n % a != 0) {
            continue;
        }
        std::size_t rest = n / a;
        for (std::size_t b = a; b * b <= rest; ++b) {
            if (rest % b != 0) {
                continue;
            }
            std::size_t c = rest / b;
            if (c - a < best_spread) {
                best_spread = c - a;
                best = {a, b, c};
            }
        }
    }
    if (best[0] == 0) {
        throw InvalidArgument(fmt::format("grid sampling: {} cannot be factored into three levels of at least 2", n));
    }
    return best;
}

} // namespace

std::vector<DesignPoint> sample_designs(const Bounds& bounds, std::size_t n, SamplingScheme scheme, std::uint64_t seed)
{
    if (n == 0) {
        throw InvalidArgument("sample count must be at least 1");
    }
    if (scheme == SamplingScheme::grid) {
        return sample_grid(bounds, grid_levels(n));
    }

    Rng rng(seed);
    auto lo = bounds.low().as_array();
    auto hi = bounds.high().as_array();
    std::vector<std::array<double, 3>> pts(n);
    std::vector<std::size_t> bins(n);
    for (std::size_t a = 0; a < 3; ++a) {
        std::iota(bins.begin(), bins.end(), 0);
        rng.shuffle(std::span(bins));
        for (std::size_t i = 0; i < n; ++i) {
            double u = (static_cast<double>(bins[i]) + rng.uniform()) / static_cast<double>(n);
            pts[i][a] = lo[a] + (hi[a] - lo[a]) * u;
        }
    }
    std::vector<DesignPoint> out;
    out.reserve(n);
    for (auto const& p : pts) {
        out.push_back(DesignPoint::from_array(p));
    }
    return out;
}

Split split(const Dataset& data, std::size_t n_train, std::uint64_t seed)
{
    if (n_train < 1 || n_train >= data.size()) {
        throw InvalidArgument(fmt::format("training size {} must lie in [1, {})", n_train, data.size()));
    }
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span(idx));
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {data.subset(train), data.subset(test)};
}

std::string format_double(double v)
{
    if (!std::isfinite(v)) {
        throw InvalidArgument("cannot encode a non-finite value");
    }
    return fmt::format("{}", v);
}

void write_csv(const Dataset& data, std::ostream& out)
{
    out << kCsvHeader << '\n';
    for (auto const& s : data.rows()) {
        out << format_double(s.x.length_mm) << ',' << format_double(s.x.width_mm) << ','
            << format_double(s.x.thickness_mm) << ',' << format_double(s.y.mass_g) << ','
            << format_double(s.y.stress_mpa) << ',' << format_double(s.y.buckling_n) << '\n';
    }
}

void write_csv(const Dataset& data, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    write_csv(data, out);
    if (!out) {
        throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

} // namespace

Dataset read_csv(std::istream& in, DesignTag tag)
{
    static constexpr std::array<std::string_view, 6> kColumns{"length_mm", "width_mm", "thickness_mm",
                                                              "mass_g",    "stress_mpa", "buckling_n"};
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != kCsvHeader) {
        auto fields = split_fields(line);
        for (auto col : kColumns) {
            if (std::find(fields.begin(), fields.end(), col) == fields.end()) {
                throw ParseError(1, fmt::format("header is missing column '{}'", col));
            }
        }
        throw ParseError(1, fmt::format("header must be exactly '{}'", kCsvHeader));
    }

    std::vector<Sample> rows;
    std::vector<std::size_t> row_lines;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_fields(line);
        if (fields.size() != kColumns.size()) {
            throw ParseError(lineno, fmt::format("expected {} fields, found {}", kColumns.size(), fields.size()));
        }
        std::array<double, 6> v{};
        for (std::size_t i = 0; i < fields.size(); ++i) {
            auto f = fields[i];
            auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[i]);
            if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty() || !std::isfinite(v[i])) {
                throw ParseError(lineno, fmt::format("column '{}' is not a number: '{}'", kColumns[i], f));
            }
        }
        rows.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
        row_lines.push_back(lineno);
    }
    if (rows.empty()) {
        throw ParseError(lineno, "no data rows");
    }
    if (auto dup = find_duplicate_designs(rows)) {
        throw ParseError(row_lines[dup->second], fmt::format("duplicate design (same as line {})", row_lines[dup->first]));
    }
    return Dataset(std::move(rows), tag);
}

Dataset read_csv(const std::filesystem::path& path, DesignTag tag)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    return read_csv(in, tag);
}

} // namespace discopt
