#include "discopt/explorer.hpp"

#include "discopt/errors.hpp"
#include "discopt/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace discopt::explorer {

std::string_view to_string(SurrogateSource s)
{
    return s == SurrogateSource::rsm ? "rsm" : "ann";
}

SurrogateSource surrogate_source_from_string(std::string_view s)
{
    if (s == "rsm") {
        return SurrogateSource::rsm;
    }
    if (s == "ann") {
        return SurrogateSource::ann;
    }
    throw InvalidArgument(fmt::format("unknown surrogate source '{}', expected rsm or ann", s));
}

Surrogate::Surrogate(rsm::RsmModelSet models)
    : impl_(std::make_shared<const std::variant<rsm::RsmModelSet, ann::NeuralSurrogate>>(std::move(models)))
{
}

Surrogate::Surrogate(ann::NeuralSurrogate network)
    : impl_(std::make_shared<const std::variant<rsm::RsmModelSet, ann::NeuralSurrogate>>(std::move(network)))
{
    if (std::get<ann::NeuralSurrogate>(*impl_).networks.empty()) {
        throw InvalidArgument("neural surrogate has no networks");
    }
}

SurrogateSource Surrogate::source() const
{
    return std::holds_alternative<rsm::RsmModelSet>(*impl_) ? SurrogateSource::rsm : SurrogateSource::ann;
}

const rsm::RsmModelSet* Surrogate::rsm_models() const
{
    return std::get_if<rsm::RsmModelSet>(impl_.get());
}

const ann::NeuralSurrogate* Surrogate::network() const
{
    return std::get_if<ann::NeuralSurrogate>(impl_.get());
}

ResponseVector Surrogate::evaluate(const DesignPoint& x) const
{
    if (auto const* m = rsm_models()) {
        return m->evaluate(x);
    }
    return network()->predict(x);
}

void Surrogate::evaluate_batch(std::span<const DesignPoint> xs, std::span<ResponseVector> out) const
{
    if (xs.size() != out.size()) {
        throw InvalidArgument("batch input and output sizes differ");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i] = evaluate(xs[i]);
    }
}

namespace {

class Fnv1a {
public:
    void add(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) {
            h_ ^= (v >> (8 * i)) & 0xffU;
            h_ *= 0x100000001b3ULL;
        }
    }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_{0xcbf29ce484222325ULL};
};

} // namespace

std::string Surrogate::fingerprint() const
{
    Fnv1a h;
    if (auto const* m = rsm_models()) {
        h.add(std::uint64_t{1});
        for (auto r : kAllResponses) {
            auto const& model = (*m)[r];
            h.add(static_cast<std::uint64_t>(model.basis.size()));
            for (std::size_t i = 0; i < model.basis.size(); ++i) {
                auto const& t = model.basis.terms()[i];
                h.add(static_cast<std::uint64_t>(t.exp_l) << 32 | static_cast<std::uint64_t>(t.exp_b) << 16 |
                      static_cast<std::uint64_t>(t.exp_t));
                h.add(model.coefficients[i]);
            }
        }
    } else {
        h.add(std::uint64_t{2});
        for (auto const& net : network()->networks) {
            auto const& shape = net.shape();
            h.add(static_cast<std::uint64_t>(shape.n_inputs));
            for (auto n : shape.hidden_layers) {
                h.add(static_cast<std::uint64_t>(n));
            }
            h.add(static_cast<std::uint64_t>(shape.n_outputs));
            for (double v : net.params.values()) {
                h.add(v);
            }
            for (auto const* stats : {&net.input_stats, &net.output_stats}) {
                for (double v : stats->mean) {
                    h.add(v);
                }
                for (double v : stats->std) {
                    h.add(v);
                }
            }
        }
    }
    return fmt::format("{:016x}", h.value());
}

void DesignProblem::validate() const
{
    if (!(buckling_threshold_n > 0.0) || !std::isfinite(buckling_threshold_n)) {
        throw InvalidArgument("buckling threshold must be positive");
    }
}

nsga2::Evaluation evaluate_design(const DesignProblem& problem, const DesignPoint& x)
{
    auto y = problem.surrogate.evaluate(x);
    return {{y.mass_g, y.stress_mpa}, {problem.buckling_threshold_n - y.buckling_n}};
}

nsga2::ProblemSpec build_problem(const DesignProblem& problem)
{
    problem.validate();
    auto lo = problem.bounds.low().as_array();
    auto hi = problem.bounds.high().as_array();
    nsga2::ProblemSpec spec;
    spec.low.assign(lo.begin(), lo.end());
    spec.high.assign(hi.begin(), hi.end());
    spec.n_objectives = 2;
    spec.evaluate = [problem](std::span<const nsga2::Vector> designs, std::span<nsga2::Evaluation> out) {
        std::vector<DesignPoint> xs;
        xs.reserve(designs.size());
        for (auto const& d : designs) {
            xs.push_back(DesignPoint::from_array(d));
        }
        std::vector<ResponseVector> ys(xs.size());
        problem.surrogate.evaluate_batch(xs, ys);
        for (std::size_t i = 0; i < ys.size(); ++i) {
            out[i] = {{ys[i].mass_g, ys[i].stress_mpa}, {problem.buckling_threshold_n - ys[i].buckling_n}};
        }
    };
    return spec;
}

Dataset synthesize_dataset(DesignTag design, std::size_t n, SamplingScheme scheme, std::uint64_t seed,
                           double noise_std_fraction)
{
    if (n < kMinSynthesisRows) {
        throw InvalidArgument(fmt::format("need at least {} rows to fit every response model, got {}", kMinSynthesisRows, n));
    }
    if (!(noise_std_fraction >= 0.0) || !std::isfinite(noise_std_fraction)) {
        throw InvalidArgument("noise fraction must be non-negative");
    }
    auto const oracle = rsm::published_models(design);
    auto const xs = sample_designs(Bounds::disc_default(), n, scheme, seed);
    Rng noise(mix_seed(seed, 1));
    std::vector<Sample> rows;
    rows.reserve(xs.size());
    for (auto const& x : xs) {
        auto y = oracle.evaluate(x);
        if (noise_std_fraction > 0.0) {
            for (auto r : kAllResponses) {
                y[r] *= 1.0 + noise_std_fraction * noise.normal();
            }
        }
        rows.push_back({x, y});
    }
    return Dataset(std::move(rows), design);
}

std::size_t select_optimum(std::span<const nsga2::Vector> front)
{
    if (front.empty()) {
        throw InvalidArgument("cannot select an optimum from an empty front");
    }
    if (front.size() == 1) {
        return 0;
    }
    std::size_t const m = front[0].size();
    double const n = static_cast<double>(front.size());
    std::vector<double> mean(m, 0.0), sd(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        for (auto const& p : front) {
            mean[k] += p[k];
        }
        mean[k] /= n;
        for (auto const& p : front) {
            sd[k] += (p[k] - mean[k]) * (p[k] - mean[k]);
        }
        sd[k] = std::sqrt(sd[k] / n);
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < front.size(); ++i) {
        double d = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (sd[k] > 0.0) {
                double z = (front[i][k] - mean[k]) / sd[k];
                d += z * z;
            }
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

Extremes extract_extremes(std::span<const nsga2::Vector> front)
{
    if (front.empty()) {
        throw InvalidArgument("cannot extract extremes of an empty front");
    }
    Extremes e;
    for (std::size_t i = 1; i < front.size(); ++i) {
        if (front[i][0] < front[e.min_mass][0]) {
            e.min_mass = i;
        }
        if (front[i][1] < front[e.min_stress][1]) {
            e.min_stress = i;
        }
    }
    return e;
}

std::vector<FrontPoint> grid_pareto_oracle(const DesignProblem& problem, std::size_t levels, std::size_t workers)
{
    if (levels < 2) {
        throw InvalidArgument("grid oracle needs at least two levels per axis");
    }
    problem.validate();
    auto const xs = sample_grid(problem.bounds, {levels, levels, levels});
    std::vector<ResponseVector> ys(xs.size());
    nsga2::parallel_chunks(xs.size(), workers, [&](std::size_t begin, std::size_t end) {
        problem.surrogate.evaluate_batch(std::span(xs).subspan(begin, end - begin),
                                         std::span(ys).subspan(begin, end - begin));
    });

    std::vector<std::size_t> feasible;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i].buckling_n >= problem.buckling_threshold_n) {
            feasible.push_back(i);
        }
    }

    // Lexicographic (mass, stress) sweep: a point survives iff every earlier point
    // has strictly larger stress or is an exact duplicate of it.
    std::vector<std::size_t> order = feasible;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (ys[a].mass_g != ys[b].mass_g) {
            return ys[a].mass_g < ys[b].mass_g;
        }
        return ys[a].stress_mpa < ys[b].stress_mpa;
    });
    std::vector<std::size_t> keep;
    double best_stress = std::numeric_limits<double>::infinity();
    for (auto i : order) {
        auto const& y = ys[i];
        bool const duplicate = !keep.empty() && ys[keep.back()].mass_g == y.mass_g && ys[keep.back()].stress_mpa == y.stress_mpa;
        if (y.stress_mpa < best_stress || duplicate) {
            keep.push_back(i);
            best_stress = std::min(best_stress, y.stress_mpa);
        }
    }
    std::sort(keep.begin(), keep.end());

    std::vector<FrontPoint> out;
    out.reserve(keep.size());
    for (auto i : keep) {
        out.push_back({xs[i], ys[i], {ys[i].mass_g, ys[i].stress_mpa}});
    }
    return out;
}

ExplorationResult summarize_front(std::vector<FrontPoint> front, Provenance provenance)
{
    std::stable_sort(front.begin(), front.end(), [](auto const& a, auto const& b) {
        if (a.objectives[0] != b.objectives[0]) {
            return a.objectives[0] < b.objectives[0];
        }
        return a.objectives[1] < b.objectives[1];
    });
    front.erase(std::unique(front.begin(), front.end(),
                            [](auto const& a, auto const& b) { return a.x.as_array() == b.x.as_array(); }),
                front.end());
    ExplorationResult result;
    result.front = std::move(front);
    result.provenance = std::move(provenance);
    if (!result.front.empty()) {
        std::vector<nsga2::Vector> objs;
        objs.reserve(result.front.size());
        for (auto const& p : result.front) {
            objs.push_back(p.objectives);
        }
        auto ext = extract_extremes(objs);
        result.min_mass = ext.min_mass;
        result.min_stress = ext.min_stress;
        result.optimum = select_optimum(objs);
    }
    return result;
}

ExplorationResult explore(const DesignProblem& problem, const nsga2::GaConfig& ga)
{
    auto spec = build_problem(problem);
    auto run = nsga2::optimize(spec, ga);
    std::vector<FrontPoint> front;
    front.reserve(run.front.size());
    for (auto const& ind : run.front) {
        auto x = DesignPoint::from_array(ind.x);
        front.push_back({x, problem.surrogate.evaluate(x), ind.objectives});
    }
    Provenance prov{problem.design, problem.surrogate.source(), problem.surrogate.fingerprint(),
                    problem.buckling_threshold_n, ga};
    auto result = summarize_front(std::move(front), std::move(prov));
    result.history = std::move(run.history);
    return result;
}

std::string_view to_string(StudyKind k)
{
    return k == StudyKind::network_size ? "network_size" : "train_size";
}

StudyKind study_kind_from_string(std::string_view s)
{
    if (s == "network_size") {
        return StudyKind::network_size;
    }
    if (s == "train_size" || s == "training_size") {
        return StudyKind::training_size;
    }
    throw InvalidArgument(fmt::format("unknown study '{}', expected network_size or train_size", s));
}

std::string StudyCell::key() const
{
    return fmt::format("{}x{}/n{}", hidden_layers.size(), hidden_layers.empty() ? 0 : hidden_layers.front(), n_train);
}

MeanStd mean_std(std::span<const double> values)
{
    if (values.empty()) {
        throw InvalidArgument("mean of an empty sample");
    }
    double const n = static_cast<double>(values.size());
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    MeanStd out{mean, std::nullopt};
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - mean) * (v - mean);
        }
        out.std = std::sqrt(ss / (n - 1.0));
    }
    return out;
}

namespace {

struct TrialOutcome {
    bool diverged{false};
    double test{};
    double all{};
};

TrialOutcome run_trial(const Dataset& data, const std::vector<std::size_t>& hidden, std::size_t n_train,
                       std::size_t trial, const StudyOptions& options)
{
    auto parts = split(data, n_train, mix_seed(options.seed, 2 * trial));
    ann::TrainConfig cfg = options.train;
    cfg.seed = mix_seed(options.seed, 2 * trial + 1);
    try {
        auto net = ann::train(hidden, parts.train, cfg);
        auto test_truth = parts.test.responses();
        auto all_truth = data.responses();
        auto test_pred = net.predict(parts.test.designs());
        auto all_pred = net.predict(data.designs());
        return {false, ann::mean_abs_percent_error(test_truth, test_pred).mean,
                ann::mean_abs_percent_error(all_truth, all_pred).mean};
    } catch (const NumericalError&) {
        return {true, 0.0, 0.0};
    }
}

StudyReport run_cells(const Dataset& data, std::vector<StudyCell> cells, StudyKind kind, const StudyOptions& options)
{
    if (options.trials < 1) {
        throw InvalidArgument("a study needs at least one trial");
    }
    options.train.validate();
    for (auto const& c : cells) {
        if (c.n_train < 1 || c.n_train >= data.size()) {
            throw InvalidArgument(fmt::format("training size {} leaves no test data out of {} rows", c.n_train, data.size()));
        }
        if (c.hidden_layers.empty()) {
            throw InvalidArgument("study cells need at least one hidden layer");
        }
    }

    std::size_t const jobs = cells.size() * options.trials;
    std::vector<TrialOutcome> outcomes(jobs);
    nsga2::parallel_chunks(jobs, options.workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            auto const& cell = cells[j / options.trials];
            outcomes[j] = run_trial(data, cell.hidden_layers, cell.n_train, j % options.trials, options);
        }
    });

    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto& cell = cells[c];
        for (std::size_t t = 0; t < options.trials; ++t) {
            auto const& o = outcomes[c * options.trials + t];
            if (o.diverged) {
                ++cell.divergences;
                continue;
            }
            cell.test_errors.push_back(o.test);
            cell.all_errors.push_back(o.all);
        }
        if (!cell.test_errors.empty()) {
            cell.test = mean_std(cell.test_errors);
            cell.all = mean_std(cell.all_errors);
        }
    }
    return {kind, data.tag(), options.trials, std::move(cells)};
}

} // namespace

StudyReport run_network_size_study(const Dataset& data, const NetworkSizeGrid& grid, const StudyOptions& options)
{
    std::vector<StudyCell> cells;
    for (auto layers : grid.layers) {
        for (auto neurons : grid.neurons) {
            if (layers < 1 || neurons < 1) {
                throw InvalidArgument("layer and neuron counts must be at least 1");
            }
            StudyCell cell;
            cell.hidden_layers.assign(layers, neurons);
            cell.n_train = grid.n_train;
            cells.push_back(std::move(cell));
        }
    }
    return run_cells(data, std::move(cells), StudyKind::network_size, options);
}

StudyReport run_training_size_study(const Dataset& data, const TrainingSizeGrid& grid, const StudyOptions& options)
{
    std::vector<StudyCell> cells;
    for (auto n : grid.sizes) {
        StudyCell cell;
        cell.hidden_layers = grid.hidden_layers;
        cell.n_train = n;
        cells.push_back(std::move(cell));
    }
    return run_cells(data, std::move(cells), StudyKind::training_size, options);
}

std::vector<ScatterRow> prediction_scatter(const Dataset& data, std::span<const Surrogate> surrogates)
{
    if (surrogates.empty()) {
        throw InvalidArgument("prediction scatter needs at least one surrogate");
    }
    std::vector<ScatterRow> rows;
    rows.reserve(data.size());
    double const k = static_cast<double>(surrogates.size());
    for (auto const& s : data.rows()) {
        ScatterRow row{s.x, s.y, {}, {}};
        std::vector<ResponseVector> preds;
        for (auto const& sur : surrogates) {
            preds.push_back(sur.evaluate(s.x));
        }
        for (auto r : kAllResponses) {
            double mean = 0.0;
            for (auto const& p : preds) {
                mean += p[r];
            }
            mean /= k;
            double ss = 0.0;
            for (auto const& p : preds) {
                ss += (p[r] - mean) * (p[r] - mean);
            }
            row.mean[r] = mean;
            row.std[r] = std::sqrt(ss / k);
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace discopt::explorer
