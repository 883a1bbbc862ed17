#include "discopt/serialize.hpp"

#include "discopt/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>

namespace discopt::io {

namespace {

Json number_or_null(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

double number_or_inf(const Json& j)
{
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

template <typename T>
T field(const Json& j, const char* key)
{
    if (!j.contains(key)) {
        throw ConfigError(fmt::format("missing field '{}'", key));
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("field '{}': {}", key, e.what()));
    }
}

template <typename T>
void maybe(const Json& j, const char* key, T& out)
{
    if (j.contains(key)) {
        out = field<T>(j, key);
    }
}

Json design_json(const DesignPoint& x)
{
    return Json{{"length_mm", x.length_mm}, {"width_mm", x.width_mm}, {"thickness_mm", x.thickness_mm}};
}

DesignPoint design_from_json(const Json& j)
{
    return {field<double>(j, "length_mm"), field<double>(j, "width_mm"), field<double>(j, "thickness_mm")};
}

Json responses_json(const ResponseVector& y)
{
    return Json{{"mass_g", y.mass_g}, {"stress_mpa", y.stress_mpa}, {"buckling_n", y.buckling_n}};
}

ResponseVector responses_from_json(const Json& j)
{
    return {field<double>(j, "mass_g"), field<double>(j, "stress_mpa"), field<double>(j, "buckling_n")};
}

} // namespace

Json to_json(const rsm::RsmModel& model)
{
    Json terms = Json::array();
    for (auto const& t : model.basis.terms()) {
        terms.push_back(Json::array({t.exp_l, t.exp_b, t.exp_t}));
    }
    Json j{{"response", std::string(to_string(model.response))}, {"terms", terms}, {"coefficients", model.coefficients}};
    j["r_squared"] = model.r_squared ? Json(*model.r_squared) : Json(nullptr);
    return j;
}

rsm::RsmModel rsm_model_from_json(const Json& j)
{
    std::vector<rsm::Monomial> terms;
    for (auto const& t : field<Json>(j, "terms")) {
        auto e = t.get<std::vector<int>>();
        if (e.size() != 3) {
            throw ConfigError("monomial terms need three exponents");
        }
        terms.push_back({e[0], e[1], e[2]});
    }
    std::optional<double> r2;
    if (j.contains("r_squared") && !j.at("r_squared").is_null()) {
        r2 = j.at("r_squared").get<double>();
    }
    return rsm::RsmModel(rsm::MonomialBasis(std::move(terms)), field<std::vector<double>>(j, "coefficients"),
                         response_from_string(field<std::string>(j, "response")), r2);
}

Json to_json(const rsm::RsmModelSet& models)
{
    return Json{{"mass", to_json(models.mass)}, {"stress", to_json(models.stress)}, {"buckling", to_json(models.buckling)}};
}

rsm::RsmModelSet rsm_model_set_from_json(const Json& j)
{
    return {rsm_model_from_json(field<Json>(j, "mass")), rsm_model_from_json(field<Json>(j, "stress")),
            rsm_model_from_json(field<Json>(j, "buckling"))};
}

Json to_json(const NormalizationStats& stats)
{
    return Json{{"mean", stats.mean}, {"std", stats.std}};
}

NormalizationStats stats_from_json(const Json& j)
{
    return {field<std::vector<double>>(j, "mean"), field<std::vector<double>>(j, "std")};
}

Json to_json(const ann::TrainConfig& c)
{
    return Json{{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance},
                {"stall_steps", c.stall_steps},       {"evidence_patience", c.evidence_patience},
                {"alpha", c.alpha},                   {"beta", c.beta},
                {"seed", c.seed},                     {"reestimate", c.reestimate},
                {"per_response", c.per_response},     {"mu_initial", c.mu_initial},
                {"mu_increase", c.mu_increase},       {"mu_decrease", c.mu_decrease},
                {"mu_max", c.mu_max}};
}

ann::TrainConfig train_config_from_json(const Json& j, ann::TrainConfig c)
{
    maybe(j, "max_iterations", c.max_iterations);
    maybe(j, "tolerance", c.tolerance);
    maybe(j, "stall_steps", c.stall_steps);
    maybe(j, "evidence_patience", c.evidence_patience);
    maybe(j, "alpha", c.alpha);
    maybe(j, "beta", c.beta);
    maybe(j, "seed", c.seed);
    maybe(j, "reestimate", c.reestimate);
    maybe(j, "per_response", c.per_response);
    maybe(j, "mu_initial", c.mu_initial);
    maybe(j, "mu_increase", c.mu_increase);
    maybe(j, "mu_decrease", c.mu_decrease);
    maybe(j, "mu_max", c.mu_max);
    return c;
}

Json to_json(const ann::TrainedNetwork& net)
{
    auto const& shape = net.shape();
    Json outputs = Json::array();
    for (auto r : net.outputs) {
        outputs.push_back(std::string(to_string(r)));
    }
    Json layers = Json::array();
    for (std::size_t k = 0; k < shape.layer_count(); ++k) {
        auto w = net.params.weights(k);
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(w.cols()));
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                row[static_cast<std::size_t>(c)] = w(i, c);
            }
            rows.push_back(row);
        }
        auto b = net.params.bias(k);
        layers.push_back(Json{{"weights", rows}, {"bias", std::vector<double>(b.begin(), b.end())}});
    }
    auto const& s = net.summary;
    return Json{{"shape", Json{{"n_inputs", shape.n_inputs}, {"hidden_layers", shape.hidden_layers}, {"n_outputs", shape.n_outputs}}},
                {"outputs", outputs},
                {"layers", layers},
                {"input_stats", to_json(net.input_stats)},
                {"output_stats", to_json(net.output_stats)},
                {"summary", Json{{"alpha", s.alpha},
                                 {"beta", s.beta},
                                 {"gamma", s.gamma},
                                 {"iterations", s.iterations},
                                 {"best_iteration", s.best_iteration},
                                 {"parameter_count", s.parameter_count},
                                 {"data_error", s.data_error},
                                 {"weight_error", s.weight_error},
                                 {"stop_reason", s.stop_reason}}}};
}

ann::TrainedNetwork trained_network_from_json(const Json& j)
{
    auto const& sj = field<Json>(j, "shape");
    ann::NetworkShape shape{field<std::size_t>(sj, "n_inputs"), field<std::vector<std::size_t>>(sj, "hidden_layers"),
                            field<std::size_t>(sj, "n_outputs")};
    ann::NetworkParams params(shape);
    auto const& layers = field<Json>(j, "layers");
    if (layers.size() != shape.layer_count()) {
        throw ConfigError("layer count does not match the network shape");
    }
    for (std::size_t k = 0; k < shape.layer_count(); ++k) {
        auto rows = field<std::vector<std::vector<double>>>(layers[k], "weights");
        auto bias = field<std::vector<double>>(layers[k], "bias");
        auto w = params.weights(k);
        auto b = params.bias(k);
        if (rows.size() != static_cast<std::size_t>(w.rows()) || bias.size() != static_cast<std::size_t>(b.size())) {
            throw ConfigError(fmt::format("layer {} has the wrong dimensions", k));
        }
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            auto const& row = rows[static_cast<std::size_t>(i)];
            if (row.size() != static_cast<std::size_t>(w.cols())) {
                throw ConfigError(fmt::format("layer {} has the wrong dimensions", k));
            }
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(i, c) = row[static_cast<std::size_t>(c)];
            }
            b(i) = bias[static_cast<std::size_t>(i)];
        }
    }
    std::vector<Response> outputs;
    for (auto const& name : field<std::vector<std::string>>(j, "outputs")) {
        outputs.push_back(response_from_string(name));
    }
    auto const& sm = field<Json>(j, "summary");
    ann::TrainingSummary s;
    s.alpha = field<double>(sm, "alpha");
    s.beta = field<double>(sm, "beta");
    s.gamma = field<double>(sm, "gamma");
    s.iterations = field<std::size_t>(sm, "iterations");
    maybe(sm, "best_iteration", s.best_iteration);
    s.parameter_count = field<std::size_t>(sm, "parameter_count");
    s.data_error = field<double>(sm, "data_error");
    s.weight_error = field<double>(sm, "weight_error");
    s.stop_reason = field<std::string>(sm, "stop_reason");
    auto in_stats = stats_from_json(field<Json>(j, "input_stats"));
    auto out_stats = stats_from_json(field<Json>(j, "output_stats"));
    if (in_stats.mean.size() != shape.n_inputs || out_stats.mean.size() != shape.n_outputs ||
        outputs.size() != shape.n_outputs) {
        throw ConfigError("normalization statistics do not match the network shape");
    }
    return {std::move(params), std::move(in_stats), std::move(out_stats), std::move(outputs), std::move(s)};
}

Json to_json(const ann::NeuralSurrogate& surrogate)
{
    Json nets = Json::array();
    for (auto const& n : surrogate.networks) {
        nets.push_back(to_json(n));
    }
    return Json{{"networks", nets}};
}

ann::NeuralSurrogate neural_surrogate_from_json(const Json& j)
{
    ann::NeuralSurrogate s;
    for (auto const& n : field<Json>(j, "networks")) {
        s.networks.push_back(trained_network_from_json(n));
    }
    return s;
}

Json to_json(const nsga2::GaConfig& c)
{
    return Json{{"population_size", c.population_size},
                {"generations", c.generations},
                {"crossover_probability", c.crossover_probability},
                {"mutation_probability", c.mutation_probability},
                {"sbx_eta", c.sbx_eta},
                {"mutation_eta", c.mutation_eta},
                {"seed", c.seed}};
}

nsga2::GaConfig ga_config_from_json(const Json& j, nsga2::GaConfig c)
{
    maybe(j, "population_size", c.population_size);
    maybe(j, "generations", c.generations);
    maybe(j, "crossover_probability", c.crossover_probability);
    maybe(j, "mutation_probability", c.mutation_probability);
    maybe(j, "sbx_eta", c.sbx_eta);
    maybe(j, "mutation_eta", c.mutation_eta);
    maybe(j, "seed", c.seed);
    return c;
}

namespace {

Json front_point_json(const explorer::FrontPoint& p)
{
    return Json{{"design", design_json(p.x)}, {"responses", responses_json(p.responses)}, {"objectives", p.objectives}};
}

Json optional_index(const std::optional<std::size_t>& i)
{
    return i ? Json(*i) : Json(nullptr);
}

std::optional<std::size_t> index_from_json(const Json& j)
{
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<std::size_t>();
}

} // namespace

Json to_json(const explorer::ExplorationResult& r)
{
    Json front = Json::array();
    for (auto const& p : r.front) {
        front.push_back(front_point_json(p));
    }
    Json history = Json::array();
    for (auto const& g : r.history) {
        Json best = Json::array();
        for (double v : g.best_feasible) {
            best.push_back(number_or_null(v));
        }
        history.push_back(Json{{"generation", g.generation},
                               {"best_feasible", best},
                               {"feasible_count", g.feasible_count},
                               {"front_size", g.front_size}});
    }
    auto const& pv = r.provenance;
    return Json{{"front", front},
                {"min_mass", optional_index(r.min_mass)},
                {"min_stress", optional_index(r.min_stress)},
                {"optimum", optional_index(r.optimum)},
                {"empty_front", r.empty()},
                {"history", history},
                {"provenance", Json{{"design", std::string(to_string(pv.design))},
                                    {"source", std::string(to_string(pv.source))},
                                    {"surrogate_fingerprint", pv.surrogate_fingerprint},
                                    {"buckling_threshold_n", pv.buckling_threshold_n},
                                    {"ga", to_json(pv.ga)}}}};
}

explorer::ExplorationResult exploration_from_json(const Json& j)
{
    explorer::ExplorationResult r;
    for (auto const& p : field<Json>(j, "front")) {
        r.front.push_back({design_from_json(field<Json>(p, "design")), responses_from_json(field<Json>(p, "responses")),
                           field<std::vector<double>>(p, "objectives")});
    }
    r.min_mass = index_from_json(field<Json>(j, "min_mass"));
    r.min_stress = index_from_json(field<Json>(j, "min_stress"));
    r.optimum = index_from_json(field<Json>(j, "optimum"));
    for (auto const& g : field<Json>(j, "history")) {
        nsga2::GenerationSummary s;
        s.generation = field<std::size_t>(g, "generation");
        for (auto const& v : field<Json>(g, "best_feasible")) {
            s.best_feasible.push_back(number_or_inf(v));
        }
        s.feasible_count = field<std::size_t>(g, "feasible_count");
        s.front_size = field<std::size_t>(g, "front_size");
        r.history.push_back(std::move(s));
    }
    auto const& pv = field<Json>(j, "provenance");
    r.provenance.design = design_tag_from_string(field<std::string>(pv, "design"));
    r.provenance.source = explorer::surrogate_source_from_string(field<std::string>(pv, "source"));
    r.provenance.surrogate_fingerprint = field<std::string>(pv, "surrogate_fingerprint");
    r.provenance.buckling_threshold_n = field<double>(pv, "buckling_threshold_n");
    r.provenance.ga = ga_config_from_json(field<Json>(pv, "ga"));
    for (auto idx : {r.min_mass, r.min_stress, r.optimum}) {
        if (idx && *idx >= r.front.size()) {
            throw ConfigError("named front index out of range");
        }
    }
    return r;
}

namespace {

Json mean_std_json(const std::optional<explorer::MeanStd>& m)
{
    if (!m) {
        return nullptr;
    }
    return Json{{"mean", m->mean}, {"std", m->std ? Json(*m->std) : Json(nullptr)}};
}

std::optional<explorer::MeanStd> mean_std_from_json(const Json& j)
{
    if (j.is_null()) {
        return std::nullopt;
    }
    explorer::MeanStd m{field<double>(j, "mean"), std::nullopt};
    if (j.contains("std") && !j.at("std").is_null()) {
        m.std = j.at("std").get<double>();
    }
    return m;
}

} // namespace

Json to_json(const explorer::StudyReport& report)
{
    Json cells = Json::array();
    for (auto const& c : report.cells) {
        cells.push_back(Json{{"key", c.key()},
                             {"hidden_layers", c.hidden_layers},
                             {"n_train", c.n_train},
                             {"test", mean_std_json(c.test)},
                             {"all", mean_std_json(c.all)},
                             {"divergences", c.divergences},
                             {"test_errors", c.test_errors},
                             {"all_errors", c.all_errors}});
    }
    return Json{{"kind", std::string(to_string(report.kind))},
                {"design", std::string(to_string(report.design))},
                {"trials", report.trials},
                {"cells", cells}};
}

explorer::StudyReport study_from_json(const Json& j)
{
    explorer::StudyReport r;
    r.kind = explorer::study_kind_from_string(field<std::string>(j, "kind"));
    r.design = design_tag_from_string(field<std::string>(j, "design"));
    r.trials = field<std::size_t>(j, "trials");
    for (auto const& c : field<Json>(j, "cells")) {
        explorer::StudyCell cell;
        cell.hidden_layers = field<std::vector<std::size_t>>(c, "hidden_layers");
        cell.n_train = field<std::size_t>(c, "n_train");
        cell.test = mean_std_from_json(field<Json>(c, "test"));
        cell.all = mean_std_from_json(field<Json>(c, "all"));
        cell.divergences = field<std::size_t>(c, "divergences");
        cell.test_errors = field<std::vector<double>>(c, "test_errors");
        cell.all_errors = field<std::vector<double>>(c, "all_errors");
        r.cells.push_back(std::move(cell));
    }
    return r;
}

Json to_json(const Envelope& env)
{
    return Json{{"schema_version", env.schema_version},
                {"toolkit_version", env.toolkit_version},
                {"timestamp", env.timestamp},
                {"kind", env.kind},
                {"config", env.config},
                {"payload", env.payload}};
}

Envelope envelope_from_json(const Json& j)
{
    if (!j.is_object() || !j.contains("schema_version")) {
        throw ConfigError("not a result envelope: missing schema_version");
    }
    int const version = field<int>(j, "schema_version");
    if (version != kSchemaVersion) {
        throw ConfigError(fmt::format("unsupported envelope schema version {} (this build reads version {})", version,
                                      kSchemaVersion));
    }
    Envelope env;
    env.schema_version = version;
    env.toolkit_version = field<std::string>(j, "toolkit_version");
    env.timestamp = field<std::string>(j, "timestamp");
    env.kind = field<std::string>(j, "kind");
    env.config = field<Json>(j, "config");
    env.payload = field<Json>(j, "payload");
    return env;
}

void write_json(const Json& j, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError(fmt::format("write to '{}' failed", path.string()));
    }
}

Json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
    }
}

void write_envelope(const Envelope& env, const std::filesystem::path& path)
{
    write_json(to_json(env), path);
}

Envelope read_envelope(const std::filesystem::path& path)
{
    return envelope_from_json(read_json(path));
}

explorer::Surrogate surrogate_from_envelope(const Envelope& env)
{
    if (env.kind == "rsm_models") {
        return explorer::Surrogate(rsm_model_set_from_json(env.payload));
    }
    if (env.kind == "network") {
        return explorer::Surrogate(neural_surrogate_from_json(env.payload));
    }
    throw ConfigError(fmt::format("envelope of kind '{}' does not hold a surrogate", env.kind));
}

} // namespace discopt::io
