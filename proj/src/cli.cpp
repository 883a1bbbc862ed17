#include "discopt/cli.hpp"

#include "discopt/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace discopt::cli {

namespace fs = std::filesystem;
using io::Json;

std::size_t RunConfig::design_rows() const
{
    if (rows != 0) {
        return rows;
    }
    return design == DesignTag::A ? 127 : 128;
}

Json default_config()
{
    auto train = io::to_json(ann::TrainConfig{});
    train.erase("seed");
    auto ga = io::to_json(nsga2::GaConfig{});
    ga.erase("seed");
    explorer::NetworkSizeGrid net;
    explorer::TrainingSizeGrid sizes;
    std::size_t const hw = std::max(1u, std::thread::hardware_concurrency());

    Json d;
    d["design"] = "A";
    d["source"] = "rsm";
    d["seed"] = std::uint64_t{1};
    d["workers"] = std::size_t{hw};
    d["noise"] = 0.01;
    d["rows"] = std::size_t{0};
    d["scheme"] = "latin_hypercube";
    d["threshold"] = explorer::kDefaultBucklingThresholdN;
    d["data"] = "";
    d["model"] = "";
    d["inputs"] = Json::array();
    d["out"] = "";
    d["timestamp"] = "";
    d["hidden"] = sizes.hidden_layers;
    d["n_train"] = net.n_train;
    d["study"] = "network_size";
    d["trials"] = std::size_t{10};
    d["study_layers"] = net.layers;
    d["study_neurons"] = net.neurons;
    d["study_sizes"] = sizes.sizes;
    d["train"] = train;
    d["ga"] = ga;
    return d;
}

namespace {

const Json* lookup(const Json& doc, const std::string& dotted)
{
    const Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        auto dot = dotted.find('.', start);
        auto part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) {
            return nullptr;
        }
        node = &node->at(part);
        if (dot == std::string::npos) {
            return node;
        }
        start = dot + 1;
    }
}

Json* lookup(Json& doc, const std::string& dotted)
{
    return const_cast<Json*>(lookup(static_cast<const Json&>(doc), dotted));
}

void leaf_keys(const Json& node, const std::string& prefix, std::vector<std::string>& out)
{
    for (auto it = node.begin(); it != node.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it.value().is_object()) {
            leaf_keys(it.value(), key, out);
        } else {
            out.push_back(key);
        }
    }
}

void merge_file(Json& into, const Json& from, const Json& defaults, const std::string& prefix)
{
    if (!from.is_object()) {
        throw ConfigError(prefix.empty() ? "config file must hold a JSON object"
                                         : fmt::format("config key '{}' must be an object", prefix));
    }
    for (auto it = from.begin(); it != from.end(); ++it) {
        std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!defaults.contains(it.key())) {
            throw ConfigError(fmt::format("unknown config key '{}'", key));
        }
        if (defaults.at(it.key()).is_object()) {
            merge_file(into[it.key()], it.value(), defaults.at(it.key()), key);
        } else {
            into[it.key()] = it.value();
        }
    }
}

Json parse_scalar(const Json& model, const std::string& key, const std::string& text)
{
    auto bad = [&] { return ConfigError(fmt::format("config key '{}': cannot read '{}'", key, text)); };
    if (model.is_boolean()) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw bad();
    }
    if (model.is_number_integer()) {
        const char* first = text.data();
        const char* last = text.data() + text.size();
        if (!text.empty() && text.front() == '-') {
            std::int64_t v{};
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || p != last) throw bad();
            return v;
        }
        std::uint64_t v{};
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || p != last) throw bad();
        return v;
    }
    if (model.is_number()) {
        char* end = nullptr;
        double v = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size()) throw bad();
        return v;
    }
    return text;
}

} // namespace

std::string env_name(const std::string& dotted_key)
{
    std::string name = "DISCOPT_";
    for (char c : dotted_key) {
        name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

void apply_override(Json& doc, const std::string& dotted_key, const std::string& text)
{
    static const Json defaults = default_config();
    const Json* model = lookup(defaults, dotted_key);
    if (model == nullptr || model->is_object()) {
        throw ConfigError(fmt::format("unknown config key '{}'", dotted_key));
    }
    Json value;
    if (model->is_array()) {
        value = Json::array();
        Json element = model->empty() ? Json("") : model->front();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) {
                value.push_back(parse_scalar(element, dotted_key, item));
            }
        }
    } else {
        value = parse_scalar(*model, dotted_key, text);
    }
    Json* slot = lookup(doc, dotted_key);
    if (slot == nullptr) {
        throw ConfigError(fmt::format("unknown config key '{}'", dotted_key));
    }
    *slot = std::move(value);
}

Json merge_layers(const Json* file_doc, const EnvLookup& env, const std::vector<std::pair<std::string, std::string>>& flags)
{
    Json doc = default_config();
    if (file_doc != nullptr) {
        merge_file(doc, *file_doc, default_config(), "");
    }
    std::vector<std::string> keys;
    leaf_keys(doc, "", keys);
    for (auto const& key : keys) {
        if (auto v = env(env_name(key))) {
            apply_override(doc, key, *v);
        }
    }
    for (auto const& [key, text] : flags) {
        apply_override(doc, key, text);
    }
    return doc;
}

namespace {

template <typename T>
T get(const Json& doc, const std::string& key)
{
    const Json* node = lookup(doc, key);
    if (node == nullptr) {
        throw ConfigError(fmt::format("missing config key '{}'", key));
    }
    try {
        return node->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(fmt::format("config key '{}' has the wrong type ({})", key, node->dump()));
    }
}

std::uint64_t whole_number(const Json& doc, const std::string& key)
{
    const Json* node = lookup(doc, key);
    if (node == nullptr) {
        throw ConfigError(fmt::format("missing config key '{}'", key));
    }
    if (!node->is_number_integer() || (!node->is_number_unsigned() && node->get<std::int64_t>() < 0)) {
        throw ConfigError(fmt::format("config key '{}' must be a non-negative integer ({})", key, node->dump()));
    }
    return node->get<std::uint64_t>();
}

std::size_t positive(const Json& doc, const std::string& key)
{
    auto v = whole_number(doc, key);
    if (v == 0) {
        throw ConfigError(fmt::format("config key '{}' must be at least 1", key));
    }
    return static_cast<std::size_t>(v);
}

std::vector<std::size_t> positive_list(const Json& doc, const std::string& key)
{
    const Json* node = lookup(doc, key);
    if (node == nullptr || !node->is_array() || node->empty()) {
        throw ConfigError(fmt::format("config key '{}' must be a non-empty list", key));
    }
    std::vector<std::size_t> out;
    for (auto const& v : *node) {
        if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
            throw ConfigError(fmt::format("config key '{}' must list positive integers", key));
        }
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

template <typename Fn>
auto checked(const std::string& key, Fn&& fn)
{
    try {
        return fn();
    } catch (const InvalidArgument& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

} // namespace

RunConfig resolve(const Json& doc)
{
    RunConfig c;
    c.design = checked("design", [&] { return design_tag_from_string(get<std::string>(doc, "design")); });
    c.source = checked("source", [&] { return explorer::surrogate_source_from_string(get<std::string>(doc, "source")); });
    c.seed = whole_number(doc, "seed");
    c.workers = positive(doc, "workers");
    c.noise = get<double>(doc, "noise");
    if (!std::isfinite(c.noise) || c.noise < 0.0) {
        throw ConfigError("config key 'noise' must be a finite non-negative fraction");
    }
    c.rows = static_cast<std::size_t>(whole_number(doc, "rows"));
    if (c.rows != 0 && c.rows < explorer::kMinSynthesisRows) {
        throw ConfigError(fmt::format("config key 'rows' must be 0 (design default) or at least {}",
                                      explorer::kMinSynthesisRows));
    }
    c.scheme = checked("scheme", [&] { return sampling_scheme_from_string(get<std::string>(doc, "scheme")); });
    c.threshold_n = get<double>(doc, "threshold");
    if (!std::isfinite(c.threshold_n)) {
        throw ConfigError("config key 'threshold' must be finite");
    }
    c.data = get<std::string>(doc, "data");
    c.model = get<std::string>(doc, "model");
    c.inputs = get<std::vector<std::string>>(doc, "inputs");
    c.out = get<std::string>(doc, "out");
    c.timestamp = get<std::string>(doc, "timestamp");

    c.hidden = positive_list(doc, "hidden");
    c.n_train = positive(doc, "n_train");
    if (c.n_train < 2) {
        throw ConfigError("config key 'n_train' must be at least 2");
    }
    c.train = checked("train", [&] {
        auto t = io::train_config_from_json(get<Json>(doc, "train"));
        t.validate();
        return t;
    });

    c.study = checked("study", [&] { return explorer::study_kind_from_string(get<std::string>(doc, "study")); });
    c.trials = positive(doc, "trials");
    c.network_grid.layers = positive_list(doc, "study_layers");
    c.network_grid.neurons = positive_list(doc, "study_neurons");
    c.network_grid.n_train = c.n_train;
    c.size_grid.sizes = positive_list(doc, "study_sizes");
    c.size_grid.hidden_layers = c.hidden;

    c.ga = checked("ga", [&] {
        auto g = io::ga_config_from_json(get<Json>(doc, "ga"));
        g.seed = c.seed;
        g.workers = c.workers;
        g.validate();
        return g;
    });
    return c;
}

std::optional<std::string> system_env(const std::string& name)
{
    if (const char* v = std::getenv(name.c_str())) {
        return std::string(v);
    }
    return std::nullopt;
}

std::string envelope_timestamp(const RunConfig& cfg, const EnvLookup& env)
{
    if (!cfg.timestamp.empty()) {
        return cfg.timestamp;
    }
    std::time_t t{};
    if (auto epoch = env("SOURCE_DATE_EPOCH")) {
        long long v{};
        auto [p, ec] = std::from_chars(epoch->data(), epoch->data() + epoch->size(), v);
        if (ec != std::errc{} || p != epoch->data() + epoch->size()) {
            throw ConfigError(fmt::format("SOURCE_DATE_EPOCH is not an integer: '{}'", *epoch));
        }
        t = static_cast<std::time_t>(v);
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

struct Context {
    std::string command;
    Json doc;
    RunConfig cfg;
    std::ostream& out;
    const EnvLookup& env;
};

void require_file(const std::string& path, const char* key)
{
    if (path.empty()) {
        throw ConfigError(fmt::format("config key '{}' is required for this command", key));
    }
    if (!fs::is_regular_file(path)) {
        throw IoError(fmt::format("'{}' ({}) does not exist or is not a file", path, key));
    }
}

// Output must go to an existing directory; checked before any work starts.
void require_output_parent(const fs::path& path)
{
    auto parent = path.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError(fmt::format("output directory '{}' does not exist", parent.string()));
    }
    if (fs::exists(path) && fs::is_directory(path)) {
        throw IoError(fmt::format("output path '{}' is a directory", path.string()));
    }
}

void require_output_dir(const fs::path& dir)
{
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) {
            throw IoError(fmt::format("output path '{}' is not a directory", dir.string()));
        }
        return;
    }
    auto parent = dir.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError(fmt::format("output directory '{}' does not exist", parent.string()));
    }
}

void make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError(fmt::format("cannot create directory '{}': {}", dir.string(), ec.message()));
    }
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
    }
    return f;
}

std::string out_or(const Context& ctx, const std::string& fallback)
{
    return ctx.cfg.out.empty() ? fallback : ctx.cfg.out;
}

io::Envelope make_envelope(const Context& ctx, std::string kind, Json payload)
{
    io::Envelope env;
    env.timestamp = envelope_timestamp(ctx.cfg, ctx.env);
    env.kind = std::move(kind);
    env.config = ctx.doc;
    env.config["command"] = ctx.command;
    env.payload = std::move(payload);
    return env;
}

std::string monomial_name(const rsm::Monomial& m)
{
    std::vector<std::string> parts;
    auto add = [&](const char* var, int e) {
        if (e == 1) parts.emplace_back(var);
        else if (e > 1) parts.push_back(fmt::format("{}^{}", var, e));
    };
    add("l", m.exp_l);
    add("b", m.exp_b);
    add("t", m.exp_t);
    return parts.empty() ? "1" : fmt::format("{}", fmt::join(parts, "*"));
}

std::string row_csv(const DesignPoint& x, const ResponseVector& y)
{
    return fmt::format("{},{},{},{},{},{}", format_double(x.length_mm), format_double(x.width_mm),
                       format_double(x.thickness_mm), format_double(y.mass_g), format_double(y.stress_mpa),
                       format_double(y.buckling_n));
}

void print_point(std::ostream& out, const char* label, const explorer::FrontPoint& p)
{
    fmt::print(out, "  {:<11} l={:.3f} b={:.3f} t={:.4f}  mass={:.5f} g  stress={:.3f} MPa  buckling={:.2f} N\n", label,
               p.x.length_mm, p.x.width_mm, p.x.thickness_mm, p.responses.mass_g, p.responses.stress_mpa,
               p.responses.buckling_n);
}

// ---- gen-data ----

int cmd_gen_data(Context& ctx)
{
    auto const& c = ctx.cfg;
    fs::path path = out_or(ctx, fmt::format("design_{}.csv", to_string(c.design)));
    require_output_parent(path);
    auto data = explorer::synthesize_dataset(c.design, c.design_rows(), c.scheme, c.seed, c.noise);
    write_csv(data, path);
    fmt::print(ctx.out, "wrote {} rows (design {}, {}, noise {}) to {}\n", data.size(), to_string(c.design),
               to_string(c.scheme), c.noise, path.string());
    return 0;
}

// ---- fit-rsm ----

int cmd_fit_rsm(Context& ctx)
{
    auto const& c = ctx.cfg;
    require_file(c.data, "data");
    fs::path path = out_or(ctx, fmt::format("rsm_{}.json", to_string(c.design)));
    require_output_parent(path);
    auto data = read_csv(c.data, c.design);
    auto models = rsm::fit_published_bases(data);
    for (auto r : kAllResponses) {
        auto const& m = models[r];
        fmt::print(ctx.out, "{} (R^2 = {:.6f})\n", to_string(r), m.r_squared.value_or(std::nan("")));
        auto const& terms = m.basis.terms();
        for (std::size_t i = 0; i < terms.size(); ++i) {
            fmt::print(ctx.out, "  {:>12}  {: .10g}\n", monomial_name(terms[i]), m.coefficients[i]);
        }
    }
    io::write_envelope(make_envelope(ctx, "rsm_models", io::to_json(models)), path);
    fmt::print(ctx.out, "wrote {}\n", path.string());
    return 0;
}

// ---- train-ann ----

Json errors_json(const ann::PercentErrors& e)
{
    return Json{{"mass", e.per_response[0]}, {"stress", e.per_response[1]}, {"buckling", e.per_response[2]},
                {"mean", e.mean}};
}

ann::PercentErrors errors_on(const ann::NeuralSurrogate& net, const Dataset& data)
{
    auto pred = net.predict(std::span<const DesignPoint>(data.designs()));
    auto truth = data.responses();
    return ann::mean_abs_percent_error(truth, pred);
}

int cmd_train_ann(Context& ctx)
{
    auto const& c = ctx.cfg;
    require_file(c.data, "data");
    fs::path path = out_or(ctx, fmt::format("ann_{}.json", to_string(c.design)));
    require_output_parent(path);
    auto data = read_csv(c.data, c.design);
    if (c.n_train >= data.size()) {
        throw ConfigError(fmt::format("n_train ({}) must be smaller than the dataset ({} rows)", c.n_train, data.size()));
    }
    auto parts = split(data, c.n_train, mix_seed(c.seed, 0));
    auto tc = c.train;
    tc.seed = mix_seed(c.seed, 1);
    auto net = ann::train(c.hidden, parts.train, tc);

    auto e_train = errors_on(net, parts.train);
    auto e_test = errors_on(net, parts.test);
    auto e_all = errors_on(net, data);
    fmt::print(ctx.out, "network {} trained on {} rows, tested on {}\n", fmt::join(c.hidden, "x"), parts.train.size(),
               parts.test.size());
    for (auto const& n : net.networks) {
        fmt::print(ctx.out, "  iterations {} (kept {}), stop: {}, gamma {:.1f} of {} parameters\n", n.summary.iterations,
                   n.summary.best_iteration, n.summary.stop_reason, n.summary.gamma, n.summary.parameter_count);
    }
    fmt::print(ctx.out, "mean absolute percent error\n  {:<6} {:>9} {:>9} {:>9} {:>9}\n", "", "mass", "stress",
               "buckling", "mean");
    for (auto const& [name, e] : {std::pair{"train", e_train}, std::pair{"test", e_test}, std::pair{"all", e_all}}) {
        fmt::print(ctx.out, "  {:<6} {:>9.3f} {:>9.3f} {:>9.3f} {:>9.3f}\n", name, e.per_response[0], e.per_response[1],
                   e.per_response[2], e.mean);
    }
    auto payload = io::to_json(net);
    payload["errors"] = Json{{"train", errors_json(e_train)}, {"test", errors_json(e_test)}, {"all", errors_json(e_all)}};
    io::write_envelope(make_envelope(ctx, "network", std::move(payload)), path);
    fmt::print(ctx.out, "wrote {}\n", path.string());
    return 0;
}

// ---- optimize ----

explorer::Surrogate load_surrogate(const RunConfig& c)
{
    if (c.model.empty()) {
        if (c.source == explorer::SurrogateSource::ann) {
            throw ConfigError("source 'ann' needs a trained network: set 'model'");
        }
        return explorer::Surrogate(rsm::published_models(c.design));
    }
    auto env = io::read_envelope(c.model);
    auto s = io::surrogate_from_envelope(env);
    if (s.source() != c.source) {
        throw ConfigError(fmt::format("model '{}' holds a {} surrogate but source is '{}'", c.model,
                                      explorer::to_string(s.source()), explorer::to_string(c.source)));
    }
    if (env.config.contains("design") && env.config.at("design").is_string() &&
        env.config.at("design").get<std::string>() != to_string(c.design)) {
        throw ConfigError(fmt::format("model '{}' was built for design {} but design is {}", c.model,
                                      env.config.at("design").get<std::string>(), to_string(c.design)));
    }
    return s;
}

void write_front_csv(const std::vector<explorer::FrontPoint>& front, const fs::path& path)
{
    auto f = open_out(path);
    f << kCsvHeader << '\n';
    for (auto const& p : front) {
        f << row_csv(p.x, p.responses) << '\n';
    }
}

void write_generations_csv(const std::vector<nsga2::GenerationSummary>& history, const fs::path& path)
{
    auto f = open_out(path);
    f << "generation,best_mass_g,best_stress_mpa,feasible_count,front_size\n";
    for (auto const& g : history) {
        auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
        f << fmt::format("{},{},{},{},{}\n", g.generation, cell(g.best_feasible[0]), cell(g.best_feasible[1]),
                         g.feasible_count, g.front_size);
    }
}

int cmd_optimize(Context& ctx)
{
    auto const& c = ctx.cfg;
    if (!c.model.empty()) {
        require_file(c.model, "model");
    }
    fs::path dir = out_or(ctx, fmt::format("optimize_{}_{}", to_string(c.design), explorer::to_string(c.source)));
    require_output_dir(dir);

    explorer::DesignProblem problem{c.design, load_surrogate(c), c.threshold_n, Bounds::disc_default()};
    problem.validate();
    auto result = explorer::explore(problem, c.ga);

    make_dir(dir);
    io::write_envelope(make_envelope(ctx, "exploration", io::to_json(result)), dir / "exploration.json");
    write_front_csv(result.front, dir / "front.csv");
    write_generations_csv(result.history, dir / "generations.csv");

    fmt::print(ctx.out, "design {}, {} surrogate, {} x {} generations, buckling >= {} N\n", to_string(c.design),
               explorer::to_string(c.source), c.ga.population_size, c.ga.generations, c.threshold_n);
    if (result.empty()) {
        fmt::print(ctx.out, "no feasible design found; outputs written to {}\n", dir.string());
        return static_cast<int>(ExitCode::empty_front);
    }
    fmt::print(ctx.out, "front: {} points\n", result.front.size());
    print_point(ctx.out, "min mass", result.front[*result.min_mass]);
    print_point(ctx.out, "min stress", result.front[*result.min_stress]);
    print_point(ctx.out, "optimum", result.front[*result.optimum]);
    fmt::print(ctx.out, "wrote {}/{{exploration.json,front.csv,generations.csv}}\n", dir.string());
    return 0;
}

// ---- study ----

std::string cell_text(const std::optional<explorer::MeanStd>& m)
{
    if (!m) {
        return "n/a";
    }
    if (!m->std) {
        return fmt::format("{:.2f}", m->mean);
    }
    return fmt::format("{:.2f}±{:.2f}", m->mean, *m->std);
}

void print_study(std::ostream& out, const explorer::StudyReport& r, const RunConfig& c)
{
    constexpr int w = 13;
    auto pad = [](const std::string& s) {
        // "±" is two bytes but one column
        auto cols = s.size() - (s.find("±") != std::string::npos ? 1 : 0);
        return s + std::string(cols < w ? w - cols : 1, ' ');
    };
    if (r.kind == explorer::StudyKind::network_size) {
        fmt::print(out, "Design {}: mean absolute percent error (%), {} trials, {} training samples\n",
                   to_string(r.design), r.trials, c.network_grid.n_train);
        fmt::print(out, "{:<8}{:<7}Number of Neurons\n", "", "");
        fmt::print(out, "{:<8}{:<7}", "Layers", "");
        for (auto n : c.network_grid.neurons) {
            fmt::print(out, "{}", pad(std::to_string(n)));
        }
        fmt::print(out, "\n");
        std::size_t i = 0;
        for (auto layers : c.network_grid.layers) {
            std::string test_row, all_row;
            for (std::size_t k = 0; k < c.network_grid.neurons.size(); ++k, ++i) {
                test_row += pad(cell_text(r.cells[i].test));
                all_row += pad(cell_text(r.cells[i].all));
            }
            fmt::print(out, "{:<8}{:<7}{}\n{:<8}{:<7}{}\n", layers, "Test", test_row, "", "All", all_row);
        }
    } else {
        fmt::print(out, "Design {}: mean absolute percent error (%), {} trials, network {}\n", to_string(r.design),
                   r.trials, fmt::join(c.size_grid.hidden_layers, "x"));
        fmt::print(out, "{:<15}", "Training size");
        for (auto n : c.size_grid.sizes) {
            fmt::print(out, "{}", pad(std::to_string(n)));
        }
        std::string test_row, all_row;
        for (auto const& cell : r.cells) {
            test_row += pad(cell_text(cell.test));
            all_row += pad(cell_text(cell.all));
        }
        fmt::print(out, "\n{:<15}{}\n{:<15}{}\n", "Test", test_row, "All", all_row);
    }
    for (auto const& cell : r.cells) {
        if (cell.divergences > 0) {
            fmt::print(out, "note: {} diverged in {} of {} trials\n", cell.key(), cell.divergences, r.trials);
        }
    }
}

int cmd_study(Context& ctx)
{
    auto const& c = ctx.cfg;
    require_file(c.data, "data");
    fs::path path = out_or(ctx, fmt::format("study_{}_{}.json", explorer::to_string(c.study), to_string(c.design)));
    require_output_parent(path);
    auto data = read_csv(c.data, c.design);
    std::size_t largest = c.study == explorer::StudyKind::network_size
                              ? c.network_grid.n_train
                              : *std::max_element(c.size_grid.sizes.begin(), c.size_grid.sizes.end());
    if (largest >= data.size()) {
        throw ConfigError(fmt::format("training size {} must be smaller than the dataset ({} rows)", largest, data.size()));
    }
    explorer::StudyOptions opt;
    opt.trials = c.trials;
    opt.seed = c.seed;
    opt.train = c.train;
    opt.workers = c.workers;
    auto report = c.study == explorer::StudyKind::network_size
                      ? explorer::run_network_size_study(data, c.network_grid, opt)
                      : explorer::run_training_size_study(data, c.size_grid, opt);
    print_study(ctx.out, report, c);
    io::write_envelope(make_envelope(ctx, "study", io::to_json(report)), path);
    fmt::print(ctx.out, "wrote {}\n", path.string());
    return 0;
}

// ---- report ----

struct OverlayRow {
    std::string label;
    explorer::FrontPoint point;
    std::string marker;
};

std::string markers_of(const explorer::ExplorationResult& r, std::size_t i)
{
    std::vector<std::string> m;
    if (r.min_mass == i) m.emplace_back("min_mass");
    if (r.min_stress == i) m.emplace_back("min_stress");
    if (r.optimum == i) m.emplace_back("optimum");
    return fmt::format("{}", fmt::join(m, "|"));
}

void write_overlay_svg(const std::vector<OverlayRow>& rows, const std::vector<std::string>& labels, const fs::path& path)
{
    constexpr double width = 720, height = 480, left = 80, right = 170, top = 30, bottom = 60;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (auto const& r : rows) {
        x0 = std::min(x0, r.point.responses.mass_g);
        x1 = std::max(x1, r.point.responses.mass_g);
        y0 = std::min(y0, r.point.responses.stress_mpa);
        y1 = std::max(y1, r.point.responses.stress_mpa);
    }
    if (rows.empty()) {
        x0 = y0 = 0;
        x1 = y1 = 1;
    }
    if (x1 - x0 <= 0) { x0 -= 0.5; x1 += 0.5; }
    if (y1 - y0 <= 0) { y0 -= 0.5; y1 += 0.5; }
    double const pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
    auto sy = [&](double v) { return top + ph - (v - y0) / (y1 - y0) * ph; };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    auto color = [&](const std::string& label) {
        auto i = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
        return palette[i % std::size(palette)];
    };

    auto f = open_out(path);
    fmt::print(f, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"12\">\n",
               width, height);
    fmt::print(f, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    fmt::print(f, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top, pw, ph);
    for (int k = 0; k <= 4; ++k) {
        double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        fmt::print(f, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", sx(xv), top + ph + 18, xv);
        fmt::print(f, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", left - 6, sy(yv) + 4, yv);
    }
    fmt::print(f, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">Mass (g)</text>\n", left + pw / 2, height - 15);
    fmt::print(f, "<text x=\"20\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.1f})\">Stress (MPa)</text>\n",
               top + ph / 2, top + ph / 2);
    for (auto const& r : rows) {
        fmt::print(f, "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", sx(r.point.responses.mass_g),
                   sy(r.point.responses.stress_mpa), color(r.label));
    }
    for (auto const& r : rows) {
        if (r.marker.empty()) continue;
        double cx = sx(r.point.responses.mass_g), cy = sy(r.point.responses.stress_mpa);
        if (r.marker.find("optimum") != std::string::npos) {
            fmt::print(f, "<polygon points=\"{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                       cx, cy - 8, cx + 8, cy, cx, cy + 8, cx - 8, cy);
        }
        if (r.marker.find("min_") != std::string::npos) {
            fmt::print(f, "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"12\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                       cx - 6, cy - 6);
        }
    }
    double ly = top + 10;
    for (auto const& l : labels) {
        fmt::print(f, "<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"{}\"/><text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n",
                   width - right + 20, ly, color(l), width - right + 30, ly + 4, l);
        ly += 18;
    }
    fmt::print(f, "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"none\" stroke=\"black\"/><text x=\"{:.1f}\" y=\"{:.1f}\">extreme</text>\n",
               width - right + 15, ly - 5, width - right + 30, ly + 4);
    ly += 18;
    fmt::print(f, "<polygon points=\"{0:.1f},{1:.1f} {2:.1f},{3:.1f} {0:.1f},{4:.1f} {5:.1f},{3:.1f}\" fill=\"none\" stroke=\"black\"/><text x=\"{6:.1f}\" y=\"{7:.1f}\">optimum</text>\n",
               width - right + 20, ly - 6, width - right + 26, ly, ly + 6, width - right + 14, width - right + 30, ly + 4);
    f << "</svg>\n";
}

void write_scatter(const std::vector<explorer::ScatterRow>& rows, std::size_t n_models, const fs::path& path)
{
    auto f = open_out(path);
    f << "length_mm,width_mm,thickness_mm";
    for (auto r : kAllResponses) {
        f << fmt::format(",{0}_true,{0}_pred,{0}_std", to_string(r));
    }
    f << ",models\n";
    for (auto const& row : rows) {
        f << format_double(row.x.length_mm) << ',' << format_double(row.x.width_mm) << ','
          << format_double(row.x.thickness_mm);
        for (auto r : kAllResponses) {
            f << ',' << format_double(row.truth[r]) << ',' << format_double(row.mean[r]) << ','
              << format_double(row.std[r]);
        }
        f << ',' << n_models << '\n';
    }
}

void write_study_csv(const explorer::StudyReport& r, const fs::path& path)
{
    auto f = open_out(path);
    f << "cell,hidden_layers,n_train,test_mean,test_std,all_mean,all_std,divergences\n";
    auto num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (auto const& c : r.cells) {
        f << fmt::format("{},{},{},{},{},{},{},{}\n", c.key(), fmt::join(c.hidden_layers, "x"), c.n_train,
                         num(c.test ? std::optional(c.test->mean) : std::nullopt), num(c.test ? c.test->std : std::nullopt),
                         num(c.all ? std::optional(c.all->mean) : std::nullopt), num(c.all ? c.all->std : std::nullopt),
                         c.divergences);
    }
}

int cmd_report(Context& ctx)
{
    auto const& c = ctx.cfg;
    if (c.inputs.empty()) {
        throw ConfigError("report needs at least one input envelope");
    }
    for (auto const& p : c.inputs) {
        require_file(p, "inputs");
    }
    fs::path dir = out_or(ctx, "report");
    require_output_dir(dir);

    std::vector<io::Envelope> envelopes;
    for (auto const& p : c.inputs) {
        try {
            envelopes.push_back(io::read_envelope(p));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}: {}", p, e.what()));
        }
    }

    std::vector<OverlayRow> overlay;
    std::vector<std::string> labels;
    std::vector<explorer::Surrogate> surrogates;
    std::vector<std::pair<std::string, explorer::StudyReport>> studies;
    for (std::size_t k = 0; k < envelopes.size(); ++k) {
        auto const& env = envelopes[k];
        if (env.kind == "exploration") {
            auto r = io::exploration_from_json(env.payload);
            std::string label = fmt::format("{}:{}", explorer::to_string(r.provenance.source), to_string(r.provenance.design));
            if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
                label += fmt::format("#{}", k + 1);
            }
            labels.push_back(label);
            for (std::size_t i = 0; i < r.front.size(); ++i) {
                overlay.push_back({label, r.front[i], markers_of(r, i)});
            }
        } else if (env.kind == "rsm_models" || env.kind == "network") {
            surrogates.push_back(io::surrogate_from_envelope(env));
        } else if (env.kind == "study") {
            studies.emplace_back(fs::path(c.inputs[k]).stem().string(), io::study_from_json(env.payload));
        } else {
            throw ConfigError(fmt::format("{}: unknown envelope kind '{}'", c.inputs[k], env.kind));
        }
    }
    std::optional<Dataset> truth;
    if (!surrogates.empty()) {
        require_file(c.data, "data");
        truth = read_csv(c.data, c.design);
    }

    make_dir(dir);
    if (!labels.empty()) {
        auto f = open_out(dir / "front_overlay.csv");
        f << "source," << kCsvHeader << ",marker\n";
        for (auto const& r : overlay) {
            f << r.label << ',' << row_csv(r.point.x, r.point.responses) << ',' << r.marker << '\n';
        }
        f.close();
        write_overlay_svg(overlay, labels, dir / "front_overlay.svg");
        fmt::print(ctx.out, "front overlay: {} points from {} fronts -> {}\n", overlay.size(), labels.size(),
                   (dir / "front_overlay.csv").string());
    }
    if (truth) {
        auto rows = explorer::prediction_scatter(*truth, surrogates);
        write_scatter(rows, surrogates.size(), dir / "scatter.csv");
        fmt::print(ctx.out, "scatter: {} rows, {} surrogates -> {}\n", rows.size(), surrogates.size(),
                   (dir / "scatter.csv").string());
    }
    for (auto const& [stem, report] : studies) {
        auto p = dir / fmt::format("{}.csv", stem);
        write_study_csv(report, p);
        fmt::print(ctx.out, "study table -> {}\n", p.string());
    }
    return 0;
}

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return static_cast<int>(ExitCode::config);
    case ErrorKind::io: return static_cast<int>(ExitCode::io);
    case ErrorKind::numerical: return static_cast<int>(ExitCode::numerical);
    case ErrorKind::infeasible: return static_cast<int>(ExitCode::empty_front);
    case ErrorKind::invalid_argument: break;
    }
    return static_cast<int>(ExitCode::failure);
}

struct Flag {
    const char* name;
    const char* key;
    const char* help;
};

constexpr Flag kFlags[] = {
    {"--design", "design", "design variant: A or B"},
    {"--source", "source", "surrogate: rsm or ann"},
    {"--seed", "seed", "random seed"},
    {"--pop", "ga.population_size", "GA population size"},
    {"--gens", "ga.generations", "GA generations"},
    {"--out", "out", "output file or directory"},
    {"--workers", "workers", "worker threads"},
    {"--noise", "noise", "multiplicative noise std fraction"},
    {"--data", "data", "dataset CSV"},
    {"--model", "model", "surrogate envelope"},
    {"--rows", "rows", "number of synthesized rows (0: design default)"},
    {"--scheme", "scheme", "sampling: latin_hypercube or grid"},
    {"--threshold", "threshold", "minimum buckling load (N)"},
    {"--hidden", "hidden", "hidden layer sizes, comma separated"},
    {"--n-train", "n_train", "training rows"},
    {"--trials", "trials", "study trials per cell"},
    {"--timestamp", "timestamp", "fixed envelope timestamp"},
};

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env)
{
    CLI::App app{"Surrogate-based design exploration for flexible disc couplings", "discopt"};
    app.require_subcommand(1);
    std::string config_path;
    std::map<std::string, std::string> flag_values;
    std::vector<std::string> inputs;
    std::string which;

    using Handler = int (*)(Context&);
    const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
        {"gen-data", "synthesize a dataset CSV", cmd_gen_data},
        {"fit-rsm", "fit the response-surface models to a dataset", cmd_fit_rsm},
        {"train-ann", "train a neural surrogate on a dataset", cmd_train_ann},
        {"optimize", "run NSGA-II over a surrogate", cmd_optimize},
        {"study", "network-size or training-size error study", cmd_study},
        {"report", "emit plot data from result envelopes", cmd_report},
    };
    std::map<const CLI::App*, Handler> handlers;
    for (auto const& [name, help, handler] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file");
        for (auto const& flag : kFlags) {
            sub->add_option(flag.name, flag_values[flag.key], flag.help);
        }
        if (std::string(name) == "study") {
            sub->add_option("which", which, "network_size or train_size");
        }
        if (std::string(name) == "report") {
            sub->add_option("inputs", inputs, "result envelopes");
        }
        handlers[sub] = handler;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }

    auto* sub = app.get_subcommands().front();
    try {
        std::vector<std::pair<std::string, std::string>> flags;
        for (auto const& flag : kFlags) {
            if (sub->count(flag.name) > 0) {
                flags.emplace_back(flag.key, flag_values[flag.key]);
            }
        }
        if (!which.empty()) {
            flags.emplace_back("study", which);
        }
        std::optional<Json> file_doc;
        if (config_path.empty()) {
            if (auto p = env("DISCOPT_CONFIG")) config_path = *p;
        }
        if (!config_path.empty()) {
            if (!fs::is_regular_file(config_path)) {
                throw IoError(fmt::format("config file '{}' does not exist", config_path));
            }
            file_doc = io::read_json(config_path);
            // An envelope's echoed config can be fed back directly.
            if (file_doc->contains("schema_version") && file_doc->contains("config")) {
                file_doc = io::envelope_from_json(*file_doc).config;
            }
            file_doc->erase("command");
        }
        Json doc = merge_layers(file_doc ? &*file_doc : nullptr, env, flags);
        if (!inputs.empty()) {
            doc["inputs"] = inputs;
        }
        Context ctx{sub->get_name(), doc, resolve(doc), out, env};
        return handlers.at(sub)(ctx);
    } catch (const Error& e) {
        fmt::print(err, "discopt {}: error: {}\n", sub->get_name(), e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        fmt::print(err, "discopt {}: error: {}\n", sub->get_name(), e.what());
        return static_cast<int>(ExitCode::io);
    } catch (const std::exception& e) {
        fmt::print(err, "discopt {}: error: {}\n", sub->get_name(), e.what());
        return static_cast<int>(ExitCode::failure);
    }
}

} // namespace discopt::cli
