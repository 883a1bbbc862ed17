// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "discopt/ann.hpp"
#include "discopt/cli.hpp"
#include "discopt/disc_analytics.hpp"
#include "discopt/explorer.hpp"
#include "discopt/nsga2.hpp"
#include "discopt/random.hpp"
#include "discopt/rsm.hpp"
#include "discopt/serialize.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace discopt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass{true};
    std::vector<std::string> notes;

    void check(bool ok, std::string what)
    {
        if (!ok) pass = false;
        notes.push_back(fmt::format("  [{}] {}", ok ? "ok" : "FAIL", what));
    }
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double seconds)
{
    for (auto const& n : o.notes) std::cout << n << '\n';
    std::cout << fmt::format("{} criterion {}: {} ({:.1f} s)\n\n", o.pass ? "PASS" : "FAIL", id, title, seconds)
              << std::flush;
    if (!o.pass) ++failures;
}

template <typename F>
void criterion(int id, const std::string& title, F&& body)
{
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        body(o);
    } catch (const std::exception& e) {
        o.check(false, fmt::format("exception: {}", e.what()));
    }
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    report(id, title, o, dt.count());
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Drives the command line exactly as a user would, with a pinned timestamp.
int cli_run(std::vector<std::string> args, std::string* captured = nullptr)
{
    std::ostringstream out, err;
    auto env = [](const std::string& k) -> std::optional<std::string> {
        if (k == "SOURCE_DATE_EPOCH") return "0";
        return std::nullopt;
    };
    int code = cli::run(args, out, err, env);
    if (captured) *captured = out.str();
    if (code != 0) std::cout << "  command failed (" << code << "): " << err.str();
    return code;
}

std::size_t hw_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

explorer::DesignProblem rsm_problem(DesignTag d)
{
    return {d, explorer::Surrogate(rsm::published_models(d)), explorer::kDefaultBucklingThresholdN,
            Bounds::disc_default()};
}

// ---- shared state between criteria ----

fs::path workdir;
std::map<DesignTag, explorer::ExplorationResult> ga_results;
std::map<DesignTag, std::vector<explorer::FrontPoint>> oracle_fronts;

// Reruns use identical arguments, so earlier outputs are moved aside first.
fs::path optimize_dir(DesignTag d) { return workdir / fmt::format("opt_{}", to_string(d)); }
fs::path first_run(const fs::path& p) { return p.string() + ".first"; }

bool run_optimize(DesignTag d)
{
    return cli_run({"optimize", "--design", std::string(to_string(d)), "--source", "rsm", "--seed", "1", "--pop",
                    "500", "--gens", "300", "--out", optimize_dir(d).string()}) == 0;
}

fs::path ann_data_path() { return workdir / "design_A_noise1.csv"; }

fs::path ann_cell_path() { return workdir / "ann_cell.json"; }

bool run_ann_cell()
{
    auto cfg = workdir / "ann_cell_config.json";
    std::ofstream(cfg) << R"({"hidden": [20, 20], "study_sizes": [100], "trials": 10, "seed": 1})";
    return cli_run({"study", "train_size", "--config", cfg.string(), "--data", ann_data_path().string(), "--out",
                    ann_cell_path().string()}) == 0;
}

// ---- criteria ----

void c1_rsm_evaluation(Outcome& o)
{
    DesignPoint const x{32, 6, 0.6};
    auto a = rsm::published_models(DesignTag::A);
    auto b = rsm::published_models(DesignTag::B);
    struct Row {
        const char* name;
        double got;
        double want;
    };
    Row rows[] = {
        {"A mass", a.mass.evaluate(x), 0.00199 * 32 * 6 * 0.6 - 0.00371 * 6 * 0.6 + 0.00369},
        {"A stress", a.stress.evaluate(x), 263.3 + 1065.3 * 0.36 - 0.47 * 32 * 6 - 25.1 * 32 * 0.36},
        {"A buckling", a.buckling.evaluate(x), -0.995 * 1024 * 6 * 0.216 + 2075.19 * 6 * 0.216},
        {"B mass", b.mass.evaluate(x), 0.00153 * 32 * 6 * 0.6 + 0.01613 * 32 * 0.6 - 0.262 * 0.6 + 0.00044},
        {"B stress", b.stress.evaluate(x), 292.9 + 769.3 * 0.36 - 5.17 * 32 - 17.52 * 32 * 0.36},
        {"B buckling", b.buckling.evaluate(x), -1.47792 * 1024 * 6 * 0.216 + 3078.22 * 6 * 0.216},
    };
    for (auto const& r : rows) {
        o.check(rel_err(r.got, r.want) <= 1e-9, fmt::format("{} at (32, 6, 0.6) = {:.9g}, expected {:.9g}", r.name,
                                                            r.got, r.want));
    }
    o.check(rel_err(a.mass.evaluate(x), 0.219582) <= 1e-9, "A mass equals 0.219582 g");
    o.check(rel_err(a.stress.evaluate(x), 267.416) <= 1e-9, "A stress equals 267.416 MPa");
    o.check(std::abs(a.buckling.evaluate(x) - 1368.98) < 0.005, "A buckling rounds to 1368.98 N");
}

void c2_rsm_recovery(Outcome& o)
{
    for (auto d : {DesignTag::A, DesignTag::B}) {
        auto published = rsm::published_models(d);
        auto clean = explorer::synthesize_dataset(d, d == DesignTag::A ? 127 : 128, SamplingScheme::latin_hypercube,
                                                  11, 0.0);
        auto fitted = rsm::fit_published_bases(clean);
        for (auto r : kAllResponses) {
            auto const& want = published[r];
            auto const& got = fitted[r];
            double worst = 0;
            for (std::size_t i = 0; i < want.coefficients.size(); ++i) {
                worst = std::max(worst, rel_err(got.coefficients[i], want.coefficients[i]));
            }
            double r2 = rsm::r_squared(got, clean);
            o.check(worst <= 1e-8 && r2 >= 1 - 1e-12,
                    fmt::format("{} {} noise-free: max coefficient error {:.2e}, R^2 = {:.15f}", to_string(d),
                                to_string(r), worst, r2));
        }
        auto noisy = explorer::synthesize_dataset(d, d == DesignTag::A ? 127 : 128, SamplingScheme::latin_hypercube,
                                                  12, 0.01);
        auto noisy_fit = rsm::fit_published_bases(noisy);
        for (auto r : kAllResponses) {
            double r2 = rsm::r_squared(noisy_fit[r], noisy);
            o.check(r2 >= 0.93, fmt::format("{} {} with 1% noise: R^2 = {:.4f}", to_string(d), to_string(r), r2));
        }
    }
}

void c3_ga_vs_oracle(Outcome& o)
{
    for (auto d : {DesignTag::A, DesignTag::B}) {
        if (!run_optimize(d)) {
            o.check(false, fmt::format("optimize for design {}", to_string(d)));
            continue;
        }
        auto env = io::read_envelope(optimize_dir(d) / "exploration.json");
        auto ga = io::exploration_from_json(env.payload);
        ga_results.emplace(d, ga);

        auto problem = rsm_problem(d);
        auto oracle = explorer::grid_pareto_oracle(problem, 101, hw_workers());
        oracle_fronts[d] = oracle;
        if (ga.empty() || oracle.empty()) {
            o.check(false, fmt::format("{}: non-empty fronts (GA {}, oracle {})", to_string(d), ga.front.size(),
                                       oracle.size()));
            continue;
        }
        double om = std::numeric_limits<double>::infinity(), os = om;
        for (auto const& p : oracle) {
            om = std::min(om, p.objectives[0]);
            os = std::min(os, p.objectives[1]);
        }
        double gm = ga.front[*ga.min_mass].objectives[0];
        double gs = ga.front[*ga.min_stress].objectives[1];
        o.check(rel_err(gm, om) <= 0.02,
                fmt::format("{} min mass: GA {:.6f} g, oracle {:.6f} g ({:+.3f}%)", to_string(d), gm, om,
                            100 * (gm - om) / om));
        o.check(rel_err(gs, os) <= 0.02,
                fmt::format("{} min stress: GA {:.4f} MPa, oracle {:.4f} MPa ({:+.3f}%)", to_string(d), gs, os,
                            100 * (gs - os) / os));

        // Any lattice point dominating by a margin is itself weakly dominated
        // by an oracle front point, so the front suffices.
        std::size_t bad = 0, infeasible = 0;
        for (auto const& fp : ga.front) {
            if (fp.responses.buckling_n < explorer::kDefaultBucklingThresholdN) ++infeasible;
            for (auto const& q : oracle) {
                if (q.objectives[0] < 0.99 * fp.objectives[0] && q.objectives[1] < 0.99 * fp.objectives[1]) {
                    ++bad;
                    break;
                }
            }
        }
        o.check(bad == 0, fmt::format("{}: {} of {} GA front points dominated by a lattice point by more than 1%",
                                      to_string(d), bad, ga.front.size()));
        o.check(infeasible == 0, fmt::format("{}: {} infeasible GA front points", to_string(d), infeasible));
    }
}

struct TableRow {
    const char* name;
    double l, b, t, mass, stress;
};

void c4_tables(Outcome& o)
{
    if (ga_results.size() != 2) {
        o.check(false, "criterion 3 fronts available");
        return;
    }
    auto const& a = ga_results.at(DesignTag::A);
    auto const& b = ga_results.at(DesignTag::B);
    double const thr = explorer::kDefaultBucklingThresholdN;

    std::cout << "  discrepancy report (GA result vs published RSM rows):\n";
    std::cout << fmt::format("    {:<18}{:>9}{:>8}{:>9}{:>10}{:>10}{:>11}\n", "point", "l", "b", "t", "mass",
                             "stress", "buckling");
    auto print = [](const std::string& label, const explorer::FrontPoint& p) {
        std::cout << fmt::format("    {:<18}{:>9.3f}{:>8.3f}{:>9.4f}{:>10.4f}{:>10.2f}{:>11.2f}\n", label,
                                 p.x.length_mm, p.x.width_mm, p.x.thickness_mm, p.responses.mass_g,
                                 p.responses.stress_mpa, p.responses.buckling_n);
    };
    auto print_table = [](const std::string& label, const TableRow& r) {
        std::cout << fmt::format("    {:<18}{:>9.2f}{:>8.2f}{:>9.2f}{:>10.2f}{:>10.2f}{:>11}\n", label, r.l, r.b,
                                 r.t, r.mass, r.stress, "-");
    };
    TableRow const a_mass{"A min mass", 24.00, 3.00, 0.30, 0.05, 264.30};
    TableRow const a_stress{"A min stress", 38.99, 9.00, 0.31, 0.21, 106.72};
    TableRow const a_opt{"A optimum", 34.25, 6.12, 0.30, 0.12, 183.32};
    TableRow const b_mass{"B min mass", 28.66, 3.00, 0.30, 0.10, 168.83};
    TableRow const b_stress{"B min stress", 40.00, 7.75, 0.30, 0.26, 92.39};
    TableRow const b_opt{"B optimum", 35.34, 4.51, 0.30, 0.17, 125.21};
    auto const& am = a.front[*a.min_mass];
    auto const& as = a.front[*a.min_stress];
    auto const& ao = a.front[*a.optimum];
    auto const& bm = b.front[*b.min_mass];
    auto const& bs = b.front[*b.min_stress];
    auto const& bo = b.front[*b.optimum];
    for (auto [row, p] : {std::pair{a_mass, &am}, {a_stress, &as}, {a_opt, &ao}, {b_mass, &bm}, {b_stress, &bs},
                          {b_opt, &bo}}) {
        print(fmt::format("{} (GA)", row.name), *p);
        print_table(fmt::format("{} (table)", row.name), row);
    }
    std::cout << '\n';

    auto pct = [](double got, double want) { return 100 * (got - want) / want; };

    // Design A minimal mass
    o.check(std::abs(am.x.length_mm - 24) <= 1, fmt::format("A min mass: l = {:.3f}, within 1 mm of 24", am.x.length_mm));
    o.check(std::abs(am.x.width_mm - 3) <= 0.5, fmt::format("A min mass: b = {:.3f}, within 0.5 mm of 3", am.x.width_mm));
    o.check(std::abs(am.responses.buckling_n - thr) <= 0.01 * thr,
            fmt::format("A min mass: buckling {:.2f} N, constraint active (within 1% of {} N)", am.responses.buckling_n,
                        thr));
    o.check(rel_err(am.responses.mass_g, a_mass.mass) <= 0.2,
            fmt::format("A min mass: mass {:.4f} g vs {:.2f} g ({:+.1f}%, tolerance 20%)", am.responses.mass_g,
                        a_mass.mass, pct(am.responses.mass_g, a_mass.mass)));
    o.check(rel_err(am.responses.stress_mpa, a_mass.stress) <= 0.2,
            fmt::format("A min mass: stress {:.2f} MPa vs {:.2f} MPa ({:+.1f}%, tolerance 20%)", am.responses.stress_mpa,
                        a_mass.stress, pct(am.responses.stress_mpa, a_mass.stress)));

    // Design A minimal stress
    o.check(rel_err(as.x.length_mm, 39) <= 0.05, fmt::format("A min stress: l = {:.3f} vs 39 ({:+.2f}%, tolerance 5%)",
                                                             as.x.length_mm, pct(as.x.length_mm, 39)));
    o.check(rel_err(as.x.width_mm, 9) <= 0.05, fmt::format("A min stress: b = {:.3f} vs 9 ({:+.2f}%, tolerance 5%)",
                                                           as.x.width_mm, pct(as.x.width_mm, 9)));
    o.check(rel_err(as.x.thickness_mm, 0.31) <= 0.05,
            fmt::format("A min stress: t = {:.4f} vs 0.31 ({:+.2f}%, tolerance 5%)", as.x.thickness_mm,
                        pct(as.x.thickness_mm, 0.31)));
    o.check(rel_err(as.responses.stress_mpa, 106.7) <= 0.05,
            fmt::format("A min stress: stress {:.2f} MPa vs 106.7 ({:+.2f}%, tolerance 5%)", as.responses.stress_mpa,
                        pct(as.responses.stress_mpa, 106.7)));
    o.check(rel_err(as.responses.mass_g, a_stress.mass) <= 0.2,
            fmt::format("A min stress: mass {:.4f} g vs {:.2f} g ({:+.1f}%, tolerance 20%)", as.responses.mass_g,
                        a_stress.mass, pct(as.responses.mass_g, a_stress.mass)));

    // Design B minimal mass
    o.check(std::abs(bm.x.length_mm - 28.7) <= 1,
            fmt::format("B min mass: l = {:.3f}, within 1 mm of 28.7", bm.x.length_mm));
    o.check(std::abs(bm.x.width_mm - 3) <= 0.5, fmt::format("B min mass: b = {:.3f}, within 0.5 mm of 3", bm.x.width_mm));
    o.check(std::abs(bm.responses.buckling_n - thr) <= 0.01 * thr,
            fmt::format("B min mass: buckling {:.2f} N, constraint active (within 1% of {} N)", bm.responses.buckling_n,
                        thr));
    o.check(rel_err(bm.responses.mass_g, 0.10) <= 0.2,
            fmt::format("B min mass: mass {:.4f} g vs 0.10 g ({:+.1f}%, tolerance 20%)", bm.responses.mass_g,
                        pct(bm.responses.mass_g, 0.10)));
    o.check(rel_err(bm.responses.stress_mpa, b_mass.stress) <= 0.2,
            fmt::format("B min mass: stress {:.2f} MPa vs {:.2f} MPa ({:+.1f}%, tolerance 20%)", bm.responses.stress_mpa,
                        b_mass.stress, pct(bm.responses.stress_mpa, b_mass.stress)));

    // Design B minimal stress
    o.check(rel_err(bs.x.length_mm, 40) <= 0.05,
            fmt::format("B min stress: l = {:.3f} vs 40 ({:+.2f}%, tolerance 5%)", bs.x.length_mm,
                        pct(bs.x.length_mm, 40)));
    o.check(rel_err(bs.responses.stress_mpa, 92.4) <= 0.05,
            fmt::format("B min stress: stress {:.2f} MPa vs 92.4 ({:+.2f}%, tolerance 5%)", bs.responses.stress_mpa,
                        pct(bs.responses.stress_mpa, 92.4)));
    o.check(rel_err(bs.responses.mass_g, b_stress.mass) <= 0.2,
            fmt::format("B min stress: mass {:.4f} g vs {:.2f} g ({:+.1f}%, tolerance 20%)", bs.responses.mass_g,
                        b_stress.mass, pct(bs.responses.mass_g, b_stress.mass)));

    // The published minimal-mass row violates the constraint under the rounded coefficients.
    double table_buckling = rsm::published_models(DesignTag::A).buckling.evaluate({24, 3, 0.30});
    std::cout << fmt::format("  note: published A minimal-mass design (24, 3, 0.30) evaluates to {:.1f} N buckling\n",
                             table_buckling);
}

void c5_ann(Outcome& o)
{
    auto data = explorer::synthesize_dataset(DesignTag::A, 127, SamplingScheme::latin_hypercube, 5, 0.01);
    write_csv(data, ann_data_path());
    if (!run_ann_cell()) {
        o.check(false, "study command");
        return;
    }
    auto report = io::study_from_json(io::read_envelope(ann_cell_path()).payload);
    if (report.cells.size() != 1 || !report.cells[0].test) {
        o.check(false, "one cell with test errors");
        return;
    }
    auto const& cell = report.cells[0];
    o.check(cell.test_errors.size() == 10 && cell.divergences == 0,
            fmt::format("{} successful trials of 10, {} diverged", cell.test_errors.size(), cell.divergences));
    std::string per_trial;
    for (double e : cell.test_errors) per_trial += fmt::format(" {:.2f}", e);
    o.notes.push_back("  per-trial test error (%):" + per_trial);
    o.check(cell.test->mean <= 5.0, fmt::format("mean test error {:.3f}% <= 5%", cell.test->mean));
    o.check(cell.test->std && *cell.test->std <= 2.0,
            fmt::format("test error std {:.3f}% <= 2%", cell.test->std.value_or(-1)));
}

void c6_trends(Outcome& o)
{
    auto cfg = workdir / "trend.json";
    std::ofstream(cfg) << R"({"study_layers": [1, 2], "study_neurons": [10, 20], "n_train": 100,
                             "study_sizes": [40, 60, 80, 100, 120], "hidden": [20, 20], "trials": 10, "seed": 1})";
    std::string net_out, size_out;
    bool ok = cli_run({"study", "network_size", "--config", cfg.string(), "--data", ann_data_path().string(), "--out",
                       (workdir / "trend_net.json").string()},
                      &net_out) == 0 &&
              cli_run({"study", "train_size", "--config", cfg.string(), "--data", ann_data_path().string(), "--out",
                       (workdir / "trend_size.json").string()},
                      &size_out) == 0;
    if (!ok) {
        o.check(false, "study commands");
        return;
    }
    std::cout << net_out << size_out;
    auto net = io::study_from_json(io::read_envelope(workdir / "trend_net.json").payload);
    auto size = io::study_from_json(io::read_envelope(workdir / "trend_size.json").payload);

    auto find = [&](std::size_t layers, std::size_t neurons) -> const explorer::StudyCell& {
        for (auto const& c : net.cells) {
            if (c.hidden_layers == std::vector<std::size_t>(layers, neurons)) return c;
        }
        throw std::runtime_error(fmt::format("missing cell {}x{}", layers, neurons));
    };
    for (std::size_t layers : {1u, 2u}) {
        auto const& c10 = find(layers, 10);
        auto const& c20 = find(layers, 20);
        o.check(c20.test->mean <= c10.test->mean,
                fmt::format("{} layer(s): test error at 20 neurons {:.3f}% <= at 10 neurons {:.3f}%", layers,
                            c20.test->mean, c10.test->mean));
    }

    std::size_t violations = 0;
    bool within_std = true;
    for (std::size_t i = 1; i < size.cells.size(); ++i) {
        auto const& prev = size.cells[i - 1];
        auto const& cur = size.cells[i];
        if (cur.test->mean < prev.test->mean) continue;
        ++violations;
        double spread = std::max(prev.test->std.value_or(0), cur.test->std.value_or(0));
        if (cur.test->mean - prev.test->mean > spread) within_std = false;
        o.notes.push_back(fmt::format("  increase from {} to {} samples: {:.3f}% -> {:.3f}% (std {:.3f})",
                                      prev.n_train, cur.n_train, prev.test->mean, cur.test->mean, spread));
    }
    std::string series;
    for (auto const& c : size.cells) series += fmt::format(" {}:{:.3f}", c.n_train, c.test->mean);
    o.check(size.cells.size() == 5 && (violations == 0 || (violations == 1 && within_std)),
            fmt::format("test error decreases over training sizes ({} adjacent violations):{}", violations, series));

    std::size_t checked = 0, bad = 0;
    for (auto const* r : {&net, &size}) {
        for (auto const& c : r->cells) {
            ++checked;
            if (!(c.all->mean <= c.test->mean)) {
                ++bad;
                o.notes.push_back(fmt::format("  cell {}: all {:.3f}% > test {:.3f}%", c.key(), c.all->mean,
                                              c.test->mean));
            }
        }
    }
    o.check(bad == 0, fmt::format("all-data error <= test error in {} of {} cells", checked - bad, checked));
}

double fd_data_error(const ann::NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    return (ann::forward_batch(p, x) - y).squaredNorm();
}

void c7_kernels(Outcome& o)
{
    Rng rng(7);
    auto random_matrix = [&](Eigen::Index r, Eigen::Index c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.5, 1.5);
        return m;
    };
    double worst = 0;
    for (int inst = 0; inst < 100; ++inst) {
        std::vector<std::size_t> hidden;
        for (std::size_t k = 0, n = 1 + rng.below(2); k < n; ++k) hidden.push_back(1 + rng.below(8));
        ann::NetworkShape shape{1 + rng.below(3), hidden, 1 + rng.below(3)};
        auto p = ann::NetworkParams::random(shape, rng);
        auto rows = static_cast<Eigen::Index>(1 + rng.below(16));
        Eigen::MatrixXd x = random_matrix(rows, static_cast<Eigen::Index>(shape.n_inputs));
        Eigen::MatrixXd y = random_matrix(rows, static_cast<Eigen::Index>(shape.n_outputs));
        Eigen::VectorXd g = ann::gradient(p, x, y);
        Eigen::VectorXd fd(g.size());
        double const h = 1e-6;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            auto plus = p, minus = p;
            plus.values()(i) += h;
            minus.values()(i) -= h;
            fd(i) = (fd_data_error(plus, x, y) - fd_data_error(minus, x, y)) / (2 * h);
        }
        worst = std::max(worst, (g - fd).cwiseAbs().maxCoeff() / std::max(fd.cwiseAbs().maxCoeff(), 1e-12));
    }
    o.check(worst < 1e-6, fmt::format("gradient vs central differences, 100 instances: max relative error {:.2e}", worst));

    auto make = [](nsga2::Vector obj, double violation) {
        nsga2::Individual i;
        i.objectives = std::move(obj);
        i.violation = violation;
        return i;
    };
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.below(64), m = 2 + rng.below(2);
        std::vector<nsga2::Individual> pop;
        for (std::size_t i = 0; i < n; ++i) {
            nsga2::Vector obj(m);
            for (auto& v : obj) v = double(rng.below(6));
            pop.push_back(make(obj, rng.below(4) == 0 ? double(1 + rng.below(3)) : 0.0));
        }
        // O(n^2) layer peeling
        std::vector<std::set<std::size_t>> expected;
        std::set<std::size_t> left;
        for (std::size_t i = 0; i < n; ++i) left.insert(i);
        while (!left.empty()) {
            std::set<std::size_t> layer;
            for (auto i : left) {
                bool dominated = std::any_of(left.begin(), left.end(),
                                             [&](std::size_t j) { return j != i && nsga2::dominates(pop[j], pop[i]); });
                if (!dominated) layer.insert(i);
            }
            for (auto i : layer) left.erase(i);
            expected.push_back(layer);
        }
        auto fronts = nsga2::fast_nondominated_sort(pop);
        bool same = fronts.size() == expected.size();
        for (std::size_t k = 0; same && k < fronts.size(); ++k) {
            same = std::set<std::size_t>(fronts[k].begin(), fronts[k].end()) == expected[k];
        }
        if (!same) ++mismatches;
    }
    o.check(mismatches == 0, fmt::format("fast sort vs brute force: {} of 200 populations differ", mismatches));

    double const inf = std::numeric_limits<double>::infinity();
    std::vector<nsga2::Individual> three{make({1, 3}, 0), make({2, 2}, 0), make({3, 1}, 0)};
    std::vector<std::size_t> idx3{0, 1, 2};
    nsga2::crowding_distance(three, idx3);
    o.check(three[0].crowding == inf && three[2].crowding == inf && three[1].crowding == 2.0,
            fmt::format("crowding {{(1,3),(2,2),(3,1)}}: boundaries inf, middle {}", three[1].crowding));
    std::vector<nsga2::Individual> dup{make({1, 3}, 0), make({2, 2}, 0), make({2, 2}, 0), make({2, 2}, 0),
                                       make({3, 1}, 0)};
    std::vector<std::size_t> idx5{0, 1, 2, 3, 4};
    nsga2::crowding_distance(dup, idx5);
    o.check(dup[2].crowding == 0.0, fmt::format("crowding of an interior duplicate: {}", dup[2].crowding));
}

void c8_analytics(Outcome& o)
{
    disc::DiscGeometry geom{80.0, 3};
    double torque = disc::torque_capacity(150.0, geom);
    o.check(std::abs(torque - 31.18) <= 0.01, fmt::format("torque_capacity(150 N, d = 80 mm) = {:.4f} N*m", torque));
    o.check(disc::pitch_circle_diameter_mm(40.0) == 80.0, "d = 2 l at l = 40 mm");
    double back = disc::min_buckling_for_torque(torque, geom);
    o.check(rel_err(back, 150.0) <= 1e-9, fmt::format("inverse round trip: {:.12f} N", back));
    double worst = 0;
    Rng rng(8);
    for (int i = 0; i < 1000; ++i) {
        disc::DiscGeometry g{rng.uniform(10, 200), 3};
        double f = rng.uniform(1, 5000);
        worst = std::max(worst, rel_err(disc::min_buckling_for_torque(disc::torque_capacity(f, g), g), f));
    }
    o.check(worst <= 1e-9, fmt::format("round trip over 1000 random cases: max relative error {:.2e}", worst));
}

void c9_determinism(Outcome& o)
{
    for (auto d : {DesignTag::A, DesignTag::B}) {
        fs::rename(optimize_dir(d), first_run(optimize_dir(d)));
        if (!run_optimize(d)) {
            o.check(false, fmt::format("optimize rerun for design {}", to_string(d)));
            continue;
        }
        for (auto name : {"exploration.json", "front.csv", "generations.csv"}) {
            auto first = slurp(first_run(optimize_dir(d)) / name);
            auto second = slurp(optimize_dir(d) / name);
            o.check(!first.empty() && first == second,
                    fmt::format("{} optimize {} identical across runs ({} bytes)", to_string(d), name, first.size()));
        }
    }
    fs::rename(ann_cell_path(), first_run(ann_cell_path()));
    if (!run_ann_cell()) {
        o.check(false, "study rerun");
        return;
    }
    auto first = slurp(first_run(ann_cell_path()));
    auto second = slurp(ann_cell_path());
    o.check(!first.empty() && first == second,
            fmt::format("ANN study envelope identical across runs ({} bytes)", first.size()));
}

} // namespace

int main(int argc, char** argv)
{
    bool keep = argc > 1 && std::string(argv[1]) == "--keep";
    workdir = fs::temp_directory_path() / fmt::format("discopt_acceptance_{}", ::getpid());
    fs::create_directories(workdir);
    std::cout << "work directory: " << workdir.string() << "\n\n";

    criterion(1, "RSM evaluation fidelity", c1_rsm_evaluation);
    criterion(2, "exact coefficient recovery and noisy R^2", c2_rsm_recovery);
    criterion(3, "GA front vs 101^3 grid oracle", c3_ga_vs_oracle);
    criterion(4, "optimization tables, qualitative reproduction", c4_tables);
    criterion(5, "ANN pipeline, 2x20 on 100 samples over 10 trials", c5_ann);
    criterion(6, "study trends", c6_trends);
    criterion(7, "numerical kernels", c7_kernels);
    criterion(8, "disc analytics", c8_analytics);
    criterion(9, "determinism of criteria 3 and 5", c9_determinism);

    if (!keep) fs::remove_all(workdir);
    std::cout << fmt::format("{} of 9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
