#include "discopt/nsga2.hpp"

#include "discopt/errors.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace discopt::nsga2 {

void ProblemSpec::validate() const
{
    if (low.empty() || low.size() != high.size()) {
        throw InvalidArgument("problem bounds must be non-empty and of equal length");
    }
    for (std::size_t i = 0; i < low.size(); ++i) {
        if (!std::isfinite(low[i]) || !std::isfinite(high[i]) || !(low[i] < high[i])) {
            throw InvalidArgument(fmt::format("variable {} has invalid bounds [{}, {}]", i, low[i], high[i]));
        }
    }
    if (n_objectives < 1) {
        throw InvalidArgument("problem needs at least one objective");
    }
    if (!evaluate) {
        throw InvalidArgument("problem has no evaluator");
    }
}

void GaConfig::validate() const
{
    if (population_size < 2 || population_size % 2 != 0) {
        throw InvalidArgument(fmt::format("population size must be even and at least 2, got {}", population_size));
    }
    if (generations < 1) {
        throw InvalidArgument("generations must be at least 1");
    }
    if (!(crossover_probability >= 0.0 && crossover_probability <= 1.0)) {
        throw InvalidArgument("crossover probability must lie in [0, 1]");
    }
    if (mutation_probability > 1.0 || std::isnan(mutation_probability)) {
        throw InvalidArgument("mutation probability must lie in [0, 1]");
    }
    if (!(sbx_eta > 0.0) || !(mutation_eta > 0.0)) {
        throw InvalidArgument("distribution indices must be positive");
    }
}

double aggregate_violation(std::span<const double> constraints)
{
    double v = 0.0;
    for (double g : constraints) {
        v += std::max(0.0, g);
    }
    return v;
}

bool pareto_dominates(std::span<const double> a, std::span<const double> b)
{
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) {
            return false;
        }
        strict = strict || a[i] < b[i];
    }
    return strict;
}

bool dominates(const Individual& a, const Individual& b)
{
    bool const fa = a.feasible();
    bool const fb = b.feasible();
    if (fa != fb) {
        return fa;
    }
    if (!fa) {
        return a.violation < b.violation;
    }
    return pareto_dominates(a.objectives, b.objectives);
}

Fronts fast_nondominated_sort(std::vector<Individual>& pop)
{
    std::size_t const n = pop.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    Fronts fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(pop[p], pop[q])) {
                dominated[p].push_back(q);
                ++count[q];
            } else if (dominates(pop[q], pop[p])) {
                dominated[q].push_back(p);
                ++count[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (count[p] == 0) {
            pop[p].rank = 0;
            fronts[0].push_back(p);
        }
    }
    for (std::size_t k = 0; !fronts[k].empty(); ++k) {
        std::vector<std::size_t> next;
        for (auto p : fronts[k]) {
            for (auto q : dominated[p]) {
                if (--count[q] == 0) {
                    pop[q].rank = k + 1;
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

void crowding_distance(std::vector<Individual>& pop, std::span<const std::size_t> front)
{
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (auto i : front) {
        pop[i].crowding = 0.0;
    }
    if (front.size() <= 2) {
        for (auto i : front) {
            pop[i].crowding = inf;
        }
        return;
    }
    std::size_t const m = pop[front[0]].objectives.size();
    std::vector<std::size_t> order(front.begin(), front.end());
    for (std::size_t obj = 0; obj < m; ++obj) {
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return pop[a].objectives[obj] < pop[b].objectives[obj]; });
        double const lo = pop[order.front()].objectives[obj];
        double const hi = pop[order.back()].objectives[obj];
        pop[order.front()].crowding = inf;
        pop[order.back()].crowding = inf;
        if (!(hi > lo)) {
            continue;
        }
        for (std::size_t k = 1; k + 1 < order.size(); ++k) {
            pop[order[k]].crowding +=
                (pop[order[k + 1]].objectives[obj] - pop[order[k - 1]].objectives[obj]) / (hi - lo);
        }
    }
}

std::size_t tournament_select(std::span<const Individual> pop, Rng& rng)
{
    if (pop.size() == 1) {
        return 0;
    }
    std::size_t a = rng.below(pop.size());
    std::size_t b = rng.below(pop.size() - 1);
    if (b >= a) {
        ++b;
    }
    if (pop[a].rank != pop[b].rank) {
        return pop[a].rank < pop[b].rank ? a : b;
    }
    if (pop[a].crowding != pop[b].crowding) {
        return pop[a].crowding > pop[b].crowding ? a : b;
    }
    return rng.coin() ? a : b;
}

std::pair<double, double> sbx_pair(double p1, double p2, double eta, Rng& rng)
{
    double const u = rng.uniform();
    double const beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                                 : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
    return {0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2), 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)};
}

double polynomial_mutation(double x, double low, double high, double eta, Rng& rng)
{
    double const range = high - low;
    double const d1 = (x - low) / range;
    double const d2 = (high - x) / range;
    double const u = rng.uniform();
    double const power = 1.0 / (eta + 1.0);
    double dq;
    if (u < 0.5) {
        double const v = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
        dq = std::pow(v, power) - 1.0;
    } else {
        double const v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
        dq = 1.0 - std::pow(v, power);
    }
    return std::clamp(x + dq * range, low, high);
}

std::pair<Vector, Vector> variation(const Vector& parent1, const Vector& parent2, const ProblemSpec& problem,
                                    const GaConfig& cfg, Rng& rng)
{
    Vector c1 = parent1;
    Vector c2 = parent2;
    std::size_t const n = problem.n_vars();
    if (rng.uniform() < cfg.crossover_probability) {
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < 0.5 && std::abs(parent1[i] - parent2[i]) > 1e-14) {
                auto [a, b] = sbx_pair(parent1[i], parent2[i], cfg.sbx_eta, rng);
                if (rng.coin()) {
                    std::swap(a, b);
                }
                c1[i] = a;
                c2[i] = b;
            }
        }
    }
    double const pm = cfg.mutation_rate(n);
    for (auto* child : {&c1, &c2}) {
        for (std::size_t i = 0; i < n; ++i) {
            (*child)[i] = std::clamp((*child)[i], problem.low[i], problem.high[i]);
            if (rng.uniform() < pm) {
                (*child)[i] = polynomial_mutation((*child)[i], problem.low[i], problem.high[i], cfg.mutation_eta, rng);
            }
        }
    }
    return {std::move(c1), std::move(c2)};
}

void parallel_chunks(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn)
{
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers <= 1) {
        if (n > 0) {
            fn(0, n);
        }
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> threads;
        std::size_t const chunk = (n + workers - 1) / workers;
        for (std::size_t begin = 0; begin < n; begin += chunk) {
            std::size_t const end = std::min(n, begin + chunk);
            threads.emplace_back([&, begin, end] {
                try {
                    fn(begin, end);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

namespace {

std::vector<Individual> evaluate_all(std::vector<Vector> designs, const ProblemSpec& problem, const GaConfig& cfg)
{
    std::vector<Evaluation> evals(designs.size());
    parallel_chunks(designs.size(), cfg.workers, [&](std::size_t begin, std::size_t end) {
        problem.evaluate(std::span<const Vector>(designs).subspan(begin, end - begin),
                         std::span<Evaluation>(evals).subspan(begin, end - begin));
    });

    std::vector<Individual> out(designs.size());
    for (std::size_t i = 0; i < designs.size(); ++i) {
        auto& e = evals[i];
        bool finite = e.objectives.size() == problem.n_objectives;
        for (double v : e.objectives) {
            finite = finite && std::isfinite(v);
        }
        for (double v : e.constraints) {
            finite = finite && std::isfinite(v);
        }
        if (!finite) {
            throw NumericalError(fmt::format("evaluator returned a non-finite or mis-sized result at x = [{}]",
                                             fmt::join(designs[i], ", ")));
        }
        out[i].violation = aggregate_violation(e.constraints);
        out[i].objectives = std::move(e.objectives);
        out[i].x = std::move(designs[i]);
    }
    return out;
}

GenerationSummary summarize(std::size_t gen, const std::vector<Individual>& pop, std::size_t n_objectives)
{
    GenerationSummary s;
    s.generation = gen;
    s.best_feasible.assign(n_objectives, std::numeric_limits<double>::infinity());
    for (auto const& ind : pop) {
        if (ind.feasible()) {
            ++s.feasible_count;
            for (std::size_t k = 0; k < n_objectives; ++k) {
                s.best_feasible[k] = std::min(s.best_feasible[k], ind.objectives[k]);
            }
        }
        if (ind.rank == 0) {
            ++s.front_size;
        }
    }
    return s;
}

// Sorts the merged population and keeps the best n by (rank, crowding).
std::vector<Individual> survive(std::vector<Individual> merged, std::size_t n)
{
    auto fronts = fast_nondominated_sort(merged);
    std::vector<Individual> next;
    next.reserve(n);
    for (auto& front : fronts) {
        crowding_distance(merged, front);
        if (next.size() + front.size() <= n) {
            for (auto i : front) {
                next.push_back(std::move(merged[i]));
            }
            if (next.size() == n) {
                break;
            }
            continue;
        }
        std::stable_sort(front.begin(), front.end(),
                         [&](auto a, auto b) { return merged[a].crowding > merged[b].crowding; });
        for (std::size_t k = 0; next.size() < n; ++k) {
            next.push_back(std::move(merged[front[k]]));
        }
        break;
    }
    return next;
}

} // namespace

GaResult optimize(const ProblemSpec& problem, const GaConfig& cfg)
{
    problem.validate();
    cfg.validate();
    Rng rng(cfg.seed);
    std::size_t const n = cfg.population_size;
    std::size_t const nv = problem.n_vars();

    std::vector<Vector> initial(n, Vector(nv));
    for (auto& x : initial) {
        for (std::size_t i = 0; i < nv; ++i) {
            x[i] = rng.uniform(problem.low[i], problem.high[i]);
        }
    }

    GaResult result;
    auto pop = survive(evaluate_all(std::move(initial), problem, cfg), n);
    result.evaluations = n;
    result.history.push_back(summarize(0, pop, problem.n_objectives));

    for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
        std::vector<Vector> children;
        children.reserve(n);
        while (children.size() < n) {
            auto const& p1 = pop[tournament_select(pop, rng)];
            auto const& p2 = pop[tournament_select(pop, rng)];
            auto [c1, c2] = variation(p1.x, p2.x, problem, cfg, rng);
            children.push_back(std::move(c1));
            children.push_back(std::move(c2));
        }
        auto offspring = evaluate_all(std::move(children), problem, cfg);
        result.evaluations += n;
        std::move(offspring.begin(), offspring.end(), std::back_inserter(pop));
        pop = survive(std::move(pop), n);
        result.history.push_back(summarize(gen, pop, problem.n_objectives));
    }

    for (auto const& ind : pop) {
        if (ind.rank == 0 && ind.feasible()) {
            result.front.push_back(ind);
        }
    }
    result.feasible_front_empty = result.front.empty();
    result.population = std::move(pop);
    return result;
}

} // namespace discopt::nsga2
