#pragma once

#include "discopt/random.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace discopt::nsga2 {

using Vector = std::vector<double>;

/// Objective values (minimized) and constraint values (g <= 0 is feasible) of one design.
struct Evaluation {
    Vector objectives;
    Vector constraints;
};

/// Evaluates a batch of designs into the matching slots of out. Must be safe
/// to call concurrently on disjoint batches.
using BatchEvaluator = std::function<void(std::span<const Vector> designs, std::span<Evaluation> out)>;

struct ProblemSpec {
    Vector low;
    Vector high;
    std::size_t n_objectives{2};
    BatchEvaluator evaluate;

    std::size_t n_vars() const { return low.size(); }
    void validate() const;
};

struct Individual {
    Vector x;
    Vector objectives;
    double violation{0.0};  // sum of max(0, g_i)
    std::size_t rank{0};
    double crowding{0.0};

    bool feasible() const { return violation <= 0.0; }
};

struct GaConfig {
    std::size_t population_size{500};
    std::size_t generations{300};
    double crossover_probability{0.9};
    double mutation_probability{-1.0};  // per variable; negative means 1 / n_vars
    double sbx_eta{20.0};
    double mutation_eta{20.0};
    std::uint64_t seed{1};
    std::size_t workers{1};

    void validate() const;
    double mutation_rate(std::size_t n_vars) const { return mutation_probability < 0.0 ? 1.0 / static_cast<double>(n_vars) : mutation_probability; }
};

double aggregate_violation(std::span<const double> constraints);

/// Constrained dominance: feasible beats infeasible, lower violation wins
/// between infeasible designs, Pareto dominance between feasible ones.
bool dominates(const Individual& a, const Individual& b);

/// Plain Pareto dominance on minimized objective vectors.
bool pareto_dominates(std::span<const double> a, std::span<const double> b);

using Fronts = std::vector<std::vector<std::size_t>>;

/// Deb's fast non-dominated sort; writes ranks into pop.
Fronts fast_nondominated_sort(std::vector<Individual>& pop);

/// Assigns crowding distances to the members of one front.
void crowding_distance(std::vector<Individual>& pop, std::span<const std::size_t> front);

/// Binary tournament on (rank, crowding); full ties are decided by a coin flip.
std::size_t tournament_select(std::span<const Individual> pop, Rng& rng);

/// Simulated binary crossover of one variable pair without bound handling.
std::pair<double, double> sbx_pair(double p1, double p2, double eta, Rng& rng);

/// Polynomial mutation of one variable within [low, high].
double polynomial_mutation(double x, double low, double high, double eta, Rng& rng);

/// SBX then polynomial mutation, children clipped to the bounds.
std::pair<Vector, Vector> variation(const Vector& parent1, const Vector& parent2, const ProblemSpec& problem,
                                    const GaConfig& cfg, Rng& rng);

struct GenerationSummary {
    std::size_t generation{};
    Vector best_feasible;  // per objective; +inf when no feasible member
    std::size_t feasible_count{};
    std::size_t front_size{};
};

struct GaResult {
    std::vector<Individual> population;
    std::vector<Individual> front;  // feasible members of the first front
    bool feasible_front_empty{true};
    std::vector<GenerationSummary> history;
    std::size_t evaluations{};
};

/// Elitist (mu + lambda) NSGA-II. Throws NumericalError when the evaluator
/// returns a non-finite value.
GaResult optimize(const ProblemSpec& problem, const GaConfig& cfg);

/// Runs fn(begin, end) on contiguous chunks of [0, n) across up to workers threads.
void parallel_chunks(std::size_t n, std::size_t workers, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace discopt::nsga2
