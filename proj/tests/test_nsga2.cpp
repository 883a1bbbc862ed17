#include "discopt/errors.hpp"
#include "discopt/nsga2.hpp"
#include "discopt/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>

using namespace discopt;
using namespace discopt::nsga2;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

Individual ind(Vector obj, double violation = 0.0)
{
    Individual i;
    i.objectives = std::move(obj);
    i.violation = violation;
    return i;
}

// Peel off non-dominated layers by exhaustive pairwise comparison.
std::vector<std::set<std::size_t>> brute_force_fronts(const std::vector<Individual>& pop)
{
    std::vector<std::set<std::size_t>> fronts;
    std::set<std::size_t> left;
    for (std::size_t i = 0; i < pop.size(); ++i) left.insert(i);
    while (!left.empty()) {
        std::set<std::size_t> layer;
        for (auto i : left) {
            bool dominated = false;
            for (auto j : left) {
                if (j != i && dominates(pop[j], pop[i])) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) layer.insert(i);
        }
        for (auto i : layer) left.erase(i);
        fronts.push_back(layer);
    }
    return fronts;
}

ProblemSpec one_var(std::function<Vector(double)> f, double lo, double hi, std::function<double(double)> g = nullptr)
{
    ProblemSpec p;
    p.low = {lo};
    p.high = {hi};
    p.n_objectives = f(lo).size();
    p.evaluate = [f, g](std::span<const Vector> xs, std::span<Evaluation> out) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out[i].objectives = f(xs[i][0]);
            out[i].constraints = g ? Vector{g(xs[i][0])} : Vector{};
        }
    };
    return p;
}

ProblemSpec two_parabolas()
{
    return one_var([](double x) { return Vector{x * x, (x - 2) * (x - 2)}; }, -5, 5);
}

GaConfig small_config(std::size_t pop, std::size_t gens, std::uint64_t seed = 1)
{
    GaConfig c;
    c.population_size = pop;
    c.generations = gens;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("constrained dominance examples")
{
    CHECK(dominates(ind({1, 2}), ind({2, 2})));
    CHECK_FALSE(dominates(ind({1, 3}), ind({3, 1})));
    CHECK_FALSE(dominates(ind({3, 1}), ind({1, 3})));
    CHECK(dominates(ind({5, 5}), ind({0, 0}, 1.0)));
    CHECK_FALSE(dominates(ind({0, 0}, 1.0), ind({5, 5})));
    CHECK(dominates(ind({9, 9}, 0.5), ind({0, 0}, 1.0)));
    CHECK_FALSE(dominates(ind({1, 1}), ind({1, 1})));
    Vector c{-1.0, 2.0, 0.5};
    CHECK(aggregate_violation(c) == 2.5);
}

TEST_CASE("dominance is irreflexive and asymmetric")
{
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        auto a = ind({double(rng.below(4)), double(rng.below(4))}, rng.coin() ? 0.0 : double(rng.below(3)));
        auto b = ind({double(rng.below(4)), double(rng.below(4))}, rng.coin() ? 0.0 : double(rng.below(3)));
        CHECK_FALSE(dominates(a, a));
        CHECK_FALSE((dominates(a, b) && dominates(b, a)));
    }
}

TEST_CASE("sort hand examples")
{
    std::vector<Individual> pop{ind({1, 2}), ind({2, 1}), ind({2, 2}), ind({3, 3})};
    auto fronts = fast_nondominated_sort(pop);
    REQUIRE(fronts.size() == 3);
    CHECK(std::set<std::size_t>(fronts[0].begin(), fronts[0].end()) == std::set<std::size_t>{0, 1});
    CHECK(fronts[1] == std::vector<std::size_t>{2});
    CHECK(fronts[2] == std::vector<std::size_t>{3});
    CHECK(pop[3].rank == 2);

    std::vector<Individual> same(6, ind({1, 1}));
    CHECK(fast_nondominated_sort(same).size() == 1);

    std::vector<Individual> chain;
    for (int i = 0; i < 5; ++i) chain.push_back(ind({double(i), double(i)}));
    auto cf = fast_nondominated_sort(chain);
    CHECK(cf.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(cf[k] == std::vector<std::size_t>{k});
}

TEST_CASE("fast sort agrees with brute force on 200 random populations")
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + rng.below(64);
        std::size_t m = 2 + rng.below(2);
        std::vector<Individual> pop;
        for (std::size_t i = 0; i < n; ++i) {
            Vector obj(m);
            for (auto& v : obj) v = double(rng.below(6));  // coarse values force ties
            pop.push_back(ind(obj, rng.below(4) == 0 ? double(1 + rng.below(3)) : 0.0));
        }
        auto expected = brute_force_fronts(pop);
        auto fronts = fast_nondominated_sort(pop);
        REQUIRE(fronts.size() == expected.size());
        for (std::size_t k = 0; k < fronts.size(); ++k) {
            CHECK(std::set<std::size_t>(fronts[k].begin(), fronts[k].end()) == expected[k]);
            for (auto i : fronts[k]) CHECK(pop[i].rank == k);
        }
        for (auto i : fronts[0])
            for (auto j : fronts[0]) CHECK_FALSE(dominates(pop[i], pop[j]));
    }
}

TEST_CASE("crowding distance hand cases")
{
    std::vector<Individual> pop{ind({1, 3}), ind({2, 2}), ind({3, 1})};
    std::vector<std::size_t> all{0, 1, 2};
    crowding_distance(pop, all);
    CHECK(pop[0].crowding == inf);
    CHECK(pop[2].crowding == inf);
    CHECK(pop[1].crowding == 2.0);

    std::vector<Individual> two{ind({1, 3}), ind({3, 1})};
    std::vector<std::size_t> idx2{0, 1};
    crowding_distance(two, idx2);
    CHECK(two[0].crowding == inf);
    CHECK(two[1].crowding == inf);
    std::vector<Individual> one{ind({1, 3})};
    std::vector<std::size_t> idx1{0};
    crowding_distance(one, idx1);
    CHECK(one[0].crowding == inf);

    // three coincident interior points: the middle copy sits between equals on both objectives
    std::vector<Individual> dup{ind({1, 3}), ind({2, 2}), ind({2, 2}), ind({2, 2}), ind({3, 1})};
    std::vector<std::size_t> idx5{0, 1, 2, 3, 4};
    crowding_distance(dup, idx5);
    CHECK(dup[2].crowding == 0.0);
    CHECK(dup[1].crowding == 1.0);
    CHECK(dup[3].crowding == 1.0);

    // a constant objective contributes nothing
    std::vector<Individual> flat{ind({1, 5}), ind({2, 5}), ind({4, 5})};
    crowding_distance(flat, all);
    CHECK(flat[1].crowding == doctest::Approx(1.0));
}

TEST_CASE("tournament prefers rank, then crowding")
{
    Rng rng(3);
    std::vector<Individual> pop{ind({0, 0}), ind({0, 0})};
    pop[0].rank = 0;
    pop[1].rank = 2;
    for (int i = 0; i < 50; ++i) CHECK(tournament_select(pop, rng) == 0);
    pop[1].rank = 0;
    pop[0].crowding = 1.0;
    pop[1].crowding = inf;
    for (int i = 0; i < 50; ++i) CHECK(tournament_select(pop, rng) == 1);
    pop[0].crowding = inf;
    std::set<std::size_t> seen;
    Rng r1(8), r2(8);
    for (int i = 0; i < 50; ++i) {
        auto a = tournament_select(pop, r1);
        CHECK(a == tournament_select(pop, r2));
        seen.insert(a);
    }
    CHECK(seen.size() == 2);
}

TEST_CASE("SBX preserves the parent mean")
{
    Rng rng(11);
    double sum_gap = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double p1 = rng.uniform(-10, 10), p2 = rng.uniform(-10, 10);
        auto [c1, c2] = sbx_pair(p1, p2, 20.0, rng);
        CHECK(std::abs((c1 + c2) / 2 - (p1 + p2) / 2) <= 1e-12 * std::max(1.0, std::abs(p1) + std::abs(p2)));
        sum_gap += (c1 + c2) - (p1 + p2);
    }
    CHECK(std::abs(sum_gap / 10000) < 1e-12);
}

TEST_CASE("variation is identity without crossover and mutation, and respects bounds")
{
    ProblemSpec p;
    p.low = {0, -1, 10};
    p.high = {1, 1, 20};
    p.evaluate = [](std::span<const Vector>, std::span<Evaluation>) {};
    GaConfig none;
    none.crossover_probability = 0;
    none.mutation_probability = 0;
    Rng rng(5);
    Vector a{0.2, -0.5, 12}, b{0.9, 0.7, 19};
    auto [c1, c2] = variation(a, b, p, none, rng);
    CHECK(c1 == a);
    CHECK(c2 == b);

    GaConfig heavy;
    heavy.crossover_probability = 1.0;
    heavy.mutation_probability = 1.0;
    heavy.sbx_eta = 0.5;
    heavy.mutation_eta = 0.5;
    for (int i = 0; i < 5000; ++i) {
        Vector x{rng.uniform(0, 1), rng.uniform(-1, 1), rng.uniform(10, 20)};
        Vector y{rng.uniform(0, 1), rng.uniform(-1, 1), rng.uniform(10, 20)};
        auto [d1, d2] = variation(x, y, p, heavy, rng);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK((d1[k] >= p.low[k] && d1[k] <= p.high[k]));
            CHECK((d2[k] >= p.low[k] && d2[k] <= p.high[k]));
        }
        double m = polynomial_mutation(x[0], 0, 1, 0.5, rng);
        CHECK((m >= 0 && m <= 1));
    }
}

TEST_CASE("config validation")
{
    GaConfig c;
    c.population_size = 7;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.crossover_probability = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.sbx_eta = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    CHECK(c.mutation_rate(3) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("two-parabola front")
{
    auto res = optimize(two_parabolas(), small_config(100, 50));
    REQUIRE_FALSE(res.feasible_front_empty);
    double lo = inf, hi = -inf, worst = 0;
    for (auto const& i : res.front) {
        double x = i.x[0];
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        CHECK(x >= -1e-2);
        CHECK(x <= 2 + 1e-2);
        double f1 = i.objectives[0], f2 = i.objectives[1];
        worst = std::max(worst, std::abs(f2 - (std::sqrt(f1) - 2) * (std::sqrt(f1) - 2)));
    }
    CHECK(worst < 1e-2);
    CHECK(lo < 0.05);
    CHECK(hi > 1.95);
}

TEST_CASE("degenerate second objective collapses to the minimizer")
{
    auto p = one_var([](double x) { return Vector{(x - 1) * (x - 1), 0.0}; }, -5, 5);
    auto res = optimize(p, small_config(40, 60));
    REQUIRE_FALSE(res.front.empty());
    for (auto const& i : res.front) CHECK(std::abs(i.x[0] - 1.0) < 1e-3);
}

TEST_CASE("infeasible everywhere raises the empty flag")
{
    auto p = one_var([](double x) { return Vector{x, -x}; }, 0, 1, [](double) { return 1.0; });
    auto res = optimize(p, small_config(20, 5));
    CHECK(res.feasible_front_empty);
    CHECK(res.front.empty());
    for (auto const& g : res.history) {
        CHECK(g.feasible_count == 0);
        CHECK(g.best_feasible[0] == inf);
    }
}

TEST_CASE("non-finite evaluation aborts with the design")
{
    auto p = one_var([](double x) { return Vector{x > 0.5 ? std::nan("") : x, 1.0}; }, 0, 1);
    try {
        optimize(p, small_config(20, 5));
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("0.") != std::string::npos);
    }
}

TEST_CASE("elitism, bounds closure and determinism")
{
    std::mutex mu;
    bool out_of_box = false;
    ProblemSpec p;
    p.low = {0, 0};
    p.high = {1, 1};
    p.evaluate = [&](std::span<const Vector> xs, std::span<Evaluation> out) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double x = xs[i][0], y = xs[i][1];
            {
                std::lock_guard lock(mu);
                if (x < 0 || x > 1 || y < 0 || y > 1) out_of_box = true;
            }
            out[i].objectives = {x + y * y, 1 - x + y};
            out[i].constraints = {0.3 - x - y};
        }
    };
    auto cfg = small_config(60, 40, 9);
    auto a = optimize(p, cfg);
    CHECK_FALSE(out_of_box);
    for (std::size_t g = 1; g < a.history.size(); ++g) {
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(a.history[g].best_feasible[k] <= a.history[g - 1].best_feasible[k]);
        }
    }
    auto b = optimize(p, cfg);
    cfg.workers = 3;
    auto c = optimize(p, cfg);
    REQUIRE(a.population.size() == b.population.size());
    for (std::size_t i = 0; i < a.population.size(); ++i) {
        CHECK(a.population[i].x == b.population[i].x);
        CHECK(a.population[i].x == c.population[i].x);
    }
    CHECK(a.evaluations == 60 * 41);
}

TEST_CASE("parallel chunks cover the range exactly once")
{
    for (std::size_t workers : {1u, 2u, 5u, 64u}) {
        std::vector<std::atomic<int>> hits(103);
        parallel_chunks(hits.size(), workers, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) hits[i]++;
        });
        for (auto const& h : hits) CHECK(h.load() == 1);
    }
}
