#include "discopt/rsm.hpp"

#include "discopt/errors.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace discopt::rsm {

namespace {

double ipow(double x, int n)
{
    double r = 1.0;
    for (int i = 0; i < n; ++i) {
        r *= x;
    }
    return r;
}

} // namespace

double Monomial::evaluate(const DesignPoint& x) const
{
    return ipow(x.length_mm, exp_l) * ipow(x.width_mm, exp_b) * ipow(x.thickness_mm, exp_t);
}

MonomialBasis::MonomialBasis(std::vector<Monomial> terms) : terms_(std::move(terms))
{
    if (terms_.empty()) {
        throw InvalidArgument("a monomial basis needs at least one term");
    }
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        auto const& m = terms_[i];
        if (m.exp_l < 0 || m.exp_b < 0 || m.exp_t < 0) {
            throw InvalidArgument("monomial exponents must be non-negative");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (terms_[j] == m) {
                throw InvalidArgument(fmt::format("basis term {} repeats term {}", i, j));
            }
        }
    }
}

bool MonomialBasis::includes_constant() const
{
    return std::any_of(terms_.begin(), terms_.end(), [](auto const& m) { return m.is_constant(); });
}

RsmModel::RsmModel(MonomialBasis b, std::vector<double> c, Response r, std::optional<double> r2)
    : basis(std::move(b)), coefficients(std::move(c)), response(r), r_squared(r2)
{
    if (coefficients.size() != basis.size()) {
        throw InvalidArgument(fmt::format("{} coefficients for a basis of {} terms", coefficients.size(), basis.size()));
    }
    if (r_squared && (std::isnan(*r_squared) || *r_squared > 1.0)) {
        throw InvalidArgument("r_squared must not exceed 1");
    }
}

double RsmModel::evaluate(const DesignPoint& x) const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        acc += coefficients[i] * basis.terms()[i].evaluate(x);
    }
    return acc;
}

const RsmModel& RsmModelSet::operator[](Response r) const
{
    switch (r) {
    case Response::mass: return mass;
    case Response::stress: return stress;
    case Response::buckling: break;
    }
    return buckling;
}

ResponseVector RsmModelSet::evaluate(const DesignPoint& x) const
{
    return {mass.evaluate(x), stress.evaluate(x), buckling.evaluate(x)};
}

namespace {

struct PublishedTerm {
    Monomial term;
    double coefficient;
};

std::vector<PublishedTerm> published_terms(DesignTag design, Response response)
{
    // Term order follows the printed equations.
    if (design == DesignTag::A) {
        switch (response) {
        case Response::mass: return {{{1, 1, 1}, 0.00199}, {{0, 1, 1}, -0.00371}, {{0, 0, 0}, 0.00369}};
        case Response::stress:
            return {{{0, 0, 0}, 263.3}, {{0, 0, 2}, 1065.3}, {{1, 1, 0}, -0.47}, {{1, 0, 2}, -25.1}};
        case Response::buckling: return {{{2, 1, 3}, -0.995}, {{0, 1, 3}, 2075.19}};
        }
    }
    switch (response) {
    case Response::mass:
        return {{{1, 1, 1}, 0.00153}, {{1, 0, 1}, 0.01613}, {{0, 0, 1}, -0.262}, {{0, 0, 0}, 0.00044}};
    case Response::stress:
        return {{{0, 0, 0}, 292.9}, {{0, 0, 2}, 769.3}, {{1, 0, 0}, -5.17}, {{1, 0, 2}, -17.52}};
    case Response::buckling: break;
    }
    return {{{2, 1, 3}, -1.47792}, {{0, 1, 3}, 3078.22}};
}

RsmModel published_model(DesignTag design, Response response)
{
    std::vector<Monomial> terms;
    std::vector<double> coefs;
    for (auto const& pt : published_terms(design, response)) {
        terms.push_back(pt.term);
        coefs.push_back(pt.coefficient);
    }
    return RsmModel(MonomialBasis(std::move(terms)), std::move(coefs), response);
}

} // namespace

MonomialBasis published_basis(DesignTag design, Response response)
{
    return published_model(design, response).basis;
}

RsmModelSet published_models(DesignTag design)
{
    return {published_model(design, Response::mass), published_model(design, Response::stress),
            published_model(design, Response::buckling)};
}

double sum_squared_residuals(const RsmModel& model, const Dataset& data)
{
    double ss = 0.0;
    for (auto const& s : data.rows()) {
        double r = s.y[model.response] - model.evaluate(s.x);
        ss += r * r;
    }
    return ss;
}

namespace {

double total_sum_squares(const Dataset& data, Response response)
{
    auto y = data.column(response);
    double mean = 0.0;
    for (double v : y) {
        mean += v;
    }
    mean /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) {
        ss += (v - mean) * (v - mean);
    }
    // Relative threshold: round-off on a constant column leaves ~eps^2 * n * mean^2.
    if (!(ss > 1e-24 * static_cast<double>(y.size()) * std::max(1.0, mean * mean))) {
        throw InvalidArgument(fmt::format("response '{}' has zero variance; R^2 is undefined", to_string(response)));
    }
    return ss;
}

} // namespace

double r_squared(const RsmModel& model, const Dataset& data)
{
    double ss_tot = total_sum_squares(data, model.response);
    return 1.0 - sum_squared_residuals(model, data) / ss_tot;
}

RsmModel fit(const MonomialBasis& basis, const Dataset& data, Response response)
{
    auto const n = static_cast<Eigen::Index>(data.size());
    auto const p = static_cast<Eigen::Index>(basis.size());
    if (n < p) {
        throw InvalidArgument(fmt::format("{} rows cannot determine {} coefficients", n, p));
    }
    // Evaluated first so a constant response fails before any solve.
    total_sum_squares(data, response);

    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const& s = data[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j) {
            design(i, j) = basis.terms()[static_cast<std::size_t>(j)].evaluate(s.x);
        }
        y(i) = s.y[response];
    }

    // Unit-norm columns so the QR rank threshold is meaningful across monomials of very different scale.
    Eigen::VectorXd scale = design.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(scale(j) > 0.0)) {
            throw NumericalError(fmt::format("basis term {} vanishes on every row", j));
        }
        design.col(j) /= scale(j);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        throw NumericalError(fmt::format("design matrix is rank deficient (rank {} < {} terms)", qr.rank(), p));
    }
    Eigen::VectorXd scaled = qr.solve(y);

    std::vector<double> coefs(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        coefs[static_cast<std::size_t>(j)] = scaled(j) / scale(j);
    }
    RsmModel model(basis, std::move(coefs), response);
    model.r_squared = r_squared(model, data);
    return model;
}

RsmModelSet fit_published_bases(const Dataset& data)
{
    auto basis = [&](Response r) { return published_basis(data.tag(), r); };
    return {fit(basis(Response::mass), data, Response::mass), fit(basis(Response::stress), data, Response::stress),
            fit(basis(Response::buckling), data, Response::buckling)};
}

} // namespace discopt::rsm
