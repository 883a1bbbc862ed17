#pragma once

#include "discopt/dataset.hpp"

#include <optional>
#include <vector>

namespace discopt::rsm {

/// Exponents of one monomial term l^a * b^b * t^c.
struct Monomial {
    int exp_l{};
    int exp_b{};
    int exp_t{};

    double evaluate(const DesignPoint& x) const;
    bool is_constant() const { return exp_l == 0 && exp_b == 0 && exp_t == 0; }
    bool operator==(const Monomial&) const = default;
};

class MonomialBasis {
public:
    explicit MonomialBasis(std::vector<Monomial> terms);

    const std::vector<Monomial>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool includes_constant() const;

private:
    std::vector<Monomial> terms_;
};

struct RsmModel {
    MonomialBasis basis;
    std::vector<double> coefficients;
    Response response;
    std::optional<double> r_squared;

    RsmModel(MonomialBasis basis, std::vector<double> coefficients, Response response,
             std::optional<double> r_squared = std::nullopt);

    /// Sum of coefficient * monomial.
    double evaluate(const DesignPoint& x) const;
};

inline double evaluate(const RsmModel& model, const DesignPoint& x) { return model.evaluate(x); }

struct RsmModelSet {
    RsmModel mass;
    RsmModel stress;
    RsmModel buckling;

    const RsmModel& operator[](Response r) const;
    ResponseVector evaluate(const DesignPoint& x) const;
};

/// Term structure of the published models for each response.
MonomialBasis published_basis(DesignTag design, Response response);

/// The published response-surface models with their printed coefficients.
RsmModelSet published_models(DesignTag design);

/// Ordinary least squares over the basis using column-pivoted QR on a
/// column-scaled design matrix. Throws when the data are too few, the design
/// matrix is rank deficient, or the response is constant.
RsmModel fit(const MonomialBasis& basis, const Dataset& data, Response response);

/// Fits every response on the published basis of the dataset's design.
RsmModelSet fit_published_bases(const Dataset& data);

/// Coefficient of determination 1 - SS_res / SS_tot; throws on zero response variance.
double r_squared(const RsmModel& model, const Dataset& data);

double sum_squared_residuals(const RsmModel& model, const Dataset& data);

} // namespace discopt::rsm
