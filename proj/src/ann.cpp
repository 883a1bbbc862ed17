#include "discopt/ann.hpp"

#include "discopt/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace discopt::ann {

void NetworkShape::validate() const
{
    if (n_inputs < 1 || n_outputs < 1) {
        throw InvalidArgument("network needs at least one input and one output");
    }
    if (hidden_layers.empty()) {
        throw InvalidArgument("network needs at least one hidden layer");
    }
    for (auto n : hidden_layers) {
        if (n < 1) {
            throw InvalidArgument("hidden layers need at least one neuron");
        }
    }
}

std::size_t NetworkShape::fan_in(std::size_t layer) const
{
    return layer == 0 ? n_inputs : hidden_layers[layer - 1];
}

std::size_t NetworkShape::fan_out(std::size_t layer) const
{
    return layer == hidden_layers.size() ? n_outputs : hidden_layers[layer];
}

std::size_t NetworkShape::parameter_count() const
{
    std::size_t p = 0;
    for (std::size_t k = 0; k < layer_count(); ++k) {
        p += fan_out(k) * (fan_in(k) + 1);
    }
    return p;
}

NetworkParams::NetworkParams(NetworkShape shape)
    : NetworkParams(shape, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.parameter_count())))
{
}

NetworkParams::NetworkParams(NetworkShape shape, Eigen::VectorXd values) : shape_(std::move(shape)), values_(std::move(values))
{
    shape_.validate();
    if (static_cast<std::size_t>(values_.size()) != shape_.parameter_count()) {
        throw InvalidArgument(fmt::format("network of {} parameters given {} values", shape_.parameter_count(), values_.size()));
    }
    std::size_t off = 0;
    for (std::size_t k = 0; k < shape_.layer_count(); ++k) {
        offsets_.push_back(off);
        off += shape_.fan_out(k) * (shape_.fan_in(k) + 1);
    }
}

NetworkParams NetworkParams::random(const NetworkShape& shape, Rng& rng)
{
    NetworkParams p(shape);
    for (std::size_t k = 0; k < shape.layer_count(); ++k) {
        double const r = 1.0 / std::sqrt(static_cast<double>(shape.fan_in(k)));
        std::size_t const begin = p.offsets_[k];
        std::size_t const end = begin + shape.fan_out(k) * (shape.fan_in(k) + 1);
        for (std::size_t i = begin; i < end; ++i) {
            p.values_(static_cast<Eigen::Index>(i)) = rng.uniform(-r, r);
        }
    }
    return p;
}

std::size_t NetworkParams::bias_offset(std::size_t layer) const
{
    return offsets_[layer] + shape_.fan_out(layer) * shape_.fan_in(layer);
}

Eigen::Map<const Eigen::MatrixXd> NetworkParams::weights(std::size_t layer) const
{
    return {values_.data() + offsets_[layer], static_cast<Eigen::Index>(shape_.fan_out(layer)),
            static_cast<Eigen::Index>(shape_.fan_in(layer))};
}

Eigen::Map<Eigen::MatrixXd> NetworkParams::weights(std::size_t layer)
{
    return {values_.data() + offsets_[layer], static_cast<Eigen::Index>(shape_.fan_out(layer)),
            static_cast<Eigen::Index>(shape_.fan_in(layer))};
}

Eigen::Map<const Eigen::VectorXd> NetworkParams::bias(std::size_t layer) const
{
    return {values_.data() + bias_offset(layer), static_cast<Eigen::Index>(shape_.fan_out(layer))};
}

Eigen::Map<Eigen::VectorXd> NetworkParams::bias(std::size_t layer)
{
    return {values_.data() + bias_offset(layer), static_cast<Eigen::Index>(shape_.fan_out(layer))};
}

namespace {

void check_input_arity(const NetworkParams& params, Eigen::Index cols)
{
    if (static_cast<std::size_t>(cols) != params.shape().n_inputs) {
        throw InvalidArgument(fmt::format("network expects {} inputs, got {}", params.shape().n_inputs, cols));
    }
}

// Activations of every layer for one input; entry 0 is the input itself, the last entry the output.
std::vector<Eigen::VectorXd> forward_trace(const NetworkParams& params, const Eigen::VectorXd& x)
{
    auto const layers = params.shape().layer_count();
    std::vector<Eigen::VectorXd> a;
    a.reserve(layers + 1);
    a.push_back(x);
    for (std::size_t k = 0; k < layers; ++k) {
        Eigen::VectorXd z = params.weights(k) * a.back() + params.bias(k);
        if (k + 1 < layers) {
            z = z.array().tanh();
        }
        a.push_back(std::move(z));
    }
    return a;
}

} // namespace

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& x)
{
    check_input_arity(params, x.size());
    return forward_trace(params, x).back();
}

std::vector<Eigen::VectorXd> hidden_activations(const NetworkParams& params, const Eigen::VectorXd& x)
{
    check_input_arity(params, x.size());
    auto a = forward_trace(params, x);
    return {a.begin() + 1, a.end() - 1};
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs)
{
    check_input_arity(params, inputs.cols());
    auto const layers = params.shape().layer_count();
    // Column per sample.
    Eigen::MatrixXd a = inputs.transpose();
    for (std::size_t k = 0; k < layers; ++k) {
        Eigen::MatrixXd z = (params.weights(k) * a).colwise() + params.bias(k);
        if (k + 1 < layers) {
            z = z.array().tanh();
        }
        a = std::move(z);
    }
    return a.transpose();
}

Eigen::VectorXd gradient(const NetworkParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets)
{
    check_input_arity(params, inputs.cols());
    auto const& shape = params.shape();
    if (targets.rows() != inputs.rows() || static_cast<std::size_t>(targets.cols()) != shape.n_outputs) {
        throw InvalidArgument("target matrix does not match inputs and output count");
    }
    auto const layers = shape.layer_count();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values().size());
    for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
        auto a = forward_trace(params, inputs.row(n).transpose());
        Eigen::VectorXd delta = 2.0 * (a.back() - targets.row(n).transpose());
        for (std::size_t k = layers; k-- > 0;) {
            auto const rows = static_cast<Eigen::Index>(shape.fan_out(k));
            auto const cols = static_cast<Eigen::Index>(shape.fan_in(k));
            Eigen::Map<Eigen::MatrixXd> gw(grad.data() + params.weight_offset(k), rows, cols);
            gw.noalias() += delta * a[k].transpose();
            grad.segment(static_cast<Eigen::Index>(params.bias_offset(k)), rows) += delta;
            if (k > 0) {
                Eigen::VectorXd back = params.weights(k).transpose() * delta;
                delta = back.array() * (1.0 - a[k].array().square());
            }
        }
    }
    return grad;
}

Eigen::MatrixXd jacobian(const NetworkParams& params, const Eigen::MatrixXd& inputs)
{
    check_input_arity(params, inputs.cols());
    auto const& shape = params.shape();
    auto const layers = shape.layer_count();
    auto const n_out = static_cast<Eigen::Index>(shape.n_outputs);
    Eigen::MatrixXd jac(inputs.rows() * n_out, params.values().size());
    for (Eigen::Index n = 0; n < inputs.rows(); ++n) {
        auto a = forward_trace(params, inputs.row(n).transpose());
        // Column k of delta backpropagates output k.
        Eigen::MatrixXd delta = Eigen::MatrixXd::Identity(n_out, n_out);
        for (std::size_t k = layers; k-- > 0;) {
            auto const rows = static_cast<Eigen::Index>(shape.fan_out(k));
            auto const cols = static_cast<Eigen::Index>(shape.fan_in(k));
            auto const w_off = static_cast<Eigen::Index>(params.weight_offset(k));
            auto const b_off = static_cast<Eigen::Index>(params.bias_offset(k));
            for (Eigen::Index o = 0; o < n_out; ++o) {
                auto row = jac.row(n * n_out + o);
                for (Eigen::Index j = 0; j < cols; ++j) {
                    row.segment(w_off + j * rows, rows) = delta.col(o).transpose() * a[static_cast<std::size_t>(k)](j);
                }
                row.segment(b_off, rows) = delta.col(o).transpose();
            }
            if (k > 0) {
                Eigen::MatrixXd back = params.weights(k).transpose() * delta;
                delta = back.array().colwise() * (1.0 - a[k].array().square());
            }
        }
    }
    return jac;
}

void TrainConfig::validate() const
{
    if (max_iterations < 1 || stall_steps < 1 || evidence_patience < 1) {
        throw InvalidArgument("iteration limits must be at least 1");
    }
    if (!(tolerance > 0.0)) {
        throw InvalidArgument("tolerance must be positive");
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw InvalidArgument("alpha and beta must be positive");
    }
    if (!(mu_initial > 0.0) || !(mu_increase > 1.0) || !(mu_decrease > 0.0 && mu_decrease < 1.0) || !(mu_max > mu_initial)) {
        throw InvalidArgument("invalid damping schedule");
    }
}

namespace {

// Spectrum of J^T J restricted to its range, with the eigenvectors needed to
// apply (c I + beta J^T J)^-1 for any damping c. Uses whichever Gram matrix is smaller.
class CurvatureSolver {
public:
    explicit CurvatureSolver(const Eigen::MatrixXd& jac) : jac_(jac), use_outer_(jac.rows() <= jac.cols())
    {
        Eigen::MatrixXd gram(use_outer_ ? jac.rows() : jac.cols(), use_outer_ ? jac.rows() : jac.cols());
        if (use_outer_) {
            gram.setZero();
            gram.selfadjointView<Eigen::Lower>().rankUpdate(jac);
        } else {
            gram.setZero();
            gram.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.selfadjointView<Eigen::Lower>());
        if (eig.info() != Eigen::Success) {
            throw NumericalError("eigendecomposition of the Gauss-Newton matrix failed");
        }
        lambda_ = eig.eigenvalues().cwiseMax(0.0);
        vectors_ = eig.eigenvectors();
    }

    /// Solves (c I + beta J^T J) step = -g.
    Eigen::VectorXd step(const Eigen::VectorXd& g, double beta, double c) const
    {
        if (use_outer_) {
            // Woodbury: (cI + beta J^T J)^-1 = (1/c) [I - J^T U diag(beta / (c + beta lambda)) U^T J]
            Eigen::VectorXd u = vectors_.transpose() * (jac_ * g);
            u.array() *= beta / (c + beta * lambda_.array());
            return -(g - jac_.transpose() * (vectors_ * u)) / c;
        }
        Eigen::VectorXd u = vectors_.transpose() * g;
        u.array() /= c + beta * lambda_.array();
        return -(vectors_ * u);
    }

    /// P - alpha tr((alpha I + beta J^T J)^-1) = sum of beta lambda / (alpha + beta lambda).
    double effective_parameters(double alpha, double beta) const
    {
        return (beta * lambda_.array() / (alpha + beta * lambda_.array())).sum();
    }

    /// log det(alpha I + beta J^T J) over all P dimensions.
    double log_det(double alpha, double beta, std::size_t n_params) const
    {
        double const zero_dims = static_cast<double>(n_params) - static_cast<double>(lambda_.size());
        return (alpha + beta * lambda_.array()).log().sum() + zero_dims * std::log(alpha);
    }

private:
    const Eigen::MatrixXd& jac_;
    bool use_outer_;
    Eigen::VectorXd lambda_;
    Eigen::MatrixXd vectors_;
};

struct Errors {
    double data;    // 0.5 * |r|^2
    double weight;  // 0.5 * |w|^2
};

Errors errors_at(const NetworkParams& params, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::VectorXd* residual)
{
    Eigen::MatrixXd out = forward_batch(params, x) - y;
    // Row-major flattening so residual index n * n_outputs + k matches the jacobian row layout.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = out;
    Eigen::Map<const Eigen::VectorXd> r(rm.data(), rm.size());
    if (residual) {
        *residual = r;
    }
    return {0.5 * r.squaredNorm(), 0.5 * params.values().squaredNorm()};
}

Eigen::MatrixXd normalize_columns(const Eigen::MatrixXd& m, const NormalizationStats& stats)
{
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        auto const cu = static_cast<std::size_t>(c);
        out.col(c) = (m.col(c).array() - stats.mean[cu]) / stats.std[cu];
    }
    return out;
}

NormalizationStats column_stats(const Eigen::MatrixXd& m)
{
    std::vector<std::vector<double>> cols;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        cols.emplace_back(m.col(c).data(), m.col(c).data() + m.rows());
    }
    return compute_stats(cols);
}

// Log marginal likelihood of the data under the Gaussian (Laplace) approximation, up to a constant.
double log_evidence(const CurvatureSolver& solver, const Errors& err, double alpha, double beta, std::size_t n_params,
                    double n_targets)
{
    return -beta * err.data - alpha * err.weight - 0.5 * solver.log_det(alpha, beta, n_params) +
           0.5 * static_cast<double>(n_params) * std::log(alpha) + 0.5 * n_targets * std::log(beta);
}

} // namespace

TrainedNetwork train_network(NetworkShape shape, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                             std::vector<Response> outputs, const TrainConfig& cfg)
{
    shape.validate();
    cfg.validate();
    if (inputs.rows() < 2 || inputs.rows() != targets.rows()) {
        throw InvalidArgument("training needs at least two samples with matching targets");
    }
    if (static_cast<std::size_t>(inputs.cols()) != shape.n_inputs ||
        static_cast<std::size_t>(targets.cols()) != shape.n_outputs || outputs.size() != shape.n_outputs) {
        throw InvalidArgument("training data arity does not match the network shape");
    }

    NormalizationStats in_stats = column_stats(inputs);
    NormalizationStats out_stats = column_stats(targets);
    Eigen::MatrixXd x = normalize_columns(inputs, in_stats);
    Eigen::MatrixXd y = normalize_columns(targets, out_stats);

    Rng rng(cfg.seed);
    NetworkParams params = NetworkParams::random(shape, rng);
    auto const n_params = static_cast<double>(shape.parameter_count());
    auto const n_targets = static_cast<double>(y.size());

    double alpha = cfg.alpha;
    double beta = cfg.beta;
    double mu = cfg.mu_initial;
    double gamma = n_params;

    Eigen::VectorXd residual;
    Errors err = errors_at(params, x, y, &residual);
    if (!std::isfinite(err.data)) {
        throw NumericalError("training objective is not finite at initialization");
    }

    TrainingSummary summary;
    summary.parameter_count = shape.parameter_count();
    summary.stop_reason = "max_iterations";
    std::size_t stalls = 0;
    std::size_t iter = 0;
    bool stepped = false;

    struct Snapshot {
        NetworkParams params;
        Errors err;
        double alpha, beta;
        double evidence;
        std::size_t iteration;
    };
    std::optional<Snapshot> best;
    std::size_t since_best = 0;

    for (; iter < cfg.max_iterations; ++iter) {
        Eigen::MatrixXd jac = jacobian(params, x);
        CurvatureSolver solver(jac);

        if (cfg.reestimate && stepped) {
            gamma = std::clamp(solver.effective_parameters(alpha, beta), 0.0, n_params);
            if (err.weight > 0.0) {
                alpha = gamma / (2.0 * err.weight);
            }
            if (err.data > 0.0) {
                beta = std::max(n_targets - gamma, 1e-12) / (2.0 * err.data);
            }
            alpha = std::max(alpha, 1e-12);
            summary.history.back().gamma = gamma;
            double const ev = log_evidence(solver, err, alpha, beta, shape.parameter_count(), n_targets);
            summary.history.back().log_evidence = ev;
            if (!best || ev > best->evidence) {
                best = Snapshot{params, err, alpha, beta, ev, iter};
                since_best = 0;
            } else if (++since_best >= cfg.evidence_patience) {
                summary.stop_reason = "evidence_peak";
                break;
            }
        }

        double const objective = beta * err.data + alpha * err.weight;
        Eigen::VectorXd grad = beta * (jac.transpose() * residual) + alpha * params.values();

        bool accepted = false;
        while (mu <= cfg.mu_max) {
            NetworkParams trial = params;
            trial.values() += solver.step(grad, beta, alpha + mu);
            Eigen::VectorXd trial_residual;
            Errors trial_err = errors_at(trial, x, y, &trial_residual);
            double const trial_objective = beta * trial_err.data + alpha * trial_err.weight;
            if (!std::isfinite(trial_objective)) {
                throw NumericalError(fmt::format("training diverged at iteration {}: objective is not finite", iter));
            }
            if (trial_objective < objective) {
                double const decrease = (objective - trial_objective) / std::max(objective, 1e-300);
                stalls = decrease < cfg.tolerance ? stalls + 1 : 0;
                summary.history.push_back({objective, trial_objective, alpha, beta, gamma});
                params = std::move(trial);
                residual = std::move(trial_residual);
                err = trial_err;
                mu = std::max(mu * cfg.mu_decrease, 1e-20);
                accepted = true;
                break;
            }
            mu *= cfg.mu_increase;
        }
        if (!accepted) {
            summary.stop_reason = "damping_limit";
            break;
        }
        stepped = true;
        if (stalls >= cfg.stall_steps) {
            summary.stop_reason = "converged";
            ++iter;
            break;
        }
    }

    if (best) {
        // The fixed-point updates can drift past the evidence maximum toward interpolation; keep the peak.
        params = std::move(best->params);
        err = best->err;
        alpha = best->alpha;
        beta = best->beta;
        summary.best_iteration = best->iteration;
    } else {
        summary.best_iteration = iter;
    }

    CurvatureSolver final_solver(jacobian(params, x));
    summary.alpha = alpha;
    summary.beta = beta;
    summary.gamma = std::clamp(final_solver.effective_parameters(alpha, beta), 0.0, n_params);
    summary.iterations = iter;
    summary.data_error = err.data;
    summary.weight_error = err.weight;

    return TrainedNetwork{std::move(params), std::move(in_stats), std::move(out_stats), std::move(outputs),
                          std::move(summary)};
}

std::vector<double> TrainedNetwork::predict_outputs(const DesignPoint& x) const
{
    auto v = x.as_array();
    Eigen::VectorXd in(3);
    for (std::size_t i = 0; i < 3; ++i) {
        in(static_cast<Eigen::Index>(i)) = input_stats.normalize(i, v[i]);
    }
    Eigen::VectorXd out = forward(params, in);
    std::vector<double> result(static_cast<std::size_t>(out.size()));
    for (std::size_t k = 0; k < result.size(); ++k) {
        result[k] = output_stats.denormalize(k, out(static_cast<Eigen::Index>(k)));
    }
    return result;
}

ResponseVector predict(const TrainedNetwork& net, const DesignPoint& x)
{
    if (net.outputs.size() != 3) {
        throw InvalidArgument("network does not predict all three responses");
    }
    auto out = net.predict_outputs(x);
    ResponseVector y;
    for (std::size_t k = 0; k < 3; ++k) {
        y[net.outputs[k]] = out[k];
    }
    return y;
}

ResponseVector NeuralSurrogate::predict(const DesignPoint& x) const
{
    ResponseVector y;
    std::array<bool, 3> seen{};
    for (auto const& net : networks) {
        auto out = net.predict_outputs(x);
        for (std::size_t k = 0; k < out.size(); ++k) {
            y[net.outputs[k]] = out[k];
            seen[static_cast<std::size_t>(net.outputs[k])] = true;
        }
    }
    if (!(seen[0] && seen[1] && seen[2])) {
        throw InvalidArgument("neural surrogate does not cover every response");
    }
    return y;
}

std::vector<ResponseVector> NeuralSurrogate::predict(std::span<const DesignPoint> xs) const
{
    std::vector<ResponseVector> out;
    out.reserve(xs.size());
    for (auto const& x : xs) {
        out.push_back(predict(x));
    }
    return out;
}

NeuralSurrogate train(const std::vector<std::size_t>& hidden_layers, const Dataset& data, const TrainConfig& cfg)
{
    auto const n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd x(n, 3);
    Eigen::MatrixXd y(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto const& s = data[static_cast<std::size_t>(i)];
        auto xv = s.x.as_array();
        auto yv = s.y.as_array();
        for (Eigen::Index c = 0; c < 3; ++c) {
            x(i, c) = xv[static_cast<std::size_t>(c)];
            y(i, c) = yv[static_cast<std::size_t>(c)];
        }
    }

    NeuralSurrogate surrogate;
    if (!cfg.per_response) {
        surrogate.networks.push_back(train_network({3, hidden_layers, 3}, x, y,
                                                   {Response::mass, Response::stress, Response::buckling}, cfg));
        return surrogate;
    }
    for (auto r : kAllResponses) {
        TrainConfig sub = cfg;
        sub.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
        Eigen::MatrixXd col = y.col(static_cast<Eigen::Index>(r));
        surrogate.networks.push_back(train_network({3, hidden_layers, 1}, x, col, {r}, sub));
    }
    return surrogate;
}

double mean_abs_percent_error(std::span<const double> truth, std::span<const double> pred)
{
    if (truth.size() != pred.size() || truth.empty()) {
        throw InvalidArgument(fmt::format("percent error needs equal non-empty sequences ({} vs {})", truth.size(), pred.size()));
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] == 0.0) {
            throw InvalidArgument(fmt::format("ground truth at index {} is zero; percent error undefined", j));
        }
        acc += std::abs((pred[j] - truth[j]) / truth[j]);
    }
    return acc / static_cast<double>(truth.size()) * 100.0;
}

PercentErrors mean_abs_percent_error(std::span<const ResponseVector> truth, std::span<const ResponseVector> pred)
{
    if (truth.size() != pred.size()) {
        throw InvalidArgument("percent error needs equal-length sequences");
    }
    PercentErrors e;
    for (auto r : kAllResponses) {
        std::vector<double> t, p;
        t.reserve(truth.size());
        p.reserve(pred.size());
        for (std::size_t j = 0; j < truth.size(); ++j) {
            t.push_back(truth[j][r]);
            p.push_back(pred[j][r]);
        }
        e.per_response[static_cast<std::size_t>(r)] = mean_abs_percent_error(t, p);
    }
    e.mean = (e.per_response[0] + e.per_response[1] + e.per_response[2]) / 3.0;
    return e;
}

} // namespace discopt::ann
