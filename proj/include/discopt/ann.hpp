#pragma once

#include "discopt/dataset.hpp"
#include "discopt/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace discopt::ann {

struct NetworkShape {
    std::size_t n_inputs{3};
    std::vector<std::size_t> hidden_layers{20, 20};
    std::size_t n_outputs{3};

    void validate() const;
    std::size_t layer_count() const { return hidden_layers.size() + 1; }
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;
    std::size_t parameter_count() const;

    bool operator==(const NetworkShape&) const = default;
};

/// Weights and biases of every layer in one flat vector. Layer k stores its
/// fan_out x fan_in weight matrix column-major, followed by its bias vector.
class NetworkParams {
public:
    explicit NetworkParams(NetworkShape shape);
    NetworkParams(NetworkShape shape, Eigen::VectorXd values);

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases of each layer.
    static NetworkParams random(const NetworkShape& shape, Rng& rng);

    const NetworkShape& shape() const { return shape_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& values() { return values_; }

    Eigen::Map<const Eigen::MatrixXd> weights(std::size_t layer) const;
    Eigen::Map<Eigen::MatrixXd> weights(std::size_t layer);
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
    Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);

    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const;

private:
    NetworkShape shape_;
    Eigen::VectorXd values_;
    std::vector<std::size_t> offsets_;
};

/// tanh hidden layers, affine output. Input is in normalized space.
Eigen::VectorXd forward(const NetworkParams& params, const Eigen::VectorXd& x);

/// Row-wise forward pass: inputs N x n_inputs, result N x n_outputs.
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Hidden-layer activations for one input, outermost vector indexed by hidden layer.
std::vector<Eigen::VectorXd> hidden_activations(const NetworkParams& params, const Eigen::VectorXd& x);

/// Reverse-mode gradient of E_D = sum over rows of ||forward(x) - y||^2.
Eigen::VectorXd gradient(const NetworkParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

/// d output / d parameter; row n * n_outputs + k holds the derivative of output k for input row n.
Eigen::MatrixXd jacobian(const NetworkParams& params, const Eigen::MatrixXd& inputs);

struct TrainConfig {
    std::size_t max_iterations{300};
    double tolerance{1e-9};        // relative objective decrease counted as a stall
    std::size_t stall_steps{5};    // consecutive stalls that end training
    double alpha{0.01};            // weight-decay hyperparameter, initial value
    double beta{1.0};              // data-fit hyperparameter, initial value
    std::uint64_t seed{0};
    bool reestimate{true};         // false keeps alpha and beta fixed
    std::size_t evidence_patience{25};  // re-estimates without a new log-evidence maximum before stopping
    bool per_response{false};      // one single-output network per response
    double mu_initial{0.005};
    double mu_increase{10.0};
    double mu_decrease{0.1};
    double mu_max{1e10};

    void validate() const;
};

struct StepRecord {
    double objective_before{};  // under the hyperparameters in force for the step
    double objective_after{};
    double alpha{};
    double beta{};
    double gamma{};             // effective parameters after the step's re-estimate
    double log_evidence{};      // after the step's re-estimate
};

struct TrainingSummary {
    double alpha{};
    double beta{};
    double gamma{};
    std::size_t iterations{};
    std::size_t best_iteration{};  // iteration whose parameters were kept
    std::size_t parameter_count{};
    double data_error{};    // 0.5 * sum of squared normalized residuals
    double weight_error{};  // 0.5 * sum of squared parameters
    std::string stop_reason;
    std::vector<StepRecord> history;
};

struct TrainedNetwork {
    NetworkParams params;
    NormalizationStats input_stats;
    NormalizationStats output_stats;
    std::vector<Response> outputs;  // response carried by each network output
    TrainingSummary summary;

    const NetworkShape& shape() const { return params.shape(); }

    /// Normalizes the design, runs the network, denormalizes each output.
    std::vector<double> predict_outputs(const DesignPoint& x) const;
};

/// One jointly trained network, or one network per response.
struct NeuralSurrogate {
    std::vector<TrainedNetwork> networks;

    ResponseVector predict(const DesignPoint& x) const;
    std::vector<ResponseVector> predict(std::span<const DesignPoint> xs) const;
};

/// Bayesian-regularized Levenberg-Marquardt training on raw-unit data.
/// Throws NumericalError when the objective becomes non-finite.
TrainedNetwork train_network(NetworkShape shape, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                             std::vector<Response> outputs, const TrainConfig& cfg);

/// Trains on every response of the dataset; hidden_layers sets the architecture.
NeuralSurrogate train(const std::vector<std::size_t>& hidden_layers, const Dataset& data, const TrainConfig& cfg);

ResponseVector predict(const TrainedNetwork& net, const DesignPoint& x);

/// Mean of |(pred - truth) / truth| times 100. Throws on a zero truth value.
double mean_abs_percent_error(std::span<const double> truth, std::span<const double> pred);

struct PercentErrors {
    std::array<double, 3> per_response{};
    double mean{};
};

PercentErrors mean_abs_percent_error(std::span<const ResponseVector> truth, std::span<const ResponseVector> pred);

} // namespace discopt::ann
