#pragma once

// Complex-valued coordinate MLP.
//
//   hidden layer:  u = W h + b,  a = phi(u; T, zeta),  h' = a / max(max_i |a_i|, 1)
//   final layer:   y = Re(W h + b)
//
// T and zeta of each hidden layer are stored unconstrained and mapped into
// their bounds by theta = lo + (hi - lo) * sigmoid(theta_raw).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cosmo/activations.hpp"
#include "cosmo/common.hpp"

namespace cosmo {

struct Bounds {
    double lower = 0.0;
    double upper = 1.0;
};

/// lower + (upper - lower) * sigmoid(raw); strictly inside (lower, upper).
double bounded_param(double raw, double lower, double upper);
/// d bounded_param / d raw
double bounded_param_slope(double raw, double lower, double upper);

enum class WeightInit {
    Uniform,  // re and im ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases
    Siren,    // real weights, U(-1/fan_in, 1/fan_in) first layer, U(-sqrt(6/fan_in)/omega0, ...) after
};

struct NetworkConfig {
    int depth = 5;  // total linear layers; depth - 1 of them are activated
    int width = 256;
    int in_dim = 2;
    int out_dim = 3;
    ActivationSpec activation = ActivationSpec::cosmo(ActivationSpec::raised_cosine(5.0, 0.05), 1.5);
    Bounds bandwidth{0.0, 10.0};
    Bounds zeta{0.0, 3.0};
    bool complex_weights = true;
    WeightInit init = WeightInit::Uniform;
    std::uint64_t seed = 0;

    void validate() const;
    int hidden_layers() const noexcept { return depth - 1; }
    bool trains_bandwidth() const { return activation.base().kind() == ActivationKind::RaisedCosine; }
    bool trains_zeta() const { return activation.modulated(); }
    int activation_params_per_layer() const { return int(trains_bandwidth()) + int(trains_zeta()); }
};

struct Layer {
    Eigen::MatrixXcd weight;  // fan_out x fan_in
    Eigen::VectorXcd bias;
};

class Network {
public:
    explicit Network(NetworkConfig config);

    const NetworkConfig& config() const noexcept { return config_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    /// Unconstrained activation parameters, one row per hidden layer, columns
    /// (T, zeta) restricted to those the activation trains.
    const Eigen::MatrixXd& raw_activation_params() const noexcept { return raw_act_; }
    Eigen::MatrixXd& raw_activation_params() noexcept { return raw_act_; }

    double bandwidth(int hidden_layer) const;
    double zeta(int hidden_layer) const;
    /// The activation of one hidden layer with its current bounded parameters.
    ActivationSpec layer_activation(int hidden_layer) const;

    /// Real parameter count; a complex entry counts twice.
    Eigen::Index parameter_count() const;
    /// Flat view: per layer W (column-major, re/im interleaved) then b, then the
    /// activation parameters row by row.
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

private:
    NetworkConfig config_;
    std::vector<Layer> layers_;
    Eigen::MatrixXd raw_act_;
};

/// Deterministic given config.seed.
Network init_network(const NetworkConfig& config);

/// z / max(max_i |z_i|, 1): one positive real scale, phases untouched.
Eigen::VectorXcd normalize_layer(const Eigen::VectorXcd& z);

struct ForwardResult {
    Eigen::MatrixXd output;               // n x out_dim
    std::vector<Eigen::MatrixXcd> hidden; // width x n per hidden layer (when tapped)
};

/// coords: n x in_dim in [-1, 1]. Coordinates outside throw InvalidArgument.
Eigen::MatrixXd forward(const Network& net, const Eigen::MatrixXd& coords);
ForwardResult forward_with_taps(const Network& net, const Eigen::MatrixXd& coords);

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;  // same layout as Network::parameters()
    Eigen::MatrixXd output;
};

/// Mean squared error over sample-channels of Re(output) against targets,
/// restricted to samples with nonzero weight when `sample_mask` is given, and
/// its gradient.
LossGradient loss_and_gradient(const Network& net, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets,
                               const Eigen::VectorXd* sample_mask = nullptr);

double masked_mse(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& targets,
                  const Eigen::VectorXd* sample_mask = nullptr);

struct TrainConfig {
    int epochs = 1000;
    double lr0 = 0.01;
    double decay = 0.01;
    std::uint64_t seed = 0;
    int log_every = 1;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    double metric = 0.0;
};

struct TrainRecord {
    std::vector<EpochLog> trajectory;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_metric = 0.0;
    double wallclock_s = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

/// Evaluated on the full network output of an epoch.
using Metric = std::function<double(const Eigen::MatrixXd& prediction)>;

struct TrainOptions {
    const Eigen::VectorXd* sample_mask = nullptr;
    Metric metric;  // default: PSNR of the masked MSE
    std::function<void(const EpochLog&)> on_log;
};

/// Thrown when the loss turns non-finite. The network keeps the parameters of
/// the last finite epoch; `partial` holds the trajectory so far.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(int epoch, TrainRecord partial)
        : NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch)),
          epoch_(epoch),
          partial_(std::move(partial)) {}

    int epoch() const noexcept { return epoch_; }
    const TrainRecord& partial() const noexcept { return partial_; }

private:
    int epoch_;
    TrainRecord partial_;
};

/// Full-batch Adam with the exponential learning-rate schedule.
TrainRecord train(Network& net, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets,
                  const TrainConfig& tcfg, const TrainOptions& options = {});

/// Textual checkpoint: config, bounds, seed and every real parameter with 17
/// significant digits. Loading reproduces forward outputs bit for bit.
void save_checkpoint(std::ostream& out, const Network& net);
Network load_checkpoint(std::istream& in);

/// Hash of the configuration fields that determine a run.
std::uint64_t config_hash(const NetworkConfig& ncfg, const TrainConfig& tcfg);

}  // namespace cosmo
