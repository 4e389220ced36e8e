#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace cosmo {

struct AdamHyper {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates for one flat vector of real parameters. A complex weight
/// occupies two consecutive entries.
struct AdamState {
    std::int64_t step = 0;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    AdamHyper hyper;

    AdamState() = default;
    explicit AdamState(Eigen::Index parameter_count, AdamHyper h = {})
        : m(Eigen::VectorXd::Zero(parameter_count)), v(Eigen::VectorXd::Zero(parameter_count)), hyper(h) {}
};

/// One bias-corrected Adam update of `params` using `hyper.lr`.
/// A non-finite gradient throws NumericalError naming its index and leaves
/// both the state and the parameters untouched.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads);

/// lr0 * decay^(epoch / total_epochs): geometric interpolation from lr0 at
/// the first epoch to lr0 * decay at the last.
double lr_schedule(int epoch, int total_epochs, double lr0 = 0.01, double decay = 0.01);

}  // namespace cosmo
