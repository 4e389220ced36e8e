#include "cosmo/optim.hpp"

#include <cmath>
#include <string>

#include "cosmo/common.hpp"

namespace cosmo {

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads) {
    const Eigen::Index n = params.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n)
        throw InvalidArgument("adam_step: expected " + std::to_string(n) + " gradients and moments, got " +
                              std::to_string(grads.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(grads(i)))
            throw NumericalError("adam_step: non-finite gradient at index " + std::to_string(i));

    const AdamHyper& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = grads(i);
        state.m(i) = h.beta1 * state.m(i) + (1.0 - h.beta1) * g;
        state.v(i) = h.beta2 * state.v(i) + (1.0 - h.beta2) * g * g;
        const double m_hat = state.m(i) / c1;
        const double v_hat = state.v(i) / c2;
        params(i) -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

double lr_schedule(int epoch, int total_epochs, double lr0, double decay) {
    if (total_epochs < 1) throw InvalidArgument("lr_schedule: total_epochs must be at least 1");
    if (epoch < 0 || epoch > total_epochs)
        throw InvalidArgument("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                              std::to_string(total_epochs) + "]");
    return lr0 * std::pow(decay, static_cast<double>(epoch) / static_cast<double>(total_epochs));
}

}  // namespace cosmo
