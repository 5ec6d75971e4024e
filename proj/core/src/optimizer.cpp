#include "sd2nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "sd2nn/errors.hpp"

namespace sd2nn {

AdamState::AdamState(Eigen::Index n_params, AdamConfig cfg) : cfg_(cfg) {
    if (n_params <= 0) throw ConfigError("adam: parameter count must be positive");
    if (!(cfg_.lr0 > 0.0)) throw ConfigError("adam: lr0 must be positive");
    if (!(cfg_.decay >= 0.0)) throw ConfigError("adam: decay must be >= 0");
    if (!(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0))
        throw ConfigError("adam: beta1/beta2 must lie in [0, 1)");
    if (!(cfg_.eps > 0.0)) throw ConfigError("adam: eps must be positive");
    m_ = Eigen::VectorXd::Zero(n_params);
    v_ = Eigen::VectorXd::Zero(n_params);
}

double AdamState::lr_at(long epoch) const {
    if (epoch < 0) throw ConfigError("adam: epoch must be >= 0");
    const double e = static_cast<double>(epoch);
    if (cfg_.decay_formula == AdamConfig::Decay::InverseTime)
        return cfg_.lr0 / (1.0 + cfg_.decay * e);
    return cfg_.lr0 * std::exp(-cfg_.decay * e);
}

void AdamState::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad,
                     long epoch) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw ConfigError("adam: parameter/gradient size mismatch");
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericError("adam: non-finite gradient entry at flat index " +
                               std::to_string(i));
        }
    }
    ++step_;
    const double lr = lr_at(epoch);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

}  // namespace sd2nn
