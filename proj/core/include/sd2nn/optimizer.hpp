#pragma once

#include <Eigen/Core>

namespace sd2nn {

struct AdamConfig {
    enum class Decay { InverseTime, Exponential };
    double lr0 = 2e-4;
    double decay = 5e-5;      // per-epoch decay coefficient
    Decay decay_formula = Decay::InverseTime;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction; the learning rate decays per epoch, one step per
// epoch on a fresh Monte Carlo batch.
class AdamState {
public:
    AdamState(Eigen::Index n_params, AdamConfig cfg = {});

    // inverse_time: lr0 / (1 + decay * epoch); exponential: lr0 * exp(-decay * epoch)
    double lr_at(long epoch) const;

    // One Adam update of params in place; throws NumericError on a non-finite
    // gradient, naming the offending entry.
    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, long epoch);

    long step_count() const { return step_; }
    const AdamConfig& config() const { return cfg_; }
    const Eigen::VectorXd& first_moment() const { return m_; }
    const Eigen::VectorXd& second_moment() const { return v_; }

private:
    AdamConfig cfg_;
    long step_ = 0;
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
};

}  // namespace sd2nn
