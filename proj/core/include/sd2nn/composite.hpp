#pragma once

#include <functional>
#include <vector>

#include "sd2nn/network.hpp"

namespace sd2nn {

// Coarse submodule plus K fine submodules combined as
// u(x) = y_1(x) + sum_k alpha_k y_{k+1}(x). The alphas are fixed
// hyperparameters, never trained.
struct CompositeModel {
    std::vector<ScaledNet> nets;  // [0] is the coarse submodule
    std::vector<double> alphas;   // length nets.size() - 1

    int input_dim() const { return nets.empty() ? 0 : nets[0].input_dim; }
    int n_fine() const { return static_cast<int>(alphas.size()); }
    long n_params() const;
    long offset_of(int sub) const;  // flat-vector offset of submodule sub

    void validate() const;  // shape/alpha consistency, throws ConfigError

    Eigen::VectorXd params_flat() const;
    void set_params_flat(const Eigen::Ref<const Eigen::VectorXd>& flat);

    // Nodes of one recorded forward pass over a batch.
    struct Recorded {
        ad::NodeId total = -1;              // u = y1 + sum alpha_k y_{k+1}
        ad::NodeId coarse = -1;             // y1
        ad::NodeId fine_sum = -1;           // sum alpha_k y_{k+1}; -1 when K = 0
        std::vector<ad::NodeId> raw;        // y_k, unweighted, one per submodule
    };
    Recorded record(ad::Tape& tape, ad::NodeId xin, bool train = true) const;

    // parts column 0 is y1, column k is alpha_k * y_{k+1}; total = row sum
    void eval_parts(const Eigen::MatrixXd& x, Eigen::VectorXd* total,
                    Eigen::MatrixXd* parts) const;
    void eval_parts_with_grad(const Eigen::MatrixXd& x, Eigen::VectorXd* total,
                              Eigen::MatrixXd* parts, Eigen::MatrixXd* grad_total,
                              std::vector<Eigen::MatrixXd>* grad_parts) const;
};

// Runs the recorded loss once, sweeps it backward, and accumulates the
// parameter gradient. record_loss must return a scalar (1x1) node built on
// the given tape over this model. Returns the loss value.
double loss_gradient(const CompositeModel& model,
                     const std::function<ad::NodeId(ad::Tape&)>& record_loss,
                     Eigen::Ref<Eigen::VectorXd> grad);

}  // namespace sd2nn
