#pragma once

#include <cstdint>
#include <vector>

#include "sd2nn/activation.hpp"
#include "sd2nn/autodiff.hpp"

namespace sd2nn {

// How the scale vector of the first layer is produced. A spec resolves to
// exactly m1 ascending positive entries: shorter bases are repeated with
// (near-)equal multiplicities, longer ones are evenly subsampled, so desk
// scale runs keep the band of the full-width configuration.
struct LambdaSpec {
    enum class Kind { Ones, Arithmetic, Explicit, Gaussian };
    Kind kind = Kind::Ones;
    double start = 1.0;
    double step = 1.0;
    int count = 0;  // arithmetic entries before resolution; 0 means "match m1"
    std::vector<double> values;  // explicit base list
    std::vector<double> taus;    // gaussian: one block of draws per stddev
    std::uint64_t seed = 1;      // gaussian draw seed (fixed at build)

    static LambdaSpec ones() { return {}; }
    static LambdaSpec arithmetic(double start, double step, int count = 0) {
        LambdaSpec s;
        s.kind = Kind::Arithmetic;
        s.start = start;
        s.step = step;
        s.count = count;
        return s;
    }
    static LambdaSpec explicit_list(std::vector<double> v) {
        LambdaSpec s;
        s.kind = Kind::Explicit;
        s.values = std::move(v);
        return s;
    }
    static LambdaSpec gaussian(std::vector<double> taus, std::uint64_t seed) {
        LambdaSpec s;
        s.kind = Kind::Gaussian;
        s.taus = std::move(taus);
        s.seed = seed;
        return s;
    }
};

Eigen::VectorXd resolve_lambda(const LambdaSpec& spec, int m1);

// One submodule: scale-vector first layer, optional ResNet skips between
// equal-width hidden layers, linear output layer.
struct ScaledNet {
    int input_dim = 1;
    std::vector<int> widths;  // hidden affine widths m1..mL (before sfm doubling)
    Activation first_act = Activation::tanh();
    Activation hidden_act = Activation::tanh();
    bool resnet = true;
    Eigen::VectorXd lambda;  // length m1, ascending positive

    std::vector<ad::RowMat> w;        // widths.size()+1 affine layers
    std::vector<Eigen::VectorXd> b;

    static ScaledNet build(int input_dim, const std::vector<int>& widths,
                           const LambdaSpec& lambda_spec, const Activation& first_act,
                           const Activation& hidden_act, bool resnet, std::uint64_t seed);

    long n_params() const;

    // flat layout: per layer, weights row-major then biases
    void copy_params_to(Eigen::Ref<Eigen::VectorXd> flat) const;
    void copy_params_from(const Eigen::Ref<const Eigen::VectorXd>& flat);

    // Records the forward pass on the tape. base_offset locates this net's
    // block in the flat parameter vector; -1 freezes the parameters.
    ad::NodeId record(ad::Tape& tape, ad::NodeId xin, long base_offset, int sub) const;

    Eigen::VectorXd eval(const Eigen::MatrixXd& x) const;
    void forward_with_input_grad(const Eigen::MatrixXd& x, Eigen::VectorXd* y,
                                 Eigen::MatrixXd* gy) const;
};

}  // namespace sd2nn
