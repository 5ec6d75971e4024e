#pragma once

#include <Eigen/Core>
#include <string>

namespace sd2nn {

// Registered activation set. sfm is the soften Fourier mapping
// z -> s * [cos(z); sin(z)]; it doubles the feature width.
enum class Act { Tanh, Relu, Srelu, S2relu, Sfm };

struct Activation {
    Act kind = Act::Tanh;
    double s = 1.0;  // sfm relaxation parameter, in (0, 1]

    bool is_sfm() const { return kind == Act::Sfm; }
    int out_width(int in_width) const { return is_sfm() ? 2 * in_width : in_width; }

    static Activation tanh() { return {Act::Tanh, 1.0}; }
    static Activation relu() { return {Act::Relu, 1.0}; }
    static Activation srelu() { return {Act::Srelu, 1.0}; }
    static Activation s2relu() { return {Act::S2relu, 1.0}; }
    static Activation sfm(double s) { return {Act::Sfm, s}; }
};

bool operator==(const Activation& a, const Activation& b);

// "tanh", "relu", "srelu", "s2relu", "sfm(0.5)"
Activation parse_activation(const std::string& id);
std::string to_string(const Activation& a);

// Scalar value/derivatives for the elementwise activations (not sfm).
// Relu-family derivatives at the kinks follow the relu'(0) = 0 convention.
double act_value(Act kind, double z);
double act_d1(Act kind, double z);
double act_d2(Act kind, double z);

// Elementwise batch evaluation; any of v/d1/d2 may be null. Not for sfm.
void act_eval(Act kind, const Eigen::MatrixXd& z,
              Eigen::MatrixXd* v, Eigen::MatrixXd* d1, Eigen::MatrixXd* d2);

// Spec-level apply: elementwise for scalar activations, width-doubling
// s*[cos(z); sin(z)] for sfm.
Eigen::VectorXd activate(const Activation& a, const Eigen::VectorXd& z);

}  // namespace sd2nn
