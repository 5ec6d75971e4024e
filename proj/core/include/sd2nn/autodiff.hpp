#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sd2nn/activation.hpp"

namespace sd2nn::ad {

using Matrix = Eigen::MatrixXd;
// weights live row-major so flat-parameter gradients map onto them without copies
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using NodeId = int;

// A batch of values together with its derivatives w.r.t. each input coordinate.
// tangent[j](i, k) = d value(i, k) / d x_j for sample i.
struct DualBatch {
    Matrix value;
    std::vector<Matrix> tangent;

    bool has_tangent() const { return !tangent.empty(); }
    int dim() const { return static_cast<int>(tangent.size()); }
};

enum class Op : std::uint8_t {
    Input,
    Affine,      // value * W^T + b
    Scale,       // columnwise multiply by a fixed vector (frequency scaling)
    ActScalar,   // elementwise activation
    ActSfm,      // z -> s * [cos z, sin z], doubles the width
    Add,         // a + b (kept distinct from Axpy only in name; both use ca, cb)
    Axpy,        // ca * a + cb * b
    ScaleConst,  // ca * a
    Mul,         // elementwise a * b, drops the tangent channel
    CmulVec,     // elementwise multiply a width-1 node by a per-sample constant
    ShiftVec,    // add a per-sample constant to a width-1 node
    PowShift,    // (a + cb)^ca, drops the tangent channel
    GradSqNorm,  // sum_j tangent_j^2 of a width-1 node; consumes the tangents
    MeanScaled   // ca * mean over the batch of a width-1 node -> 1x1
};

const char* op_name(Op op);

struct Node {
    Op op = Op::Input;
    NodeId a = -1;
    NodeId b = -1;
    DualBatch out;

    // Affine payload: non-owning views into the model's parameter storage.
    // w_offset/b_offset locate the block inside the flat parameter vector,
    // or -1 for frozen parameters.
    const RowMat* w = nullptr;
    const Eigen::VectorXd* bias = nullptr;
    long w_offset = -1;
    long b_offset = -1;

    Eigen::VectorXd lam;   // Scale
    Act act = Act::Tanh;   // ActScalar
    double sfm_s = 1.0;    // ActSfm
    Matrix act_d1, act_d2; // cached activation derivatives for the reverse sweep
    double ca = 1.0;       // Axpy / ScaleConst / PowShift exponent / MeanScaled factor
    double cb = 1.0;       // Axpy / PowShift shift
    Eigen::VectorXd cvec;  // CmulVec / ShiftVec

    int sub = -1;    // submodule index, for diagnostics
    int layer = -1;  // layer index, for diagnostics

    // reverse-sweep accumulators, allocated lazily
    Matrix vbar;
    std::vector<Matrix> tbar;
    bool vbar_set = false;
    std::vector<std::uint8_t> tbar_set;
};

// Recording tape for one forward pass over a batch. Forward-mode tangents
// w.r.t. the input coordinates are taped as ordinary intermediates, so the
// reverse sweep differentiates losses that contain the spatial gradient of
// the network output with respect to every trainable parameter.
class Tape {
   public:
    explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

    NodeId input(const Matrix& x, bool with_input_grad);
    NodeId affine(NodeId a, const RowMat& w, const Eigen::VectorXd& b, long w_offset,
                  long b_offset, int sub = -1, int layer = -1);
    NodeId scale(NodeId a, const Eigen::VectorXd& lambda, int sub = -1);
    NodeId activation(NodeId a, const Activation& act, int sub = -1, int layer = -1);
    NodeId add(NodeId a, NodeId b);
    NodeId axpy(double ca, NodeId a, double cb, NodeId b);
    NodeId scale_const(double c, NodeId a);
    NodeId mul(NodeId a, NodeId b);
    NodeId cmul(NodeId a, const Eigen::VectorXd& c);
    NodeId shift(NodeId a, const Eigen::VectorXd& c);
    NodeId pow_shifted(NodeId a, double expo, double shift);
    NodeId grad_sq_norm(NodeId a);
    NodeId mean_scaled(NodeId a, double factor);

    const Matrix& value(NodeId id) const { return nodes_[id].out.value; }
    const std::vector<Matrix>& tangents(NodeId id) const { return nodes_[id].out.tangent; }
    double scalar(NodeId id) const;

    // Accumulates d(root)/d(theta) into grad for every affine node recorded
    // with a non-negative parameter offset. grad must be pre-sized and zeroed
    // by the caller (losses sum gradients across several roots).
    void backward(NodeId root, Eigen::Ref<Eigen::VectorXd> grad);

    // Re-runs every recorded op against the stored parents and compares
    // bit-for-bit; the determinism self-check.
    bool replay_matches() const;

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

   private:
    NodeId push(Node&& n);
    void forward_one(const Node& n, DualBatch& out) const;

    std::vector<Node> nodes_;
    bool check_finite_;
};

}  // namespace sd2nn::ad
