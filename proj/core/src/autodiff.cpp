#include "sd2nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "sd2nn/errors.hpp"

namespace sd2nn::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Affine: return "affine";
        case Op::Scale: return "scale";
        case Op::ActScalar: return "activation";
        case Op::ActSfm: return "sfm";
        case Op::Add: return "add";
        case Op::Axpy: return "axpy";
        case Op::ScaleConst: return "scale_const";
        case Op::Mul: return "mul";
        case Op::CmulVec: return "cmul";
        case Op::ShiftVec: return "shift";
        case Op::PowShift: return "pow";
        case Op::GradSqNorm: return "grad_sq_norm";
        case Op::MeanScaled: return "mean";
    }
    return "?";
}

namespace {

std::string where(const Node& n) {
    std::string s = op_name(n.op);
    if (n.sub >= 0) s += " (submodule " + std::to_string(n.sub);
    if (n.layer >= 0) s += ", layer " + std::to_string(n.layer);
    if (n.sub >= 0) s += ")";
    return s;
}

// NaN and Inf both poison an IEEE sum, so one vectorized reduction usually
// settles the question; the exact scan only runs when the sum overflows.
bool finite(const Matrix& m) {
    if (std::isfinite(m.sum())) return true;
    return m.allFinite();
}

}  // namespace

NodeId Tape::push(Node&& n) {
    if (check_finite_) {
        bool ok = finite(n.out.value);
        for (const auto& t : n.out.tangent) ok = ok && finite(t);
        if (!ok) throw NumericError("non-finite values in " + where(n));
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::forward_one(const Node& n, DualBatch& out) const {
    switch (n.op) {
        case Op::Input: {
            // value preset by the builder; rebuild the per-sample identity tangents
            if (!n.out.tangent.empty() || out.has_tangent()) {
                const auto batch = out.value.rows();
                const auto d = out.value.cols();
                out.tangent.assign(d, Matrix::Zero(batch, d));
                for (Eigen::Index j = 0; j < d; ++j) out.tangent[j].col(j).setOnes();
            }
            return;
        }
        case Op::Affine: {
            const DualBatch& p = nodes_[n.a].out;
            out.value.noalias() = p.value * n.w->transpose();
            out.value.rowwise() += n.bias->transpose();
            out.tangent.resize(p.tangent.size());
            for (std::size_t j = 0; j < p.tangent.size(); ++j)
                out.tangent[j].noalias() = p.tangent[j] * n.w->transpose();
            return;
        }
        case Op::Scale: {
            const DualBatch& p = nodes_[n.a].out;
            auto lamt = n.lam.transpose().array();
            out.value = p.value.array().rowwise() * lamt;
            out.tangent.resize(p.tangent.size());
            for (std::size_t j = 0; j < p.tangent.size(); ++j)
                out.tangent[j] = p.tangent[j].array().rowwise() * lamt;
            return;
        }
        case Op::ActScalar: {
            const DualBatch& p = nodes_[n.a].out;
            Matrix d1;
            act_eval(n.act, p.value, &out.value, &d1, nullptr);
            out.tangent.resize(p.tangent.size());
            for (std::size_t j = 0; j < p.tangent.size(); ++j)
                out.tangent[j] = d1.cwiseProduct(p.tangent[j]);
            return;
        }
        case Op::ActSfm: {
            const DualBatch& p = nodes_[n.a].out;
            const auto batch = p.value.rows();
            const auto w = p.value.cols();
            out.value.resize(batch, 2 * w);
            {
                // one fused loop so the compiler folds cos+sin of the same
                // argument into a single sincos call
                const double* __restrict zp = p.value.data();
                double* __restrict cv = out.value.data();
                double* __restrict sv = out.value.data() + batch * w;
                const double s = n.sfm_s;
                const Eigen::Index m = batch * w;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double z = zp[i];
                    cv[i] = s * std::cos(z);
                    sv[i] = s * std::sin(z);
                }
            }
            out.tangent.resize(p.tangent.size());
            for (std::size_t j = 0; j < p.tangent.size(); ++j) {
                out.tangent[j].resize(batch, 2 * w);
                out.tangent[j].leftCols(w) =
                    -out.value.rightCols(w).cwiseProduct(p.tangent[j]);
                out.tangent[j].rightCols(w) =
                    out.value.leftCols(w).cwiseProduct(p.tangent[j]);
            }
            return;
        }
        case Op::Add:
        case Op::Axpy: {
            const DualBatch& pa = nodes_[n.a].out;
            const DualBatch& pb = nodes_[n.b].out;
            out.value = n.ca * pa.value + n.cb * pb.value;
            if (pa.has_tangent() != pb.has_tangent())
                throw TapeError("add: mixed tangent presence");
            out.tangent.resize(pa.tangent.size());
            for (std::size_t j = 0; j < pa.tangent.size(); ++j)
                out.tangent[j] = n.ca * pa.tangent[j] + n.cb * pb.tangent[j];
            return;
        }
        case Op::ScaleConst: {
            const DualBatch& p = nodes_[n.a].out;
            out.value = n.ca * p.value;
            out.tangent.resize(p.tangent.size());
            for (std::size_t j = 0; j < p.tangent.size(); ++j)
                out.tangent[j] = n.ca * p.tangent[j];
            return;
        }
        case Op::Mul: {
            const DualBatch& pa = nodes_[n.a].out;
            const DualBatch& pb = nodes_[n.b].out;
            out.value = pa.value.cwiseProduct(pb.value);
            return;  // the product drops the input-derivative channel
        }
        case Op::CmulVec: {
            const DualBatch& p = nodes_[n.a].out;
            out.value = p.value.col(0).cwiseProduct(n.cvec);
            return;
        }
        case Op::ShiftVec: {
            const DualBatch& p = nodes_[n.a].out;
            out.value = p.value.col(0) + n.cvec;
            return;
        }
        case Op::PowShift: {
            const DualBatch& p = nodes_[n.a].out;
            out.value = (p.value.array() + n.cb).pow(n.ca);
            return;
        }
        case Op::GradSqNorm: {
            const DualBatch& p = nodes_[n.a].out;
            out.value = Matrix::Zero(p.value.rows(), 1);
            for (const auto& t : p.tangent)
                out.value.col(0).array() += t.col(0).array().square();
            return;
        }
        case Op::MeanScaled: {
            const DualBatch& p = nodes_[n.a].out;
            out.value.resize(1, 1);
            out.value(0, 0) = n.ca * p.value.col(0).mean();
            return;
        }
    }
    throw TapeError("forward_one: unknown op");
}

NodeId Tape::input(const Matrix& x, bool with_input_grad) {
    Node n;
    n.op = Op::Input;
    n.out.value = x;
    if (with_input_grad) {
        const auto batch = x.rows();
        const auto d = x.cols();
        n.out.tangent.assign(d, Matrix::Zero(batch, d));
        for (Eigen::Index j = 0; j < d; ++j) n.out.tangent[j].col(j).setOnes();
    }
    return push(std::move(n));
}

NodeId Tape::affine(NodeId a, const RowMat& w, const Eigen::VectorXd& b,
                    long w_offset, long b_offset, int sub, int layer) {
    if (nodes_[a].out.value.cols() != w.cols())
        throw ConfigError("affine: input width " + std::to_string(nodes_[a].out.value.cols()) +
                          " does not match weight shape " + std::to_string(w.rows()) + "x" +
                          std::to_string(w.cols()) +
                          (sub >= 0 ? " (submodule " + std::to_string(sub) + ", layer " +
                                          std::to_string(layer) + ")"
                                    : ""));
    if (w.rows() != b.size()) throw ConfigError("affine: bias length does not match weight rows");
    Node n;
    n.op = Op::Affine;
    n.a = a;
    n.w = &w;
    n.bias = &b;
    n.w_offset = w_offset;
    n.b_offset = b_offset;
    n.sub = sub;
    n.layer = layer;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, const Eigen::VectorXd& lambda, int sub) {
    if (nodes_[a].out.value.cols() != lambda.size())
        throw ConfigError("scale: lambda length " + std::to_string(lambda.size()) +
                          " does not match width " + std::to_string(nodes_[a].out.value.cols()));
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.lam = lambda;
    n.sub = sub;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::activation(NodeId a, const Activation& act, int sub, int layer) {
    Node n;
    n.a = a;
    n.sub = sub;
    n.layer = layer;
    if (act.is_sfm()) {
        n.op = Op::ActSfm;
        n.sfm_s = act.s;
        forward_one(n, n.out);
        return push(std::move(n));
    }
    n.op = Op::ActScalar;
    n.act = act.kind;
    // cache derivative values for the reverse sweep (second derivative only
    // needed where the tangent channel passes through)
    const DualBatch& p = nodes_[a].out;
    act_eval(n.act, p.value, &n.out.value, &n.act_d1,
             p.has_tangent() ? &n.act_d2 : nullptr);
    n.out.tangent.resize(p.tangent.size());
    for (std::size_t j = 0; j < p.tangent.size(); ++j)
        n.out.tangent[j] = n.act_d1.cwiseProduct(p.tangent[j]);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return axpy(1.0, a, 1.0, b); }

NodeId Tape::axpy(double ca, NodeId a, double cb, NodeId b) {
    if (nodes_[a].out.value.rows() != nodes_[b].out.value.rows() ||
        nodes_[a].out.value.cols() != nodes_[b].out.value.cols())
        throw ConfigError("add: shape mismatch");
    Node n;
    n.op = Op::Axpy;
    n.a = a;
    n.b = b;
    n.ca = ca;
    n.cb = cb;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::scale_const(double c, NodeId a) {
    Node n;
    n.op = Op::ScaleConst;
    n.a = a;
    n.ca = c;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    if (nodes_[a].out.value.rows() != nodes_[b].out.value.rows() ||
        nodes_[a].out.value.cols() != nodes_[b].out.value.cols())
        throw ConfigError("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::cmul(NodeId a, const Eigen::VectorXd& c) {
    if (nodes_[a].out.value.cols() != 1) throw TapeError("cmul: width-1 node required");
    if (nodes_[a].out.value.rows() != c.size()) throw ConfigError("cmul: batch mismatch");
    Node n;
    n.op = Op::CmulVec;
    n.a = a;
    n.cvec = c;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::shift(NodeId a, const Eigen::VectorXd& c) {
    if (nodes_[a].out.value.cols() != 1) throw TapeError("shift: width-1 node required");
    if (nodes_[a].out.value.rows() != c.size()) throw ConfigError("shift: batch mismatch");
    Node n;
    n.op = Op::ShiftVec;
    n.a = a;
    n.cvec = c;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::pow_shifted(NodeId a, double expo, double shift) {
    Node n;
    n.op = Op::PowShift;
    n.a = a;
    n.ca = expo;
    n.cb = shift;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::grad_sq_norm(NodeId a) {
    if (nodes_[a].out.value.cols() != 1) throw TapeError("grad_sq_norm: width-1 node required");
    if (!nodes_[a].out.has_tangent())
        throw TapeError("grad_sq_norm: node carries no input-derivative channel");
    Node n;
    n.op = Op::GradSqNorm;
    n.a = a;
    forward_one(n, n.out);
    return push(std::move(n));
}

NodeId Tape::mean_scaled(NodeId a, double factor) {
    if (nodes_[a].out.value.cols() != 1) throw TapeError("mean_scaled: width-1 node required");
    Node n;
    n.op = Op::MeanScaled;
    n.a = a;
    n.ca = factor;
    forward_one(n, n.out);
    return push(std::move(n));
}

double Tape::scalar(NodeId id) const {
    const Matrix& v = nodes_[id].out.value;
    if (v.rows() != 1 || v.cols() != 1) throw TapeError("scalar: node is not 1x1");
    return v(0, 0);
}

namespace {

void ensure_vbar(Node& n) {
    if (!n.vbar_set) {
        n.vbar.setZero(n.out.value.rows(), n.out.value.cols());
        n.vbar_set = true;
    }
}

// The first contribution to an adjoint assigns, later ones accumulate; this
// skips the zero fill that would otherwise dominate the reverse sweep.
template <typename Expr>
void add_vbar(Node& n, const Expr& e) {
    if (n.vbar_set) {
        n.vbar.noalias() += e;
    } else {
        n.vbar.noalias() = e;
        n.vbar_set = true;
    }
}

void prepare_tbar(Node& n) {
    if (n.tbar.empty()) {
        n.tbar.resize(n.out.tangent.size());
        n.tbar_set.assign(n.out.tangent.size(), 0);
    }
}

template <typename Expr>
void add_tbar(Node& n, std::size_t j, const Expr& e) {
    prepare_tbar(n);
    if (n.tbar_set[j]) {
        n.tbar[j].noalias() += e;
    } else {
        n.tbar[j].noalias() = e;
        n.tbar_set[j] = 1;
    }
}

bool has_adjoint(const Node& n) {
    if (n.vbar_set) return true;
    for (auto s : n.tbar_set)
        if (s) return true;
    return false;
}

}  // namespace

void Tape::backward(NodeId root, Eigen::Ref<Eigen::VectorXd> grad) {
    Node& r = nodes_[root];
    if (r.out.value.rows() != 1 || r.out.value.cols() != 1)
        throw TapeError("backward: root must be a 1x1 scalar node");
    // drop adjoints left over from an earlier sweep over this tape
    for (Node& n : nodes_) {
        n.vbar_set = false;
        std::fill(n.tbar_set.begin(), n.tbar_set.end(), std::uint8_t{0});
    }
    ensure_vbar(r);
    r.vbar(0, 0) = 1.0;

    for (NodeId i = root; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!has_adjoint(n)) continue;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Affine: {
                Node& p = nodes_[n.a];
                const bool train = n.w_offset >= 0;
                if (n.vbar_set) {
                    add_vbar(p, n.vbar * (*n.w));
                    if (train) {
                        Eigen::Map<RowMat> gw(grad.data() + n.w_offset, n.w->rows(), n.w->cols());
                        gw.noalias() += n.vbar.transpose() * p.out.value;
                        Eigen::Map<Eigen::VectorXd> gb(grad.data() + n.b_offset, n.bias->size());
                        gb.noalias() += n.vbar.colwise().sum().transpose();
                    }
                }
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    add_tbar(p, j, n.tbar[j] * (*n.w));
                    if (train) {
                        Eigen::Map<RowMat> gw(grad.data() + n.w_offset, n.w->rows(), n.w->cols());
                        gw.noalias() += n.tbar[j].transpose() * p.out.tangent[j];
                    }
                }
                break;
            }
            case Op::Scale: {
                Node& p = nodes_[n.a];
                auto lamt = n.lam.transpose().array();
                if (n.vbar_set)
                    add_vbar(p, (n.vbar.array().rowwise() * lamt).matrix());
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    add_tbar(p, j, (n.tbar[j].array().rowwise() * lamt).matrix());
                }
                break;
            }
            case Op::ActScalar: {
                Node& p = nodes_[n.a];
                if (n.vbar_set)
                    add_vbar(p, (n.vbar.array() * n.act_d1.array()).matrix());
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    add_vbar(
                        p,
                        (n.tbar[j].array() * n.act_d2.array() * p.out.tangent[j].array())
                            .matrix());
                    add_tbar(p, j, (n.tbar[j].array() * n.act_d1.array()).matrix());
                }
                break;
            }
            case Op::ActSfm: {
                Node& p = nodes_[n.a];
                const auto w = p.out.value.cols();
                auto cosh = n.out.value.leftCols(w).array();
                auto sinh = n.out.value.rightCols(w).array();
                if (n.vbar_set)
                    add_vbar(p, (n.vbar.leftCols(w).array() * (-sinh) +
                                 n.vbar.rightCols(w).array() * cosh)
                                    .matrix());
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    auto tb_c = n.tbar[j].leftCols(w).array();
                    auto tb_s = n.tbar[j].rightCols(w).array();
                    auto t = p.out.tangent[j].array();
                    add_vbar(p, (tb_c * (-cosh) * t + tb_s * (-sinh) * t).matrix());
                    add_tbar(p, j, (tb_c * (-sinh) + tb_s * cosh).matrix());
                }
                break;
            }
            case Op::Add:
            case Op::Axpy: {
                Node& p = nodes_[n.a];
                Node& q = nodes_[n.b];
                if (n.vbar_set) {
                    add_vbar(p, n.ca * n.vbar);
                    add_vbar(q, n.cb * n.vbar);
                }
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    add_tbar(p, j, n.ca * n.tbar[j]);
                    add_tbar(q, j, n.cb * n.tbar[j]);
                }
                break;
            }
            case Op::ScaleConst: {
                Node& p = nodes_[n.a];
                if (n.vbar_set) add_vbar(p, n.ca * n.vbar);
                for (std::size_t j = 0; j < n.tbar_set.size(); ++j) {
                    if (!n.tbar_set[j]) continue;
                    add_tbar(p, j, n.ca * n.tbar[j]);
                }
                break;
            }
            case Op::Mul: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                Node& q = nodes_[n.b];
                add_vbar(p, (n.vbar.array() * q.out.value.array()).matrix());
                add_vbar(q, (n.vbar.array() * p.out.value.array()).matrix());
                break;
            }
            case Op::CmulVec: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                add_vbar(p, (n.vbar.col(0).array() * n.cvec.array()).matrix());
                break;
            }
            case Op::ShiftVec: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                add_vbar(p, n.vbar.col(0));
                break;
            }
            case Op::PowShift: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                add_vbar(p, (n.vbar.array() * n.ca *
                             (p.out.value.array() + n.cb).pow(n.ca - 1.0))
                                .matrix());
                break;
            }
            case Op::GradSqNorm: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                for (std::size_t j = 0; j < p.out.tangent.size(); ++j) {
                    add_tbar(p, j,
                             (2.0 * n.vbar.col(0).array() *
                              p.out.tangent[j].col(0).array())
                                 .matrix());
                }
                break;
            }
            case Op::MeanScaled: {
                if (!n.vbar_set) break;
                Node& p = nodes_[n.a];
                const double c = n.ca * n.vbar(0, 0) / static_cast<double>(p.out.value.rows());
                add_vbar(p, Matrix::Constant(p.out.value.rows(), 1, c));
                break;
            }
        }
    }
}

bool Tape::replay_matches() const {
    for (const Node& n : nodes_) {
        DualBatch out;
        if (n.op == Op::Input) {
            out.value = n.out.value;
            if (n.out.has_tangent()) out.tangent.resize(n.out.tangent.size());
        }
        forward_one(n, out);
        if (out.value.rows() != n.out.value.rows() || out.value.cols() != n.out.value.cols())
            return false;
        if (std::memcmp(out.value.data(), n.out.value.data(),
                        sizeof(double) * out.value.size()) != 0)
            return false;
        if (out.tangent.size() != n.out.tangent.size()) return false;
        for (std::size_t j = 0; j < out.tangent.size(); ++j)
            if (std::memcmp(out.tangent[j].data(), n.out.tangent[j].data(),
                            sizeof(double) * out.tangent[j].size()) != 0)
                return false;
    }
    return true;
}

}  // namespace sd2nn::ad
