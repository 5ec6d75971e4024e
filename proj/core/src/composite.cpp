#include "sd2nn/composite.hpp"

#include <string>

#include "sd2nn/errors.hpp"

namespace sd2nn {

long CompositeModel::n_params() const {
    long n = 0;
    for (const auto& net : nets) n += net.n_params();
    return n;
}

long CompositeModel::offset_of(int sub) const {
    long off = 0;
    for (int k = 0; k < sub; ++k) off += nets[k].n_params();
    return off;
}

void CompositeModel::validate() const {
    if (nets.empty()) throw ConfigError("model: at least one submodule required");
    if (alphas.size() != nets.size() - 1)
        throw ConfigError("model: alpha list length " + std::to_string(alphas.size()) +
                          " does not match fine submodule count " +
                          std::to_string(nets.size() - 1));
    for (double a : alphas)
        if (!(a > 0.0)) throw ConfigError("model: balance factors must be > 0");
    for (const auto& net : nets)
        if (net.input_dim != nets[0].input_dim)
            throw ConfigError("model: submodules disagree on input dimension");
}

Eigen::VectorXd CompositeModel::params_flat() const {
    Eigen::VectorXd flat(n_params());
    long off = 0;
    for (const auto& net : nets) {
        net.copy_params_to(flat.segment(off, net.n_params()));
        off += net.n_params();
    }
    return flat;
}

void CompositeModel::set_params_flat(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    if (flat.size() != n_params()) throw ConfigError("model: flat parameter size mismatch");
    long off = 0;
    for (auto& net : nets) {
        net.copy_params_from(flat.segment(off, net.n_params()));
        off += net.n_params();
    }
}

CompositeModel::Recorded CompositeModel::record(ad::Tape& tape, ad::NodeId xin,
                                                bool train) const {
    Recorded rec;
    long off = 0;
    for (std::size_t k = 0; k < nets.size(); ++k) {
        rec.raw.push_back(
            nets[k].record(tape, xin, train ? off : -1, static_cast<int>(k)));
        off += nets[k].n_params();
    }
    rec.coarse = rec.raw[0];
    if (nets.size() == 1) {
        rec.total = rec.coarse;
        return rec;
    }
    ad::NodeId fine = tape.scale_const(alphas[0], rec.raw[1]);
    for (std::size_t k = 2; k < nets.size(); ++k)
        fine = tape.axpy(1.0, fine, alphas[k - 1], rec.raw[k]);
    rec.fine_sum = fine;
    rec.total = tape.add(rec.coarse, fine);
    return rec;
}

void CompositeModel::eval_parts(const Eigen::MatrixXd& x, Eigen::VectorXd* total,
                                Eigen::MatrixXd* parts) const {
    Eigen::MatrixXd p(x.rows(), nets.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const double wgt = (k == 0) ? 1.0 : alphas[k - 1];
        p.col(k) = wgt * nets[k].eval(x);
    }
    if (total) *total = p.rowwise().sum();
    if (parts) *parts = std::move(p);
}

void CompositeModel::eval_parts_with_grad(const Eigen::MatrixXd& x, Eigen::VectorXd* total,
                                          Eigen::MatrixXd* parts, Eigen::MatrixXd* grad_total,
                                          std::vector<Eigen::MatrixXd>* grad_parts) const {
    Eigen::MatrixXd p(x.rows(), nets.size());
    std::vector<Eigen::MatrixXd> gp(nets.size());
    for (std::size_t k = 0; k < nets.size(); ++k) {
        const double wgt = (k == 0) ? 1.0 : alphas[k - 1];
        Eigen::VectorXd y;
        Eigen::MatrixXd gy;
        nets[k].forward_with_input_grad(x, &y, &gy);
        p.col(k) = wgt * y;
        gp[k] = wgt * gy;
    }
    if (grad_total) {
        grad_total->setZero(x.rows(), x.cols());
        for (const auto& g : gp) *grad_total += g;
    }
    if (total) *total = p.rowwise().sum();
    if (parts) *parts = std::move(p);
    if (grad_parts) *grad_parts = std::move(gp);
}

double loss_gradient(const CompositeModel& model,
                     const std::function<ad::NodeId(ad::Tape&)>& record_loss,
                     Eigen::Ref<Eigen::VectorXd> grad) {
    if (grad.size() != model.n_params())
        throw ConfigError("loss_gradient: gradient vector size mismatch");
    ad::Tape tape;
    ad::NodeId root = record_loss(tape);
    tape.backward(root, grad);
    return tape.scalar(root);
}

}  // namespace sd2nn
