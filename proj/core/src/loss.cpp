#include "sd2nn/loss.hpp"

#include <cmath>
#include <string>

#include "sd2nn/autodiff.hpp"
#include "sd2nn/errors.hpp"

namespace sd2nn {
namespace {

constexpr double kGradFloor = 1e-30;  // keeps d/dg (g^{p/2}) bounded at g = 0 for p > 2

void check_form(const EnergyForm& form) {
    if (!form.A) throw ConfigError("energy form: coefficient A is not set");
    if (!form.f) throw ConfigError("energy form: source f is not set");
    if (form.kind == EnergyForm::Kind::PLaplacian) {
        if (!(form.p >= 2.0)) {
            throw ConfigError("energy form: unsupported exponent p = " + std::to_string(form.p) +
                              " (need p >= 2)");
        }
    } else if (!form.kappa) {
        throw ConfigError("energy form: kappa is not set");
    }
}

Eigen::VectorXd eval_field(const FieldN& field, const Eigen::MatrixXd& pts) {
    Eigen::VectorXd out(pts.rows());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) out[i] = field(pts.row(i).transpose());
    return out;
}

Eigen::VectorXd eval_coefficient(const FieldN& field, const Eigen::MatrixXd& pts) {
    Eigen::VectorXd a = eval_field(field, pts);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0)) {
            throw ConfigError("coefficient A non-positive (" + std::to_string(a[i]) +
                              ") at sample " + std::to_string(i));
        }
    }
    return a;
}

}  // namespace

EnergyForm EnergyForm::p_laplacian(double p, FieldN A, FieldN f) {
    EnergyForm form;
    form.kind = Kind::PLaplacian;
    form.p = p;
    form.A = std::move(A);
    form.f = std::move(f);
    check_form(form);
    return form;
}

EnergyForm EnergyForm::poisson_boltzmann(FieldN A, FieldN kappa, FieldN f) {
    EnergyForm form;
    form.kind = Kind::PoissonBoltzmann;
    form.p = 2.0;
    form.A = std::move(A);
    form.kappa = std::move(kappa);
    form.f = std::move(f);
    check_form(form);
    return form;
}

double gamma_schedule(long epoch, long t_max, double gamma0) {
    if (t_max <= 0) throw ConfigError("gamma schedule: t_max must be positive");
    if (epoch < 0) throw ConfigError("gamma schedule: epoch must be non-negative");
    // Exact integer comparisons against the 0.1/0.2/0.25/0.5/0.75 breakpoints,
    // each interval closed on the left.
    if (10 * epoch < t_max) return gamma0;
    if (5 * epoch < t_max) return 10.0 * gamma0;
    if (4 * epoch < t_max) return 50.0 * gamma0;
    if (2 * epoch < t_max) return 100.0 * gamma0;
    if (4 * epoch < 3 * t_max) return 200.0 * gamma0;
    return 500.0 * gamma0;
}

double energy_term(const EnergyForm& form, const CompositeModel& model,
                   const Eigen::MatrixXd& interior, double volume) {
    check_form(form);
    if (interior.rows() == 0) throw ConfigError("energy term: empty interior sample");
    const Eigen::VectorXd a = eval_coefficient(form.A, interior);
    const Eigen::VectorXd f = eval_field(form.f, interior);

    Eigen::VectorXd u, gu2;
    {
        Eigen::VectorXd total;
        Eigen::MatrixXd grad_total;
        model.eval_parts_with_grad(interior, &total, nullptr, &grad_total, nullptr);
        u = std::move(total);
        gu2 = grad_total.rowwise().squaredNorm();
    }

    double acc = 0.0;
    const Eigen::Index n = interior.rows();
    if (form.kind == EnergyForm::Kind::PLaplacian) {
        if (form.p == 2.0) {
            for (Eigen::Index i = 0; i < n; ++i) acc += 0.5 * a[i] * gu2[i] - f[i] * u[i];
        } else {
            const double half_p = form.p / 2.0;
            for (Eigen::Index i = 0; i < n; ++i)
                acc += a[i] / form.p * std::pow(gu2[i] + kGradFloor, half_p) - f[i] * u[i];
        }
    } else {
        const Eigen::VectorXd kap = eval_field(form.kappa, interior);
        for (Eigen::Index i = 0; i < n; ++i)
            acc += 0.5 * (a[i] * gu2[i] + kap[i] * u[i] * u[i]) - f[i] * u[i];
    }
    return volume * acc / static_cast<double>(n);
}

void boundary_terms_individual(const CompositeModel& model, const Eigen::MatrixXd& boundary,
                               const Eigen::VectorXd& g, double* bdc, double* bdf) {
    if (boundary.rows() == 0) throw ConfigError("boundary term: empty boundary sample");
    if (g.size() != boundary.rows())
        throw ConfigError("boundary term: g length does not match boundary sample count");
    Eigen::VectorXd total;
    Eigen::MatrixXd parts;
    model.eval_parts(boundary, &total, &parts);
    const Eigen::VectorXd coarse = parts.col(0);
    const Eigen::VectorXd fine = total - coarse;
    if (bdc) *bdc = (coarse - g).squaredNorm() / static_cast<double>(boundary.rows());
    if (bdf) *bdf = fine.squaredNorm() / static_cast<double>(boundary.rows());
}

double boundary_term_unified(const CompositeModel& model, const Eigen::MatrixXd& boundary,
                             const Eigen::VectorXd& g) {
    if (boundary.rows() == 0) throw ConfigError("boundary term: empty boundary sample");
    if (g.size() != boundary.rows())
        throw ConfigError("boundary term: g length does not match boundary sample count");
    Eigen::VectorXd total;
    model.eval_parts(boundary, &total, nullptr);
    return (total - g).squaredNorm() / static_cast<double>(boundary.rows());
}

double orthogonality_term(const CompositeModel& model, const Eigen::MatrixXd& interior) {
    if (model.n_fine() == 0) return 0.0;
    if (interior.rows() == 0) throw ConfigError("orthogonality term: empty interior sample");
    Eigen::VectorXd total;
    Eigen::MatrixXd parts;
    model.eval_parts(interior, &total, &parts);
    const Eigen::VectorXd coarse = parts.col(0);
    const double ip = coarse.dot(total - coarse) / static_cast<double>(interior.rows());
    return ip * ip;
}

LossComponents total_loss(const EnergyForm& form, const CompositeModel& model,
                          const LossConfig& cfg, double volume, const Eigen::MatrixXd& interior,
                          const Eigen::MatrixXd& boundary, const Eigen::VectorXd& g, long epoch,
                          long t_max, Eigen::VectorXd* grad) {
    check_form(form);
    if (interior.rows() == 0) throw ConfigError("total loss: empty interior sample");
    if (boundary.rows() == 0) throw ConfigError("total loss: empty boundary sample");
    if (interior.cols() != model.input_dim() || boundary.cols() != model.input_dim())
        throw ConfigError("total loss: sample dimension does not match model input dimension");
    if (g.size() != boundary.rows())
        throw ConfigError("total loss: g length does not match boundary sample count");
    if (!(cfg.beta >= 0.0)) throw ConfigError("total loss: beta must be >= 0");
    if (!(volume > 0.0)) throw ConfigError("total loss: domain volume must be positive");

    const Eigen::VectorXd a = eval_coefficient(form.A, interior);
    const Eigen::VectorXd f = eval_field(form.f, interior);

    LossComponents out;
    out.gamma = gamma_schedule(epoch, t_max, cfg.gamma0);
    out.unified = cfg.boundary_mode == LossConfig::BoundaryMode::Unified;
    out.has_orth = cfg.orthogonality;

    const bool train = grad != nullptr;
    ad::Tape tape(cfg.check_finite);

    // interior pass (with spatial tangents for |grad u|^2)
    const ad::NodeId xin = tape.input(interior, true);
    const CompositeModel::Recorded rec_i = model.record(tape, xin, train);
    const ad::NodeId gsn = tape.grad_sq_norm(rec_i.total);

    ad::NodeId energy_node;
    if (form.kind == EnergyForm::Kind::PLaplacian && form.p == 2.0) {
        energy_node = tape.mean_scaled(tape.cmul(gsn, a), 0.5 * volume);
    } else if (form.kind == EnergyForm::Kind::PLaplacian) {
        const ad::NodeId gp = tape.pow_shifted(gsn, form.p / 2.0, kGradFloor);
        energy_node = tape.mean_scaled(tape.cmul(gp, a), volume / form.p);
    } else {
        const Eigen::VectorXd kap = eval_field(form.kappa, interior);
        const ad::NodeId e_grad = tape.mean_scaled(tape.cmul(gsn, a), 0.5 * volume);
        const ad::NodeId usq = tape.mul(rec_i.total, rec_i.total);
        const ad::NodeId e_kap = tape.mean_scaled(tape.cmul(usq, kap), 0.5 * volume);
        energy_node = tape.add(e_grad, e_kap);
    }
    energy_node =
        tape.add(energy_node, tape.mean_scaled(tape.cmul(rec_i.total, f), -volume));

    // boundary pass (values only, no spatial tangents needed)
    const ad::NodeId xbd = tape.input(boundary, false);
    const CompositeModel::Recorded rec_b = model.record(tape, xbd, train);

    ad::NodeId boundary_node;
    if (out.unified) {
        const ad::NodeId diff = tape.shift(rec_b.total, -g);
        boundary_node = tape.mean_scaled(tape.mul(diff, diff), 1.0);
        out.bdu = tape.scalar(boundary_node);
    } else {
        const ad::NodeId diff_c = tape.shift(rec_b.coarse, -g);
        const ad::NodeId bdc_node = tape.mean_scaled(tape.mul(diff_c, diff_c), 1.0);
        out.bdc = tape.scalar(bdc_node);
        if (rec_b.fine_sum >= 0) {
            const ad::NodeId bdf_node =
                tape.mean_scaled(tape.mul(rec_b.fine_sum, rec_b.fine_sum), 1.0);
            out.bdf = tape.scalar(bdf_node);
            boundary_node = tape.add(bdc_node, bdf_node);
        } else {
            boundary_node = bdc_node;
        }
    }

    ad::NodeId total_node = tape.axpy(1.0, energy_node, out.gamma, boundary_node);

    if (cfg.orthogonality) {
        if (rec_i.fine_sum >= 0) {
            const ad::NodeId prod = tape.mul(rec_i.coarse, rec_i.fine_sum);
            const ad::NodeId ip = tape.mean_scaled(prod, 1.0);
            const ad::NodeId orth_node = tape.mul(ip, ip);
            out.orth = tape.scalar(orth_node);
            total_node = tape.axpy(1.0, total_node, cfg.beta, orth_node);
        } else {
            out.orth_degenerate = true;  // nothing to penalize; term is identically zero
        }
    }

    out.energy = tape.scalar(energy_node);
    out.total = tape.scalar(total_node);

    if (grad) {
        grad->setZero(static_cast<Eigen::Index>(model.n_params()));
        tape.backward(total_node, *grad);
    }
    return out;
}

}  // namespace sd2nn
