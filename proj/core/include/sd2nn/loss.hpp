#pragma once

#include <Eigen/Core>

#include "sd2nn/composite.hpp"
#include "sd2nn/reference.hpp"
#include "sd2nn/sampling.hpp"

namespace sd2nn {

// The variational energy being minimized.
//   p_laplacian:        (1/p) A |grad u|^p - f u          (p >= 2)
//   poisson_boltzmann:  1/2 (A |grad u|^2 + kappa u^2) - f u
struct EnergyForm {
    enum class Kind { PLaplacian, PoissonBoltzmann };
    Kind kind = Kind::PLaplacian;
    double p = 2.0;
    FieldN A;
    FieldN kappa;
    FieldN f;

    static EnergyForm p_laplacian(double p, FieldN A, FieldN f);
    static EnergyForm poisson_boltzmann(FieldN A, FieldN kappa, FieldN f);
};

struct LossConfig {
    enum class BoundaryMode { Individual, Unified };
    double beta = 20.0;
    double gamma0 = 100.0;
    BoundaryMode boundary_mode = BoundaryMode::Individual;
    bool orthogonality = true;
    // per-node finiteness checks on the tape; training loops that inspect the
    // returned components themselves can turn this off to save a memory pass
    bool check_finite = true;
};

// staged boundary-penalty multiplier; breakpoints at 0.1, 0.2, 0.25, 0.5,
// 0.75 of t_max with levels gamma0 x {1, 10, 50, 100, 200, 500}
double gamma_schedule(long epoch, long t_max, double gamma0);

struct LossComponents {
    double total = 0.0;
    double energy = 0.0;
    double bdc = 0.0;   // individual mode: coarse boundary penalty
    double bdf = 0.0;   // individual mode: fine boundary penalty
    double bdu = 0.0;   // unified mode
    double orth = 0.0;
    double gamma = 0.0;
    bool unified = false;
    bool has_orth = false;
    bool orth_degenerate = false;  // orthogonality requested with no fine submodule
};

// Monte Carlo estimate of the energy over interior samples; volume is |Omega|
// so the estimator targets the integral rather than the mean.
double energy_term(const EnergyForm& form, const CompositeModel& model,
                   const Eigen::MatrixXd& interior, double volume);

// individual: bdc = mean (y1 - g)^2, bdf = mean (sum_k alpha_k y_{k+1})^2
void boundary_terms_individual(const CompositeModel& model, const Eigen::MatrixXd& boundary,
                               const Eigen::VectorXd& g, double* bdc, double* bdf);
// unified: mean (u - g)^2
double boundary_term_unified(const CompositeModel& model, const Eigen::MatrixXd& boundary,
                             const Eigen::VectorXd& g);

// squared MC estimate of the L2 inner product of coarse and fine parts
double orthogonality_term(const CompositeModel& model, const Eigen::MatrixXd& interior);

// Full loss of one epoch: energy + gamma(epoch) * boundary + beta * orth.
// When grad is non-null it is resized/zeroed and filled with d(total)/d(theta).
LossComponents total_loss(const EnergyForm& form, const CompositeModel& model,
                          const LossConfig& cfg, double volume, const Eigen::MatrixXd& interior,
                          const Eigen::MatrixXd& boundary, const Eigen::VectorXd& g, long epoch,
                          long t_max, Eigen::VectorXd* grad = nullptr);

}  // namespace sd2nn
