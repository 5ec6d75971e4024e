#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sd2nn/composite.hpp"
#include "sd2nn/loss.hpp"
#include "sd2nn/optimizer.hpp"
#include "sd2nn/reference.hpp"
#include "sd2nn/sampling.hpp"

namespace sd2nn {

// The five model families compared in the benchmarks, plus the two
// relaxation-parameter variants of SD2NN2.
enum class FamilyId { DNN, Mscale, WWP, SD2NN1, SD2NN2, SD2NN3, SD2NN2a, SD2NN2b };

FamilyId parse_family(const std::string& id);
std::string to_string(FamilyId id);

enum class BenchmarkId { Lin1d, Nonlin1dP8, ThreeScale, Coeff2d, Pb3d };

BenchmarkId parse_benchmark(const std::string& id);
std::string to_string(BenchmarkId id);

struct SubmoduleSpec {
    std::vector<int> widths;  // hidden affine widths
    LambdaSpec lambda;
    Activation first_act = Activation::tanh();
    Activation hidden_act = Activation::tanh();
};

// A family resolved to concrete submodule architectures for one benchmark.
struct ModelFamily {
    FamilyId id = FamilyId::SD2NN2;
    std::vector<SubmoduleSpec> subs;  // [0] coarse, then meso/fine
    std::vector<double> alphas;       // length subs.size() - 1
    LossConfig::BoundaryMode boundary_mode = LossConfig::BoundaryMode::Individual;
    bool orthogonality = true;
    bool resnet = true;

    int n_subs() const { return static_cast<int>(subs.size()); }

    // Architecture defaults for (family, benchmark) at full published width.
    static ModelFamily table_defaults(FamilyId id, BenchmarkId bench);

    // width -> max(1, llround(width / divisor)); the lambda bands are kept and
    // re-fitted to the narrower first layers at build time
    void scale_widths(double divisor);

    // Builds the submodules with per-(seed, submodule) initialization streams.
    CompositeModel build(int input_dim, std::uint64_t seed) const;
};

// One benchmark problem: domain, energy, boundary data, reference solution.
struct BenchmarkDef {
    BenchmarkId id = BenchmarkId::Lin1d;
    int dim = 1;
    double eps = 0.1;   // lin1d / nonlin1d_p8
    double eps1 = 0.1;  // threescale
    double eps2 = 0.01;
    Domain domain;
    EnergyForm form;
    FieldN boundary_g;
    ExactSolution exact;          // closed form; empty u for coeff2d
    bool grid_reference = false;  // coeff2d: compare against the FD grid solve

    long desk_epochs = 20000;
    long paper_epochs = 60000;
    int batch_interior = 3000;
    int batch_boundary = 500;

    static BenchmarkDef lin1d(double eps);
    static BenchmarkDef nonlin1d_p8(double eps);
    static BenchmarkDef three_scale(double eps1, double eps2);
    static BenchmarkDef coeff2d();
    static BenchmarkDef pb3d();
};

enum class RelMode { RatioOfSums, SumOfRatios };

// REL between prediction and reference over a test set.
//   ratio_of_sums (default):  sum |pred-exact|^2 / sum |exact|^2
//   sum_of_ratios:            sum |pred-exact|^2 / |exact|^2  (scales with N)
double rel_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& exact, RelMode mode);

// One-sided DFT magnitudes of samples on the periodic grid x_j = j/N.
// Lengths that are not a power of two are zero-padded up to one.
// Entry k is the magnitude at k cycles over the domain, k = 0..N2/2.
Eigen::VectorXd spectrum_1d(const Eigen::VectorXd& values);

// Fraction of squared-magnitude spectral mass inside [k_lo, k_hi], relative to
// the mass of all bins >= (include_dc ? 0 : 1).
double band_mass_fraction(const Eigen::VectorXd& magnitudes, int k_lo, int k_hi,
                          bool include_dc);

struct TestSet {
    Eigen::MatrixXd points;
    Eigen::VectorXd exact;
};

// 1D: 1000 uniformly spaced points; 2D: the n=129 reference grid (runs the FD
// solve); 3D: 1600 fixed-seed random interior points.
TestSet make_test_set(const BenchmarkDef& bench);

struct TrainOptions {
    long epochs = -1;          // -1: benchmark default for the chosen scale
    int batch_interior = -1;   // -1: benchmark default
    int batch_boundary = -1;
    long eval_every = 1000;
    bool paper_scale = false;  // full published widths and epoch counts
    AdamConfig adam;
    double beta = 20.0;
    double gamma0 = 100.0;
    RelMode rel_mode = RelMode::RatioOfSums;
};

struct EvalRow {
    long epoch = 0;
    LossComponents loss;
    double lr = 0.0;
    double rel = 0.0;
};

struct RunRecord {
    BenchmarkId bench = BenchmarkId::Lin1d;
    FamilyId family = FamilyId::SD2NN2;
    std::uint64_t seed = 1;
    int dim = 1;
    int n_subs = 1;
    bool unified = false;
    bool has_orth = false;

    std::vector<EvalRow> rows;  // one per eval_every epochs plus the final epoch

    TestSet test;
    Eigen::VectorXd prediction;  // at the final parameters
    Eigen::MatrixXd parts;       // columns: y1, alpha_k * y_{k+1}
    double final_rel = 0.0;
    double final_orth_ip = 0.0;  // |mean(y1 * sum_k alpha_k y_{k+1})| over the test set

    // 1D only: magnitudes on a 1024-point periodic grid
    Eigen::VectorXd spectrum_exact;
    Eigen::VectorXd spectrum_pred;
    std::vector<Eigen::VectorXd> spectrum_parts;

    Eigen::VectorXd final_params;  // last-good checkpoint when aborted
    bool aborted = false;
    long abort_epoch = -1;
};

// The training loop: per epoch draw fresh interior/boundary batches, take one
// Adam step on the full loss, and log REL every eval_every epochs plus once at
// the end. A non-finite loss aborts and keeps the last finite parameters.
RunRecord run_benchmark(const BenchmarkDef& bench, const ModelFamily& family,
                        const TrainOptions& opt, std::uint64_t seed);

struct PartDiagnostic {
    std::string name;          // coarse / meso / fine
    Eigen::VectorXd diff;      // model part minus reference part, spectrum grid
    Eigen::VectorXd spectrum;  // magnitudes of diff
    double below_k10_mass = 0.0;  // squared-magnitude fraction at k < 10, DC included
    double rms = 0.0;
};

// Per-part difference fields against a decomposed 1D reference. Families
// without a decomposition (K = 0) return an empty list.
std::vector<PartDiagnostic> part_diagnostics(const CompositeModel& model,
                                             const ExactSolution& ref, int grid_n = 1024);

}  // namespace sd2nn
