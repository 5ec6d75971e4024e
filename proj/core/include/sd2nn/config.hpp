#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sd2nn/experiments.hpp"

namespace sd2nn {

// Ordered key = value assignments. '#' starts a comment (anywhere in a line),
// blank lines are skipped, keys and values are whitespace-trimmed. A line
// without '=' is a ConfigError naming the line number.
using KvPairs = std::vector<std::pair<std::string, std::string>>;

KvPairs parse_kv_text(const std::string& text);

// "ones" | "arithmetic(start,step,count)" | "explicit(v1,v2,...)" |
// "gaussian(tau1,tau2,...)"; inverse of to_string below.
LambdaSpec parse_lambda_spec(const std::string& text);
std::string to_string(const LambdaSpec& spec);

// A fully resolved experiment: benchmark, model architecture, training
// schedule, seed, output directory. `from_text` starts from the published
// table defaults of (family, benchmark) at the requested scale and applies
// the explicit assignments on top; afterwards every field is concrete.
//
// Keys (see docs/config.md for the full schema):
//   benchmark.id [required]   lin1d | nonlin1d_p8 | threescale | coeff2d | pb3d
//   benchmark.eps / .eps1 / .eps2 / .p      problem parameters, where applicable
//   model.family [required]   dnn | mscale | wwp | sd2nn1 | sd2nn2 | sd2nn3
//                             | sd2nn2a | sd2nn2b
//   model.alpha               comma list, one balance weight per fine submodule
//   model.beta / .gamma0      penalty weights
//   model.boundary            individual | unified
//   model.orthogonality / .resnet          on | off
//   model.relaxation          sfm relaxation s applied to every sfm submodule
//   model.subK.widths         comma list of hidden affine widths
//   model.subK.lambda         scale-vector spec (parse_lambda_spec syntax)
//   model.subK.first_act / .hidden_act     activation ids
//   train.epochs / .batch_interior / .batch_boundary / .eval_every
//   train.lr0 / .decay        Adam schedule
//   train.decay_formula       inverse_time | exponential
//   train.rel_mode            ratio_of_sums | sum_of_ratios
//   run.scale                 desk | paper (width divisor 4 + short epochs vs
//                             full published sizes); default desk
//   run.seed / .output_dir
struct ExperimentConfig {
    BenchmarkId bench_id = BenchmarkId::Lin1d;
    double eps = 0.01;  // lin1d / nonlin1d_p8
    double eps1 = 0.1;  // threescale
    double eps2 = 0.01;
    double p = 2.0;  // energy exponent; pinned per benchmark by its reference

    FamilyId family_id = FamilyId::SD2NN2;
    ModelFamily family;        // resolved architecture, widths already scaled
    bool paper_scale = false;  // run.scale = paper

    TrainOptions train;  // epochs and batch sizes concrete after resolution
    std::uint64_t seed = 1;
    std::string output_dir = "sd2nn_run";

    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);

    BenchmarkDef benchmark() const;

    // Fully explicit echo in canonical key order; parsing it back reproduces
    // this config exactly (widths are echoed post-scaling, so the snapshot is
    // immune to double-scaling).
    std::string snapshot() const;
};

}  // namespace sd2nn
