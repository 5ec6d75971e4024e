#pragma once

#include <string>
#include <vector>

#include "sd2nn/config.hpp"
#include "sd2nn/experiments.hpp"

namespace sd2nn {

// Writes the full artifact set for one finished run into `dir` (created if
// missing): run.csv, fields.csv, spectrum.csv (1D only), config.snapshot,
// checkpoint.bin. All text output is locale-independent and deterministic,
// so a rerun with the same config and seed reproduces every file byte for
// byte.
void write_run_record(const std::string& dir, const ExperimentConfig& cfg,
                      const RunRecord& rec);

// epoch,total,energy,bd_coarse,bd_fine,bd_unified,orth,gamma,lr,rel — the
// boundary columns of the inactive mode stay empty, and orth stays empty for
// runs without the orthogonality penalty.
std::string run_csv_text(const RunRecord& rec);

// coordinates, exact, prediction, then one column per decomposition part
std::string fields_csv_text(const RunRecord& rec);

// k, exact, prediction, per-part magnitudes; empty string for non-1D runs
std::string spectrum_csv_text(const RunRecord& rec);

// "coarse" / "coarse,fine" / "coarse,meso,fine", generic partN beyond three
std::vector<std::string> part_names(int n_parts);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// Final parameters as a raw little-endian f64 image behind a short header;
// read_checkpoint returns bit-identical values.
void write_checkpoint(const std::string& path, const Eigen::VectorXd& params);
Eigen::VectorXd read_checkpoint(const std::string& path);

// Minimal CSV reader for the plot-data command: one header row, numeric
// cells; empty cells read back as NaN.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const;  // -1 when absent
};

Table read_csv(const std::string& path);

}  // namespace sd2nn
