#include "sd2nn/runio.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sd2nn/errors.hpp"
#include "sd2nn/format.hpp"

namespace sd2nn {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'D', '2', 'C', 'K', 'P', 'T', '1'};

void append_cell(std::string& out, double v) { out += format_double(v); }

}  // namespace

std::vector<std::string> part_names(int n_parts) {
    switch (n_parts) {
        case 1: return {"coarse"};
        case 2: return {"coarse", "fine"};
        case 3: return {"coarse", "meso", "fine"};
        default: {
            std::vector<std::string> out;
            for (int i = 0; i < n_parts; ++i) out.push_back("part" + std::to_string(i));
            return out;
        }
    }
}

std::string run_csv_text(const RunRecord& rec) {
    std::string out = "epoch,total,energy,bd_coarse,bd_fine,bd_unified,orth,gamma,lr,rel\n";
    const bool has_fine = rec.n_subs > 1;
    for (const EvalRow& row : rec.rows) {
        out += std::to_string(row.epoch);
        out += ',';
        append_cell(out, row.loss.total);
        out += ',';
        append_cell(out, row.loss.energy);
        out += ',';
        if (!rec.unified) append_cell(out, row.loss.bdc);
        out += ',';
        if (!rec.unified && has_fine) append_cell(out, row.loss.bdf);
        out += ',';
        if (rec.unified) append_cell(out, row.loss.bdu);
        out += ',';
        if (rec.has_orth) append_cell(out, row.loss.orth);
        out += ',';
        append_cell(out, row.loss.gamma);
        out += ',';
        append_cell(out, row.lr);
        out += ',';
        append_cell(out, row.rel);
        out += '\n';
    }
    return out;
}

std::string fields_csv_text(const RunRecord& rec) {
    const Eigen::Index n = rec.test.points.rows();
    const Eigen::Index dim = rec.test.points.cols();
    const Eigen::Index n_parts = rec.parts.cols();
    if (rec.prediction.size() != n || rec.test.exact.size() != n || rec.parts.rows() != n)
        throw ConfigError("fields csv: record prediction/parts do not match its test set");

    std::string out;
    for (Eigen::Index d = 0; d < dim; ++d) {
        if (d) out += ',';
        out += dim == 1 ? "x" : "x" + std::to_string(d + 1);
    }
    out += ",exact,prediction";
    const auto names = part_names(static_cast<int>(n_parts));
    for (const auto& name : names) out += "," + name;
    out += '\n';

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            if (d) out += ',';
            append_cell(out, rec.test.points(i, d));
        }
        out += ',';
        append_cell(out, rec.test.exact(i));
        out += ',';
        append_cell(out, rec.prediction(i));
        for (Eigen::Index k = 0; k < n_parts; ++k) {
            out += ',';
            append_cell(out, rec.parts(i, k));
        }
        out += '\n';
    }
    return out;
}

std::string spectrum_csv_text(const RunRecord& rec) {
    if (rec.dim != 1 || rec.spectrum_pred.size() == 0) return {};
    const Eigen::Index n = rec.spectrum_pred.size();
    if (rec.spectrum_exact.size() != n)
        throw ConfigError("spectrum csv: exact and prediction spectra differ in length");

    std::string out = "k,exact,prediction";
    const auto names = part_names(static_cast<int>(rec.spectrum_parts.size()));
    for (std::size_t i = 0; i < rec.spectrum_parts.size(); ++i) {
        if (rec.spectrum_parts[i].size() != n)
            throw ConfigError("spectrum csv: part spectrum length mismatch");
        out += "," + names[i];
    }
    out += '\n';

    for (Eigen::Index k = 0; k < n; ++k) {
        out += std::to_string(k);
        out += ',';
        append_cell(out, rec.spectrum_exact(k));
        out += ',';
        append_cell(out, rec.spectrum_pred(k));
        for (const auto& part : rec.spectrum_parts) {
            out += ',';
            append_cell(out, part(k));
        }
        out += '\n';
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ConfigError("short write: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return out;
}

void write_checkpoint(const std::string& path, const Eigen::VectorXd& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::int64_t n = params.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
    if (!out) throw ConfigError("short write: " + path);
}

Eigen::VectorXd read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    char magic[sizeof(kCheckpointMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw ConfigError("not a checkpoint file: " + path);
    std::int64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || n < 0) throw ConfigError("corrupt checkpoint header: " + path);
    Eigen::VectorXd params(n);
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
    if (!in) throw ConfigError("truncated checkpoint: " + path);
    return params;
}

void write_run_record(const std::string& dir, const ExperimentConfig& cfg,
                      const RunRecord& rec) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    write_text((base / "run.csv").string(), run_csv_text(rec));
    write_text((base / "fields.csv").string(), fields_csv_text(rec));
    const std::string spec = spectrum_csv_text(rec);
    if (!spec.empty()) write_text((base / "spectrum.csv").string(), spec);
    write_text((base / "config.snapshot").string(), cfg.snapshot());
    write_checkpoint((base / "checkpoint.bin").string(), rec.final_params);
}

int Table::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

Table read_csv(const std::string& path) {
    const std::string text = read_text(path);
    Table table;
    std::size_t pos = 0;
    bool in_header = true;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t c = 0;
        while (c <= line.size()) {
            auto comma = line.find(',', c);
            const auto end = comma == std::string::npos ? line.size() : comma;
            cells.push_back(line.substr(c, end - c));
            if (comma == std::string::npos) break;
            c = comma + 1;
        }
        if (in_header) {
            table.header = cells;
            in_header = false;
            continue;
        }
        if (cells.size() != table.header.size())
            throw ConfigError("csv row width mismatch in " + path);
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& cell : cells) {
            if (cell.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            double v = 0.0;
            const char* b = cell.data();
            const char* e = b + cell.size();
            const auto r = std::from_chars(b, e, v);
            if (r.ec != std::errc() || r.ptr != e)
                throw ConfigError("csv cell is not a number in " + path + ": '" + cell + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw ConfigError("csv has no header row: " + path);
    return table;
}

}  // namespace sd2nn
