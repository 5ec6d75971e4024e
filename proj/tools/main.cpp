#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sd2nn/config.hpp"
#include "sd2nn/errors.hpp"
#include "sd2nn/format.hpp"
#include "sd2nn/runio.hpp"
#include "sd2nn/selftest.hpp"

namespace {

using namespace sd2nn;

// relative output directories land under SD2NN_OUTPUT_ROOT when it is set
std::string resolve_output_dir(const std::string& dir) {
    const char* root = std::getenv("SD2NN_OUTPUT_ROOT");
    if (root && root[0] != '\0' && !std::filesystem::path(dir).is_absolute())
        return (std::filesystem::path(root) / dir).string();
    return dir;
}

// ---------------------------------------------------------------- run ----

int cmd_run(const std::string& config_path) {
    ExperimentConfig cfg;
    try {
        cfg = ExperimentConfig::from_file(config_path);
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "config error: %s\n", err.what());
        return 2;
    }

    try {
        const BenchmarkDef bench = cfg.benchmark();
        const RunRecord rec = run_benchmark(bench, cfg.family, cfg.train, cfg.seed);
        const std::string dir = resolve_output_dir(cfg.output_dir);
        write_run_record(dir, cfg, rec);
        if (rec.aborted) {
            std::fprintf(stderr,
                         "training aborted at epoch %ld; last finite checkpoint written to "
                         "%s\n",
                         rec.abort_epoch, dir.c_str());
            return 3;
        }
        std::printf("%s %s seed %llu: final REL %s, artifacts in %s\n",
                    to_string(cfg.bench_id).c_str(), to_string(cfg.family_id).c_str(),
                    static_cast<unsigned long long>(cfg.seed),
                    format_double(rec.final_rel).c_str(), dir.c_str());
        return 0;
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "config error: %s\n", err.what());
        return 2;
    } catch (const NumericError& err) {
        std::fprintf(stderr, "numeric error: %s\n", err.what());
        return 3;
    }
}

// ----------------------------------------------------------- selftest ----

int cmd_selftest(bool corrupt_s2relu) {
    SelftestOptions opt;
    opt.corrupt_s2relu = corrupt_s2relu;
    int failures = 0;
    for (const CheckResult& r : run_selftests(opt)) {
        std::printf("%s %-22s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        failures += r.pass ? 0 : 1;
    }
    if (failures) std::fprintf(stderr, "%d check(s) failed\n", failures);
    return failures ? 1 : 0;
}

// ----------------------------------------------------------- plotdata ----

struct Series {
    std::string label;
    std::vector<double> x, y;
};

std::string color_for(std::size_t i) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#9467bd", "#ff7f0e", "#8c564b"};
    return kPalette[i % 6];
}

std::string svg_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// minimal self-contained line chart; log-y charts plot log10 of the values
std::string svg_line_chart(const std::string& title, const std::vector<Series>& series,
                           bool logy) {
    const double W = 680, H = 440, L = 64, R = 24, T = 36, B = 46;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto yval = [&](double v) {
        if (!logy) return v;
        return std::log10(std::max(v, 1e-300));
    };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (logy && !(s.y[i] > 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, yval(s.y[i]));
            ymax = std::max(ymax, yval(s.y[i]));
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-300) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) { return H - B - (yval(y) - ymin) / (ymax - ymin) * (H - T - B); };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(W) +
                      "\" height=\"" + svg_number(H) + "\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + svg_number(W / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
           title + "</text>\n";
    // frame
    out += "<rect x=\"" + svg_number(L) + "\" y=\"" + svg_number(T) + "\" width=\"" +
           svg_number(W - L - R) + "\" height=\"" + svg_number(H - T - B) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
    // range labels
    auto ylabel = [&](double yv) { return logy ? "1e" + svg_number(yv) : svg_number(yv); };
    out += "<text x=\"" + svg_number(L) + "\" y=\"" + svg_number(H - B + 16) +
           "\" font-size=\"11\">" + svg_number(xmin) + "</text>\n";
    out += "<text x=\"" + svg_number(W - R) + "\" y=\"" + svg_number(H - B + 16) +
           "\" text-anchor=\"end\" font-size=\"11\">" + svg_number(xmax) + "</text>\n";
    out += "<text x=\"" + svg_number(L - 4) + "\" y=\"" + svg_number(H - B) +
           "\" text-anchor=\"end\" font-size=\"11\">" + ylabel(ymin) + "</text>\n";
    out += "<text x=\"" + svg_number(L - 4) + "\" y=\"" + svg_number(T + 10) +
           "\" text-anchor=\"end\" font-size=\"11\">" + ylabel(ymax) + "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::string path;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]) &&
                            (!logy || s.y[i] > 0.0);
            if (!ok) {
                pen_down = false;
                continue;
            }
            path += pen_down ? " L " : " M ";
            path += svg_number(px(s.x[i])) + " " + svg_number(py(s.y[i]));
            pen_down = true;
        }
        out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color_for(si) +
               "\" stroke-width=\"1.2\"/>\n";
        out += "<text x=\"" + svg_number(W - R - 6) + "\" y=\"" +
               svg_number(T + 16 + 14 * static_cast<double>(si)) +
               "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color_for(si) + "\">" +
               s.label + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string viridis(double t) {
    static const double stops[7][3] = {{0.267, 0.005, 0.329}, {0.275, 0.194, 0.496},
                                       {0.213, 0.359, 0.552}, {0.153, 0.497, 0.557},
                                       {0.122, 0.633, 0.530}, {0.369, 0.789, 0.383},
                                       {0.993, 0.906, 0.144}};
    t = std::clamp(t, 0.0, 1.0) * 6.0;
    const int i = std::min(5, static_cast<int>(t));
    const double f = t - i;
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x",
                  static_cast<int>(255 * (stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                  static_cast<int>(255 * (stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                  static_cast<int>(255 * (stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
    return buf;
}

// square-grid heatmap; values row-major, row j is the j-th y level
std::string svg_heatmap(const std::string& title, int side, const std::vector<double>& v) {
    const double cell = 512.0 / side;
    const double W = 512 + 120, H = 512 + 60;
    double vmin = 1e300, vmax = -1e300;
    for (double x : v)
        if (std::isfinite(x)) {
            vmin = std::min(vmin, x);
            vmax = std::max(vmax, x);
        }
    if (vmin > vmax) {
        vmin = 0;
        vmax = 1;
    }
    if (vmax - vmin < 1e-300) vmax = vmin + 1;

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(W) +
                      "\" height=\"" + svg_number(H) + "\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + svg_number(20 + 256) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i) {
            const double val = v[static_cast<std::size_t>(j) * side + i];
            const double x = 20 + i * cell;
            const double y = 30 + (side - 1 - j) * cell;
            out += "<rect x=\"" + svg_number(x) + "\" y=\"" + svg_number(y) + "\" width=\"" +
                   svg_number(cell + 0.5) + "\" height=\"" + svg_number(cell + 0.5) +
                   "\" fill=\"" + viridis((val - vmin) / (vmax - vmin)) + "\"/>\n";
        }
    // color bar
    for (int k = 0; k < 64; ++k) {
        const double y = 30 + 512.0 * (63 - k) / 64.0;
        out += "<rect x=\"" + svg_number(552.0) + "\" y=\"" + svg_number(y) +
               "\" width=\"18\" height=\"" + svg_number(512.0 / 64 + 0.5) + "\" fill=\"" +
               viridis(k / 63.0) + "\"/>\n";
    }
    out += "<text x=\"576\" y=\"" + svg_number(30 + 512.0) + "\" font-size=\"11\">" +
           svg_number(vmin) + "</text>\n";
    out += "<text x=\"576\" y=\"40\" font-size=\"11\">" + svg_number(vmax) + "</text>\n";
    out += "</svg>\n";
    return out;
}

std::vector<double> table_col(const Table& t, int c) {
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(row[static_cast<std::size_t>(c)]);
    return out;
}

int field_dim(const Table& fields) {
    if (fields.col("x") == 0) return 1;
    if (fields.col("x3") >= 0) return 3;
    if (fields.col("x2") >= 0) return 2;
    throw ConfigError("fields.csv: unrecognized coordinate columns");
}

int cmd_plotdata(const std::string& dir, const std::string& kind, bool svg) {
    const std::filesystem::path base(dir);
    try {
        std::string csv;
        std::string svg_text;

        if (kind == "rel_curve") {
            const Table t = read_csv((base / "run.csv").string());
            const int ce = t.col("epoch"), cr = t.col("rel");
            if (ce < 0 || cr < 0) throw ConfigError("run.csv: missing epoch/rel columns");
            csv = "epoch,rel\n";
            for (const auto& row : t.rows)
                csv += format_double(row[ce]) + "," + format_double(row[cr]) + "\n";
            if (svg) {
                Series s{"REL", table_col(t, ce), table_col(t, cr)};
                svg_text = svg_line_chart("relative L2 error vs epoch", {s}, true);
            }
        } else if (kind == "spectrum") {
            const Table t = read_csv((base / "spectrum.csv").string());
            csv = read_text((base / "spectrum.csv").string());
            if (svg) {
                std::vector<Series> series;
                const auto ks = table_col(t, 0);
                for (std::size_t c = 1; c < t.header.size(); ++c)
                    series.push_back({t.header[c], ks, table_col(t, static_cast<int>(c))});
                svg_text = svg_line_chart("one-sided spectrum magnitudes", series, true);
            }
        } else {
            const Table t = read_csv((base / "fields.csv").string());
            const int dim = field_dim(t);
            const int cexact = t.col("exact"), cpred = t.col("prediction");
            if (cexact < 0 || cpred < 0)
                throw ConfigError("fields.csv: missing exact/prediction columns");
            std::vector<int> coord_cols;
            if (dim == 1)
                coord_cols = {t.col("x")};
            else
                for (int d = 1; d <= dim; ++d)
                    coord_cols.push_back(t.col("x" + std::to_string(d)));

            auto coord_header = [&]() {
                std::string h;
                for (int d = 0; d < dim; ++d) {
                    if (d) h += ',';
                    h += dim == 1 ? "x" : "x" + std::to_string(d + 1);
                }
                return h;
            };
            auto coord_cells = [&](const std::vector<double>& row) {
                std::string s;
                for (int d = 0; d < dim; ++d) {
                    if (d) s += ',';
                    s += format_double(row[static_cast<std::size_t>(coord_cols[d])]);
                }
                return s;
            };

            if (kind == "solution") {
                csv = coord_header() + ",exact,prediction\n";
                for (const auto& row : t.rows)
                    csv += coord_cells(row) + "," + format_double(row[cexact]) + "," +
                           format_double(row[cpred]) + "\n";
                if (svg && dim == 1) {
                    Series se{"exact", table_col(t, coord_cols[0]), table_col(t, cexact)};
                    Series sp{"prediction", table_col(t, coord_cols[0]), table_col(t, cpred)};
                    svg_text = svg_line_chart("solution overlay", {se, sp}, false);
                } else if (svg && dim == 2) {
                    const int side = static_cast<int>(std::lround(std::sqrt(
                        static_cast<double>(t.rows.size()))));
                    svg_text = svg_heatmap("prediction", side, table_col(t, cpred));
                }
            } else if (kind == "pointwise_error") {
                csv = coord_header() + ",abs_error\n";
                std::vector<double> err;
                err.reserve(t.rows.size());
                for (const auto& row : t.rows) {
                    const double e = std::abs(row[cpred] - row[cexact]);
                    err.push_back(e);
                    csv += coord_cells(row) + "," + format_double(e) + "\n";
                }
                if (svg && dim == 1) {
                    Series s{"|error|", table_col(t, coord_cols[0]), err};
                    svg_text = svg_line_chart("pointwise error", {s}, false);
                } else if (svg && dim == 2) {
                    const int side = static_cast<int>(std::lround(std::sqrt(
                        static_cast<double>(t.rows.size()))));
                    svg_text = svg_heatmap("pointwise |error|", side, err);
                }
            } else if (kind == "parts") {
                std::vector<int> pcols;
                std::vector<std::string> pnames;
                for (std::size_t c = 0; c < t.header.size(); ++c)
                    if (static_cast<int>(c) > cpred) {
                        pcols.push_back(static_cast<int>(c));
                        pnames.push_back(t.header[c]);
                    }
                csv = coord_header();
                for (const auto& n : pnames) csv += "," + n;
                csv += '\n';
                for (const auto& row : t.rows) {
                    csv += coord_cells(row);
                    for (int c : pcols) csv += "," + format_double(row[c]);
                    csv += '\n';
                }
                if (svg && dim == 1) {
                    std::vector<Series> series;
                    for (std::size_t k = 0; k < pcols.size(); ++k)
                        series.push_back(
                            {pnames[k], table_col(t, coord_cols[0]), table_col(t, pcols[k])});
                    svg_text = svg_line_chart("decomposition parts", series, false);
                }
            } else {
                std::fprintf(stderr, "unknown plot kind: %s\n", kind.c_str());
                return 2;
            }
        }

        write_text((base / ("plot_" + kind + ".csv")).string(), csv);
        std::printf("wrote %s\n", (base / ("plot_" + kind + ".csv")).c_str());
        if (svg) {
            if (svg_text.empty()) {
                std::printf("no svg rendering for this kind/dimension; csv written\n");
            } else {
                write_text((base / ("plot_" + kind + ".svg")).string(), svg_text);
                std::printf("wrote %s\n", (base / ("plot_" + kind + ".svg")).c_str());
            }
        }
        return 0;
    } catch (const ConfigError& err) {
        std::fprintf(stderr, "plotdata error: %s\n", err.what());
        return 2;
    }
}

// -------------------------------------------------------------- batch ----

int cmd_batch(const std::vector<std::string>& configs, int jobs) {
    std::map<pid_t, std::size_t> running;
    std::vector<int> codes(configs.size(), -1);
    std::size_t next = 0;
    int spawn_failures = 0;

    auto spawn_one = [&]() {
        std::fflush(nullptr);
        const pid_t pid = fork();
        if (pid < 0) {
            std::fprintf(stderr, "fork failed for %s\n", configs[next].c_str());
            codes[next] = 127;
            ++spawn_failures;
            ++next;
            return;
        }
        if (pid == 0) _exit(cmd_run(configs[next]));
        running[pid] = next;
        ++next;
    };

    while (next < configs.size() || !running.empty()) {
        while (next < configs.size() && running.size() < static_cast<std::size_t>(jobs))
            spawn_one();
        if (running.empty()) continue;
        int status = 0;
        const pid_t pid = waitpid(-1, &status, 0);
        if (pid < 0) break;
        const auto it = running.find(pid);
        if (it == running.end()) continue;
        codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
        running.erase(it);
    }

    int failures = spawn_failures;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        std::printf("%s: exit %d\n", configs[i].c_str(), codes[i]);
        if (codes[i] != 0) ++failures;
    }
    return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"subspace-decomposed deep-Ritz training for multi-scale elliptic PDEs"};
    app.require_subcommand(1);

    std::string config_path, run_dir, kind;
    bool corrupt = false, svg = false;
    int jobs = 1;
    std::vector<std::string> batch_configs;

    CLI::App* run = app.add_subcommand("run", "train one configured model and write artifacts");
    run->add_option("config", config_path, "experiment config file")->required();

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in oracle suite");
    selftest->add_flag("--corrupt-s2relu", corrupt,
                       "fault-injection fixture: break s2relu to prove the check bites");

    CLI::App* plotdata =
        app.add_subcommand("plotdata", "emit plot-ready csv (and optional svg) from a run");
    plotdata->add_option("dir", run_dir, "run output directory")->required();
    plotdata->add_option("--kind", kind, "solution | pointwise_error | rel_curve | spectrum | parts")
        ->required()
        ->check(CLI::IsMember({"solution", "pointwise_error", "rel_curve", "spectrum", "parts"}));
    plotdata->add_flag("--svg", svg, "also render an svg chart");

    CLI::App* batch = app.add_subcommand("batch", "run several configs as worker processes");
    batch->add_option("configs", batch_configs, "config files")->required();
    batch->add_option("--jobs", jobs, "max concurrent workers")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path);
    if (selftest->parsed()) return cmd_selftest(corrupt);
    if (plotdata->parsed()) return cmd_plotdata(run_dir, kind, svg);
    if (batch->parsed()) return cmd_batch(batch_configs, jobs);
    return 1;
}
