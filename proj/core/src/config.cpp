#include "sd2nn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sd2nn/errors.hpp"
#include "sd2nn/format.hpp"

namespace sd2nn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* b = v.data();
    const char* e = b + v.size();
    const auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e)
        throw ConfigError(key + ": not a number: '" + v + "'");
    return out;
}

long parse_long(const std::string& key, const std::string& v) {
    long out = 0;
    const char* b = v.data();
    const char* e = b + v.size();
    const auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e)
        throw ConfigError(key + ": not an integer: '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const char* b = v.data();
    const char* e = b + v.size();
    const auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc() || r.ptr != e)
        throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
    return out;
}

bool parse_onoff(const std::string& key, const std::string& v) {
    if (v == "on") return true;
    if (v == "off") return false;
    throw ConfigError(key + ": expected on or off, got '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& key, const std::string& v) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        const auto comma = v.find(',', pos);
        const auto end = comma == std::string::npos ? v.size() : comma;
        const std::string item = trim(v.substr(pos, end - pos));
        if (item.empty()) throw ConfigError(key + ": empty list entry in '" + v + "'");
        out.push_back(item);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_commas(key, v)) out.push_back(parse_num(key, item));
    return out;
}

std::vector<int> parse_width_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split_commas(key, v)) {
        const long w = parse_long(key, item);
        if (w < 1) throw ConfigError(key + ": widths must be >= 1, got " + item);
        out.push_back(static_cast<int>(w));
    }
    return out;
}

// splits "name(a,b,c)" into name and raw argument list; plain "name" gives
// an empty list
bool split_call(const std::string& text, std::string* name, std::string* args) {
    const auto open = text.find('(');
    if (open == std::string::npos) {
        *name = text;
        args->clear();
        return true;
    }
    if (text.back() != ')') return false;
    *name = trim(text.substr(0, open));
    *args = text.substr(open + 1, text.size() - open - 2);
    return true;
}

}  // namespace

KvPairs parse_kv_text(const std::string& text) {
    KvPairs out;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value, got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string val = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(std::move(key), std::move(val));
    }
    return out;
}

LambdaSpec parse_lambda_spec(const std::string& text) {
    const std::string what = "lambda spec";
    std::string name, args;
    if (!split_call(trim(text), &name, &args))
        throw ConfigError(what + ": unbalanced parentheses in '" + text + "'");
    if (name == "ones") {
        if (!args.empty()) throw ConfigError(what + ": ones takes no arguments");
        return LambdaSpec::ones();
    }
    if (name == "arithmetic") {
        const auto items = parse_double_list(what, args);
        if (items.size() != 2 && items.size() != 3)
            throw ConfigError(what + ": arithmetic expects (start, step[, count])");
        int count = 0;
        if (items.size() == 3) {
            if (items[2] < 0 || items[2] != static_cast<double>(static_cast<int>(items[2])))
                throw ConfigError(what + ": arithmetic count must be a non-negative integer");
            count = static_cast<int>(items[2]);
        }
        return LambdaSpec::arithmetic(items[0], items[1], count);
    }
    if (name == "explicit") return LambdaSpec::explicit_list(parse_double_list(what, args));
    if (name == "gaussian") {
        auto taus = parse_double_list(what, args);
        for (double t : taus)
            if (!(t > 0.0)) throw ConfigError(what + ": gaussian stddevs must be positive");
        return LambdaSpec::gaussian(std::move(taus), 1);
    }
    throw ConfigError(what + ": expected ones | arithmetic(...) | explicit(...) | "
                      "gaussian(...), got '" + text + "'");
}

std::string to_string(const LambdaSpec& spec) {
    switch (spec.kind) {
        case LambdaSpec::Kind::Ones: return "ones";
        case LambdaSpec::Kind::Arithmetic:
            return "arithmetic(" + format_double(spec.start) + "," + format_double(spec.step) +
                   "," + std::to_string(spec.count) + ")";
        case LambdaSpec::Kind::Explicit: {
            std::string out = "explicit(";
            for (std::size_t i = 0; i < spec.values.size(); ++i) {
                if (i) out += ',';
                out += format_double(spec.values[i]);
            }
            return out + ")";
        }
        case LambdaSpec::Kind::Gaussian: {
            std::string out = "gaussian(";
            for (std::size_t i = 0; i < spec.taus.size(); ++i) {
                if (i) out += ',';
                out += format_double(spec.taus[i]);
            }
            return out + ")";
        }
    }
    throw ConfigError("lambda spec: unknown kind");
}

namespace {

double canonical_p(BenchmarkId id) {
    switch (id) {
        case BenchmarkId::Nonlin1dP8: return 8.0;
        case BenchmarkId::Pb3d: return 0.0;  // not a p-Laplacian energy
        default: return 2.0;
    }
}

// keys consumed by the identity/scale pre-pass
bool is_prepass_key(const std::string& key) {
    return key == "benchmark.id" || key == "model.family" || key == "run.scale";
}

void apply_benchmark_key(ExperimentConfig& cfg, const std::string& key,
                         const std::string& val) {
    const bool has_eps =
        cfg.bench_id == BenchmarkId::Lin1d || cfg.bench_id == BenchmarkId::Nonlin1dP8;
    const bool has_eps12 = cfg.bench_id == BenchmarkId::ThreeScale;
    if (key == "benchmark.eps") {
        if (!has_eps)
            throw ConfigError(key + ": not applicable to " + to_string(cfg.bench_id));
        cfg.eps = parse_num(key, val);
        if (!(cfg.eps > 0.0)) throw ConfigError(key + ": must be positive");
    } else if (key == "benchmark.eps1" || key == "benchmark.eps2") {
        if (!has_eps12)
            throw ConfigError(key + ": not applicable to " + to_string(cfg.bench_id));
        double& slot = key == "benchmark.eps1" ? cfg.eps1 : cfg.eps2;
        slot = parse_num(key, val);
        if (!(slot > 0.0)) throw ConfigError(key + ": must be positive");
    } else if (key == "benchmark.p") {
        const double want = canonical_p(cfg.bench_id);
        if (want == 0.0)
            throw ConfigError(key + ": not applicable to " + to_string(cfg.bench_id));
        const double got = parse_num(key, val);
        if (got != want)
            throw ConfigError(key + ": the " + to_string(cfg.bench_id) +
                              " reference solution is derived for p = " + format_double(want));
        cfg.p = got;
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

void apply_sub_key(ExperimentConfig& cfg, const std::string& key, int sub,
                   const std::string& field, const std::string& val) {
    if (sub < 0 || sub >= cfg.family.n_subs())
        throw ConfigError(key + ": family " + to_string(cfg.family_id) + " resolves to " +
                          std::to_string(cfg.family.n_subs()) + " submodules (sub0..sub" +
                          std::to_string(cfg.family.n_subs() - 1) + ")");
    SubmoduleSpec& spec = cfg.family.subs[static_cast<std::size_t>(sub)];
    if (field == "widths") {
        spec.widths = parse_width_list(key, val);
    } else if (field == "lambda") {
        try {
            spec.lambda = parse_lambda_spec(val);
        } catch (const ConfigError& err) {
            throw ConfigError(key + ": " + err.what());
        }
    } else if (field == "first_act" || field == "hidden_act") {
        Activation act;
        try {
            act = parse_activation(val);
        } catch (const ConfigError& err) {
            throw ConfigError(key + ": " + err.what());
        }
        (field == "first_act" ? spec.first_act : spec.hidden_act) = act;
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& val) {
    if (is_prepass_key(key)) return;  // handled before defaulting

    if (key.rfind("benchmark.", 0) == 0) {
        apply_benchmark_key(cfg, key, val);
        return;
    }

    if (key.rfind("model.sub", 0) == 0) {
        const auto dot = key.find('.', 9);
        if (dot != std::string::npos) {
            int sub = -1;
            const char* b = key.data() + 9;
            const char* e = key.data() + dot;
            const auto r = std::from_chars(b, e, sub);
            if (r.ec == std::errc() && r.ptr == e) {
                apply_sub_key(cfg, key, sub, key.substr(dot + 1), val);
                return;
            }
        }
        throw ConfigError("unknown config key: " + key);
    }

    if (key == "model.alpha") {
        const auto alphas = parse_double_list(key, val);
        const auto want = static_cast<std::size_t>(cfg.family.n_subs() - 1);
        if (want == 0)
            throw ConfigError(key + ": family " + to_string(cfg.family_id) +
                              " has no fine submodules");
        if (alphas.size() != want)
            throw ConfigError(key + ": expected " + std::to_string(want) +
                              " balance value(s) (one per fine submodule), got " +
                              std::to_string(alphas.size()));
        cfg.family.alphas = alphas;
    } else if (key == "model.beta") {
        cfg.train.beta = parse_num(key, val);
        if (!(cfg.train.beta >= 0.0)) throw ConfigError(key + ": must be >= 0");
    } else if (key == "model.gamma0") {
        cfg.train.gamma0 = parse_num(key, val);
        if (!(cfg.train.gamma0 > 0.0)) throw ConfigError(key + ": must be positive");
    } else if (key == "model.boundary") {
        if (val == "individual")
            cfg.family.boundary_mode = LossConfig::BoundaryMode::Individual;
        else if (val == "unified")
            cfg.family.boundary_mode = LossConfig::BoundaryMode::Unified;
        else
            throw ConfigError(key + ": expected individual or unified, got '" + val + "'");
    } else if (key == "model.orthogonality") {
        cfg.family.orthogonality = parse_onoff(key, val);
    } else if (key == "model.resnet") {
        cfg.family.resnet = parse_onoff(key, val);
    } else if (key == "model.relaxation") {
        const double s = parse_num(key, val);
        if (!(s > 0.0 && s <= 1.0)) throw ConfigError(key + ": must be in (0, 1]");
        bool any = false;
        for (auto& spec : cfg.family.subs) {
            if (spec.first_act.is_sfm()) {
                spec.first_act.s = s;
                any = true;
            }
            if (spec.hidden_act.is_sfm()) {
                spec.hidden_act.s = s;
                any = true;
            }
        }
        if (!any)
            throw ConfigError(key + ": family " + to_string(cfg.family_id) +
                              " has no sfm activation to relax");
    } else if (key == "train.epochs") {
        cfg.train.epochs = parse_long(key, val);
        if (cfg.train.epochs < 0) throw ConfigError(key + ": must be >= 0");
    } else if (key == "train.batch_interior") {
        cfg.train.batch_interior = static_cast<int>(parse_long(key, val));
        if (cfg.train.batch_interior < 1) throw ConfigError(key + ": must be >= 1");
    } else if (key == "train.batch_boundary") {
        cfg.train.batch_boundary = static_cast<int>(parse_long(key, val));
        if (cfg.train.batch_boundary < 1) throw ConfigError(key + ": must be >= 1");
    } else if (key == "train.eval_every") {
        cfg.train.eval_every = parse_long(key, val);
        if (cfg.train.eval_every < 1) throw ConfigError(key + ": must be >= 1");
    } else if (key == "train.lr0") {
        cfg.train.adam.lr0 = parse_num(key, val);
        if (!(cfg.train.adam.lr0 > 0.0)) throw ConfigError(key + ": must be positive");
    } else if (key == "train.decay") {
        cfg.train.adam.decay = parse_num(key, val);
        if (!(cfg.train.adam.decay >= 0.0)) throw ConfigError(key + ": must be >= 0");
    } else if (key == "train.decay_formula") {
        if (val == "inverse_time")
            cfg.train.adam.decay_formula = AdamConfig::Decay::InverseTime;
        else if (val == "exponential")
            cfg.train.adam.decay_formula = AdamConfig::Decay::Exponential;
        else
            throw ConfigError(key + ": expected inverse_time or exponential, got '" + val +
                              "'");
    } else if (key == "train.rel_mode") {
        if (val == "ratio_of_sums")
            cfg.train.rel_mode = RelMode::RatioOfSums;
        else if (val == "sum_of_ratios")
            cfg.train.rel_mode = RelMode::SumOfRatios;
        else
            throw ConfigError(key + ": expected ratio_of_sums or sum_of_ratios, got '" + val +
                              "'");
    } else if (key == "run.seed") {
        cfg.seed = parse_u64(key, val);
    } else if (key == "run.output_dir") {
        if (val.empty()) throw ConfigError(key + ": must not be empty");
        cfg.output_dir = val;
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

const std::string* find_last(const KvPairs& kv, const std::string& key) {
    const std::string* out = nullptr;
    for (const auto& [k, v] : kv)
        if (k == key) out = &v;
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    const KvPairs kv = parse_kv_text(text);
    ExperimentConfig cfg;

    const std::string* bench_str = find_last(kv, "benchmark.id");
    if (!bench_str) throw ConfigError("benchmark.id: required key missing");
    try {
        cfg.bench_id = parse_benchmark(*bench_str);
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("benchmark.id: ") + err.what());
    }

    const std::string* fam_str = find_last(kv, "model.family");
    if (!fam_str) throw ConfigError("model.family: required key missing");
    try {
        cfg.family_id = parse_family(*fam_str);
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("model.family: ") + err.what());
    }

    if (const std::string* scale = find_last(kv, "run.scale")) {
        if (*scale == "paper")
            cfg.paper_scale = true;
        else if (*scale != "desk")
            throw ConfigError("run.scale: expected desk or paper, got '" + *scale + "'");
    }

    // problem-parameter defaults per benchmark
    switch (cfg.bench_id) {
        case BenchmarkId::Lin1d:
        case BenchmarkId::Nonlin1dP8: cfg.eps = 0.01; break;
        case BenchmarkId::ThreeScale:
            cfg.eps1 = 0.1;
            cfg.eps2 = 0.01;
            break;
        default: break;
    }
    cfg.p = canonical_p(cfg.bench_id);
    if (cfg.p == 0.0) cfg.p = 2.0;  // pb3d holds the inert default

    // eps keys must land before the benchmark factory validates them
    for (const auto& [k, v] : kv)
        if (k.rfind("benchmark.", 0) == 0 && k != "benchmark.id") apply_benchmark_key(cfg, k, v);

    const BenchmarkDef bench = cfg.benchmark();

    cfg.family = ModelFamily::table_defaults(cfg.family_id, cfg.bench_id);
    if (!cfg.paper_scale) cfg.family.scale_widths(4.0);

    cfg.train.paper_scale = cfg.paper_scale;
    cfg.train.epochs = cfg.paper_scale ? bench.paper_epochs : bench.desk_epochs;
    cfg.train.batch_interior = bench.batch_interior;
    cfg.train.batch_boundary = bench.batch_boundary;

    for (const auto& [k, v] : kv) {
        if (k.rfind("benchmark.", 0) == 0) continue;  // already applied
        apply_key(cfg, k, v);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

BenchmarkDef ExperimentConfig::benchmark() const {
    switch (bench_id) {
        case BenchmarkId::Lin1d: return BenchmarkDef::lin1d(eps);
        case BenchmarkId::Nonlin1dP8: return BenchmarkDef::nonlin1d_p8(eps);
        case BenchmarkId::ThreeScale: return BenchmarkDef::three_scale(eps1, eps2);
        case BenchmarkId::Coeff2d: return BenchmarkDef::coeff2d();
        case BenchmarkId::Pb3d: return BenchmarkDef::pb3d();
    }
    throw ConfigError("benchmark.id: unknown benchmark");
}

std::string ExperimentConfig::snapshot() const {
    std::string out;
    auto put = [&out](const std::string& key, const std::string& val) {
        out += key;
        out += " = ";
        out += val;
        out += '\n';
    };

    put("benchmark.id", to_string(bench_id));
    if (bench_id == BenchmarkId::Lin1d || bench_id == BenchmarkId::Nonlin1dP8)
        put("benchmark.eps", format_double(eps));
    if (bench_id == BenchmarkId::ThreeScale) {
        put("benchmark.eps1", format_double(eps1));
        put("benchmark.eps2", format_double(eps2));
    }
    if (bench_id != BenchmarkId::Pb3d) put("benchmark.p", format_double(p));

    put("model.family", to_string(family_id));
    if (family.n_subs() > 1) {
        std::string alphas;
        for (std::size_t i = 0; i < family.alphas.size(); ++i) {
            if (i) alphas += ',';
            alphas += format_double(family.alphas[i]);
        }
        put("model.alpha", alphas);
    }
    put("model.beta", format_double(train.beta));
    put("model.gamma0", format_double(train.gamma0));
    put("model.boundary",
        family.boundary_mode == LossConfig::BoundaryMode::Unified ? "unified" : "individual");
    put("model.orthogonality", family.orthogonality ? "on" : "off");
    put("model.resnet", family.resnet ? "on" : "off");
    for (int k = 0; k < family.n_subs(); ++k) {
        const SubmoduleSpec& spec = family.subs[static_cast<std::size_t>(k)];
        const std::string base = "model.sub" + std::to_string(k) + ".";
        std::string widths;
        for (std::size_t i = 0; i < spec.widths.size(); ++i) {
            if (i) widths += ',';
            widths += std::to_string(spec.widths[i]);
        }
        put(base + "widths", widths);
        put(base + "lambda", to_string(spec.lambda));
        put(base + "first_act", to_string(spec.first_act));
        put(base + "hidden_act", to_string(spec.hidden_act));
    }

    put("train.epochs", std::to_string(train.epochs));
    put("train.batch_interior", std::to_string(train.batch_interior));
    put("train.batch_boundary", std::to_string(train.batch_boundary));
    put("train.lr0", format_double(train.adam.lr0));
    put("train.decay", format_double(train.adam.decay));
    put("train.decay_formula",
        train.adam.decay_formula == AdamConfig::Decay::Exponential ? "exponential"
                                                                   : "inverse_time");
    put("train.eval_every", std::to_string(train.eval_every));
    put("train.rel_mode",
        train.rel_mode == RelMode::SumOfRatios ? "sum_of_ratios" : "ratio_of_sums");

    put("run.scale", paper_scale ? "paper" : "desk");
    put("run.seed", std::to_string(seed));
    put("run.output_dir", output_dir);
    return out;
}

}  // namespace sd2nn
