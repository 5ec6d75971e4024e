#include <doctest.h>

#include <string>
#include <vector>

#include "sd2nn/config.hpp"
#include "sd2nn/errors.hpp"

using namespace sd2nn;

namespace {

const char* kMinimal =
    "benchmark.id = lin1d\n"
    "model.family = sd2nn2\n";

std::string with_minimal(const std::string& extra) { return std::string(kMinimal) + extra; }

}  // namespace

TEST_CASE("parse_kv_text: comments, blanks, ordering") {
    const KvPairs kv = parse_kv_text(
        "# full-line comment\n"
        "\n"
        "  a = 1  \n"
        "b = two # trailing comment\n"
        "a = 3\n");
    REQUIRE(kv.size() == 3);
    CHECK(kv[0] == std::pair<std::string, std::string>{"a", "1"});
    CHECK(kv[1] == std::pair<std::string, std::string>{"b", "two"});
    CHECK(kv[2] == std::pair<std::string, std::string>{"a", "3"});  // duplicates preserved

    CHECK_THROWS_WITH_AS(parse_kv_text("a = 1\nbroken line\n"),
                         "config line 2: expected key = value, got 'broken line'", ConfigError);
    CHECK_THROWS_AS(parse_kv_text("= 1\n"), ConfigError);
}

TEST_CASE("lambda specs: parse and echo round-trips") {
    const char* inputs[] = {
        "ones",
        "arithmetic(0.5,0.5,40)",
        "arithmetic(1,1,120)",
        "explicit(1,2.5,7)",
        "gaussian(1,20,50,100)",
    };
    for (const char* text : inputs) {
        const LambdaSpec spec = parse_lambda_spec(text);
        CHECK(to_string(spec) == text);
        // echo parses back to the same spec
        const LambdaSpec again = parse_lambda_spec(to_string(spec));
        CHECK(again.kind == spec.kind);
        CHECK(to_string(again) == to_string(spec));
    }

    const LambdaSpec ar = parse_lambda_spec("arithmetic(0.5, 0.5)");  // count defaults to m1
    CHECK(ar.kind == LambdaSpec::Kind::Arithmetic);
    CHECK(ar.count == 0);

    CHECK_THROWS_AS(parse_lambda_spec("ones(3)"), ConfigError);
    CHECK_THROWS_AS(parse_lambda_spec("arithmetic(1)"), ConfigError);
    CHECK_THROWS_AS(parse_lambda_spec("gaussian(0)"), ConfigError);
    CHECK_THROWS_AS(parse_lambda_spec("gaussian(-2)"), ConfigError);
    CHECK_THROWS_AS(parse_lambda_spec("fourier(1,2)"), ConfigError);
    CHECK_THROWS_AS(parse_lambda_spec("arithmetic(1,2"), ConfigError);
}

TEST_CASE("from_text: table defaults at desk scale") {
    const ExperimentConfig cfg = ExperimentConfig::from_text(kMinimal);
    CHECK(cfg.bench_id == BenchmarkId::Lin1d);
    CHECK(cfg.eps == 0.01);
    CHECK(cfg.p == 2.0);
    CHECK(cfg.family_id == FamilyId::SD2NN2);
    CHECK_FALSE(cfg.paper_scale);
    CHECK(cfg.seed == 1);
    CHECK(cfg.output_dir == "sd2nn_run");

    REQUIRE(cfg.family.n_subs() == 2);
    CHECK(cfg.family.subs[0].widths == std::vector<int>{13, 20, 15, 15, 10});
    CHECK(cfg.family.subs[1].widths == std::vector<int>{25, 15, 15, 13, 10});
    CHECK(cfg.family.alphas == std::vector<double>{0.01});

    CHECK(cfg.train.epochs == 20000);
    CHECK(cfg.train.batch_interior == 3000);
    CHECK(cfg.train.batch_boundary == 500);
    CHECK(cfg.train.eval_every == 1000);
    CHECK(cfg.train.adam.lr0 == 2e-4);
    CHECK(cfg.train.adam.decay == 5e-5);
    CHECK(cfg.train.rel_mode == RelMode::RatioOfSums);
}

TEST_CASE("from_text: paper scale keeps published sizes") {
    const ExperimentConfig cfg = ExperimentConfig::from_text(with_minimal("run.scale = paper\n"));
    CHECK(cfg.paper_scale);
    CHECK(cfg.family.subs[0].widths == std::vector<int>{50, 80, 60, 60, 40});
    CHECK(cfg.family.subs[1].widths == std::vector<int>{100, 60, 60, 50, 40});
    CHECK(cfg.train.epochs == 60000);

    const ExperimentConfig c2 = ExperimentConfig::from_text(
        "benchmark.id = coeff2d\nmodel.family = mscale\nrun.scale = paper\n");
    CHECK(c2.train.epochs == 100000);
    const ExperimentConfig c2d = ExperimentConfig::from_text(
        "benchmark.id = coeff2d\nmodel.family = mscale\n");
    CHECK(c2d.train.epochs == 30000);
}

TEST_CASE("from_text: explicit widths are taken verbatim, never rescaled") {
    const ExperimentConfig cfg =
        ExperimentConfig::from_text(with_minimal("model.sub1.widths = 8, 8, 4\n"));
    CHECK(cfg.family.subs[0].widths == std::vector<int>{13, 20, 15, 15, 10});  // still scaled
    CHECK(cfg.family.subs[1].widths == std::vector<int>{8, 8, 4});             // verbatim
}

TEST_CASE("from_text: duplicate keys last-wins") {
    const ExperimentConfig cfg =
        ExperimentConfig::from_text(with_minimal("run.seed = 5\nrun.seed = 9\n"));
    CHECK(cfg.seed == 9);
}

TEST_CASE("from_text: key overrides land in the resolved model") {
    const ExperimentConfig cfg = ExperimentConfig::from_text(with_minimal(
        "model.beta = 0\n"
        "model.gamma0 = 250\n"
        "model.boundary = unified\n"
        "model.orthogonality = off\n"
        "model.resnet = off\n"
        "model.alpha = 0.05\n"
        "model.sub0.lambda = explicit(1,2,3)\n"
        "model.sub1.first_act = tanh\n"
        "train.epochs = 123\n"
        "train.batch_interior = 77\n"
        "train.batch_boundary = 33\n"
        "train.lr0 = 1e-3\n"
        "train.decay = 0\n"
        "train.decay_formula = exponential\n"
        "train.eval_every = 50\n"
        "train.rel_mode = sum_of_ratios\n"
        "run.seed = 42\n"
        "run.output_dir = out/x\n"));
    CHECK(cfg.train.beta == 0.0);
    CHECK(cfg.train.gamma0 == 250.0);
    CHECK(cfg.family.boundary_mode == LossConfig::BoundaryMode::Unified);
    CHECK_FALSE(cfg.family.orthogonality);
    CHECK_FALSE(cfg.family.resnet);
    CHECK(cfg.family.alphas == std::vector<double>{0.05});
    CHECK(cfg.family.subs[0].lambda.kind == LambdaSpec::Kind::Explicit);
    CHECK(cfg.family.subs[0].lambda.values == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(cfg.family.subs[1].first_act.kind == Act::Tanh);
    CHECK(cfg.train.epochs == 123);
    CHECK(cfg.train.batch_interior == 77);
    CHECK(cfg.train.batch_boundary == 33);
    CHECK(cfg.train.adam.lr0 == 1e-3);
    CHECK(cfg.train.adam.decay == 0.0);
    CHECK(cfg.train.adam.decay_formula == AdamConfig::Decay::Exponential);
    CHECK(cfg.train.eval_every == 50);
    CHECK(cfg.train.rel_mode == RelMode::SumOfRatios);
    CHECK(cfg.seed == 42);
    CHECK(cfg.output_dir == "out/x");
}

TEST_CASE("from_text: relaxation rewrites every sfm activation") {
    const ExperimentConfig cfg =
        ExperimentConfig::from_text(with_minimal("model.relaxation = 0.7\n"));
    CHECK(cfg.family.subs[0].first_act.s == 0.7);  // table value 1.0
    CHECK(cfg.family.subs[1].first_act.s == 0.7);  // table value 0.5
    // non-sfm activations are untouched
    CHECK(cfg.family.subs[0].hidden_act.kind == Act::Tanh);

    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_text(
            "benchmark.id = lin1d\nmodel.family = dnn\nmodel.relaxation = 0.7\n"),
        "model.relaxation: family dnn has no sfm activation to relax", ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.relaxation = 0\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.relaxation = 1.2\n")),
                    ConfigError);
}

TEST_CASE("from_text: errors name the offending field") {
    // required keys
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_text("model.family = dnn\n"),
                         "benchmark.id: required key missing", ConfigError);
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_text("benchmark.id = lin1d\n"),
                         "model.family: required key missing", ConfigError);

    // balance-weight arity (one fine submodule here)
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_text(with_minimal("model.alpha = 0.1, 0.01\n")),
        "model.alpha: expected 1 balance value(s) (one per fine submodule), got 2",
        ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(
                        "benchmark.id = lin1d\nmodel.family = dnn\nmodel.alpha = 0.1\n"),
                    ConfigError);

    // energy exponent is pinned by the reference solution
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_text(with_minimal("benchmark.p = 3\n")),
                         "benchmark.p: the lin1d reference solution is derived for p = 2",
                         ConfigError);
    CHECK_NOTHROW(ExperimentConfig::from_text(with_minimal("benchmark.p = 2\n")));
    CHECK_NOTHROW(ExperimentConfig::from_text(
        "benchmark.id = nonlin1d_p8\nmodel.family = sd2nn2\nbenchmark.p = 8\n"));
    CHECK_THROWS_AS(ExperimentConfig::from_text(
                        "benchmark.id = pb3d\nmodel.family = sd2nn2\nbenchmark.p = 2\n"),
                    ConfigError);

    // problem parameters only exist where the benchmark has them
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_text(
                             "benchmark.id = coeff2d\nmodel.family = mscale\n"
                             "benchmark.eps = 0.1\n"),
                         "benchmark.eps: not applicable to coeff2d", ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("benchmark.eps1 = 0.1\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("benchmark.eps = -0.5\n")),
                    ConfigError);

    // unknown keys and enum typos
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_text(with_minimal("model.depth = 3\n")),
                         "unknown config key: model.depth", ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.boundary = both\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.orthogonality = yes\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("train.decay_formula = linear\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("run.scale = tiny\n")),
                    ConfigError);

    // submodule index range
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_text(with_minimal("model.sub2.widths = 4\n")),
        "model.sub2.widths: family sd2nn2 resolves to 2 submodules (sub0..sub1)", ConfigError);

    // numeric validation
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("train.epochs = -3\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("train.epochs = ten\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("train.batch_interior = 0\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("train.lr0 = 0\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.sub1.widths = 8,0\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_text(with_minimal("model.beta = -1\n")),
                    ConfigError);
}

TEST_CASE("snapshot: canonical echo reparses byte-identically") {
    const char* cases[] = {
        "benchmark.id = lin1d\nmodel.family = sd2nn2\n",
        "benchmark.id = lin1d\nmodel.family = dnn\nrun.seed = 17\n",
        "benchmark.id = nonlin1d_p8\nmodel.family = wwp\nbenchmark.eps = 0.1\n",
        "benchmark.id = threescale\nmodel.family = sd2nn2\nmodel.alpha = 0.2, 0.02\n",
        "benchmark.id = coeff2d\nmodel.family = sd2nn3\nrun.scale = paper\n",
        "benchmark.id = pb3d\nmodel.family = sd2nn2b\ntrain.lr0 = 3.5e-4\n",
        "benchmark.id = lin1d\nmodel.family = sd2nn2a\nmodel.relaxation = 0.35\n"
        "model.sub1.lambda = gaussian(2.5,80)\ntrain.decay_formula = exponential\n",
    };
    for (const char* text : cases) {
        const ExperimentConfig cfg = ExperimentConfig::from_text(text);
        const std::string snap = cfg.snapshot();
        const ExperimentConfig back = ExperimentConfig::from_text(snap);
        CHECK(back.snapshot() == snap);
    }
}

TEST_CASE("snapshot: resolved fields survive the round trip") {
    const ExperimentConfig cfg = ExperimentConfig::from_text(with_minimal(
        "model.relaxation = 0.25\ntrain.epochs = 444\nrun.seed = 31\n"));
    const ExperimentConfig back = ExperimentConfig::from_text(cfg.snapshot());
    CHECK(back.bench_id == cfg.bench_id);
    CHECK(back.eps == cfg.eps);
    CHECK(back.family_id == cfg.family_id);
    CHECK(back.family.subs[0].widths == cfg.family.subs[0].widths);
    CHECK(back.family.subs[1].widths == cfg.family.subs[1].widths);
    CHECK(back.family.subs[0].first_act.s == 0.25);
    CHECK(back.train.epochs == 444);
    CHECK(back.seed == 31);
    // snapshots echo post-scaling widths; a desk-scale reparse must not shrink
    // them again
    CHECK(back.family.subs[0].widths == std::vector<int>{13, 20, 15, 15, 10});
}

TEST_CASE("from_file: missing file is a config error") {
    CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/sd2nn.cfg"), ConfigError);
}

TEST_CASE("benchmark(): factory respects the parsed parameters") {
    const ExperimentConfig cfg = ExperimentConfig::from_text(
        "benchmark.id = threescale\nmodel.family = sd2nn2\n"
        "benchmark.eps1 = 0.2\nbenchmark.eps2 = 0.02\n");
    const BenchmarkDef bench = cfg.benchmark();
    CHECK(bench.id == BenchmarkId::ThreeScale);
    CHECK(bench.eps1 == 0.2);
    CHECK(bench.eps2 == 0.02);
    REQUIRE(cfg.family.n_subs() == 3);
}
