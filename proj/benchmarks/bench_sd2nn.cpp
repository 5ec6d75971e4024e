#include <benchmark/benchmark.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <Eigen/Core>

#include "sd2nn/activation.hpp"
#include "sd2nn/experiments.hpp"
#include "sd2nn/loss.hpp"
#include "sd2nn/optimizer.hpp"
#include "sd2nn/reference.hpp"
#include "sd2nn/rng.hpp"
#include "sd2nn/sampling.hpp"

using namespace sd2nn;

namespace {

// One full training epoch (fresh batches, loss + gradient, Adam step) for a
// desk-scale family on the 1D linear benchmark — the unit the acceptance
// budget is made of.
void epoch_for_family(benchmark::State& state, FamilyId id) {
    // the training loop keeps the per-epoch tape buffers inside the heap; the
    // epoch numbers are only comparable with the same allocator settings
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    const BenchmarkDef bench = BenchmarkDef::lin1d(0.01);
    ModelFamily fam = ModelFamily::table_defaults(id, bench.id);
    fam.scale_widths(4.0);
    CompositeModel model = fam.build(bench.dim, 1);

    LossConfig lcfg;
    lcfg.boundary_mode = fam.boundary_mode;
    lcfg.orthogonality = fam.orthogonality;
    lcfg.check_finite = false;

    AdamState adam(model.n_params(), {});
    Eigen::VectorXd params = model.params_flat();
    Eigen::VectorXd grad(model.n_params());
    const double volume = bench.domain.volume();

    long e = 0;
    for (auto _ : state) {
        const Eigen::MatrixXd xi =
            sample_interior(bench.domain, bench.batch_interior, rng::sub_seed(1, e, 0));
        const Eigen::MatrixXd xb =
            sample_boundary(bench.domain, bench.batch_boundary, rng::sub_seed(1, e, 1));
        Eigen::VectorXd g(xb.rows());
        for (Eigen::Index i = 0; i < xb.rows(); ++i) g[i] = 0.0;

        const LossComponents comps =
            total_loss(bench.form, model, lcfg, volume, xi, xb, g, e, 20000, &grad);
        adam.step(params, grad, e);
        model.set_params_flat(params);
        benchmark::DoNotOptimize(comps.total);
        ++e;
    }
}

void BM_epoch_dnn(benchmark::State& state) { epoch_for_family(state, FamilyId::DNN); }
void BM_epoch_mscale(benchmark::State& state) { epoch_for_family(state, FamilyId::Mscale); }
void BM_epoch_sd2nn2(benchmark::State& state) { epoch_for_family(state, FamilyId::SD2NN2); }

void BM_activation_batch(benchmark::State& state, Act kind) {
    rng::Engine eng(7);
    Eigen::MatrixXd z(3000, 80);
    for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = eng.uniform(-3.0, 3.0);
    Eigen::MatrixXd v, d1, d2;
    for (auto _ : state) {
        act_eval(kind, z, &v, &d1, &d2);
        benchmark::DoNotOptimize(v.data());
    }
    state.SetItemsProcessed(state.iterations() * z.size());
}

void BM_act_tanh(benchmark::State& state) { BM_activation_batch(state, Act::Tanh); }
void BM_act_s2relu(benchmark::State& state) { BM_activation_batch(state, Act::S2relu); }

void BM_sample_interval(benchmark::State& state) {
    const Domain dom = Domain::unit_interval();
    std::uint64_t seed = 1;
    for (auto _ : state) {
        const Eigen::MatrixXd x = sample_interior(dom, 3000, seed++);
        benchmark::DoNotOptimize(x.data());
    }
    state.SetItemsProcessed(state.iterations() * 3000);
}

void BM_sample_perforated(benchmark::State& state) {
    const Domain dom = Domain::perforated_cube();
    std::uint64_t seed = 1;
    for (auto _ : state) {
        const Eigen::MatrixXd x = sample_interior(dom, 6000, seed++);
        benchmark::DoNotOptimize(x.data());
    }
    state.SetItemsProcessed(state.iterations() * 6000);
}

void BM_fd_solve_2d(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const FieldN A = coeff_2d_multiscale();
    const FieldN f = [](const Eigen::VectorXd&) { return 1.0; };
    for (auto _ : state) {
        const GridSolution gs = fd_solve_2d(A, f, n, -1.0, 1.0);
        benchmark::DoNotOptimize(gs.values.data());
    }
}

}  // namespace

BENCHMARK(BM_epoch_dnn)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_epoch_mscale)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_epoch_sd2nn2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_act_tanh)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_act_s2relu)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_sample_interval)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_sample_perforated)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_fd_solve_2d)->Arg(33)->Arg(65)->Arg(129)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
