// Serial reference kernels against their OpenMP counterparts, and serial
// against parallel minibatch gradients.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sta/kernels.hpp"
#include "sta/trainer.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

template <void (*Gemv)(const double*, std::size_t, std::size_t, const double*, double*)>
void BM_Gemv(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto w = random_vec(n * n, 1);
    const auto x = random_vec(n, 2);
    std::vector<double> y(n);
    for (auto _ : state) {
        Gemv(w.data(), n, n, x.data(), y.data());
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <void (*GemvT)(const double*, std::size_t, std::size_t, const double*, double*)>
void BM_GemvTransposed(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto w = random_vec(n * n, 3);
    const auto g = random_vec(n, 4);
    std::vector<double> out(n);
    for (auto _ : state) {
        GemvT(w.data(), n, n, g.data(), out.data());
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <void (*Ger)(const double*, std::size_t, const double*, std::size_t, double*)>
void BM_Outer(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto g = random_vec(n, 5);
    const auto x = random_vec(n, 6);
    std::vector<double> out(n * n);
    for (auto _ : state) {
        Ger(g.data(), n, x.data(), n, out.data());
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <void (*Gemm)(const double*, std::size_t, std::size_t, const double*, std::size_t, double*)>
void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vec(n * n, 7);
    const auto b = random_vec(n * n, 8);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        Gemm(a.data(), n, n, b.data(), n, c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

namespace k = sta::kernels;

BENCHMARK(BM_Gemv<k::serial::gemv>)->Name("gemv/serial")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_Gemv<k::omp::gemv>)->Name("gemv/omp")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_GemvTransposed<k::serial::gemv_t_acc>)->Name("gemv_t_acc/serial")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_GemvTransposed<k::omp::gemv_t_acc>)->Name("gemv_t_acc/omp")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_Outer<k::serial::ger_acc>)->Name("ger_acc/serial")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_Outer<k::omp::ger_acc>)->Name("ger_acc/omp")->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_Gemm<k::serial::gemm>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<k::omp::gemm>)->Name("gemm/omp")->Arg(64)->Arg(256);

// SBU-sized model (K=30, H=100, 3 layers) on a batch of synthetic sequences.
struct BatchFixture {
    sta::STAModel model;
    sta::Dataset data;
    std::vector<const sta::SkeletonSequence*> batch;

    explicit BatchFixture(std::size_t batch_size) {
        sta::ModelShape shape;
        shape.classes = 8;
        model = sta::init_params(shape, 1);
        sta::SyntheticConfig sc = sta::one_joint_per_class(8, 30);
        sc.n_sequences = batch_size;
        sc.min_len = 40;
        sc.max_len = 40;
        data = sta::gen_synthetic(sc);
        for (const auto& s : data) batch.push_back(&s);
    }
};

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
    const BatchFixture f(static_cast<std::size_t>(state.range(0)));
    sta::BatchOptions opts;
    opts.dropout = 0.5;
    const auto loss = sta::LossConfig::sbu();
    for (auto _ : state) {
        auto r = Parallel ? sta::batch_gradient_parallel(f.model, f.batch, loss, sta::GroupMask::all(), opts)
                          : sta::batch_gradient_serial(f.model, f.batch, loss, sta::GroupMask::all(), opts);
        benchmark::DoNotOptimize(r.loss);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/parallel")->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
