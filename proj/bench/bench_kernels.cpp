// OpenMP kernels against their serial references, plus one loss-level
// comparison (per-example reduction, parallel vs serial).
//
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "unlearn/kernels.h"
#include "unlearn/objectives.h"
#include "unlearn/tiny_lm.h"

using namespace unlearn;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <void (*Gemm)(std::size_t, std::size_t, std::size_t, std::span<const double>, std::span<const double>,
                       std::span<double>)>
void bm_gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
    std::vector<double> c(n * n, 0.0);
    for (auto _ : state) {
        Gemm(n, n, n, a, b, c);
        benchmark::DoNotOptimize(c.data());
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}

template <void (*Norm)(std::size_t, std::size_t, std::span<const double>, std::span<const double>,
                       std::span<const double>, std::span<double>, std::span<double>, std::span<double>)>
void bm_layernorm(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t n = 64;
    const auto x = random_vector(rows * n, 3);
    const std::vector<double> gamma(n, 1.0), beta(n, 0.0);
    std::vector<double> xhat(rows * n), rstd(rows), y(rows * n);
    for (auto _ : state) {
        Norm(rows, n, x, gamma, beta, xhat, rstd, y);
        benchmark::DoNotOptimize(y.data());
    }
}

template <void (*Softmax)(std::size_t, std::size_t, std::span<double>)>
void bm_softmax(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const std::size_t n = 256;
    const auto x0 = random_vector(rows * n, 4);
    std::vector<double> x(x0.size());
    for (auto _ : state) {
        x = x0;
        Softmax(rows, n, x);
        benchmark::DoNotOptimize(x.data());
    }
}

// Desk-sized TinyLM and a batch of random spans.
struct LossFixture {
    ModelHandle model;
    std::vector<TokenSpan> batch;

    LossFixture() : model(make()) {
        std::mt19937_64 rng(7);
        std::uniform_int_distribution<int> tok(4, static_cast<int>(model->vocab_size()) - 1);
        for (int i = 0; i < 16; ++i) {
            TokenSpan s;
            s.example_id = "b" + std::to_string(i);
            for (int t = 0; t < 40; ++t) {
                s.tokens.push_back(tok(rng));
                s.loss_mask.push_back(t >= 24 ? 1 : 0);
            }
            batch.push_back(s);
        }
    }

    static ModelHandle make() {
        std::vector<std::string> vocab = {"<pad>", "<unk>", "<bos>", "<eos>"};
        for (int i = 0; i < 300; ++i) vocab.push_back("w" + std::to_string(i));
        TinyLmSpec spec;
        spec.embed_dim = 64;
        spec.n_layers = 2;
        spec.n_heads = 4;
        spec.context_window = 64;
        spec.seed = 1;
        return ModelHandle(std::make_unique<TinyLm>(spec, Tokenizer::from_vocabulary(vocab)));
    }
};

void bm_loss_nll(benchmark::State& state) {
    static LossFixture f;
    const auto exec = state.range(0) == 0 ? Execution::serial : Execution::parallel;
    std::vector<double> grad(f.model->parameter_count());
    for (auto _ : state) {
        std::fill(grad.begin(), grad.end(), 0.0);
        benchmark::DoNotOptimize(loss_nll(f.model, f.batch, grad, 1.0, exec));
    }
    state.SetLabel(exec == Execution::serial ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(bm_gemm<kernels::reference::gemm_nn>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::gemm_nn>)->Name("gemm_nn/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::reference::gemm_nt>)->Name("gemm_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::gemm_nt>)->Name("gemm_nt/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::reference::gemm_tn>)->Name("gemm_tn/serial")->Arg(64)->Arg(256);
BENCHMARK(bm_gemm<kernels::gemm_tn>)->Name("gemm_tn/omp")->Arg(64)->Arg(256);
BENCHMARK(bm_layernorm<kernels::reference::layernorm_forward>)->Name("layernorm/serial")->Arg(64)->Arg(1024);
BENCHMARK(bm_layernorm<kernels::layernorm_forward>)->Name("layernorm/omp")->Arg(64)->Arg(1024);
BENCHMARK(bm_softmax<kernels::reference::softmax_rows>)->Name("softmax/serial")->Arg(64)->Arg(1024);
BENCHMARK(bm_softmax<kernels::softmax_rows>)->Name("softmax/omp")->Arg(64)->Arg(1024);
BENCHMARK(bm_loss_nll)->Name("loss_nll")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
