// Microbenchmarks for the training-loop hot paths: dense algebra with and
// without the backward pass, the augmentation pipeline, the full objective,
// and one brute-force theorem check. Shapes mirror the synthetic benchmark
// (16x16x3 images, batch 256, encoder widths 64/64/32).

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "relic/augment.hpp"
#include "relic/datagen.hpp"
#include "relic/network.hpp"
#include "relic/objective.hpp"
#include "relic/rng.hpp"
#include "relic/scm.hpp"
#include "relic/tensor.hpp"

namespace relic {
namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                     bool requires_grad) {
  Rng rng(seed);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = rng.uniform() - 0.5;
  return Tensor::from(std::move(values), {rows, cols}, requires_grad);
}

void BM_MatmulForward(benchmark::State& state) {
  const Tensor a = random_matrix(256, 768, 1, false);
  const Tensor b = random_matrix(768, 64, 2, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).values().data());
  }
}
BENCHMARK(BM_MatmulForward);

void BM_MatmulForwardBackward(benchmark::State& state) {
  for (auto _ : state) {
    Tape tape;
    const Tensor a = random_matrix(256, 768, 1, true);
    const Tensor b = random_matrix(768, 64, 2, true);
    Tensor loss;
    {
      Tape::Scope scope(tape);
      loss = mean(matmul(a, b));
    }
    tape.backward(loss);
    benchmark::DoNotOptimize(b.adjoint().data());
  }
}
BENCHMARK(BM_MatmulForwardBackward);

void BM_EncoderForward(benchmark::State& state) {
  NetworkSpec spec;
  spec.input_dim = 768;
  spec.layer_widths = {64, 64, 32};
  spec.normalize_output = true;
  const Parameters params = init_parameters(spec, 7, false);
  const Tensor batch = random_matrix(256, 768, 3, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(params, spec, batch).values().data());
  }
}
BENCHMARK(BM_EncoderForward);

void BM_RelicLossStep(benchmark::State& state) {
  NetworkSpec spec;
  spec.input_dim = 768;
  spec.layer_widths = {64, 64, 32};
  spec.normalize_output = true;
  const ObjectiveConfig cfg = preset("relic", spec.output_dim());
  const ModelParams model = init_model(spec, cfg, 11);
  const Tensor v1 = random_matrix(256, 768, 4, false);
  const Tensor v2 = random_matrix(256, 768, 5, false);
  for (auto _ : state) {
    Tape tape;
    LossParts parts;
    {
      Tape::Scope scope(tape);
      parts = relic_loss(v1, v2, model, cfg);
    }
    tape.backward(parts.total);
    benchmark::DoNotOptimize(parts.total.values().data());
  }
}
BENCHMARK(BM_RelicLossStep);

void BM_AugmentBatch(benchmark::State& state) {
  ContentStyleConfig data;
  data.samples_per_content = 64;  // 256 images
  const LabeledDataset ds = generate_content_style(data, 13);
  AugmentationSpec spec;
  const Rng base(17);
  std::uint64_t stream = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        augment_deterministic(ds.images, spec, base, stream++, 1)
            .pixels.data());
  }
}
BENCHMARK(BM_AugmentBatch);

void BM_GenerateDataset(benchmark::State& state) {
  ContentStyleConfig data;
  data.samples_per_content = 500;  // 2000 images
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        generate_content_style(data, seed++).images.pixels.data());
  }
}
BENCHMARK(BM_GenerateDataset);

// One exhaustive-style theorem check at the upper grid sizes: 3x3x4 model
// with two tasks and a 3-valued representation.
void BM_Theorem1Check(benchmark::State& state) {
  DiscreteSCM scm;
  scm.n_c = 3;
  scm.n_s = 3;
  scm.n_x = 4;
  scm.n_yr = 4;
  scm.n_yt = {3, 2};
  scm.p_c = {0.25, 0.5, 0.25};
  scm.p_s = {0.5, 0.25, 0.25};
  scm.p_x_given_cs.assign(scm.n_c * scm.n_s * scm.n_x, 0.25);
  scm.p_yr_given_c.assign(scm.n_c * scm.n_yr, 0.25);
  scm.tasks = {std::vector<double>(scm.n_yr * 3, 1.0 / 3.0),
               std::vector<double>(scm.n_yr * 2, 0.5)};
  scm.validate();
  RepresentationTable f;
  f.n_z = 3;
  f.z_of_x = {0, 1, 2, 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(verify_theorem1(scm, f, 1e-9).violation);
  }
}
BENCHMARK(BM_Theorem1Check);

}  // namespace
}  // namespace relic

BENCHMARK_MAIN();
