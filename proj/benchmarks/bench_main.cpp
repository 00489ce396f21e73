#include <benchmark/benchmark.h>

#include <random>

#include "caibc/branches.hpp"

using namespace caibc;

namespace {

RgbImage random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> d(0.0, 255.0);
  RgbImage img;
  img.height = h;
  img.width = w;
  for (auto& ch : img.chan) {
    ch.resize(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) ch(r, c) = d(rng);
    }
  }
  return img;
}

ModelParams default_model() {
  ModelConfig cfg;
  cfg.num_classes = 40;
  std::vector<TokenSequence> corpus = {
      TokenSequence{{"a", "red", "shirt", "and", "blue", "pants", "hat"}}};
  return ModelParams::init(cfg, Vocabulary::build(corpus), 1);
}

void BM_RgbToGrayscale(benchmark::State& state) {
  std::mt19937_64 rng(1);
  RgbImage img = random_image(rng, 48, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rgb_to_grayscale(img));
  }
}
BENCHMARK(BM_RgbToGrayscale);

void BM_Cosine(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd u(state.range(0)), v(state.range(0));
  for (int i = 0; i < state.range(0); ++i) {
    u(i) = d(rng);
    v(i) = d(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(cosine(u, v));
  }
}
BENCHMARK(BM_Cosine)->Arg(64)->Arg(384);

void BM_VisualBackbone(benchmark::State& state) {
  ModelParams model = default_model();
  std::mt19937_64 rng(3);
  RgbImage img = random_image(rng, 48, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(visual_backbone(img, model, "rgb"));
  }
}
BENCHMARK(BM_VisualBackbone);

void BM_RgbBranchForward(benchmark::State& state) {
  ModelParams model = default_model();
  std::mt19937_64 rng(4);
  RgbImage img = random_image(rng, 48, 16);
  TokenSequence toks{{"a", "red", "shirt", "and", "blue", "pants"}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_rgb_branch(img, toks, model));
  }
}
BENCHMARK(BM_RgbBranchForward);

void BM_MaskColors(benchmark::State& state) {
  ColorBank bank({"red", "blue", "green", "yellow"});
  TokenSequence toks{{"a", "red", "shirt", "and", "blue", "pants", "with",
                      "yellow", "hat"}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mask_colors(toks, bank));
  }
}
BENCHMARK(BM_MaskColors);

}  // namespace

BENCHMARK_MAIN();
