#ifndef CAIBC_TRAINER_HPP_
#define CAIBC_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "caibc/losses.hpp"

namespace caibc {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  int ids_per_batch = 8;
  double lr_backbone = 1e-4;  // fine-tuning group
  double lr_rest = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double flip_prob = 0.5;
  int lr_decay_epoch = 0;    // 0 disables the step decay
  double lr_decay = 0.1;     // multiplier applied from lr_decay_epoch on
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  Supervision supervision = Supervision::kFull;
  BranchConfig branches;
  LossWeights loss_weights;
  ModelConfig model;
  int bank_min_count = 1;
  std::string lexicon_path;  // seed color lexicon file

  void validate() const;
  static TrainConfig load(const std::string& path);
  void save(const std::string& path) const;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;
  double total = 0.0;
  std::map<std::string, double> terms;
};

struct TrainState {
  ModelParams model;
  ColorBank bank;
  std::map<std::string, nn::Matrix> adam_m;
  std::map<std::string, nn::Matrix> adam_v;
  long adam_t = 0;
  int epoch = 0;
  std::mt19937_64 sampler_rng;
  std::mt19937_64 flip_rng;
  TrainConfig config;
};

// Vocabulary and color bank from the training captions, model parameters
// seeded from config.seed.
TrainState init_train_state(const TrainConfig& config,
                            const DatasetManifest& manifest);

// One sampled batch: forward active branches, total loss, Adam update.
// Throws DivergenceError on a non-finite loss.
StepRecord train_one_step(TrainState& state, const DatasetManifest& manifest);

// Full training run. log_cb, when set, receives every step record.
TrainState train(const TrainConfig& config, const DatasetManifest& manifest,
                 std::vector<StepRecord>* history = nullptr,
                 const std::string& checkpoint_dir = "",
                 const std::function<void(const StepRecord&)>& log_cb = nullptr);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);
TrainState checkpoint_roundtrip(const TrainState& state, const std::string& path);

// Learning-rate group partition by parameter name.
enum class ParamGroup { kBackbone, kRest };
ParamGroup param_group(const std::string& name);

// --- gradient audit ---

struct AuditReport {
  struct Term {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<Term> terms;
  double threshold = 1e-3;
  bool passed = false;
};

// Central finite-difference check of every loss term and encoder op at toy
// dimensions. corruption, when nonzero, is added to one analytic gradient
// entry per term (harness self-test).
AuditReport gradient_audit(std::uint64_t seed, double corruption = 0.0);

}  // namespace caibc

#endif  // CAIBC_TRAINER_HPP_
