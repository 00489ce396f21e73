#include "caibc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caibc/errors.hpp"

namespace caibc {

using nlohmann::json;
using nn::Matrix;
using nn::Var;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
  if (lr_backbone <= 0.0 || lr_rest <= 0.0) {
    throw ConfigError("train config: learning rates must be positive");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    throw ConfigError("train config: flip_prob must lie in [0, 1]");
  }
  if (lr_decay <= 0.0) throw ConfigError("train config: lr_decay must be positive");
  branches.validate();
  loss_weights.validate();
}

namespace {

json branches_to_json(const BranchConfig& b) {
  return json{{"rgb", b.rgb},
              {"grs", b.grs},
              {"clr", b.clr},
              {"color_prior", b.color_prior},
              {"detach_grs", b.detach_grs},
              {"fusion_weights", b.fusion_weights}};
}

BranchConfig branches_from_json(const json& j) {
  BranchConfig b;
  b.rgb = j.value("rgb", b.rgb);
  b.grs = j.value("grs", b.grs);
  b.clr = j.value("clr", b.clr);
  b.color_prior = j.value("color_prior", b.color_prior);
  b.detach_grs = j.value("detach_grs", b.detach_grs);
  if (j.contains("fusion_weights")) {
    b.fusion_weights = j.at("fusion_weights").get<std::map<std::string, double>>();
  }
  return b;
}

json model_to_json(const ModelConfig& m) {
  return json{{"input_h", m.input_h},
              {"input_w", m.input_w},
              {"embed_dim", m.embed_dim},
              {"feat_dim", m.feat_dim},
              {"parts", m.parts},
              {"conv_channels", m.conv_channels},
              {"conv_strides", m.conv_strides},
              {"conv_ksize", m.conv_ksize},
              {"num_classes", m.num_classes},
              {"gamma_init", m.gamma_init},
              {"share_classifier", m.share_classifier}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.input_h = j.value("input_h", m.input_h);
  m.input_w = j.value("input_w", m.input_w);
  m.embed_dim = j.value("embed_dim", m.embed_dim);
  m.feat_dim = j.value("feat_dim", m.feat_dim);
  m.parts = j.value("parts", m.parts);
  m.conv_channels = j.value("conv_channels", m.conv_channels);
  m.conv_strides = j.value("conv_strides", m.conv_strides);
  m.conv_ksize = j.value("conv_ksize", m.conv_ksize);
  m.num_classes = j.value("num_classes", m.num_classes);
  m.gamma_init = j.value("gamma_init", m.gamma_init);
  m.share_classifier = j.value("share_classifier", m.share_classifier);
  return m;
}

json config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"ids_per_batch", c.ids_per_batch},
              {"lr_backbone", c.lr_backbone},
              {"lr_rest", c.lr_rest},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"seed", c.seed},
              {"flip_prob", c.flip_prob},
              {"lr_decay_epoch", c.lr_decay_epoch},
              {"lr_decay", c.lr_decay},
              {"checkpoint_every", c.checkpoint_every},
              {"supervision", supervision_name(c.supervision)},
              {"branches", branches_to_json(c.branches)},
              {"loss", json{{"mutual", c.loss_weights.mutual},
                            {"id", c.loss_weights.id},
                            {"triplet", c.loss_weights.triplet},
                            {"margin", c.loss_weights.margin}}},
              {"model", model_to_json(c.model)},
              {"bank_min_count", c.bank_min_count},
              {"lexicon_path", c.lexicon_path}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.ids_per_batch = j.value("ids_per_batch", c.ids_per_batch);
  c.lr_backbone = j.value("lr_backbone", c.lr_backbone);
  c.lr_rest = j.value("lr_rest", c.lr_rest);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.seed = j.value("seed", c.seed);
  c.flip_prob = j.value("flip_prob", c.flip_prob);
  c.lr_decay_epoch = j.value("lr_decay_epoch", c.lr_decay_epoch);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.supervision = supervision_from_name(j.value("supervision", std::string("full")));
  if (j.contains("branches")) c.branches = branches_from_json(j.at("branches"));
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    c.loss_weights.mutual = l.value("mutual", c.loss_weights.mutual);
    c.loss_weights.id = l.value("id", c.loss_weights.id);
    c.loss_weights.triplet = l.value("triplet", c.loss_weights.triplet);
    c.loss_weights.margin = l.value("margin", c.loss_weights.margin);
  }
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  c.bank_min_count = j.value("bank_min_count", c.bank_min_count);
  c.lexicon_path = j.value("lexicon_path", c.lexicon_path);
  return c;
}

std::set<std::string> default_color_lexicon() {
  std::set<std::string> lex(palette_names().begin(), palette_names().end());
  for (const char* extra : {"grey", "navy", "beige", "maroon", "cyan", "magenta",
                            "tan", "khaki", "violet", "teal", "olive", "golden"}) {
    lex.insert(extra);
  }
  return lex;
}

}  // namespace

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("train config parse error: " + std::string(e.what()));
  }
  TrainConfig c = config_from_json(j);
  c.validate();
  return c;
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write train config: " + path);
  out << config_to_json(*this).dump(2) << "\n";
}

ParamGroup param_group(const std::string& name) {
  return ModelParams::is_backbone_param(name) ? ParamGroup::kBackbone
                                              : ParamGroup::kRest;
}

TrainState init_train_state(const TrainConfig& config,
                            const DatasetManifest& manifest) {
  config.validate();
  if (manifest.records.empty()) throw DataError("training manifest is empty");

  std::vector<TokenSequence> corpus;
  corpus.reserve(manifest.records.size());
  for (const PersonRecord& r : manifest.records) corpus.push_back(tokenize(r.caption));

  std::set<std::string> lexicon = config.lexicon_path.empty()
                                      ? default_color_lexicon()
                                      : [&] {
                                          ColorBank lex = ColorBank::load(config.lexicon_path);
                                          return lex.words();
                                        }();

  TrainState state;
  state.config = config;
  state.bank = build_color_bank(corpus, lexicon, config.bank_min_count);
  Vocabulary vocab = Vocabulary::build(corpus);

  ModelConfig mc = config.model;
  mc.num_classes = manifest.identity_count;
  state.model = ModelParams::init(mc, vocab, config.seed);
  state.sampler_rng.seed(config.seed + 0x5a5a5a5aULL);
  state.flip_rng.seed(config.seed + 0xf11bf11bULL);
  return state;
}

StepRecord train_one_step(TrainState& state, const DatasetManifest& manifest) {
  const TrainConfig& cfg = state.config;
  std::vector<int> indices =
      cfg.supervision == Supervision::kWeak
          ? pair_batch_sample(manifest, cfg.batch_size, state.sampler_rng)
          : identity_batch_sample(manifest, cfg.batch_size, cfg.ids_per_batch,
                                  state.sampler_rng);

  nn::Tape tape;
  ForwardCtx ctx{tape, state.model, {}};
  std::vector<SampleVars> vars;
  std::vector<int> labels;
  vars.reserve(indices.size());
  for (int idx : indices) {
    const PersonRecord& rec = manifest.records[idx];
    RgbImage image = rec.image;
    if (cfg.flip_prob > 0.0) {
      double u = static_cast<double>(state.flip_rng()) /
                 static_cast<double>(std::mt19937_64::max());
      if (u < cfg.flip_prob) image = hflip(image);
    }
    TokenSequence tokens = tokenize(rec.caption);
    SampleVars sv;
    if (cfg.branches.rgb) sv.rgb = run_rgb_branch_t(ctx, image, tokens);
    if (cfg.branches.grs) sv.grs = run_grs_branch_t(ctx, image, tokens, state.bank);
    if (cfg.branches.clr) {
      sv.clr = run_clr_branch_t(ctx, sv.rgb, sv.grs,
                                extract_color_prior(tokens, state.bank),
                                cfg.branches.color_prior, cfg.branches.detach_grs);
    }
    vars.push_back(std::move(sv));
    labels.push_back(rec.identity);
  }

  LossBreakdown breakdown;
  Var total = total_loss_t(ctx, vars, labels, cfg.loss_weights, cfg.branches,
                           cfg.supervision, &breakdown);
  if (!std::isfinite(breakdown.total)) {
    throw DivergenceError("non-finite training loss");
  }
  tape.backward(total);

  // Adam with two learning-rate groups
  state.adam_t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.adam_t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.adam_t));
  for (const auto& [name, var] : ctx.used) {
    Matrix g = tape.grad(var);
    Matrix& theta = state.model.at(name);
    auto mit = state.adam_m.find(name);
    if (mit == state.adam_m.end()) {
      state.adam_m[name] = Matrix::Zero(theta.rows(), theta.cols());
      state.adam_v[name] = Matrix::Zero(theta.rows(), theta.cols());
    }
    Matrix& m = state.adam_m[name];
    Matrix& v = state.adam_v[name];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    double lr = param_group(name) == ParamGroup::kBackbone ? cfg.lr_backbone
                                                           : cfg.lr_rest;
    if (cfg.lr_decay_epoch > 0 && state.epoch >= cfg.lr_decay_epoch) {
      lr *= cfg.lr_decay;
    }
    Matrix mhat = m / corr1;
    Matrix vhat = v / corr2;
    theta.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.adam_eps);
  }

  StepRecord rec;
  rec.epoch = state.epoch;
  rec.total = breakdown.total;
  rec.terms = std::move(breakdown.terms);
  return rec;
}

TrainState train(const TrainConfig& config, const DatasetManifest& manifest,
                 std::vector<StepRecord>* history, const std::string& checkpoint_dir,
                 const std::function<void(const StepRecord&)>& log_cb) {
  TrainState state = init_train_state(config, manifest);
  const int steps_per_epoch = static_cast<int>(
      (manifest.records.size() + config.batch_size - 1) / config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    state.epoch = epoch;
    for (int step = 0; step < steps_per_epoch; ++step) {
      StepRecord rec = train_one_step(state, manifest);
      rec.step = step;
      if (log_cb) log_cb(rec);
      if (history) history->push_back(std::move(rec));
    }
    if (config.checkpoint_every > 0 && !checkpoint_dir.empty() &&
        (epoch + 1) % config.checkpoint_every == 0) {
      std::filesystem::create_directories(checkpoint_dir);
      save_checkpoint(state, checkpoint_dir + "/epoch_" + std::to_string(epoch + 1) +
                                 ".ckpt");
    }
  }
  state.epoch = config.epochs;
  return state;
}

// --- checkpoints ---

namespace {

constexpr char kCkptMagic[8] = {'C', 'A', 'I', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint truncated");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  std::uint64_t n = read_u64(in);
  if (n > (1ULL << 32)) throw DataError("checkpoint string length is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated");
  return s;
}

void write_tensor_map(std::ostream& out, const std::map<std::string, Matrix>& m) {
  write_u64(out, m.size());
  for (const auto& [name, t] : m) {
    write_string(out, name);
    write_u64(out, static_cast<std::uint64_t>(t.rows()));
    write_u64(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
  }
}

std::map<std::string, Matrix> read_tensor_map(std::istream& in) {
  std::map<std::string, Matrix> m;
  std::uint64_t count = read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    auto rows = static_cast<Eigen::Index>(read_u64(in));
    auto cols = static_cast<Eigen::Index>(read_u64(in));
    Matrix t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!in) throw DataError("checkpoint truncated");
    m[name] = std::move(t);
  }
  return m;
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream oss;
  oss << rng;
  return oss.str();
}

void set_rng_state(std::mt19937_64& rng, const std::string& state) {
  std::istringstream iss(state);
  iss >> rng;
  if (iss.fail()) throw DataError("checkpoint rng state is malformed");
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, sizeof kCkptMagic);
  out.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof kCkptVersion);

  json meta;
  meta["config"] = config_to_json(state.config);
  meta["model_config"] = model_to_json(state.model.config);
  meta["vocab"] = state.model.vocab.tokens();
  meta["bank_words"] = state.bank.words();
  meta["bank_mask"] = state.bank.mask_token();
  meta["adam_t"] = state.adam_t;
  meta["epoch"] = state.epoch;
  meta["sampler_rng"] = rng_state(state.sampler_rng);
  meta["flip_rng"] = rng_state(state.flip_rng);
  write_string(out, meta.dump());

  write_tensor_map(out, state.model.tensors);
  write_tensor_map(out, state.adam_m);
  write_tensor_map(out, state.adam_v);
  if (!out) throw DataError("checkpoint write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCkptMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kCkptVersion) {
    throw DataError("unsupported checkpoint version in " + path);
  }

  json meta;
  try {
    meta = json::parse(read_string(in));
  } catch (const json::exception& e) {
    throw DataError("checkpoint metadata parse error: " + std::string(e.what()));
  }

  TrainState state;
  state.config = config_from_json(meta.at("config"));
  state.model.config = model_from_json(meta.at("model_config"));
  state.model.vocab =
      Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  state.bank = ColorBank(meta.at("bank_words").get<std::set<std::string>>(),
                         meta.at("bank_mask").get<std::string>());
  state.adam_t = meta.at("adam_t").get<long>();
  state.epoch = meta.at("epoch").get<int>();
  set_rng_state(state.sampler_rng, meta.at("sampler_rng").get<std::string>());
  set_rng_state(state.flip_rng, meta.at("flip_rng").get<std::string>());

  state.model.tensors = read_tensor_map(in);
  state.adam_m = read_tensor_map(in);
  state.adam_v = read_tensor_map(in);
  return state;
}

TrainState checkpoint_roundtrip(const TrainState& state, const std::string& path) {
  save_checkpoint(state, path);
  return load_checkpoint(path);
}

// --- gradient audit ---

namespace {

using Probe = std::function<Var(ForwardCtx&)>;

Var weighted_sum(nn::Tape& t, Var x, const Matrix& w) {
  return t.sum(t.mul(x, t.constant(w)));
}

Matrix random_weights(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix w(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = dist(rng);
  }
  return w;
}

double probe_value(ModelParams& model, const Probe& probe) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  return nn::scalar(tape, probe(ctx));
}

double audit_term(ModelParams& model, const Probe& probe, std::mt19937_64& rng,
                  double corruption, int entries_per_tensor) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  Var out = probe(ctx);
  tape.backward(out);

  std::map<std::string, Matrix> analytic;
  for (const auto& [name, var] : ctx.used) analytic[name] = tape.grad(var);
  if (corruption != 0.0 && !analytic.empty()) {
    analytic.begin()->second(0, 0) += corruption;
  }

  const double h = 1e-5;
  double max_rel = 0.0;
  for (auto& [name, grad] : analytic) {
    Matrix& theta = model.at(name);
    for (int probe_i = 0; probe_i < entries_per_tensor; ++probe_i) {
      int r = static_cast<int>(rng() % static_cast<std::uint64_t>(theta.rows()));
      int c = static_cast<int>(rng() % static_cast<std::uint64_t>(theta.cols()));
      double saved = theta(r, c);
      theta(r, c) = saved + h;
      double f_plus = probe_value(model, probe);
      theta(r, c) = saved - h;
      double f_minus = probe_value(model, probe);
      theta(r, c) = saved;
      double numeric = (f_plus - f_minus) / (2.0 * h);
      double a = grad(r, c);
      double rel = std::abs(a - numeric) /
                   std::max({1.0, std::abs(a), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace

AuditReport gradient_audit(std::uint64_t seed, double corruption) {
  // toy dimensions: C=8, P=8, K=2, M=3, batch of 4
  ModelConfig mc;
  mc.input_h = 16;
  mc.input_w = 8;
  mc.embed_dim = 8;
  mc.feat_dim = 8;
  mc.parts = 2;
  mc.conv_channels = {4, 8};
  mc.conv_strides = {2, 2};
  mc.num_classes = 3;
  mc.gamma_init = 4.0;

  std::vector<TokenSequence> corpus = {
      tokenize("a red plain shirt and a hat"),
      tokenize("blue pants and boots"),
      tokenize("a green dotted shirt and gray pants"),
      tokenize("a person wearing a yellow scarf"),
  };
  Vocabulary vocab = Vocabulary::build(corpus);
  ModelParams model = ModelParams::init(mc, vocab, seed);
  ColorBank bank = build_color_bank(
      corpus, {"red", "blue", "green", "yellow", "gray"}, 1);

  std::mt19937_64 rng(seed ^ 0xaadbeefULL);
  SynthSpec spec;
  spec.image_height = mc.input_h;
  spec.image_width = mc.input_w;
  spec.seed = seed;
  std::vector<IdentityAttributes> attrs = synth_attributes(spec);
  std::vector<RgbImage> images;
  for (int i = 0; i < 4; ++i) images.push_back(render_identity(spec, attrs[i]));
  std::vector<int> labels = {0, 1, 2, 0};

  const int B = 4;
  LossWeights weights;
  BranchConfig branches;  // all three active

  auto forward_batch = [&](ForwardCtx& ctx) {
    std::vector<SampleVars> out;
    for (int i = 0; i < B; ++i) {
      TokenSequence tokens = corpus[i];
      SampleVars sv;
      sv.rgb = run_rgb_branch_t(ctx, images[i], tokens);
      sv.grs = run_grs_branch_t(ctx, images[i], tokens, bank);
      sv.clr = run_clr_branch_t(ctx, sv.rgb, sv.grs,
                                extract_color_prior(tokens, bank), true, false);
      out.push_back(std::move(sv));
    }
    return out;
  };

  const int map_size = mc.map_channels() * mc.map_h() * mc.map_w();
  Matrix w_map = random_weights(rng, mc.map_channels(), mc.map_h() * mc.map_w());
  Matrix w_vec = random_weights(rng, mc.feat_dim, 1);
  Matrix w_probs = random_weights(rng, mc.num_classes, 1);
  (void)map_size;
  TokenSequence probe_tokens = corpus[2];
  Matrix w_words =
      random_weights(rng, static_cast<Eigen::Index>(probe_tokens.size()), mc.embed_dim);

  std::vector<std::pair<std::string, Probe>> probes;
  probes.emplace_back("visual_backbone", [&](ForwardCtx& ctx) {
    return weighted_sum(ctx.tape, visual_backbone_t(ctx, images[0], "rgb"), w_map);
  });
  probes.emplace_back("global_pool_project", [&](ForwardCtx& ctx) {
    Var map = visual_backbone_t(ctx, images[0], "rgb");
    return weighted_sum(ctx.tape, global_pool_project_t(ctx, map, "rgb"), w_vec);
  });
  probes.emplace_back("local_partition_project", [&](ForwardCtx& ctx) {
    Var map = visual_backbone_t(ctx, images[1], "rgb");
    auto parts = local_partition_project_t(ctx, map, "rgb");
    Var acc = weighted_sum(ctx.tape, parts[0], w_vec);
    for (std::size_t k = 1; k < parts.size(); ++k) {
      acc = ctx.tape.add(acc, weighted_sum(ctx.tape, parts[k], w_vec));
    }
    return acc;
  });
  probes.emplace_back("text_word_reps", [&](ForwardCtx& ctx) {
    Var E = text_word_reps_t(ctx, ctx.model.vocab.ids(probe_tokens));
    return weighted_sum(ctx.tape, E, w_words);
  });
  probes.emplace_back("text_global", [&](ForwardCtx& ctx) {
    Var E = text_word_reps_t(ctx, ctx.model.vocab.ids(probe_tokens));
    return weighted_sum(ctx.tape, text_global_t(ctx, E, "rgb"), w_vec);
  });
  probes.emplace_back("word_attention_locals", [&](ForwardCtx& ctx) {
    Var E = text_word_reps_t(ctx, ctx.model.vocab.ids(probe_tokens));
    auto parts = word_attention_locals_t(ctx, E, "rgb");
    Var acc = weighted_sum(ctx.tape, parts[0], w_vec);
    for (std::size_t k = 1; k < parts.size(); ++k) {
      acc = ctx.tape.add(acc, weighted_sum(ctx.tape, parts[k], w_vec));
    }
    return acc;
  });
  probes.emplace_back("class_probs", [&](ForwardCtx& ctx) {
    Var E = text_word_reps_t(ctx, ctx.model.vocab.ids(probe_tokens));
    Var feat = text_global_t(ctx, E, "rgb");
    Var probs = class_probs_t(ctx.tape, feat, ctx.p("head.global.W"),
                              ctx.p("head.global.gamma"));
    return weighted_sum(ctx.tape, probs, w_probs);
  });
  probes.emplace_back("clr_branch", [&](ForwardCtx& ctx) {
    SampleVars sv;
    sv.rgb = run_rgb_branch_t(ctx, images[2], corpus[2]);
    sv.grs = run_grs_branch_t(ctx, images[2], corpus[2], bank);
    sv.clr = run_clr_branch_t(ctx, sv.rgb, sv.grs,
                              extract_color_prior(corpus[2], bank), true, false);
    return ctx.tape.add(weighted_sum(ctx.tape, sv.clr.visual_color, w_vec),
                        weighted_sum(ctx.tape, sv.clr.text_color, w_vec));
  });
  probes.emplace_back("id_loss", [&](ForwardCtx& ctx) {
    auto batch = forward_batch(ctx);
    LossWeights w = weights;
    w.mutual = 0.0;
    w.triplet = 0.0;
    return total_loss_t(ctx, batch, labels, w, branches, Supervision::kFull,
                        nullptr);
  });
  probes.emplace_back("triplet_loss", [&](ForwardCtx& ctx) {
    auto batch = forward_batch(ctx);
    LossWeights w = weights;
    w.mutual = 0.0;
    w.id = 0.0;
    return total_loss_t(ctx, batch, labels, w, branches, Supervision::kFull,
                        nullptr);
  });
  probes.emplace_back("ml_loss", [&](ForwardCtx& ctx) {
    auto batch = forward_batch(ctx);
    LossWeights w = weights;
    w.id = 0.0;
    w.triplet = 0.0;
    return total_loss_t(ctx, batch, labels, w, branches, Supervision::kFull,
                        nullptr);
  });
  probes.emplace_back("total_loss", [&](ForwardCtx& ctx) {
    auto batch = forward_batch(ctx);
    return total_loss_t(ctx, batch, labels, weights, branches, Supervision::kFull,
                        nullptr);
  });

  AuditReport report;
  for (auto& [name, probe] : probes) {
    int entries = name.find("loss") != std::string::npos ? 2 : 4;
    double err = audit_term(model, probe, rng, corruption, entries);
    report.terms.push_back({name, err});
  }
  report.passed = std::all_of(report.terms.begin(), report.terms.end(),
                              [&](const AuditReport::Term& t) {
                                return t.max_rel_err < report.threshold;
                              });
  return report;
}

}  // namespace caibc
