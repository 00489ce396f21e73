#include "caibc/encoders.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "caibc/errors.hpp"

namespace caibc {

using nn::Matrix;
using nn::Var;

// --- Vocabulary ---

Vocabulary Vocabulary::build(const std::vector<TokenSequence>& corpus,
                             const std::string& mask_token) {
  std::set<std::string> unique;
  for (const TokenSequence& s : corpus) {
    for (const std::string& t : s.tokens) unique.insert(t);
  }
  std::vector<std::string> tokens = {kPad, kUnk, mask_token};
  for (const std::string& t : unique) {
    if (t != kPad && t != kUnk && t != mask_token) tokens.push_back(t);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) {
    v.index_[v.tokens_[i]] = i;
  }
  if (v.index_.count(kUnk) == 0) throw ConfigError("vocabulary lacks [UNK] entry");
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  return index_.at(kUnk);
}

std::vector<int> Vocabulary::ids(const TokenSequence& seq) const {
  std::vector<int> out;
  out.reserve(seq.tokens.size());
  for (const std::string& t : seq.tokens) out.push_back(id(t));
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;  // FNV-1a
  for (const std::string& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

// --- ModelConfig ---

void ModelConfig::validate() const {
  if (conv_channels.size() != conv_strides.size() || conv_channels.empty()) {
    throw ConfigError("model config: conv_channels and conv_strides must align");
  }
  if (input_h < 1 || input_w < 1) throw ConfigError("model config: bad input size");
  if (embed_dim < 1 || feat_dim < 1 || parts < 1) {
    throw ConfigError("model config: dimensions must be positive");
  }
  if (gamma_init <= 0.0) throw ConfigError("model config: gamma must be positive");
  if (map_h() < 1 || map_w() < 1) {
    throw ConfigError("model config: conv stack collapses the input");
  }
  if (map_h() % parts != 0) {
    throw ConfigError("model config: feature map height not divisible by part count");
  }
}

int ModelConfig::map_h() const {
  int h = input_h;
  int pad = conv_ksize / 2;
  for (int s : conv_strides) h = nn::conv_out_extent(h, conv_ksize, s, pad);
  return h;
}

int ModelConfig::map_w() const {
  int w = input_w;
  int pad = conv_ksize / 2;
  for (int s : conv_strides) w = nn::conv_out_extent(w, conv_ksize, s, pad);
  return w;
}

// --- ModelParams ---

namespace {

Matrix randn(std::mt19937_64& rng, int rows, int cols, double std) {
  std::normal_distribution<double> dist(0.0, std);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

double xavier_std(int fan_in, int fan_out) {
  return std::sqrt(2.0 / (fan_in + fan_out));
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, const Vocabulary& vocab,
                              std::uint64_t seed) {
  config.validate();
  if (vocab.size() < 3) throw ConfigError("vocabulary too small");

  ModelParams m;
  m.config = config;
  m.vocab = vocab;
  std::mt19937_64 rng(seed);

  const int C = config.embed_dim;
  const int P = config.feat_dim;
  const int K = config.parts;
  const int Cv = config.map_channels();
  const int ks = config.conv_ksize;

  for (const std::string& br : {std::string("rgb"), std::string("grs")}) {
    int in_ch = 3;
    for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
      int out_ch = config.conv_channels[i];
      std::string prefix = br + ".backbone.conv" + std::to_string(i);
      double he = std::sqrt(2.0 / (in_ch * ks * ks));
      m.tensors[prefix + ".W"] = randn(rng, out_ch, in_ch * ks * ks, he);
      m.tensors[prefix + ".b"] = Matrix::Zero(out_ch, 1);
      in_ch = out_ch;
    }
    m.tensors[br + ".vis.global.W"] = randn(rng, P, Cv, xavier_std(Cv, P));
    m.tensors[br + ".vis.global.b"] = Matrix::Zero(P, 1);
    for (int k = 0; k < K; ++k) {
      std::string prefix = br + ".vis.local" + std::to_string(k);
      m.tensors[prefix + ".W"] = randn(rng, P, Cv, xavier_std(Cv, P));
      m.tensors[prefix + ".b"] = Matrix::Zero(P, 1);
    }
  }

  m.tensors["text.embed"] = randn(rng, vocab.size(), C, 0.3);
  for (const std::string& dir : {std::string("fwd"), std::string("bwd")}) {
    std::string prefix = "text.gru." + dir + ".";
    double s = xavier_std(C, C);
    for (const std::string& g : {std::string("z"), std::string("r"), std::string("h")}) {
      m.tensors[prefix + "W" + g] = randn(rng, C, C, s);
      m.tensors[prefix + "U" + g] = randn(rng, C, C, s);
      m.tensors[prefix + "b" + g] = Matrix::Zero(1, C);
    }
  }

  for (const std::string& br : {std::string("rgb"), std::string("grs")}) {
    m.tensors[br + ".txt.global.W"] = randn(rng, P, C, xavier_std(C, P));
    m.tensors[br + ".txt.global.b"] = Matrix::Zero(P, 1);
    for (int k = 0; k < K; ++k) {
      std::string prefix = br + ".txt.attn" + std::to_string(k);
      m.tensors[prefix + ".W"] = randn(rng, C, 1, xavier_std(C, 1));
      prefix = br + ".txt.local" + std::to_string(k);
      m.tensors[prefix + ".W"] = randn(rng, P, C, xavier_std(C, P));
      m.tensors[prefix + ".b"] = Matrix::Zero(P, 1);
    }
  }

  m.tensors["clr.vis.W"] = randn(rng, P, Cv, xavier_std(Cv, P));
  m.tensors["clr.vis.b"] = Matrix::Zero(P, 1);
  // identity-initialized color prior projection
  m.tensors["clr.prior.W"] = Matrix::Identity(C, C);
  m.tensors["clr.prior.b"] = Matrix::Zero(C, 1);
  m.tensors["clr.txt.W"] = randn(rng, P, C, xavier_std(C, P));
  m.tensors["clr.txt.b"] = Matrix::Zero(P, 1);

  if (config.num_classes > 0) {
    const int M = config.num_classes;
    auto add_head = [&](const std::string& prefix) {
      m.tensors[prefix + ".W"] = randn(rng, M, P, xavier_std(P, M));
      m.tensors[prefix + ".gamma"] = Matrix::Constant(1, 1, config.gamma_init);
    };
    if (config.share_classifier) {
      add_head("head.global");
      for (int k = 0; k < K; ++k) add_head("head.part" + std::to_string(k));
    } else {
      for (const std::string& br : {std::string("rgb"), std::string("grs"),
                                    std::string("clr")}) {
        add_head("head." + br + ".global");
      }
      for (const std::string& br : {std::string("rgb"), std::string("grs")}) {
        for (int k = 0; k < K; ++k) {
          add_head("head." + br + ".part" + std::to_string(k));
        }
      }
    }
  }
  return m;
}

nn::Matrix& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const nn::Matrix& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

bool ModelParams::is_backbone_param(const std::string& name) {
  return name.find(".backbone.") != std::string::npos;
}

Var ForwardCtx::p(const std::string& name) {
  auto it = used.find(name);
  if (it != used.end()) return it->second;
  Var v = tape.leaf(model.at(name));
  used[name] = v;
  return v;
}

Eigen::VectorXd concat_locals(const LocalVecSet& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

// --- encoder ops ---

nn::Matrix image_to_input(const RgbImage& image) {
  Matrix in(3, static_cast<Eigen::Index>(image.height) * image.width);
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < image.height; ++r) {
      for (int c = 0; c < image.width; ++c) {
        in(ch, r * image.width + c) = image.chan[ch](r, c) / 255.0 - 0.5;
      }
    }
  }
  return in;
}

Var visual_backbone_t(ForwardCtx& ctx, const RgbImage& image,
                      const std::string& branch) {
  const ModelConfig& cfg = ctx.model.config;
  if (image.height != cfg.input_h || image.width != cfg.input_w) {
    throw ConfigError("visual_backbone: input resolution mismatch");
  }
  Var x = ctx.tape.constant(image_to_input(image));
  int h = cfg.input_h, w = cfg.input_w, in_ch = 3;
  int pad = cfg.conv_ksize / 2;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    std::string prefix = branch + ".backbone.conv" + std::to_string(i);
    int out_ch = cfg.conv_channels[i];
    int stride = cfg.conv_strides[i];
    x = ctx.tape.conv2d(x, ctx.p(prefix + ".W"), ctx.p(prefix + ".b"), in_ch, h, w,
                        out_ch, cfg.conv_ksize, stride, pad);
    x = ctx.tape.relu(x);
    h = nn::conv_out_extent(h, cfg.conv_ksize, stride, pad);
    w = nn::conv_out_extent(w, cfg.conv_ksize, stride, pad);
    in_ch = out_ch;
  }
  return x;
}

namespace {

Var affine(ForwardCtx& ctx, const std::string& prefix, Var x) {
  return ctx.tape.add(ctx.tape.matmul(ctx.p(prefix + ".W"), x),
                      ctx.p(prefix + ".b"));
}

}  // namespace

Var global_pool_project_t(ForwardCtx& ctx, Var map, const std::string& branch) {
  Var pooled = ctx.tape.rowwise_max(map);
  return affine(ctx, branch + ".vis.global", pooled);
}

std::vector<Var> local_partition_project_t(ForwardCtx& ctx, Var map,
                                           const std::string& branch) {
  const ModelConfig& cfg = ctx.model.config;
  const int hf = cfg.map_h();
  const int wf = cfg.map_w();
  const int K = cfg.parts;
  if (hf % K != 0) {
    throw ConfigError("local partition: feature height " + std::to_string(hf) +
                      " not divisible by " + std::to_string(K));
  }
  const int strip_h = hf / K;
  std::vector<Var> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) {
    Var strip = ctx.tape.cols_block(map, k * strip_h * wf, strip_h * wf);
    Var pooled = ctx.tape.rowwise_max(strip);
    out.push_back(affine(ctx, branch + ".vis.local" + std::to_string(k), pooled));
  }
  return out;
}

namespace {

// One GRU direction over embedded rows (1 x C each); returns hidden rows in
// input order.
std::vector<Var> gru_direction(ForwardCtx& ctx, const std::vector<Var>& inputs,
                               const std::string& dir, bool reverse) {
  nn::Tape& t = ctx.tape;
  const int C = ctx.model.config.embed_dim;
  std::string prefix = "text.gru." + dir + ".";
  Var Wz = ctx.p(prefix + "Wz"), Uz = ctx.p(prefix + "Uz"), bz = ctx.p(prefix + "bz");
  Var Wr = ctx.p(prefix + "Wr"), Ur = ctx.p(prefix + "Ur"), br = ctx.p(prefix + "br");
  Var Wh = ctx.p(prefix + "Wh"), Uh = ctx.p(prefix + "Uh"), bh = ctx.p(prefix + "bh");

  const int n = static_cast<int>(inputs.size());
  std::vector<Var> hidden(n);
  Var h = t.constant(Matrix::Zero(1, C));
  Var ones = t.constant(Matrix::Ones(1, C));
  for (int step = 0; step < n; ++step) {
    int i = reverse ? n - 1 - step : step;
    Var x = inputs[i];
    Var z = t.sigmoid(t.add(t.add(t.matmul(x, Wz), t.matmul(h, Uz)), bz));
    Var r = t.sigmoid(t.add(t.add(t.matmul(x, Wr), t.matmul(h, Ur)), br));
    Var hr = t.mul(r, h);
    Var cand = t.tanh_(t.add(t.add(t.matmul(x, Wh), t.matmul(hr, Uh)), bh));
    Var zh = t.mul(z, h);
    Var zi = t.sub(ones, z);
    h = t.add(zh, t.mul(zi, cand));
    hidden[i] = h;
  }
  return hidden;
}

}  // namespace

Var text_word_reps_t(ForwardCtx& ctx, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw DataError("text_word_reps: empty token sequence");
  nn::Tape& t = ctx.tape;
  Var embed = ctx.p("text.embed");
  std::vector<Var> inputs;
  inputs.reserve(token_ids.size());
  for (int id : token_ids) inputs.push_back(t.select_rows(embed, {id}));
  std::vector<Var> fwd = gru_direction(ctx, inputs, "fwd", /*reverse=*/false);
  std::vector<Var> bwd = gru_direction(ctx, inputs, "bwd", /*reverse=*/true);
  std::vector<Var> rows;
  rows.reserve(token_ids.size());
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    rows.push_back(t.scale(t.add(fwd[i], bwd[i]), 0.5));
  }
  return t.concat_rows(rows);
}

Var text_global_t(ForwardCtx& ctx, Var word_matrix, const std::string& branch) {
  Var pooled = ctx.tape.colwise_max(word_matrix);  // 1 x C
  return affine(ctx, branch + ".txt.global", ctx.tape.transpose(pooled));
}

std::vector<Var> word_attention_locals_t(ForwardCtx& ctx, Var word_matrix,
                                         const std::string& branch) {
  nn::Tape& t = ctx.tape;
  const int K = ctx.model.config.parts;
  std::vector<Var> out;
  out.reserve(K);
  for (int k = 0; k < K; ++k) {
    Var wk = ctx.p(branch + ".txt.attn" + std::to_string(k) + ".W");  // C x 1
    Var gates = t.sigmoid(t.matmul(word_matrix, wk));                 // n x 1
    Var gated = t.scale_rows(word_matrix, gates);
    Var pooled = t.colwise_max(gated);
    out.push_back(
        affine(ctx, branch + ".txt.local" + std::to_string(k), t.transpose(pooled)));
  }
  return out;
}

// --- plain wrappers ---

FeatureMap visual_backbone(const RgbImage& image, ModelParams& model,
                           const std::string& branch) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  Var map = visual_backbone_t(ctx, image, branch);
  return FeatureMap{tape.value(map), model.config.map_h(), model.config.map_w()};
}

GlobalVec global_pool_project(const FeatureMap& map, ModelParams& model,
                              const std::string& branch) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  Var v = global_pool_project_t(ctx, tape.constant(map.activations), branch);
  return tape.value(v).col(0);
}

LocalVecSet local_partition_project(const FeatureMap& map, ModelParams& model,
                                    const std::string& branch) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  auto vars = local_partition_project_t(ctx, tape.constant(map.activations), branch);
  LocalVecSet out;
  for (Var v : vars) out.push_back(tape.value(v).col(0));
  return out;
}

WordRepMatrix text_word_reps(const TokenSequence& tokens, ModelParams& model) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  Var E = text_word_reps_t(ctx, model.vocab.ids(tokens));
  return tape.value(E);
}

GlobalVec text_global(const WordRepMatrix& word_matrix, ModelParams& model,
                      const std::string& branch) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  Var v = text_global_t(ctx, tape.constant(word_matrix), branch);
  return tape.value(v).col(0);
}

LocalVecSet word_attention_locals(const WordRepMatrix& word_matrix,
                                  ModelParams& model, const std::string& branch) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  auto vars = word_attention_locals_t(ctx, tape.constant(word_matrix), branch);
  LocalVecSet out;
  for (Var v : vars) out.push_back(tape.value(v).col(0));
  return out;
}

}  // namespace caibc
