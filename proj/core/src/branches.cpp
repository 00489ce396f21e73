#include "caibc/branches.hpp"

#include <cmath>

#include "caibc/errors.hpp"

namespace caibc {

using nn::Matrix;
using nn::Var;

double BranchConfig::weight(const std::string& component) const {
  auto it = fusion_weights.find(component);
  return it == fusion_weights.end() ? 1.0 : it->second;
}

std::vector<std::string> BranchConfig::active_components() const {
  std::vector<std::string> out;
  if (rgb) {
    out.push_back("g_rgb");
    out.push_back("l_rgb");
  }
  if (grs) {
    out.push_back("g_grs");
    out.push_back("l_grs");
  }
  if (clr) out.push_back("clr");
  return out;
}

void BranchConfig::validate() const {
  if (!rgb && !grs && !clr) throw ConfigError("branch config: no branch active");
  if (clr && !(rgb && grs)) {
    throw ConfigError("branch config: clr branch requires both rgb and grs");
  }
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw ConfigError("cosine: dimension mismatch");
  double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    throw DivergenceError("cosine: zero vector (degenerate representation)");
  }
  return u.dot(v) / (nu * nv);
}

Eigen::MatrixXd response_map(const FeatureMap& map) {
  Eigen::MatrixXd out(map.h, map.w);
  Eigen::RowVectorXd mean = map.activations.colwise().mean();
  for (int r = 0; r < map.h; ++r) {
    for (int c = 0; c < map.w; ++c) out(r, c) = mean(r * map.w + c);
  }
  return out;
}

Var cosine_t(nn::Tape& t, Var u, Var v) {
  Var uu = t.dot(u, u);
  Var vv = t.dot(v, v);
  if (nn::scalar(t, uu) == 0.0 || nn::scalar(t, vv) == 0.0) {
    throw DivergenceError("cosine: zero vector (degenerate representation)");
  }
  Var denom = t.sqrt_(t.mul(uu, vv));
  return t.div(t.dot(u, v), denom);
}

namespace {

BranchVars run_branch_t(ForwardCtx& ctx, const RgbImage& image,
                        const std::vector<int>& token_ids,
                        const std::string& branch) {
  BranchVars out;
  out.visual_map = visual_backbone_t(ctx, image, branch);
  out.visual_global = global_pool_project_t(ctx, out.visual_map, branch);
  out.visual_locals = local_partition_project_t(ctx, out.visual_map, branch);
  out.visual_locals_concat = ctx.tape.concat_rows(out.visual_locals);
  out.word_matrix = text_word_reps_t(ctx, token_ids);
  out.text_global = text_global_t(ctx, out.word_matrix, branch);
  out.text_locals = word_attention_locals_t(ctx, out.word_matrix, branch);
  out.text_locals_concat = ctx.tape.concat_rows(out.text_locals);
  return out;
}

}  // namespace

BranchVars run_rgb_branch_t(ForwardCtx& ctx, const RgbImage& image,
                            const TokenSequence& tokens) {
  return run_branch_t(ctx, image, ctx.model.vocab.ids(tokens), "rgb");
}

BranchVars run_grs_branch_t(ForwardCtx& ctx, const RgbImage& image,
                            const TokenSequence& tokens, const ColorBank& bank) {
  RgbImage deprived = gray_to_three_channel(rgb_to_grayscale(image));
  TokenSequence masked = mask_colors(tokens, bank);
  return run_branch_t(ctx, deprived, ctx.model.vocab.ids(masked), "grs");
}

ColorVars run_clr_branch_t(ForwardCtx& ctx, const BranchVars& rgb,
                           const BranchVars& grs,
                           const std::vector<std::string>& prior_tokens,
                           bool prior_enabled, bool detach_grs) {
  nn::Tape& t = ctx.tape;
  const int C = ctx.model.config.embed_dim;

  Var grs_map = detach_grs ? t.detach(grs.visual_map) : grs.visual_map;
  Var grs_words = detach_grs ? t.detach(grs.word_matrix) : grs.word_matrix;
  if (t.value(rgb.visual_map).rows() != t.value(grs_map).rows() ||
      t.value(rgb.visual_map).cols() != t.value(grs_map).cols()) {
    throw ConfigError("clr branch: feature map shape mismatch");
  }
  if (t.value(rgb.word_matrix).rows() != t.value(grs_words).rows()) {
    throw ConfigError("clr branch: word matrix shape mismatch");
  }

  ColorVars out;
  Var color_map = t.sub(rgb.visual_map, grs_map);
  Var pooled = t.rowwise_max(color_map);
  out.visual_color = t.add(t.matmul(ctx.p("clr.vis.W"), pooled), ctx.p("clr.vis.b"));

  Var e_clr = t.sub(rgb.word_matrix, grs_words);  // n x C
  Var e_cp = e_clr;
  if (prior_enabled) {
    Var prior_sum;  // 1 x C
    if (prior_tokens.empty()) {
      prior_sum = t.constant(Matrix::Zero(1, C));
    } else {
      std::vector<int> ids;
      ids.reserve(prior_tokens.size());
      for (const std::string& tok : prior_tokens) {
        ids.push_back(ctx.model.vocab.id(to_lower(tok)));
      }
      Var rows = t.select_rows(ctx.p("text.embed"), ids);
      Var ones = t.constant(Matrix::Ones(1, static_cast<int>(ids.size())));
      prior_sum = t.matmul(ones, rows);
    }
    Var projected = t.add(t.matmul(ctx.p("clr.prior.W"), t.transpose(prior_sum)),
                          ctx.p("clr.prior.b"));  // C x 1
    // add the projected prior to every row of E^clr
    Var e_clr_T = t.transpose(e_clr);
    e_cp = t.transpose(t.add_colvec(e_clr_T, projected));
  }
  Var pooled_txt = t.colwise_max(e_cp);  // 1 x C
  out.text_color = t.add(t.matmul(ctx.p("clr.txt.W"), t.transpose(pooled_txt)),
                         ctx.p("clr.txt.b"));
  return out;
}

namespace {

BranchOutput to_output(nn::Tape& t, const ModelConfig& cfg, const BranchVars& v) {
  BranchOutput out;
  out.visual_map = FeatureMap{t.value(v.visual_map), cfg.map_h(), cfg.map_w()};
  out.visual_global = t.value(v.visual_global).col(0);
  for (Var p : v.visual_locals) out.visual_locals.push_back(t.value(p).col(0));
  out.word_matrix = t.value(v.word_matrix);
  out.text_global = t.value(v.text_global).col(0);
  for (Var p : v.text_locals) out.text_locals.push_back(t.value(p).col(0));
  return out;
}

}  // namespace

BranchOutput run_rgb_branch(const RgbImage& image, const TokenSequence& tokens,
                            ModelParams& model) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  return to_output(tape, model.config, run_rgb_branch_t(ctx, image, tokens));
}

BranchOutput run_grs_branch(const RgbImage& image, const TokenSequence& tokens,
                            const ColorBank& bank, ModelParams& model) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  return to_output(tape, model.config, run_grs_branch_t(ctx, image, tokens, bank));
}

ColorOutput run_clr_branch(const BranchOutput& rgb, const BranchOutput& grs,
                           const std::vector<std::string>& prior_tokens,
                           ModelParams& model, bool prior_enabled) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  BranchVars rv, gv;
  rv.visual_map = tape.constant(rgb.visual_map.activations);
  rv.word_matrix = tape.constant(rgb.word_matrix);
  gv.visual_map = tape.constant(grs.visual_map.activations);
  gv.word_matrix = tape.constant(grs.word_matrix);
  ColorVars cv = run_clr_branch_t(ctx, rv, gv, prior_tokens, prior_enabled,
                                  /*detach_grs=*/false);
  return ColorOutput{tape.value(cv.visual_color).col(0),
                     tape.value(cv.text_color).col(0)};
}

GlobalVec clr_visual_color(const FeatureMap& rgb_map, const FeatureMap& grs_map,
                           ModelParams& model) {
  BranchOutput rgb, grs;
  rgb.visual_map = rgb_map;
  grs.visual_map = grs_map;
  Matrix dummy_words = Matrix::Zero(1, model.config.embed_dim);
  rgb.word_matrix = dummy_words;
  grs.word_matrix = dummy_words;
  return run_clr_branch(rgb, grs, {}, model, /*prior_enabled=*/false).visual_color;
}

GlobalVec clr_text_color(const WordRepMatrix& rgb_words,
                         const WordRepMatrix& grs_words,
                         const std::vector<std::string>& prior_tokens,
                         ModelParams& model, bool prior_enabled) {
  const ModelConfig& cfg = model.config;
  BranchOutput rgb, grs;
  Matrix dummy_map = Matrix::Zero(cfg.map_channels(), cfg.map_h() * cfg.map_w());
  rgb.visual_map = FeatureMap{dummy_map, cfg.map_h(), cfg.map_w()};
  grs.visual_map = FeatureMap{dummy_map, cfg.map_h(), cfg.map_w()};
  rgb.word_matrix = rgb_words;
  grs.word_matrix = grs_words;
  return run_clr_branch(rgb, grs, prior_tokens, model, prior_enabled).text_color;
}

SimilarityBundle similarity_bundle(const BranchOutput* rgb, const BranchOutput* grs,
                                   const ColorOutput* clr,
                                   const BranchConfig& config) {
  config.validate();
  SimilarityBundle out;
  double fused = 0.0;
  if (config.rgb) {
    if (!rgb) throw ConfigError("similarity_bundle: rgb output missing");
    out.s_g_rgb = cosine(rgb->visual_global, rgb->text_global);
    out.s_l_rgb = cosine(concat_locals(rgb->visual_locals),
                         concat_locals(rgb->text_locals));
    fused += config.weight("g_rgb") * *out.s_g_rgb;
    fused += config.weight("l_rgb") * *out.s_l_rgb;
  }
  if (config.grs) {
    if (!grs) throw ConfigError("similarity_bundle: grs output missing");
    out.s_g_grs = cosine(grs->visual_global, grs->text_global);
    out.s_l_grs = cosine(concat_locals(grs->visual_locals),
                         concat_locals(grs->text_locals));
    fused += config.weight("g_grs") * *out.s_g_grs;
    fused += config.weight("l_grs") * *out.s_l_grs;
  }
  if (config.clr) {
    if (!clr) throw ConfigError("similarity_bundle: clr output missing");
    out.s_clr = cosine(clr->visual_color, clr->text_color);
    fused += config.weight("clr") * *out.s_clr;
  }
  out.fused = fused;
  return out;
}

}  // namespace caibc
