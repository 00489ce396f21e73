#ifndef CAIBC_BRANCHES_HPP_
#define CAIBC_BRANCHES_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caibc/encoders.hpp"

namespace caibc {

struct BranchOutput {
  GlobalVec visual_global;   // v_g
  LocalVecSet visual_locals; // V_f, part order
  FeatureMap visual_map;     // M
  GlobalVec text_global;     // t_g
  LocalVecSet text_locals;   // T_f
  WordRepMatrix word_matrix; // E
};

struct ColorOutput {
  GlobalVec visual_color;  // v^clr
  GlobalVec text_color;    // t^clr
};

// Similarity component keys: g_rgb, l_rgb, g_grs, l_grs, clr.
struct SimilarityBundle {
  std::optional<double> s_g_rgb, s_l_rgb, s_g_grs, s_l_grs, s_clr;
  double fused = 0.0;
};

struct BranchConfig {
  bool rgb = true;
  bool grs = true;
  bool clr = true;
  bool color_prior = true;
  bool detach_grs = false;  // cut gradient into GRS features at the CLR subtraction
  std::map<std::string, double> fusion_weights;  // absent key -> 1.0

  double weight(const std::string& component) const;
  std::vector<std::string> active_components() const;
  void validate() const;
};

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// Channelwise mean at each spatial position.
Eigen::MatrixXd response_map(const FeatureMap& map);

// --- tape-level branch composition ---

struct BranchVars {
  nn::Var visual_map;
  nn::Var visual_global;
  std::vector<nn::Var> visual_locals;
  nn::Var visual_locals_concat;
  nn::Var word_matrix;
  nn::Var text_global;
  std::vector<nn::Var> text_locals;
  nn::Var text_locals_concat;
};

struct ColorVars {
  nn::Var visual_color;
  nn::Var text_color;
};

nn::Var cosine_t(nn::Tape& t, nn::Var u, nn::Var v);

BranchVars run_rgb_branch_t(ForwardCtx& ctx, const RgbImage& image,
                            const TokenSequence& tokens);
BranchVars run_grs_branch_t(ForwardCtx& ctx, const RgbImage& image,
                            const TokenSequence& tokens, const ColorBank& bank);
ColorVars run_clr_branch_t(ForwardCtx& ctx, const BranchVars& rgb,
                           const BranchVars& grs,
                           const std::vector<std::string>& prior_tokens,
                           bool prior_enabled, bool detach_grs);

// --- plain forward wrappers ---

BranchOutput run_rgb_branch(const RgbImage& image, const TokenSequence& tokens,
                            ModelParams& model);
BranchOutput run_grs_branch(const RgbImage& image, const TokenSequence& tokens,
                            const ColorBank& bank, ModelParams& model);
ColorOutput run_clr_branch(const BranchOutput& rgb, const BranchOutput& grs,
                           const std::vector<std::string>& prior_tokens,
                           ModelParams& model, bool prior_enabled = true);

// One-sided color features, for retrieval caches: v^clr from the two feature
// maps, t^clr from the two word matrices plus the color prior.
GlobalVec clr_visual_color(const FeatureMap& rgb_map, const FeatureMap& grs_map,
                           ModelParams& model);
GlobalVec clr_text_color(const WordRepMatrix& rgb_words,
                         const WordRepMatrix& grs_words,
                         const std::vector<std::string>& prior_tokens,
                         ModelParams& model, bool prior_enabled = true);

SimilarityBundle similarity_bundle(const BranchOutput* rgb, const BranchOutput* grs,
                                   const ColorOutput* clr, const BranchConfig& config);

}  // namespace caibc

#endif  // CAIBC_BRANCHES_HPP_
