#ifndef CAIBC_ENCODERS_HPP_
#define CAIBC_ENCODERS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "caibc/color_ops.hpp"
#include "caibc/nn.hpp"

namespace caibc {

class Vocabulary {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";

  Vocabulary() = default;
  // Specials first ([PAD], [UNK], mask token), then sorted unique corpus tokens.
  static Vocabulary build(const std::vector<TokenSequence>& corpus,
                          const std::string& mask_token = kColorMaskToken);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  int id(const std::string& token) const;  // unknown -> [UNK]
  std::vector<int> ids(const TokenSequence& seq) const;
  std::uint64_t hash() const;

  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  int input_h = 48;
  int input_w = 16;
  int embed_dim = 32;  // C
  int feat_dim = 64;   // P
  int parts = 6;       // K
  std::vector<int> conv_channels = {16, 32, 64, 64};
  std::vector<int> conv_strides = {2, 2, 2, 1};
  int conv_ksize = 3;
  int num_classes = 0;  // M, person identities
  double gamma_init = 16.0;
  bool share_classifier = true;

  int map_h() const;
  int map_w() const;
  int map_channels() const { return conv_channels.back(); }
  void validate() const;
};

// All trainable tensors, keyed by hierarchical name. Feature vectors are
// column vectors; word-representation matrices are n x C with one row per
// token.
class ModelParams {
 public:
  ModelConfig config;
  Vocabulary vocab;
  std::map<std::string, nn::Matrix> tensors;

  static ModelParams init(const ModelConfig& config, const Vocabulary& vocab,
                          std::uint64_t seed);

  nn::Matrix& at(const std::string& name);
  const nn::Matrix& at(const std::string& name) const;

  // Backbone tensors train under the backbone learning rate.
  static bool is_backbone_param(const std::string& name);
};

// Per-step forward context: lazily registers parameter leaves on the tape so
// gradients can be read back by name after backward().
struct ForwardCtx {
  nn::Tape& tape;
  ModelParams& model;
  std::map<std::string, nn::Var> used;

  nn::Var p(const std::string& name);
};

struct FeatureMap {
  nn::Matrix activations;  // channels x (h*w), row-major spatial
  int h = 0;
  int w = 0;
};

using GlobalVec = Eigen::VectorXd;
using LocalVecSet = std::vector<Eigen::VectorXd>;  // K vectors of dim P
using WordRepMatrix = nn::Matrix;                  // n x C

Eigen::VectorXd concat_locals(const LocalVecSet& parts);

// --- tape-level encoder ops (branch is "rgb" or "grs") ---

// Normalized image tensor (3 x H*W) for the backbone input.
nn::Matrix image_to_input(const RgbImage& image);

nn::Var visual_backbone_t(ForwardCtx& ctx, const RgbImage& image,
                          const std::string& branch);
nn::Var global_pool_project_t(ForwardCtx& ctx, nn::Var map,
                              const std::string& head_prefix);
std::vector<nn::Var> local_partition_project_t(ForwardCtx& ctx, nn::Var map,
                                               const std::string& branch);
nn::Var text_word_reps_t(ForwardCtx& ctx, const std::vector<int>& token_ids);
nn::Var text_global_t(ForwardCtx& ctx, nn::Var word_matrix,
                      const std::string& branch);
std::vector<nn::Var> word_attention_locals_t(ForwardCtx& ctx, nn::Var word_matrix,
                                             const std::string& branch);

// --- plain wrappers (forward value only) ---

FeatureMap visual_backbone(const RgbImage& image, ModelParams& model,
                           const std::string& branch = "rgb");
GlobalVec global_pool_project(const FeatureMap& map, ModelParams& model,
                              const std::string& branch = "rgb");
LocalVecSet local_partition_project(const FeatureMap& map, ModelParams& model,
                                    const std::string& branch = "rgb");
WordRepMatrix text_word_reps(const TokenSequence& tokens, ModelParams& model);
GlobalVec text_global(const WordRepMatrix& word_matrix, ModelParams& model,
                      const std::string& branch = "rgb");
LocalVecSet word_attention_locals(const WordRepMatrix& word_matrix,
                                  ModelParams& model,
                                  const std::string& branch = "rgb");

}  // namespace caibc

#endif  // CAIBC_ENCODERS_HPP_
