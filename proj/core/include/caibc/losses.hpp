#ifndef CAIBC_LOSSES_HPP_
#define CAIBC_LOSSES_HPP_

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "caibc/branches.hpp"
#include "caibc/data.hpp"

namespace caibc {

inline constexpr double kProbFloor = 1e-8;  // floor inside KL logarithms

struct ClassifierHead {
  Eigen::MatrixXd weights;  // M x P
  double gamma = 16.0;
};

using ProbDist = Eigen::VectorXd;

struct LossWeights {
  double mutual = 1.0;
  double id = 1.0;
  double triplet = 1.0;
  double margin = 0.2;

  void validate() const;
};

enum class Supervision { kFull, kWeak };

Supervision supervision_from_name(const std::string& name);
std::string supervision_name(Supervision s);

// softmax over m of gamma * W_m . feature
ProbDist class_probs(const GlobalVec& feature, const ClassifierHead& head);

// Per-branch (visual dists, textual dists) over the same N samples.
using BranchProbs =
    std::map<std::string, std::pair<std::vector<ProbDist>, std::vector<ProbDist>>>;

std::map<std::string, double> mutual_learning_loss(const BranchProbs& branch_probs);

double id_loss(const std::vector<GlobalVec>& features, const std::vector<int>& labels,
               const ClassifierHead& head);

// Mean over anchors of max(0, margin - sim_pos + sim_neg); caller supplies one
// mined positive/negative similarity per anchor.
double triplet_loss(const std::vector<double>& anchor_sims_pos,
                    const std::vector<double>& anchor_sims_neg, double margin);

// --- tape-level pieces ---

struct SampleVars {
  BranchVars rgb;
  BranchVars grs;
  ColorVars clr;
};

struct LossBreakdown {
  std::map<std::string, double> terms;
  double total = 0.0;
};

nn::Var class_probs_t(nn::Tape& t, nn::Var feature, nn::Var weights, nn::Var gamma);
nn::Var kl_divergence_t(nn::Tape& t, nn::Var p, nn::Var q, double eps = kProbFloor);

// Batch-hard mined triplet loss over a visual/textual feature batch, both
// retrieval directions averaged. In weak mode the positive is the paired
// sample and every other sample is a negative candidate.
nn::Var triplet_batch_hard_t(nn::Tape& t, const std::vector<nn::Var>& visual,
                             const std::vector<nn::Var>& textual,
                             const std::vector<int>& labels, double margin,
                             Supervision supervision);

// Full training objective over one forward batch.
nn::Var total_loss_t(ForwardCtx& ctx, const std::vector<SampleVars>& batch,
                     const std::vector<int>& labels, const LossWeights& weights,
                     const BranchConfig& branches, Supervision supervision,
                     LossBreakdown* breakdown);

// Forward the active branches on a batch of records and evaluate the total
// loss (no parameter update). Used by the trainer and by tests.
LossBreakdown total_loss(ModelParams& model, const std::vector<PersonRecord>& batch,
                         const ColorBank& bank, const LossWeights& weights,
                         const BranchConfig& branches, Supervision supervision);

// Classifier head parameter names for a branch/slot under the sharing policy.
// slot is "global" or "part<k>".
std::string head_prefix(const ModelConfig& config, const std::string& branch,
                        const std::string& slot);

}  // namespace caibc

#endif  // CAIBC_LOSSES_HPP_
