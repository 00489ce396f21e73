#include "caibc/losses.hpp"

#include <cmath>

#include "caibc/errors.hpp"

namespace caibc {

using nn::Matrix;
using nn::Var;

void LossWeights::validate() const {
  if (mutual < 0.0 || id < 0.0 || triplet < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (margin < 0.0) throw ConfigError("triplet margin must be non-negative");
}

Supervision supervision_from_name(const std::string& name) {
  if (name == "full") return Supervision::kFull;
  if (name == "weak") return Supervision::kWeak;
  throw ConfigError("unknown supervision mode: " + name);
}

std::string supervision_name(Supervision s) {
  return s == Supervision::kFull ? "full" : "weak";
}

ProbDist class_probs(const GlobalVec& feature, const ClassifierHead& head) {
  if (head.weights.cols() != feature.size()) {
    throw ConfigError("class_probs: feature dimension mismatch");
  }
  Eigen::VectorXd logits = head.gamma * (head.weights * feature);
  double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

std::map<std::string, double> mutual_learning_loss(const BranchProbs& branch_probs) {
  std::size_t n = 0;
  bool first = true;
  for (const auto& [br, dists] : branch_probs) {
    if (first) {
      n = dists.first.size();
      first = false;
    }
    if (dists.first.size() != n || dists.second.size() != n) {
      throw ConfigError("mutual_learning_loss: mismatched sample counts");
    }
  }
  auto kl = [](const ProbDist& p, const ProbDist& q) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < p.size(); ++m) {
      acc += p(m) * (std::log(std::max(p(m), kProbFloor)) -
                     std::log(std::max(q(m), kProbFloor)));
    }
    return acc;
  };
  std::map<std::string, double> out;
  for (const auto& [br, dists] : branch_probs) {
    double loss = 0.0;
    for (const auto& [other, odists] : branch_probs) {
      if (other == br) continue;
      for (std::size_t i = 0; i < n; ++i) {
        loss += kl(dists.first[i], odists.first[i]);
        loss += kl(dists.second[i], odists.second[i]);
      }
    }
    out[br] = 0.5 * loss;
  }
  return out;
}

double id_loss(const std::vector<GlobalVec>& features, const std::vector<int>& labels,
               const ClassifierHead& head) {
  if (features.size() != labels.size()) {
    throw ConfigError("id_loss: feature/label count mismatch");
  }
  const int M = static_cast<int>(head.weights.rows());
  double acc = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= M) {
      throw ConfigError("id_loss: label out of range");
    }
    ProbDist p = class_probs(features[i], head);
    acc += -std::log(std::max(p(labels[i]), 1e-300));
  }
  return acc / static_cast<double>(features.size());
}

double triplet_loss(const std::vector<double>& anchor_sims_pos,
                    const std::vector<double>& anchor_sims_neg, double margin) {
  if (anchor_sims_pos.size() != anchor_sims_neg.size()) {
    throw ConfigError("triplet_loss: similarity list length mismatch");
  }
  if (anchor_sims_pos.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < anchor_sims_pos.size(); ++i) {
    acc += std::max(0.0, margin - anchor_sims_pos[i] + anchor_sims_neg[i]);
  }
  return acc / static_cast<double>(anchor_sims_pos.size());
}

// --- tape-level ---

Var class_probs_t(nn::Tape& t, Var feature, Var weights, Var gamma) {
  if (t.value(weights).cols() != t.value(feature).rows()) {
    throw ConfigError("class_probs: feature dimension mismatch");
  }
  Var logits = t.scale_by(t.matmul(weights, feature), gamma);
  return t.softmax_col(logits);
}

Var kl_divergence_t(nn::Tape& t, Var p, Var q, double eps) {
  Var diff = t.sub(t.log_floor(p, eps), t.log_floor(q, eps));
  return t.sum(t.mul(p, diff));
}

namespace {

// cosine by value only, for mining
double cosine_value(const Matrix& a, const Matrix& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    throw DivergenceError("cosine: zero vector (degenerate representation)");
  }
  return a.cwiseProduct(b).sum() / (na * nb);
}

Var triplet_direction(nn::Tape& t, const std::vector<Var>& anchors,
                      const std::vector<Var>& gallery,
                      const std::vector<int>& labels, double margin,
                      Supervision supervision) {
  const int n = static_cast<int>(anchors.size());
  Eigen::MatrixXd sims(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      sims(i, j) = cosine_value(t.value(anchors[i]), t.value(gallery[j]));
    }
  }
  std::vector<Var> hinges;
  for (int i = 0; i < n; ++i) {
    int pos = -1, neg = -1;
    for (int j = 0; j < n; ++j) {
      bool same = supervision == Supervision::kWeak ? j == i
                                                    : labels[j] == labels[i];
      if (same) {
        if (pos < 0 || sims(i, j) < sims(i, pos)) pos = j;
      } else {
        if (neg < 0 || sims(i, j) > sims(i, neg)) neg = j;
      }
    }
    if (pos < 0 || neg < 0) continue;  // anchor without a valid pair
    Var s_pos = cosine_t(t, anchors[i], gallery[pos]);
    Var s_neg = cosine_t(t, anchors[i], gallery[neg]);
    Var hinge = t.relu(t.add_const(t.sub(s_neg, s_pos), margin));
    hinges.push_back(hinge);
  }
  if (hinges.empty()) return t.constant(Matrix::Zero(1, 1));
  Var acc = hinges[0];
  for (std::size_t i = 1; i < hinges.size(); ++i) acc = t.add(acc, hinges[i]);
  return t.scale(acc, 1.0 / static_cast<double>(hinges.size()));
}

}  // namespace

Var triplet_batch_hard_t(nn::Tape& t, const std::vector<Var>& visual,
                         const std::vector<Var>& textual,
                         const std::vector<int>& labels, double margin,
                         Supervision supervision) {
  if (visual.size() != textual.size()) {
    throw ConfigError("triplet: visual/textual batch size mismatch");
  }
  Var t2i = triplet_direction(t, textual, visual, labels, margin, supervision);
  Var i2t = triplet_direction(t, visual, textual, labels, margin, supervision);
  return t.scale(t.add(t2i, i2t), 0.5);
}

std::string head_prefix(const ModelConfig& config, const std::string& branch,
                        const std::string& slot) {
  if (config.share_classifier) return "head." + slot;
  return "head." + branch + "." + slot;
}

namespace {

// mean over the batch of -log p_y for one feature slot, visual and textual
Var nll_term(ForwardCtx& ctx, const std::vector<Var>& vis,
             const std::vector<Var>& txt, const std::vector<int>& labels,
             const std::string& head) {
  nn::Tape& t = ctx.tape;
  Var W = ctx.p(head + ".W");
  Var gamma = ctx.p(head + ".gamma");
  const int M = static_cast<int>(t.value(W).rows());
  std::vector<Var> terms;
  for (std::size_t i = 0; i < vis.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= M) throw ConfigError("id loss: label out of range");
    for (const std::vector<Var>* feats : {&vis, &txt}) {
      Var probs = class_probs_t(t, (*feats)[i], W, gamma);
      Var py = t.select_rows(probs, {labels[i]});
      terms.push_back(t.scale(t.log_floor(py, 1e-300), -1.0));
    }
  }
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = t.add(acc, terms[i]);
  return t.scale(acc, 1.0 / static_cast<double>(vis.size()));
}

}  // namespace

Var total_loss_t(ForwardCtx& ctx, const std::vector<SampleVars>& batch,
                 const std::vector<int>& labels, const LossWeights& weights,
                 const BranchConfig& branches, Supervision supervision,
                 LossBreakdown* breakdown) {
  weights.validate();
  branches.validate();
  if (batch.size() != labels.size()) {
    throw ConfigError("total_loss: batch/label size mismatch");
  }
  nn::Tape& t = ctx.tape;
  const ModelConfig& cfg = ctx.model.config;
  const int B = static_cast<int>(batch.size());
  LossBreakdown local;

  // collect per-branch global-slot features
  struct Slot {
    std::vector<Var> vis, txt;
  };
  std::map<std::string, Slot> global_slots;
  std::vector<std::string> active;
  if (branches.rgb) active.push_back("rgb");
  if (branches.grs) active.push_back("grs");
  if (branches.clr) active.push_back("clr");
  for (const std::string& br : active) {
    Slot s;
    for (int i = 0; i < B; ++i) {
      if (br == "rgb") {
        s.vis.push_back(batch[i].rgb.visual_global);
        s.txt.push_back(batch[i].rgb.text_global);
      } else if (br == "grs") {
        s.vis.push_back(batch[i].grs.visual_global);
        s.txt.push_back(batch[i].grs.text_global);
      } else {
        s.vis.push_back(batch[i].clr.visual_color);
        s.txt.push_back(batch[i].clr.text_color);
      }
    }
    global_slots[br] = std::move(s);
  }

  std::vector<Var> weighted;
  auto add_term = [&](const std::string& name, Var v, double weight) {
    local.terms[name] = nn::scalar(t, v);
    if (weight != 0.0) weighted.push_back(t.scale(v, weight));
  };

  // identification loss (dropped entirely in weak supervision)
  if (supervision == Supervision::kFull && weights.id > 0.0) {
    for (const std::string& br : active) {
      const Slot& s = global_slots[br];
      add_term("id." + br + ".global",
               nll_term(ctx, s.vis, s.txt, labels, head_prefix(cfg, br, "global")),
               weights.id);
    }
    for (const std::string& br : {std::string("rgb"), std::string("grs")}) {
      if ((br == "rgb" && !branches.rgb) || (br == "grs" && !branches.grs)) continue;
      for (int k = 0; k < cfg.parts; ++k) {
        Slot s;
        for (int i = 0; i < B; ++i) {
          const BranchVars& bv = br == "rgb" ? batch[i].rgb : batch[i].grs;
          s.vis.push_back(bv.visual_locals[k]);
          s.txt.push_back(bv.text_locals[k]);
        }
        add_term("id." + br + ".part" + std::to_string(k),
                 nll_term(ctx, s.vis, s.txt, labels,
                          head_prefix(cfg, br, "part" + std::to_string(k))),
                 weights.id);
      }
    }
  }

  // triplet ranking loss
  if (weights.triplet > 0.0) {
    for (const std::string& br : active) {
      const Slot& s = global_slots[br];
      add_term("tri." + br + ".global",
               triplet_batch_hard_t(t, s.vis, s.txt, labels, weights.margin,
                                    supervision),
               weights.triplet);
      if (br == "clr") continue;  // clr has no local representations
      Slot locals;
      for (int i = 0; i < B; ++i) {
        const BranchVars& bv = br == "rgb" ? batch[i].rgb : batch[i].grs;
        locals.vis.push_back(bv.visual_locals_concat);
        locals.txt.push_back(bv.text_locals_concat);
      }
      add_term("tri." + br + ".local",
               triplet_batch_hard_t(t, locals.vis, locals.txt, labels,
                                    weights.margin, supervision),
               weights.triplet);
    }
  }

  // mutual learning loss over branch-wise identity distributions
  if (weights.mutual > 0.0 && active.size() >= 2 && cfg.num_classes > 0) {
    std::map<std::string, Slot> probs;
    for (const std::string& br : active) {
      std::string head = head_prefix(cfg, br, "global");
      Var W = ctx.p(head + ".W");
      Var gamma = ctx.p(head + ".gamma");
      Slot p;
      for (int i = 0; i < B; ++i) {
        p.vis.push_back(class_probs_t(t, global_slots[br].vis[i], W, gamma));
        p.txt.push_back(class_probs_t(t, global_slots[br].txt[i], W, gamma));
      }
      probs[br] = std::move(p);
    }
    for (const std::string& br : active) {
      std::vector<Var> kls;
      for (const std::string& other : active) {
        if (other == br) continue;
        for (int i = 0; i < B; ++i) {
          kls.push_back(kl_divergence_t(t, probs[br].vis[i], probs[other].vis[i]));
          kls.push_back(kl_divergence_t(t, probs[br].txt[i], probs[other].txt[i]));
        }
      }
      Var acc = kls[0];
      for (std::size_t i = 1; i < kls.size(); ++i) acc = t.add(acc, kls[i]);
      add_term("ml." + br, t.scale(acc, 0.5), weights.mutual);
    }
  }

  Var total = t.constant(Matrix::Zero(1, 1));
  for (Var v : weighted) total = t.add(total, v);
  local.total = nn::scalar(t, total);
  if (breakdown) *breakdown = std::move(local);
  return total;
}

LossBreakdown total_loss(ModelParams& model, const std::vector<PersonRecord>& batch,
                         const ColorBank& bank, const LossWeights& weights,
                         const BranchConfig& branches, Supervision supervision) {
  nn::Tape tape;
  ForwardCtx ctx{tape, model, {}};
  std::vector<SampleVars> vars;
  std::vector<int> labels;
  vars.reserve(batch.size());
  for (const PersonRecord& rec : batch) {
    TokenSequence tokens = tokenize(rec.caption);
    SampleVars sv;
    if (branches.rgb) sv.rgb = run_rgb_branch_t(ctx, rec.image, tokens);
    if (branches.grs) sv.grs = run_grs_branch_t(ctx, rec.image, tokens, bank);
    if (branches.clr) {
      sv.clr = run_clr_branch_t(ctx, sv.rgb, sv.grs, extract_color_prior(tokens, bank),
                                branches.color_prior, branches.detach_grs);
    }
    vars.push_back(std::move(sv));
    labels.push_back(rec.identity);
  }
  LossBreakdown breakdown;
  total_loss_t(ctx, vars, labels, weights, branches, supervision, &breakdown);
  return breakdown;
}

}  // namespace caibc
