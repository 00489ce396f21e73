#include "caibc/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "caibc/errors.hpp"

namespace caibc {

GalleryIndex build_gallery(const DatasetManifest& manifest, ModelParams& model,
                           const ColorBank& bank, const BranchConfig& config) {
  config.validate();
  GalleryIndex index;
  index.config = config;
  index.entries.reserve(manifest.records.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const PersonRecord& rec = manifest.records[i];
    GalleryEntry e;
    e.record_index = static_cast<int>(i);
    e.identity = rec.identity;
    FeatureMap rgb_map, grs_map;
    if (config.rgb || config.clr) {
      rgb_map = visual_backbone(rec.image, model, "rgb");
    }
    if (config.grs || config.clr) {
      RgbImage deprived = gray_to_three_channel(rgb_to_grayscale(rec.image));
      grs_map = visual_backbone(deprived, model, "grs");
    }
    if (config.rgb) {
      e.vg_rgb = global_pool_project(rgb_map, model, "rgb");
      e.vl_rgb = local_partition_project(rgb_map, model, "rgb");
    }
    if (config.grs) {
      e.vg_grs = global_pool_project(grs_map, model, "grs");
      e.vl_grs = local_partition_project(grs_map, model, "grs");
    }
    if (config.clr) e.v_clr = clr_visual_color(rgb_map, grs_map, model);
    index.entries.push_back(std::move(e));
  }
  return index;
}

QueryFeatures encode_query(const TokenSequence& tokens, int identity,
                           ModelParams& model, const ColorBank& bank,
                           const BranchConfig& config) {
  QueryFeatures q;
  q.identity = identity;
  WordRepMatrix e_rgb, e_grs;
  if (config.rgb || config.clr) e_rgb = text_word_reps(tokens, model);
  if (config.grs || config.clr) {
    e_grs = text_word_reps(mask_colors(tokens, bank), model);
  }
  if (config.rgb) {
    q.tg_rgb = text_global(e_rgb, model, "rgb");
    q.tl_rgb = word_attention_locals(e_rgb, model, "rgb");
  }
  if (config.grs) {
    q.tg_grs = text_global(e_grs, model, "grs");
    q.tl_grs = word_attention_locals(e_grs, model, "grs");
  }
  if (config.clr) {
    q.t_clr = clr_text_color(e_rgb, e_grs, extract_color_prior(tokens, bank),
                             model, config.color_prior);
  }
  return q;
}

double query_gallery_score(const QueryFeatures& query, const GalleryEntry& entry,
                           const BranchConfig& config) {
  double fused = 0.0;
  if (config.rgb) {
    fused += config.weight("g_rgb") * cosine(entry.vg_rgb, query.tg_rgb);
    fused += config.weight("l_rgb") *
             cosine(concat_locals(entry.vl_rgb), concat_locals(query.tl_rgb));
  }
  if (config.grs) {
    fused += config.weight("g_grs") * cosine(entry.vg_grs, query.tg_grs);
    fused += config.weight("l_grs") *
             cosine(concat_locals(entry.vl_grs), concat_locals(query.tl_grs));
  }
  if (config.clr) {
    fused += config.weight("clr") * cosine(entry.v_clr, query.t_clr);
  }
  return fused;
}

RankedList rank_from_scores(const std::vector<double>& scores) {
  RankedList out;
  out.order.resize(scores.size());
  std::iota(out.order.begin(), out.order.end(), 0);
  std::sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  out.scores.reserve(scores.size());
  for (int idx : out.order) out.scores.push_back(scores[idx]);
  return out;
}

RankedList rank_query(const QueryFeatures& query, const GalleryIndex& gallery) {
  std::vector<double> scores;
  scores.reserve(gallery.entries.size());
  for (const GalleryEntry& e : gallery.entries) {
    scores.push_back(query_gallery_score(query, e, gallery.config));
  }
  return rank_from_scores(scores);
}

EvalReport evaluate(const DatasetManifest& manifest, ModelParams& model,
                    const ColorBank& bank, const BranchConfig& config,
                    const std::vector<int>& ks) {
  if (manifest.records.empty()) throw DataError("evaluation manifest is empty");
  GalleryIndex gallery = build_gallery(manifest, model, bank, config);

  EvalReport report;
  report.queries = static_cast<int>(manifest.records.size());
  report.gallery_size = static_cast<int>(gallery.entries.size());
  std::map<int, int> hits;
  for (int k : ks) hits[k] = 0;

  for (const PersonRecord& rec : manifest.records) {
    QueryFeatures q =
        encode_query(tokenize(rec.caption), rec.identity, model, bank, config);
    RankedList ranked = rank_query(q, gallery);
    for (int k : ks) {
      int top = std::min<int>(k, static_cast<int>(ranked.order.size()));
      for (int r = 0; r < top; ++r) {
        if (gallery.entries[ranked.order[r]].identity == rec.identity) {
          ++hits[k];
          break;
        }
      }
    }
  }
  for (int k : ks) {
    report.recall[k] = static_cast<double>(hits[k]) / report.queries;
  }
  return report;
}

TrainConfig apply_variant(const TrainConfig& base, const std::string& variant) {
  TrainConfig c = base;
  if (variant == "full") {
    c.branches.rgb = c.branches.grs = c.branches.clr = true;
    c.branches.color_prior = true;
  } else if (variant == "full-noprior") {
    c.branches.rgb = c.branches.grs = c.branches.clr = true;
    c.branches.color_prior = false;
  } else if (variant == "rgb+grs+ml") {
    c.branches.rgb = c.branches.grs = true;
    c.branches.clr = false;
  } else if (variant == "rgb+grs") {
    c.branches.rgb = c.branches.grs = true;
    c.branches.clr = false;
    c.loss_weights.mutual = 0.0;
  } else if (variant == "rgb") {
    c.branches.rgb = true;
    c.branches.grs = c.branches.clr = false;
    c.loss_weights.mutual = 0.0;
  } else {
    throw ConfigError("unknown ablation variant: " + variant);
  }
  c.branches.validate();
  return c;
}

AblationReport ablation_run(const TrainConfig& base,
                            const DatasetManifest& train_manifest,
                            const DatasetManifest& eval_manifest,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const AblationRow&)>& row_cb) {
  if (variants.empty() || seeds.empty()) {
    throw ConfigError("ablation needs at least one variant and one seed");
  }
  AblationReport report;
  for (const std::string& variant : variants) {
    double sum_r1 = 0.0, sum_r10 = 0.0;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = apply_variant(base, variant);
      cfg.seed = seed;
      TrainState state = train(cfg, train_manifest);
      EvalReport eval =
          evaluate(eval_manifest, state.model, state.bank, cfg.branches);
      AblationRow row{variant, seed, eval.recall.at(1), eval.recall.at(10)};
      if (row_cb) row_cb(row);
      sum_r1 += row.r1;
      sum_r10 += row.r10;
      report.rows.push_back(std::move(row));
    }
    report.mean_r1[variant] = sum_r1 / static_cast<double>(seeds.size());
    report.mean_r10[variant] = sum_r10 / static_cast<double>(seeds.size());
  }
  return report;
}

std::string format_ablation_table(const AblationReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %8s %8s %6s\n", "variant", "R@1",
                "R@10", "runs");
  out << line;
  for (const auto& [variant, r1] : report.mean_r1) {
    int runs = static_cast<int>(
        std::count_if(report.rows.begin(), report.rows.end(),
                      [&](const AblationRow& r) { return r.variant == variant; }));
    std::snprintf(line, sizeof line, "%-14s %8.4f %8.4f %6d\n", variant.c_str(),
                  r1, report.mean_r10.at(variant), runs);
    out << line;
  }
  return out.str();
}

}  // namespace caibc
