#ifndef CAIBC_RETRIEVAL_HPP_
#define CAIBC_RETRIEVAL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "caibc/trainer.hpp"

namespace caibc {

// Cached visual-side features for one gallery image.
struct GalleryEntry {
  int record_index = -1;
  int identity = -1;
  GlobalVec vg_rgb;
  LocalVecSet vl_rgb;
  GlobalVec vg_grs;
  LocalVecSet vl_grs;
  GlobalVec v_clr;
};

struct GalleryIndex {
  std::vector<GalleryEntry> entries;
  BranchConfig config;
};

// Text-side features for one query caption.
struct QueryFeatures {
  int identity = -1;
  GlobalVec tg_rgb;
  LocalVecSet tl_rgb;
  GlobalVec tg_grs;
  LocalVecSet tl_grs;
  GlobalVec t_clr;
};

GalleryIndex build_gallery(const DatasetManifest& manifest, ModelParams& model,
                           const ColorBank& bank, const BranchConfig& config);

QueryFeatures encode_query(const TokenSequence& tokens, int identity,
                           ModelParams& model, const ColorBank& bank,
                           const BranchConfig& config);

double query_gallery_score(const QueryFeatures& query, const GalleryEntry& entry,
                           const BranchConfig& config);

// Gallery indices by descending score; exact ties keep the lower index first.
struct RankedList {
  std::vector<int> order;
  std::vector<double> scores;  // aligned with order
};

RankedList rank_from_scores(const std::vector<double>& scores);

RankedList rank_query(const QueryFeatures& query, const GalleryIndex& gallery);

struct EvalReport {
  std::map<int, double> recall;  // k -> Recall@k over all queries
  int queries = 0;
  int gallery_size = 0;
};

// Every record contributes its image to the gallery and its caption as a
// query; a hit is any gallery image sharing the query identity.
EvalReport evaluate(const DatasetManifest& manifest, ModelParams& model,
                    const ColorBank& bank, const BranchConfig& config,
                    const std::vector<int>& ks = {1, 5, 10});

// --- ablation ---

// Known variants: full, full-noprior, rgb+grs+ml, rgb+grs, rgb.
TrainConfig apply_variant(const TrainConfig& base, const std::string& variant);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double r1 = 0.0;
  double r10 = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::map<std::string, double> mean_r1;
  std::map<std::string, double> mean_r10;
};

AblationReport ablation_run(const TrainConfig& base,
                            const DatasetManifest& train_manifest,
                            const DatasetManifest& eval_manifest,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const AblationRow&)>& row_cb =
                                nullptr);

std::string format_ablation_table(const AblationReport& report);

}  // namespace caibc

#endif  // CAIBC_RETRIEVAL_HPP_
