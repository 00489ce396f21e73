#ifndef CAIBC_DATA_HPP_
#define CAIBC_DATA_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "caibc/color_ops.hpp"

namespace caibc {

enum class Split { kTrain, kVal, kTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct PersonRecord {
  std::string image_path;  // empty for purely in-memory records
  RgbImage image;
  std::string caption;
  int identity = -1;
};

struct DatasetManifest {
  std::vector<PersonRecord> records;
  Split split = Split::kTrain;
  int identity_count = 0;  // Q, identities contiguous 0..Q-1
  // original -> contiguous id remapping applied at load, if any
  std::vector<std::pair<int, int>> remapping;
};

// Identity-level attribute tuple of the synthetic generator.
struct IdentityAttributes {
  int torso_color = 0;  // palette index
  int leg_color = 0;
  int motif = 0;      // index into motif_names()
  int accessory = 0;  // index into accessory_names()
};

struct SynthSpec {
  int identities = 40;
  int images_per_identity = 4;
  int captions_per_image = 2;
  int eval_images_per_identity = 2;
  int eval_captions_per_image = 1;
  double color_ambiguity = 0.5;  // fraction of identity pairs sharing colors
  std::uint64_t seed = 1;
  int image_height = 48;
  int image_width = 16;

  static SynthSpec load(const std::string& path);
  void save(const std::string& path) const;
  void validate() const;
};

// Color palette used by the generator; names are a subset of the seed lexicon.
const std::vector<std::string>& palette_names();
const std::vector<std::string>& motif_names();
const std::vector<std::string>& accessory_names();

// PPM (P6) / PGM (P5) image files, 8-bit, values rounded and clamped on write.
void write_ppm(const std::string& path, const RgbImage& image);
RgbImage read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Eigen::MatrixXd& pixels);

// Line-delimited TSV manifest with a "#caibc-manifest<TAB>v1<TAB><split>"
// header; fields: image path (relative to the manifest), identity, caption.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& dir,
                   const std::string& name);

// Lowercase, strip punctuation except intra-word hyphens, split on whitespace.
TokenSequence tokenize(const std::string& caption);

// Deterministic identity attribute assignment for a spec.
std::vector<IdentityAttributes> synth_attributes(const SynthSpec& spec);

DatasetManifest synth_generate(const SynthSpec& spec, Split split = Split::kTrain);

// Renders one identity without jitter; used by dataset property checks.
RgbImage render_identity(const SynthSpec& spec, const IdentityAttributes& attrs,
                         int jitter_dx = 0, int jitter_dy = 0);

// Samples ids_per_batch identities, batch_size/ids_per_batch records each
// (with replacement when an identity has fewer). Returns record indices.
std::vector<int> identity_batch_sample(const DatasetManifest& manifest,
                                       int batch_size, int ids_per_batch,
                                       std::mt19937_64& rng);

// Weak-supervision sampling: uniform over records, identities ignored.
std::vector<int> pair_batch_sample(const DatasetManifest& manifest,
                                   int batch_size, std::mt19937_64& rng);

RgbImage hflip(const RgbImage& image);

}  // namespace caibc

#endif  // CAIBC_DATA_HPP_
