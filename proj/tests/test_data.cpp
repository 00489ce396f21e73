#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "caibc/data.hpp"
#include "caibc/errors.hpp"

using namespace caibc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthSpec small_spec() {
  SynthSpec spec;
  spec.identities = 8;
  spec.images_per_identity = 2;
  spec.captions_per_image = 1;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST_CASE("tokenize lowercases and strips punctuation") {
  TokenSequence t = tokenize("A Red, well-worn SHIRT!  (nice)");
  CHECK(t.tokens == std::vector<std::string>{"a", "red", "well-worn", "shirt",
                                             "nice"});
  CHECK_THROWS_AS(tokenize("  ...  "), DataError);
  CHECK_THROWS_AS(tokenize(""), DataError);
}

TEST_CASE("tokenize keeps only intra-word hyphens") {
  CHECK(tokenize("semi-gloss - paint").tokens ==
        std::vector<std::string>{"semi-gloss", "paint"});
}

TEST_CASE("manifest roundtrip with identity remapping") {
  fs::path dir = temp_dir("caibc_manifest_test");
  DatasetManifest m = synth_generate(small_spec());
  // give the records gappy original identities
  for (PersonRecord& r : m.records) r.identity = r.identity * 3 + 5;
  m.identity_count = 0;
  save_manifest(m, dir.string(), "train");

  DatasetManifest loaded = load_manifest((dir / "train.tsv").string());
  CHECK(loaded.records.size() == m.records.size());
  CHECK(loaded.identity_count == 8);
  CHECK(loaded.split == Split::kTrain);
  // contiguous labels
  std::set<int> ids;
  for (const PersonRecord& r : loaded.records) ids.insert(r.identity);
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == 7);
  CHECK(!loaded.remapping.empty());
  // pixels survive the 8-bit file format within rounding
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      double diff = (loaded.records[i].image.chan[c] - m.records[i].image.chan[c])
                        .cwiseAbs()
                        .maxCoeff();
      CHECK(diff <= 0.5);
    }
  }
  CHECK(loaded.records[0].caption == m.records[0].caption);
  fs::remove_all(dir);
}

TEST_CASE("manifest header and field validation") {
  fs::path dir = temp_dir("caibc_manifest_bad");
  {
    std::ofstream out(dir / "bad1.tsv");
    out << "not-a-manifest\n";
  }
  CHECK_THROWS_AS(load_manifest((dir / "bad1.tsv").string()), DataError);
  {
    std::ofstream out(dir / "bad2.tsv");
    out << "#caibc-manifest\tv1\ttrain\n";
    out << "img.ppm\tnot_an_int\tcaption text\n";
  }
  CHECK_THROWS_AS(load_manifest((dir / "bad2.tsv").string()), DataError);
  {
    std::ofstream out(dir / "bad3.tsv");
    out << "#caibc-manifest\tv1\ttrain\n";
    out << "only-two-fields\t3\n";
  }
  CHECK_THROWS_AS(load_manifest((dir / "bad3.tsv").string()), DataError);
  CHECK_THROWS_AS(load_manifest((dir / "missing.tsv").string()), DataError);
  fs::remove_all(dir);
}

TEST_CASE("ppm roundtrip") {
  fs::path dir = temp_dir("caibc_ppm_test");
  RgbImage img = render_identity(small_spec(), IdentityAttributes{2, 4, 1, 3});
  write_ppm((dir / "x.ppm").string(), img);
  RgbImage back = read_ppm((dir / "x.ppm").string());
  CHECK(back.height == img.height);
  CHECK(back.width == img.width);
  for (int c = 0; c < 3; ++c) {
    CHECK((back.chan[c] - img.chan[c]).cwiseAbs().maxCoeff() <= 0.5);
  }
  fs::remove_all(dir);
}

TEST_CASE("generator is deterministic") {
  SynthSpec spec = small_spec();
  DatasetManifest a = synth_generate(spec);
  DatasetManifest b = synth_generate(spec);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].caption == b.records[i].caption);
    CHECK(a.records[i].identity == b.records[i].identity);
    for (int c = 0; c < 3; ++c) {
      CHECK(a.records[i].image.chan[c] == b.records[i].image.chan[c]);
    }
  }
  // train and test splits use disjoint streams
  DatasetManifest t = synth_generate(spec, Split::kTest);
  CHECK(t.records[0].caption != a.records[0].caption);
}

TEST_CASE("color ambiguity pairs share colors but differ in shape cues") {
  SynthSpec spec;
  spec.identities = 20;
  spec.color_ambiguity = 1.0;
  spec.seed = 9;
  std::vector<IdentityAttributes> attrs = synth_attributes(spec);
  for (int p = 0; p < 10; ++p) {
    const IdentityAttributes& a = attrs[2 * p];
    const IdentityAttributes& b = attrs[2 * p + 1];
    CHECK(a.torso_color == b.torso_color);
    CHECK(a.leg_color == b.leg_color);
    CHECK(a.motif != b.motif);
    CHECK(a.accessory != b.accessory);
  }
  // rho = 0 leaves attribute tuples unique and unpaired
  spec.color_ambiguity = 0.0;
  std::vector<IdentityAttributes> free_attrs = synth_attributes(spec);
  std::set<std::tuple<int, int, int, int>> tuples;
  for (const IdentityAttributes& a : free_attrs) {
    tuples.insert({a.torso_color, a.leg_color, a.motif, a.accessory});
  }
  CHECK(tuples.size() == free_attrs.size());
}

TEST_CASE("grayscale renderings of color twins still differ") {
  SynthSpec spec;
  spec.identities = 20;
  spec.color_ambiguity = 1.0;
  spec.seed = 13;
  std::vector<IdentityAttributes> attrs = synth_attributes(spec);
  for (int p = 0; p < 10; ++p) {
    GrayImage ga = rgb_to_grayscale(render_identity(spec, attrs[2 * p]));
    GrayImage gb = rgb_to_grayscale(render_identity(spec, attrs[2 * p + 1]));
    CHECK((ga.pixels - gb.pixels).cwiseAbs().maxCoeff() > 1.0);
  }
}

TEST_CASE("captions mention the attribute words") {
  SynthSpec spec = small_spec();
  std::vector<IdentityAttributes> attrs = synth_attributes(spec);
  DatasetManifest m = synth_generate(spec);
  for (const PersonRecord& r : m.records) {
    const IdentityAttributes& a = attrs[r.identity];
    TokenSequence toks = tokenize(r.caption);
    auto has = [&](const std::string& w) {
      return std::find(toks.tokens.begin(), toks.tokens.end(), w) !=
             toks.tokens.end();
    };
    CHECK(has(palette_names()[a.torso_color]));
    CHECK(has(palette_names()[a.leg_color]));
    CHECK(has(motif_names()[a.motif]));
    CHECK(has(accessory_names()[a.accessory]));
  }
}

TEST_CASE("identity batch sampler shape and constraints") {
  DatasetManifest m = synth_generate(small_spec());
  std::mt19937_64 rng(1);
  std::vector<int> batch = identity_batch_sample(m, 8, 4, rng);
  CHECK(batch.size() == 8);
  std::map<int, int> per_id;
  for (int idx : batch) per_id[m.records[idx].identity]++;
  CHECK(per_id.size() == 4);
  for (const auto& [id, count] : per_id) CHECK(count == 2);
  // records within one identity are distinct when enough exist
  std::set<int> uniq(batch.begin(), batch.end());
  CHECK(uniq.size() == batch.size());

  CHECK_THROWS_AS(identity_batch_sample(m, 7, 4, rng), ConfigError);
  CHECK_THROWS_AS(identity_batch_sample(m, 20, 10, rng), ConfigError);
  CHECK_THROWS_AS(identity_batch_sample(m, 4, 0, rng), ConfigError);
}

TEST_CASE("pair batch sampler ignores identities and covers records") {
  DatasetManifest m = synth_generate(small_spec());
  std::mt19937_64 rng(2);
  std::vector<int> counts(m.records.size(), 0);
  const int draws = 4000, batch = 4;
  for (int i = 0; i < draws; ++i) {
    for (int idx : pair_batch_sample(m, batch, rng)) counts[idx]++;
  }
  double expected = static_cast<double>(draws * batch) / m.records.size();
  double sigma = std::sqrt(expected);
  for (int c : counts) {
    CHECK(std::abs(c - expected) < 5.0 * sigma);
  }
}

TEST_CASE("hflip is an involution and mirrors columns") {
  RgbImage img = render_identity(small_spec(), IdentityAttributes{1, 2, 3, 1});
  RgbImage flipped = hflip(img);
  CHECK(flipped.chan[0](0, 0) == img.chan[0](0, img.width - 1));
  RgbImage twice = hflip(flipped);
  for (int c = 0; c < 3; ++c) CHECK(twice.chan[c] == img.chan[c]);
}

TEST_CASE("synth spec validation") {
  SynthSpec spec;
  spec.identities = 1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = SynthSpec{};
  spec.color_ambiguity = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("synth spec json roundtrip") {
  fs::path dir = temp_dir("caibc_spec_test");
  SynthSpec spec;
  spec.identities = 12;
  spec.color_ambiguity = 0.75;
  spec.seed = 42;
  spec.save((dir / "spec.json").string());
  SynthSpec loaded = SynthSpec::load((dir / "spec.json").string());
  CHECK(loaded.identities == 12);
  CHECK(loaded.color_ambiguity == 0.75);
  CHECK(loaded.seed == 42);
  fs::remove_all(dir);
}
