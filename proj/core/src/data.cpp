#include "caibc/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caibc/errors.hpp"

namespace caibc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split name: " + name);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                  std::uint64_t d = 0) {
  return splitmix64(splitmix64(splitmix64(splitmix64(a) ^ b) ^ c) ^ d);
}

int rand_below(std::mt19937_64& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

struct Rgb {
  double r, g, b;
};

const std::vector<std::pair<std::string, Rgb>>& palette() {
  static const std::vector<std::pair<std::string, Rgb>> p = {
      {"red", {200, 30, 30}},     {"blue", {30, 60, 200}},
      {"green", {30, 160, 60}},   {"yellow", {230, 210, 40}},
      {"black", {25, 25, 25}},    {"white", {240, 240, 240}},
      {"purple", {140, 40, 170}}, {"orange", {235, 140, 30}},
      {"pink", {240, 130, 180}},  {"brown", {130, 80, 40}},
      {"gray", {128, 128, 128}},
  };
  return p;
}

double luminance(const Rgb& c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

// Contrast overlay shade for motifs: darken bright colors, lighten dark ones.
// Deliberately subtle so color stays the dominant visual signal and the
// motif is a fine-grained cue.
Rgb contrast_shade(const Rgb& c) {
  if (luminance(c) > 110.0) {
    return {c.r * 0.82, c.g * 0.82, c.b * 0.82};
  }
  return {std::min(255.0, c.r * 0.88 + 32.0), std::min(255.0, c.g * 0.88 + 32.0),
          std::min(255.0, c.b * 0.88 + 32.0)};
}

void fill_rect(RgbImage& img, int r0, int r1, int c0, int c1, const Rgb& col) {
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, img.height);
  c1 = std::min(c1, img.width);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      img.chan[0](r, c) = col.r;
      img.chan[1](r, c) = col.g;
      img.chan[2](r, c) = col.b;
    }
  }
}

}  // namespace

const std::vector<std::string>& palette_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, rgb] : palette()) n.push_back(name);
    return n;
  }();
  return names;
}

const std::vector<std::string>& motif_names() {
  static const std::vector<std::string> names = {
      "plain",  "striped", "checkered", "dotted",
      "zigzag", "banded",  "paneled",   "collared"};
  return names;
}

const std::vector<std::string>& accessory_names() {
  static const std::vector<std::string> names = {"hat",  "bag",      "scarf",
                                                 "boots", "belt",    "backpack",
                                                 "gloves", "sash"};
  return names;
}

void SynthSpec::validate() const {
  if (identities < 2) throw ConfigError("synth spec: identities must be >= 2");
  if (images_per_identity < 1 || captions_per_image < 1 ||
      eval_images_per_identity < 1 || eval_captions_per_image < 1) {
    throw ConfigError("synth spec: per-identity counts must be >= 1");
  }
  if (color_ambiguity < 0.0 || color_ambiguity > 1.0) {
    throw ConfigError("synth spec: color_ambiguity must lie in [0, 1]");
  }
  if (image_height < 16 || image_width < 8) {
    throw ConfigError("synth spec: image too small to render");
  }
}

SynthSpec SynthSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synth spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("synth spec parse error: " + std::string(e.what()));
  }
  SynthSpec s;
  s.identities = j.value("identities", s.identities);
  s.images_per_identity = j.value("images_per_identity", s.images_per_identity);
  s.captions_per_image = j.value("captions_per_image", s.captions_per_image);
  s.eval_images_per_identity =
      j.value("eval_images_per_identity", s.eval_images_per_identity);
  s.eval_captions_per_image =
      j.value("eval_captions_per_image", s.eval_captions_per_image);
  s.color_ambiguity = j.value("color_ambiguity", s.color_ambiguity);
  s.seed = j.value("seed", s.seed);
  s.image_height = j.value("image_height", s.image_height);
  s.image_width = j.value("image_width", s.image_width);
  s.validate();
  return s;
}

void SynthSpec::save(const std::string& path) const {
  json j{{"identities", identities},
         {"images_per_identity", images_per_identity},
         {"captions_per_image", captions_per_image},
         {"eval_images_per_identity", eval_images_per_identity},
         {"eval_captions_per_image", eval_captions_per_image},
         {"color_ambiguity", color_ambiguity},
         {"seed", seed},
         {"image_height", image_height},
         {"image_width", image_width}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write synth spec: " + path);
  out << j.dump(2) << "\n";
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        double v = std::clamp(image.chan[ch](r, c), 0.0, 255.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
      }
    }
  }
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError("not a P6 PPM file: " + path);
  auto next_int = [&in, &path]() {
    // skip whitespace and '#' comments
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int v;
    if (!(in >> v)) throw DataError("truncated PPM header: " + path);
    return v;
  };
  int w = next_int();
  int h = next_int();
  int maxval = next_int();
  if (maxval != 255) throw DataError("unsupported PPM maxval: " + path);
  in.get();  // single whitespace after maxval
  RgbImage img;
  img.height = h;
  img.width = w;
  for (auto& ch : img.chan) ch.resize(h, w);
  std::vector<char> buf(static_cast<std::size_t>(w) * h * 3);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw DataError("truncated PPM payload: " + path);
  }
  std::size_t i = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        img.chan[ch](r, c) = static_cast<double>(static_cast<unsigned char>(buf[i++]));
      }
    }
  }
  return img;
}

void write_pgm(const std::string& path, const Eigen::MatrixXd& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P5\n" << pixels.cols() << " " << pixels.rows() << "\n255\n";
  for (int r = 0; r < pixels.rows(); ++r) {
    for (int c = 0; c < pixels.cols(); ++c) {
      double v = std::clamp(pixels(r, c), 0.0, 255.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
  }
}

TokenSequence tokenize(const std::string& caption) {
  if (caption.empty()) throw DataError("tokenize: empty caption");
  std::string norm;
  norm.reserve(caption.size());
  for (char raw : caption) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      norm.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '-') {
      norm.push_back('-');
    } else {
      norm.push_back(' ');
    }
  }
  TokenSequence seq;
  std::istringstream iss(norm);
  std::string tok;
  while (iss >> tok) {
    // hyphens survive only between alphanumerics
    while (!tok.empty() && tok.front() == '-') tok.erase(tok.begin());
    while (!tok.empty() && tok.back() == '-') tok.pop_back();
    if (!tok.empty()) seq.tokens.push_back(tok);
  }
  if (seq.tokens.empty()) {
    throw DataError("tokenize: caption empty after normalization: " + caption);
  }
  return seq;
}

std::vector<IdentityAttributes> synth_attributes(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(mix(spec.seed, 0xA77A));
  const int ncolors = static_cast<int>(palette().size());
  const int nmotifs = static_cast<int>(motif_names().size());
  const int naccess = static_cast<int>(accessory_names().size());

  std::vector<IdentityAttributes> attrs(spec.identities);
  std::set<std::tuple<int, int, int, int>> seen;
  for (int i = 0; i < spec.identities; ++i) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      IdentityAttributes a;
      a.torso_color = rand_below(rng, ncolors);
      a.leg_color = rand_below(rng, ncolors);
      a.motif = rand_below(rng, nmotifs);
      a.accessory = rand_below(rng, naccess);
      auto key = std::make_tuple(a.torso_color, a.leg_color, a.motif, a.accessory);
      if (seen.insert(key).second) {
        attrs[i] = a;
        break;
      }
    }
  }

  // Color-twin pairing: identity 2p+1 copies 2p's colors but must differ in
  // both motif and accessory, so grayscale renderings stay separable.
  int pairs = static_cast<int>(
      std::llround(spec.color_ambiguity * spec.identities / 2.0));
  for (int p = 0; p < pairs && 2 * p + 1 < spec.identities; ++p) {
    IdentityAttributes& a = attrs[2 * p];
    IdentityAttributes& b = attrs[2 * p + 1];
    b.torso_color = a.torso_color;
    b.leg_color = a.leg_color;
    if (b.motif == a.motif) b.motif = (a.motif + 1 + rand_below(rng, nmotifs - 1)) % nmotifs;
    if (b.accessory == a.accessory) {
      b.accessory = (a.accessory + 1 + rand_below(rng, naccess - 1)) % naccess;
    }
  }
  return attrs;
}

RgbImage render_identity(const SynthSpec& spec, const IdentityAttributes& attrs,
                         int jitter_dx, int jitter_dy) {
  const int h = spec.image_height;
  const int w = spec.image_width;
  RgbImage img;
  img.height = h;
  img.width = w;
  const Rgb background{205, 205, 205};
  for (auto& ch : img.chan) ch.resize(h, w);
  fill_rect(img, 0, h, 0, w, background);

  const int dy = jitter_dy, dx = jitter_dx;
  auto row = [h, dy](double f) { return static_cast<int>(std::lround(f * h)) + dy; };
  auto col = [w, dx](double f) { return static_cast<int>(std::lround(f * w)) + dx; };

  const Rgb skin{200, 170, 140};
  const Rgb torso = palette()[attrs.torso_color].second;
  const Rgb legs = palette()[attrs.leg_color].second;
  const Rgb overlay = contrast_shade(torso);
  // accessories contrast mildly with the body region they sit next to
  const Rgb dark{150, 150, 150};
  const Rgb light{240, 240, 240};

  fill_rect(img, row(0.05), row(0.18), col(0.375), col(0.625), skin);  // head
  int t0 = row(0.20), t1 = row(0.58), tc0 = col(0.25), tc1 = col(0.75);
  fill_rect(img, t0, t1, tc0, tc1, torso);
  switch (attrs.motif) {
    case 0:  // plain
      break;
    case 1:  // stripes
      for (int r = t0; r < t1; ++r) {
        if (((r - t0) / 2) % 2 == 0) fill_rect(img, r, r + 1, tc0, tc1, overlay);
      }
      break;
    case 2:  // checker
      for (int r = t0; r < t1; ++r) {
        for (int c = tc0; c < tc1; ++c) {
          if ((((r - t0) / 3) + ((c - tc0) / 3)) % 2 == 0) {
            fill_rect(img, r, r + 1, c, c + 1, overlay);
          }
        }
      }
      break;
    case 3:  // dots
      for (int r = t0 + 1; r < t1; r += 3) {
        for (int c = tc0 + 1; c < tc1; c += 3) {
          fill_rect(img, r, r + 1, c, c + 1, overlay);
        }
      }
      break;
    case 4:  // zigzag: diagonal bands
      for (int r = t0; r < t1; ++r) {
        for (int c = tc0; c < tc1; ++c) {
          if ((((r - t0) + (c - tc0)) / 3) % 2 == 0) {
            fill_rect(img, r, r + 1, c, c + 1, overlay);
          }
        }
      }
      break;
    case 5:  // thick horizontal bands
      for (int r = t0; r < t1; ++r) {
        if (((r - t0) / 5) % 2 == 0) fill_rect(img, r, r + 1, tc0, tc1, overlay);
      }
      break;
    case 6:  // paneled: two-tone vertical split
      fill_rect(img, t0, t1, (tc0 + tc1) / 2, tc1, overlay);
      break;
    case 7:  // collared: band at the neckline
      fill_rect(img, t0, t0 + 4, tc0, tc1, overlay);
      break;
  }
  fill_rect(img, row(0.58), row(0.92), col(0.30), col(0.45), legs);
  fill_rect(img, row(0.58), row(0.92), col(0.55), col(0.70), legs);

  const Rgb acc_near_torso = luminance(torso) > 110.0 ? dark : light;
  const Rgb acc_near_legs = luminance(legs) > 110.0 ? dark : light;
  switch (attrs.accessory) {
    case 0:  // hat
      fill_rect(img, row(0.00), row(0.05), col(0.30), col(0.70), dark);
      break;
    case 1:  // bag
      fill_rect(img, row(0.38), row(0.56), col(0.02), col(0.20), acc_near_torso);
      break;
    case 2:  // scarf
      fill_rect(img, row(0.18), row(0.23), col(0.28), col(0.72), acc_near_torso);
      break;
    case 3:  // boots
      fill_rect(img, row(0.92), h, col(0.28), col(0.47), acc_near_legs);
      fill_rect(img, row(0.92), h, col(0.53), col(0.72), acc_near_legs);
      break;
    case 4:  // belt
      fill_rect(img, row(0.56), row(0.60), col(0.25), col(0.75), acc_near_torso);
      break;
    case 5:  // backpack straps
      fill_rect(img, row(0.20), row(0.46), col(0.28), col(0.36), acc_near_torso);
      fill_rect(img, row(0.20), row(0.46), col(0.64), col(0.72), acc_near_torso);
      break;
    case 6:  // gloves
      fill_rect(img, row(0.50), row(0.58), col(0.16), col(0.26), dark);
      fill_rect(img, row(0.50), row(0.58), col(0.74), col(0.84), dark);
      break;
    case 7: {  // sash: diagonal band across the torso
      for (int r = t0; r < t1; ++r) {
        double f = static_cast<double>(r - t0) / std::max(1, t1 - t0);
        int c0 = tc0 + static_cast<int>(f * (tc1 - tc0 - 3));
        fill_rect(img, r, r + 1, c0, c0 + 3, acc_near_torso);
      }
      break;
    }
  }
  return img;
}

namespace {

std::string make_caption(const IdentityAttributes& attrs, std::mt19937_64& rng) {
  std::vector<std::string> clauses;
  clauses.push_back("a " + palette()[attrs.torso_color].first + " " +
                    motif_names()[attrs.motif] + " shirt");
  clauses.push_back(palette()[attrs.leg_color].first + " pants");
  const std::string& acc = accessory_names()[attrs.accessory];
  bool plural = acc == "boots" || acc == "gloves";
  clauses.push_back(plural ? acc : "a " + acc);
  // clause-order shuffling keeps the text encoder from keyword-matching
  // on position
  for (int i = static_cast<int>(clauses.size()) - 1; i > 0; --i) {
    std::swap(clauses[i], clauses[rand_below(rng, i + 1)]);
  }
  std::string caption = "a person wearing " + clauses[0];
  for (std::size_t i = 1; i < clauses.size(); ++i) caption += " and " + clauses[i];
  caption += ".";
  return caption;
}

}  // namespace

DatasetManifest synth_generate(const SynthSpec& spec, Split split) {
  spec.validate();
  std::vector<IdentityAttributes> attrs = synth_attributes(spec);

  const int images = split == Split::kTrain ? spec.images_per_identity
                                            : spec.eval_images_per_identity;
  const int captions = split == Split::kTrain ? spec.captions_per_image
                                              : spec.eval_captions_per_image;
  const std::uint64_t split_tag = static_cast<std::uint64_t>(split) + 1;

  DatasetManifest m;
  m.split = split;
  m.identity_count = spec.identities;
  for (int id = 0; id < spec.identities; ++id) {
    for (int im = 0; im < images; ++im) {
      std::mt19937_64 rng(mix(spec.seed, split_tag, static_cast<std::uint64_t>(id),
                              static_cast<std::uint64_t>(im)));
      int dx = rand_below(rng, 3) - 1;
      int dy = rand_below(rng, 5) - 2;
      RgbImage img = render_identity(spec, attrs[id], dx, dy);
      // sensor-style noise keeps any single cue from being learned exactly
      std::normal_distribution<double> noise(0.0, 9.0);
      for (auto& ch : img.chan) {
        for (int r = 0; r < img.height; ++r) {
          for (int c = 0; c < img.width; ++c) {
            ch(r, c) = std::clamp(ch(r, c) + noise(rng), 0.0, 255.0);
          }
        }
      }
      for (int cap = 0; cap < captions; ++cap) {
        PersonRecord rec;
        rec.image = img;
        rec.identity = id;
        rec.caption = make_caption(attrs[id], rng);
        m.records.push_back(std::move(rec));
      }
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& dir,
                   const std::string& name) {
  fs::create_directories(fs::path(dir) / "img");
  std::ofstream out(fs::path(dir) / (name + ".tsv"));
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << "#caibc-manifest\tv1\t" << split_name(manifest.split) << "\n";
  int i = 0;
  for (const PersonRecord& rec : manifest.records) {
    std::string rel = rec.image_path;
    if (rel.empty()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "img/%s_%05d.ppm", name.c_str(), i);
      rel = buf;
      write_ppm((fs::path(dir) / rel).string(), rec.image);
    }
    out << rel << "\t" << rec.identity << "\t" << rec.caption << "\n";
    ++i;
  }
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty manifest: " + path);
  std::istringstream hs(header);
  std::string tag, version, split;
  std::getline(hs, tag, '\t');
  std::getline(hs, version, '\t');
  std::getline(hs, split, '\t');
  if (tag != "#caibc-manifest") throw DataError("missing manifest header tag: " + path);
  if (version != "v1") throw DataError("unsupported manifest version: " + version);

  DatasetManifest m;
  m.split = split_from_name(split);
  fs::path base = fs::path(path).parent_path();

  std::vector<std::string> problems;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string img_path, identity_str, caption;
    if (!std::getline(ls, img_path, '\t') || !std::getline(ls, identity_str, '\t') ||
        !std::getline(ls, caption)) {
      throw DataError("manifest line " + std::to_string(lineno) + ": expected 3 fields");
    }
    PersonRecord rec;
    rec.image_path = img_path;
    try {
      rec.identity = std::stoi(identity_str);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": bad identity");
    }
    rec.caption = caption;
    if (rec.identity < 0) {
      problems.push_back("line " + std::to_string(lineno) + ": negative identity");
    }
    if (rec.caption.find_first_not_of(" \t\r") == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": empty caption");
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty()) problems.push_back("manifest has no records");
  if (!problems.empty()) {
    std::string msg = "manifest invariant violations in " + path + ":";
    for (const std::string& p : problems) msg += "\n  " + p;
    throw DataError(msg);
  }

  // remap identities to contiguous 0..Q-1
  std::set<int> ids;
  for (const PersonRecord& r : m.records) ids.insert(r.identity);
  std::map<int, int> remap;
  int next = 0;
  for (int id : ids) remap[id] = next++;
  for (PersonRecord& r : m.records) r.identity = remap[r.identity];
  for (const auto& [orig, mapped] : remap) {
    if (orig != mapped) m.remapping.emplace_back(orig, mapped);
  }
  m.identity_count = next;

  for (PersonRecord& r : m.records) {
    r.image = read_ppm((base / r.image_path).string());
  }
  return m;
}

std::vector<int> identity_batch_sample(const DatasetManifest& manifest,
                                       int batch_size, int ids_per_batch,
                                       std::mt19937_64& rng) {
  if (ids_per_batch < 1 || batch_size % ids_per_batch != 0) {
    throw ConfigError("identity_batch_sample: batch_size must be divisible by ids_per_batch");
  }
  if (manifest.identity_count < 2) {
    throw ConfigError("identity_batch_sample: need at least 2 identities");
  }
  if (ids_per_batch > manifest.identity_count) {
    throw ConfigError("identity_batch_sample: more identities requested than available");
  }
  const int per_id = batch_size / ids_per_batch;

  std::vector<std::vector<int>> by_id(manifest.identity_count);
  for (int i = 0; i < static_cast<int>(manifest.records.size()); ++i) {
    by_id[manifest.records[i].identity].push_back(i);
  }

  // partial Fisher-Yates over identity indices
  std::vector<int> ids(manifest.identity_count);
  for (int i = 0; i < manifest.identity_count; ++i) ids[i] = i;
  for (int i = 0; i < ids_per_batch; ++i) {
    int j = i + rand_below(rng, manifest.identity_count - i);
    std::swap(ids[i], ids[j]);
  }

  std::vector<int> batch;
  batch.reserve(batch_size);
  for (int i = 0; i < ids_per_batch; ++i) {
    const std::vector<int>& pool = by_id[ids[i]];
    if (pool.empty()) throw DataError("identity without records in manifest");
    if (static_cast<int>(pool.size()) >= per_id) {
      // sample without replacement
      std::vector<int> local = pool;
      for (int k = 0; k < per_id; ++k) {
        int j = k + rand_below(rng, static_cast<int>(local.size()) - k);
        std::swap(local[k], local[j]);
        batch.push_back(local[k]);
      }
    } else {
      for (int k = 0; k < per_id; ++k) {
        batch.push_back(pool[rand_below(rng, static_cast<int>(pool.size()))]);
      }
    }
  }
  return batch;
}

std::vector<int> pair_batch_sample(const DatasetManifest& manifest, int batch_size,
                                   std::mt19937_64& rng) {
  if (manifest.records.empty()) throw DataError("pair_batch_sample: empty manifest");
  std::vector<int> batch(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    batch[i] = rand_below(rng, static_cast<int>(manifest.records.size()));
  }
  return batch;
}

RgbImage hflip(const RgbImage& image) {
  RgbImage out = image;
  for (auto& ch : out.chan) ch = ch.rowwise().reverse().eval();
  return out;
}

}  // namespace caibc
