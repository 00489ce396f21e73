#include "caibc/color_ops.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "caibc/errors.hpp"

namespace caibc {

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ColorBank::ColorBank(std::set<std::string> words, std::string mask_token)
    : words_(std::move(words)), mask_token_(std::move(mask_token)) {
  if (words_.count(mask_token_) > 0) {
    throw ConfigError("color bank must not contain its own mask token");
  }
  for (const std::string& w : words_) {
    if (w != to_lower(w)) throw ConfigError("color bank word not lowercase: " + w);
  }
}

ColorBank ColorBank::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open color bank file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t");
    std::string word = line.substr(first, last - first + 1);
    if (word.empty() || word[0] == '#') continue;
    words.insert(to_lower(word));
  }
  return ColorBank(std::move(words));
}

void ColorBank::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write color bank file: " + path);
  out << "# color bank, one lowercase word per line\n";
  for (const std::string& w : words_) out << w << "\n";
}

GrayImage rgb_to_grayscale(const RgbImage& image) {
  GrayImage out;
  out.pixels = 0.299 * image.chan[0] + 0.587 * image.chan[1] + 0.114 * image.chan[2];
  return out;
}

RgbImage gray_to_three_channel(const GrayImage& image) {
  RgbImage out;
  out.height = image.height();
  out.width = image.width();
  out.chan = {image.pixels, image.pixels, image.pixels};
  return out;
}

ColorBank build_color_bank(const std::vector<TokenSequence>& corpus,
                           const std::set<std::string>& color_lexicon,
                           int min_count) {
  if (corpus.empty()) throw ConfigError("build_color_bank: empty corpus");
  if (color_lexicon.empty()) throw ConfigError("build_color_bank: empty lexicon");
  if (min_count < 1) throw ConfigError("build_color_bank: min_count must be positive");

  std::map<std::string, int> counts;
  for (const TokenSequence& s : corpus) {
    for (const std::string& tok : s.tokens) {
      std::string low = to_lower(tok);
      if (color_lexicon.count(low) > 0) ++counts[low];
    }
  }
  std::set<std::string> selected;
  for (const auto& [word, count] : counts) {
    if (count >= min_count) selected.insert(word);
  }
  if (selected.empty()) {
    throw ConfigError(
        "build_color_bank: no lexicon word reaches min_count; "
        "lower min_count or extend the lexicon");
  }
  return ColorBank(std::move(selected));
}

TokenSequence mask_colors(const TokenSequence& sentence, const ColorBank& bank) {
  if (bank.empty()) throw ConfigError("mask_colors: empty color bank");
  TokenSequence out = sentence;
  for (std::string& tok : out.tokens) {
    if (bank.contains(to_lower(tok))) tok = bank.mask_token();
  }
  return out;
}

std::vector<std::string> extract_color_prior(const TokenSequence& sentence,
                                             const ColorBank& bank) {
  std::vector<std::string> out;
  for (const std::string& tok : sentence.tokens) {
    if (bank.contains(to_lower(tok))) out.push_back(tok);
  }
  return out;
}

}  // namespace caibc
