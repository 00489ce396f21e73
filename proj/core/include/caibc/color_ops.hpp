#ifndef CAIBC_COLOR_OPS_HPP_
#define CAIBC_COLOR_OPS_HPP_

#include <Eigen/Dense>

#include <array>
#include <set>
#include <string>
#include <vector>

namespace caibc {

// 3-channel image, values in [0, 255] kept as reals.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::array<Eigen::MatrixXd, 3> chan;  // R, G, B, each height x width

  bool valid() const {
    return height >= 1 && width >= 1 && chan[0].rows() == height &&
           chan[0].cols() == width && chan[1].rows() == height &&
           chan[1].cols() == width && chan[2].rows() == height &&
           chan[2].cols() == width;
  }
};

struct GrayImage {
  Eigen::MatrixXd pixels;  // height x width
  int height() const { return static_cast<int>(pixels.rows()); }
  int width() const { return static_cast<int>(pixels.cols()); }
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

inline constexpr const char* kColorMaskToken = "[CLR]";

// Lowercase color words used for masking and as color prior.
class ColorBank {
 public:
  ColorBank() = default;
  ColorBank(std::set<std::string> words, std::string mask_token = kColorMaskToken);

  const std::set<std::string>& words() const { return words_; }
  const std::string& mask_token() const { return mask_token_; }
  bool contains(const std::string& lowercase_word) const {
    return words_.count(lowercase_word) > 0;
  }
  bool empty() const { return words_.empty(); }

  // One lowercase word per line, '#' comment lines ignored.
  static ColorBank load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::set<std::string> words_;
  std::string mask_token_ = kColorMaskToken;
};

std::string to_lower(const std::string& s);

// Luminance conversion, 0.299 R + 0.587 G + 0.114 B per pixel.
GrayImage rgb_to_grayscale(const RgbImage& image);

// Duplicates the single channel three times.
RgbImage gray_to_three_channel(const GrayImage& image);

// Keeps lexicon words whose case-insensitive corpus count reaches min_count.
// Throws ConfigError when no word qualifies.
ColorBank build_color_bank(const std::vector<TokenSequence>& corpus,
                           const std::set<std::string>& color_lexicon,
                           int min_count);

// Replaces every bank word (case-insensitive) with the mask token.
TokenSequence mask_colors(const TokenSequence& sentence, const ColorBank& bank);

// Ordered sublist of tokens whose lowercase form is in the bank,
// original casing preserved, duplicates kept.
std::vector<std::string> extract_color_prior(const TokenSequence& sentence,
                                             const ColorBank& bank);

}  // namespace caibc

#endif  // CAIBC_COLOR_OPS_HPP_
