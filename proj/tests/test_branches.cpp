#include <doctest.h>

#include <random>

#include "caibc/branches.hpp"
#include "caibc/errors.hpp"

using namespace caibc;
using nn::Matrix;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 8;
  cfg.embed_dim = 4;
  cfg.feat_dim = 5;
  cfg.parts = 2;
  cfg.conv_channels = {4, 6};
  cfg.conv_strides = {2, 2};
  cfg.num_classes = 3;
  return cfg;
}

ModelParams tiny_model(std::uint64_t seed = 1) {
  std::vector<TokenSequence> corpus = {
      TokenSequence{{"a", "red", "shirt", "blue", "pants", "hat"}}};
  return ModelParams::init(tiny_config(), Vocabulary::build(corpus), seed);
}

RgbImage random_image(std::mt19937_64& rng, int h = 16, int w = 8) {
  std::uniform_real_distribution<double> d(0.0, 255.0);
  RgbImage img;
  img.height = h;
  img.width = w;
  for (auto& ch : img.chan) {
    ch.resize(h, w);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) ch(r, c) = d(rng);
    }
  }
  return img;
}

}  // namespace

TEST_CASE("cosine similarity oracles") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  CHECK(cosine(a, b) == doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  Eigen::VectorXd c(2);
  c << 0, 1;
  CHECK(cosine(a, c) == doctest::Approx(0.0));
  CHECK(cosine(3.0 * a, 0.25 * b) == doctest::Approx(cosine(a, b)));
  CHECK(cosine(a, -a) == doctest::Approx(-1.0));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(cosine(a, zero), DivergenceError);
  Eigen::VectorXd longer(3);
  longer << 1, 2, 3;
  CHECK_THROWS_AS(cosine(a, longer), ConfigError);
}

TEST_CASE("tape cosine matches the plain version") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd u(5), v(5);
  for (int i = 0; i < 5; ++i) {
    u(i) = d(rng);
    v(i) = d(rng);
  }
  nn::Tape t;
  double got = nn::scalar(t, cosine_t(t, t.leaf(u), t.leaf(v)));
  CHECK(got == doctest::Approx(cosine(u, v)).epsilon(1e-12));
}

TEST_CASE("response map averages channels per position") {
  FeatureMap map;
  map.h = 2;
  map.w = 2;
  map.activations.resize(2, 4);
  map.activations << 1, 2, 3, 4,
                     5, 6, 7, 8;
  Eigen::MatrixXd r = response_map(map);
  CHECK(r(0, 0) == doctest::Approx(3.0));
  CHECK(r(0, 1) == doctest::Approx(4.0));
  CHECK(r(1, 0) == doctest::Approx(5.0));
  CHECK(r(1, 1) == doctest::Approx(6.0));
}

TEST_CASE("branch config validation and components") {
  BranchConfig cfg;
  cfg.validate();
  CHECK(cfg.active_components() ==
        std::vector<std::string>{"g_rgb", "l_rgb", "g_grs", "l_grs", "clr"});

  cfg.rgb = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // clr without rgb
  cfg.clr = false;
  cfg.validate();  // grs alone is fine
  cfg.grs = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // nothing active

  BranchConfig w;
  w.fusion_weights["clr"] = 0.25;
  CHECK(w.weight("clr") == 0.25);
  CHECK(w.weight("g_rgb") == 1.0);
}

TEST_CASE("branch outputs have the expected shapes") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(3);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"a", "red", "shirt"}};
  ColorBank bank({"red", "blue"});

  BranchOutput rgb = run_rgb_branch(img, toks, model);
  BranchOutput grs = run_grs_branch(img, toks, bank, model);
  CHECK(rgb.visual_global.size() == 5);
  CHECK(rgb.visual_locals.size() == 2);
  CHECK(rgb.text_locals.size() == 2);
  CHECK(rgb.word_matrix.rows() == 3);
  CHECK(grs.visual_map.activations.rows() == 6);

  ColorOutput clr = run_clr_branch(rgb, grs, {"red"}, model);
  CHECK(clr.visual_color.size() == 5);
  CHECK(clr.text_color.size() == 5);
}

TEST_CASE("grs branch sees the deprived image and masked caption") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(5);
  RgbImage img = random_image(rng);
  ColorBank bank({"red", "blue"});
  // same grayscale, different colors -> identical grs outputs
  BranchOutput a = run_grs_branch(img, TokenSequence{{"red", "shirt"}}, bank, model);
  BranchOutput b = run_grs_branch(img, TokenSequence{{"blue", "shirt"}}, bank, model);
  CHECK(a.text_global == b.text_global);
  RgbImage gray = gray_to_three_channel(rgb_to_grayscale(img));
  BranchOutput c = run_grs_branch(gray, TokenSequence{{"red", "shirt"}}, bank, model);
  CHECK((a.visual_global - c.visual_global).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identical inputs collapse the color branch to its biases") {
  ModelParams model = tiny_model();
  model.at("clr.vis.b").setConstant(0.7);
  model.at("clr.txt.b").setConstant(-0.4);
  std::mt19937_64 rng(7);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "shirt"}};
  BranchOutput rgb = run_rgb_branch(img, toks, model);
  ColorOutput clr = run_clr_branch(rgb, rgb, {}, model, /*prior_enabled=*/false);
  CHECK((clr.visual_color.array() - 0.7).abs().maxCoeff() < 1e-12);
  CHECK((clr.text_color.array() + 0.4).abs().maxCoeff() < 1e-12);
}

TEST_CASE("color branch subtraction by hand") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(9);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "shirt", "hat"}};
  ColorBank bank({"red"});
  BranchOutput rgb = run_rgb_branch(img, toks, model);
  BranchOutput grs = run_grs_branch(img, toks, bank, model);
  ColorOutput clr = run_clr_branch(rgb, grs, {}, model, /*prior_enabled=*/false);

  Eigen::VectorXd pooled =
      (rgb.visual_map.activations - grs.visual_map.activations).rowwise().maxCoeff();
  Eigen::VectorXd ev = model.at("clr.vis.W") * pooled + model.at("clr.vis.b").col(0);
  CHECK((clr.visual_color - ev).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::VectorXd tpooled =
      (rgb.word_matrix - grs.word_matrix).colwise().maxCoeff().transpose();
  Eigen::VectorXd et = model.at("clr.txt.W") * tpooled + model.at("clr.txt.b").col(0);
  CHECK((clr.text_color - et).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("color prior shifts every row before pooling") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(11);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "blue", "shirt"}};
  ColorBank bank({"red", "blue"});
  BranchOutput rgb = run_rgb_branch(img, toks, model);
  BranchOutput grs = run_grs_branch(img, toks, bank, model);

  std::vector<std::string> prior = {"red", "blue"};
  ColorOutput with = run_clr_branch(rgb, grs, prior, model, true);
  ColorOutput without = run_clr_branch(rgb, grs, prior, model, false);
  CHECK((with.text_color - without.text_color).cwiseAbs().maxCoeff() > 1e-8);
  CHECK(with.visual_color == without.visual_color);

  // hand computation: summed prior embeddings, identity projection at init
  Eigen::RowVectorXd sum = model.at("text.embed").row(model.vocab.id("red")) +
                           model.at("text.embed").row(model.vocab.id("blue"));
  Eigen::VectorXd proj = model.at("clr.prior.W") * sum.transpose() +
                         model.at("clr.prior.b").col(0);
  Matrix e = rgb.word_matrix - grs.word_matrix;
  e.rowwise() += proj.transpose();
  Eigen::VectorXd pooled = e.colwise().maxCoeff().transpose();
  Eigen::VectorXd expect =
      model.at("clr.txt.W") * pooled + model.at("clr.txt.b").col(0);
  CHECK((with.text_color - expect).cwiseAbs().maxCoeff() < 1e-10);
  // prior word casing is normalized before lookup
  ColorOutput upper = run_clr_branch(rgb, grs, {"Red", "BLUE"}, model, true);
  CHECK(upper.text_color == with.text_color);
}

TEST_CASE("detach_grs blocks gradients into the grs encoder") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(13);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "shirt"}};
  ColorBank bank({"red"});

  for (bool detach : {true, false}) {
    nn::Tape tape;
    ForwardCtx ctx{tape, model, {}};
    BranchVars rgb = run_rgb_branch_t(ctx, img, toks);
    BranchVars grs = run_grs_branch_t(ctx, img, toks, bank);
    ColorVars clr = run_clr_branch_t(ctx, rgb, grs, {"red"}, true, detach);
    nn::Var out = tape.add(tape.sum(clr.visual_color), tape.sum(clr.text_color));
    tape.backward(out);
    double g_grs = tape.grad(ctx.used.at("grs.backbone.conv0.W")).cwiseAbs().maxCoeff();
    double g_rgb = tape.grad(ctx.used.at("rgb.backbone.conv0.W")).cwiseAbs().maxCoeff();
    CHECK(g_rgb > 0.0);
    if (detach) {
      CHECK(g_grs == 0.0);
    } else {
      CHECK(g_grs > 0.0);
    }
  }
}

TEST_CASE("mismatched color-branch inputs are rejected") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(15);
  RgbImage img = random_image(rng);
  BranchOutput rgb = run_rgb_branch(img, TokenSequence{{"red", "shirt"}}, model);
  BranchOutput grs = rgb;
  grs.word_matrix = Matrix::Zero(5, model.config.embed_dim);  // wrong token count
  CHECK_THROWS_AS(run_clr_branch(rgb, grs, {}, model), ConfigError);
}

TEST_CASE("one-sided color helpers agree with the full branch") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(17);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "blue", "hat"}};
  ColorBank bank({"red", "blue"});
  BranchOutput rgb = run_rgb_branch(img, toks, model);
  BranchOutput grs = run_grs_branch(img, toks, bank, model);
  std::vector<std::string> prior = {"red", "blue"};
  ColorOutput full = run_clr_branch(rgb, grs, prior, model, true);
  GlobalVec v = clr_visual_color(rgb.visual_map, grs.visual_map, model);
  GlobalVec t = clr_text_color(rgb.word_matrix, grs.word_matrix, prior, model, true);
  CHECK((v - full.visual_color).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((t - full.text_color).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("similarity bundle fuses weighted cosines") {
  ModelParams model = tiny_model();
  std::mt19937_64 rng(19);
  RgbImage img = random_image(rng);
  TokenSequence toks{{"red", "shirt"}};
  ColorBank bank({"red"});
  BranchOutput rgb = run_rgb_branch(img, toks, model);
  BranchOutput grs = run_grs_branch(img, toks, bank, model);
  ColorOutput clr = run_clr_branch(rgb, grs, {"red"}, model);

  BranchConfig cfg;
  cfg.fusion_weights = {{"g_rgb", 2.0}, {"clr", 0.5}};
  SimilarityBundle s = similarity_bundle(&rgb, &grs, &clr, cfg);
  REQUIRE(s.s_g_rgb.has_value());
  double manual = 2.0 * *s.s_g_rgb + *s.s_l_rgb + *s.s_g_grs + *s.s_l_grs +
                  0.5 * *s.s_clr;
  CHECK(s.fused == doctest::Approx(manual).epsilon(1e-12));
  CHECK(*s.s_g_rgb ==
        doctest::Approx(cosine(rgb.visual_global, rgb.text_global)));
  CHECK(*s.s_l_rgb == doctest::Approx(cosine(concat_locals(rgb.visual_locals),
                                             concat_locals(rgb.text_locals))));

  BranchConfig rgb_only;
  rgb_only.grs = false;
  rgb_only.clr = false;
  SimilarityBundle s2 = similarity_bundle(&rgb, nullptr, nullptr, rgb_only);
  CHECK_FALSE(s2.s_g_grs.has_value());
  CHECK_FALSE(s2.s_clr.has_value());
  CHECK(s2.fused == doctest::Approx(*s2.s_g_rgb + *s2.s_l_rgb));

  BranchConfig full;
  CHECK_THROWS_AS(similarity_bundle(&rgb, &grs, nullptr, full), ConfigError);
  CHECK_THROWS_AS(similarity_bundle(nullptr, &grs, &clr, full), ConfigError);
}
