// caibc command line: dataset generation, training, retrieval evaluation,
// ablations, gradient audit, response-map dumps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "caibc/errors.hpp"
#include "caibc/retrieval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace caibc;

namespace {

bool parse_on_off(const std::string& v, const std::string& flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError(flag + " must be 'on' or 'off'");
}

BranchConfig parse_branches(const std::string& csv, BranchConfig base) {
  base.rgb = base.grs = base.clr = false;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "rgb") base.rgb = true;
    else if (item == "grs") base.grs = true;
    else if (item == "clr") base.clr = true;
    else throw ConfigError("unknown branch '" + item + "' (rgb, grs, clr)");
  }
  base.validate();
  return base;
}

std::map<std::string, double> parse_fusion_weights(const std::string& csv) {
  std::map<std::string, double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("fusion weight '" + item + "' is not name=value");
    }
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("fusion weight '" + item + "' has a non-numeric value");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw ConfigError("empty seed list");
  return out;
}

std::vector<std::string> parse_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Shared train/eval override flags layered on top of a config file.
struct Overrides {
  std::string branches, ml_loss, color_prior, supervision, detach_grs,
      fusion_weights;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--branches", branches, "active branches, e.g. rgb,grs,clr");
    cmd->add_option("--ml-loss", ml_loss, "mutual learning loss on|off");
    cmd->add_option("--color-prior", color_prior, "color prior on|off");
    cmd->add_option("--supervision", supervision, "full|weak");
    cmd->add_option("--detach-grs", detach_grs,
                    "stop gradients into the grayscale branch at the color "
                    "subtraction, on|off");
    cmd->add_option("--fusion-weights", fusion_weights,
                    "similarity fusion weights, e.g. g_rgb=1,clr=0.5");
    auto* s = cmd->add_option("--seed", seed, "rng seed");
    s->each([this](const std::string&) { seed_set = true; });
  }

  void apply(TrainConfig& cfg) const {
    if (seed_set) cfg.seed = seed;
    if (!branches.empty()) cfg.branches = parse_branches(branches, cfg.branches);
    if (!ml_loss.empty() && !parse_on_off(ml_loss, "--ml-loss")) {
      cfg.loss_weights.mutual = 0.0;
    }
    if (!ml_loss.empty() && parse_on_off(ml_loss, "--ml-loss") &&
        cfg.loss_weights.mutual == 0.0) {
      cfg.loss_weights.mutual = 1.0;
    }
    if (!color_prior.empty()) {
      cfg.branches.color_prior = parse_on_off(color_prior, "--color-prior");
    }
    if (!supervision.empty()) cfg.supervision = supervision_from_name(supervision);
    if (!detach_grs.empty()) {
      cfg.branches.detach_grs = parse_on_off(detach_grs, "--detach-grs");
    }
    if (!fusion_weights.empty()) {
      cfg.branches.fusion_weights = parse_fusion_weights(fusion_weights);
    }
    cfg.validate();
  }
};

TrainConfig load_train_config(const std::string& path, const Overrides& ov) {
  TrainConfig cfg = path.empty() ? TrainConfig{} : TrainConfig::load(path);
  ov.apply(cfg);
  return cfg;
}

void write_metrics_line(std::ofstream& log, const StepRecord& rec) {
  json j{{"epoch", rec.epoch}, {"step", rec.step}, {"total", rec.total},
         {"terms", rec.terms}};
  log << j.dump() << "\n";
}

json eval_to_json(const EvalReport& report) {
  json recalls = json::object();
  for (const auto& [k, v] : report.recall) recalls["R@" + std::to_string(k)] = v;
  return json{{"queries", report.queries},
              {"gallery", report.gallery_size},
              {"recall", recalls}};
}

void print_eval(const EvalReport& report) {
  std::printf("queries=%d gallery=%d\n", report.queries, report.gallery_size);
  for (const auto& [k, v] : report.recall) std::printf("R@%-3d %.4f\n", k, v);
}

// normalized 0..255 PGM dump of a response map
void write_respmap(const std::string& path, const Eigen::MatrixXd& map) {
  double lo = map.minCoeff(), hi = map.maxCoeff();
  Eigen::MatrixXd norm = Eigen::MatrixXd::Zero(map.rows(), map.cols());
  if (hi > lo) norm = ((map.array() - lo) / (hi - lo) * 255.0).matrix();
  write_pgm(path, norm);
}

int run(int argc, char** argv) {
  CLI::App app{"caibc: cross-modal text-to-image person retrieval"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render a synthetic dataset");
  std::string gen_config, gen_out = "data";
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("--config", gen_config, "synth spec json");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "rng seed")->each([&](const std::string&) {
    gen_seed_set = true;
  });

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_config, tr_data, tr_out = "run", tr_ckpt;
  Overrides tr_ov;
  tr->add_option("--config", tr_config, "train config json");
  tr->add_option("--data", tr_data, "train manifest")->required();
  tr->add_option("--out", tr_out, "run directory");
  tr->add_option("--checkpoint", tr_ckpt, "resume from this checkpoint");
  tr_ov.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "retrieval evaluation");
  std::string ev_ckpt, ev_data, ev_out;
  Overrides ev_ov;
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "eval manifest")->required();
  ev->add_option("--out", ev_out, "report json path");
  ev_ov.attach(ev);

  // ablate
  auto* ab = app.add_subcommand("ablate", "branch/loss ablation study");
  std::string ab_config, ab_data, ab_eval, ab_out, ab_variants, ab_seeds = "1,2,3";
  Overrides ab_ov;
  ab->add_option("--config", ab_config, "base train config json");
  ab->add_option("--data", ab_data, "train manifest")->required();
  ab->add_option("--eval-data", ab_eval, "eval manifest")->required();
  ab->add_option("--out", ab_out, "report directory");
  ab->add_option("--variants", ab_variants,
                 "comma list: full, full-noprior, rgb+grs+ml, rgb+grs, rgb");
  ab->add_option("--seeds", ab_seeds, "comma list of seeds");
  ab_ov.attach(ab);

  // audit
  auto* au = app.add_subcommand("audit", "finite-difference gradient audit");
  std::uint64_t au_seed = 7;
  au->add_option("--seed", au_seed, "rng seed");

  // respmap
  auto* rm = app.add_subcommand("respmap", "dump branch response maps");
  std::string rm_ckpt, rm_data, rm_out = "respmap";
  int rm_index = 0;
  rm->add_option("--checkpoint", rm_ckpt, "model checkpoint")->required();
  rm->add_option("--data", rm_data, "manifest")->required();
  rm->add_option("--index", rm_index, "record index");
  rm->add_option("--out", rm_out, "output path prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    SynthSpec spec = gen_config.empty() ? SynthSpec{} : SynthSpec::load(gen_config);
    if (gen_seed_set) spec.seed = gen_seed;
    spec.validate();
    fs::create_directories(gen_out);
    spec.save(gen_out + "/spec.json");
    save_manifest(synth_generate(spec, Split::kTrain), gen_out, "train");
    save_manifest(synth_generate(spec, Split::kTest), gen_out, "test");
    std::printf("wrote %s/train.tsv and %s/test.tsv\n", gen_out.c_str(),
                gen_out.c_str());
    return 0;
  }

  if (tr->parsed()) {
    TrainConfig cfg = load_train_config(tr_config, tr_ov);
    DatasetManifest manifest = load_manifest(tr_data);
    fs::create_directories(tr_out + "/checkpoints");
    fs::create_directories(tr_out + "/logs");
    fs::create_directories(tr_out + "/reports");
    cfg.save(tr_out + "/effective_config.json");
    std::ofstream log(tr_out + "/logs/metrics.jsonl");

    TrainState state;
    int start_epoch = 0;
    if (!tr_ckpt.empty()) {
      state = load_checkpoint(tr_ckpt);
      start_epoch = state.epoch;
      state.config = cfg;
    } else {
      state = init_train_state(cfg, manifest);
    }
    const int steps_per_epoch = static_cast<int>(
        (manifest.records.size() + cfg.batch_size - 1) / cfg.batch_size);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
      state.epoch = epoch;
      double epoch_total = 0.0;
      for (int step = 0; step < steps_per_epoch; ++step) {
        StepRecord rec = train_one_step(state, manifest);
        rec.step = step;
        epoch_total += rec.total;
        write_metrics_line(log, rec);
      }
      std::printf("epoch %d/%d loss %.4f\n", epoch + 1, cfg.epochs,
                  epoch_total / steps_per_epoch);
      if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
        state.epoch = epoch + 1;
        save_checkpoint(state, tr_out + "/checkpoints/epoch_" +
                                   std::to_string(epoch + 1) + ".ckpt");
      }
    }
    state.epoch = cfg.epochs;
    save_checkpoint(state, tr_out + "/checkpoints/final.ckpt");
    std::printf("checkpoint: %s/checkpoints/final.ckpt\n", tr_out.c_str());
    return 0;
  }

  if (ev->parsed()) {
    TrainState state = load_checkpoint(ev_ckpt);
    TrainConfig cfg = state.config;
    ev_ov.apply(cfg);
    DatasetManifest manifest = load_manifest(ev_data);
    EvalReport report = evaluate(manifest, state.model, state.bank, cfg.branches);
    print_eval(report);
    if (!ev_out.empty()) {
      std::ofstream out(ev_out);
      out << eval_to_json(report).dump(2) << "\n";
    }
    return 0;
  }

  if (ab->parsed()) {
    TrainConfig cfg = load_train_config(ab_config, ab_ov);
    DatasetManifest train_m = load_manifest(ab_data);
    DatasetManifest eval_m = load_manifest(ab_eval);
    std::vector<std::string> variants = ab_variants.empty()
                                            ? std::vector<std::string>{
                                                  "full", "rgb+grs+ml", "rgb"}
                                            : parse_csv(ab_variants);
    std::ofstream rows_log;
    if (!ab_out.empty()) {
      fs::create_directories(ab_out);
      rows_log.open(ab_out + "/ablation.jsonl");
    }
    AblationReport report = ablation_run(
        cfg, train_m, eval_m, variants, parse_seeds(ab_seeds),
        [&](const AblationRow& row) {
          std::printf("%-14s seed=%llu R@1=%.4f R@10=%.4f\n", row.variant.c_str(),
                      static_cast<unsigned long long>(row.seed), row.r1, row.r10);
          if (rows_log.is_open()) {
            rows_log << json{{"variant", row.variant}, {"seed", row.seed},
                             {"r1", row.r1}, {"r10", row.r10}}
                            .dump()
                     << "\n";
          }
        });
    std::string table = format_ablation_table(report);
    std::fputs(table.c_str(), stdout);
    if (!ab_out.empty()) {
      std::ofstream out(ab_out + "/ablation.txt");
      out << table;
    }
    return 0;
  }

  if (au->parsed()) {
    AuditReport report = gradient_audit(au_seed);
    for (const auto& term : report.terms) {
      std::printf("%-24s max_rel_err %.3e\n", term.name.c_str(), term.max_rel_err);
    }
    std::printf("audit %s (threshold %.0e)\n", report.passed ? "passed" : "FAILED",
                report.threshold);
    return report.passed ? 0 : 4;
  }

  if (rm->parsed()) {
    TrainState state = load_checkpoint(rm_ckpt);
    DatasetManifest manifest = load_manifest(rm_data);
    if (rm_index < 0 || rm_index >= static_cast<int>(manifest.records.size())) {
      throw DataError("record index out of range");
    }
    const RgbImage& image = manifest.records[rm_index].image;
    std::filesystem::path parent = std::filesystem::path(rm_out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    FeatureMap rgb_map = visual_backbone(image, state.model, "rgb");
    RgbImage deprived = gray_to_three_channel(rgb_to_grayscale(image));
    FeatureMap grs_map = visual_backbone(deprived, state.model, "grs");
    FeatureMap clr_map{rgb_map.activations - grs_map.activations, rgb_map.h,
                       rgb_map.w};
    write_respmap(rm_out + "_rgb.pgm", response_map(rgb_map));
    write_respmap(rm_out + "_grs.pgm", response_map(grs_map));
    write_respmap(rm_out + "_clr.pgm", response_map(clr_map));
    std::printf("wrote %s_{rgb,grs,clr}.pgm\n", rm_out.c_str());
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
