// Command-line entry points: dataset synthesis, training, retrieval
// evaluation, feature extraction, gradient checking, and part-geometry
// inspection. Exit codes: 0 success, 1 usage/config, 2 runtime numeric
// failure, 3 I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdc/config.hpp"
#include "pdc/dataset.hpp"
#include "pdc/eval.hpp"
#include "pdc/gradcheck.hpp"
#include "pdc/io.hpp"
#include "pdc/model.hpp"
#include "pdc/parallel.hpp"
#include "pdc/synth.hpp"
#include "pdc/trainer.hpp"

namespace fs = std::filesystem;

namespace {

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (!fs::is_directory(out)) {
    throw pdc::io_error("cannot create output directory: " + out.string());
  }
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

const std::vector<pdc::Config::KeyDef> kSynthKeys = {
    {"identities", "50", "number of identities"},
    {"images_per_identity", "8", "images per identity"},
    {"img_h", "64", "image height (divisible by 4)"},
    {"img_w", "40", "image width (divisible by 4)"},
    {"limb_jitter_deg", "35", "arm angle jitter range in degrees"},
    {"scale_jitter", "0.06", "figure scale jitter fraction"},
    {"shift_jitter", "0.04", "figure translation jitter fraction"},
    {"bg_jitter", "0.3", "background level/tint variation in [0,1]"},
    {"joint_noise", "0", "detected-joint noise vs drawn pose, pixels"},
    {"joint_outlier_prob", "0", "chance a limb joint is grossly misplaced"},
    {"heat_sigma", "1.5", "response map Gaussian sigma in pixels"},
    {"cameras", "1", "camera analogues (image_index mod cameras)"},
    {"seed", "1", "generator seed"},
    {"write_heatmaps", "true", "store .heat.pdct response maps"},
};

int run_synth(const pdc::Config& cfg, const fs::path& out) {
  pdc::SynthSpec spec;
  spec.identities = static_cast<std::size_t>(cfg.integer("identities"));
  spec.images_per_identity = static_cast<std::size_t>(cfg.integer("images_per_identity"));
  spec.img_h = static_cast<std::size_t>(cfg.integer("img_h"));
  spec.img_w = static_cast<std::size_t>(cfg.integer("img_w"));
  spec.limb_jitter_deg = cfg.real("limb_jitter_deg");
  spec.scale_jitter = cfg.real("scale_jitter");
  spec.shift_jitter = cfg.real("shift_jitter");
  spec.bg_jitter = cfg.real("bg_jitter");
  spec.joint_noise = cfg.real("joint_noise");
  spec.joint_outlier_prob = cfg.real("joint_outlier_prob");
  spec.heat_sigma = cfg.real("heat_sigma");
  spec.cameras = static_cast<std::size_t>(cfg.integer("cameras"));
  spec.seed = cfg.unsigned64("seed");
  spec.validate();

  ensure_out_dir(out);
  const auto samples = pdc::generate(spec);
  pdc::save_dataset(out, samples, spec, cfg.boolean("write_heatmaps"));
  cfg.write_snapshot(out / "config.resolved");
  std::cout << "wrote " << samples.size() << " samples (" << spec.identities
            << " identities) to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

const std::vector<pdc::Config::KeyDef> kTrainKeys = {
    {"variant", "FullPDC",
     "GlobalOnly | PartOnly | GlobalPart | GlobalPartFEN | GlobalPartFWN | FullPDC"},
    {"batch_size", "16", "images per SGD batch"},
    {"input_h", "64", "network input height"},
    {"input_w", "40", "network input width"},
    {"base_lr", "0.01", "initial learning rate"},
    {"decay_interval", "20000", "iterations between learning-rate steps"},
    {"decay_factor", "0.1", "learning-rate step factor"},
    {"momentum", "0.9", "SGD momentum"},
    {"ptn_lr_mult", "0.001", "learning-rate multiplier for PTN parameters"},
    {"fwn_k", "1", "number of FWN weight layers (0..4)"},
    {"seed", "1", "training seed (init, split, batch order)"},
    {"iterations", "1000", "SGD iterations"},
    {"checkpoint_interval", "0", "write a checkpoint every N iterations (0 = final only)"},
    {"log_theta", "false", "log batch-mean PTN parameters to theta_log.csv"},
    {"train_frac", "0.7", "fraction of identities used for training"},
    {"backbone", "standard", "standard | tiny"},
    {"trunk_c1", "8", "trunk stem channels"},
    {"trunk_c2", "16", "trunk mid channels"},
    {"trunk_c3", "16", "trunk output channels"},
    {"branch_c", "32", "branch channels (= per-stream feature dim)"},
    {"ptn_c1", "8", "PTN localization net stem channels"},
    {"ptn_c2", "16", "PTN localization net mid channels"},
};

pdc::TrainSetup setup_from_config(const pdc::Config& cfg) {
  pdc::TrainSetup setup;
  setup.model.variant = pdc::parse_variant(cfg.str("variant"));
  setup.model.backbone =
      cfg.str("backbone") == "tiny" ? pdc::Backbone::Tiny : pdc::Backbone::Standard;
  setup.model.input_h = static_cast<std::size_t>(cfg.integer("input_h"));
  setup.model.input_w = static_cast<std::size_t>(cfg.integer("input_w"));
  setup.model.fwn_k = static_cast<int>(cfg.integer("fwn_k"));
  setup.model.ptn_lr_mult = cfg.real("ptn_lr_mult");
  setup.model.seed = cfg.unsigned64("seed");
  setup.model.trunk_c1 = static_cast<std::size_t>(cfg.integer("trunk_c1"));
  setup.model.trunk_c2 = static_cast<std::size_t>(cfg.integer("trunk_c2"));
  setup.model.trunk_c3 = static_cast<std::size_t>(cfg.integer("trunk_c3"));
  setup.model.branch_c = static_cast<std::size_t>(cfg.integer("branch_c"));
  setup.model.ptn_c1 = static_cast<std::size_t>(cfg.integer("ptn_c1"));
  setup.model.ptn_c2 = static_cast<std::size_t>(cfg.integer("ptn_c2"));
  setup.sgd.base_lr = cfg.real("base_lr");
  setup.sgd.decay_factor = cfg.real("decay_factor");
  setup.sgd.decay_interval = cfg.integer("decay_interval");
  setup.sgd.momentum = cfg.real("momentum");
  setup.batch_size = static_cast<std::size_t>(cfg.integer("batch_size"));
  setup.iterations = cfg.integer("iterations");
  setup.train_frac = cfg.real("train_frac");
  setup.seed = cfg.unsigned64("seed");
  return setup;
}

void write_checkpoint_dir(pdc::Trainer& trainer, const fs::path& dir, long completed) {
  trainer.model().save(dir, &trainer.sgd());
  pdc::write_lines(dir / "model.cfg", pdc::model_cfg_lines(trainer.model().config()));
  char frac[64];
  std::snprintf(frac, sizeof(frac), "train_frac = %.9g", trainer.setup().train_frac);
  pdc::write_lines(dir / "protocol.txt",
                   {frac, "seed = " + std::to_string(trainer.setup().seed)});
  pdc::write_lines(dir / "state.txt", {"completed = " + std::to_string(completed)});
}

int run_train(const pdc::Config& cfg, const fs::path& data, const fs::path& out, bool resume,
              const std::optional<fs::path>& init_from) {
  const pdc::Dataset ds = pdc::load_dataset(data);
  pdc::TrainSetup setup = setup_from_config(cfg);
  pdc::Trainer trainer(ds, setup);

  ensure_out_dir(out);
  const fs::path ckpt = out / "checkpoint";
  const fs::path log_path = out / "train_log.csv";

  long start_iter = 0;
  std::vector<std::string> log_lines{"iter,loss_global,loss_part,lr"};
  const bool log_theta = cfg.boolean("log_theta");
  std::vector<std::string> theta_lines{"iter,part,t1,t2,t3,t4,t5,t6"};
  if (resume) {
    const auto state = pdc::detail::read_kv_file(ckpt / "state.txt");
    if (!state.count("completed")) {
      throw pdc::config_error("--resume: no usable state in " + ckpt.string());
    }
    start_iter = std::stol(state.at("completed"));
    trainer.model().load(ckpt, &trainer.sgd());
    // keep log rows up to the checkpointed iteration
    std::ifstream old_log(log_path);
    std::string line;
    std::getline(old_log, line);  // header
    while (std::getline(old_log, line)) {
      const long it = std::stol(line.substr(0, line.find(',')));
      if (it < start_iter) log_lines.push_back(line);
    }
  } else if (init_from) {
    trainer.model().load(*init_from, nullptr, /*lenient=*/true);
  }

  for (long it = start_iter; it < setup.iterations; ++it) {
    const pdc::StepStats stats = trainer.step(it);
    char buf[192];
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g", it, stats.loss_global,
                  stats.loss_part, stats.lr);
    log_lines.emplace_back(buf);
    if (log_theta) {
      const auto thetas = trainer.model().last_mean_thetas();
      for (std::size_t i = 0; i < thetas.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%ld,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", it,
                      pdc::part_name(pdc::PtnBank::kPtnParts[i]), thetas[i][0], thetas[i][1],
                      thetas[i][2], thetas[i][3], thetas[i][4], thetas[i][5]);
        theta_lines.emplace_back(buf);
      }
    }
    const long interval = cfg.integer("checkpoint_interval");
    if (interval > 0 && (it + 1) % interval == 0 && it + 1 < setup.iterations) {
      write_checkpoint_dir(trainer, out / ("checkpoint_" + std::to_string(it + 1)), it + 1);
      write_checkpoint_dir(trainer, ckpt, it + 1);
      pdc::write_lines(log_path, log_lines);
    }
  }
  write_checkpoint_dir(trainer, ckpt, setup.iterations);
  pdc::write_lines(log_path, log_lines);
  if (log_theta) pdc::write_lines(out / "theta_log.csv", theta_lines);
  cfg.write_snapshot(out / "config.resolved");
  std::cout << "trained " << pdc::variant_name(setup.model.variant) << " for "
            << setup.iterations << " iterations; checkpoint at " << ckpt.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval / extract
// ---------------------------------------------------------------------------

const std::vector<pdc::Config::KeyDef> kEvalKeys = {
    {"cam_exclude", "false", "drop same-identity same-camera gallery entries"},
};

struct LoadedModel {
  pdc::ModelConfig cfg;
  std::unique_ptr<pdc::PdcModel> model;
  double train_frac = 0.7;
  std::uint64_t seed = 1;
};

LoadedModel load_model(const fs::path& ckpt) {
  LoadedModel lm;
  lm.cfg = pdc::model_cfg_from_kv(pdc::detail::read_kv_file(ckpt / "model.cfg"));
  lm.model = std::make_unique<pdc::PdcModel>(lm.cfg);
  lm.model->load(ckpt);
  const auto protocol = pdc::detail::read_kv_file(ckpt / "protocol.txt");
  if (protocol.count("train_frac")) lm.train_frac = std::stod(protocol.at("train_frac"));
  if (protocol.count("seed")) lm.seed = std::stoull(protocol.at("seed"));
  return lm;
}

int run_eval(const pdc::Config& cfg, const fs::path& ckpt, const fs::path& data,
             const fs::path& out) {
  LoadedModel lm = load_model(ckpt);
  const pdc::Dataset ds = pdc::load_dataset(data);
  const pdc::Split split = pdc::split_dataset(ds.items, lm.train_frac, lm.seed);
  const pdc::EvalReport report =
      pdc::evaluate_model(*lm.model, ds, split, cfg.boolean("cam_exclude"));
  ensure_out_dir(out);
  pdc::write_lines(out / "report.csv", pdc::report_csv(report));
  pdc::write_lines(out / "cmc.csv", pdc::cmc_csv(report));
  cfg.write_snapshot(out / "config.resolved");
  std::printf("rank1 %.4f  rank5 %.4f  rank10 %.4f  rank20 %.4f  mAP %.4f\n", report.rank(1),
              report.rank(5), report.rank(10), report.rank(20), report.map);
  return 0;
}

int run_extract(const pdc::Config& cfg, const fs::path& ckpt, const fs::path& data,
                const fs::path& out) {
  LoadedModel lm = load_model(ckpt);
  const pdc::Dataset ds = pdc::load_dataset(data);
  std::vector<std::size_t> all(ds.items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const pdc::Tensor feats = lm.model->extract_features(ds, all);
  ensure_out_dir(out);
  pdc::write_pdct(out / "features.pdct", feats);
  std::vector<std::string> lines{"identity,camera,image_index,stem"};
  for (const auto& item : ds.items) {
    lines.push_back(std::to_string(item.identity) + "," + std::to_string(item.camera) + "," +
                    std::to_string(item.image_index) + "," + item.stem);
  }
  pdc::write_lines(out / "items.csv", lines);
  cfg.write_snapshot(out / "config.resolved");
  std::cout << "extracted " << ds.items.size() << " features of dim "
            << lm.model->feature_dim() << " to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

const std::vector<pdc::Config::KeyDef> kGradcheckKeys = {
    {"seed", "1", "seed for random instances"},
};

int run_gradcheck(const pdc::Config& cfg, const std::string& scope,
                  const std::optional<fs::path>& out) {
  const auto rows = pdc::gradcheck_scope(scope, cfg.unsigned64("seed"));
  bool all_pass = true;
  std::printf("%-48s %12s %10s  %s\n", "component", "max rel err", "threshold", "status");
  std::vector<std::string> csv{"component,max_rel_err,threshold,status"};
  for (const auto& row : rows) {
    std::printf("%-48s %12.3e %10.0e  %s\n", row.component.c_str(), row.max_err, row.threshold,
                row.pass ? "pass" : "FAIL");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6e,%.0e,%s", row.component.c_str(), row.max_err,
                  row.threshold, row.pass ? "pass" : "fail");
    csv.emplace_back(buf);
    all_pass = all_pass && row.pass;
  }
  if (out) {
    ensure_out_dir(*out);
    pdc::write_lines(*out / "gradcheck.csv", csv);
    cfg.write_snapshot(*out / "config.resolved");
  }
  if (!all_pass) {
    throw pdc::numeric_error("gradient check failed for scope '" + scope + "'");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// inspect-parts
// ---------------------------------------------------------------------------

const std::vector<pdc::Config::KeyDef> kInspectKeys = {
    {"rotate", "true", "apply the rotation normalization (FEN geometry)"},
};

int run_inspect(const pdc::Config& cfg, const fs::path& data, int identity, int image_index,
                const fs::path& out) {
  const pdc::Dataset ds = pdc::load_dataset(data);
  const pdc::DatasetItem* found = nullptr;
  for (const auto& item : ds.items) {
    if (item.identity == identity && item.image_index == image_index) {
      found = &item;
      break;
    }
  }
  if (!found) {
    throw pdc::config_error("no item with identity " + std::to_string(identity) +
                            " image " + std::to_string(image_index));
  }
  const pdc::ResponseMapSet maps = pdc::response_maps_for(*found, ds.meta);
  const pdc::JointSet joints = pdc::localize_joints(maps);
  const pdc::PartBoxSet boxes = pdc::part_boxes(joints, ds.meta.img_w, ds.meta.img_h);
  const pdc::CanvasLayout layout = pdc::CanvasLayout::standard(ds.meta.img_h, ds.meta.img_w);
  const bool rotate = cfg.boolean("rotate");
  std::array<pdc::Tensor, pdc::kNumParts> parts;
  for (std::size_t p = 0; p < pdc::kNumParts; ++p) {
    const auto& slot = layout.slots[p];
    parts[p] = pdc::normalize_part(found->image, boxes.parts[p].box,
                                   rotate ? boxes.parts[p].angle : 0.0, slot.h, slot.w);
  }
  const pdc::Tensor canvas = pdc::assemble_canvas(parts, layout);
  ensure_out_dir(out);
  pdc::write_lines(out / "joints.csv", pdc::joints_csv(joints));
  pdc::write_lines(out / "boxes.csv", pdc::boxes_csv(boxes));
  pdc::write_ppm(out / "canvas.ppm", canvas);
  pdc::write_ppm(out / "image.ppm", found->image);
  cfg.write_snapshot(out / "config.resolved");
  std::cout << "wrote joints.csv, boxes.csv, canvas.ppm to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose-driven two-stream person re-identification (desk scale)"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 = hardware concurrency)");

  std::string config_file, out_dir, data_dir, ckpt_dir, scope = "all", init_from;
  std::vector<std::string> overrides;
  int identity = 0, image_index = 0;
  bool resume = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic pedestrian dataset");
  synth->add_option("-c,--config", config_file, "config file of key = value lines");
  synth->add_option("--set", overrides, "override a config key (key=value)");
  synth->add_option("-o,--out", out_dir, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model variant");
  train->add_option("-c,--config", config_file, "config file of key = value lines");
  train->add_option("--set", overrides, "override a config key (key=value)");
  train->add_option("-d,--data", data_dir, "dataset directory")->required();
  train->add_option("-o,--out", out_dir, "run directory (checkpoints + log)")->required();
  train->add_flag("--resume", resume, "continue from <out>/checkpoint");
  train->add_option("--init-from", init_from, "warm-start weights from a checkpoint");

  CLI::App* eval_cmd = app.add_subcommand("eval", "retrieval evaluation (CMC + mAP)");
  eval_cmd->add_option("-c,--config", config_file, "config file of key = value lines");
  eval_cmd->add_option("--set", overrides, "override a config key (key=value)");
  eval_cmd->add_option("-k,--checkpoint", ckpt_dir, "checkpoint directory")->required();
  eval_cmd->add_option("-d,--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("-o,--out", out_dir, "report output directory")->required();

  CLI::App* extract = app.add_subcommand("extract", "extract retrieval features for a dataset");
  extract->add_option("-c,--config", config_file, "config file of key = value lines");
  extract->add_option("--set", overrides, "override a config key (key=value)");
  extract->add_option("-k,--checkpoint", ckpt_dir, "checkpoint directory")->required();
  extract->add_option("-d,--data", data_dir, "dataset directory")->required();
  extract->add_option("-o,--out", out_dir, "output directory")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("-c,--config", config_file, "config file of key = value lines");
  gradcheck->add_option("--set", overrides, "override a config key (key=value)");
  gradcheck->add_option("--scope", scope, "fwn | ptn | layers | e2e | all");
  gradcheck->add_option("-o,--out", out_dir, "optional directory for gradcheck.csv");

  CLI::App* inspect = app.add_subcommand("inspect-parts", "dump joints, boxes, part canvas");
  inspect->add_option("-c,--config", config_file, "config file of key = value lines");
  inspect->add_option("--set", overrides, "override a config key (key=value)");
  inspect->add_option("-d,--data", data_dir, "dataset directory")->required();
  inspect->add_option("--identity", identity, "identity id")->required();
  inspect->add_option("--image", image_index, "image index")->required();
  inspect->add_option("-o,--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  pdc::set_max_threads(threads);

  try {
    if (synth->parsed()) {
      const auto cfg = pdc::Config::resolve(kSynthKeys, optional_path(config_file), overrides);
      return run_synth(cfg, out_dir);
    }
    if (train->parsed()) {
      const auto cfg = pdc::Config::resolve(kTrainKeys, optional_path(config_file), overrides);
      return run_train(cfg, data_dir, out_dir, resume, optional_path(init_from));
    }
    if (eval_cmd->parsed()) {
      const auto cfg = pdc::Config::resolve(kEvalKeys, optional_path(config_file), overrides);
      return run_eval(cfg, ckpt_dir, data_dir, out_dir);
    }
    if (extract->parsed()) {
      const auto cfg = pdc::Config::resolve(kEvalKeys, optional_path(config_file), overrides);
      return run_extract(cfg, ckpt_dir, data_dir, out_dir);
    }
    if (gradcheck->parsed()) {
      const auto cfg =
          pdc::Config::resolve(kGradcheckKeys, optional_path(config_file), overrides);
      return run_gradcheck(cfg, scope, optional_path(out_dir));
    }
    if (inspect->parsed()) {
      const auto cfg = pdc::Config::resolve(kInspectKeys, optional_path(config_file), overrides);
      return run_inspect(cfg, data_dir, identity, image_index, out_dir);
    }
  } catch (const pdc::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const pdc::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const pdc::io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
