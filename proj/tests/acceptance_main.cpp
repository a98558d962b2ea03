// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdc/dataset.hpp"
#include "pdc/eval.hpp"
#include "pdc/fen.hpp"
#include "pdc/gradcheck.hpp"
#include "pdc/model.hpp"
#include "pdc/ptn.hpp"
#include "pdc/rng.hpp"
#include "pdc/synth.hpp"
#include "pdc/trainer.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Gradient suite.
// --------------------------------------------------------------------------

void criterion_gradients() {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  auto run = [&](std::vector<pdc::GradCheckRow> rows) {
    for (const auto& row : rows) {
      pass = pass && row.pass;
      detail += row.component + " " + fmt(row.max_err) + " (<" + fmt(row.threshold) + "); ";
    }
  };
  run(pdc::gradcheck_fwn(2024, 100));
  run(pdc::gradcheck_ptn(2024));
  run(pdc::gradcheck_layers(2024));
  run(pdc::gradcheck_e2e(2024));
  const double secs = seconds_since(t0);
  pass = pass && secs < 120.0;
  report(1, "gradient suite (FWN 1e-8, PTN 1e-4, layers 1e-4, end-to-end 1e-3)", pass,
         detail + "runtime " + fmt(secs) + "s (<120s)");
}

// --------------------------------------------------------------------------
// 2. Geometry oracles.
// --------------------------------------------------------------------------

void criterion_geometry() {
  const auto t0 = Clock::now();
  pdc::Rng rng(77001);
  bool pass = true;
  std::string fail_note;

  // Weighted centroids vs brute force on 1,000 random maps.
  double worst_centroid = 0.0;
  for (int trial = 0; trial < 1000 && pass; ++trial) {
    const std::size_t h = 4 + rng.below(12), w = 4 + rng.below(12);
    pdc::ResponseMapSet maps;
    maps.height = h;
    maps.width = w;
    for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
      pdc::Tensor t({h, w});
      for (auto& v : t.values()) v = rng.uniform(0.0, 1.0);
      maps.maps.push_back(std::move(t));
    }
    const pdc::JointSet js = pdc::localize_joints(maps);
    for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
      double mass = 0.0, sx = 0.0, sy = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double v = maps.maps[j](y, x);
          mass += v;
          sx += v * static_cast<double>(x);
          sy += v * static_cast<double>(y);
        }
      worst_centroid = std::max({worst_centroid, std::abs(js.joints[j].x - sx / mass),
                                 std::abs(js.joints[j].y - sy / mass)});
    }
  }
  if (worst_centroid >= 1e-12) {
    pass = false;
    fail_note += "centroid deviation " + fmt(worst_centroid) + "; ";
  }

  // Part boxes vs an independently coded formula on 1,000 random joint sets,
  // including clamping and degenerate configurations.
  int degenerate_cases = 0, clamped_cases = 0;
  for (int trial = 0; trial < 1000 && pass; ++trial) {
    const bool quarter = trial % 2 == 0;
    const double img_w = quarter ? 64.0 : 256.0;
    const double img_h = quarter ? 128.0 : 512.0;
    const double sx = img_w / 256.0, sy = img_h / 512.0;
    pdc::JointSet js;
    for (auto& j : js.joints) {
      // spill outside the frame occasionally to exercise clamping
      j.x = rng.uniform(-0.1 * img_w, 1.1 * img_w);
      j.y = rng.uniform(-0.1 * img_h, 1.1 * img_h);
    }
    // hand-evaluated formula, clamping included
    std::array<pdc::Box, pdc::kNumParts> want;
    bool want_degenerate = false;
    for (std::size_t p = 0; p < pdc::kNumParts; ++p) {
      double x_min = 1e18, x_max = -1e18, y_min = 1e18, y_max = -1e18;
      for (int m : pdc::part_members()[p]) {
        x_min = std::min(x_min, js.joints[static_cast<std::size_t>(m)].x);
        x_max = std::max(x_max, js.joints[static_cast<std::size_t>(m)].x);
        y_min = std::min(y_min, js.joints[static_cast<std::size_t>(m)].y);
        y_max = std::max(y_max, js.joints[static_cast<std::size_t>(m)].y);
      }
      const double mx = (p == 0 ? 30.0 : 10.0) * sx;
      const double my = (p == 0 ? 30.0 : 10.0) * sy;
      pdc::Box b{std::max(0.0, x_min - mx), std::min(img_w - 1.0, x_max + mx),
                 std::max(0.0, y_min - my), std::min(img_h - 1.0, y_max + my)};
      want[p] = b;
      want_degenerate = want_degenerate || !(b.x_lo < b.x_hi) || !(b.y_lo < b.y_hi);
    }
    if (want_degenerate) {
      ++degenerate_cases;
      try {
        pdc::part_boxes(js, static_cast<std::size_t>(img_w), static_cast<std::size_t>(img_h));
        pass = false;
        fail_note += "missing degenerate error at trial " + std::to_string(trial) + "; ";
      } catch (const pdc::numeric_error&) {
      }
      continue;
    }
    const auto boxes =
        pdc::part_boxes(js, static_cast<std::size_t>(img_w), static_cast<std::size_t>(img_h));
    for (std::size_t p = 0; p < pdc::kNumParts; ++p) {
      const pdc::Box& got = boxes.parts[p].box;
      if (std::abs(got.x_lo - want[p].x_lo) > 1e-9 || std::abs(got.x_hi - want[p].x_hi) > 1e-9 ||
          std::abs(got.y_lo - want[p].y_lo) > 1e-9 || std::abs(got.y_hi - want[p].y_hi) > 1e-9) {
        pass = false;
        fail_note += "box mismatch trial " + std::to_string(trial) + " part " +
                     std::to_string(p) + "; ";
      }
      if (got.x_lo == 0.0 || got.y_lo == 0.0 || got.x_hi == img_w - 1.0 ||
          got.y_hi == img_h - 1.0) {
        ++clamped_cases;
      }
    }
  }
  if (clamped_cases == 0 || degenerate_cases == 0) {
    pass = false;
    fail_note += "clamping cases not exercised; ";
  }

  // Identity-theta sampling is exact.
  {
    pdc::Tensor img({2, 6, 5});
    for (auto& v : img.values()) v = rng.uniform(-1.0, 1.0);
    const pdc::Tensor out =
        pdc::bilinear_sample(img, pdc::affine_grid(pdc::AffineParams::identity(), 6, 5));
    for (std::size_t i = 0; i < img.numel(); ++i) {
      if (out[i] != img[i]) {
        pass = false;
        fail_note += "identity sampling not exact; ";
        break;
      }
    }
  }

  // 90-degree rotation is an exact permutation on a distinct-valued grid.
  {
    pdc::Tensor img({1, 5, 5});
    for (std::size_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(i);
    pdc::AffineParams rot;
    rot.theta = {0.0, -1.0, 0.0, 1.0, 0.0, 0.0};
    const pdc::Tensor out = pdc::bilinear_sample(img, pdc::affine_grid(rot, 5, 5));
    for (std::size_t y = 0; y < 5 && pass; ++y)
      for (std::size_t x = 0; x < 5; ++x) {
        if (out(0, y, x) != img(0, x, 4 - y)) {
          pass = false;
          fail_note += "rotation permutation not exact; ";
          break;
        }
      }
  }

  const double secs = seconds_since(t0);
  pass = pass && secs < 60.0;
  report(2, "geometry oracles (centroids 1e-12, boxes, exact sampling)", pass,
         fail_note + "worst centroid " + fmt(worst_centroid) + ", " +
             std::to_string(clamped_cases) + " clamped / " + std::to_string(degenerate_cases) +
             " degenerate cases, runtime " + fmt(secs) + "s (<60s)");
}

// --------------------------------------------------------------------------
// 3. Evaluation oracle.
// --------------------------------------------------------------------------

void criterion_eval_oracle() {
  pdc::Rng rng(88002);
  bool pass = true;
  std::string fail_note;
  for (int trial = 0; trial < 200 && pass; ++trial) {
    pdc::DistanceMatrix m;
    m.n_probe = 1 + rng.below(10);
    m.n_gallery = 2 + rng.below(19);
    const int id_pool = 1 + static_cast<int>(rng.below(6));
    m.d.resize(m.n_probe * m.n_gallery);
    for (double& v : m.d) v = rng.uniform(0.0, 1.0);
    m.gallery_ids.resize(m.n_gallery);
    for (std::size_t g = 0; g < m.n_gallery; ++g) {
      m.gallery_ids[g] = static_cast<int>(g) % id_pool;
    }
    m.probe_ids.resize(m.n_probe);
    for (std::size_t p = 0; p < m.n_probe; ++p) {
      m.probe_ids[p] = static_cast<int>(
          rng.below(std::min<std::uint64_t>(id_pool, m.n_gallery)));
    }

    // exhaustive enumeration oracle: rank = count of strictly closer entries
    // plus equal-distance entries with a smaller index
    std::vector<double> want_cmc(m.n_gallery, 0.0);
    double want_map = 0.0;
    for (std::size_t p = 0; p < m.n_probe; ++p) {
      std::vector<std::size_t> rank_of(m.n_gallery);
      for (std::size_t g = 0; g < m.n_gallery; ++g) {
        std::size_t r = 0;
        for (std::size_t h = 0; h < m.n_gallery; ++h) {
          if (m.at(p, h) < m.at(p, g) || (m.at(p, h) == m.at(p, g) && h < g)) ++r;
        }
        rank_of[g] = r;
      }
      std::size_t best = m.n_gallery;
      std::size_t hits = 0;
      double ap = 0.0;
      for (std::size_t r = 0; r < m.n_gallery; ++r) {
        for (std::size_t g = 0; g < m.n_gallery; ++g) {
          if (rank_of[g] != r || m.gallery_ids[g] != m.probe_ids[p]) continue;
          best = std::min(best, r);
          ++hits;
          ap += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
      }
      for (std::size_t k = best; k < m.n_gallery; ++k) want_cmc[k] += 1.0;
      want_map += ap / static_cast<double>(hits);
    }
    for (double& v : want_cmc) v /= static_cast<double>(m.n_probe);
    want_map /= static_cast<double>(m.n_probe);

    const auto got_cmc = pdc::cmc(m);
    const double got_map = pdc::mean_ap(m);
    if (got_cmc != want_cmc || got_map != want_map) {
      pass = false;
      fail_note += "oracle mismatch at trial " + std::to_string(trial) + "; ";
    }
    for (std::size_t k = 1; k < got_cmc.size(); ++k) {
      if (got_cmc[k] < got_cmc[k - 1]) {
        pass = false;
        fail_note += "cmc not monotone; ";
      }
    }

    // invariance under a strictly increasing transform of all distances
    pdc::DistanceMatrix t = m;
    for (double& v : t.d) v = std::exp(2.0 * v) + v;
    if (pdc::cmc(t) != got_cmc || pdc::mean_ap(t) != got_map) {
      pass = false;
      fail_note += "not invariant under increasing transform; ";
    }
  }
  report(3, "evaluation oracle (200 random matrices, exact)", pass,
         fail_note.empty() ? "cmc and mAP equal the enumeration oracle exactly" : fail_note);
}

// --------------------------------------------------------------------------
// 4. Optimization sanity.
// --------------------------------------------------------------------------

void criterion_optimization() {
  bool pass = true;
  std::string detail;

  // single-identity overfit on a 4-class toy config within 200 iterations
  {
    pdc::ModelConfig cfg;
    cfg.input_h = 32;
    cfg.input_w = 20;
    cfg.classes = 4;
    cfg.variant = pdc::Variant::FullPDC;
    cfg.trunk_c1 = 4;
    cfg.trunk_c2 = 8;
    cfg.trunk_c3 = 8;
    cfg.branch_c = 8;
    cfg.seed = 5;
    pdc::PdcModel model(cfg);

    pdc::SynthSpec spec;
    spec.identities = 1;
    spec.images_per_identity = 1;
    spec.img_h = 32;
    spec.img_w = 20;
    spec.heat_sigma = 1.0;
    spec.limb_jitter_deg = 15.0;
    spec.scale_jitter = 0.02;
    spec.shift_jitter = 0.01;
    spec.seed = 5;
    const auto samples = pdc::generate(spec);

    pdc::Batch batch;
    batch.images = pdc::Tensor({2, 3, 32, 20});
    for (std::size_t i = 0; i < 2; ++i) {
      pdc::detail::paste_sample(batch.images, i, samples[0].image);
      batch.maps.push_back(samples[0].maps);
      batch.labels.push_back(2);
    }
    pdc::SgdConfig sgd_cfg;
    sgd_cfg.base_lr = 0.025;
    pdc::Sgd sgd(sgd_cfg);
    double loss = 1e9;
    long used = 0;
    for (long it = 0; it < 200; ++it) {
      loss = model.train_step(batch, sgd, it).loss;
      used = it + 1;
      if (loss < 0.01) break;
    }
    pass = pass && loss < 0.01;
    detail += "overfit loss " + fmt(loss) + " after " + std::to_string(used) + " iters; ";
  }

  // zero effective learning rate is a bit-exact no-op
  {
    pdc::ModelConfig cfg;
    cfg.input_h = 16;
    cfg.input_w = 12;
    cfg.classes = 2;
    cfg.variant = pdc::Variant::FullPDC;
    cfg.backbone = pdc::Backbone::Tiny;
    cfg.trunk_c3 = 4;
    cfg.branch_c = 4;
    cfg.seed = 6;
    pdc::PdcModel model(cfg);
    for (pdc::Param* p : model.params()) p->lr_mult = 0.0;
    std::vector<pdc::Tensor> before;
    for (pdc::Param* p : model.params()) before.push_back(p->value);

    pdc::SynthSpec spec;
    spec.identities = 2;
    spec.images_per_identity = 1;
    spec.img_h = 16;
    spec.img_w = 12;
    spec.heat_sigma = 1.0;
    spec.limb_jitter_deg = 5.0;
    spec.scale_jitter = 0.01;
    spec.shift_jitter = 0.0;
    spec.seed = 6;
    const auto samples = pdc::generate(spec);
    pdc::Batch batch;
    batch.images = pdc::Tensor({2, 3, 16, 12});
    for (std::size_t i = 0; i < 2; ++i) {
      pdc::detail::paste_sample(batch.images, i, samples[i].image);
      batch.maps.push_back(samples[i].maps);
      batch.labels.push_back(static_cast<int>(i));
    }
    pdc::Sgd sgd(pdc::SgdConfig{});
    model.train_step(batch, sgd, 0);
    bool identical = true;
    std::size_t pi = 0;
    for (pdc::Param* p : model.params()) {
      for (std::size_t i = 0; i < p->value.numel(); ++i) {
        identical = identical && p->value[i] == before[pi][i];
      }
      ++pi;
    }
    pass = pass && identical;
    detail += std::string("zero-lr step ") + (identical ? "bit-exact" : "CHANGED PARAMS") + "; ";
  }

  // the PTN effective learning rate is exactly 0.001x the base rate
  {
    pdc::ModelConfig cfg;
    cfg.input_h = 32;
    cfg.input_w = 20;
    cfg.classes = 2;
    cfg.variant = pdc::Variant::FullPDC;
    cfg.trunk_c1 = 4;
    cfg.trunk_c2 = 8;
    cfg.trunk_c3 = 8;
    cfg.branch_c = 8;
    cfg.seed = 7;
    cfg.ptn_lr_mult = 0.001;
    pdc::PdcModel model(cfg);
    bool exact = true;
    for (const auto& [name, p] : model.named_params()) {
      if (name.rfind("ptn.", 0) == 0) {
        exact = exact && p->lr_mult == 0.001;
      } else {
        exact = exact && p->lr_mult == 1.0;
      }
    }
    const double base = 0.01;
    exact = exact && base * 0.001 == 1e-5;
    pass = pass && exact;
    detail += std::string("ptn lr multiplier ") + (exact ? "0.001 exact" : "WRONG");
  }

  report(4, "optimization sanity (overfit, zero-lr no-op, PTN lr 0.001x)", pass, detail);
}

// --------------------------------------------------------------------------
// 5. Directional ablation.
// --------------------------------------------------------------------------

struct AblationConfig {
  std::size_t identities = 50;
  std::size_t images_per_identity = 8;
  long iterations = 700;
  double base_lr = 0.01;
  std::vector<std::uint64_t> seeds{101, 202, 303};

  pdc::SynthSpec synth_spec(std::uint64_t seed) const {
    pdc::SynthSpec spec;
    spec.identities = identities;
    spec.images_per_identity = images_per_identity;
    spec.img_h = 64;
    spec.img_w = 40;
    spec.limb_jitter_deg = 40.0;
    spec.scale_jitter = 0.10;
    spec.shift_jitter = 0.045;
    spec.bg_jitter = 1.0;
    spec.heat_sigma = 1.5;
    spec.seed = seed;
    return spec;
  }
};

double train_and_rank1(const pdc::Dataset& ds, pdc::Variant variant, int fwn_k,
                       std::uint64_t seed, const AblationConfig& ab) {
  pdc::TrainSetup setup;
  setup.model.input_h = 64;
  setup.model.input_w = 40;
  setup.model.variant = variant;
  setup.model.fwn_k = fwn_k;
  setup.model.seed = seed;
  setup.sgd.base_lr = ab.base_lr;
  setup.sgd.decay_interval = 20000;
  setup.sgd.decay_factor = 0.1;
  setup.batch_size = 16;
  setup.iterations = ab.iterations;
  setup.train_frac = 0.7;
  setup.seed = seed;
  pdc::Trainer trainer(ds, setup);
  for (long it = 0; it < ab.iterations; ++it) trainer.step(it);
  const pdc::EvalReport report = pdc::evaluate_model(trainer.model(), ds, trainer.split());
  return report.rank(1);
}

void criterion_ablation() {
  const auto t0 = Clock::now();
  AblationConfig ab;
  const std::vector<pdc::Variant> variants = {
      pdc::Variant::GlobalOnly,    pdc::Variant::PartOnly,      pdc::Variant::GlobalPart,
      pdc::Variant::GlobalPartFEN, pdc::Variant::GlobalPartFWN, pdc::Variant::FullPDC};
  std::map<pdc::Variant, std::vector<double>> rank1;

  for (std::uint64_t seed : ab.seeds) {
    const auto seed_t0 = Clock::now();
    const pdc::SynthSpec spec = ab.synth_spec(seed);
    const pdc::Dataset ds = pdc::dataset_from_samples(pdc::generate(spec), spec);

    for (pdc::Variant v : variants) {
      const double r1 = train_and_rank1(ds, v, 1, seed, ab);
      rank1[v].push_back(r1);
      std::printf("  seed %llu %-14s rank1 %.4f\n", static_cast<unsigned long long>(seed),
                  pdc::variant_name(v), r1);
      std::fflush(stdout);
    }
    std::printf("  seed %llu took %.0fs\n", static_cast<unsigned long long>(seed),
                seconds_since(seed_t0));
  }

  // FWN depth sweep (reported, not gated): W0..W4 on the first seed
  {
    const pdc::SynthSpec spec = ab.synth_spec(ab.seeds[0]);
    const pdc::Dataset ds = pdc::dataset_from_samples(pdc::generate(spec), spec);
    std::printf("  FWN depth sweep (seed %llu, reported only):\n",
                static_cast<unsigned long long>(ab.seeds[0]));
    for (int k = 0; k <= 4; ++k) {
      const double r1 = k == 1 ? rank1[pdc::Variant::FullPDC][0]
                               : train_and_rank1(ds, pdc::Variant::FullPDC, k, ab.seeds[0], ab);
      std::printf("    W%d rank1 %.4f\n", k, r1);
      std::fflush(stdout);
    }
  }

  const double med_global = median(rank1[pdc::Variant::GlobalOnly]);
  const double med_gp = median(rank1[pdc::Variant::GlobalPart]);
  const double med_full = median(rank1[pdc::Variant::FullPDC]);
  const bool gate1 = med_gp >= med_global + 0.05;
  const bool gate2 = med_full >= med_gp;
  const double secs = seconds_since(t0);
  report(5, "directional ablation (Global+Part >= Global+5pts, FullPDC >= Global+Part)",
         gate1 && gate2,
         "median rank1: GlobalOnly " + fmt(med_global) + ", GlobalPart " + fmt(med_gp) +
             ", FullPDC " + fmt(med_full) + "; total " + fmt(secs) + "s");
}

// --------------------------------------------------------------------------
// 6. Reproducibility through the CLI.
// --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void criterion_reproducibility() {
  const char* cli = std::getenv("PDC_CLI");
  if (!cli || !*cli) {
    report(6, "reproducibility (two CLI runs, byte-identical reports)", false,
           "PDC_CLI not set; cannot drive the CLI binary");
    return;
  }
  const fs::path base =
      fs::temp_directory_path() / ("pdc_accept_repro_" + std::to_string(::getpid()));
  fs::remove_all(base);
  bool pass = true;
  std::string note;
  std::vector<std::string> reports;
  for (int run = 0; run < 2 && pass; ++run) {
    const fs::path root = base / ("run" + std::to_string(run));
    const std::string synth_cmd =
        std::string(cli) + " --threads 1 synth --set identities=8 --set images_per_identity=4" +
        " --set img_h=32 --set img_w=20 --set heat_sigma=1.0 --set limb_jitter_deg=20" +
        " --set scale_jitter=0.03 --set shift_jitter=0.02 -o " + (root / "data").string() +
        " >/dev/null 2>&1";
    const std::string train_cmd =
        std::string(cli) + " --threads 1 train --set input_h=32 --set input_w=20" +
        " --set batch_size=4 --set iterations=40 --set trunk_c1=4 --set trunk_c2=6" +
        " --set trunk_c3=6 --set branch_c=8 --set variant=FullPDC -d " +
        (root / "data").string() + " -o " + (root / "run").string() + " >/dev/null 2>&1";
    const std::string eval_cmd = std::string(cli) + " --threads 1 eval -k " +
                                 (root / "run" / "checkpoint").string() + " -d " +
                                 (root / "data").string() + " -o " + (root / "rep").string() +
                                 " >/dev/null 2>&1";
    for (const std::string& cmd : {synth_cmd, train_cmd, eval_cmd}) {
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        pass = false;
        note += "command failed: " + cmd.substr(0, 60) + "...; ";
      }
    }
    if (pass) {
      reports.push_back(slurp(root / "rep" / "report.csv") + slurp(root / "rep" / "cmc.csv") +
                        slurp(root / "run" / "train_log.csv"));
    }
  }
  if (pass) {
    pass = reports[0] == reports[1] && !reports[0].empty();
    note = pass ? "synth+train+eval reports byte-identical across two runs"
                : "reports differ between identical runs";
  }
  report(6, "reproducibility (two CLI runs, byte-identical reports)", pass, note);
}

}  // namespace

int main(int argc, char** argv) {
  // optional criterion filter: run only the listed criteria numbers
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  auto wanted = [&](int c) {
    return only.empty() || std::find(only.begin(), only.end(), c) != only.end();
  };

  if (wanted(1)) criterion_gradients();
  if (wanted(2)) criterion_geometry();
  if (wanted(3)) criterion_eval_oracle();
  if (wanted(4)) criterion_optimization();
  if (wanted(5)) criterion_ablation();
  if (wanted(6)) criterion_reproducibility();

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures;
}
