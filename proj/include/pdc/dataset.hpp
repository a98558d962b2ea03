#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pdc/errors.hpp"
#include "pdc/fen.hpp"
#include "pdc/io.hpp"
#include "pdc/rng.hpp"
#include "pdc/synth.hpp"

namespace pdc {

// On-disk dataset layout (also the ingestion format for user-supplied data
// with precomputed joints):
//   <root>/manifest.txt                key = value lines describing the set
//   <root>/<identity>/<idx>.ppm        the image
//   <root>/<identity>/<idx>.joints.csv 14 rows of joint,x,y
//   <root>/<identity>/<idx>.heat.pdct  optional [14,H,W] response maps
// When the heat file is missing, response maps are synthesized as Gaussians
// around the stored joints using the manifest's heat_sigma.

struct DatasetMeta {
  std::size_t img_h = 0, img_w = 0;
  double heat_sigma = 1.5;
  std::size_t cameras = 1;
  std::map<std::string, std::string> raw;  // full manifest contents
};

struct DatasetItem {
  int identity = 0;
  int image_index = 0;
  int camera = 0;
  Tensor image;                 // [3,H,W]
  JointSet joints;
  std::optional<Tensor> heat;   // [14,H,W] when stored on disk
  std::string stem;             // "<root>/<identity>/<idx>" without extension
};

struct Dataset {
  DatasetMeta meta;
  std::vector<DatasetItem> items;
};

inline ResponseMapSet response_maps_for(const DatasetItem& item, const DatasetMeta& meta) {
  if (item.heat) {
    const Tensor& h = *item.heat;
    require_shape(h, {kNumJoints, meta.img_h, meta.img_w}, "response_maps_for");
    ResponseMapSet maps;
    maps.height = meta.img_h;
    maps.width = meta.img_w;
    for (std::size_t m = 0; m < kNumJoints; ++m) {
      Tensor t({meta.img_h, meta.img_w});
      for (std::size_t i = 0; i < t.numel(); ++i) {
        t[i] = h[m * t.numel() + i];
      }
      maps.maps.push_back(std::move(t));
    }
    return maps;
  }
  return make_response_maps(item.joints, meta.img_h, meta.img_w, meta.heat_sigma);
}

inline void save_dataset(const std::filesystem::path& root,
                         const std::vector<SynthSample>& samples, const SynthSpec& spec,
                         bool write_heatmaps = true) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (!fs::is_directory(root)) throw io_error("cannot create dataset dir: " + root.string());

  std::ofstream manifest(root / "manifest.txt", std::ios::trunc);
  if (!manifest) throw io_error("cannot write manifest: " + (root / "manifest.txt").string());
  manifest << "format = pdc-dataset-v1\n"
           << "identities = " << spec.identities << '\n'
           << "images_per_identity = " << spec.images_per_identity << '\n'
           << "img_h = " << spec.img_h << '\n'
           << "img_w = " << spec.img_w << '\n'
           << "heat_sigma = " << spec.heat_sigma << '\n'
           << "cameras = " << spec.cameras << '\n'
           << "limb_jitter_deg = " << spec.limb_jitter_deg << '\n'
           << "scale_jitter = " << spec.scale_jitter << '\n'
           << "shift_jitter = " << spec.shift_jitter << '\n'
           << "bg_jitter = " << spec.bg_jitter << '\n'
           << "joint_noise = " << spec.joint_noise << '\n'
           << "joint_outlier_prob = " << spec.joint_outlier_prob << '\n'
           << "seed = " << spec.seed << '\n';
  manifest.close();

  for (const SynthSample& s : samples) {
    char idbuf[16], imbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "%04d", s.identity);
    std::snprintf(imbuf, sizeof(imbuf), "%03d", s.image_index);
    const fs::path dir = root / idbuf;
    fs::create_directories(dir, ec);
    write_ppm(dir / (std::string(imbuf) + ".ppm"), s.image);
    write_lines(dir / (std::string(imbuf) + ".joints.csv"), joints_csv(s.joints));
    if (write_heatmaps) {
      Tensor heat({kNumJoints, s.maps.height, s.maps.width});
      for (std::size_t m = 0; m < kNumJoints; ++m) {
        const Tensor& src = s.maps.maps[m];
        for (std::size_t i = 0; i < src.numel(); ++i) heat[m * src.numel() + i] = src[i];
      }
      write_pdct(dir / (std::string(imbuf) + ".heat.pdct"), heat);
    }
  }
}

namespace detail {

inline std::map<std::string, std::string> read_kv_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline JointSet read_joints_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open: " + path.string());
  std::string line;
  std::getline(f, line);  // header
  JointSet js;
  std::size_t n = 0;
  while (std::getline(f, line) && n < kNumJoints) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) break;
    js.joints[n].x = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    js.joints[n].y = std::stod(line.substr(c2 + 1));
    ++n;
  }
  if (n != kNumJoints) {
    throw io_error("expected 14 joints in " + path.string() + ", got " + std::to_string(n));
  }
  return js;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw io_error("dataset dir not found: " + root.string());
  Dataset ds;
  ds.meta.raw = detail::read_kv_file(root / "manifest.txt");
  auto fetch = [&](const char* key) -> std::string {
    auto it = ds.meta.raw.find(key);
    if (it == ds.meta.raw.end()) throw io_error(std::string("manifest missing key: ") + key);
    return it->second;
  };
  ds.meta.img_h = static_cast<std::size_t>(std::stoul(fetch("img_h")));
  ds.meta.img_w = static_cast<std::size_t>(std::stoul(fetch("img_w")));
  ds.meta.heat_sigma = std::stod(fetch("heat_sigma"));
  ds.meta.cameras = ds.meta.raw.count("cameras")
                        ? static_cast<std::size_t>(std::stoul(ds.meta.raw.at("cameras")))
                        : 1;

  std::vector<fs::path> id_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) id_dirs.push_back(e.path());
  }
  std::sort(id_dirs.begin(), id_dirs.end());
  for (const fs::path& dir : id_dirs) {
    const int identity = std::stoi(dir.filename().string());
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".ppm") images.push_back(e.path());
    }
    std::sort(images.begin(), images.end());
    for (const fs::path& img_path : images) {
      DatasetItem item;
      item.identity = identity;
      const std::string stem = img_path.stem().string();
      item.image_index = std::stoi(stem);
      item.camera = static_cast<int>(static_cast<std::size_t>(item.image_index) % ds.meta.cameras);
      item.image = read_ppm(img_path);
      require_shape(item.image, {3, ds.meta.img_h, ds.meta.img_w}, "load_dataset");
      item.joints = detail::read_joints_csv(dir / (stem + ".joints.csv"));
      const fs::path heat = dir / (stem + ".heat.pdct");
      if (fs::exists(heat)) item.heat = read_pdct(heat);
      item.stem = (dir / stem).string();
      ds.items.push_back(std::move(item));
    }
  }
  if (ds.items.empty()) throw io_error("dataset is empty: " + root.string());
  return ds;
}

// In-memory dataset straight from generated samples (no disk round trip).
inline Dataset dataset_from_samples(const std::vector<SynthSample>& samples,
                                    const SynthSpec& spec) {
  Dataset ds;
  ds.meta.img_h = spec.img_h;
  ds.meta.img_w = spec.img_w;
  ds.meta.heat_sigma = spec.heat_sigma;
  ds.meta.cameras = spec.cameras;
  ds.items.reserve(samples.size());
  for (const SynthSample& s : samples) {
    DatasetItem item;
    item.identity = s.identity;
    item.image_index = s.image_index;
    item.camera = s.camera;
    item.image = s.image;
    item.joints = s.joints;
    ds.items.push_back(std::move(item));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Probe/gallery protocol: identities are split disjointly into train and
// eval by a seeded shuffle; for each eval identity and camera the first
// image becomes the probe and the rest go to the gallery.
// ---------------------------------------------------------------------------

struct Split {
  std::vector<int> train_ids;                  // sorted
  std::vector<std::size_t> train_items;
  std::vector<std::size_t> probe_items;
  std::vector<std::size_t> gallery_items;
  std::map<int, int> label_of_train_id;        // identity -> compact class label
};

inline Split split_dataset(const std::vector<DatasetItem>& items, double train_frac,
                           std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw config_error("split: train_frac must be in (0,1)");
  }
  std::set<int> id_set;
  for (const auto& item : items) id_set.insert(item.identity);
  std::vector<int> ids(id_set.begin(), id_set.end());
  if (ids.size() < 2) throw config_error("split: need at least 2 identities");

  Rng rng(Rng::mix(seed, 0x5917F00DULL));
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t k = rng.below(i);
    std::swap(ids[i - 1], ids[k]);
  }
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_frac * static_cast<double>(ids.size()) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);

  Split split;
  split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(split.train_ids.begin(), split.train_ids.end());
  for (std::size_t i = 0; i < split.train_ids.size(); ++i) {
    split.label_of_train_id[split.train_ids[i]] = static_cast<int>(i);
  }
  const std::set<int> train_set(split.train_ids.begin(), split.train_ids.end());

  // per eval identity and camera: lowest image index is the probe
  std::map<std::pair<int, int>, std::size_t> first_of;  // (id, cam) -> item index
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (train_set.count(item.identity)) {
      split.train_items.push_back(i);
      continue;
    }
    const auto key = std::make_pair(item.identity, item.camera);
    auto it = first_of.find(key);
    if (it == first_of.end() || items[it->second].image_index > item.image_index) {
      first_of[key] = i;
    }
  }
  std::set<std::size_t> probe_set;
  for (const auto& [key, idx] : first_of) probe_set.insert(idx);
  std::map<int, std::size_t> gallery_count, total_count;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (train_set.count(items[i].identity)) continue;
    ++total_count[items[i].identity];
    if (probe_set.count(i)) {
      split.probe_items.push_back(i);
    } else {
      split.gallery_items.push_back(i);
      ++gallery_count[items[i].identity];
    }
  }
  for (const auto& [id, n] : total_count) {
    if (n < 2) {
      throw config_error("split: eval identity " + std::to_string(id) +
                         " has fewer than 2 images");
    }
    if (gallery_count[id] == 0) {
      throw config_error("split: eval identity " + std::to_string(id) +
                         " has no gallery image left; add images or reduce cameras");
    }
  }
  return split;
}

}  // namespace pdc
