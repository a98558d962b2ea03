#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "pdc/dataset.hpp"
#include "pdc/fen.hpp"
#include "pdc/synth.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using pdc::SynthSpec;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.identities = 10;
  spec.images_per_identity = 4;
  spec.img_h = 64;
  spec.img_w = 40;
  spec.seed = 5;
  return spec;
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() /
               ("pdc_synth_test_" + std::to_string(::getpid()) + "_" + tag);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Synth, DeterministicGeneration) {
  const auto a = pdc::generate(small_spec());
  const auto b = pdc::generate(small_spec());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].image.numel(), b[i].image.numel());
    for (std::size_t j = 0; j < a[i].image.numel(); ++j) {
      ASSERT_EQ(a[i].image[j], b[i].image[j]);
    }
    for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
      ASSERT_EQ(a[i].joints.joints[j].x, b[i].joints.joints[j].x);
      ASSERT_EQ(a[i].joints.joints[j].y, b[i].joints.joints[j].y);
    }
  }
}

TEST(Synth, CountsAndLabels) {
  const auto samples = pdc::generate(small_spec());
  EXPECT_EQ(samples.size(), 40u);
  std::set<int> ids;
  for (const auto& s : samples) ids.insert(s.identity);
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(*ids.begin(), 0);
  EXPECT_EQ(*ids.rbegin(), 9);
}

TEST(Synth, CentroidOfResponseMapsRecoversJoints) {
  const auto samples = pdc::generate(small_spec());
  for (const auto& s : samples) {
    const pdc::JointSet located = pdc::localize_joints(s.maps);
    for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
      EXPECT_NEAR(located.joints[j].x, s.joints.joints[j].x, 0.5);
      EXPECT_NEAR(located.joints[j].y, s.joints.joints[j].y, 0.5);
    }
  }
}

TEST(Synth, JointsStayInFrame) {
  const auto samples = pdc::generate(small_spec());
  for (const auto& s : samples) {
    for (const auto& j : s.joints.joints) {
      EXPECT_GE(j.x, 0.0);
      EXPECT_LT(j.x, 40.0);
      EXPECT_GE(j.y, 0.0);
      EXPECT_LT(j.y, 64.0);
    }
  }
}

TEST(Synth, SkeletalTopologyHolds) {
  const auto samples = pdc::generate(small_spec());
  for (const auto& s : samples) {
    const auto& j = s.joints.joints;
    EXPECT_LT(j[pdc::kHead].y, j[pdc::kNeck].y);
    EXPECT_LT(j[pdc::kNeck].y, j[pdc::kLShoulder].y);
    EXPECT_LT(j[pdc::kLShoulder].y, j[pdc::kLHip].y);
    EXPECT_LT(j[pdc::kLShoulder].y, j[pdc::kLElbow].y);
    EXPECT_LT(j[pdc::kLElbow].y, j[pdc::kLWrist].y);
    EXPECT_LT(j[pdc::kLHip].y, j[pdc::kLKnee].y);
    EXPECT_LT(j[pdc::kLKnee].y, j[pdc::kLAnkle].y);
    // upper arm and forearm have equal segment lengths in the skeleton model
    const double ua = std::hypot(j[pdc::kLElbow].x - j[pdc::kLShoulder].x,
                                 j[pdc::kLElbow].y - j[pdc::kLShoulder].y);
    const double fa = std::hypot(j[pdc::kLWrist].x - j[pdc::kLElbow].x,
                                 j[pdc::kLWrist].y - j[pdc::kLElbow].y);
    EXPECT_NEAR(ua, fa, 1e-9);
  }
}

TEST(Synth, AppearanceIsIdentityStableAndDistinct) {
  const auto a = pdc::identity_appearance(5, 3);
  const auto b = pdc::identity_appearance(5, 3);
  EXPECT_EQ(a.phase, b.phase);
  EXPECT_EQ(a.freq, b.freq);
  EXPECT_EQ(a.base, b.base);

  std::set<std::array<double, 4>> phases;
  for (int id = 0; id < 100; ++id) {
    phases.insert(pdc::identity_appearance(5, id).phase);
  }
  EXPECT_EQ(phases.size(), 100u);
}

TEST(Synth, ResponseMapsHavePositiveMass) {
  const auto samples = pdc::generate(small_spec());
  for (const auto& s : samples) {
    for (const auto& m : s.maps.maps) EXPECT_GT(m.sum(), 0.0);
  }
}

TEST(Synth, OutOfFrameJitterIsRejected) {
  SynthSpec spec = small_spec();
  spec.shift_jitter = 0.4;
  EXPECT_THROW(spec.validate(), pdc::config_error);
  spec = small_spec();
  spec.limb_jitter_deg = 85.0;
  EXPECT_THROW(spec.validate(), pdc::config_error);
  spec = small_spec();
  spec.heat_sigma = -1.0;
  EXPECT_THROW(spec.validate(), pdc::config_error);
}

TEST(Split, PartitionIsDisjointAndSized) {
  const auto samples = pdc::generate(small_spec());
  pdc::SynthSpec spec = small_spec();
  const fs::path dir = temp_dir("split");
  pdc::save_dataset(dir, samples, spec);
  const pdc::Dataset ds = pdc::load_dataset(dir);

  const pdc::Split split = pdc::split_dataset(ds.items, 0.7, 9);
  EXPECT_EQ(split.train_ids.size(), 7u);
  std::set<int> train_set(split.train_ids.begin(), split.train_ids.end());
  std::set<int> eval_ids;
  for (std::size_t i : split.probe_items) eval_ids.insert(ds.items[i].identity);
  EXPECT_EQ(eval_ids.size(), 3u);
  for (int id : eval_ids) EXPECT_FALSE(train_set.count(id));

  // one probe per eval identity with a single camera; rest in the gallery
  EXPECT_EQ(split.probe_items.size(), 3u);
  EXPECT_EQ(split.gallery_items.size(), 3u * 3u);
  for (std::size_t p : split.probe_items) {
    bool has_match = false;
    for (std::size_t g : split.gallery_items) {
      has_match |= ds.items[g].identity == ds.items[p].identity;
    }
    EXPECT_TRUE(has_match);
  }

  const pdc::Split again = pdc::split_dataset(ds.items, 0.7, 9);
  EXPECT_EQ(split.train_ids, again.train_ids);
  EXPECT_EQ(split.probe_items, again.probe_items);
  EXPECT_EQ(split.gallery_items, again.gallery_items);

  const pdc::Split other = pdc::split_dataset(ds.items, 0.7, 10);
  EXPECT_NE(split.train_ids, other.train_ids);  // different seed, different shuffle
}

TEST(Split, TooFewImagesIsProtocolError) {
  SynthSpec spec = small_spec();
  spec.images_per_identity = 1;
  const auto samples = pdc::generate(spec);
  const fs::path dir = temp_dir("split_fail");
  pdc::save_dataset(dir, samples, spec);
  const pdc::Dataset ds = pdc::load_dataset(dir);
  EXPECT_THROW(pdc::split_dataset(ds.items, 0.7, 1), pdc::config_error);
}

TEST(Dataset, SaveLoadRoundTrip) {
  SynthSpec spec = small_spec();
  const auto samples = pdc::generate(spec);
  const fs::path dir = temp_dir("roundtrip");
  pdc::save_dataset(dir, samples, spec);

  const pdc::Dataset ds = pdc::load_dataset(dir);
  ASSERT_EQ(ds.items.size(), samples.size());
  EXPECT_EQ(ds.meta.img_h, 64u);
  EXPECT_EQ(ds.meta.img_w, 40u);
  EXPECT_DOUBLE_EQ(ds.meta.heat_sigma, 1.5);

  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(ds.items[i].identity, samples[i].identity);
    EXPECT_EQ(ds.items[i].image_index, samples[i].image_index);
    for (std::size_t j = 0; j < samples[i].image.numel(); ++j) {
      EXPECT_NEAR(ds.items[i].image[j], samples[i].image[j], 0.5 / 255.0 + 1e-12);
    }
    for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
      EXPECT_NEAR(ds.items[i].joints.joints[j].x, samples[i].joints.joints[j].x, 1e-5);
      EXPECT_NEAR(ds.items[i].joints.joints[j].y, samples[i].joints.joints[j].y, 1e-5);
    }
    ASSERT_TRUE(ds.items[i].heat.has_value());
  }

  // stored heatmaps win; without them, maps are synthesized from the joints
  const pdc::ResponseMapSet from_heat = pdc::response_maps_for(ds.items[0], ds.meta);
  pdc::DatasetItem stripped = ds.items[0];
  stripped.heat.reset();
  const pdc::ResponseMapSet synthesized = pdc::response_maps_for(stripped, ds.meta);
  for (std::size_t m = 0; m < pdc::kNumJoints; ++m) {
    for (std::size_t i = 0; i < from_heat.maps[m].numel(); ++i) {
      EXPECT_NEAR(from_heat.maps[m][i], synthesized.maps[m][i], 1e-5);
    }
  }
}

TEST(Dataset, LoadWithoutHeatmaps) {
  SynthSpec spec = small_spec();
  spec.identities = 3;
  const auto samples = pdc::generate(spec);
  const fs::path dir = temp_dir("noheat");
  pdc::save_dataset(dir, samples, spec, /*write_heatmaps=*/false);
  const pdc::Dataset ds = pdc::load_dataset(dir);
  EXPECT_FALSE(ds.items[0].heat.has_value());
  const pdc::ResponseMapSet maps = pdc::response_maps_for(ds.items[0], ds.meta);
  const pdc::JointSet located = pdc::localize_joints(maps);
  for (std::size_t j = 0; j < pdc::kNumJoints; ++j) {
    EXPECT_NEAR(located.joints[j].x, ds.items[0].joints.joints[j].x, 0.5);
  }
}
