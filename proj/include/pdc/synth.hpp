#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pdc/errors.hpp"
#include "pdc/fen.hpp"
#include "pdc/parallel.hpp"
#include "pdc/rng.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// ---------------------------------------------------------------------------
// Deterministic stick-figure pedestrians. Identity appearance (per-part
// colors from a small palette plus stripe frequency/phase) is a pure function
// of (seed, identity); pose (limb angles, scale, translation) is a pure
// function of (seed, identity, image index). Each sample carries exact
// ground-truth joints and Gaussian response maps centered on them.
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t identities = 50;
  std::size_t images_per_identity = 8;
  std::size_t img_h = 64;
  std::size_t img_w = 40;
  double limb_jitter_deg = 35.0;  // arms: full range; legs: 55% of it
  double scale_jitter = 0.06;     // figure scale in [1-s, 1+s]
  double shift_jitter = 0.04;     // translation as a fraction of image extent
  double bg_jitter = 0.3;         // per-sample background level/tint variation
  double joint_noise = 0.0;       // detected-joint jitter vs the drawn pose, pixels
  double joint_outlier_prob = 0.0;  // chance a limb joint is grossly misplaced
  double heat_sigma = 1.5;        // response-map Gaussian sigma, pixels
  std::size_t cameras = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Skeleton proportions as fractions of the figure height.
namespace skel {
inline constexpr double kHeadY = 0.08;
inline constexpr double kNeckY = 0.17;
inline constexpr double kShoulderY = 0.21;
inline constexpr double kHipY = 0.50;
inline constexpr double kShoulderHalf = 0.09;
inline constexpr double kHipHalf = 0.065;
inline constexpr double kUpperArm = 0.11;
inline constexpr double kForeArm = 0.11;
inline constexpr double kThigh = 0.20;
inline constexpr double kShin = 0.20;
inline constexpr double kHeadR = 0.070;
inline constexpr double kTorsoR = 0.105;
inline constexpr double kArmR = 0.048;
inline constexpr double kLegR = 0.054;
inline constexpr double kFigureHeight = 0.66;   // fraction of image height
inline constexpr double kArmBaseDeg = 12.0;
inline constexpr double kElbowBaseDeg = 8.0;
inline constexpr double kLegBaseDeg = 6.0;
inline constexpr double kKneeBaseDeg = 4.0;
inline constexpr double kElbowJitterFrac = 0.7;
inline constexpr double kLegJitterFrac = 0.55;
inline constexpr double kKneeJitterFrac = 0.4;
}  // namespace skel

inline double deg2rad(double d) { return d * M_PI / 180.0; }

inline void SynthSpec::validate() const {
  if (identities < 1 || images_per_identity < 1) {
    throw config_error("synth: identities and images_per_identity must be >= 1");
  }
  if (!(heat_sigma > 0.0)) throw config_error("synth: heat_sigma must be > 0");
  if (cameras < 1) throw config_error("synth: cameras must be >= 1");
  if (img_h % 4 != 0 || img_w % 4 != 0) {
    throw config_error("synth: image extent must be divisible by 4");
  }
  if (limb_jitter_deg < 0.0 || scale_jitter < 0.0 || shift_jitter < 0.0 || bg_jitter < 0.0 ||
      bg_jitter > 1.0) {
    throw config_error("synth: jitter ranges must be non-negative (bg_jitter in [0,1])");
  }
  if (joint_noise < 0.0 || joint_outlier_prob < 0.0 || joint_outlier_prob > 1.0) {
    throw config_error("synth: joint noise must be >= 0 and outlier prob in [0,1]");
  }

  // Worst-case joint positions must stay at least `margin` pixels inside the
  // frame so heatmap centroids are not skewed by border truncation.
  using namespace skel;
  const double margin = std::max(2.0 * heat_sigma, 2.0);
  const double fh = kFigureHeight * static_cast<double>(img_h) * (1.0 + scale_jitter);
  const double arm_a = deg2rad(kArmBaseDeg + limb_jitter_deg);
  const double arm_b = deg2rad(kElbowBaseDeg + kElbowJitterFrac * limb_jitter_deg);
  const double leg_a = deg2rad(kLegBaseDeg + kLegJitterFrac * limb_jitter_deg);
  const double leg_b = deg2rad(kKneeBaseDeg + kKneeJitterFrac * limb_jitter_deg);
  const double arm_reach =
      kShoulderHalf + kUpperArm * std::sin(arm_a) +
      kForeArm * std::sin(std::min(M_PI / 2.0, arm_a + arm_b));
  const double leg_reach =
      kHipHalf + kThigh * std::sin(leg_a) + kShin * std::sin(std::min(M_PI / 2.0, leg_a + leg_b));
  const double reach_x = fh * std::max(arm_reach, leg_reach);
  const double reach_down = fh * (kHipY - 0.5 + kThigh + kShin);  // straight legs
  const double reach_up = fh * (0.5 - kHeadY);
  const double cx = 0.5 * static_cast<double>(img_w - 1);
  const double cy = 0.5 * static_cast<double>(img_h - 1);
  const double dx = shift_jitter * static_cast<double>(img_w);
  const double dy = shift_jitter * static_cast<double>(img_h);
  const double x_need = cx + dx + reach_x;
  const double y_lo_need = cy - dy - reach_up;
  const double y_hi_need = cy + dy + reach_down;
  const double x_limit = static_cast<double>(img_w - 1) - margin;
  const double y_limit = static_cast<double>(img_h - 1) - margin;
  if (x_need > x_limit || cx - dx - reach_x < margin || y_hi_need > y_limit ||
      y_lo_need < margin) {
    throw config_error(
        "synth: jitter can push joints out of frame (worst-case x reach " +
        std::to_string(x_need) + " vs limit " + std::to_string(x_limit) +
        ", y span [" + std::to_string(y_lo_need) + "," + std::to_string(y_hi_need) +
        "] vs margin " + std::to_string(margin) + "); reduce jitter or enlarge the image");
  }
}

// Per-identity appearance: for each of head/torso/arm/leg a pair of palette
// colors blended by a sinusoidal stripe pattern along the part axis.
struct Appearance {
  std::array<std::array<double, 3>, 4> base;
  std::array<std::array<double, 3>, 4> second;
  std::array<double, 4> freq;
  std::array<double, 4> phase;
};

namespace detail {

inline const std::array<std::array<double, 3>, 5>& part_palette(int part_type) {
  static const std::array<std::array<std::array<double, 3>, 5>, 4> palettes = {{
      // head
      {{{0.85, 0.72, 0.58}, {0.62, 0.45, 0.32}, {0.35, 0.25, 0.18}, {0.90, 0.82, 0.70}, {0.50, 0.38, 0.30}}},
      // torso
      {{{0.85, 0.20, 0.18}, {0.15, 0.35, 0.80}, {0.18, 0.62, 0.25}, {0.88, 0.80, 0.22}, {0.55, 0.20, 0.65}}},
      // arms
      {{{0.80, 0.30, 0.25}, {0.20, 0.40, 0.75}, {0.25, 0.60, 0.30}, {0.85, 0.75, 0.30}, {0.75, 0.75, 0.78}}},
      // legs
      {{{0.20, 0.22, 0.45}, {0.35, 0.30, 0.25}, {0.55, 0.55, 0.60}, {0.15, 0.45, 0.40}, {0.60, 0.35, 0.20}}},
  }};
  return palettes[static_cast<std::size_t>(part_type)];
}

}  // namespace detail

inline Appearance identity_appearance(std::uint64_t seed, int identity) {
  Rng rng(Rng::mix(Rng::mix(seed, 0xA11CE5EEDULL), static_cast<std::uint64_t>(identity)));
  Appearance a;
  for (int t = 0; t < 4; ++t) {
    const auto& pal = detail::part_palette(t);
    const std::size_t i = rng.below(pal.size());
    const std::size_t j = (i + 1 + rng.below(pal.size() - 1)) % pal.size();
    a.base[static_cast<std::size_t>(t)] = pal[i];
    a.second[static_cast<std::size_t>(t)] = pal[j];
    a.freq[static_cast<std::size_t>(t)] = 1.5 + static_cast<double>(rng.below(3));
    a.phase[static_cast<std::size_t>(t)] = rng.uniform(0.0, 2.0 * M_PI);
  }
  return a;
}

struct SynthSample {
  Tensor image;  // [3,H,W], values in [0,1]
  int identity = 0;
  int image_index = 0;
  int camera = 0;
  JointSet joints;
  ResponseMapSet maps;
};

inline ResponseMapSet make_response_maps(const JointSet& joints, std::size_t h, std::size_t w,
                                         double sigma) {
  ResponseMapSet maps;
  maps.height = h;
  maps.width = w;
  maps.maps.reserve(kNumJoints);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    Tensor m({h, w});
    const double jx = joints.joints[j].x, jy = joints.joints[j].y;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double ddx = static_cast<double>(x) - jx;
        const double ddy = static_cast<double>(y) - jy;
        m(y, x) = std::exp(-(ddx * ddx + ddy * ddy) * inv);
      }
    maps.maps.push_back(std::move(m));
  }
  return maps;
}

namespace detail {

// Anti-aliased capsule between two points; color varies along the arc-length
// parameter so limb stripes stay attached to the limb under rotation.
template <class ColorFn>
inline void draw_capsule(Tensor& img, double x0, double y0, double x1, double y1, double radius,
                         ColorFn color) {
  const std::size_t h = img.extent(1), w = img.extent(2);
  const double lx = x1 - x0, ly = y1 - y0;
  const double len2 = lx * lx + ly * ly;
  const long xa = std::max(0L, static_cast<long>(std::floor(std::min(x0, x1) - radius - 1)));
  const long xb = std::min(static_cast<long>(w) - 1,
                           static_cast<long>(std::ceil(std::max(x0, x1) + radius + 1)));
  const long ya = std::max(0L, static_cast<long>(std::floor(std::min(y0, y1) - radius - 1)));
  const long yb = std::min(static_cast<long>(h) - 1,
                           static_cast<long>(std::ceil(std::max(y0, y1) + radius + 1)));
  for (long y = ya; y <= yb; ++y) {
    for (long x = xa; x <= xb; ++x) {
      const double px = static_cast<double>(x) - x0;
      const double py = static_cast<double>(y) - y0;
      double t = len2 > 0.0 ? std::clamp((px * lx + py * ly) / len2, 0.0, 1.0) : 0.0;
      const double dx = px - t * lx, dy = py - t * ly;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double cov = std::clamp(radius - dist + 0.5, 0.0, 1.0);
      if (cov <= 0.0) continue;
      const std::array<double, 3> c = color(t);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double& v = img(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        v = v * (1.0 - cov) + c[ch] * cov;
      }
    }
  }
}

inline std::array<double, 3> stripe_color(const Appearance& a, int type, double t) {
  const std::size_t ty = static_cast<std::size_t>(type);
  const double u = 0.5 * (1.0 + std::sin(2.0 * M_PI * a.freq[ty] * t + a.phase[ty]));
  std::array<double, 3> c;
  for (int ch = 0; ch < 3; ++ch) {
    c[static_cast<std::size_t>(ch)] = a.base[ty][static_cast<std::size_t>(ch)] * (1.0 - u) +
                                      a.second[ty][static_cast<std::size_t>(ch)] * u;
  }
  return c;
}

}  // namespace detail

// Renders one sample. Pose is drawn from the (seed, identity, image) stream;
// appearance from the (seed, identity) stream.
inline SynthSample render_sample(const SynthSpec& spec, int identity, int image_index) {
  using namespace skel;
  const Appearance look = identity_appearance(spec.seed, identity);
  Rng rng(Rng::mix(Rng::mix(spec.seed, static_cast<std::uint64_t>(identity) + 1),
                   static_cast<std::uint64_t>(image_index) + 0x9D2CULL));

  const double jitter = deg2rad(spec.limb_jitter_deg);
  const double scale = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter);
  const double fh = kFigureHeight * static_cast<double>(spec.img_h) * scale;
  const double cx = 0.5 * static_cast<double>(spec.img_w - 1) +
                    rng.uniform(-1.0, 1.0) * spec.shift_jitter * static_cast<double>(spec.img_w);
  const double cy = 0.5 * static_cast<double>(spec.img_h - 1) +
                    rng.uniform(-1.0, 1.0) * spec.shift_jitter * static_cast<double>(spec.img_h);
  const double top = cy - 0.5 * fh;

  // limb angles from the vertical; positive bends away from the torso
  const double l_arm = deg2rad(kArmBaseDeg) + rng.uniform(-jitter, jitter);
  const double r_arm = deg2rad(kArmBaseDeg) + rng.uniform(-jitter, jitter);
  const double l_elbow = deg2rad(kElbowBaseDeg) + kElbowJitterFrac * rng.uniform(-jitter, jitter);
  const double r_elbow = deg2rad(kElbowBaseDeg) + kElbowJitterFrac * rng.uniform(-jitter, jitter);
  const double l_leg = deg2rad(kLegBaseDeg) + kLegJitterFrac * rng.uniform(-jitter, jitter);
  const double r_leg = deg2rad(kLegBaseDeg) + kLegJitterFrac * rng.uniform(-jitter, jitter);
  const double l_knee = deg2rad(kKneeBaseDeg) + kKneeJitterFrac * rng.uniform(-jitter, jitter);
  const double r_knee = deg2rad(kKneeBaseDeg) + kKneeJitterFrac * rng.uniform(-jitter, jitter);

  JointSet js;
  auto& j = js.joints;
  j[kHead] = {cx, top + kHeadY * fh};
  j[kNeck] = {cx, top + kNeckY * fh};
  j[kLShoulder] = {cx + kShoulderHalf * fh, top + kShoulderY * fh};
  j[kRShoulder] = {cx - kShoulderHalf * fh, top + kShoulderY * fh};
  j[kLHip] = {cx + kHipHalf * fh, top + kHipY * fh};
  j[kRHip] = {cx - kHipHalf * fh, top + kHipY * fh};
  // the left side of the body extends toward +x, the right side toward -x
  j[kLElbow] = {j[kLShoulder].x + kUpperArm * fh * std::sin(l_arm),
                j[kLShoulder].y + kUpperArm * fh * std::cos(l_arm)};
  j[kLWrist] = {j[kLElbow].x + kForeArm * fh * std::sin(l_arm + l_elbow),
                j[kLElbow].y + kForeArm * fh * std::cos(l_arm + l_elbow)};
  j[kRElbow] = {j[kRShoulder].x - kUpperArm * fh * std::sin(r_arm),
                j[kRShoulder].y + kUpperArm * fh * std::cos(r_arm)};
  j[kRWrist] = {j[kRElbow].x - kForeArm * fh * std::sin(r_arm + r_elbow),
                j[kRElbow].y + kForeArm * fh * std::cos(r_arm + r_elbow)};
  j[kLKnee] = {j[kLHip].x + kThigh * fh * std::sin(l_leg),
               j[kLHip].y + kThigh * fh * std::cos(l_leg)};
  j[kLAnkle] = {j[kLKnee].x + kShin * fh * std::sin(l_leg + l_knee),
                j[kLKnee].y + kShin * fh * std::cos(l_leg + l_knee)};
  j[kRKnee] = {j[kRHip].x - kThigh * fh * std::sin(r_leg),
               j[kRHip].y + kThigh * fh * std::cos(r_leg)};
  j[kRAnkle] = {j[kRKnee].x - kShin * fh * std::sin(r_leg + r_knee),
                j[kRKnee].y + kShin * fh * std::cos(r_leg + r_knee)};

  // the response maps model a pose estimator: their centers are the drawn
  // pose plus detection noise, with occasional gross misses on limb joints
  JointSet detected = js;
  if (spec.joint_noise > 0.0 || spec.joint_outlier_prob > 0.0) {
    const double margin = std::max(2.0 * spec.heat_sigma, 2.0);
    for (std::size_t ji = 0; ji < kNumJoints; ++ji) {
      Joint& q = detected.joints[ji];
      q.x += rng.normal(0.0, spec.joint_noise);
      q.y += rng.normal(0.0, spec.joint_noise);
      const bool limb_joint = ji == kRElbow || ji == kRWrist || ji == kLElbow ||
                              ji == kLWrist || ji == kLKnee || ji == kLAnkle ||
                              ji == kRKnee || ji == kRAnkle;
      if (limb_joint && rng.uniform() < spec.joint_outlier_prob) {
        q.x = cx + rng.uniform(-0.45, 0.45) * fh * 0.8;
        q.y = top + rng.uniform(0.1, 0.95) * fh;
      }
      q.x = std::clamp(q.x, margin, static_cast<double>(spec.img_w - 1) - margin);
      q.y = std::clamp(q.y, margin, static_cast<double>(spec.img_h - 1) - margin);
    }
  }

  SynthSample sample;
  sample.identity = identity;
  sample.image_index = image_index;
  sample.camera = static_cast<int>(static_cast<std::size_t>(image_index) % spec.cameras);
  sample.joints = detected;

  // per-sample background: gray level with a vertical gradient, a slight
  // color tint, and an oriented stripe pattern; part crops discard most of
  // it while the global stream must average over it
  const double bg_base = 0.05 + spec.bg_jitter * rng.uniform(0.0, 0.4);
  const double bg_slope = spec.bg_jitter * rng.uniform(-0.2, 0.2);
  std::array<double, 3> bg_tint{};
  for (auto& t : bg_tint) t = spec.bg_jitter * rng.uniform(-0.06, 0.06);
  const double bg_amp = 0.12 * spec.bg_jitter;
  const double bg_freq = rng.uniform(1.5, 5.0);
  const double bg_th = rng.uniform(0.0, M_PI);
  const double bg_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double bg_cx = std::cos(bg_th), bg_cy = std::sin(bg_th);
  Tensor img({3, spec.img_h, spec.img_w});
  for (std::size_t y = 0; y < spec.img_h; ++y) {
    const double level =
        bg_base + bg_slope * (static_cast<double>(y) / static_cast<double>(spec.img_h));
    for (std::size_t x = 0; x < spec.img_w; ++x) {
      const double u = (bg_cx * static_cast<double>(x) + bg_cy * static_cast<double>(y)) /
                       static_cast<double>(spec.img_w);
      const double stripe = bg_amp * std::sin(2.0 * M_PI * bg_freq * u + bg_phase);
      for (std::size_t c = 0; c < 3; ++c) {
        img(c, y, x) = std::clamp(level + stripe + bg_tint[c], 0.0, 0.65);
      }
    }
  }

  // clutter: striped capsules in palette colors behind the figure; they
  // pollute whole-image color statistics but rarely enter the part boxes
  const int n_clutter = static_cast<int>(std::lround(2.0 * spec.bg_jitter));
  for (int d = 0; d < n_clutter; ++d) {
    const int type = static_cast<int>(rng.below(4));
    const auto& pal = detail::part_palette(type);
    const std::array<double, 3> ca = pal[rng.below(pal.size())];
    const std::array<double, 3> cb = pal[rng.below(pal.size())];
    const double freq = 1.0 + static_cast<double>(rng.below(3));
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double x0 = rng.uniform(0.0, static_cast<double>(spec.img_w - 1));
    const double y0 = rng.uniform(0.0, static_cast<double>(spec.img_h - 1));
    const double x1 = x0 + rng.uniform(-0.5, 0.5) * static_cast<double>(spec.img_w);
    const double y1 = y0 + rng.uniform(-0.5, 0.5) * static_cast<double>(spec.img_h);
    const double radius = rng.uniform(0.03, 0.075) * static_cast<double>(spec.img_h);
    detail::draw_capsule(img, x0, y0, x1, y1, radius, [&](double t) {
      const double u = 0.5 * (1.0 + std::sin(2.0 * M_PI * freq * t + phase));
      std::array<double, 3> c;
      for (int ch = 0; ch < 3; ++ch) {
        c[static_cast<std::size_t>(ch)] = ca[static_cast<std::size_t>(ch)] * (1.0 - u) +
                                          cb[static_cast<std::size_t>(ch)] * u;
      }
      return c;
    });
  }
  const auto limb = [&](int a, int b, int type, double radius, double t0, double t1) {
    detail::draw_capsule(img, j[static_cast<std::size_t>(a)].x, j[static_cast<std::size_t>(a)].y,
                         j[static_cast<std::size_t>(b)].x, j[static_cast<std::size_t>(b)].y,
                         radius * fh, [&](double t) {
                           return detail::stripe_color(look, type, t0 + (t1 - t0) * t);
                         });
  };
  // torso first, limbs in front, head last
  detail::draw_capsule(img, cx, top + kNeckY * fh, cx, top + kHipY * fh, kTorsoR * fh,
                       [&](double t) { return detail::stripe_color(look, 1, t); });
  limb(kLHip, kLKnee, 3, kLegR, 0.0, 0.5);
  limb(kLKnee, kLAnkle, 3, kLegR, 0.5, 1.0);
  limb(kRHip, kRKnee, 3, kLegR, 0.0, 0.5);
  limb(kRKnee, kRAnkle, 3, kLegR, 0.5, 1.0);
  limb(kLShoulder, kLElbow, 2, kArmR, 0.0, 0.5);
  limb(kLElbow, kLWrist, 2, kArmR, 0.5, 1.0);
  limb(kRShoulder, kRElbow, 2, kArmR, 0.0, 0.5);
  limb(kRElbow, kRWrist, 2, kArmR, 0.5, 1.0);
  detail::draw_capsule(img, j[kHead].x, j[kHead].y, j[kHead].x, j[kHead].y, kHeadR * fh,
                       [&](double) { return look.base[0]; });

  // mild per-camera illumination difference
  if (sample.camera > 0) {
    const double gain = 1.0 - 0.06 * static_cast<double>(sample.camera);
    for (auto& v : img.values()) v *= gain;
  }

  sample.image = std::move(img);
  sample.maps = make_response_maps(detected, spec.img_h, spec.img_w, spec.heat_sigma);
  return sample;
}

inline std::vector<SynthSample> generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t total = spec.identities * spec.images_per_identity;
  std::vector<SynthSample> out(total);
  parallel_for(total, [&](std::size_t i) {
    const int identity = static_cast<int>(i / spec.images_per_identity);
    const int image_index = static_cast<int>(i % spec.images_per_identity);
    out[i] = render_sample(spec, identity, image_index);
  });
  return out;
}

}  // namespace pdc
