#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "pdc/errors.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// The 14 body joints, in the standard order: head, neck, right shoulder,
// right elbow, right wrist, left shoulder, left elbow, left wrist, left hip,
// left knee, left ankle, right hip, right knee, right ankle.
inline constexpr std::size_t kNumJoints = 14;

enum JointId : int {
  kHead = 0, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
  kLHip, kLKnee, kLAnkle, kRHip, kRKnee, kRAnkle,
};

inline const char* joint_name(int j) {
  static const char* names[kNumJoints] = {
      "head", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow",
      "l_wrist", "l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle"};
  return names[j];
}

struct Joint {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

struct JointSet {
  std::array<Joint, kNumJoints> joints;
};

// 14 per-joint response heatmaps, each [H,W], non-negative.
struct ResponseMapSet {
  std::vector<Tensor> maps;   // kNumJoints tensors of shape [height, width]
  std::size_t height = 0;
  std::size_t width = 0;

  void validate() const {
    if (maps.size() != kNumJoints) {
      throw std::invalid_argument("ResponseMapSet: expected 14 maps, got " +
                                  std::to_string(maps.size()));
    }
    for (const Tensor& m : maps) {
      require_shape(m, {height, width}, "ResponseMapSet");
    }
  }
};

// Joint localization: J_i is the intensity-weighted centroid of map V_i.
inline JointSet localize_joints(const ResponseMapSet& maps) {
  maps.validate();
  JointSet out;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const Tensor& v = maps.maps[j];
    double mass = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t y = 0; y < maps.height; ++y) {
      for (std::size_t x = 0; x < maps.width; ++x) {
        const double w = v(y, x);
        mass += w;
        mx += w * static_cast<double>(x);
        my += w * static_cast<double>(y);
      }
    }
    if (!(mass > 0.0)) {
      throw numeric_error("localize_joints: response map for joint " + std::to_string(j + 1) +
                          " (" + joint_name(static_cast<int>(j)) + ") has no mass");
    }
    out.joints[j] = {mx / mass, my / mass};
  }
  return out;
}

// The six body parts as joint-index sets (1-based indices as in the part
// definitions; stored 0-based here): head, upper body, left arm, right arm,
// left leg, right leg.
enum PartId : int {
  kPartHead = 0, kPartUpperBody, kPartLeftArm, kPartRightArm, kPartLeftLeg, kPartRightLeg,
};
inline constexpr std::size_t kNumParts = 6;

inline const char* part_name(int p) {
  static const char* names[kNumParts] = {"head", "upperbody", "larm", "rarm", "lleg", "rleg"};
  return names[p];
}

inline const std::array<std::vector<int>, kNumParts>& part_members() {
  static const std::array<std::vector<int>, kNumParts> parts = {{
      {kHead},
      {kNeck, kRShoulder, kLShoulder, kLHip, kRHip},
      {kLShoulder, kLElbow, kLWrist},
      {kRShoulder, kRElbow, kRWrist},
      {kLHip, kLKnee, kLAnkle},
      {kRHip, kRKnee, kRAnkle},
  }};
  return parts;
}

struct Box {
  double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
};

struct PartBox {
  Box box;
  double angle = 0.0;  // radians between the part axis and the vertical, see below
};

struct PartBoxSet {
  std::array<PartBox, kNumParts> parts;
};

// Margins are defined at the 512x256 (HxW) reference resolution and scale
// linearly with the configured image size.
inline constexpr double kRefHeight = 512.0;
inline constexpr double kRefWidth = 256.0;
inline constexpr double kHeadMargin = 30.0;
inline constexpr double kLimbMargin = 10.0;

// Angle between the part's first-to-last member-joint vector and the vertical
// (downward) axis. Rotating the crop by minus this angle makes the part
// vertical. Head angle is fixed at zero.
inline double part_angle(const JointSet& joints, int part) {
  if (part == kPartHead) return 0.0;
  const auto& members = part_members()[static_cast<std::size_t>(part)];
  const Joint& a = joints.joints[static_cast<std::size_t>(members.front())];
  const Joint& b = joints.joints[static_cast<std::size_t>(members.back())];
  const double vx = b.x - a.x, vy = b.y - a.y;
  if (vx == 0.0 && vy == 0.0) return 0.0;
  return std::atan2(vx, vy);
}

// Part bounding boxes: the head box is a fixed margin around the head joint;
// the other parts take the min/max of their member joints plus a margin.
// Boxes are clamped to image bounds (pixel centers 0..W-1, 0..H-1).
inline PartBoxSet part_boxes(const JointSet& joints, std::size_t img_w, std::size_t img_h) {
  const double sx = static_cast<double>(img_w) / kRefWidth;
  const double sy = static_cast<double>(img_h) / kRefHeight;
  PartBoxSet out;
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const auto& members = part_members()[p];
    double x_min = joints.joints[static_cast<std::size_t>(members[0])].x;
    double x_max = x_min, y_min = joints.joints[static_cast<std::size_t>(members[0])].y;
    double y_max = y_min;
    for (int j : members) {
      const Joint& q = joints.joints[static_cast<std::size_t>(j)];
      x_min = std::min(x_min, q.x);
      x_max = std::max(x_max, q.x);
      y_min = std::min(y_min, q.y);
      y_max = std::max(y_max, q.y);
    }
    const double margin = (p == kPartHead) ? kHeadMargin : kLimbMargin;
    Box b{x_min - margin * sx, x_max + margin * sx, y_min - margin * sy, y_max + margin * sy};
    b.x_lo = std::max(b.x_lo, 0.0);
    b.y_lo = std::max(b.y_lo, 0.0);
    b.x_hi = std::min(b.x_hi, static_cast<double>(img_w - 1));
    b.y_hi = std::min(b.y_hi, static_cast<double>(img_h - 1));
    if (!(b.x_lo < b.x_hi) || !(b.y_lo < b.y_hi)) {
      throw numeric_error("part_boxes: degenerate box for part " +
                          std::string(part_name(static_cast<int>(p))) + " after clamping");
    }
    out.parts[p] = {b, part_angle(joints, static_cast<int>(p))};
  }
  return out;
}

// Bilinear lookup at a real pixel coordinate with zero fill outside bounds.
inline double bilinear_at(const Tensor& img, std::size_t c, double fx, double fy) {
  const long h = static_cast<long>(img.extent(1)), w = static_cast<long>(img.extent(2));
  const long x0 = static_cast<long>(std::floor(fx));
  const long y0 = static_cast<long>(std::floor(fy));
  const double wx = fx - static_cast<double>(x0);
  const double wy = fy - static_cast<double>(y0);
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    const long yy = y0 + dy;
    if (yy < 0 || yy >= h) continue;
    const double ky = dy ? wy : 1.0 - wy;
    for (int dx = 0; dx < 2; ++dx) {
      const long xx = x0 + dx;
      if (xx < 0 || xx >= w) continue;
      const double kx = dx ? wx : 1.0 - wx;
      acc += ky * kx * img(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
    }
  }
  return acc;
}

// Crop the box, rotate by -angle about the box center, resize to the target
// extent. Implemented as a single bilinear resampling pass; points sampled
// outside the image are zero (black). With angle 0 and a box whose pixel
// extent equals the target extent this is an exact copy.
inline Tensor normalize_part(const Tensor& image, const Box& box, double angle,
                             std::size_t out_h, std::size_t out_w) {
  require_rank(image, 3, "normalize_part");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("normalize_part: empty target");
  const std::size_t channels = image.extent(0);
  const double cx = 0.5 * (box.x_lo + box.x_hi);
  const double cy = 0.5 * (box.y_lo + box.y_hi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double step_x = out_w > 1 ? box.width() / static_cast<double>(out_w - 1) : 0.0;
  const double step_y = out_h > 1 ? box.height() / static_cast<double>(out_h - 1) : 0.0;
  Tensor out({channels, out_h, out_w});
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double tx = box.x_lo + step_x * static_cast<double>(ox) - cx;
      const double ty = box.y_lo + step_y * static_cast<double>(oy) - cy;
      // inverse of the rotation that maps the part axis onto the vertical
      const double sx = cx + ca * tx + sa * ty;
      const double sy = cy - sa * tx + ca * ty;
      for (std::size_t c = 0; c < channels; ++c) {
        out(c, oy, ox) = bilinear_at(image, c, sx, sy);
      }
    }
  }
  return out;
}

// Fixed slot layout for the assembled part canvas (fractions of the canvas):
// head top-left, upper body top-right, arms on the middle-left rows, legs on
// the bottom-right rows. Slots are disjoint; untouched pixels stay black.
struct CanvasLayout {
  struct Slot {
    std::size_t row = 0, col = 0, h = 0, w = 0;
  };
  std::size_t height = 0, width = 0;
  std::array<Slot, kNumParts> slots;

  static CanvasLayout standard(std::size_t h, std::size_t w) {
    if (h % 4 != 0 || w % 4 != 0) {
      throw config_error("canvas extent must be divisible by 4, got " + std::to_string(h) +
                         "x" + std::to_string(w));
    }
    CanvasLayout out;
    out.height = h;
    out.width = w;
    out.slots[kPartHead] = {0, 0, h / 4, w / 2};
    out.slots[kPartUpperBody] = {0, w / 2, h / 2, w / 2};
    out.slots[kPartLeftArm] = {h / 4, 0, h / 2, w / 4};
    out.slots[kPartRightArm] = {h / 4, w / 4, h / 2, w / 4};
    out.slots[kPartLeftLeg] = {h / 2, w / 2, h / 2, w / 4};
    out.slots[kPartRightLeg] = {h / 2, 3 * w / 4, h / 2, w / 4};
    return out;
  }

  void validate() const {
    // slots must be in-bounds and pairwise disjoint
    std::vector<char> hit(height * width, 0);
    for (const Slot& s : slots) {
      if (s.row + s.h > height || s.col + s.w > width) {
        throw config_error("canvas slot out of bounds");
      }
      for (std::size_t y = s.row; y < s.row + s.h; ++y)
        for (std::size_t x = s.col; x < s.col + s.w; ++x) {
          if (hit[y * width + x]) throw config_error("canvas slots overlap");
          hit[y * width + x] = 1;
        }
    }
  }
};

inline Tensor assemble_canvas(const std::array<Tensor, kNumParts>& parts,
                              const CanvasLayout& layout) {
  layout.validate();
  std::size_t channels = parts[0].extent(0);
  Tensor canvas({channels, layout.height, layout.width});
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const CanvasLayout::Slot& s = layout.slots[p];
    require_shape(parts[p], {channels, s.h, s.w}, "assemble_canvas");
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          canvas(c, s.row + y, s.col + x) = parts[p](c, y, x);
        }
  }
  return canvas;
}

inline Tensor extract_slot(const Tensor& canvas, const CanvasLayout::Slot& slot) {
  require_rank(canvas, 3, "extract_slot");
  const std::size_t channels = canvas.extent(0);
  Tensor out({channels, slot.h, slot.w});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < slot.h; ++y)
      for (std::size_t x = 0; x < slot.w; ++x) {
        out(c, y, x) = canvas(c, slot.row + y, slot.col + x);
      }
  return out;
}

// CSV emission for inspection: one row per joint / per part box.
inline std::vector<std::string> joints_csv(const JointSet& joints) {
  std::vector<std::string> lines;
  lines.push_back("joint,x,y");
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f", joint_name(static_cast<int>(j)),
                  joints.joints[j].x, joints.joints[j].y);
    lines.emplace_back(buf);
  }
  return lines;
}

inline std::vector<std::string> boxes_csv(const PartBoxSet& boxes) {
  std::vector<std::string> lines;
  lines.push_back("part,xlo,xhi,ylo,yhi,angle_deg");
  for (std::size_t p = 0; p < kNumParts; ++p) {
    const PartBox& pb = boxes.parts[p];
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.4f",
                  part_name(static_cast<int>(p)), pb.box.x_lo, pb.box.x_hi, pb.box.y_lo,
                  pb.box.y_hi, pb.angle * 180.0 / M_PI);
    lines.emplace_back(buf);
  }
  return lines;
}

}  // namespace pdc
