#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "pdc/fen.hpp"
#include "pdc/nn.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// Six-parameter affine transform mapping normalized target coordinates to
// normalized source coordinates:
//   (x_s, y_s) = [ t1 t2 t3 ; t4 t5 t6 ] * (x_t, y_t, 1)
// Coordinates use the align-corners convention: pixel centers span [-1,1]
// with the extreme lattice points exactly at -1 and 1.
struct AffineParams {
  std::array<double, 6> theta{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineParams identity() { return {}; }

  double det() const { return theta[0] * theta[4] - theta[1] * theta[3]; }
};

inline double norm_coord(std::size_t i, std::size_t extent) {
  return extent > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(extent - 1)
                    : 0.0;
}

// Sampling grid of source coordinates, shape [H,W,2] with (x_s, y_s) last.
inline Tensor affine_grid(const AffineParams& a, std::size_t h, std::size_t w) {
  if (h < 2 || w < 2) throw std::invalid_argument("affine_grid: extent must be >= 2");
  Tensor grid({h, w, 2});
  const auto& t = a.theta;
  for (std::size_t y = 0; y < h; ++y) {
    const double yt = norm_coord(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const double xt = norm_coord(x, w);
      grid(y, x, 0) = t[0] * xt + t[1] * yt + t[2];
      grid(y, x, 1) = t[3] * xt + t[4] * yt + t[5];
    }
  }
  return grid;
}

// d(loss)/d(theta) given d(loss)/d(grid), by the chain rule through the
// affine map. grad_grid has shape [H,W,2].
inline std::array<double, 6> affine_grid_backward(const Tensor& grad_grid) {
  require_rank(grad_grid, 3, "affine_grid_backward");
  const std::size_t h = grad_grid.extent(0), w = grad_grid.extent(1);
  std::array<double, 6> gt{};
  for (std::size_t y = 0; y < h; ++y) {
    const double yt = norm_coord(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const double xt = norm_coord(x, w);
      const double gx = grad_grid(y, x, 0);
      const double gy = grad_grid(y, x, 1);
      gt[0] += gx * xt;
      gt[1] += gx * yt;
      gt[2] += gx;
      gt[3] += gy * xt;
      gt[4] += gy * yt;
      gt[5] += gy;
    }
  }
  return gt;
}

// Bilinear sampling of input [C,H,W] at grid [H',W',2] (normalized source
// coordinates). Out-of-bounds taps contribute zero value and zero gradient.
inline Tensor bilinear_sample(const Tensor& input, const Tensor& grid) {
  require_rank(input, 3, "bilinear_sample");
  require_rank(grid, 3, "bilinear_sample grid");
  if (grid.extent(2) != 2) {
    throw std::invalid_argument("bilinear_sample: grid last extent must be 2");
  }
  if (!grid.all_finite()) throw numeric_error("bilinear_sample: non-finite grid");
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t oh = grid.extent(0), ow = grid.extent(1);
  Tensor out({c, oh, ow});
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double fx = (grid(oy, ox, 0) + 1.0) * 0.5 * static_cast<double>(w - 1);
      const double fy = (grid(oy, ox, 1) + 1.0) * 0.5 * static_cast<double>(h - 1);
      for (std::size_t ci = 0; ci < c; ++ci) {
        out(ci, oy, ox) = bilinear_at(input, ci, fx, fy);
      }
    }
  }
  return out;
}

struct SampleGrads {
  Tensor d_input;  // [C,H,W]
  Tensor d_grid;   // [H',W',2]
};

// Backward through bilinear sampling w.r.t. both the input image and the
// grid. The derivative w.r.t. coordinates is the exact piecewise-bilinear
// one (corner differences); at integer crossings the floor-side subgradient
// is used.
inline SampleGrads bilinear_sample_backward(const Tensor& input, const Tensor& grid,
                                            const Tensor& grad_out) {
  const std::size_t c = input.extent(0), h = input.extent(1), w = input.extent(2);
  const std::size_t oh = grid.extent(0), ow = grid.extent(1);
  require_shape(grad_out, {c, oh, ow}, "bilinear_sample_backward");
  SampleGrads g{Tensor(input.shape()), Tensor(grid.shape())};
  const double sx = 0.5 * static_cast<double>(w - 1);
  const double sy = 0.5 * static_cast<double>(h - 1);
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double fx = (grid(oy, ox, 0) + 1.0) * sx;
      const double fy = (grid(oy, ox, 1) + 1.0) * sy;
      const long x0 = static_cast<long>(std::floor(fx));
      const long y0 = static_cast<long>(std::floor(fy));
      const double wx = fx - static_cast<double>(x0);
      const double wy = fy - static_cast<double>(y0);
      double gfx = 0.0, gfy = 0.0;
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double go = grad_out(ci, oy, ox);
        if (go == 0.0) continue;
        // corner values, zero outside
        double v[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
        for (int dy = 0; dy < 2; ++dy) {
          const long yy = y0 + dy;
          if (yy < 0 || yy >= static_cast<long>(h)) continue;
          for (int dx = 0; dx < 2; ++dx) {
            const long xx = x0 + dx;
            if (xx < 0 || xx >= static_cast<long>(w)) continue;
            v[dy][dx] = input(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            const double weight = (dy ? wy : 1.0 - wy) * (dx ? wx : 1.0 - wx);
            g.d_input(ci, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) +=
                go * weight;
          }
        }
        gfx += go * ((1.0 - wy) * (v[0][1] - v[0][0]) + wy * (v[1][1] - v[1][0]));
        gfy += go * ((1.0 - wx) * (v[1][0] - v[0][0]) + wx * (v[1][1] - v[0][1]));
      }
      g.d_grid(oy, ox, 0) = gfx * sx;
      g.d_grid(oy, ox, 1) = gfy * sy;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Per-part localization network: two stride-2 3x3 convolutions with ReLU,
// global average pooling, and a fully connected layer emitting the six
// affine parameters. The final layer starts at zero weights with the
// identity transform as bias, so a fresh PTN is a no-op.
// ---------------------------------------------------------------------------

class PartLocNet {
 public:
  PartLocNet() = default;

  PartLocNet(std::string label, std::size_t in_ch, Rng& rng, std::size_t c1 = 8,
             std::size_t c2 = 16)
      : label_(std::move(label)) {
    conv_.emplace<Conv2d>(label_ + ".conv1", in_ch, c1, 3, 2, 1, rng);
    conv_.emplace<ReLU>(label_ + ".relu1");
    conv_.emplace<Conv2d>(label_ + ".conv2", c1, c2, 3, 2, 1, rng);
    conv_.emplace<ReLU>(label_ + ".relu2");
    conv_.emplace<GlobalAvgPool>(label_ + ".gap");
    Dense& fc = conv_.emplace<Dense>(label_ + ".fc", c2, 6, rng);
    fc.weight().value.fill(0.0);
    const AffineParams id = AffineParams::identity();
    for (std::size_t i = 0; i < 6; ++i) fc.bias().value[i] = id.theta[i];
  }

  // Batch of parts [N,C,h,w] -> theta rows [N,6].
  Tensor forward(const Tensor& parts, bool training) { return conv_.forward(parts, training); }

  void backward(const Tensor& grad_theta) { conv_.backward(grad_theta); }

  std::vector<Param*> params() { return conv_.params(); }
  std::vector<Layer*> layers() { return conv_.layers(); }
  const std::string& label() const { return label_; }

 private:
  std::string label_;
  Sequential conv_;
};

// ---------------------------------------------------------------------------
// The five-part transformer bank. The head part has no PTN and passes
// through untouched; the other five parts each get their own localization
// net, sampling grid, and bilinear sampler.
// ---------------------------------------------------------------------------

class PtnBank {
 public:
  // Parts handled by a PTN, in canvas part order (head excluded).
  static constexpr std::array<int, 5> kPtnParts = {kPartUpperBody, kPartLeftArm, kPartRightArm,
                                                   kPartLeftLeg, kPartRightLeg};

  PtnBank() = default;

  PtnBank(const std::string& label, std::size_t in_ch, Rng& rng, std::size_t c1 = 8,
          std::size_t c2 = 16) {
    for (std::size_t i = 0; i < kPtnParts.size(); ++i) {
      nets_[i] = PartLocNet(label + "." + part_name(kPtnParts[i]), in_ch, rng, c1, c2);
    }
  }

  struct ForwardState {
    // per PTN part: inputs, theta rows, grids, outputs
    std::array<Tensor, 5> inputs;   // [N,C,h_p,w_p]
    std::array<Tensor, 5> thetas;   // [N,6]
    std::array<std::vector<Tensor>, 5> grids;    // per sample [h_p,w_p,2]
    std::array<Tensor, 5> outputs;  // [N,C,h_p,w_p]
  };

  // parts[i]: batch [N,C,h_i,w_i] for PTN part index i (order kPtnParts).
  ForwardState forward(const std::array<Tensor, 5>& parts, bool training) {
    ForwardState st;
    for (std::size_t i = 0; i < kPtnParts.size(); ++i) {
      const Tensor& batch = parts[i];
      require_rank(batch, 4, "ptn forward");
      const std::size_t n = batch.extent(0), c = batch.extent(1);
      const std::size_t ph = batch.extent(2), pw = batch.extent(3);
      st.inputs[i] = batch;
      st.thetas[i] = nets_[i].forward(batch, training);
      st.grids[i].resize(n);
      st.outputs[i] = Tensor({n, c, ph, pw});
      for (std::size_t s = 0; s < n; ++s) {
        AffineParams a;
        for (std::size_t t = 0; t < 6; ++t) a.theta[t] = st.thetas[i](s, t);
        st.grids[i][s] = affine_grid(a, ph, pw);
        Tensor one = slice_sample(batch, s);
        Tensor sampled = bilinear_sample(one, st.grids[i][s]);
        for (std::size_t j = 0; j < sampled.numel(); ++j) {
          st.outputs[i][((s * c) * ph * pw) + j] = sampled[j];
        }
      }
    }
    return st;
  }

  // Backward from gradients on the transformed parts. Returns gradients
  // w.r.t. the part inputs (the sampler path only; localization-net input
  // gradients also flow there and are added).
  std::array<Tensor, 5> backward(const ForwardState& st, const std::array<Tensor, 5>& grad_out) {
    std::array<Tensor, 5> grad_in;
    for (std::size_t i = 0; i < kPtnParts.size(); ++i) {
      const Tensor& batch = st.inputs[i];
      const std::size_t n = batch.extent(0), c = batch.extent(1);
      const std::size_t ph = batch.extent(2), pw = batch.extent(3);
      require_shape(grad_out[i], {n, c, ph, pw}, "ptn backward");
      grad_in[i] = Tensor(batch.shape());
      Tensor grad_theta({n, 6});
      for (std::size_t s = 0; s < n; ++s) {
        Tensor one = slice_sample(batch, s);
        Tensor gout = slice_sample(grad_out[i], s);
        SampleGrads sg = bilinear_sample_backward(one, st.grids[i][s], gout);
        const std::array<double, 6> gt = affine_grid_backward(sg.d_grid);
        for (std::size_t t = 0; t < 6; ++t) grad_theta(s, t) = gt[t];
        for (std::size_t j = 0; j < sg.d_input.numel(); ++j) {
          grad_in[i][(s * c * ph * pw) + j] += sg.d_input[j];
        }
      }
      nets_[i].backward(grad_theta);
    }
    return grad_in;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& net : nets_) {
      for (Param* p : net.params()) out.push_back(p);
    }
    return out;
  }

  PartLocNet& net(std::size_t i) { return nets_[i]; }

  static Tensor slice_sample(const Tensor& batch, std::size_t s) {
    const std::size_t c = batch.extent(1), h = batch.extent(2), w = batch.extent(3);
    Tensor out({c, h, w});
    const std::size_t base = s * c * h * w;
    for (std::size_t j = 0; j < out.numel(); ++j) out[j] = batch[base + j];
    return out;
  }

 private:
  std::array<PartLocNet, 5> nets_;
};

}  // namespace pdc
