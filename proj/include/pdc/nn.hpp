#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdc/parallel.hpp"
#include "pdc/rng.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

struct Param {
  std::string name;     // local name, e.g. "weight"; owners prefix it for checkpoints
  Tensor value;
  Tensor grad;
  double lr_mult = 1.0;

  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape());
  }
};

// A layer with explicit forward and backward. backward may only be called
// after a training-mode forward with matching batch shape; it returns
// d(loss)/d(input) and accumulates parameter gradients into Param::grad.
class Layer {
 public:
  explicit Layer(std::string label) : label_(std::move(label)) {}
  virtual ~Layer() = default;

  virtual const char* kind() const = 0;
  const std::string& label() const { return label_; }

  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::vector<Param*> params() { return {}; }
  // Non-learned state that still belongs in checkpoints (BN running stats).
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }

 protected:
  void note_forward(bool training) {
    have_forward_ = true;
    training_forward_ = training;
  }
  void require_backward_ready() const {
    if (!have_forward_ || !training_forward_) {
      throw std::logic_error(label_ + ": backward called without a prior training forward");
    }
  }

  std::string label_;
  bool have_forward_ = false;
  bool training_forward_ = false;
};

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, zero padding).
// ---------------------------------------------------------------------------

class Conv2d final : public Layer {
 public:
  Conv2d(std::string label, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
         std::size_t stride, std::size_t pad, Rng& rng)
      : Layer(std::move(label)),
        in_ch_(in_ch),
        out_ch_(out_ch),
        k_(kernel),
        stride_(stride),
        pad_(pad),
        weight_("weight", Tensor({out_ch, in_ch, kernel, kernel})),
        bias_("bias", Tensor({out_ch})) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_ch * kernel * kernel));
    for (auto& v : weight_.value.values()) v = rng.normal(0.0, std);
  }

  const char* kind() const override { return "conv2d"; }

  // Valid output range [lo, hi) along one axis for a kernel tap with input
  // offset t: every o in it satisfies 0 <= o*stride + t < extent.
  struct TapRange {
    std::size_t lo, hi;
  };
  TapRange tap_range(long t, std::size_t extent, std::size_t out_extent) const {
    const long s = static_cast<long>(stride_);
    long lo = t < 0 ? (-t + s - 1) / s : 0;
    long hi = (static_cast<long>(extent) - 1 - t) / s + 1;
    lo = std::max(0L, lo);
    hi = std::min(static_cast<long>(out_extent), hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi))};
  }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 4, "conv2d");
    if (x.extent(1) != in_ch_) {
      throw std::invalid_argument(label_ + ": expected " + std::to_string(in_ch_) +
                                  " input channels, got " + x.shape_str());
    }
    const std::size_t n = x.extent(0), h = x.extent(2), w = x.extent(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
      throw std::invalid_argument(label_ + ": kernel " + std::to_string(k_) +
                                  " larger than padded input " + x.shape_str());
    }
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    Tensor y({n, out_ch_, oh, ow});
    const double* wt = weight_.value.data();
    const double* bias = bias_.value.data();
    parallel_for(n, [&](std::size_t ni) {
      const double* xs = x.data() + ni * in_ch_ * h * w;
      double* ys = y.data() + ni * out_ch_ * oh * ow;
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        double* yplane = ys + oc * oh * ow;
        std::fill(yplane, yplane + oh * ow, bias[oc]);
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* xplane = xs + ic * h * w;
          const double* wrow = wt + (oc * in_ch_ + ic) * k_ * k_;
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const long ty = static_cast<long>(ky) - static_cast<long>(pad_);
            const TapRange ry = tap_range(ty, h, oh);
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const double wv = wrow[ky * k_ + kx];
              if (wv == 0.0) continue;
              const long tx = static_cast<long>(kx) - static_cast<long>(pad_);
              const TapRange rx = tap_range(tx, w, ow);
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                const double* xrow = xplane + static_cast<std::size_t>(
                                                  static_cast<long>(oy * stride_) + ty) * w;
                double* yrow = yplane + oy * ow;
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                  yrow[ox] += wv * xrow[static_cast<std::size_t>(
                                  static_cast<long>(ox * stride_) + tx)];
                }
              }
            }
          }
        }
      }
    });
    input_ = x;
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    const Tensor& x = input_;
    const std::size_t n = x.extent(0), h = x.extent(2), w = x.extent(3);
    const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
    require_shape(grad_out, {n, out_ch_, oh, ow}, "conv2d backward");
    Tensor gx(x.shape());
    const double* wt = weight_.value.data();

    // d/d input: each worker owns one sample, writes are disjoint.
    parallel_for(n, [&](std::size_t ni) {
      const double* gs = grad_out.data() + ni * out_ch_ * oh * ow;
      double* gxs = gx.data() + ni * in_ch_ * h * w;
      for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        const double* gplane = gs + oc * oh * ow;
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          double* gxplane = gxs + ic * h * w;
          const double* wrow = wt + (oc * in_ch_ + ic) * k_ * k_;
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const long ty = static_cast<long>(ky) - static_cast<long>(pad_);
            const TapRange ry = tap_range(ty, h, oh);
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const double wv = wrow[ky * k_ + kx];
              if (wv == 0.0) continue;
              const long tx = static_cast<long>(kx) - static_cast<long>(pad_);
              const TapRange rx = tap_range(tx, w, ow);
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                double* gxrow = gxplane + static_cast<std::size_t>(
                                              static_cast<long>(oy * stride_) + ty) * w;
                const double* grow = gplane + oy * ow;
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                  gxrow[static_cast<std::size_t>(static_cast<long>(ox * stride_) + tx)] +=
                      wv * grow[ox];
                }
              }
            }
          }
        }
      }
    });

    // d/d weight: each worker owns one output channel; the batch loop runs in
    // fixed order inside, keeping the reduction deterministic.
    Tensor& gw = weight_.grad;
    Tensor& gb = bias_.grad;
    parallel_for(out_ch_, [&](std::size_t oc) {
      for (std::size_t ni = 0; ni < n; ++ni) {
        const double* gplane = grad_out.data() + (ni * out_ch_ + oc) * oh * ow;
        double bias_acc = 0.0;
        for (std::size_t i = 0; i < oh * ow; ++i) bias_acc += gplane[i];
        gb[oc] += bias_acc;
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          const double* xplane = x.data() + (ni * in_ch_ + ic) * h * w;
          double* gwrow = gw.data() + (oc * in_ch_ + ic) * k_ * k_;
          for (std::size_t ky = 0; ky < k_; ++ky) {
            const long ty = static_cast<long>(ky) - static_cast<long>(pad_);
            const TapRange ry = tap_range(ty, h, oh);
            for (std::size_t kx = 0; kx < k_; ++kx) {
              const long tx = static_cast<long>(kx) - static_cast<long>(pad_);
              const TapRange rx = tap_range(tx, w, ow);
              double acc = 0.0;
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                const double* xrow = xplane + static_cast<std::size_t>(
                                                  static_cast<long>(oy * stride_) + ty) * w;
                const double* grow = gplane + oy * ow;
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                  acc += grow[ox] * xrow[static_cast<std::size_t>(
                             static_cast<long>(ox * stride_) + tx)];
                }
              }
              gwrow[ky * k_ + kx] += acc;
            }
          }
        }
      }
    });
    return gx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  std::size_t out_channels() const { return out_ch_; }

 private:
  std::size_t in_ch_, out_ch_, k_, stride_, pad_;
  Param weight_, bias_;
  Tensor input_;
};

// ---------------------------------------------------------------------------
// ReLU.
// ---------------------------------------------------------------------------

class ReLU final : public Layer {
 public:
  explicit ReLU(std::string label) : Layer(std::move(label)) {}
  const char* kind() const override { return "relu"; }

  Tensor forward(const Tensor& x, bool training) override {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    input_ = x;
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    require_same_shape(grad_out, input_, "relu backward");
    Tensor gx(input_.shape());
    for (std::size_t i = 0; i < input_.numel(); ++i) {
      gx[i] = input_[i] > 0.0 ? grad_out[i] : 0.0;
    }
    return gx;
  }

 private:
  Tensor input_;
};

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel. Per-batch statistics when
// training, running averages (momentum 0.9) at inference; eps = 1e-5.
// ---------------------------------------------------------------------------

class BatchNorm2d final : public Layer {
 public:
  BatchNorm2d(std::string label, std::size_t channels)
      : Layer(std::move(label)),
        channels_(channels),
        gamma_("gamma", Tensor::full({channels}, 1.0)),
        beta_("beta", Tensor({channels})),
        running_mean_({channels}),
        running_var_(Tensor::full({channels}, 1.0)) {}

  const char* kind() const override { return "batchnorm2d"; }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 4, "batchnorm2d");
    if (x.extent(1) != channels_) {
      throw std::invalid_argument(label_ + ": expected " + std::to_string(channels_) +
                                  " channels, got " + x.shape_str());
    }
    const std::size_t n = x.extent(0), h = x.extent(2), w = x.extent(3);
    const double m = static_cast<double>(n * h * w);
    Tensor y(x.shape());
    if (training) {
      mean_ = Tensor({channels_});
      inv_std_ = Tensor({channels_});
      xhat_ = Tensor(x.shape());
      for (std::size_t c = 0; c < channels_; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t ni = 0; ni < n; ++ni)
          for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
              const double v = x(ni, c, yy, xx);
              sum += v;
              sq += v * v;
            }
        const double mu = sum / m;
        const double var = std::max(0.0, sq / m - mu * mu);
        mean_[c] = mu;
        inv_std_[c] = 1.0 / std::sqrt(var + kEps);
        running_mean_[c] = kMomentum * running_mean_[c] + (1.0 - kMomentum) * mu;
        running_var_[c] = kMomentum * running_var_[c] + (1.0 - kMomentum) * var;
        for (std::size_t ni = 0; ni < n; ++ni)
          for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
              const double xh = (x(ni, c, yy, xx) - mu) * inv_std_[c];
              xhat_(ni, c, yy, xx) = xh;
              y(ni, c, yy, xx) = gamma_.value[c] * xh + beta_.value[c];
            }
      }
    } else {
      for (std::size_t c = 0; c < channels_; ++c) {
        const double scale = gamma_.value[c] / std::sqrt(running_var_[c] + kEps);
        const double shift = beta_.value[c] - scale * running_mean_[c];
        for (std::size_t ni = 0; ni < n; ++ni)
          for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
              y(ni, c, yy, xx) = scale * x(ni, c, yy, xx) + shift;
            }
      }
    }
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    require_same_shape(grad_out, xhat_, "batchnorm2d backward");
    const std::size_t n = xhat_.extent(0), h = xhat_.extent(2), w = xhat_.extent(3);
    const double m = static_cast<double>(n * h * w);
    Tensor gx(xhat_.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx) {
            const double dy = grad_out(ni, c, yy, xx);
            sum_dy += dy;
            sum_dy_xhat += dy * xhat_(ni, c, yy, xx);
          }
      gamma_.grad[c] += sum_dy_xhat;
      beta_.grad[c] += sum_dy;
      const double scale = gamma_.value[c] * inv_std_[c];
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx) {
            const double dy = grad_out(ni, c, yy, xx);
            gx(ni, c, yy, xx) =
                scale * (dy - sum_dy / m - xhat_(ni, c, yy, xx) * sum_dy_xhat / m);
          }
    }
    return gx;
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }

  std::vector<std::pair<std::string, Tensor*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}};
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;

 private:
  std::size_t channels_;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  Tensor mean_, inv_std_, xhat_;
};

// ---------------------------------------------------------------------------
// Max pooling. Ties route the gradient to the first maximal element.
// ---------------------------------------------------------------------------

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(std::string label, std::size_t kernel, std::size_t stride, std::size_t pad = 0)
      : Layer(std::move(label)), k_(kernel), stride_(stride), pad_(pad) {}

  const char* kind() const override { return "maxpool2d"; }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 4, "maxpool2d");
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
      throw std::invalid_argument(label_ + ": window larger than padded input " + x.shape_str());
    }
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    Tensor y({n, c, oh, ow});
    argmax_.assign(n * c * oh * ow, 0);
    in_shape_ = x.shape();
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_idx = 0;
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                const double v = x(ni, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                if (v > best) {
                  best = v;
                  best_idx = (static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
                }
              }
            }
            y(ni, ci, oy, ox) = best;
            argmax_[((ni * c + ci) * oh + oy) * ow + ox] = best_idx;
          }
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    const std::size_t n = in_shape_[0], c = in_shape_[1], w = in_shape_[3];
    const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
    require_shape(grad_out, {n, c, oh, ow}, "maxpool2d backward");
    Tensor gx(in_shape_);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::size_t idx = argmax_[((ni * c + ci) * oh + oy) * ow + ox];
            gx(ni, ci, idx / w, idx % w) += grad_out(ni, ci, oy, ox);
          }
    return gx;
  }

 private:
  std::size_t k_, stride_, pad_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Average pooling (window divisor is always k*k; zero padding counts as zero).
// ---------------------------------------------------------------------------

class AvgPool2d final : public Layer {
 public:
  AvgPool2d(std::string label, std::size_t kernel, std::size_t stride, std::size_t pad = 0)
      : Layer(std::move(label)), k_(kernel), stride_(stride), pad_(pad) {}

  const char* kind() const override { return "avgpool2d"; }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 4, "avgpool2d");
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
      throw std::invalid_argument(label_ + ": window larger than padded input " + x.shape_str());
    }
    const std::size_t oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t ow = (w + 2 * pad_ - k_) / stride_ + 1;
    const double inv = 1.0 / static_cast<double>(k_ * k_);
    Tensor y({n, c, oh, ow});
    in_shape_ = x.shape();
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                acc += x(ni, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
            y(ni, ci, oy, ox) = acc * inv;
          }
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
    require_shape(grad_out, {n, c, oh, ow}, "avgpool2d backward");
    const double inv = 1.0 / static_cast<double>(k_ * k_);
    Tensor gx(in_shape_);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double g = grad_out(ni, ci, oy, ox) * inv;
            for (std::size_t ky = 0; ky < k_; ++ky) {
              const long iy = static_cast<long>(oy * stride_ + ky) - static_cast<long>(pad_);
              if (iy < 0 || iy >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < k_; ++kx) {
                const long ix = static_cast<long>(ox * stride_ + kx) - static_cast<long>(pad_);
                if (ix < 0 || ix >= static_cast<long>(w)) continue;
                gx(ni, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += g;
              }
            }
          }
    return gx;
  }

 private:
  std::size_t k_, stride_, pad_;
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Global average pooling: [N,C,H,W] -> [N,C].
// ---------------------------------------------------------------------------

class GlobalAvgPool final : public Layer {
 public:
  explicit GlobalAvgPool(std::string label) : Layer(std::move(label)) {}
  const char* kind() const override { return "global_avg_pool"; }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    Tensor y({n, c});
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx) acc += x(ni, ci, yy, xx);
        y(ni, ci) = acc * inv;
      }
    in_shape_ = x.shape();
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    require_shape(grad_out, {n, c}, "global_avg_pool backward");
    const double inv = 1.0 / static_cast<double>(h * w);
    Tensor gx(in_shape_);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double g = grad_out(ni, ci) * inv;
        for (std::size_t yy = 0; yy < h; ++yy)
          for (std::size_t xx = 0; xx < w; ++xx) gx(ni, ci, yy, xx) = g;
      }
    return gx;
  }

 private:
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Fully connected: [N,in] -> [N,out].
// ---------------------------------------------------------------------------

class Dense final : public Layer {
 public:
  Dense(std::string label, std::size_t in_dim, std::size_t out_dim, Rng& rng)
      : Layer(std::move(label)),
        in_(in_dim),
        out_(out_dim),
        weight_("weight", Tensor({out_dim, in_dim})),
        bias_("bias", Tensor({out_dim})) {
    const double std = std::sqrt(2.0 / static_cast<double>(in_dim));
    for (auto& v : weight_.value.values()) v = rng.normal(0.0, std);
  }

  const char* kind() const override { return "dense"; }

  Tensor forward(const Tensor& x, bool training) override {
    require_rank(x, 2, "dense");
    if (x.extent(1) != in_) {
      throw std::invalid_argument(label_ + ": expected input dim " + std::to_string(in_) +
                                  ", got " + x.shape_str());
    }
    const std::size_t n = x.extent(0);
    Tensor y({n, out_});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t o = 0; o < out_; ++o) {
        double acc = bias_.value[o];
        for (std::size_t i = 0; i < in_; ++i) acc += weight_.value(o, i) * x(ni, i);
        y(ni, o) = acc;
      }
    input_ = x;
    note_forward(training);
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require_backward_ready();
    const std::size_t n = input_.extent(0);
    require_shape(grad_out, {n, out_}, "dense backward");
    Tensor gx({n, in_});
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t o = 0; o < out_; ++o) {
        const double g = grad_out(ni, o);
        bias_.grad[o] += g;
        for (std::size_t i = 0; i < in_; ++i) {
          weight_.grad(o, i) += g * input_(ni, i);
          gx(ni, i) += g * weight_.value(o, i);
        }
      }
    return gx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Param weight_, bias_;
  Tensor input_;
};

// ---------------------------------------------------------------------------
// Softmax cross-entropy over [N,K] logits with integer class labels.
// Numerically stable (max-shifted). grad = (softmax - onehot) / N.
// ---------------------------------------------------------------------------

struct SoftmaxXent {
  double loss;
  Tensor grad;
};

inline SoftmaxXent softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_xent");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  if (labels.size() != n) {
    throw std::invalid_argument("softmax_xent: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(n));
  }
  Tensor grad({n, k});
  double loss = 0.0;
  for (std::size_t ni = 0; ni < n; ++ni) {
    const int label = labels[ni];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::out_of_range("softmax_xent: label " + std::to_string(label) +
                              " outside [0," + std::to_string(k) + ")");
    }
    double mx = logits(ni, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(ni, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits(ni, j) - mx);
    const double logz = std::log(z) + mx;
    loss += logz - logits(ni, static_cast<std::size_t>(label));
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(logits(ni, j) - logz);
      grad(ni, j) = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
                    static_cast<double>(n);
    }
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

// ---------------------------------------------------------------------------
// SGD with momentum and step learning-rate decay:
//   lr(iter) = base_lr * decay_factor^floor(iter / decay_interval)
// scaled per parameter by Param::lr_mult. Update: v = mu*v - lr*g; p += v.
// ---------------------------------------------------------------------------

struct SgdConfig {
  double base_lr = 0.01;
  double decay_factor = 0.1;
  long decay_interval = 20000;
  double momentum = 0.9;

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("sgd: base_lr must be > 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
      throw std::invalid_argument("sgd: decay_factor must be in (0,1]");
    }
    if (decay_interval <= 0) throw std::invalid_argument("sgd: decay_interval must be > 0");
    if (momentum < 0.0) throw std::invalid_argument("sgd: momentum must be >= 0");
  }
};

inline double sgd_lr_at(const SgdConfig& cfg, long iteration) {
  return cfg.base_lr * std::pow(cfg.decay_factor, static_cast<double>(iteration / cfg.decay_interval));
}

class Sgd {
 public:
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const SgdConfig& config() const { return cfg_; }

  void step(const std::vector<Param*>& params, long iteration) {
    const double lr = sgd_lr_at(cfg_, iteration);
    for (Param* p : params) {
      require_same_shape(p->value, p->grad, "sgd step");
      Tensor& v = velocity(p);
      const double lr_eff = lr * p->lr_mult;
      for (std::size_t i = 0; i < p->value.numel(); ++i) {
        v[i] = cfg_.momentum * v[i] - lr_eff * p->grad[i];
        p->value[i] += v[i];
      }
    }
  }

  static void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->grad.fill(0.0);
  }

  Tensor& velocity(Param* p) {
    auto it = velocity_.find(p);
    if (it == velocity_.end()) {
      it = velocity_.emplace(p, Tensor(p->value.shape())).first;
    }
    return it->second;
  }

 private:
  SgdConfig cfg_;
  std::unordered_map<Param*, Tensor> velocity_;
};

// ---------------------------------------------------------------------------
// A named chain of layers.
// ---------------------------------------------------------------------------

class Sequential {
 public:
  template <class L, class... Args>
  L& emplace(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return static_cast<L&>(*layers_.back());
  }

  Tensor forward(const Tensor& x, bool training) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, training);
    return cur;
  }

  Tensor backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      cur = (*it)->backward(cur);
    }
    return cur;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& layer : layers_) {
      for (Param* p : layer->params()) out.push_back(p);
    }
    return out;
  }

  std::vector<Layer*> layers() {
    std::vector<Layer*> out;
    out.reserve(layers_.size());
    for (auto& layer : layers_) out.push_back(layer.get());
    return out;
  }

  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace pdc
