#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pdc/fwn.hpp"
#include "pdc/model.hpp"
#include "pdc/nn.hpp"
#include "pdc/ptn.hpp"
#include "pdc/rng.hpp"
#include "pdc/synth.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// Analytic-vs-numeric gradient verification. Gradients are compared with
// central finite differences; the error metric is
//   |analytic - numeric| / max(1, |analytic|, |numeric|)
// i.e. relative for large gradients and absolute near zero.

inline constexpr double kGradCheckEps = 1e-5;

struct GradCheckRow {
  std::string component;
  double max_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

namespace graddetail {

inline double err_metric(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Central finite difference of `loss` w.r.t. one scalar slot.
inline double central_diff(double& slot, const std::function<double()>& loss,
                           double eps = kGradCheckEps) {
  const double saved = slot;
  slot = saved + eps;
  const double up = loss();
  slot = saved - eps;
  const double down = loss();
  slot = saved;
  return (up - down) / (2.0 * eps);
}

// Max error between an analytic gradient tensor and finite differences over
// every scalar of `values`.
inline double check_tensor(Tensor& values, const Tensor& analytic,
                           const std::function<double()>& loss, double eps = kGradCheckEps) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.numel(); ++i) {
    const double numeric = central_diff(values[i], loss, eps);
    worst = std::max(worst, err_metric(analytic[i], numeric));
  }
  return worst;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Random input kept away from zero, for layers with kinks at the origin.
inline Tensor random_tensor_off_zero(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) {
    double u = rng.uniform(-1.0, 1.0);
    if (std::abs(u) < 0.05) u += u >= 0.0 ? 0.1 : -0.1;
    v = u;
  }
  return t;
}

// Checks d(sum(R . layer(x)))/dx and the same for every parameter.
inline double check_layer(Layer& layer, Tensor x, Rng& rng) {
  Tensor probe;
  const auto loss = [&]() {
    const Tensor y = layer.forward(x, true);
    if (probe.numel() == 0) probe = random_tensor(y.shape(), rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += probe[i] * y[i];
    return acc;
  };
  loss();  // fixes the probe and primes the caches
  for (Param* p : layer.params()) p->grad.fill(0.0);
  const Tensor grad_in = layer.backward(probe);
  std::vector<Tensor> param_grads;
  for (Param* p : layer.params()) param_grads.push_back(p->grad);

  double worst = check_tensor(x, grad_in, loss);
  std::size_t pi = 0;
  for (Param* p : layer.params()) {
    worst = std::max(worst, check_tensor(p->value, param_grads[pi++], loss));
  }
  return worst;
}

}  // namespace graddetail

// --- tensor-nn layers -------------------------------------------------------

inline std::vector<GradCheckRow> gradcheck_layers(std::uint64_t seed) {
  using namespace graddetail;
  Rng rng(Rng::mix(seed, 0x6AD5ULL));
  std::vector<GradCheckRow> rows;
  auto add = [&](const std::string& name, double err, double threshold) {
    rows.push_back({name, err, threshold, err < threshold});
  };

  {
    Conv2d conv("conv", 2, 3, 3, 2, 1, rng);
    add("conv2d", check_layer(conv, random_tensor({2, 2, 6, 5}, rng), rng), 1e-4);
  }
  {
    ReLU relu("relu");
    add("relu", check_layer(relu, random_tensor_off_zero({2, 3, 4, 4}, rng), rng), 1e-6);
  }
  {
    BatchNorm2d bn("bn", 3);
    add("batchnorm2d", check_layer(bn, random_tensor({3, 3, 4, 4}, rng), rng), 1e-4);
  }
  {
    MaxPool2d pool("maxpool", 2, 2);
    add("maxpool2d", check_layer(pool, random_tensor({2, 2, 6, 6}, rng), rng), 1e-4);
  }
  {
    AvgPool2d pool("avgpool", 3, 2, 1);
    add("avgpool2d", check_layer(pool, random_tensor({2, 2, 6, 6}, rng), rng), 1e-4);
  }
  {
    GlobalAvgPool gap("gap");
    add("global_avg_pool", check_layer(gap, random_tensor({2, 4, 5, 3}, rng), rng), 1e-4);
  }
  {
    Dense dense("dense", 7, 4, rng);
    add("dense", check_layer(dense, random_tensor({3, 7}, rng), rng), 1e-4);
  }
  {
    Tensor logits = random_tensor({4, 7}, rng, -2.0, 2.0);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.below(7)));
    const auto loss = [&]() { return softmax_xent(logits, labels).loss; };
    const Tensor analytic = softmax_xent(logits, labels).grad;
    add("softmax_xent", check_tensor(logits, analytic, loss), 1e-6);
  }
  return rows;
}

// --- FWN ---------------------------------------------------------------------

inline std::vector<GradCheckRow> gradcheck_fwn(std::uint64_t seed, int instances = 100) {
  using namespace graddetail;
  Rng rng(Rng::mix(seed, 0xF37ULL));
  const std::size_t m = 8, n = 8;
  double worst = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    const int k = inst % 5;
    Fwn fwn(n, FwnConfig{k});
    for (Param* p : fwn.params()) {
      for (auto& v : p->value.values()) v += rng.normal(0.0, 0.3);
    }
    Tensor f_global = random_tensor({2, m}, rng);
    Tensor f_part = random_tensor({2, n}, rng);
    Tensor probe;
    const auto loss = [&]() {
      const Tensor fused = fwn.fuse(f_global, f_part);
      if (probe.numel() == 0) probe = random_tensor(fused.shape(), rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < fused.numel(); ++i) acc += probe[i] * fused[i];
      return acc;
    };
    loss();
    for (Param* p : fwn.params()) p->grad.fill(0.0);
    Fwn::Grads g = fwn.backward(probe, m);
    std::vector<Tensor> param_grads;
    for (Param* p : fwn.params()) param_grads.push_back(p->grad);

    worst = std::max(worst, check_tensor(f_global, g.d_global, loss));
    worst = std::max(worst, check_tensor(f_part, g.d_part, loss));
    std::size_t pi = 0;
    for (Param* p : fwn.params()) {
      worst = std::max(worst, check_tensor(p->value, param_grads[pi++], loss));
    }
  }
  return {{"fwn (" + std::to_string(instances) + " instances, k cycling 0..4)", worst, 1e-8,
           worst < 1e-8}};
}

// --- PTN sampler --------------------------------------------------------------

inline std::vector<GradCheckRow> gradcheck_ptn(std::uint64_t seed) {
  using namespace graddetail;
  Rng rng(Rng::mix(seed, 0x97BULL));
  double worst_theta = 0.0, worst_input = 0.0;
  for (int inst = 0; inst < 8; ++inst) {
    Tensor input = random_tensor({2, 6, 5}, rng);
    // random theta near identity, offset so no grid point sits on an integer
    AffineParams a = AffineParams::identity();
    for (auto& t : a.theta) t += rng.normal(0.0, 0.08);
    a.theta[2] += 0.013;
    a.theta[5] += 0.017;
    const std::size_t oh = 5, ow = 4;
    Tensor probe;
    const auto loss = [&]() {
      const Tensor grid = affine_grid(a, oh, ow);
      const Tensor out = bilinear_sample(input, grid);
      if (probe.numel() == 0) probe = random_tensor(out.shape(), rng);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.numel(); ++i) acc += probe[i] * out[i];
      return acc;
    };
    loss();
    const Tensor grid = affine_grid(a, oh, ow);
    SampleGrads g = bilinear_sample_backward(input, grid, probe);
    const std::array<double, 6> d_theta = affine_grid_backward(g.d_grid);

    for (std::size_t t = 0; t < 6; ++t) {
      const double numeric = central_diff(a.theta[t], loss);
      worst_theta = std::max(worst_theta, err_metric(d_theta[t], numeric));
    }
    worst_input = std::max(worst_input, check_tensor(input, g.d_input, loss));
  }
  return {{"ptn sampler d/d theta", worst_theta, 1e-4, worst_theta < 1e-4},
          {"ptn sampler d/d input", worst_input, 1e-4, worst_input < 1e-4}};
}

// --- end-to-end tiny model ------------------------------------------------------

inline std::vector<GradCheckRow> gradcheck_e2e(std::uint64_t seed) {
  using namespace graddetail;
  Rng rng(Rng::mix(seed, 0xE2EULL));

  ModelConfig mc;
  mc.input_h = 16;
  mc.input_w = 12;
  mc.classes = 4;
  mc.variant = Variant::FullPDC;
  mc.backbone = Backbone::Tiny;
  mc.trunk_c3 = 6;
  mc.branch_c = 8;
  mc.ptn_c1 = 4;
  mc.ptn_c2 = 8;
  mc.fwn_k = 1;
  mc.seed = seed;
  PdcModel model(mc);

  // nudge every parameter off its init so ReLU and bilinear kinks (identity
  // theta lands exactly on grid points) do not sit under the probe
  for (Param* p : model.params()) {
    for (auto& v : p->value.values()) v += rng.normal(0.0, 0.01);
  }

  SynthSpec spec;
  spec.identities = 2;
  spec.images_per_identity = 1;
  spec.img_h = 16;
  spec.img_w = 12;
  spec.heat_sigma = 1.0;
  spec.limb_jitter_deg = 10.0;
  spec.scale_jitter = 0.02;
  spec.shift_jitter = 0.0;
  spec.seed = seed;
  const auto samples = generate(spec);

  Batch batch;
  batch.images = Tensor({2, 3, 16, 12});
  for (std::size_t i = 0; i < 2; ++i) {
    detail::paste_sample(batch.images, i, samples[i].image);
    batch.maps.push_back(samples[i].maps);
    batch.labels.push_back(static_cast<int>(i));
  }

  const auto loss = [&]() {
    ForwardResult r = model.forward(batch, true);
    return softmax_xent(r.global_logits, batch.labels).loss +
           softmax_xent(r.part_logits, batch.labels).loss;
  };

  auto params = model.params();
  model.backprop(batch);
  std::vector<Tensor> analytic;
  for (Param* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  std::size_t pi = 0;
  for (Param* p : params) {
    worst = std::max(worst, check_tensor(p->value, analytic[pi++], loss));
  }
  return {{"end-to-end tiny model (all parameters)", worst, 1e-3, worst < 1e-3}};
}

inline std::vector<GradCheckRow> gradcheck_scope(const std::string& scope, std::uint64_t seed) {
  std::vector<GradCheckRow> rows;
  auto append = [&](std::vector<GradCheckRow> more) {
    for (auto& r : more) rows.push_back(std::move(r));
  };
  if (scope == "layers" || scope == "all") append(gradcheck_layers(seed));
  if (scope == "fwn" || scope == "all") append(gradcheck_fwn(seed));
  if (scope == "ptn" || scope == "all") append(gradcheck_ptn(seed));
  if (scope == "e2e" || scope == "all") append(gradcheck_e2e(seed));
  if (rows.empty()) throw config_error("gradcheck: unknown scope '" + scope +
                                       "' (use fwn, ptn, layers, e2e, or all)");
  return rows;
}

}  // namespace pdc
