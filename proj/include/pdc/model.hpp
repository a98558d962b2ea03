#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pdc/dataset.hpp"
#include "pdc/errors.hpp"
#include "pdc/fen.hpp"
#include "pdc/fwn.hpp"
#include "pdc/io.hpp"
#include "pdc/nn.hpp"
#include "pdc/parallel.hpp"
#include "pdc/ptn.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// Pipeline variants: the two streams plus the FEN (pose normalization + PTN)
// and FWN (feature weighting) switches.
enum class Variant { GlobalOnly, PartOnly, GlobalPart, GlobalPartFEN, GlobalPartFWN, FullPDC };

struct VariantFlags {
  bool global_stream = true;
  bool part_stream = true;
  bool fen = false;
  bool fwn = false;
};

inline VariantFlags variant_flags(Variant v) {
  switch (v) {
    case Variant::GlobalOnly:    return {true, false, false, false};
    case Variant::PartOnly:      return {false, true, false, false};
    case Variant::GlobalPart:    return {true, true, false, false};
    case Variant::GlobalPartFEN: return {true, true, true, false};
    case Variant::GlobalPartFWN: return {true, true, false, true};
    case Variant::FullPDC:       return {true, true, true, true};
  }
  throw std::logic_error("unknown variant");
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::GlobalOnly:    return "GlobalOnly";
    case Variant::PartOnly:      return "PartOnly";
    case Variant::GlobalPart:    return "GlobalPart";
    case Variant::GlobalPartFEN: return "GlobalPartFEN";
    case Variant::GlobalPartFWN: return "GlobalPartFWN";
    case Variant::FullPDC:       return "FullPDC";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::GlobalOnly, Variant::PartOnly, Variant::GlobalPart,
                    Variant::GlobalPartFEN, Variant::GlobalPartFWN, Variant::FullPDC}) {
    std::string name = variant_name(v);
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    std::string in = s;
    std::transform(in.begin(), in.end(), in.begin(), ::tolower);
    if (in == lower) return v;
  }
  throw config_error("unknown variant: " + s);
}

// Backbone depth. Standard mirrors the shared-then-split topology at desk
// scale: conv7x7/2 + BN/ReLU + maxpool3/2 + 2x(conv3x3 + BN/ReLU) shared
// trunk, one conv3x3 + BN/ReLU per branch, fully connected heads on pooled
// features. Tiny collapses the trunk and branch to one conv each for cheap
// end-to-end finite-difference checks.
enum class Backbone { Standard, Tiny };

struct ModelConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 32;
  std::size_t classes = 2;
  Variant variant = Variant::FullPDC;
  Backbone backbone = Backbone::Standard;
  int fwn_k = 1;
  double ptn_lr_mult = 0.001;
  std::uint64_t seed = 1;
  std::size_t trunk_c1 = 8, trunk_c2 = 16, trunk_c3 = 16, branch_c = 32;
  std::size_t ptn_c1 = 8, ptn_c2 = 16;

  void validate() const {
    if (input_h % 4 != 0 || input_w % 4 != 0) {
      throw config_error("model: input extent must be divisible by 4, got " +
                         std::to_string(input_h) + "x" + std::to_string(input_w));
    }
    if (classes < 2) throw config_error("model: need at least 2 classes");
    if (ptn_lr_mult < 0.0) throw config_error("model: ptn_lr_mult must be >= 0");
    FwnConfig{fwn_k}.validate();
  }
};

struct Batch {
  Tensor images;                     // [N,3,H,W]
  std::vector<ResponseMapSet> maps;  // one per sample; required for part streams
  std::vector<int> labels;           // training labels; may be empty at inference
};

struct ForwardResult {
  Tensor global_logits;  // [N,K]
  Tensor part_logits;    // [N,K]
  Tensor global_feat;    // [N,m]
  Tensor part_feat;      // [N,n] raw pooled part features
  Tensor part_weighted;  // [N,n] after FWN (equals part_feat when FWN is off)
  Tensor fused;          // retrieval feature per variant
  Tensor canvas;         // [N,3,H,W] assembled part canvases
};

struct StepStats {
  double loss = 0.0, loss_global = 0.0, loss_part = 0.0, lr = 0.0;
};

namespace detail {

inline Tensor slice_sample(const Tensor& batch, std::size_t s) {
  const std::size_t c = batch.extent(1), h = batch.extent(2), w = batch.extent(3);
  Tensor out({c, h, w});
  const std::size_t base = s * out.numel();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = batch[base + i];
  return out;
}

inline void paste_sample(Tensor& batch, std::size_t s, const Tensor& sample) {
  const std::size_t base = s * sample.numel();
  for (std::size_t i = 0; i < sample.numel(); ++i) batch[base + i] = sample[i];
}

inline Tensor concat_batches(const Tensor& a, const Tensor& b) {
  std::vector<std::size_t> shape = a.shape();
  shape[0] += b.extent(0);
  Tensor out(shape);
  std::copy(a.data(), a.data() + a.numel(), out.data());
  std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
  return out;
}

inline Tensor first_half(const Tensor& stacked, std::size_t n) {
  std::vector<std::size_t> shape = stacked.shape();
  shape[0] = n;
  Tensor out(shape);
  std::copy(stacked.data(), stacked.data() + out.numel(), out.data());
  return out;
}

inline Tensor second_half(const Tensor& stacked, std::size_t n) {
  std::vector<std::size_t> shape = stacked.shape();
  const std::size_t skip = (shape[0] - n) * (stacked.numel() / shape[0]);
  shape[0] = n;
  Tensor out(shape);
  std::copy(stacked.data() + skip, stacked.data() + skip + out.numel(), out.data());
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The trainable two-stream model: a shared trunk consumed by both the global
// image and the assembled part canvas (stacked into one batch so trunk
// gradients accumulate from both streams over a single parameter set),
// split branches, pooled features, per-stream softmax heads, and the FEN /
// PTN / FWN machinery in front of and behind the part stream.
// ---------------------------------------------------------------------------

class PdcModel {
 public:
  explicit PdcModel(ModelConfig cfg) : cfg_(cfg), flags_(variant_flags(cfg.variant)) {
    cfg_.validate();
    Rng rng(Rng::mix(cfg_.seed, 0x30DE1ULL));
    layout_ = CanvasLayout::standard(cfg_.input_h, cfg_.input_w);

    if (cfg_.backbone == Backbone::Standard) {
      trunk_.emplace<Conv2d>("trunk.conv1", 3, cfg_.trunk_c1, 7, 2, 3, rng);
      trunk_.emplace<BatchNorm2d>("trunk.bn1", cfg_.trunk_c1);
      trunk_.emplace<ReLU>("trunk.relu1");
      trunk_.emplace<MaxPool2d>("trunk.pool1", 3, 2, 1);
      trunk_.emplace<Conv2d>("trunk.conv2", cfg_.trunk_c1, cfg_.trunk_c2, 3, 1, 1, rng);
      trunk_.emplace<BatchNorm2d>("trunk.bn2", cfg_.trunk_c2);
      trunk_.emplace<ReLU>("trunk.relu2");
      trunk_.emplace<Conv2d>("trunk.conv3", cfg_.trunk_c2, cfg_.trunk_c3, 3, 1, 1, rng);
      trunk_.emplace<BatchNorm2d>("trunk.bn3", cfg_.trunk_c3);
      trunk_.emplace<ReLU>("trunk.relu3");
    } else {
      trunk_.emplace<Conv2d>("trunk.conv1", 3, cfg_.trunk_c3, 3, 2, 1, rng);
      trunk_.emplace<BatchNorm2d>("trunk.bn1", cfg_.trunk_c3);
      trunk_.emplace<ReLU>("trunk.relu1");
    }

    if (flags_.global_stream) {
      global_branch_.emplace<Conv2d>("global.conv", cfg_.trunk_c3, cfg_.branch_c, 3, 1, 1, rng);
      global_branch_.emplace<BatchNorm2d>("global.bn", cfg_.branch_c);
      global_branch_.emplace<ReLU>("global.relu");
      gap_g_ = std::make_unique<GlobalAvgPool>("global.gap");
      head_g_ = std::make_unique<Dense>("global.head", cfg_.branch_c, cfg_.classes, rng);
    }
    if (flags_.part_stream) {
      part_branch_.emplace<Conv2d>("part.conv", cfg_.trunk_c3, cfg_.branch_c, 3, 1, 1, rng);
      part_branch_.emplace<BatchNorm2d>("part.bn", cfg_.branch_c);
      part_branch_.emplace<ReLU>("part.relu");
      gap_p_ = std::make_unique<GlobalAvgPool>("part.gap");
      // the second softmax head sits on the fused feature, so its loss
      // back-propagates through the fusion: identity into the global half,
      // the weighting chain into the part half
      const std::size_t fused_dim =
          (flags_.global_stream ? cfg_.branch_c : 0) + cfg_.branch_c;
      head_f_ = std::make_unique<Dense>("fusion.head", fused_dim, cfg_.classes, rng);
    }
    if (flags_.fen) {
      ptn_ = std::make_unique<PtnBank>("ptn", 3, rng, cfg_.ptn_c1, cfg_.ptn_c2);
      for (Param* p : ptn_->params()) p->lr_mult = cfg_.ptn_lr_mult;
    }
    if (flags_.fwn) {
      fwn_ = std::make_unique<Fwn>(cfg_.branch_c, FwnConfig{cfg_.fwn_k});
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const VariantFlags& flags() const { return flags_; }
  const CanvasLayout& layout() const { return layout_; }
  Fwn* fwn() { return fwn_.get(); }
  PtnBank* ptn() { return ptn_.get(); }

  // Batch-mean theta per PTN part from the most recent forward; for training
  // diagnostics. Empty when FEN is disabled or nothing ran yet.
  std::vector<std::array<double, 6>> last_mean_thetas() const {
    std::vector<std::array<double, 6>> out;
    if (!flags_.fen) return out;
    for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) {
      const Tensor& t = ptn_state_.thetas[i];
      if (t.numel() == 0) return {};
      std::array<double, 6> mean{};
      const std::size_t n = t.extent(0);
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < 6; ++j) mean[j] += t(s, j);
      }
      for (double& v : mean) v /= static_cast<double>(n);
      out.push_back(mean);
    }
    return out;
  }

  std::size_t feature_dim() const {
    const std::size_t m = flags_.global_stream ? cfg_.branch_c : 0;
    const std::size_t n = flags_.part_stream ? cfg_.branch_c : 0;
    return m + n;
  }

  // --- forward ------------------------------------------------------------

  ForwardResult forward(const Batch& batch, bool training) {
    require_rank(batch.images, 4, "model forward");
    require_shape(batch.images,
                  {batch.images.extent(0), 3, cfg_.input_h, cfg_.input_w}, "model forward");
    const std::size_t n = batch.images.extent(0);
    ForwardResult r;

    if (flags_.part_stream) {
      if (batch.maps.size() != n) {
        throw std::invalid_argument("model forward: need one ResponseMapSet per sample");
      }
      r.canvas = build_canvas(batch, training);
    }

    Tensor trunk_out;
    if (flags_.global_stream && flags_.part_stream) {
      trunk_out = trunk_.forward(detail::concat_batches(batch.images, r.canvas), training);
    } else if (flags_.global_stream) {
      trunk_out = trunk_.forward(batch.images, training);
    } else {
      trunk_out = trunk_.forward(r.canvas, training);
    }

    if (flags_.global_stream) {
      const Tensor tg = flags_.part_stream ? detail::first_half(trunk_out, n) : trunk_out;
      const Tensor bg = global_branch_.forward(tg, training);
      r.global_feat = gap_g_->forward(bg, training);
      r.global_logits = head_g_->forward(r.global_feat, training);
    }
    if (flags_.part_stream) {
      const Tensor tp = flags_.global_stream ? detail::second_half(trunk_out, n) : trunk_out;
      const Tensor bp = part_branch_.forward(tp, training);
      r.part_feat = gap_p_->forward(bp, training);
      r.part_weighted = flags_.fwn ? fwn_->forward_part(r.part_feat, training) : r.part_feat;
    }

    // retrieval feature: untouched global half, weighted part half
    if (flags_.global_stream && flags_.part_stream) {
      const std::size_t m = cfg_.branch_c;
      r.fused = Tensor({n, 2 * m});
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < m; ++i) {
          r.fused(s, i) = r.global_feat(s, i);
          r.fused(s, m + i) = r.part_weighted(s, i);
        }
      }
    } else if (flags_.global_stream) {
      r.fused = r.global_feat;
    } else {
      r.fused = r.part_weighted;
    }
    if (flags_.part_stream) {
      r.part_logits = head_f_->forward(r.fused, training);
    }
    return r;
  }

  // --- training -----------------------------------------------------------

  // Zeroes gradients, runs forward, the two softmax losses, and the full
  // backward pass. Leaves gradients accumulated; does not touch parameters.
  StepStats backprop(const Batch& batch, long iteration = 0, double lr = 0.0) {
    if (batch.labels.size() != batch.images.extent(0)) {
      throw std::invalid_argument("train_step: label count mismatch");
    }
    Sgd::zero_grads(params());
    ForwardResult r = forward(batch, true);

    StepStats stats;
    stats.lr = lr;
    SoftmaxXent lg, lp;
    if (flags_.global_stream) {
      lg = softmax_xent(r.global_logits, batch.labels);
      stats.loss_global = lg.loss;
    }
    if (flags_.part_stream) {
      lp = softmax_xent(r.part_logits, batch.labels);
      stats.loss_part = lp.loss;
    }
    stats.loss = stats.loss_global + stats.loss_part;
    if (!std::isfinite(stats.loss)) {
      throw numeric_error(nan_diagnostics(r, stats, iteration));
    }

    backward(r, lg, lp);
    return stats;
  }

  StepStats train_step(const Batch& batch, Sgd& sgd, long iteration) {
    StepStats stats = backprop(batch, iteration, sgd_lr_at(sgd.config(), iteration));
    sgd.step(params(), iteration);
    return stats;
  }

  // Inference-mode retrieval features for a list of dataset items.
  Tensor extract_features(const Dataset& ds, const std::vector<std::size_t>& item_indices) {
    const std::size_t dim = feature_dim();
    Tensor feats({std::max<std::size_t>(1, item_indices.size()), dim});
    for (std::size_t i = 0; i < item_indices.size(); ++i) {
      const DatasetItem& item = ds.items[item_indices[i]];
      Batch b;
      b.images = Tensor({1, 3, cfg_.input_h, cfg_.input_w});
      detail::paste_sample(b.images, 0, item.image);
      if (flags_.part_stream) b.maps.push_back(response_maps_for(item, ds.meta));
      ForwardResult r = forward(b, false);
      for (std::size_t j = 0; j < dim; ++j) feats(i, j) = r.fused(0, j);
    }
    return feats;
  }

  // --- parameters & persistence -------------------------------------------

  std::vector<Param*> params() {
    std::vector<Param*> out;
    auto add = [&](std::vector<Param*> ps) {
      for (Param* p : ps) out.push_back(p);
    };
    add(trunk_.params());
    add(global_branch_.params());
    if (head_g_) add(head_g_->params());
    add(part_branch_.params());
    if (head_f_) add(head_f_->params());
    if (ptn_) add(ptn_->params());
    if (fwn_) add(fwn_->params());
    return out;
  }

  std::vector<std::pair<std::string, Param*>> named_params() {
    std::vector<std::pair<std::string, Param*>> out;
    auto add_layers = [&](std::vector<Layer*> layers) {
      for (Layer* l : layers) {
        for (Param* p : l->params()) out.emplace_back(l->label() + "." + p->name, p);
      }
    };
    add_layers(trunk_.layers());
    add_layers(global_branch_.layers());
    if (head_g_) out.emplace_back("global.head.weight", &head_g_->weight()),
        out.emplace_back("global.head.bias", &head_g_->bias());
    add_layers(part_branch_.layers());
    if (head_f_) out.emplace_back("fusion.head.weight", &head_f_->weight()),
        out.emplace_back("fusion.head.bias", &head_f_->bias());
    if (ptn_) {
      for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) add_layers(ptn_->net(i).layers());
    }
    if (fwn_) {
      for (Param* p : fwn_->params()) out.emplace_back(p->name, p);  // already fully qualified
    }
    return out;
  }

  std::vector<std::pair<std::string, Tensor*>> named_buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add_layers = [&](std::vector<Layer*> layers) {
      for (Layer* l : layers) {
        for (auto& [name, t] : l->buffers()) out.emplace_back(l->label() + "." + name, t);
      }
    };
    add_layers(trunk_.layers());
    add_layers(global_branch_.layers());
    add_layers(part_branch_.layers());
    if (ptn_) {
      for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) add_layers(ptn_->net(i).layers());
    }
    return out;
  }

  void save(const std::filesystem::path& dir, Sgd* sgd = nullptr) {
    std::map<std::string, const Tensor*> tensors;
    for (auto& [name, p] : named_params()) tensors[name] = &p->value;
    for (auto& [name, t] : named_buffers()) tensors[name] = t;
    if (sgd) {
      for (auto& [name, p] : named_params()) tensors[name + ".v"] = &sgd->velocity(p);
    }
    save_checkpoint(dir, tensors);
  }

  // Strict load: every model tensor must be present with matching shape.
  // Lenient load copies the intersection (used to warm-start a variant from
  // a pretrained body-only checkpoint).
  void load(const std::filesystem::path& dir, Sgd* sgd = nullptr, bool lenient = false) {
    const std::map<std::string, Tensor> stored = load_checkpoint(dir);
    auto fetch = [&](const std::string& name, Tensor& dst, bool required) {
      auto it = stored.find(name);
      if (it == stored.end()) {
        if (required && !lenient) {
          throw config_error("checkpoint " + dir.string() + " is missing tensor '" + name +
                             "' (incompatible variant or version)");
        }
        return;
      }
      if (it->second.shape() != dst.shape()) {
        throw config_error("checkpoint tensor '" + name + "' has shape " +
                           it->second.shape_str() + " but the model expects " + dst.shape_str());
      }
      dst = it->second;
    };
    for (auto& [name, p] : named_params()) fetch(name, p->value, true);
    for (auto& [name, t] : named_buffers()) fetch(name, *t, true);
    if (sgd) {
      for (auto& [name, p] : named_params()) fetch(name + ".v", sgd->velocity(p), false);
    }
  }

 private:
  // Builds the canvas batch: joints -> boxes -> crop/rotate/resize per part,
  // then the PTN pass when FEN is enabled, then slot assembly. Joint and box
  // geometry is not differentiated; gradients re-enter only through theta.
  Tensor build_canvas(const Batch& batch, bool training) {
    const std::size_t n = batch.images.extent(0);
    canvas_parts_ = {};
    for (std::size_t p = 0; p < kNumParts; ++p) {
      const auto& slot = layout_.slots[p];
      canvas_parts_[p] = Tensor({n, 3, slot.h, slot.w});
    }
    std::vector<std::string> errors(n);
    parallel_for(n, [&](std::size_t s) {
      try {
        const Tensor image = detail::slice_sample(batch.images, s);
        const JointSet joints = localize_joints(batch.maps[s]);
        const PartBoxSet boxes = part_boxes(joints, cfg_.input_w, cfg_.input_h);
        for (std::size_t p = 0; p < kNumParts; ++p) {
          const auto& slot = layout_.slots[p];
          const double angle = flags_.fen ? boxes.parts[p].angle : 0.0;
          Tensor part = normalize_part(image, boxes.parts[p].box, angle, slot.h, slot.w);
          detail::paste_sample(canvas_parts_[p], s, part);
        }
      } catch (const std::exception& e) {
        errors[s] = e.what();
      }
    });
    for (const std::string& e : errors) {
      if (!e.empty()) throw numeric_error("canvas: " + e);
    }

    if (flags_.fen) {
      std::array<Tensor, 5> ptn_in;
      for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) {
        ptn_in[i] = canvas_parts_[static_cast<std::size_t>(PtnBank::kPtnParts[i])];
      }
      ptn_state_ = ptn_->forward(ptn_in, training);
      for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) {
        canvas_parts_[static_cast<std::size_t>(PtnBank::kPtnParts[i])] = ptn_state_.outputs[i];
      }
    }

    Tensor canvas({n, 3, cfg_.input_h, cfg_.input_w});
    for (std::size_t s = 0; s < n; ++s) {
      std::array<Tensor, kNumParts> parts;
      for (std::size_t p = 0; p < kNumParts; ++p) {
        parts[p] = detail::slice_sample(canvas_parts_[p], s);
      }
      detail::paste_sample(canvas, s, assemble_canvas(parts, layout_));
    }
    return canvas;
  }

  void backward(const ForwardResult& r, const SoftmaxXent& lg, const SoftmaxXent& lp) {
    const std::size_t n = r.fused.extent(0);
    const std::size_t m = flags_.global_stream ? cfg_.branch_c : 0;
    Tensor d_trunk_g, d_trunk_p;
    Tensor d_feat_g;
    if (flags_.global_stream) {
      d_feat_g = head_g_->backward(lg.grad);
    }
    if (flags_.part_stream) {
      const Tensor d_fused = head_f_->backward(lp.grad);
      Tensor d_part;
      if (flags_.fwn) {
        if (m > 0) {
          Fwn::Grads g = fwn_->backward(d_fused, m);
          d_part = std::move(g.d_part);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < m; ++i) d_feat_g(s, i) += g.d_global(s, i);
        } else {
          d_part = fwn_->backward_part(d_fused);
        }
      } else {
        d_part = Tensor({n, cfg_.branch_c});
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t i = 0; i < m; ++i) d_feat_g(s, i) += d_fused(s, i);
          for (std::size_t i = 0; i < cfg_.branch_c; ++i) d_part(s, i) = d_fused(s, m + i);
        }
      }
      Tensor d_maps = gap_p_->backward(d_part);
      d_trunk_p = part_branch_.backward(d_maps);
    }
    if (flags_.global_stream) {
      Tensor d_maps = gap_g_->backward(d_feat_g);
      d_trunk_g = global_branch_.backward(d_maps);
    }

    Tensor d_input;
    if (flags_.global_stream && flags_.part_stream) {
      d_input = trunk_.backward(detail::concat_batches(d_trunk_g, d_trunk_p));
    } else if (flags_.global_stream) {
      d_input = trunk_.backward(d_trunk_g);
      return;  // gradients stop at the input image
    } else {
      d_input = trunk_.backward(d_trunk_p);
    }

    if (flags_.fen) {
      // canvas gradients live in the second half of the stacked batch (or the
      // whole of it for PartOnly); route slot gradients into the PTN.
      const Tensor d_canvas =
          flags_.global_stream ? detail::second_half(d_input, n) : d_input;
      std::array<Tensor, 5> grads;
      for (std::size_t i = 0; i < PtnBank::kPtnParts.size(); ++i) {
        const auto& slot = layout_.slots[static_cast<std::size_t>(PtnBank::kPtnParts[i])];
        grads[i] = Tensor({n, 3, slot.h, slot.w});
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < slot.h; ++y)
              for (std::size_t x = 0; x < slot.w; ++x) {
                grads[i](s, c, y, x) = d_canvas(s, c, slot.row + y, slot.col + x);
              }
        }
      }
      ptn_->backward(ptn_state_, grads);  // input-path gradients end at the crops
    }
  }

  std::string nan_diagnostics(const ForwardResult& r, const StepStats& stats,
                              long iteration) const {
    auto max_abs = [](const Tensor& t) {
      double m = 0.0;
      for (std::size_t i = 0; i < t.numel(); ++i) m = std::max(m, std::abs(t[i]));
      return m;
    };
    std::string msg = "NaN loss at iteration " + std::to_string(iteration) +
                      " (lr " + std::to_string(stats.lr) + ")";
    if (r.global_logits.numel() > 0) {
      msg += "; max|global logit| " + std::to_string(max_abs(r.global_logits));
    }
    if (r.part_logits.numel() > 0) {
      msg += "; max|part logit| " + std::to_string(max_abs(r.part_logits));
    }
    return msg;
  }

  ModelConfig cfg_;
  VariantFlags flags_;
  CanvasLayout layout_;
  Sequential trunk_, global_branch_, part_branch_;
  std::unique_ptr<GlobalAvgPool> gap_g_, gap_p_;
  std::unique_ptr<Dense> head_g_, head_f_;
  std::unique_ptr<PtnBank> ptn_;
  std::unique_ptr<Fwn> fwn_;
  std::array<Tensor, kNumParts> canvas_parts_;
  PtnBank::ForwardState ptn_state_;
};

// ---------------------------------------------------------------------------
// Model config <-> key/value persistence (stored next to checkpoints).
// ---------------------------------------------------------------------------

inline std::vector<std::string> model_cfg_lines(const ModelConfig& cfg) {
  std::vector<std::string> lines;
  lines.push_back("variant = " + std::string(variant_name(cfg.variant)));
  lines.push_back("backbone = " + std::string(cfg.backbone == Backbone::Tiny ? "tiny" : "standard"));
  lines.push_back("input_h = " + std::to_string(cfg.input_h));
  lines.push_back("input_w = " + std::to_string(cfg.input_w));
  lines.push_back("classes = " + std::to_string(cfg.classes));
  lines.push_back("fwn_k = " + std::to_string(cfg.fwn_k));
  char buf[64];
  std::snprintf(buf, sizeof(buf), "ptn_lr_mult = %.9g", cfg.ptn_lr_mult);
  lines.emplace_back(buf);
  lines.push_back("seed = " + std::to_string(cfg.seed));
  lines.push_back("trunk_c1 = " + std::to_string(cfg.trunk_c1));
  lines.push_back("trunk_c2 = " + std::to_string(cfg.trunk_c2));
  lines.push_back("trunk_c3 = " + std::to_string(cfg.trunk_c3));
  lines.push_back("branch_c = " + std::to_string(cfg.branch_c));
  lines.push_back("ptn_c1 = " + std::to_string(cfg.ptn_c1));
  lines.push_back("ptn_c2 = " + std::to_string(cfg.ptn_c2));
  return lines;
}

inline ModelConfig model_cfg_from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  auto fetch = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw config_error(std::string("model config missing key: ") + key);
    return it->second;
  };
  cfg.variant = parse_variant(fetch("variant"));
  cfg.backbone = fetch("backbone") == "tiny" ? Backbone::Tiny : Backbone::Standard;
  cfg.input_h = std::stoul(fetch("input_h"));
  cfg.input_w = std::stoul(fetch("input_w"));
  cfg.classes = std::stoul(fetch("classes"));
  cfg.fwn_k = std::stoi(fetch("fwn_k"));
  cfg.ptn_lr_mult = std::stod(fetch("ptn_lr_mult"));
  cfg.seed = std::stoull(fetch("seed"));
  cfg.trunk_c1 = std::stoul(fetch("trunk_c1"));
  cfg.trunk_c2 = std::stoul(fetch("trunk_c2"));
  cfg.trunk_c3 = std::stoul(fetch("trunk_c3"));
  cfg.branch_c = std::stoul(fetch("branch_c"));
  if (kv.count("ptn_c1")) cfg.ptn_c1 = std::stoul(kv.at("ptn_c1"));
  if (kv.count("ptn_c2")) cfg.ptn_c2 = std::stoul(kv.at("ptn_c2"));
  return cfg;
}

}  // namespace pdc
