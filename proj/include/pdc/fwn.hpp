#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pdc/nn.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// Feature Weighting sub-Net. The part feature is taken through k weight
// layers, each an elementwise (Hadamard) weight plus bias followed by tanh,
// and the result is concatenated after the untouched global feature:
//   k = 1:   F_fusion = [F_global, tanh(F_part .* W + B)]
//   k = 0:   one weight layer, no nonlinearity
//   k >= 2:  the weight layer + tanh stack applied k times
// W starts at ones and B at zeros so fusion begins as a tanh-compressed
// pass-through.
struct FwnConfig {
  int k = 1;

  void validate() const {
    if (k < 0 || k > 4) {
      throw std::invalid_argument("fwn: k must be in {0,1,2,3,4}, got " + std::to_string(k));
    }
  }
};

class Fwn {
 public:
  Fwn() = default;

  Fwn(std::size_t part_dim, FwnConfig cfg) : dim_(part_dim), k_(cfg.k) {
    cfg.validate();
    const int layers = std::max(1, k_);
    for (int l = 0; l < layers; ++l) {
      weights_.emplace_back(layer_param_name(l, "W"), Tensor::full({dim_}, 1.0));
      biases_.emplace_back(layer_param_name(l, "B"), Tensor({dim_}));
    }
  }

  std::size_t part_dim() const { return dim_; }
  int k() const { return k_; }
  std::size_t layer_count() const { return weights_.size(); }

  // Parameter names follow the checkpoint convention: fwn.W / fwn.B for a
  // single layer, fwn.l<idx>.W / .B for stacks.
  std::string layer_param_name(int layer, const char* which) const {
    if (k_ <= 1) return std::string("fwn.") + which;
    return "fwn.l" + std::to_string(layer) + "." + which;
  }

  // Weighted part half for a batch [N,n] of part features.
  Tensor forward_part(const Tensor& f_part, bool training = true) {
    require_rank(f_part, 2, "fwn");
    if (f_part.extent(1) != dim_) {
      throw std::invalid_argument("fwn: part feature dim " + f_part.shape_str() +
                                  " does not match configured dim " + std::to_string(dim_));
    }
    acts_.clear();
    acts_.push_back(f_part);
    const std::size_t n = f_part.extent(0);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const Tensor& w = weights_[l].value;
      const Tensor& b = biases_[l].value;
      Tensor out({n, dim_});
      const bool with_tanh = k_ >= 1;
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t j = 0; j < dim_; ++j) {
          const double z = acts_.back()(s, j) * w[j] + b[j];
          out(s, j) = with_tanh ? std::tanh(z) : z;
        }
      acts_.push_back(std::move(out));
    }
    have_forward_ = training;
    return acts_.back();
  }

  // F_fusion = [F_global, weighted part half], rows are samples.
  Tensor fuse(const Tensor& f_global, const Tensor& f_part, bool training = true) {
    require_rank(f_global, 2, "fwn fuse");
    const Tensor part_half = forward_part(f_part, training);
    const std::size_t n = f_global.extent(0), m = f_global.extent(1);
    if (part_half.extent(0) != n) {
      throw std::invalid_argument("fwn fuse: batch mismatch");
    }
    Tensor fused({n, m + dim_});
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < m; ++j) fused(s, j) = f_global(s, j);
      for (std::size_t j = 0; j < dim_; ++j) fused(s, m + j) = part_half(s, j);
    }
    return fused;
  }

  struct Grads {
    Tensor d_global;  // identity Jacobian block: the first m entries, verbatim
    Tensor d_part;
  };

  // Backward of fuse(). The global half passes through unchanged; the part
  // half chains through each weight layer:
  //   d part_k = d fused_{m+k} * w_k * (1 - tanh^2(w_k p_k + b_k))
  // with the analogous products accumulating into the W and B gradients.
  Grads backward(const Tensor& grad_fusion, std::size_t global_dim) {
    if (!have_forward_) {
      throw std::logic_error("fwn: backward called before a training forward");
    }
    require_rank(grad_fusion, 2, "fwn backward");
    const std::size_t n = grad_fusion.extent(0);
    if (grad_fusion.extent(1) != global_dim + dim_) {
      throw std::invalid_argument("fwn backward: fused dim mismatch");
    }
    Grads g;
    g.d_global = Tensor({n, global_dim});
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t j = 0; j < global_dim; ++j) g.d_global(s, j) = grad_fusion(s, j);

    Tensor d_act({n, dim_});
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t j = 0; j < dim_; ++j) d_act(s, j) = grad_fusion(s, global_dim + j);

    g.d_part = backward_part(d_act);
    return g;
  }

  // Backward through the part stack only (input = d loss / d part_half).
  Tensor backward_part(const Tensor& d_out) {
    if (!have_forward_) {
      throw std::logic_error("fwn: backward called before a training forward");
    }
    const std::size_t n = d_out.extent(0);
    require_shape(d_out, {n, dim_}, "fwn backward_part");
    Tensor d_act = d_out;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Tensor& w = weights_[l].value;
      const Tensor& act_out = acts_[l + 1];
      const Tensor& act_in = acts_[l];
      Tensor d_prev({n, dim_});
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t j = 0; j < dim_; ++j) {
          // with tanh, d z = d a * (1 - a^2); without (k = 0), d z = d a
          const double dz = k_ >= 1 ? d_act(s, j) * (1.0 - act_out(s, j) * act_out(s, j))
                                    : d_act(s, j);
          weights_[l].grad[j] += dz * act_in(s, j);
          biases_[l].grad[j] += dz;
          d_prev(s, j) = dz * w[j];
        }
      d_act = std::move(d_prev);
    }
    return d_act;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back(&weights_[l]);
      out.push_back(&biases_[l]);
    }
    return out;
  }

 private:
  std::size_t dim_ = 0;
  int k_ = 1;
  std::vector<Param> weights_, biases_;
  std::vector<Tensor> acts_;
  bool have_forward_ = false;
};

// Euclidean distance between two fused feature vectors.
inline double fwn_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("fwn_distance: dim mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace pdc
