#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "pdc/errors.hpp"
#include "pdc/parallel.hpp"
#include "pdc/tensor.hpp"

namespace pdc {

// Pairwise probe x gallery Euclidean distances plus identity labels.
// Camera ids are optional; when exclude_same_camera is set, gallery entries
// sharing both identity and camera with the probe are dropped from its
// ranking (the Market-1501 junk convention).
struct DistanceMatrix {
  std::size_t n_probe = 0, n_gallery = 0;
  std::vector<double> d;  // row-major [n_probe, n_gallery]
  std::vector<int> probe_ids, gallery_ids;
  std::vector<int> probe_cams, gallery_cams;  // empty when unused
  bool exclude_same_camera = false;

  double at(std::size_t p, std::size_t g) const { return d[p * n_gallery + g]; }
};

inline DistanceMatrix distance_matrix(const Tensor& probe_feats, const Tensor& gallery_feats,
                                      std::vector<int> probe_ids,
                                      std::vector<int> gallery_ids) {
  require_rank(probe_feats, 2, "distance_matrix");
  require_rank(gallery_feats, 2, "distance_matrix");
  if (probe_feats.extent(1) != gallery_feats.extent(1)) {
    throw std::invalid_argument("distance_matrix: feature dim mismatch " +
                                probe_feats.shape_str() + " vs " + gallery_feats.shape_str());
  }
  const std::size_t np = probe_feats.extent(0), ng = gallery_feats.extent(0);
  const std::size_t dim = probe_feats.extent(1);
  if (probe_ids.size() != np || gallery_ids.size() != ng) {
    throw std::invalid_argument("distance_matrix: label count mismatch");
  }
  DistanceMatrix out;
  out.n_probe = np;
  out.n_gallery = ng;
  out.probe_ids = std::move(probe_ids);
  out.gallery_ids = std::move(gallery_ids);
  out.d.resize(np * ng);
  parallel_for(np, [&](std::size_t p) {
    for (std::size_t g = 0; g < ng; ++g) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const double diff = probe_feats(p, j) - gallery_feats(g, j);
        acc += diff * diff;
      }
      out.d[p * ng + g] = std::sqrt(acc);
    }
  });
  return out;
}

namespace detail {

// Gallery indices kept for this probe, in ranked order. Ties break by
// gallery index (stable sort) so rankings are deterministic.
inline std::vector<std::size_t> ranked_gallery(const DistanceMatrix& m, std::size_t p) {
  std::vector<std::size_t> order;
  order.reserve(m.n_gallery);
  for (std::size_t g = 0; g < m.n_gallery; ++g) {
    if (m.exclude_same_camera && !m.probe_cams.empty() && !m.gallery_cams.empty() &&
        m.gallery_ids[g] == m.probe_ids[p] && m.gallery_cams[g] == m.probe_cams[p]) {
      continue;
    }
    order.push_back(g);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return m.at(p, a) < m.at(p, b); });
  return order;
}

}  // namespace detail

struct EvalReport {
  std::vector<double> cmc;          // rank-k accuracy, k = 1..gallery size
  double map = 0.0;                 // mean average precision
  std::vector<double> per_probe_ap;

  double rank(std::size_t k) const {
    if (cmc.empty()) return 0.0;
    return cmc[std::min(k, cmc.size()) - 1];
  }
};

// Cumulative match curve. cmc[k-1] is the fraction of probes whose first
// true match appears within the top-k ranked gallery entries.
inline std::vector<double> cmc(const DistanceMatrix& m) {
  if (m.n_probe == 0 || m.n_gallery == 0) throw std::invalid_argument("cmc: empty matrix");
  std::vector<double> curve(m.n_gallery, 0.0);
  for (std::size_t p = 0; p < m.n_probe; ++p) {
    const auto order = detail::ranked_gallery(m, p);
    std::size_t first_match = order.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (m.gallery_ids[order[r]] == m.probe_ids[p]) {
        first_match = r;
        break;
      }
    }
    if (first_match == order.size()) {
      throw numeric_error("cmc: probe " + std::to_string(p) + " (identity " +
                          std::to_string(m.probe_ids[p]) + ") has no gallery match");
    }
    for (std::size_t k = first_match; k < m.n_gallery; ++k) curve[k] += 1.0;
  }
  for (double& v : curve) v /= static_cast<double>(m.n_probe);
  return curve;
}

// Mean average precision. AP per probe is the mean over its relevant gallery
// items of the precision at that item's rank.
inline double mean_ap(const DistanceMatrix& m, std::vector<double>* per_probe = nullptr) {
  if (m.n_probe == 0 || m.n_gallery == 0) throw std::invalid_argument("mean_ap: empty matrix");
  double total = 0.0;
  if (per_probe) per_probe->assign(m.n_probe, 0.0);
  for (std::size_t p = 0; p < m.n_probe; ++p) {
    const auto order = detail::ranked_gallery(m, p);
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (m.gallery_ids[order[r]] == m.probe_ids[p]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    if (hits == 0) {
      throw numeric_error("mean_ap: probe " + std::to_string(p) + " (identity " +
                          std::to_string(m.probe_ids[p]) + ") has no gallery match");
    }
    ap /= static_cast<double>(hits);
    if (per_probe) (*per_probe)[p] = ap;
    total += ap;
  }
  return total / static_cast<double>(m.n_probe);
}

inline EvalReport evaluate(const DistanceMatrix& m) {
  EvalReport r;
  r.cmc = cmc(m);
  r.map = mean_ap(m, &r.per_probe_ap);
  return r;
}

inline std::vector<std::string> report_csv(const EvalReport& r) {
  std::vector<std::string> lines;
  lines.push_back("metric,value");
  char buf[64];
  for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{20}}) {
    std::snprintf(buf, sizeof(buf), "rank%zu,%.6f", k, r.rank(k));
    lines.emplace_back(buf);
  }
  std::snprintf(buf, sizeof(buf), "mAP,%.6f", r.map);
  lines.emplace_back(buf);
  return lines;
}

inline std::vector<std::string> cmc_csv(const EvalReport& r) {
  std::vector<std::string> lines;
  lines.push_back("k,accuracy");
  for (std::size_t k = 0; k < r.cmc.size(); ++k) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f", k + 1, r.cmc[k]);
    lines.emplace_back(buf);
  }
  return lines;
}

}  // namespace pdc
