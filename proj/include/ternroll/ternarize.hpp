#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/network.hpp"

namespace ternroll {

struct TernarizeResult {
  TernaryMatrix weights;
  double scale = 0.0;   // s
  double threshold = 0.0;  // delta = epsilon * mean(|w|)
};

// Threshold is taken over the whole matrix (per layer, not per filter).
// Entries with |w| < delta become 0; the rest keep their sign.
inline TernarizeResult ternarize(const FloatMatrix& w, double epsilon,
                                 ScaleRule rule = ScaleRule::MeanSurviving) {
  if (w.rows() == 0 || w.cols() == 0) throw InputError("ternarize: empty weight matrix");
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw InputError("ternarize: epsilon must be a finite value >= 0");
  const auto& e = w.entries();
  double abs_sum = 0;
  for (double v : e) {
    if (!std::isfinite(v)) throw InputError("ternarize: non-finite weight");
    abs_sum += std::fabs(v);
  }
  const double mean_abs = abs_sum / static_cast<double>(e.size());

  TernarizeResult out;
  out.threshold = epsilon * mean_abs;
  std::vector<Trit> trits(e.size(), 0);
  double kept_sum = 0;
  std::size_t kept = 0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double a = std::fabs(e[k]);
    if (a < out.threshold || e[k] == 0.0) continue;
    trits[k] = e[k] > 0 ? 1 : -1;
    kept_sum += a;
    ++kept;
  }
  if (kept > 0) out.scale = rule == ScaleRule::MeanAll ? mean_abs : kept_sum / static_cast<double>(kept);
  out.weights = TernaryMatrix(w.rows(), w.cols(), std::move(trits));
  return out;
}

struct SweepPoint {
  double epsilon = 0.0;
  double sparsity = 0.0;
};

inline std::vector<SweepPoint> sparsity_sweep(const FloatMatrix& w, const std::vector<double>& eps_list) {
  for (std::size_t k = 1; k < eps_list.size(); ++k) {
    if (eps_list[k] < eps_list[k - 1]) throw InputError("sparsity_sweep: epsilon list must be sorted ascending");
  }
  std::vector<SweepPoint> out;
  out.reserve(eps_list.size());
  for (double eps : eps_list) out.push_back({eps, sparsity(ternarize(w, eps).weights)});
  return out;
}

}  // namespace ternroll
