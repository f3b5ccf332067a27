#pragma once

// Straight-line fixed-point reference for whole-network simulation. Shares
// only the data types with the library: convolution is a direct padded
// gather against the ternary matrix, and constants are rounded with llround.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ternroll/network.hpp"
#include "ternroll/pipeline.hpp"

namespace ternroll::testing {

inline std::int64_t ref_sat(std::int64_t v, int bits) {
  const std::int64_t hi = (std::int64_t{1} << (bits - 1)) - 1;
  return std::clamp(v, -hi - 1, hi);
}

inline std::int64_t ref_round_shift(std::int64_t v, int s) {
  if (s == 0) return v;
  const double q = static_cast<double>(v) / static_cast<double>(std::int64_t{1} << s);
  return std::llround(q);
}

struct RefImage {
  int w = 0, d = 0;
  std::vector<std::int64_t> v;  // (y*w + x)*d + c
};

inline std::vector<std::int64_t> reference_simulate(const NetworkSpec& net, const NetworkWeights& weights,
                                                    const ImageStream& img) {
  const int bits = net.act_format.total_bits;
  const int act_frac = net.act_format.frac_bits;
  const int sc_frac = net.scale_format.frac_bits;
  RefImage cur{img.width, img.channels, img.data};
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& l = net.layers[li];
    if (l.kind == LayerKind::Conv) {
      const TernaryMatrix& t = *weights[li].matrix;
      const int n = l.kernel, h = n / 2;
      RefImage out{cur.w, l.filters, std::vector<std::int64_t>(static_cast<std::size_t>(cur.w) * cur.w * l.filters)};
      for (int y = 0; y < cur.w; ++y) {
        for (int x = 0; x < cur.w; ++x) {
          for (int f = 0; f < l.filters; ++f) {
            std::int64_t acc = 0;
            for (int q = 0; q < n; ++q) {
              for (int r = 0; r < n; ++r) {
                const int a = y + q - h, b = x + r - h;
                if (a < 0 || b < 0 || a >= cur.w || b >= cur.w) continue;
                for (int s = 0; s < cur.d; ++s) {
                  const int wt = t(f, (q * n + r) * cur.d + s);
                  acc += wt * cur.v[(static_cast<std::size_t>(a) * cur.w + b) * cur.d + s];
                }
              }
            }
            out.v[(static_cast<std::size_t>(y) * cur.w + x) * l.filters + f] = ref_sat(acc, bits);
          }
        }
      }
      cur = std::move(out);
    } else if (l.kind == LayerKind::ScaleShift) {
      const auto& p = weights[li].params;
      for (std::size_t k = 0; k < cur.v.size(); ++k) {
        const std::size_t ch = k % static_cast<std::size_t>(cur.d);
        std::int64_t c = std::int64_t{1} << sc_frac, b = 0;
        if (p) {
          c = ref_sat(std::llround(p->c[ch] * std::ldexp(1.0, sc_frac)), net.scale_format.total_bits);
          b = ref_sat(std::llround(p->b[ch] * std::ldexp(1.0, act_frac)), bits);
        }
        std::int64_t y = ref_sat(ref_round_shift(cur.v[k] * c, sc_frac) + b, bits);
        if (l.activation == Activation::ReLU) y = std::max<std::int64_t>(y, 0);
        cur.v[k] = y;
      }
    } else if (l.kind == LayerKind::MaxPool) {
      const int ow = cur.w / l.stride;
      RefImage out{ow, cur.d, std::vector<std::int64_t>(static_cast<std::size_t>(ow) * ow * cur.d)};
      for (int i = 0; i < ow; ++i) {
        for (int j = 0; j < ow; ++j) {
          for (int c = 0; c < cur.d; ++c) {
            std::int64_t m = INT64_MIN;
            for (int q = 0; q < l.kernel; ++q) {
              for (int r = 0; r < l.kernel; ++r) {
                const int y = i * l.stride + q, x = j * l.stride + r;
                if (y < cur.w && x < cur.w) m = std::max(m, cur.v[(static_cast<std::size_t>(y) * cur.w + x) * cur.d + c]);
              }
            }
            out.v[(static_cast<std::size_t>(i) * ow + j) * cur.d + c] = m;
          }
        }
      }
      cur = std::move(out);
    } else if (l.kind == LayerKind::Mux) {
      cur.d = static_cast<int>(cur.v.size());
      cur.w = 1;
    } else if (l.kind == LayerKind::Dense) {
      const TernaryMatrix& t = *weights[li].matrix;
      RefImage out{1, l.filters, std::vector<std::int64_t>(static_cast<std::size_t>(l.filters))};
      for (int f = 0; f < l.filters; ++f) {
        std::int64_t acc = 0;
        for (std::size_t k = 0; k < cur.v.size(); ++k) acc += t(f, k) * cur.v[k];
        acc = ref_sat(acc, bits);
        if (l.activation == Activation::ReLU) acc = std::max<std::int64_t>(acc, 0);
        out.v[f] = acc;
      }
      cur = std::move(out);
    }
  }
  return cur.v;
}

}  // namespace ternroll::testing
