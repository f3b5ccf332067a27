#pragma once

// Functional, bit-exact model of the streaming blocks: line-buffer
// windowing, convolution through an AdderGraph, max pool, fused scale and
// shift, MUX rate conversion and dense MAC layers, plus a whole-network
// simulator.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/cse.hpp"
#include "ternroll/image.hpp"
#include "ternroll/matrix_io.hpp"
#include "ternroll/network.hpp"
#include "ternroll/ternarize.hpp"
#include "ternroll/treegen.hpp"

namespace ternroll {

// ---- windowing ------------------------------------------------------------

// Streams pixels in raster order through N-1 line buffers of length W and
// an N x N window. Patches are zero padded by N/2 on every border; values
// within a patch are ordered (q*N + r)*D + s for row offset q, column
// offset r and channel s.
class WindowBuffer {
 public:
  WindowBuffer(int width, int channels, int kernel)
      : w_(width), d_(channels), n_(kernel), h_(kernel / 2) {
    if (kernel < 1 || kernel % 2 == 0) throw InputError("window kernel must be odd and >= 1");
    if (kernel > width) throw InputError("window kernel larger than the image");
    capacity_ = static_cast<std::size_t>(n_ - 1) * w_ + n_;
  }

  // Pushes the next pixel (d values) and returns the number of patches that
  // became complete.
  std::size_t push(std::span<const std::int64_t> pixel) {
    if (pixel.size() != static_cast<std::size_t>(d_)) throw InputError("window: pixel has the wrong channel count");
    history_.push_back(std::vector<std::int64_t>(pixel.begin(), pixel.end()));
    if (history_.size() > capacity_) history_.pop_front();
    ++pushed_;
    return drain(static_cast<long long>(pushed_) - 1);
  }

  // Value that entered `k` rows ago at the same column: the output of line
  // buffer k (k = 0 is the newest pixel itself).
  const std::vector<std::int64_t>& tap(int k) const {
    const std::size_t back = static_cast<std::size_t>(k) * w_;
    if (k < 0 || k >= n_ || back >= history_.size()) throw InputError("window: tap not yet available");
    return history_[history_.size() - 1 - back];
  }

  bool has_patch() const { return !ready_.empty(); }

  std::vector<std::int64_t> pop_patch() {
    if (ready_.empty()) throw InputError("window: no patch ready");
    auto p = std::move(ready_.front());
    ready_.pop_front();
    return p;
  }

 private:
  long long index(int y, int x) const { return static_cast<long long>(y) * w_ + x; }

  // Raster index of the last pixel patch (y, x) needs.
  long long ready_at(int y, int x) const {
    return index(std::min(y + h_, w_ - 1), std::min(x + h_, w_ - 1));
  }

  std::size_t drain(long long newest) {
    std::size_t made = 0;
    const long long total = static_cast<long long>(w_) * w_;
    while (next_ < total) {
      const int y = static_cast<int>(next_ / w_), x = static_cast<int>(next_ % w_);
      if (ready_at(y, x) > newest) break;
      std::vector<std::int64_t> patch(static_cast<std::size_t>(n_) * n_ * d_, 0);
      for (int q = 0; q < n_; ++q) {
        for (int r = 0; r < n_; ++r) {
          const int a = y + q - h_, b = x + r - h_;
          if (a < 0 || b < 0 || a >= w_ || b >= w_) continue;
          const long long age = newest - index(a, b);
          if (age < 0 || static_cast<std::size_t>(age) >= history_.size()) {
            throw InvariantError("window: pixel fell out of the line buffers");
          }
          const auto& px = history_[history_.size() - 1 - static_cast<std::size_t>(age)];
          std::copy(px.begin(), px.end(), patch.begin() + (static_cast<std::ptrdiff_t>(q) * n_ + r) * d_);
        }
      }
      ready_.push_back(std::move(patch));
      ++next_;
      ++made;
    }
    return made;
  }

  int w_, d_, n_, h_;
  std::size_t capacity_ = 0;
  std::size_t pushed_ = 0;
  long long next_ = 0;
  std::deque<std::vector<std::int64_t>> history_;
  std::deque<std::vector<std::int64_t>> ready_;
};

// All W*W patches in raster order, flattened (W*W rows of N*N*D values).
inline std::vector<std::int64_t> window_stream(const ImageStream& img, int kernel) {
  WindowBuffer buf(img.width, img.channels, kernel);
  const std::size_t patch = static_cast<std::size_t>(kernel) * kernel * img.channels;
  std::vector<std::int64_t> out;
  out.reserve(img.pixels() * patch);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    buf.push({img.pixel(p), static_cast<std::size_t>(img.channels)});
    while (buf.has_patch()) {
      auto v = buf.pop_patch();
      out.insert(out.end(), v.begin(), v.end());
    }
  }
  if (out.size() != img.pixels() * patch) throw InvariantError("window: stream ended with patches missing");
  return out;
}

// ---- max pool ---------------------------------------------------------------

inline ImageStream max_pool(const ImageStream& img, int k, int n) {
  if (k < 1 || n < 1) throw InputError("max pool window and stride must be >= 1");
  if (img.width % n != 0) throw InputError("max pool: image width not divisible by stride");
  ImageStream out(img.width / n, img.channels);
  for (int i = 0; i < out.width; ++i) {
    for (int j = 0; j < out.width; ++j) {
      for (int c = 0; c < img.channels; ++c) {
        std::int64_t best = std::numeric_limits<std::int64_t>::min();
        for (int q = 0; q < k; ++q) {
          for (int r = 0; r < k; ++r) {
            const int y = i * n + q, x = j * n + r;
            if (y < img.width && x < img.width) best = std::max(best, img.at(y, x, c));
          }
        }
        out.at(i, j, c) = best;
      }
    }
  }
  return out;
}

// ---- scale and shift --------------------------------------------------------

// Per-channel y = c*x + b with c = s*a already fused; `s` is kept for
// reference only.
struct ScaleShiftParams {
  std::vector<double> c;
  std::vector<double> b;
  double s = 1.0;
};

inline ScaleShiftParams fuse_scale_shift(std::span<const double> a, std::span<const double> b, double s) {
  if (a.size() != b.size()) throw InputError("scale/shift vectors differ in length");
  ScaleShiftParams p;
  p.s = s;
  for (std::size_t k = 0; k < a.size(); ++k) {
    p.c.push_back(s * a[k]);
    p.b.push_back(b[k]);
  }
  return p;
}

// c in the scale format, b pre-aligned to the activation format.
struct QuantizedScaleShift {
  std::vector<std::int64_t> c;
  std::vector<std::int64_t> b;
  int shift = 6;
  friend bool operator==(const QuantizedScaleShift&, const QuantizedScaleShift&) = default;
};

inline QuantizedScaleShift quantize_params(const ScaleShiftParams& p, const FixedPointFormat& scale_fmt = kScaleFormat,
                                           const FixedPointFormat& act_fmt = kActivationFormat,
                                           SaturationCounter* counter = nullptr) {
  if (p.c.size() != p.b.size()) throw InputError("scale/shift vectors differ in length");
  QuantizedScaleShift q;
  q.shift = scale_fmt.frac_bits;
  for (std::size_t k = 0; k < p.c.size(); ++k) {
    if (!std::isfinite(p.c[k]) || !std::isfinite(p.b[k])) throw InputError("scale/shift constants must be finite");
    q.c.push_back(quantize(p.c[k], scale_fmt, counter).raw);
    q.b.push_back(quantize(p.b[k], act_fmt, counter).raw);
  }
  return q;
}

inline QuantizedScaleShift identity_params(std::size_t channels, const FixedPointFormat& scale_fmt = kScaleFormat) {
  QuantizedScaleShift q;
  q.shift = scale_fmt.frac_bits;
  q.c.assign(channels, std::int64_t{1} << scale_fmt.frac_bits);
  q.b.assign(channels, 0);
  return q;
}

inline std::int64_t scale_shift_value(std::int64_t x, std::int64_t c, std::int64_t b, int shift, Activation act,
                                      const FixedPointFormat& act_fmt, SaturationCounter* counter) {
  std::int64_t y = saturate(round_shift(x * c, shift) + b, act_fmt, counter);
  if (act == Activation::ReLU && y < 0) y = 0;
  return y;
}

// Applies the block to one channel vector in place.
inline void scale_shift(std::span<std::int64_t> x, const QuantizedScaleShift& p, Activation act,
                        const FixedPointFormat& act_fmt = kActivationFormat, SaturationCounter* counter = nullptr) {
  if (x.size() != p.c.size()) {
    throw InputError("scale/shift: " + std::to_string(x.size()) + " channels but " + std::to_string(p.c.size()) +
                     " constants");
  }
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = scale_shift_value(x[k], p.c[k], p.b[k], p.shift, act, act_fmt, counter);
}

// `ssp <channels>` header, then one `c b` line per channel.
inline ScaleShiftParams parse_ssp(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty()) throw InputError("ssp: empty file");
  auto head = detail::split_ws(lines[0]);
  std::size_t n = 0;
  if (head.size() != 2 || head[0] != "ssp" || !detail::parse_size(head[1], n) || n == 0) {
    throw InputError("ssp line 1: expected 'ssp <channels>'");
  }
  if (lines.size() - 1 != n) {
    throw InputError("ssp: expected " + std::to_string(n) + " constant lines, found " + std::to_string(lines.size() - 1));
  }
  ScaleShiftParams p;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    auto f = detail::split_ws(lines[k]);
    double c = 0, b = 0;
    if (f.size() != 2 || !detail::parse_double(f[0], c) || !detail::parse_double(f[1], b)) {
      throw InputError("ssp line " + std::to_string(k + 1) + ": expected '<c> <b>'");
    }
    p.c.push_back(c);
    p.b.push_back(b);
  }
  return p;
}

inline std::string format_ssp(const ScaleShiftParams& p) {
  std::string out = "ssp " + std::to_string(p.c.size()) + "\n";
  char buf[64];
  for (std::size_t k = 0; k < p.c.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.c[k], p.b[k]);
    out += buf;
  }
  return out;
}

inline ScaleShiftParams load_ssp(const std::string& path) { return parse_ssp(detail::read_file(path)); }

// ---- MUX layer --------------------------------------------------------------

// D values delivered together every M cycles, re-emitted as D/M values per
// cycle in order. Returns one vector per output cycle.
inline std::vector<std::vector<std::int64_t>> mux_layer(std::span<const std::int64_t> burst, int m) {
  if (m < 1) throw InputError("mux: interval must be >= 1");
  if (burst.size() % static_cast<std::size_t>(m) != 0) {
    throw InputError("mux: interval " + std::to_string(m) + " does not divide a burst of " +
                     std::to_string(burst.size()) + " values");
  }
  const std::size_t per = burst.size() / static_cast<std::size_t>(m);
  std::vector<std::vector<std::int64_t>> out;
  for (int k = 0; k < m; ++k) {
    out.emplace_back(burst.begin() + static_cast<std::ptrdiff_t>(k * per),
                     burst.begin() + static_cast<std::ptrdiff_t>((k + 1) * per));
  }
  return out;
}

// ---- dense ------------------------------------------------------------------

struct WeightMemory {
  std::uint64_t storage_bits = 0;
  std::uint64_t bandwidth_bits = 0;  // per cycle
  std::uint64_t brams = 0;           // 64 kb, 64-bit output ports
};

inline WeightMemory weight_memory(std::size_t outputs, std::size_t inputs, int lanes) {
  if (lanes < 1) throw InputError("dense lanes must be >= 1");
  WeightMemory w;
  w.storage_bits = static_cast<std::uint64_t>(outputs) * inputs * 2;
  w.bandwidth_bits = static_cast<std::uint64_t>(lanes) * outputs * 2;
  const std::uint64_t by_port = (w.bandwidth_bits + 63) / 64;
  const std::uint64_t by_size = (w.storage_bits + 65535) / 65536;
  w.brams = std::max(by_port, by_size);
  return w;
}

// Multiply-accumulate with trits: add, skip or subtract. Exact.
inline std::vector<std::int64_t> dense_accumulate(std::span<const std::int64_t> x, const TernaryMatrix& t) {
  if (x.size() != t.cols()) {
    throw InputError("dense: input has " + std::to_string(x.size()) + " values, weights expect " +
                     std::to_string(t.cols()));
  }
  std::vector<std::int64_t> acc(t.rows(), 0);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    std::int64_t a = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (row[k] > 0) a += x[k];
      else if (row[k] < 0) a -= x[k];
    }
    acc[r] = a;
  }
  return acc;
}

inline std::vector<std::int64_t> dense(std::span<const std::int64_t> x, const TernaryMatrix& t,
                                       const QuantizedScaleShift& params, Activation act,
                                       const FixedPointFormat& act_fmt = kActivationFormat,
                                       SaturationCounter* counter = nullptr) {
  auto y = dense_accumulate(x, t);
  scale_shift(y, params, act, act_fmt, counter);
  return y;
}

// ---- convolution ------------------------------------------------------------

// Every output pixel is the graph evaluated on its patch, saturated to the
// activation format.
inline ImageStream conv_layer(const ImageStream& img, int kernel, const AdderGraph& g,
                              const FixedPointFormat& act_fmt = kActivationFormat,
                              SaturationCounter* counter = nullptr) {
  const std::size_t patch = static_cast<std::size_t>(kernel) * kernel * img.channels;
  if (g.num_inputs != patch) {
    throw InputError("conv: graph expects " + std::to_string(g.num_inputs) + " inputs, patches have " +
                     std::to_string(patch));
  }
  const auto patches = window_stream(img, kernel);
  const auto y = evaluate_batch(g, patches, img.pixels());
  ImageStream out(img.width, static_cast<int>(g.num_outputs));
  for (std::size_t k = 0; k < y.size(); ++k) out.data[k] = saturate(y[k], act_fmt, counter);
  return out;
}

// ---- network ----------------------------------------------------------------

struct LayerWeights {
  std::optional<TernaryMatrix> matrix;     // conv and dense
  std::optional<ScaleShiftParams> params;  // scale_shift
};

using NetworkWeights = std::vector<LayerWeights>;

inline std::pair<std::size_t, std::size_t> weight_shape(const LayerSpec& l) {
  if (l.kind == LayerKind::Conv) {
    return {static_cast<std::size_t>(l.filters), static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels};
  }
  if (l.kind == LayerKind::Dense) return {static_cast<std::size_t>(l.filters), static_cast<std::size_t>(l.in_channels)};
  return {0, 0};
}

inline void check_weights(const NetworkSpec& net, const NetworkWeights& w) {
  if (w.size() != net.layers.size()) throw InputError("weights: one entry per layer is required");
  for (std::size_t i = 0; i < w.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (has_weights(l.kind)) {
      if (!w[i].matrix) throw InputError("weights: layer '" + l.name + "' has no matrix");
      auto [rows, cols] = weight_shape(l);
      if (w[i].matrix->rows() != rows || w[i].matrix->cols() != cols) {
        throw InputError("weights: layer '" + l.name + "' expects a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix, got " + std::to_string(w[i].matrix->rows()) + "x" +
                         std::to_string(w[i].matrix->cols()));
      }
    }
    if (l.kind == LayerKind::ScaleShift && w[i].params &&
        w[i].params->c.size() != static_cast<std::size_t>(l.in_channels)) {
      throw InputError("weights: layer '" + l.name + "' expects " + std::to_string(l.in_channels) + " constants");
    }
  }
}

// Reads <dir>/<name>.tmx for conv/dense layers and <dir>/<name>.ssp for
// scale/shift layers. Missing scale/shift files mean identity; missing
// matrices are an error only when `require_matrices` is set.
inline NetworkWeights load_weights(const NetworkSpec& net, const std::string& dir, bool require_matrices = true) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("weights directory '" + dir + "' does not exist");
  NetworkWeights w(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (has_weights(l.kind)) {
      const fs::path p = fs::path(dir) / (l.name + ".tmx");
      if (fs::exists(p)) w[i].matrix = load_tmx(p.string());
      else if (require_matrices) throw InputError("missing weight file '" + p.string() + "'");
    }
    if (l.kind == LayerKind::ScaleShift) {
      const fs::path p = fs::path(dir) / (l.name + ".ssp");
      if (fs::exists(p)) w[i].params = load_ssp(p.string());
    }
  }
  if (require_matrices) check_weights(net, w);
  return w;
}

// Gaussian weights ternarized with each layer's epsilon, and mild positive
// scale/shift constants. For self-tests and demos.
inline NetworkWeights random_weights(const NetworkSpec& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uc(0.05, 0.5), ub(-1.0, 1.0);
  NetworkWeights w(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (has_weights(l.kind)) {
      auto [rows, cols] = weight_shape(l);
      std::vector<double> e(rows * cols);
      for (auto& v : e) v = gauss(rng);
      w[i].matrix = ternarize(FloatMatrix(rows, cols, std::move(e)), l.epsilon, l.scale_rule).weights;
    }
    if (l.kind == LayerKind::ScaleShift) {
      ScaleShiftParams p;
      for (int c = 0; c < l.in_channels; ++c) {
        p.c.push_back(uc(rng));
        p.b.push_back(ub(rng));
      }
      w[i].params = p;
    }
  }
  return w;
}

struct CompiledLayer {
  std::optional<AdderGraph> graph;  // conv
  std::optional<TernaryMatrix> matrix;
  std::optional<QuantizedScaleShift> params;
};

struct CompiledNetwork {
  NetworkSpec net;
  std::vector<CompiledLayer> layers;
  SaturationCounter constant_saturations;
};

// CSE, tree construction and serial schedule for one conv layer of a
// validated network; quantized constants for a scale/shift layer.
inline CompiledLayer compile_layer(const NetworkSpec& net, std::size_t i, const LayerWeights& w,
                                   SaturationCounter* counter = nullptr) {
  const LayerSpec& l = net.layers.at(i);
  CompiledLayer out;
  if (l.kind == LayerKind::Conv) {
    AdderGraph g = build_tree(run_cse(*w.matrix, l.cse), l.arity);
    out.graph = schedule_serial(std::move(g), l.pixel_interval, net.act_format.total_bits);
  }
  if (has_weights(l.kind)) out.matrix = w.matrix;
  if (l.kind == LayerKind::ScaleShift) {
    out.params = w.params ? quantize_params(*w.params, net.scale_format, net.act_format, counter)
                          : identity_params(static_cast<std::size_t>(l.in_channels), net.scale_format);
  }
  return out;
}

inline CompiledNetwork compile_network(const NetworkSpec& spec, const NetworkWeights& w) {
  CompiledNetwork cn;
  cn.net = validate(spec);
  check_weights(cn.net, w);
  for (std::size_t i = 0; i < cn.net.layers.size(); ++i) {
    cn.layers.push_back(compile_layer(cn.net, i, w[i], &cn.constant_saturations));
  }
  return cn;
}

struct SimResult {
  std::vector<std::int64_t> scores;
  std::size_t argmax = 0;
  std::vector<std::uint64_t> saturations;  // per layer
  std::uint64_t total_saturations = 0;
};

// Lowest index wins ties.
inline std::size_t argmax(std::span<const std::int64_t> v) {
  if (v.empty()) throw InputError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline SimResult simulate(const CompiledNetwork& cn, const ImageStream& input) {
  const NetworkSpec& net = cn.net;
  const LayerSpec& first = net.layers.front();
  if (input.width != first.in_width || input.channels != first.in_channels) {
    throw InputError("simulate: image is " + std::to_string(input.width) + "x" + std::to_string(input.width) + "x" +
                     std::to_string(input.channels) + ", network expects " + std::to_string(first.in_width) + "x" +
                     std::to_string(first.in_width) + "x" + std::to_string(first.in_channels));
  }
  SimResult res;
  res.saturations.assign(net.layers.size(), 0);
  ImageStream cur = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    const CompiledLayer& c = cn.layers[i];
    SaturationCounter sat;
    switch (l.kind) {
      case LayerKind::Buffer:
      case LayerKind::Fifo:
        break;
      case LayerKind::Conv:
        cur = conv_layer(cur, l.kernel, *c.graph, net.act_format, &sat);
        break;
      case LayerKind::MaxPool:
        cur = max_pool(cur, l.kernel, l.stride);
        break;
      case LayerKind::ScaleShift:
        for (std::size_t p = 0; p < cur.pixels(); ++p) {
          scale_shift({cur.data.data() + p * cur.channels, static_cast<std::size_t>(cur.channels)}, *c.params,
                      l.activation, net.act_format, &sat);
        }
        break;
      case LayerKind::Mux: {
        // Flattening keeps raster, channel-fastest order.
        ImageStream flat(1, static_cast<int>(cur.data.size()));
        flat.data = cur.data;
        cur = std::move(flat);
        break;
      }
      case LayerKind::Dense: {
        auto y = dense_accumulate(cur.data, *c.matrix);
        ImageStream out(1, static_cast<int>(y.size()));
        for (std::size_t k = 0; k < y.size(); ++k) out.data[k] = saturate(y[k], net.act_format, &sat);
        if (l.activation == Activation::ReLU) {
          for (auto& v : out.data) v = std::max<std::int64_t>(v, 0);
        }
        cur = std::move(out);
        break;
      }
    }
    res.saturations[i] = sat.events;
    res.total_saturations += sat.events;
  }
  res.scores = cur.data;
  res.argmax = argmax(res.scores);
  return res;
}

}  // namespace ternroll
