#pragma once

// Analytic rate, latency and operation-count models for a network
// description. Rates are exact: a burst of `values` every `cycles` cycles.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ternroll/network.hpp"
#include "ternroll/pipeline.hpp"
#include "ternroll/treegen.hpp"

namespace ternroll {

struct Rate {
  long long values = 0;
  long long cycles = 1;

  double per_cycle() const { return static_cast<double>(values) / static_cast<double>(cycles); }
  friend bool operator==(const Rate&, const Rate&) = default;
};

inline Rate reduced(long long values, long long cycles) {
  const long long g = std::gcd(values, cycles);
  return g > 0 ? Rate{values / g, cycles / g} : Rate{values, cycles};
}

inline std::string to_string(const Rate& r) {
  std::string v = std::to_string(r.values) + (r.values == 1 ? " value" : " values");
  if (r.cycles == 1) return v + " every cycle";
  return v + " every " + std::to_string(r.cycles) + " cycles";
}

struct LayerRate {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  int out_width = 0;
  int out_channels = 0;
  Rate out;
  int digits = 0;  // conv only: serial digits per sample
  long long latency = 0;
  long long fifo_high_water = 0;  // max pool only
};

struct ThroughputReport {
  Rate input;
  std::vector<LayerRate> layers;
  long long frame_cycles = 0;
  long long bottleneck_cycles = 0;
  std::string bottleneck;
  double clock_hz = 0;
  long long frames_per_sec = 0;
  long long latency_cycles = 0;  // estimate
  double latency_us = 0;
};

// Queue depth behind a max pool whose windows complete in bursts (only on
// every stride-th row) while the consumer drains one pixel every
// interval*stride^2 cycles.
inline long long pool_fifo_high_water(int width, int kernel, int stride, long long interval) {
  if (stride < 1 || width % stride != 0) return 0;
  const int out = width / stride;
  const long long drain = interval * stride * stride;
  std::vector<long long> produced;
  produced.reserve(static_cast<std::size_t>(out) * out);
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) {
      const int y = std::min(i * stride + std::max(kernel, stride) - 1, width - 1);
      const int x = std::min(j * stride + std::max(kernel, stride) - 1, width - 1);
      produced.push_back((static_cast<long long>(y) * width + x) * interval);
    }
  }
  long long high = 0, next_read = produced.front();
  std::size_t read = 0;
  for (std::size_t k = 0; k < produced.size(); ++k) {
    const long long t = produced[k];
    while (read < k && next_read < t) {
      ++read;
      next_read += drain;
    }
    if (read == k && next_read < t) next_read = t;
    high = std::max(high, static_cast<long long>(k + 1 - read));
  }
  return high;
}

inline int estimated_depth(std::size_t terms, int arity) {
  int d = 0;
  for (std::size_t span = 1; span < terms; span *= static_cast<std::size_t>(arity)) ++d;
  return d;
}

// `compiled`, when given, supplies real tree depths for the latency
// estimate; otherwise a no-CSE balanced depth is assumed.
inline ThroughputReport throughput_model(const NetworkSpec& spec, const CompiledNetwork* compiled = nullptr) {
  const NetworkSpec net = validate(spec);
  ThroughputReport rep;
  rep.clock_hz = net.clock_hz;
  const LayerSpec& first = net.layers.front();
  rep.frame_cycles = static_cast<long long>(first.in_width) * first.in_width * first.pixel_interval;
  rep.bottleneck_cycles = rep.frame_cycles;
  rep.bottleneck = "input stream";
  rep.input = {first.in_channels, first.pixel_interval};

  Rate cur = rep.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    LayerRate lr;
    lr.name = l.name;
    lr.kind = l.kind;
    const LayerShape shape = output_shape(l);
    lr.out_width = shape.width;
    lr.out_channels = shape.channels;
    const long long m = l.pixel_interval;
    switch (l.kind) {
      case LayerKind::Buffer: {
        const long long reach = l.kernel % 2 ? l.kernel / 2 : l.kernel - 1;
        lr.latency = (reach * l.in_width + reach) * m;
        lr.out = cur;
        break;
      }
      case LayerKind::Conv: {
        lr.out = {l.filters, cur.cycles};
        lr.digits = serial_digits(l.pixel_interval, net.act_format.total_bits);
        int depth = estimated_depth(static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels, l.arity);
        if (compiled && compiled->layers.size() == net.layers.size() && compiled->layers[i].graph) {
          depth = cost(*compiled->layers[i].graph).depth;
        }
        lr.latency = depth + lr.digits - 1;
        break;
      }
      case LayerKind::MaxPool:
        lr.out = {cur.values, cur.cycles * l.stride * l.stride};
        lr.latency = 1;
        lr.fifo_high_water = pool_fifo_high_water(l.in_width, l.kernel, l.stride, m);
        break;
      case LayerKind::ScaleShift:
      case LayerKind::Fifo:
        lr.out = cur;
        lr.latency = 1;
        break;
      case LayerKind::Mux: {
        const long long total = static_cast<long long>(l.in_width) * l.in_width * l.in_channels;
        const long long frame = static_cast<long long>(l.in_width) * l.in_width * cur.cycles;
        lr.out = reduced(total, frame);
        lr.latency = cur.cycles;
        break;
      }
      case LayerKind::Dense: {
        const long long consume = (static_cast<long long>(l.in_channels) + l.lanes - 1) / l.lanes;
        if (consume > rep.bottleneck_cycles) {
          rep.bottleneck_cycles = consume;
          rep.bottleneck = l.name;
        }
        lr.out = {l.filters, std::max(consume, rep.frame_cycles)};
        lr.latency = consume + 1;
        break;
      }
    }
    rep.latency_cycles += lr.latency;
    cur = lr.out;
    rep.layers.push_back(lr);
  }
  rep.frames_per_sec = static_cast<long long>(std::floor(net.clock_hz / static_cast<double>(rep.bottleneck_cycles)));
  rep.latency_us = static_cast<double>(rep.latency_cycles) / net.clock_hz * 1e6;
  return rep;
}

inline std::string format_throughput(const ThroughputReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %-12s %-14s %-30s %-7s %-10s %s\n", "layer", "kind", "output", "rate",
                "digits", "latency", "fifo");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s %-12s %-14s %-30s %-7s %-10s %s\n", "input", "-", "", to_string(r.input).c_str(),
                "-", "0", "-");
  out += buf;
  for (const auto& l : r.layers) {
    const std::string shape = l.out_width > 1 || l.kind == LayerKind::Conv
                                  ? std::to_string(l.out_width) + "x" + std::to_string(l.out_width) + "x" +
                                        std::to_string(l.out_channels)
                                  : std::to_string(l.out_channels);
    std::snprintf(buf, sizeof buf, "%-12s %-12s %-14s %-30s %-7s %-10lld %s\n", l.name.c_str(), to_string(l.kind),
                  shape.c_str(), to_string(l.out).c_str(), l.digits ? std::to_string(l.digits).c_str() : "-",
                  l.latency, l.kind == LayerKind::MaxPool ? std::to_string(l.fifo_high_water).c_str() : "-");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "frame interval: %lld cycles (bottleneck: %s)\n", r.bottleneck_cycles,
                r.bottleneck.c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%lld frames/sec at %.6g Hz\n", r.frames_per_sec, r.clock_hz);
  out += buf;
  std::snprintf(buf, sizeof buf, "pipeline latency (estimate): %lld cycles = %.3f us\n", r.latency_cycles,
                r.latency_us);
  out += buf;
  return out;
}

// ---- operation counts -------------------------------------------------------

struct OpRow {
  std::string name;
  std::string formula;
  std::uint64_t dense_macs = 0;
  std::optional<std::uint64_t> sparse_macs;
  std::optional<std::uint64_t> cse_ops;
};

struct OpTable {
  std::vector<OpRow> rows;
  std::uint64_t total_dense = 0;
  std::optional<std::uint64_t> total_sparse;
  std::optional<std::uint64_t> total_cse;
};

// One row per conv and dense layer. Conv: W^2*N^2*D*F dense MACs,
// W^2*nnz with sparsity, adders*W^2 with CSE. Dense layers keep every MAC
// and count it as two ops. Columns needing weights are left empty when
// `compiled` is null.
inline OpTable op_count(const NetworkSpec& spec, const CompiledNetwork* compiled = nullptr) {
  const NetworkSpec net = validate(spec);
  const bool have = compiled && compiled->layers.size() == net.layers.size();
  OpTable t;
  if (have) {
    t.total_sparse = 0;
    t.total_cse = 0;
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    if (!has_weights(l.kind)) continue;
    OpRow r;
    r.name = l.name;
    const std::uint64_t w2 = static_cast<std::uint64_t>(l.in_width) * l.in_width;
    if (l.kind == LayerKind::Conv) {
      r.formula = std::to_string(l.in_width) + "*" + std::to_string(l.in_width) + "*" + std::to_string(l.kernel) + "*" +
                  std::to_string(l.kernel) + "*" + std::to_string(l.in_channels) + "*" + std::to_string(l.filters);
      r.dense_macs = w2 * l.kernel * l.kernel * l.in_channels * l.filters;
      if (have && compiled->layers[i].matrix) {
        const TernaryMatrix& m = *compiled->layers[i].matrix;
        r.sparse_macs = w2 * m.nonzeros();
        if (compiled->layers[i].graph) r.cse_ops = w2 * cost(*compiled->layers[i].graph).adders;
      }
    } else {
      r.formula = std::to_string(l.in_channels) + "*" + std::to_string(l.filters);
      r.dense_macs = static_cast<std::uint64_t>(l.in_channels) * l.filters;
      if (have) {
        r.sparse_macs = r.dense_macs;
        r.cse_ops = 2 * r.dense_macs;
      }
    }
    t.total_dense += r.dense_macs;
    if (t.total_sparse) t.total_sparse = r.sparse_macs ? *t.total_sparse + *r.sparse_macs : std::optional<std::uint64_t>{};
    if (t.total_cse) t.total_cse = r.cse_ops ? *t.total_cse + *r.cse_ops : std::optional<std::uint64_t>{};
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline std::string format_ops(const OpTable& t) {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-22s %-14s %-16s %s\n", "layer", "num mults", "dense macs", "with sparsity",
                "with cse");
  out += buf;
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%-8s %-22s %-14llu %-16s %s\n", r.name.c_str(), r.formula.c_str(),
                  static_cast<unsigned long long>(r.dense_macs), opt(r.sparse_macs).c_str(), opt(r.cse_ops).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %-22s %-14llu %-16s %s\n", "total", "",
                static_cast<unsigned long long>(t.total_dense), opt(t.total_sparse).c_str(), opt(t.total_cse).c_str());
  out += buf;
  out += "dense-layer MACs count as two ops in the cse column\n";
  return out;
}

}  // namespace ternroll
