#pragma once

// Network description: ordered layer blocks plus the fixed-point formats
// used by the streaming datapath, and the JSON schema used to load it.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ternroll/core.hpp"

namespace ternroll {

enum class LayerKind { Buffer, Conv, MaxPool, ScaleShift, Mux, Dense, Fifo };
enum class Activation { None, ReLU };
enum class CseMethod { None, TopDown, BottomUp };
// How the ternary scaling factor s is derived from the float weights.
enum class ScaleRule { MeanSurviving, MeanAll };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Buffer: return "buffer";
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "max_pool";
    case LayerKind::ScaleShift: return "scale_shift";
    case LayerKind::Mux: return "mux";
    case LayerKind::Dense: return "dense";
    case LayerKind::Fifo: return "fifo";
  }
  return "?";
}

inline const char* to_string(CseMethod m) {
  switch (m) {
    case CseMethod::None: return "none";
    case CseMethod::TopDown: return "td";
    case CseMethod::BottomUp: return "bu";
  }
  return "?";
}

inline CseMethod parse_cse_method(const std::string& s) {
  if (s == "none") return CseMethod::None;
  if (s == "td") return CseMethod::TopDown;
  if (s == "bu") return CseMethod::BottomUp;
  throw InputError("unknown CSE method '" + s + "' (expected none, td or bu)");
}

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  int in_width = 0;
  int in_channels = 0;
  int kernel = 1;
  int stride = 1;
  int filters = 0;
  double epsilon = 0.0;
  // Cycles between valid input pixels; 0 means "derive from upstream pools".
  int pixel_interval = 0;
  Activation activation = Activation::None;
  CseMethod cse = CseMethod::BottomUp;
  int arity = 2;
  // Dense only: input values consumed per cycle; 0 means "derive".
  int lanes = 0;
  ScaleRule scale_rule = ScaleRule::MeanSurviving;
};

struct LayerShape {
  int width = 0;
  int channels = 0;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  double clock_hz = 125e6;
  FixedPointFormat act_format = kActivationFormat;
  FixedPointFormat scale_format = kScaleFormat;
};

inline bool has_weights(LayerKind k) { return k == LayerKind::Conv || k == LayerKind::Dense; }

inline LayerShape output_shape(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv: return {l.in_width, l.filters};
    case LayerKind::MaxPool: return {l.stride > 0 ? l.in_width / l.stride : 0, l.in_channels};
    case LayerKind::Mux: return {1, l.in_width * l.in_width * l.in_channels};
    case LayerKind::Dense: return {1, l.filters};
    default: return {l.in_width, l.in_channels};
  }
}

namespace detail {

inline std::string layer_label(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + to_string(l.kind) +
         (l.name.empty() ? "" : " '" + l.name + "'") + ")";
}

}  // namespace detail

// Checks structure and fills derived fields (names, pixel intervals, dense
// lanes). Returns the completed description.
inline NetworkSpec validate(NetworkSpec net) {
  net.act_format.check();
  net.scale_format.check();
  if (net.layers.empty()) throw InputError("network has no layers");
  if (!(net.clock_hz > 0)) throw InputError("clock_hz must be positive");

  int conv_count = 0, dense_count = 0;
  for (auto& l : net.layers) {
    if (l.kind == LayerKind::Conv) ++conv_count;
    if (l.kind == LayerKind::Dense) ++dense_count;
  }
  int conv_seen = 0, dense_seen = 0, pool_seen = 0, ss_seen = 0, mux_seen = 0, buf_seen = 0, fifo_seen = 0;
  auto auto_name = [](LayerSpec& l, const char* base, int& seen) {
    ++seen;
    if (l.name.empty()) l.name = base + std::to_string(seen);
  };

  // Interval tracking: pixels arrive every `interval` cycles until the
  // first mux, after which vectors stream at a fixed lane rate.
  long long interval = 1;
  bool after_mux = false;
  long long mux_values = 0, mux_cycles = 1;

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    LayerSpec& l = net.layers[i];
    const std::string where = detail::layer_label(i, l);
    if (l.in_width < 1 || l.in_channels < 1) {
      throw InputError(where + ": in_width and in_channels must be >= 1");
    }
    if (l.kernel < 1 || l.stride < 1) throw InputError(where + ": kernel and stride must be >= 1");
    if (l.arity != 2 && l.arity != 3) throw InputError(where + ": arity must be 2 or 3");
    if (l.epsilon < 0 || !std::isfinite(l.epsilon)) throw InputError(where + ": epsilon must be >= 0");

    switch (l.kind) {
      case LayerKind::Buffer:
      case LayerKind::Conv:
        if (l.kind == LayerKind::Conv && l.kernel % 2 == 0) throw InputError(where + ": kernel must be odd");
        if (l.kernel > l.in_width) throw InputError(where + ": kernel larger than the image");
        if (l.kind == LayerKind::Conv) {
          if (l.stride != 1) throw InputError(where + ": convolution stride must be 1");
          if (l.filters < 1) throw InputError(where + ": filters must be >= 1");
          if (l.name.empty()) l.name = "Conv" + std::to_string(++conv_seen);
          else ++conv_seen;
        }
        break;
      case LayerKind::MaxPool:
        if (l.in_width % l.stride != 0) {
          throw InputError(where + ": image width not divisible by pool stride");
        }
        if (l.kernel > l.in_width) throw InputError(where + ": kernel larger than the image");
        if (l.name.empty()) l.name = "MaxPool" + std::to_string(++pool_seen);
        break;
      case LayerKind::Dense:
        if (l.in_width != 1) throw InputError(where + ": dense input must be a flattened vector (in_width 1)");
        if (l.filters < 1) throw InputError(where + ": filters must be >= 1");
        ++dense_seen;
        if (l.name.empty()) {
          l.name = (dense_seen == dense_count && dense_count > 1) ? "SM" : "Dense" + std::to_string(dense_seen);
        }
        break;
      case LayerKind::ScaleShift: auto_name(l, "SS", ss_seen); break;
      case LayerKind::Mux: auto_name(l, "Mux", mux_seen); break;
      case LayerKind::Fifo: auto_name(l, "Fifo", fifo_seen); break;
    }
    if (l.kind == LayerKind::Buffer) auto_name(l, "Buffer", buf_seen);

    if (i == 0 && l.pixel_interval != 0 && l.pixel_interval != 1) {
      throw InputError(where + ": the first layer must accept one pixel per cycle (pixel_interval 1)");
    }
    if (!after_mux) {
      if (l.pixel_interval == 0) l.pixel_interval = static_cast<int>(interval);
      else if (l.pixel_interval != interval) {
        throw InputError(where + ": pixel_interval " + std::to_string(l.pixel_interval) +
                         " does not match the upstream pool cascade (" + std::to_string(interval) + ")");
      }
    } else if (l.pixel_interval == 0) {
      l.pixel_interval = 1;
    }

    if (l.kind == LayerKind::MaxPool && !after_mux) interval *= static_cast<long long>(l.stride) * l.stride;
    if (l.kind == LayerKind::Mux) {
      mux_values = static_cast<long long>(l.in_channels);
      mux_cycles = after_mux ? mux_cycles : interval;
      after_mux = true;
    }
    if (l.kind == LayerKind::Dense) {
      if (l.lanes == 0) {
        long long rate = (mux_values > 0 && mux_values % mux_cycles == 0) ? mux_values / mux_cycles : 1;
        l.lanes = static_cast<int>(std::max(1LL, rate));
      }
      if (l.lanes < 1) throw InputError(where + ": lanes must be >= 1");
      // A dense layer consumes its whole input vector before emitting.
      mux_cycles = (static_cast<long long>(l.in_channels) + l.lanes - 1) / l.lanes;
      mux_values = l.filters;
    }

    if (i + 1 < net.layers.size()) {
      const LayerShape out = output_shape(l);
      const LayerSpec& next = net.layers[i + 1];
      if (out.width != next.in_width || out.channels != next.in_channels) {
        throw InputError(detail::layer_label(i, l) + " outputs " + std::to_string(out.width) + "x" +
                         std::to_string(out.width) + "x" + std::to_string(out.channels) +
                         " but " + detail::layer_label(i + 1, next) + " expects " +
                         std::to_string(next.in_width) + "x" + std::to_string(next.in_width) + "x" +
                         std::to_string(next.in_channels));
      }
      if (l.kind == LayerKind::Buffer &&
          next.kind != LayerKind::Conv && next.kind != LayerKind::MaxPool) {
        throw InputError(where + ": a buffer must feed a conv or max_pool block");
      }
      if (l.kind == LayerKind::Buffer && next.kernel != l.kernel) {
        throw InputError(where + ": buffer kernel does not match the block it feeds");
      }
    }
  }
  std::set<std::string> names;
  for (const auto& l : net.layers) {
    if (!names.insert(l.name).second) throw InputError("duplicate layer name '" + l.name + "'");
  }
  return net;
}

// ---- JSON schema ----------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw InputError(where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

inline int get_int(const json& obj, const char* key, const std::string& where, int fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw InputError(where + ": field '" + key + "' must be an integer");
  return it->get<int>();
}

inline FixedPointFormat parse_format(const json& j, const std::string& where, FixedPointFormat fallback) {
  reject_unknown(j, {"total_bits", "frac_bits"}, where);
  FixedPointFormat f{get_int(j, "total_bits", where, fallback.total_bits),
                     get_int(j, "frac_bits", where, fallback.frac_bits)};
  if (!f.valid()) throw InputError(where + ": invalid fixed-point format");
  return f;
}

inline LayerKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "buffer") return LayerKind::Buffer;
  if (s == "conv") return LayerKind::Conv;
  if (s == "max_pool") return LayerKind::MaxPool;
  if (s == "scale_shift") return LayerKind::ScaleShift;
  if (s == "mux") return LayerKind::Mux;
  if (s == "dense") return LayerKind::Dense;
  if (s == "fifo") return LayerKind::Fifo;
  throw InputError(where + ": unknown layer kind '" + s + "'");
}

}  // namespace detail

inline NetworkSpec parse_network_json(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("network description is not valid JSON: ") + e.what());
  }
  detail::reject_unknown(root, {"name", "clock_hz", "act_format", "scale_format", "layers"}, "network");
  NetworkSpec net;
  net.name = detail::get_field<std::string>(root, "name", "network", "");
  net.clock_hz = detail::get_field<double>(root, "clock_hz", "network", net.clock_hz);
  if (root.contains("act_format")) net.act_format = detail::parse_format(root["act_format"], "act_format", kActivationFormat);
  if (root.contains("scale_format")) net.scale_format = detail::parse_format(root["scale_format"], "scale_format", kScaleFormat);
  if (!root.contains("layers") || !root["layers"].is_array()) throw InputError("network: 'layers' must be an array");

  const std::set<std::string> allowed = {"kind", "name", "in_width", "in_channels", "kernel",
                                         "stride", "filters", "epsilon", "pixel_interval",
                                         "activation", "cse", "arity", "lanes", "scale_rule"};
  std::size_t index = 0;
  for (const auto& jl : root["layers"]) {
    const std::string where = "layers[" + std::to_string(index++) + "]";
    detail::reject_unknown(jl, allowed, where);
    if (!jl.contains("kind")) throw InputError(where + ": missing 'kind'");
    LayerSpec l;
    l.kind = detail::parse_kind(detail::get_field<std::string>(jl, "kind", where, ""), where);
    l.name = detail::get_field<std::string>(jl, "name", where, "");
    l.in_width = detail::get_int(jl, "in_width", where, 0);
    l.in_channels = detail::get_int(jl, "in_channels", where, 0);
    l.kernel = detail::get_int(jl, "kernel", where, l.kind == LayerKind::MaxPool ? 2 : 1);
    l.stride = detail::get_int(jl, "stride", where, l.kind == LayerKind::MaxPool ? 2 : 1);
    l.filters = detail::get_int(jl, "filters", where, 0);
    l.epsilon = detail::get_field<double>(jl, "epsilon", where, 0.0);
    l.pixel_interval = detail::get_int(jl, "pixel_interval", where, 0);
    l.arity = detail::get_int(jl, "arity", where, 2);
    l.lanes = detail::get_int(jl, "lanes", where, 0);
    const auto act = detail::get_field<std::string>(jl, "activation", where, "none");
    if (act == "none") l.activation = Activation::None;
    else if (act == "relu") l.activation = Activation::ReLU;
    else throw InputError(where + ": activation must be 'none' or 'relu'");
    l.cse = parse_cse_method(detail::get_field<std::string>(jl, "cse", where, "bu"));
    const auto rule = detail::get_field<std::string>(jl, "scale_rule", where, "mean_surviving");
    if (rule == "mean_surviving") l.scale_rule = ScaleRule::MeanSurviving;
    else if (rule == "mean_all") l.scale_rule = ScaleRule::MeanAll;
    else throw InputError(where + ": scale_rule must be 'mean_surviving' or 'mean_all'");
    net.layers.push_back(std::move(l));
  }
  return validate(std::move(net));
}

inline NetworkSpec load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open network description '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network_json(ss.str());
}

}  // namespace ternroll
