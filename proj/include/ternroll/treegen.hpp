#pragma once

// Pipelined adder graphs built from CSE output.
//
// Every Add node is registered, so a node's stage is one more than the
// stage of all of its operands. Values consumed later than they are
// produced travel through shared Delay chains (one Delay node per value
// per stage). Layer outputs are aligned to a common stage.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/cse.hpp"
#include "ternroll/serial.hpp"

namespace ternroll {

enum class NodeKind : std::uint8_t { Input, Add, Delay, Output };

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Add: return "add";
    case NodeKind::Delay: return "delay";
    case NodeKind::Output: return "output";
  }
  return "?";
}

using NodeId = std::uint32_t;

struct Operand {
  NodeId node = 0;
  std::int8_t sign = 1;
  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Node {
  NodeKind kind = NodeKind::Input;
  int stage = 0;
  // Input: input position. Output: output row. Unused otherwise.
  std::uint32_t index = 0;
  std::vector<Operand> operands;
  friend bool operator==(const Node&, const Node&) = default;
};

// Node ids are a topological order: operands always have smaller ids.
struct AdderGraph {
  std::vector<Node> nodes;
  std::size_t num_inputs = 0;
  std::size_t num_outputs = 0;
  int arity = 2;
  int total_bits = 16;
  // Digits per sample: 1 = parallel word, total_bits = bit-serial.
  int digits = 1;

  int digit_width() const { return total_bits / digits; }
  friend bool operator==(const AdderGraph&, const AdderGraph&) = default;
};

// Throws InvariantError on any structural violation: forward references,
// misaligned stages, bad arities, duplicated or missing ports.
inline void validate(const AdderGraph& g) {
  auto fail = [](NodeId id, const std::string& what) {
    throw InvariantError("adder graph node " + std::to_string(id) + ": " + what);
  };
  if (g.digits < 1 || g.total_bits < 1 || g.total_bits > 64 || g.total_bits % g.digits != 0) {
    throw InvariantError("adder graph: digit count must divide the word width");
  }
  if (g.arity != 2 && g.arity != 3) throw InvariantError("adder graph: arity must be 2 or 3");
  std::vector<bool> seen_in(g.num_inputs, false), seen_out(g.num_outputs, false);
  int out_stage = -1;
  for (NodeId id = 0; id < g.nodes.size(); ++id) {
    const Node& n = g.nodes[id];
    for (const auto& op : n.operands) {
      if (op.node >= id) fail(id, "operand " + std::to_string(op.node) + " is not an earlier node");
      if (op.sign != 1 && op.sign != -1) fail(id, "operand sign must be +1 or -1");
      const NodeKind k = g.nodes[op.node].kind;
      if (k == NodeKind::Output) fail(id, "an output node cannot be an operand");
    }
    switch (n.kind) {
      case NodeKind::Input:
        if (!n.operands.empty()) fail(id, "input node has operands");
        if (n.stage != 0) fail(id, "input node must be at stage 0");
        if (n.index >= g.num_inputs || seen_in[n.index]) fail(id, "input index out of range or repeated");
        seen_in[n.index] = true;
        break;
      case NodeKind::Add:
        if (n.operands.size() < 2 || n.operands.size() > static_cast<std::size_t>(g.arity)) {
          fail(id, "add node must have 2.." + std::to_string(g.arity) + " operands");
        }
        for (const auto& op : n.operands) {
          if (g.nodes[op.node].stage != n.stage - 1) fail(id, "operand stage is not aligned");
        }
        break;
      case NodeKind::Delay:
        if (n.operands.size() != 1) fail(id, "delay node must have exactly one operand");
        if (n.operands[0].sign != 1) fail(id, "delay operand must be positive");
        if (g.nodes[n.operands[0].node].stage != n.stage - 1) fail(id, "delay stage is not aligned");
        break;
      case NodeKind::Output:
        if (n.operands.size() > 1) fail(id, "output node has more than one operand");
        if (!n.operands.empty() && g.nodes[n.operands[0].node].stage != n.stage) fail(id, "output stage differs from its source");
        if (n.index >= g.num_outputs || seen_out[n.index]) fail(id, "output index out of range or repeated");
        seen_out[n.index] = true;
        if (out_stage >= 0 && n.stage != out_stage) fail(id, "outputs are not stage-aligned");
        out_stage = n.stage;
        break;
    }
  }
  for (bool b : seen_in) {
    if (!b) throw InvariantError("adder graph: missing input node");
  }
  for (bool b : seen_out) {
    if (!b) throw InvariantError("adder graph: missing output node");
  }
}

struct BuildOptions {
  // Pad every output to the deepest output stage.
  bool align_outputs = true;
};

namespace detail {

class TreeBuilder {
 public:
  struct Item {
    NodeId node = 0;
    std::int8_t sign = 1;
    int stage = 0;
  };

  TreeBuilder(AdderGraph& g) : g_(g) {}

  NodeId add_node(Node n) {
    g_.nodes.push_back(std::move(n));
    chains_.emplace_back();
    return static_cast<NodeId>(g_.nodes.size() - 1);
  }

  // The value of `id` delayed to `target` stage, reusing existing chains.
  NodeId delayed(NodeId id, int target) {
    const int base = g_.nodes[id].stage;
    if (target < base) throw InvariantError("cannot delay a value to an earlier stage");
    if (target == base) return id;
    const std::size_t need = static_cast<std::size_t>(target - base);
    while (chains_[id].size() < need) {
      const NodeId prev = chains_[id].empty() ? id : chains_[id].back();
      Node d{NodeKind::Delay, g_.nodes[prev].stage + 1, 0, {{prev, 1}}};
      const NodeId nid = add_node(std::move(d));
      chains_[id].push_back(nid);
    }
    return chains_[id][need - 1];
  }

  Item delay_item(const Item& it, int target) { return {delayed(it.node, target), it.sign, target}; }

  Item combine(const std::vector<Item>& chunk) {
    const int stage = chunk.front().stage + 1;
    bool all_negative = true;
    for (const auto& it : chunk) all_negative = all_negative && it.sign < 0;
    Node n{NodeKind::Add, stage, 0, {}};
    for (const auto& it : chunk) {
      n.operands.push_back({it.node, static_cast<std::int8_t>(all_negative ? 1 : it.sign)});
    }
    const NodeId id = add_node(std::move(n));
    return {id, static_cast<std::int8_t>(all_negative ? -1 : 1), stage};
  }

  // Level-by-level packing. At each stage the ready items are grouped in
  // runs of `arity`, left to right on even stages and right to left on odd
  // ones, so a value left over at one stage is consumed first at the next.
  // A lone leftover is delayed; two leftovers with arity 3 share a
  // 2-input adder.
  Item reduce(std::vector<Item> items, int arity) {
    if (items.empty()) throw InvariantError("reduce: empty expression");
    while (items.size() > 1) {
      int s = items.front().stage;
      for (const auto& it : items) s = std::min(s, it.stage);
      std::vector<std::size_t> pos;
      for (std::size_t k = 0; k < items.size(); ++k) {
        if (items[k].stage == s) pos.push_back(k);
      }
      if (pos.size() == 1) {
        items[pos[0]] = delay_item(items[pos[0]], s + 1);
        continue;
      }
      if (s % 2 != 0) std::reverse(pos.begin(), pos.end());

      std::vector<bool> drop(items.size(), false);
      std::size_t k = 0;
      auto emit = [&](std::size_t count) {
        std::vector<std::size_t> group(pos.begin() + static_cast<std::ptrdiff_t>(k),
                                       pos.begin() + static_cast<std::ptrdiff_t>(k + count));
        std::sort(group.begin(), group.end());
        std::vector<Item> chunk;
        for (std::size_t p : group) chunk.push_back(items[p]);
        items[group.front()] = combine(chunk);
        for (std::size_t q = 1; q < group.size(); ++q) drop[group[q]] = true;
        k += count;
      };
      while (pos.size() - k >= static_cast<std::size_t>(arity)) emit(static_cast<std::size_t>(arity));
      const std::size_t rem = pos.size() - k;
      if (rem == 1) {
        items[pos[k]] = delay_item(items[pos[k]], s + 1);
      } else if (rem == 2) {
        emit(2);
      }
      std::vector<Item> next;
      next.reserve(items.size());
      for (std::size_t q = 0; q < items.size(); ++q) {
        if (!drop[q]) next.push_back(items[q]);
      }
      items = std::move(next);
    }
    return items.front();
  }

 private:
  AdderGraph& g_;
  std::vector<std::vector<NodeId>> chains_;
};

}  // namespace detail

inline AdderGraph build_tree(const CseResult& r, int arity, const BuildOptions& opts = {}) {
  if (arity != 2 && arity != 3) throw InputError("adder arity must be 2 or 3");
  validate(r);
  AdderGraph g;
  g.num_inputs = r.num_inputs;
  g.num_outputs = r.outputs.size();
  g.arity = arity;
  detail::TreeBuilder b(g);
  using Item = detail::TreeBuilder::Item;

  std::unordered_map<Var, Item> value;
  for (std::size_t c = 0; c < r.num_inputs; ++c) {
    const NodeId id = b.add_node(Node{NodeKind::Input, 0, static_cast<std::uint32_t>(c), {}});
    value[static_cast<Var>(c)] = {id, 1, 0};
  }
  auto items_of = [&](const Expression& e) {
    std::vector<Item> items;
    items.reserve(e.terms.size());
    for (const auto& t : e.terms) {
      Item it = value.at(t.var);
      it.sign = static_cast<std::int8_t>(it.sign * t.sign);
      items.push_back(it);
    }
    return items;
  };
  for (const auto& d : r.definitions) value[d.id] = b.reduce(items_of(d), arity);

  std::vector<std::optional<Item>> roots;
  roots.reserve(r.outputs.size());
  int target = 0;
  for (const auto& o : r.outputs) {
    if (o.empty()) {
      roots.emplace_back();
      continue;
    }
    roots.push_back(b.reduce(items_of(o), arity));
    target = std::max(target, roots.back()->stage);
  }
  for (std::size_t k = 0; k < roots.size(); ++k) {
    Node out{NodeKind::Output, target, static_cast<std::uint32_t>(k), {}};
    if (roots[k]) {
      const int stage = opts.align_outputs ? target : roots[k]->stage;
      const Item it = b.delay_item(*roots[k], stage);
      out.stage = stage;
      out.operands.push_back({it.node, it.sign});
    }
    b.add_node(std::move(out));
  }
  return g;
}

inline AdderGraph build_tree(const TernaryMatrix& m, CseMethod method, int arity) {
  return build_tree(run_cse(m, method), arity);
}

struct CostReport {
  std::size_t adders = 0;
  std::size_t registers = 0;
  std::size_t adds_plus_regs = 0;
  int depth = 0;
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

inline CostReport cost(const AdderGraph& g) {
  CostReport c;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::Add) ++c.adders;
    if (n.kind == NodeKind::Delay) ++c.registers;
    c.depth = std::max(c.depth, n.stage);
  }
  c.adds_plus_regs = c.adders + c.registers;
  return c;
}

// Digit count for a layer whose pixels arrive every `pixel_interval`
// cycles: the adders may take that many cycles per sample, capped at one
// bit per cycle.
inline int serial_digits(int pixel_interval, int total_bits) {
  if (pixel_interval < 1) throw InputError("pixel interval must be >= 1");
  const int d = std::min(pixel_interval, total_bits);
  if (total_bits % d != 0) {
    throw InputError("pixel interval " + std::to_string(pixel_interval) + " gives " + std::to_string(d) +
                     " digits, which does not divide a " + std::to_string(total_bits) + "-bit word");
  }
  return d;
}

inline AdderGraph schedule_serial(AdderGraph g, int pixel_interval, int total_bits = 16) {
  g.total_bits = total_bits;
  g.digits = serial_digits(pixel_interval, total_bits);
  return g;
}

struct CycleModel {
  int cycles_per_sample = 1;
  int latency = 0;  // depth + digits - 1
};

inline CycleModel cycle_model(const AdderGraph& g) {
  return {g.digits, cost(g).depth + g.digits - 1};
}

// Rough slice-equivalent area, kept apart from the node counts. A 16-bit
// parallel adder is taken as 2 slices (8 bits of carry chain per slice)
// and a slice as holding 16 flip-flops; serial adders scale by 1/digits.
struct AreaEstimate {
  double adder_slices = 0;
  double register_slices = 0;
  double area_factor = 1;  // 1/digits
};

inline AreaEstimate area_estimate(const AdderGraph& g) {
  const CostReport c = cost(g);
  const double width = static_cast<double>(g.digit_width());
  AreaEstimate a;
  a.area_factor = 1.0 / g.digits;
  a.adder_slices = static_cast<double>(c.adders) * width / 8.0;
  a.register_slices = static_cast<double>(c.registers) * width / 16.0;
  return a;
}

// Exact evaluation of `batch` input vectors stored row-major
// (batch x num_inputs). Returns batch x num_outputs, row-major.
inline std::vector<std::int64_t> evaluate_batch(const AdderGraph& g, std::span<const std::int64_t> inputs,
                                                std::size_t batch) {
  if (inputs.size() != batch * g.num_inputs) throw InputError("evaluate: input length does not match the graph");
  std::vector<std::int64_t> val(g.nodes.size() * batch, 0);
  std::vector<std::int64_t> out(batch * g.num_outputs, 0);
  for (NodeId id = 0; id < g.nodes.size(); ++id) {
    const Node& n = g.nodes[id];
    std::int64_t* v = val.data() + static_cast<std::size_t>(id) * batch;
    switch (n.kind) {
      case NodeKind::Input:
        for (std::size_t b = 0; b < batch; ++b) v[b] = inputs[b * g.num_inputs + n.index];
        break;
      case NodeKind::Add:
      case NodeKind::Delay:
        for (const auto& op : n.operands) {
          const std::int64_t* src = val.data() + static_cast<std::size_t>(op.node) * batch;
          if (op.sign > 0) {
            for (std::size_t b = 0; b < batch; ++b) v[b] += src[b];
          } else {
            for (std::size_t b = 0; b < batch; ++b) v[b] -= src[b];
          }
        }
        break;
      case NodeKind::Output:
        if (!n.operands.empty()) {
          const auto& op = n.operands[0];
          const std::int64_t* src = val.data() + static_cast<std::size_t>(op.node) * batch;
          for (std::size_t b = 0; b < batch; ++b) out[b * g.num_outputs + n.index] = op.sign * src[b];
        }
        break;
    }
  }
  return out;
}

inline std::vector<std::int64_t> evaluate(const AdderGraph& g, std::span<const std::int64_t> inputs) {
  return evaluate_batch(g, inputs, 1);
}

inline std::vector<std::int64_t> evaluate(const AdderGraph& g, std::span<const FixedValue> inputs) {
  std::vector<std::int64_t> raw(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) raw[k] = inputs[k].raw;
  return evaluate(g, std::span<const std::int64_t>(raw));
}

// Digit-level simulation of the scheduled graph: every Add node runs as a
// serial adder over g.digits digits of g.total_bits-bit words. Results are
// total_bits-bit two's complement, sign-extended. Output negation is a
// two's-complement negate of the final word.
inline std::vector<std::int64_t> evaluate_serial_batch(const AdderGraph& g, std::span<const std::int64_t> inputs,
                                                       std::size_t batch) {
  if (inputs.size() != batch * g.num_inputs) throw InputError("evaluate: input length does not match the graph");
  const int bits = g.total_bits;
  const int width = g.digit_width();
  const std::uint64_t word_mask = low_mask(bits);
  const std::uint64_t digit_mask = low_mask(width);
  std::vector<std::uint64_t> val(g.nodes.size() * batch, 0);
  std::vector<std::int64_t> out(batch * g.num_outputs, 0);
  std::vector<std::uint64_t> carry(batch);
  for (NodeId id = 0; id < g.nodes.size(); ++id) {
    const Node& n = g.nodes[id];
    std::uint64_t* v = val.data() + static_cast<std::size_t>(id) * batch;
    switch (n.kind) {
      case NodeKind::Input:
        for (std::size_t b = 0; b < batch; ++b) {
          v[b] = static_cast<std::uint64_t>(inputs[b * g.num_inputs + n.index]) & word_mask;
        }
        break;
      case NodeKind::Delay: {
        const std::uint64_t* src = val.data() + static_cast<std::size_t>(n.operands[0].node) * batch;
        std::copy(src, src + batch, v);
        break;
      }
      case NodeKind::Add: {
        std::uint64_t reset = 0;
        for (const auto& op : n.operands) reset += op.sign < 0 ? 1 : 0;
        std::fill(carry.begin(), carry.end(), reset);
        for (int d = 0; d < g.digits; ++d) {
          const int shift = d * width;
          for (std::size_t b = 0; b < batch; ++b) {
            std::uint64_t sum = carry[b];
            for (const auto& op : n.operands) {
              const std::uint64_t digit = (val[static_cast<std::size_t>(op.node) * batch + b] >> shift) & digit_mask;
              sum += op.sign < 0 ? (~digit & digit_mask) : digit;
            }
            carry[b] = sum >> width;
            v[b] |= (sum & digit_mask) << shift;
          }
        }
        break;
      }
      case NodeKind::Output:
        if (!n.operands.empty()) {
          const auto& op = n.operands[0];
          for (std::size_t b = 0; b < batch; ++b) {
            std::uint64_t w = val[static_cast<std::size_t>(op.node) * batch + b];
            if (op.sign < 0) w = (~w + 1) & word_mask;
            out[b * g.num_outputs + n.index] = wrap_signed(static_cast<std::int64_t>(w), bits);
          }
        }
        break;
    }
  }
  return out;
}

inline std::vector<std::int64_t> evaluate_serial(const AdderGraph& g, std::span<const std::int64_t> inputs) {
  return evaluate_serial_batch(g, inputs, 1);
}

}  // namespace ternroll
