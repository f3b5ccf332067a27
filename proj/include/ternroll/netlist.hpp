#pragma once

// Structural netlist text (.ngl) for a scheduled AdderGraph.
//
//   netlist  := header node*
//   header   := "ngl layer " NAME " inputs " INT " outputs " INT " arity " INT
//               " bits " INT " digits " INT "\n"
//   node     := "node " INT " " KIND " " INT " " INT operands "\n"
//   KIND     := "input" | "add" | "delay" | "output"
//   operands := (" #" INT)? (" " SIGN INT)*      SIGN := "+" | "-"
//
// Node fields are id, kind, stage and digit width. `#k` is the port index
// of an input or output node; signed entries reference earlier node ids.
// Tokens are separated by exactly one space and integers carry no leading
// zeros, so a successful parse always re-emits the identical text.

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/treegen.hpp"

namespace ternroll {

struct NetlistMeta {
  std::string layer = "-";
};

inline std::string emit_netlist(const AdderGraph& g, const NetlistMeta& meta = {}) {
  try {
    validate(g);
  } catch (const InvariantError& e) {
    throw InputError(std::string("emit: ") + e.what());
  }
  const std::string name = meta.layer.empty() ? "-" : meta.layer;
  for (char ch : name) {
    if (ch == ' ' || ch == '\n' || ch == '\t' || ch == '\r') throw InputError("emit: layer name contains whitespace");
  }
  std::string out = "ngl layer " + name + " inputs " + std::to_string(g.num_inputs) + " outputs " +
                    std::to_string(g.num_outputs) + " arity " + std::to_string(g.arity) + " bits " +
                    std::to_string(g.total_bits) + " digits " + std::to_string(g.digits) + "\n";
  const std::string width = std::to_string(g.digit_width());
  for (NodeId id = 0; id < g.nodes.size(); ++id) {
    const Node& n = g.nodes[id];
    out += "node " + std::to_string(id) + " " + to_string(n.kind) + " " + std::to_string(n.stage) + " " + width;
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Output) out += " #" + std::to_string(n.index);
    for (const auto& op : n.operands) out += (op.sign > 0 ? " +" : " -") + std::to_string(op.node);
    out += "\n";
  }
  return out;
}

namespace detail {

class NetlistParser {
 public:
  NetlistParser(std::string_view text, NetlistMeta* meta) : text_(text), meta_(meta) {}

  AdderGraph run() {
    if (text_.empty()) fail(1, 1, "empty netlist");
    if (text_.back() != '\n') fail(line_count(), 1, "missing final newline");
    std::size_t start = 0;
    std::size_t line_no = 0;
    AdderGraph g;
    while (start < text_.size()) {
      const std::size_t end = text_.find('\n', start);
      line_ = text_.substr(start, end - start);
      ++line_no;
      lno_ = line_no;
      pos_ = 0;
      if (line_no == 1) header(g);
      else node(g);
      start = end + 1;
    }
    if (line_no == 0) fail(1, 1, "missing header");
    try {
      validate(g);
    } catch (const InvariantError& e) {
      throw InputError(std::string("netlist: ") + e.what());
    }
    return g;
  }

 private:
  [[noreturn]] void fail(std::size_t line, std::size_t col, const std::string& what) const {
    throw InputError("netlist line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
  }
  [[noreturn]] void fail(const std::string& what) const { fail(lno_, pos_ + 1, what); }

  std::size_t line_count() const {
    std::size_t n = 1;
    for (std::size_t k = 0; k + 1 < text_.size(); ++k) n += text_[k] == '\n';
    return n;
  }

  bool at_end() const { return pos_ >= line_.size(); }

  // Next token; requires exactly one separating space unless at the start.
  std::string_view token(const char* what) {
    if (pos_ > 0) {
      if (at_end()) fail(std::string("expected ") + what);
      if (line_[pos_] != ' ') fail("expected a single space");
      ++pos_;
    }
    const std::size_t b = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
    if (b == pos_) {
      pos_ = b;
      fail(std::string("expected ") + what);
    }
    tok_start_ = b;
    return line_.substr(b, pos_ - b);
  }

  void keyword(const char* kw) {
    auto t = token(kw);
    if (t != kw) fail_at_token(std::string("expected '") + kw + "'");
  }

  [[noreturn]] void fail_at_token(const std::string& what) const { fail(lno_, tok_start_ + 1, what); }

  static bool parse_uint(std::string_view t, std::uint64_t& v) {
    if (t.empty() || (t.size() > 1 && t[0] == '0')) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    return ec == std::errc() && p == t.data() + t.size();
  }

  std::uint64_t number(const char* what, std::uint64_t limit) {
    auto t = token(what);
    std::uint64_t v = 0;
    if (!parse_uint(t, v)) fail_at_token(std::string("expected ") + what + " (non-negative integer)");
    if (v > limit) fail_at_token(std::string(what) + " out of range");
    return v;
  }

  void header(AdderGraph& g) {
    keyword("ngl");
    keyword("layer");
    auto name = token("layer name");
    if (meta_) meta_->layer = std::string(name);
    keyword("inputs");
    g.num_inputs = number("input count", 1u << 24);
    keyword("outputs");
    g.num_outputs = number("output count", 1u << 24);
    keyword("arity");
    g.arity = static_cast<int>(number("arity", 3));
    if (g.arity < 2) fail_at_token("arity must be 2 or 3");
    keyword("bits");
    g.total_bits = static_cast<int>(number("word width", 64));
    if (g.total_bits < 1) fail_at_token("word width must be >= 1");
    keyword("digits");
    g.digits = static_cast<int>(number("digit count", 64));
    if (g.digits < 1 || g.total_bits % g.digits != 0) fail_at_token("digit count must divide the word width");
    if (!at_end()) fail("unexpected text after header");
  }

  void node(AdderGraph& g) {
    keyword("node");
    const std::uint64_t id = number("node id", 1u << 30);
    if (id != g.nodes.size()) fail_at_token("node ids must be consecutive from 0");
    Node n;
    auto kind = token("node kind");
    if (kind == "input") n.kind = NodeKind::Input;
    else if (kind == "add") n.kind = NodeKind::Add;
    else if (kind == "delay") n.kind = NodeKind::Delay;
    else if (kind == "output") n.kind = NodeKind::Output;
    else fail_at_token("unknown node kind '" + std::string(kind) + "'");
    n.stage = static_cast<int>(number("stage", 1u << 30));
    const std::uint64_t width = number("digit width", 64);
    if (width != static_cast<std::uint64_t>(g.digit_width())) fail_at_token("digit width disagrees with the header");
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Output) {
      auto t = token("port index");
      std::uint64_t k = 0;
      if (t.size() < 2 || t[0] != '#' || !parse_uint(t.substr(1), k)) fail_at_token("expected port index '#<k>'");
      n.index = static_cast<std::uint32_t>(k);
      if (k > (1u << 24)) fail_at_token("port index out of range");
    }
    while (!at_end()) {
      auto t = token("operand");
      std::uint64_t ref = 0;
      if (t.size() < 2 || (t[0] != '+' && t[0] != '-') || !parse_uint(t.substr(1), ref)) {
        fail_at_token("expected signed operand '+<id>' or '-<id>'");
      }
      if (ref >= id) fail_at_token("dangling reference to node " + std::string(t.substr(1)));
      n.operands.push_back({static_cast<NodeId>(ref), static_cast<std::int8_t>(t[0] == '+' ? 1 : -1)});
    }
    g.nodes.push_back(std::move(n));
  }

  std::string_view text_;
  NetlistMeta* meta_ = nullptr;
  std::string_view line_;
  std::size_t lno_ = 0;
  std::size_t pos_ = 0;
  std::size_t tok_start_ = 0;
};

}  // namespace detail

inline AdderGraph parse_netlist(std::string_view text, NetlistMeta* meta = nullptr) {
  return detail::NetlistParser(text, meta).run();
}

}  // namespace ternroll
