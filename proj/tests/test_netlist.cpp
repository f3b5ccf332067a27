#include <gtest/gtest.h>

#include <array>
#include <random>

#include "ternroll/netlist.hpp"
#include "test_util.hpp"

namespace ternroll {
namespace {

AdderGraph random_graph(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> rows(1, 12), cols(1, 40), pick(0, 2), sched(0, 2);
  const double sp = std::uniform_real_distribution<double>(0.3, 0.9)(rng);
  auto m = testing::random_ternary(static_cast<std::size_t>(rows(rng)), static_cast<std::size_t>(cols(rng)), sp, rng);
  const CseMethod method = std::array{CseMethod::None, CseMethod::TopDown, CseMethod::BottomUp}[pick(rng)];
  const int interval = std::array{1, 4, 16}[sched(rng)];
  const int arity = interval == 1 && pick(rng) == 0 ? 3 : 2;
  return schedule_serial(build_tree(m, method, arity), interval);
}

// Symbolic value of a node over the input ports.
std::vector<int> symbolic(const AdderGraph& g, NodeId id) {
  std::vector<std::vector<int>> val(g.nodes.size());
  for (NodeId k = 0; k <= id; ++k) {
    const Node& n = g.nodes[k];
    if (n.kind == NodeKind::Input) {
      val[k].assign(g.num_inputs, 0);
      val[k][n.index] = 1;
      continue;
    }
    val[k].assign(g.num_inputs, 0);
    for (const auto& op : n.operands) {
      for (std::size_t c = 0; c < g.num_inputs; ++c) val[k][c] += op.sign * val[op.node][c];
    }
  }
  return val[id];
}

TEST(Netlist, SingleFilterHasFourAdders) {
  const AdderGraph g = build_tree(testing::single_filter_matrix(), CseMethod::None, 2);
  const std::string text = emit_netlist(g, {"z0"});
  EXPECT_EQ(text.rfind("ngl layer z0 inputs 9 outputs 1 arity 2 bits 16 digits 1\n", 0), 0u) << text;
  std::size_t adds = 0;
  for (std::size_t at = text.find(" add "); at != std::string::npos; at = text.find(" add ", at + 1)) ++adds;
  EXPECT_EQ(adds, 4u);
  NetlistMeta meta;
  const AdderGraph back = parse_netlist(text, &meta);
  EXPECT_EQ(meta.layer, "z0");
  EXPECT_EQ(back, g);
  NodeId out = 0;
  for (NodeId k = 0; k < back.nodes.size(); ++k) {
    if (back.nodes[k].kind == NodeKind::Output) out = k;
  }
  EXPECT_EQ(symbolic(back, out), (std::vector<int>{-1, 0, 1, 0, 1, 1, 0, -1, 0}));
}

TEST(Netlist, EmptyGraphIsHeaderOnly) {
  AdderGraph g;
  EXPECT_EQ(emit_netlist(g), "ngl layer - inputs 0 outputs 0 arity 2 bits 16 digits 1\n");
  EXPECT_EQ(parse_netlist(emit_netlist(g)), g);
}

TEST(Netlist, RoundTripOnRandomGraphs) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 100; ++k) {
    const AdderGraph g = random_graph(rng);
    const std::string text = emit_netlist(g);
    EXPECT_EQ(emit_netlist(g), text);
    const AdderGraph back = parse_netlist(text);
    ASSERT_EQ(emit_netlist(back), text);
    for (int t = 0; t < 5; ++t) {
      const auto x = testing::random_inputs(g.num_inputs, rng);
      ASSERT_EQ(evaluate_serial(back, x), evaluate_serial(g, x));
      ASSERT_EQ(evaluate(back, x), evaluate(g, x));
    }
  }
}

TEST(Netlist, Errors) {
  const std::string ok =
      "ngl layer L inputs 2 outputs 1 arity 2 bits 16 digits 1\n"
      "node 0 input 0 16 #0\n"
      "node 1 input 0 16 #1\n"
      "node 2 add 1 16 +0 -1\n"
      "node 3 output 1 16 #0 +2\n";
  EXPECT_NO_THROW(parse_netlist(ok));

  auto expect_error = [](const std::string& text, const std::string& fragment) {
    try {
      parse_netlist(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  std::string fwd = ok;
  fwd.replace(fwd.find("+0 -1"), 5, "+0 -3");
  expect_error(fwd, "dangling reference to node 3");
  expect_error(ok.substr(0, ok.size() - 1), "final newline");
  std::string gap = ok;
  gap.replace(gap.find("node 2 add"), 10, "node 2  add");
  expect_error(gap, "line 4, column 8");
  std::string width = ok;
  width.replace(width.find("add 1 16"), 8, "add 1 4");
  expect_error(width, "digit width");
  std::string stage = ok;
  stage.replace(stage.find("add 1 16"), 8, "add 2 16");
  expect_error(stage, "aligned");
  expect_error("", "empty");
  expect_error("ngl layer L inputs 01 outputs 1 arity 2 bits 16 digits 1\n", "line 1");
}

TEST(Netlist, EmitRejectsInvalidGraphs) {
  AdderGraph g = build_tree(testing::single_filter_matrix(), CseMethod::None, 2);
  for (auto& n : g.nodes) {
    if (n.kind == NodeKind::Add) {
      ++n.stage;
      break;
    }
  }
  EXPECT_THROW(emit_netlist(g), InputError);
  EXPECT_THROW(emit_netlist(build_tree(testing::single_filter_matrix(), CseMethod::None, 2), {"has space"}), InputError);
}

// Any single-byte mutation either fails to parse or yields a graph that
// re-emits to the mutated text and evaluates consistently.
TEST(Netlist, FuzzedMutationsNeverMisparse) {
  std::mt19937_64 rng(47);
  const std::string alphabet = "0123456789 +-#\nabdelnoptuy";
  std::uniform_int_distribution<std::size_t> pick_char(0, alphabet.size() - 1);
  int accepted = 0;
  for (int k = 0; k < 3000; ++k) {
    const AdderGraph g = random_graph(rng);
    std::string text = emit_netlist(g);
    std::uniform_int_distribution<std::size_t> pos(0, text.size() - 1);
    const std::size_t at = pos(rng);
    switch (k % 3) {
      case 0: text[at] = alphabet[pick_char(rng)]; break;
      case 1: text.erase(at, 1); break;
      default: text.insert(at, 1, alphabet[pick_char(rng)]); break;
    }
    AdderGraph back;
    NetlistMeta meta;
    try {
      back = parse_netlist(text, &meta);
    } catch (const InputError&) {
      continue;
    }
    ++accepted;
    ASSERT_EQ(emit_netlist(back, meta), text);
    const auto x = testing::random_inputs(back.num_inputs, rng);
    auto exact = evaluate(back, x);
    for (auto& v : exact) v = wrap_signed(v, back.total_bits);
    ASSERT_EQ(evaluate_serial(back, x), exact);
  }
  RecordProperty("accepted", accepted);
}

}  // namespace
}  // namespace ternroll
