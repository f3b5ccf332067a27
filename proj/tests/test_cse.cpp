#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "ternroll/cse.hpp"
#include "test_util.hpp"

namespace ternroll {
namespace {

using testing::worked_matrix;
using testing::random_ternary;

std::vector<std::string> listing(const std::vector<Expression>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(format_expression(r));
  return out;
}

TEST(TdCse, FirstExtractionMatchesWorkedExample) {
  std::vector<std::string> after_first;
  TdOptions opts;
  int step = 0;
  opts.on_step = [&](const TdStep& s) {
    if (step++ != 0) return;
    EXPECT_EQ(s.pair, (PairKey{2, 3, 1}));
    EXPECT_EQ(s.frequency, 3u);
    EXPECT_EQ(s.new_var, 6u);
    after_first = listing(*s.rows);
  };
  CseResult r = td_cse(worked_matrix(), opts);
  ASSERT_FALSE(r.definitions.empty());
  EXPECT_EQ(format_expression(r.definitions.front()), "+x2 +x3");
  EXPECT_EQ(r.definitions.front().id, 6u);
  const std::vector<std::string> want = {"+x6",           "+x0 +x4 +x6", "+x1 +x4 +x5", "+x1 +x5",
                                         "+x0 +x6",       "+x0 +x3",     "+x1 +x4 +x5"};
  EXPECT_EQ(after_first, want);
  EXPECT_TRUE(reproduces(worked_matrix(), r));
  EXPECT_TRUE(verify_equivalence(worked_matrix(), r, 100));
}

TEST(TdCse, DisjointRowsAreUntouched) {
  auto m = parse_tmx("tmx 3 3\n+00\n0-0\n00+\n");
  CseResult r = td_cse(m);
  EXPECT_TRUE(r.definitions.empty());
  EXPECT_EQ(r.outputs, identity_cse(m).outputs);
}

// Brute force: every sequence of legal pair extractions (count >= 2) on a
// 2-row instance, replayed independently of the pass.
TEST(TdCse, NegatedRowSharesOneDefinition) {
  auto m = parse_tmx("tmx 2 2\n++\n--\n");
  CseResult r = td_cse(m);
  ASSERT_EQ(r.definitions.size(), 1u);
  EXPECT_EQ(format_expression(r.definitions[0]), "+x0 +x1");
  EXPECT_EQ(r.definitions[0].id, 2u);
  EXPECT_EQ(format_expression(r.outputs[0]), "+x2");
  EXPECT_EQ(format_expression(r.outputs[1]), "-x2");

  // Oracle: the only shared pair is {x0, x1} (in both orientations); after
  // extracting it no pair remains, so exactly one extraction is possible.
  std::size_t sequences = 0;
  std::function<void(std::vector<std::map<Var, int>>, Var)> walk = [&](std::vector<std::map<Var, int>> rows, Var next) {
    std::map<std::pair<Var, Var>, std::vector<std::size_t>> pairs;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (auto a = rows[r].begin(); a != rows[r].end(); ++a) {
        for (auto b = std::next(a); b != rows[r].end(); ++b) pairs[{a->first, b->first}].push_back(r);
      }
    }
    bool any = false;
    for (auto& [p, hits] : pairs) {
      if (hits.size() < 2) continue;
      any = true;
      auto copy = rows;
      for (auto h : hits) {
        int o = copy[h][p.first];
        copy[h].erase(p.first);
        copy[h].erase(p.second);
        copy[h][next] = o;
      }
      walk(copy, next + 1);
    }
    if (!any) {
      ++sequences;
      EXPECT_EQ(rows[0].size(), 1u);
      EXPECT_EQ(rows[0].at(2), 1);
      EXPECT_EQ(rows[1].at(2), -1);
    }
  };
  walk({{{0, 1}, {1, 1}}, {{0, -1}, {1, -1}}}, 2);
  EXPECT_EQ(sequences, 1u);
}

TEST(TdCse, IncrementalTableEqualsRebuiltTable) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = random_ternary(12, 40, 0.6, rng);
    std::size_t steps = 0;
    TdOptions opts;
    opts.on_step = [&](const TdStep& s) {
      ++steps;
      EXPECT_TRUE(*s.table == PairTable::build(*s.rows)) << "after extraction " << steps;
    };
    CseResult r = td_cse(m, opts);
    EXPECT_GT(steps, 0u);
    EXPECT_TRUE(reproduces(m, r));
  }
}

TEST(TdCse, ReferenceModeGivesIdenticalResult) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    auto m = random_ternary(10, 30, 0.5, rng);
    TdOptions ref;
    ref.reference_mode = true;
    CseResult a = td_cse(m);
    CseResult b = td_cse(m, ref);
    EXPECT_EQ(format_cse(a), format_cse(b));
  }
}

TEST(TdCse, EachExtractionSavesFrequencyMinusOneAdders) {
  std::mt19937_64 rng(3);
  auto m = random_ternary(16, 48, 0.7, rng);
  const std::size_t initial = adder_count(identity_cse(m));
  std::size_t adders = initial;
  std::size_t steps = 0;
  TdOptions opts;
  opts.on_step = [&](const TdStep& s) {
    std::size_t now = s.new_var - m.cols() + 1;  // one adder per 2-term definition
    for (const auto& row : *s.rows) now += row.size() > 0 ? row.size() - 1 : 0;
    ASSERT_GE(s.frequency, 2u);
    EXPECT_EQ(adders - now, s.frequency - 1);
    adders = now;
    ++steps;
  };
  CseResult r = td_cse(m, opts);
  EXPECT_LE(steps, initial);
  EXPECT_EQ(adder_count(r), adders);
}

TEST(TdCse, Deterministic) {
  std::mt19937_64 rng(5);
  auto m = random_ternary(20, 60, 0.75, rng);
  EXPECT_EQ(format_cse(td_cse(m)), format_cse(td_cse(m)));
}

TEST(BuCse, WorkedExampleFirstExtractionIsAppendedAsWorkingRow) {
  int step = 0;
  BuOptions opts;
  opts.on_step = [&](const BuStep& s) {
    if (step++ != 0) return;
    EXPECT_EQ(s.new_var, 6u);
    const std::vector<std::string> want = {"+x2 +x3", "+x4 +x6", "+x1 +x4 +x5", "+x1 +x5",
                                           "+x6",     "+x0 +x3", "+x1 +x4 +x5", "+x0 +x2 +x3"};
    EXPECT_EQ(listing(*s.rows), want);
    EXPECT_EQ(s.rewritten, (std::vector<std::uint32_t>{1, 4}));
  };
  CseResult r = bu_cse(worked_matrix(), opts);
  EXPECT_GT(step, 1);
  EXPECT_TRUE(reproduces(worked_matrix(), r));
  EXPECT_TRUE(verify_equivalence(worked_matrix(), r, 100));
}

TEST(BuCse, DuplicateRowsBecomeBareReferences) {
  auto m = parse_tmx("tmx 2 3\n+++\n+++\n");
  CseResult r = bu_cse(m);
  ASSERT_EQ(r.definitions.size(), 1u);
  EXPECT_EQ(format_expression(r.definitions[0]), "+x0 +x1 +x2");
  EXPECT_EQ(format_expression(r.outputs[0]), "+x3");
  EXPECT_EQ(format_expression(r.outputs[1]), "+x3");
}

TEST(BuCse, NegatedOrientationIsShared) {
  auto m = parse_tmx("tmx 2 3\n+-+\n-+-\n");
  CseResult r = bu_cse(m);
  ASSERT_EQ(r.definitions.size(), 1u);
  EXPECT_EQ(format_expression(r.definitions[0]), "+x0 -x1 +x2");
  EXPECT_EQ(format_expression(r.outputs[0]), "+x3");
  EXPECT_EQ(format_expression(r.outputs[1]), "-x3");
}

// Exhaustive oracle over every legal extraction sequence: at each state any
// pair of working rows may give up its full common signed pattern (size >=
// 2), which is appended as a new working row.
struct SequenceSearch {
  using Row = std::map<Var, int>;
  std::size_t best_adders = std::numeric_limits<std::size_t>::max();
  std::set<std::vector<std::vector<std::pair<Var, int>>>> first_patterns;

  static std::size_t adders(const std::vector<Row>& rows) {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.empty() ? 0 : r.size() - 1;
    return n;
  }

  void run(std::vector<Row> rows, Var next, int depth) {
    bool any = false;
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        for (int orient : {1, -1}) {
          std::vector<std::pair<Var, int>> pat;
          for (auto [v, s] : rows[a]) {
            auto it = rows[b].find(v);
            if (it != rows[b].end() && it->second == s * orient) pat.push_back({v, s});
          }
          if (pat.size() < 2) continue;
          if (pat.front().second < 0) {
            for (auto& p : pat) p.second = -p.second;
          }
          any = true;
          auto copy = rows;
          for (auto& row : copy) {
            int o = 0;
            bool holds = true;
            for (auto [v, s] : pat) {
              auto it = row.find(v);
              if (it == row.end()) { holds = false; break; }
              if (o == 0) o = it->second * s;
              if (it->second != o * s) { holds = false; break; }
            }
            if (!holds) continue;
            for (auto [v, s] : pat) row.erase(v);
            row[next] = o;
          }
          Row def;
          for (auto [v, s] : pat) def[v] = s;
          copy.push_back(def);
          if (depth == 0) first_patterns.insert({pat});
          run(copy, next + 1, depth + 1);
        }
      }
    }
    if (!any) best_adders = std::min(best_adders, adders(rows));
  }
};

TEST(BuCse, ThreeRowInstanceMatchesExhaustiveSearch) {
  auto m = parse_tmx("tmx 3 4\n+++0\n++0+\n0++0\n");
  std::vector<SequenceSearch::Row> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    SequenceSearch::Row row;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c)) row[static_cast<Var>(c)] = m(r, c);
    }
    rows.push_back(row);
  }
  SequenceSearch search;
  search.run(rows, 4, 0);

  std::vector<std::vector<Term>> extracted;
  BuOptions opts;
  opts.on_step = [&](const BuStep& s) { extracted.push_back(s.pattern); };
  CseResult r = bu_cse(m, opts);
  ASSERT_FALSE(extracted.empty());
  EXPECT_EQ(format_expression({extracted[0], 0}), "+x0 +x1");
  // The first pattern is one of the legal first moves, and the sequence
  // reaches the optimum found by enumeration.
  std::vector<std::pair<Var, int>> first;
  for (auto t : extracted[0]) first.push_back({t.var, t.sign});
  EXPECT_TRUE(search.first_patterns.count({first}));
  EXPECT_EQ(adder_count(r), search.best_adders);
  EXPECT_EQ(search.best_adders, 4u);
  EXPECT_TRUE(reproduces(m, r));
}

TEST(BuCse, IncrementalPatternMatrixMatchesRebuild) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 4; ++trial) {
    auto m = random_ternary(10, 50, 0.6, rng);
    std::vector<Expression> prev_rows;
    PatternMatrix prev;
    bool have_prev = false;
    BuOptions opts;
    opts.on_step = [&](const BuStep& s) {
      PatternMatrix fresh = PatternMatrix::build(*s.rows);
      EXPECT_TRUE(*s.matrix == fresh);
      for (std::size_t r = 0; r < fresh.size(); ++r) {
        for (std::size_t q = 0; q < fresh.size(); ++q) EXPECT_EQ(fresh.value(r, q), fresh.value(q, r));
      }
      if (have_prev) {
        std::set<std::uint32_t> touched(s.rewritten.begin(), s.rewritten.end());
        for (std::size_t r = 0; r < prev.size(); ++r) {
          for (std::size_t q = 0; q < prev.size(); ++q) {
            if (touched.count(r) || touched.count(q)) continue;
            EXPECT_EQ(fresh.value(r, q), prev.value(r, q));
          }
        }
      }
      prev = fresh;
      have_prev = true;
    };
    CseResult r = bu_cse(m, opts);
    EXPECT_TRUE(reproduces(m, r));
  }
}

TEST(BuCse, DefinitionsAreTopologicallyOrdered) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_ternary(8, 24, 0.5, rng);
    CseResult r = bu_cse(m);
    EXPECT_NO_THROW(validate(r));
    EXPECT_TRUE(reproduces(m, r));
  }
}

TEST(Cse, RandomMatricesReproduceSymbolicallyAndNumerically) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> rows(1, 12), cols(1, 30);
    std::uniform_real_distribution<double> sp(0.3, 0.9);
    auto m = random_ternary(rows(rng), cols(rng), sp(rng), rng);
    for (auto method : {CseMethod::TopDown, CseMethod::BottomUp}) {
      CseResult r = run_cse(m, method);
      EXPECT_TRUE(reproduces(m, r));
      EXPECT_TRUE(verify_equivalence(m, r, 50));
      EXPECT_LE(adder_count(r), adder_count(identity_cse(m)));
    }
  }
}

TEST(Cse, AllZeroRowsStayEmpty) {
  auto m = parse_tmx("tmx 3 3\n000\n+-+\n000\n");
  for (auto method : {CseMethod::None, CseMethod::TopDown, CseMethod::BottomUp}) {
    CseResult r = run_cse(m, method);
    EXPECT_TRUE(r.outputs[0].empty());
    EXPECT_TRUE(r.outputs[2].empty());
    EXPECT_TRUE(reproduces(m, r));
  }
}

TEST(VerifyEquivalence, IdentityIsAlwaysEquivalent) {
  std::mt19937_64 rng(1);
  auto m = random_ternary(6, 20, 0.5, rng);
  EXPECT_TRUE(verify_equivalence(m, identity_cse(m), 100));
}

TEST(VerifyEquivalence, FlippedSignIsCaughtWithWitness) {
  CseResult r = td_cse(worked_matrix());
  r.outputs[1].terms.back().sign = static_cast<std::int8_t>(-r.outputs[1].terms.back().sign);
  auto rep = verify_equivalence(worked_matrix(), r, 10);
  EXPECT_FALSE(rep);
  EXPECT_EQ(rep.row, 1u);
  ASSERT_EQ(rep.witness.size(), 6u);
  auto want = matvec(worked_matrix(), rep.witness);
  auto got = evaluate(r, rep.witness);
  EXPECT_NE(want[1], got[1]);
}

TEST(CseListing, RoundTripsAndRejectsForwardReferences) {
  CseResult r = bu_cse(worked_matrix());
  const std::string text = format_cse(r);
  CseResult back = parse_cse(text);
  EXPECT_EQ(format_cse(back), text);
  EXPECT_THROW(parse_cse("cse 1 2\ndef x3 = +x0 +x2\ndef x2 = +x0 +x1\nout 0 = +x3\n"), InputError);
  EXPECT_THROW(parse_cse("cse 1 2\nout 0 = +x1 +x0\n"), InputError);
  EXPECT_THROW(parse_cse("cse 2 2\nout 0 = +x1\n"), InputError);
  EXPECT_NO_THROW(parse_cse("cse 1 2\nout 0 = 0\n"));
}

TEST(Expression, CanonicalizeIsAFixpoint) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Expression e;
    std::uniform_int_distribution<Var> v(0, 20);
    std::set<Var> used;
    for (int k = 0; k < 8; ++k) {
      Var x = v(rng);
      if (used.insert(x).second) e.terms.push_back({x, static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
    }
    Expression once = canonicalize(e);
    EXPECT_TRUE(is_canonical(once));
    EXPECT_EQ(canonicalize(once), once);
  }
}

}  // namespace
}  // namespace ternroll
