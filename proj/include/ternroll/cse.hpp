#pragma once

// Common subexpression elimination over signed sums of variables.
//
// Both passes operate on the rows of a ternary matrix, each row read as a
// sum of +/- x_c terms. Extracted subexpressions become new variables
// numbered from cols upward and may be consumed negated.
//
//  * td_cse: repeatedly extract the most frequent 2-term subexpression.
//  * bu_cse: repeatedly extract the largest subexpression shared by a pair
//    of working rows, appending it as a new working row.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/matrix_io.hpp"
#include "ternroll/network.hpp"

namespace ternroll {

struct CseStats {
  std::size_t extractions = 0;
  std::size_t initial_terms = 0;
  std::size_t final_terms = 0;
};

struct CseResult {
  std::size_t num_inputs = 0;
  // Topologically ordered: every variable a definition references is an
  // input or was defined earlier in this list.
  std::vector<Expression> definitions;
  // One per matrix row, in row order.
  std::vector<Expression> outputs;
  CseStats stats;
};

inline std::size_t term_count(const CseResult& r) {
  std::size_t n = 0;
  for (const auto& d : r.definitions) n += d.size();
  for (const auto& o : r.outputs) n += o.size();
  return n;
}

// Number of 2-input additions needed to evaluate every expression once.
inline std::size_t adder_count(const CseResult& r) {
  std::size_t n = 0;
  for (const auto& d : r.definitions) n += d.size() > 0 ? d.size() - 1 : 0;
  for (const auto& o : r.outputs) n += o.size() > 0 ? o.size() - 1 : 0;
  return n;
}

// Uncompressed form: no definitions, one expression per row.
inline CseResult identity_cse(const TernaryMatrix& m) {
  CseResult r;
  r.num_inputs = m.cols();
  for (std::size_t row = 0; row < m.rows(); ++row) {
    r.outputs.push_back(row_expression(m, row));
    r.outputs.back().id = static_cast<Var>(row);
  }
  r.stats.initial_terms = r.stats.final_terms = term_count(r);
  return r;
}

// Structural checks: canonical terms, no forward references, unique ids.
inline void validate(const CseResult& r) {
  std::vector<bool> known(r.num_inputs, true);
  auto defined = [&](Var v) { return v < known.size() && known[v]; };
  for (const auto& d : r.definitions) {
    if (!is_canonical(d)) throw InvariantError("definition x" + std::to_string(d.id) + " is not canonical");
    if (d.size() < 2) throw InvariantError("definition x" + std::to_string(d.id) + " has fewer than two terms");
    if (d.id < r.num_inputs || defined(d.id)) throw InvariantError("duplicate or invalid definition id x" + std::to_string(d.id));
    for (const auto& t : d.terms) {
      if (!defined(t.var)) {
        throw InvariantError("definition x" + std::to_string(d.id) + " references undefined x" + std::to_string(t.var));
      }
    }
    if (known.size() <= d.id) known.resize(d.id + 1, false);
    known[d.id] = true;
  }
  for (std::size_t k = 0; k < r.outputs.size(); ++k) {
    if (!is_canonical(r.outputs[k])) throw InvariantError("output " + std::to_string(k) + " is not canonical");
    for (const auto& t : r.outputs[k].terms) {
      if (!defined(t.var)) {
        throw InvariantError("output " + std::to_string(k) + " references undefined x" + std::to_string(t.var));
      }
    }
  }
}

// Symbolic substitution of every definition: returns, per output, the
// integer coefficient of each original input.
inline std::vector<std::vector<std::int64_t>> expand(const CseResult& r) {
  validate(r);
  std::unordered_map<Var, std::vector<std::int64_t>> defs;
  auto coeffs_of = [&](Var v) -> std::vector<std::int64_t> {
    if (v < r.num_inputs) {
      std::vector<std::int64_t> c(r.num_inputs, 0);
      c[v] = 1;
      return c;
    }
    return defs.at(v);
  };
  auto expand_expr = [&](const Expression& e) {
    std::vector<std::int64_t> acc(r.num_inputs, 0);
    for (const auto& t : e.terms) {
      auto c = coeffs_of(t.var);
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += t.sign * c[k];
    }
    return acc;
  };
  for (const auto& d : r.definitions) defs[d.id] = expand_expr(d);
  std::vector<std::vector<std::int64_t>> out;
  out.reserve(r.outputs.size());
  for (const auto& o : r.outputs) out.push_back(expand_expr(o));
  return out;
}

inline bool reproduces(const TernaryMatrix& m, const CseResult& r) {
  if (r.num_inputs != m.cols() || r.outputs.size() != m.rows()) return false;
  auto rows = expand(r);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (rows[i][c] != m(i, c)) return false;
    }
  }
  return true;
}

inline std::vector<std::int64_t> evaluate(const CseResult& r, std::span<const std::int64_t> x) {
  if (x.size() != r.num_inputs) throw InputError("evaluate: input length does not match");
  std::unordered_map<Var, std::int64_t> value;
  auto get = [&](Var v) { return v < r.num_inputs ? x[v] : value.at(v); };
  auto eval = [&](const Expression& e) {
    std::int64_t acc = 0;
    for (const auto& t : e.terms) acc += t.sign * get(t.var);
    return acc;
  };
  for (const auto& d : r.definitions) value[d.id] = eval(d);
  std::vector<std::int64_t> out;
  out.reserve(r.outputs.size());
  for (const auto& o : r.outputs) out.push_back(eval(o));
  return out;
}

struct EquivalenceReport {
  bool equivalent = true;
  std::vector<std::int64_t> witness;  // first mismatching input
  std::size_t row = 0;                // first mismatching output
  explicit operator bool() const { return equivalent; }
};

// Numeric check against the direct matrix-vector product: exhaustive over
// {-1,0,1}^cols when cols <= 12, plus `trials` random 16-bit vectors.
inline EquivalenceReport verify_equivalence(const TernaryMatrix& m, const CseResult& r, std::size_t trials,
                                            std::uint64_t seed = 1) {
  EquivalenceReport rep;
  if (r.num_inputs != m.cols() || r.outputs.size() != m.rows()) {
    rep.equivalent = false;
    return rep;
  }
  try {
    validate(r);
  } catch (const InvariantError&) {
    rep.equivalent = false;
    return rep;
  }
  std::vector<std::int64_t> x(m.cols(), 0);
  auto check = [&]() {
    auto want = matvec(m, x);
    auto got = evaluate(r, x);
    for (std::size_t k = 0; k < want.size(); ++k) {
      if (want[k] != got[k]) {
        rep.equivalent = false;
        rep.witness = x;
        rep.row = k;
        return false;
      }
    }
    return true;
  };
  if (m.cols() <= 12) {
    std::fill(x.begin(), x.end(), -1);
    while (true) {
      if (!check()) return rep;
      std::size_t k = 0;
      while (k < x.size() && x[k] == 1) x[k++] = -1;
      if (k == x.size()) break;
      ++x[k];
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> dist(-32768, 32767);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& v : x) v = dist(rng);
    if (!check()) return rep;
  }
  return rep;
}

// ---- pair table (TD-CSE) ---------------------------------------------------

// A canonical signed pair: x_i + rel * x_j with i < j. An expression holds
// the pair in orientation o when it contains o*x_i + o*rel*x_j.
struct PairKey {
  Var i = 0;
  Var j = 0;
  std::int8_t rel = 1;

  std::uint64_t packed() const {
    return (static_cast<std::uint64_t>(i) << 33) | (static_cast<std::uint64_t>(j) << 1) |
           static_cast<std::uint64_t>(rel < 0 ? 1 : 0);
  }
  static PairKey unpack(std::uint64_t k) {
    return {static_cast<Var>(k >> 33), static_cast<Var>((k >> 1) & 0xffffffffu),
            static_cast<std::int8_t>((k & 1) ? -1 : 1)};
  }
  static PairKey of(Term a, Term b) {
    if (b.var < a.var) std::swap(a, b);
    return {a.var, b.var, static_cast<std::int8_t>(a.sign * b.sign)};
  }
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

class PairTable {
 public:
  struct Candidate {
    PairKey key;
    std::size_t count = 0;
  };

  static PairTable build(const std::vector<Expression>& rows) {
    PairTable t;
    for (std::size_t r = 0; r < rows.size(); ++r) t.add_row(static_cast<std::uint32_t>(r), rows[r]);
    return t;
  }

  void add_row(std::uint32_t r, const Expression& e) {
    for (std::size_t a = 0; a < e.terms.size(); ++a) {
      for (std::size_t b = a + 1; b < e.terms.size(); ++b) add(PairKey::of(e.terms[a], e.terms[b]), r);
    }
  }

  void add(PairKey key, std::uint32_t row) {
    auto& rows = entries_[key.packed()];
    unrank(key, rows);
    rows.insert(std::upper_bound(rows.begin(), rows.end(), row), row);
    rank(key, rows);
  }

  void remove(PairKey key, std::uint32_t row) {
    auto it = entries_.find(key.packed());
    if (it == entries_.end()) throw InvariantError("pair table: removing an absent pair");
    auto& rows = it->second;
    auto pos = std::lower_bound(rows.begin(), rows.end(), row);
    if (pos == rows.end() || *pos != row) throw InvariantError("pair table: removing an absent occurrence");
    unrank(key, rows);
    rows.erase(pos);
    rank(key, rows);
    if (rows.empty()) entries_.erase(it);
  }

  std::size_t count(PairKey key) const {
    auto it = entries_.find(key.packed());
    return it == entries_.end() ? 0 : it->second.size();
  }

  const std::vector<std::uint32_t>& rows(PairKey key) const {
    static const std::vector<std::uint32_t> none;
    auto it = entries_.find(key.packed());
    return it == entries_.end() ? none : it->second;
  }

  // Highest count; ties go to the pair occurring in the earliest row, then
  // to the smallest (i, j), then to rel = +1.
  std::optional<Candidate> best() const {
    if (ranked_.empty()) return std::nullopt;
    const auto& top = *ranked_.begin();
    return Candidate{PairKey::unpack(top.key), top.count};
  }

  std::size_t size() const { return entries_.size(); }

  friend bool operator==(const PairTable& a, const PairTable& b) { return a.entries_ == b.entries_; }

 private:
  struct Rank {
    std::size_t count;
    std::uint32_t first_row;
    std::uint64_t key;
    bool operator<(const Rank& o) const {
      if (count != o.count) return count > o.count;
      if (first_row != o.first_row) return first_row < o.first_row;
      return key < o.key;
    }
  };

  void unrank(PairKey key, const std::vector<std::uint32_t>& rows) {
    if (rows.size() >= 2) ranked_.erase(Rank{rows.size(), rows.front(), key.packed()});
  }
  void rank(PairKey key, const std::vector<std::uint32_t>& rows) {
    if (rows.size() >= 2) ranked_.insert(Rank{rows.size(), rows.front(), key.packed()});
  }

  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> entries_;
  std::set<Rank> ranked_;
};

struct TdStep {
  PairKey pair;
  std::size_t frequency = 0;
  Var new_var = 0;
  const std::vector<Expression>* rows = nullptr;
  const PairTable* table = nullptr;
};

struct TdOptions {
  // Rebuild the pair table from scratch every iteration instead of
  // updating it incrementally. Slow; kept as a reference for testing.
  bool reference_mode = false;
  std::function<void(const TdStep&)> on_step;
};

namespace detail {

inline std::int8_t sign_of(const Expression& e, Var v) {
  auto it = std::lower_bound(e.terms.begin(), e.terms.end(), v,
                             [](const Term& t, Var x) { return t.var < x; });
  return (it != e.terms.end() && it->var == v) ? it->sign : 0;
}

inline void erase_var(Expression& e, Var v) {
  auto it = std::lower_bound(e.terms.begin(), e.terms.end(), v,
                             [](const Term& t, Var x) { return t.var < x; });
  if (it == e.terms.end() || it->var != v) throw InvariantError("erase_var: variable not present");
  e.terms.erase(it);
}

inline void insert_term(Expression& e, Term t) {
  auto it = std::lower_bound(e.terms.begin(), e.terms.end(), t.var,
                             [](const Term& a, Var x) { return a.var < x; });
  if (it != e.terms.end() && it->var == t.var) throw InvariantError("insert_term: variable already present");
  e.terms.insert(it, t);
}

inline std::vector<Expression> matrix_rows(const TernaryMatrix& m) {
  std::vector<Expression> rows;
  rows.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(row_expression(m, r));
    rows.back().id = static_cast<Var>(r);
  }
  return rows;
}

}  // namespace detail

inline CseResult td_cse(const TernaryMatrix& m, const TdOptions& opts = {}) {
  CseResult result;
  result.num_inputs = m.cols();
  std::vector<Expression> rows = detail::matrix_rows(m);
  PairTable table = PairTable::build(rows);
  for (const auto& e : rows) result.stats.initial_terms += e.size();

  Var next = static_cast<Var>(m.cols());
  while (true) {
    if (opts.reference_mode) table = PairTable::build(rows);
    auto best = table.best();
    if (!best || best->count < 2) break;
    const PairKey key = best->key;
    const std::vector<std::uint32_t> hits = table.rows(key);
    const Var v = next++;

    Expression def;
    def.id = v;
    def.terms = {{key.i, 1}, {key.j, key.rel}};
    result.definitions.push_back(def);

    for (std::uint32_t r : hits) {
      Expression& row = rows[r];
      const std::int8_t si = detail::sign_of(row, key.i);
      const std::int8_t sj = detail::sign_of(row, key.j);
      if (si == 0 || sj != si * key.rel) throw InvariantError("td_cse: pair table out of sync with row " + std::to_string(r));
      if (!opts.reference_mode) {
        for (const Term& t : row.terms) {
          if (t.var == key.i || t.var == key.j) continue;
          table.remove(PairKey::of({key.i, si}, t), r);
          table.remove(PairKey::of({key.j, sj}, t), r);
        }
        table.remove(key, r);
      }
      detail::erase_var(row, key.i);
      detail::erase_var(row, key.j);
      if (!opts.reference_mode) {
        for (const Term& t : row.terms) table.add(PairKey::of(t, {v, si}), r);
      }
      row.terms.push_back({v, si});  // v is the largest index so far
    }
    ++result.stats.extractions;
    if (opts.on_step) {
      if (opts.reference_mode) table = PairTable::build(rows);
      opts.on_step(TdStep{key, hits.size(), v, &rows, &table});
    }
  }
  result.outputs = std::move(rows);
  result.stats.final_terms = term_count(result);
  return result;
}

// ---- pattern matrix (BU-CSE) ----------------------------------------------

namespace detail {

struct Pattern {
  std::vector<Term> terms;  // canonical: sorted, first sign +1
  std::uint32_t r = 0, s = 0;

  // Smallest variable tuple, then +1 before -1 term by term, then row pair.
  bool better_than(const Pattern& o) const {
    const std::size_t n = std::min(terms.size(), o.terms.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (terms[k].var != o.terms[k].var) return terms[k].var < o.terms[k].var;
    }
    if (terms.size() != o.terms.size()) return terms.size() < o.terms.size();
    for (std::size_t k = 0; k < n; ++k) {
      if (terms[k].sign != o.terms[k].sign) return terms[k].sign > o.terms[k].sign;
    }
    if (r != o.r) return r < o.r;
    return s < o.s;
  }
};

// Terms of `a` whose sign in `b` equals sign_in_a * orient.
inline std::vector<Term> common_terms(const Expression& a, const Expression& b, int orient) {
  std::vector<Term> out;
  std::size_t i = 0, j = 0;
  while (i < a.terms.size() && j < b.terms.size()) {
    if (a.terms[i].var < b.terms[j].var) ++i;
    else if (b.terms[j].var < a.terms[i].var) ++j;
    else {
      if (a.terms[i].sign * orient == b.terms[j].sign) out.push_back(a.terms[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

// common_terms into `out`, giving up (false) once the result cannot have
// exactly `size` terms or its variable sequence is already known to sort
// after `bound`. Patterns that tie with `bound` on variables are kept so
// the caller can break the tie on signs.
inline bool common_terms_bounded(const Expression& a, const Expression& b, int orient, std::size_t size,
                                 const std::vector<Term>* bound, std::vector<Term>& out) {
  out.clear();
  bool decided = bound == nullptr;
  std::size_t i = 0, j = 0;
  while (i < a.terms.size() && j < b.terms.size()) {
    if (a.terms[i].var < b.terms[j].var) ++i;
    else if (b.terms[j].var < a.terms[i].var) ++j;
    else {
      if (a.terms[i].sign * orient == b.terms[j].sign) {
        if (!decided) {
          const Var v = a.terms[i].var, w = (*bound)[out.size()].var;
          if (v > w) return false;
          if (v < w) decided = true;
        }
        out.push_back(a.terms[i]);
        if (out.size() > size) return false;
      }
      ++i;
      ++j;
    }
  }
  return out.size() == size;
}

inline std::pair<std::size_t, std::size_t> common_counts(const Expression& a, const Expression& b) {
  std::size_t same = 0, opposite = 0, i = 0, j = 0;
  while (i < a.terms.size() && j < b.terms.size()) {
    if (a.terms[i].var < b.terms[j].var) ++i;
    else if (b.terms[j].var < a.terms[i].var) ++j;
    else {
      (a.terms[i].sign == b.terms[j].sign ? same : opposite)++;
      ++i;
      ++j;
    }
  }
  return {same, opposite};
}

inline void make_canonical_orientation(std::vector<Term>& terms) {
  if (!terms.empty() && terms.front().sign < 0) {
    for (auto& t : terms) t.sign = static_cast<std::int8_t>(-t.sign);
  }
}

}  // namespace detail

// Symmetric matrix over working rows: entry (r, s) is the size of the
// largest signed pattern common to rows r and s, taking the better of the
// direct and the globally negated orientation. The diagonal is zero.
class PatternMatrix {
 public:
  static PatternMatrix build(const std::vector<Expression>& rows) {
    PatternMatrix pm;
    pm.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t s = r + 1; s < rows.size(); ++s) {
        auto [same, opp] = detail::common_counts(rows[r], rows[s]);
        pm.at(r, s) = pm.at(s, r) = static_cast<std::uint32_t>(std::max(same, opp));
      }
    }
    for (std::size_t r = 0; r < rows.size(); ++r) pm.refresh_row_max(r);
    return pm;
  }

  std::size_t size() const { return n_; }
  std::uint32_t value(std::size_t r, std::size_t s) const { return r == s ? 0 : cells_[r][s]; }
  std::uint32_t max_value() const {
    std::uint32_t m = 0;
    for (std::size_t r = 0; r < n_; ++r) m = std::max(m, row_max_[r]);
    return m;
  }

  std::uint32_t row_max(std::size_t r) const { return row_max_[r]; }

  friend bool operator==(const PatternMatrix& a, const PatternMatrix& b) {
    if (a.n_ != b.n_) return false;
    for (std::size_t r = 0; r < a.n_; ++r) {
      for (std::size_t s = 0; s < a.n_; ++s) {
        if (a.value(r, s) != b.value(r, s)) return false;
      }
    }
    return true;
  }

  // Incremental maintenance used by bu_cse.
  // Grows the matrix with all-zero rows; existing row maxima are unchanged.
  void resize(std::size_t n) {
    if (n < n_) throw InvariantError("pattern matrix cannot shrink");
    for (auto& row : cells_) row.resize(n, 0);
    cells_.resize(n, std::vector<std::uint32_t>(n, 0));
    row_max_.resize(n, 0);
    n_ = n;
  }

  void refresh_row_max(std::size_t r) {
    std::uint32_t m = 0;
    for (std::size_t s = 0; s < n_; ++s) {
      if (s != r) m = std::max(m, cells_[r][s]);
    }
    row_max_[r] = m;
  }

  // Replaces row r's entries with `values` (indexed by s), keeping row
  // maxima current.
  void set_row(std::size_t r, const std::vector<std::uint32_t>& values) {
    for (std::size_t s = 0; s < n_; ++s) {
      if (s == r) continue;
      const std::uint32_t old = cells_[s][r];
      const std::uint32_t now = values[s];
      cells_[r][s] = cells_[s][r] = now;
      if (now > row_max_[s]) row_max_[s] = now;
      else if (now < old && old == row_max_[s]) dirty_.push_back(s);
    }
    refresh_row_max(r);
  }

  void flush_dirty() {
    std::sort(dirty_.begin(), dirty_.end());
    dirty_.erase(std::unique(dirty_.begin(), dirty_.end()), dirty_.end());
    for (std::size_t s : dirty_) refresh_row_max(s);
    dirty_.clear();
  }

 private:
  std::uint32_t& at(std::size_t r, std::size_t s) { return cells_[r][s]; }

  std::size_t n_ = 0;
  std::vector<std::vector<std::uint32_t>> cells_;
  std::vector<std::uint32_t> row_max_;
  std::vector<std::size_t> dirty_;
};

struct BuStep {
  std::vector<Term> pattern;
  Var new_var = 0;
  std::uint32_t row_a = 0, row_b = 0;
  std::vector<std::uint32_t> rewritten;  // rows that now reference new_var
  const std::vector<Expression>* rows = nullptr;  // working rows incl. appended definitions
  const PatternMatrix* matrix = nullptr;
};

struct BuOptions {
  std::function<void(const BuStep&)> on_step;
};

// Orders definitions so every reference points to an input or an earlier
// definition. Creation order is kept wherever dependencies allow.
inline std::vector<Expression> topological_definitions(std::vector<Expression> defs, std::size_t num_inputs) {
  std::unordered_map<Var, std::size_t> index;
  for (std::size_t k = 0; k < defs.size(); ++k) index[defs[k].id] = k;
  std::vector<int> state(defs.size(), 0);  // 0 new, 1 visiting, 2 done
  std::vector<Expression> out;
  out.reserve(defs.size());
  std::function<void(std::size_t)> visit = [&](std::size_t k) {
    if (state[k] == 2) return;
    if (state[k] == 1) throw InvariantError("cyclic subexpression definitions");
    state[k] = 1;
    for (const auto& t : defs[k].terms) {
      if (t.var >= num_inputs) visit(index.at(t.var));
    }
    state[k] = 2;
    out.push_back(defs[k]);
  };
  for (std::size_t k = 0; k < defs.size(); ++k) visit(k);
  return out;
}

inline CseResult bu_cse(const TernaryMatrix& m, const BuOptions& opts = {}) {
  CseResult result;
  result.num_inputs = m.cols();
  std::vector<Expression> rows = detail::matrix_rows(m);
  const std::size_t num_outputs = rows.size();
  for (const auto& e : rows) result.stats.initial_terms += e.size();

  // var -> (row, sign) occurrences, sorted by row.
  std::vector<std::vector<std::pair<std::uint32_t, std::int8_t>>> occ(m.cols());
  auto occ_add = [&](Var v, std::uint32_t r, std::int8_t sign) {
    if (occ.size() <= v) occ.resize(v + 1);
    auto& list = occ[v];
    auto it = std::lower_bound(list.begin(), list.end(), std::make_pair(r, std::int8_t{-2}));
    list.insert(it, {r, sign});
  };
  auto occ_remove = [&](Var v, std::uint32_t r) {
    auto& list = occ[v];
    auto it = std::lower_bound(list.begin(), list.end(), std::make_pair(r, std::int8_t{-2}));
    if (it == list.end() || it->first != r) throw InvariantError("bu_cse: occurrence index out of sync");
    list.erase(it);
  };
  for (std::uint32_t r = 0; r < rows.size(); ++r) {
    for (const auto& t : rows[r].terms) occ_add(t.var, r, t.sign);
  }

  PatternMatrix pm = PatternMatrix::build(rows);

  std::vector<std::uint32_t> same, opposite;
  std::vector<std::uint32_t> touched;
  auto row_values = [&](std::uint32_t r) {
    same.assign(rows.size(), 0);
    opposite.assign(rows.size(), 0);
    for (const auto& t : rows[r].terms) {
      for (const auto& [s, sign] : occ[t.var]) {
        if (s == r) continue;
        (sign == t.sign ? same : opposite)[s]++;
      }
    }
    std::vector<std::uint32_t> values(rows.size(), 0);
    for (std::size_t s = 0; s < rows.size(); ++s) values[s] = std::max(same[s], opposite[s]);
    return values;
  };

  Var next = static_cast<Var>(m.cols());
  std::vector<Expression> defs;
  std::vector<Term> scratch;

  while (true) {
    const std::uint32_t top = pm.max_value();
    if (top <= 1) break;

    std::optional<detail::Pattern> best;
    for (std::uint32_t r = 0; r < pm.size(); ++r) {
      if (pm.row_max(r) != top) continue;
      for (std::uint32_t s = r + 1; s < pm.size(); ++s) {
        if (pm.value(r, s) != top) continue;
        for (int orient : {1, -1}) {
          if (!detail::common_terms_bounded(rows[r], rows[s], orient, top, best ? &best->terms : nullptr, scratch)) {
            continue;
          }
          detail::make_canonical_orientation(scratch);
          detail::Pattern cand{scratch, r, s};
          if (!best || cand.better_than(*best)) best = std::move(cand);
        }
      }
    }
    if (!best) throw InvariantError("bu_cse: pattern matrix maximum has no witness");

    const Var v = next++;
    const auto& pattern = best->terms;

    // Rewrite every working row holding the pattern in either orientation.
    std::vector<std::uint32_t> rewritten;
    const auto candidates = occ[pattern.front().var];
    for (const auto& [w, first_sign] : candidates) {
      const int orient = first_sign * pattern.front().sign;
      bool holds = true;
      for (std::size_t k = 1; k < pattern.size() && holds; ++k) {
        holds = detail::sign_of(rows[w], pattern[k].var) == orient * pattern[k].sign;
      }
      if (!holds) continue;
      for (const auto& t : pattern) {
        detail::erase_var(rows[w], t.var);
        occ_remove(t.var, w);
      }
      rows[w].terms.push_back({v, static_cast<std::int8_t>(orient)});
      occ_add(v, w, static_cast<std::int8_t>(orient));
      rewritten.push_back(w);
    }
    if (rewritten.size() < 2) throw InvariantError("bu_cse: extracted pattern found in fewer than two rows");

    const auto new_row = static_cast<std::uint32_t>(rows.size());
    Expression def;
    def.id = v;
    def.terms = pattern;
    rows.push_back(def);
    defs.push_back(def);
    for (const auto& t : pattern) occ_add(t.var, new_row, t.sign);

    pm.resize(rows.size());
    for (std::uint32_t w : rewritten) pm.set_row(w, row_values(w));
    pm.set_row(new_row, row_values(new_row));
    pm.flush_dirty();

    ++result.stats.extractions;
    if (opts.on_step) opts.on_step(BuStep{pattern, v, best->r, best->s, rewritten, &rows, &pm});
  }

  // Appended definition rows may have been rewritten; take their final form.
  for (std::size_t k = 0; k < defs.size(); ++k) defs[k] = rows[num_outputs + k];
  result.definitions = topological_definitions(std::move(defs), m.cols());
  rows.resize(num_outputs);
  result.outputs = std::move(rows);
  result.stats.final_terms = term_count(result);
  return result;
}

inline CseResult run_cse(const TernaryMatrix& m, CseMethod method) {
  switch (method) {
    case CseMethod::TopDown: return td_cse(m);
    case CseMethod::BottomUp: return bu_cse(m);
    case CseMethod::None: break;
  }
  return identity_cse(m);
}

// ---- .cse listing ------------------------------------------------------------
//
//   cse <rows> <inputs>
//   def x<k> = +x<i> -x<j> ...
//   out <row> = +x<i> ...        (an all-zero row is written "out <row> = 0")

inline std::string format_expression(const Expression& e) {
  if (e.terms.empty()) return "0";
  std::string s;
  for (std::size_t k = 0; k < e.terms.size(); ++k) {
    if (k) s += ' ';
    s += e.terms[k].sign > 0 ? "+x" : "-x";
    s += std::to_string(e.terms[k].var);
  }
  return s;
}

inline std::string format_cse(const CseResult& r) {
  std::string out = "cse " + std::to_string(r.outputs.size()) + " " + std::to_string(r.num_inputs) + "\n";
  for (const auto& d : r.definitions) out += "def x" + std::to_string(d.id) + " = " + format_expression(d) + "\n";
  for (std::size_t k = 0; k < r.outputs.size(); ++k) {
    out += "out " + std::to_string(k) + " = " + format_expression(r.outputs[k]) + "\n";
  }
  return out;
}

namespace detail {

inline Var parse_var_token(std::string_view tok, const std::string& where) {
  std::size_t v = 0;
  if (tok.size() < 2 || tok[0] != 'x' || !parse_size(tok.substr(1), v) || v > 0xffffffffu) {
    throw InputError(where + ": expected a variable like x12, got '" + std::string(tok) + "'");
  }
  return static_cast<Var>(v);
}

}  // namespace detail

inline CseResult parse_cse(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty()) throw InputError("cse: empty input");
  auto [rows, inputs] = detail::parse_header(lines[0], "cse", "cse");
  CseResult r;
  r.num_inputs = inputs;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string where = "cse line " + std::to_string(li + 1);
    auto toks = detail::split_ws(lines[li]);
    if (toks.empty()) continue;
    if (toks.size() < 4 || toks[2] != "=" || (toks[0] != "def" && toks[0] != "out")) {
      throw InputError(where + ": expected 'def x<k> = ...' or 'out <row> = ...'");
    }
    Expression e;
    if (!(toks.size() == 4 && toks[3] == "0")) {
      for (std::size_t k = 3; k < toks.size(); ++k) {
        auto tok = toks[k];
        if (tok.size() < 3 || (tok[0] != '+' && tok[0] != '-')) {
          throw InputError(where + ": expected a signed term like +x3, got '" + std::string(tok) + "'");
        }
        e.terms.push_back({detail::parse_var_token(tok.substr(1), where), static_cast<std::int8_t>(tok[0] == '+' ? 1 : -1)});
      }
    }
    if (!is_canonical(e)) throw InputError(where + ": terms must be listed in increasing variable order without repeats");
    if (toks[0] == "def") {
      if (!r.outputs.empty()) throw InputError(where + ": definitions must precede outputs");
      e.id = detail::parse_var_token(toks[1], where);
      r.definitions.push_back(std::move(e));
    } else {
      std::size_t row = 0;
      if (!detail::parse_size(toks[1], row) || row != r.outputs.size()) {
        throw InputError(where + ": outputs must be numbered 0, 1, 2, ... in order");
      }
      e.id = static_cast<Var>(row);
      r.outputs.push_back(std::move(e));
    }
  }
  if (r.outputs.size() != rows) {
    throw InputError("cse: header declares " + std::to_string(rows) + " outputs, found " + std::to_string(r.outputs.size()));
  }
  try {
    validate(r);
  } catch (const InvariantError& e) {
    throw InputError(std::string("cse: ") + e.what());
  }
  r.stats.initial_terms = r.stats.final_terms = term_count(r);
  r.stats.extractions = r.definitions.size();
  return r;
}

}  // namespace ternroll
