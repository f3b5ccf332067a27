#pragma once

// Domain types shared by every pass: ternary/float matrices, signed sparse
// expressions, two's-complement fixed-point formats and the network
// description.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ternroll {

// Bad user input (malformed files, invalid configuration). The CLI maps
// this to exit status 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A broken internal invariant. The CLI maps this to exit status 3.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Trit = std::int8_t;
using Var = std::uint32_t;

// Dense row-major matrix of trits in {-1, 0, +1}. One row per output
// (filter), one column per input.
class TernaryMatrix {
 public:
  TernaryMatrix() = default;
  TernaryMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols, 0) {
    if (rows == 0 || cols == 0) {
      throw InputError("ternary matrix must have at least one row and column");
    }
  }
  TernaryMatrix(std::size_t rows, std::size_t cols, std::vector<Trit> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows == 0 || cols == 0) {
      throw InputError("ternary matrix must have at least one row and column");
    }
    if (entries_.size() != rows * cols) {
      throw InputError("ternary matrix entry count does not match its shape");
    }
    for (Trit t : entries_) {
      if (t < -1 || t > 1) throw InputError("ternary matrix entry outside {-1,0,+1}");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Trit operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, Trit t) {
    if (t < -1 || t > 1) throw InputError("ternary matrix entry outside {-1,0,+1}");
    entries_[r * cols_ + c] = t;
  }

  std::span<const Trit> row(std::size_t r) const {
    return {entries_.data() + r * cols_, cols_};
  }
  const std::vector<Trit>& entries() const { return entries_; }

  std::size_t nonzeros() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](Trit t) { return t != 0; }));
  }

  friend bool operator==(const TernaryMatrix&, const TernaryMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Trit> entries_;
};

inline double sparsity(const TernaryMatrix& m) {
  const double total = static_cast<double>(m.rows() * m.cols());
  if (total == 0) return 1.0;
  return static_cast<double>(m.rows() * m.cols() - m.nonzeros()) / total;
}

// y = m * x with exact 64-bit accumulation.
inline std::vector<std::int64_t> matvec(const TernaryMatrix& m,
                                        std::span<const std::int64_t> x) {
  if (x.size() != m.cols()) throw InputError("matvec: input length does not match matrix columns");
  std::vector<std::int64_t> y(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::int64_t acc = 0;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] > 0) acc += x[c];
      else if (row[c] < 0) acc -= x[c];
    }
    y[r] = acc;
  }
  return y;
}

class FloatMatrix {
 public:
  FloatMatrix() = default;
  FloatMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows == 0 || cols == 0) throw InputError("float matrix must be non-empty");
    if (entries_.size() != rows * cols) {
      throw InputError("float matrix entry count does not match its shape");
    }
    for (double v : entries_) {
      if (!std::isfinite(v)) throw InputError("float matrix contains a non-finite entry");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  const std::vector<double>& entries() const { return entries_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

struct Term {
  Var var = 0;
  std::int8_t sign = 1;

  friend bool operator==(const Term&, const Term&) = default;
};

// A signed sparse sum of variables. Original inputs are variables
// 0..cols-1; extracted subexpressions are numbered from cols upward.
struct Expression {
  std::vector<Term> terms;
  Var id = 0;

  std::size_t size() const { return terms.size(); }
  bool empty() const { return terms.empty(); }

  friend bool operator==(const Expression&, const Expression&) = default;
};

// Sorts by variable and merges duplicates (x - x cancels, x + x is an
// error because it is not expressible with trit coefficients).
inline Expression canonicalize(Expression e) {
  std::stable_sort(e.terms.begin(), e.terms.end(),
                   [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> out;
  out.reserve(e.terms.size());
  for (const Term& t : e.terms) {
    if (t.sign != 1 && t.sign != -1) throw InvariantError("expression term sign must be +1 or -1");
    if (!out.empty() && out.back().var == t.var) {
      if (out.back().sign == t.sign) {
        throw InvariantError("expression repeats variable x" + std::to_string(t.var) +
                             " with the same sign");
      }
      out.pop_back();
      continue;
    }
    out.push_back(t);
  }
  e.terms = std::move(out);
  return e;
}

inline bool is_canonical(const Expression& e) {
  for (std::size_t k = 0; k < e.terms.size(); ++k) {
    if (e.terms[k].sign != 1 && e.terms[k].sign != -1) return false;
    if (k > 0 && e.terms[k - 1].var >= e.terms[k].var) return false;
  }
  return true;
}

inline Expression row_expression(const TernaryMatrix& m, std::size_t r) {
  Expression e;
  auto row = m.row(r);
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] != 0) e.terms.push_back({static_cast<Var>(c), row[c]});
  }
  return e;
}

// Two's-complement fixed point: raw integer r represents r * 2^-frac_bits.
struct FixedPointFormat {
  int total_bits = 16;
  int frac_bits = 4;

  bool valid() const { return frac_bits >= 0 && frac_bits < total_bits && total_bits <= 64; }
  void check() const {
    if (!valid()) {
      throw InputError("invalid fixed-point format: total " + std::to_string(total_bits) +
                       " bits, frac " + std::to_string(frac_bits) + " bits");
    }
  }
  std::int64_t min_raw() const {
    return total_bits == 64 ? std::numeric_limits<std::int64_t>::min()
                            : -(std::int64_t{1} << (total_bits - 1));
  }
  std::int64_t max_raw() const {
    return total_bits == 64 ? std::numeric_limits<std::int64_t>::max()
                            : (std::int64_t{1} << (total_bits - 1)) - 1;
  }
  double scale() const { return std::ldexp(1.0, frac_bits); }

  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;
};

inline constexpr FixedPointFormat kActivationFormat{16, 4};
inline constexpr FixedPointFormat kScaleFormat{16, 6};

struct FixedValue {
  std::int64_t raw = 0;
  friend auto operator<=>(const FixedValue&, const FixedValue&) = default;
};

// Counts silent saturations for diagnostics.
struct SaturationCounter {
  std::uint64_t events = 0;
};

inline std::int64_t saturate(std::int64_t raw, const FixedPointFormat& fmt,
                             SaturationCounter* counter = nullptr) {
  if (raw > fmt.max_raw()) {
    if (counter) ++counter->events;
    return fmt.max_raw();
  }
  if (raw < fmt.min_raw()) {
    if (counter) ++counter->events;
    return fmt.min_raw();
  }
  return raw;
}

// Round to nearest, ties away from zero, then saturate.
inline FixedValue quantize(double x, const FixedPointFormat& fmt,
                           SaturationCounter* counter = nullptr) {
  fmt.check();
  if (std::isnan(x)) throw InputError("cannot quantize NaN");
  const double scaled = std::round(x * fmt.scale());
  if (scaled >= static_cast<double>(fmt.max_raw())) {
    if (counter && scaled > static_cast<double>(fmt.max_raw())) ++counter->events;
    return {fmt.max_raw()};
  }
  if (scaled <= static_cast<double>(fmt.min_raw())) {
    if (counter && scaled < static_cast<double>(fmt.min_raw())) ++counter->events;
    return {fmt.min_raw()};
  }
  return {static_cast<std::int64_t>(scaled)};
}

inline double dequantize(FixedValue v, const FixedPointFormat& fmt) {
  return static_cast<double>(v.raw) / fmt.scale();
}

// Arithmetic right shift by `shift` bits, rounding to nearest with ties
// away from zero.
inline std::int64_t round_shift(std::int64_t value, int shift) {
  if (shift <= 0) return value;
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (value >= 0) return (value + half) >> shift;
  return -((-value + half) >> shift);
}

}  // namespace ternroll
