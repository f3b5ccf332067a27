#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ternroll/core.hpp"
#include "ternroll/matrix_io.hpp"
#include "test_util.hpp"

namespace ternroll {
namespace {

TEST(Sparsity, Counts) {
  EXPECT_DOUBLE_EQ(sparsity(TernaryMatrix(4, 4)), 1.0);
  EXPECT_DOUBLE_EQ(sparsity(testing::single_filter_matrix()), 4.0 / 9.0);
  auto id = parse_tmx("tmx 3 3\n+00\n0+0\n00+\n");
  EXPECT_DOUBLE_EQ(sparsity(id), 6.0 / 9.0);
}

TEST(TernaryMatrix, RejectsBadShapesAndEntries) {
  EXPECT_THROW(TernaryMatrix(0, 3), InputError);
  EXPECT_THROW(TernaryMatrix(2, 2, {1, 0, 2, 0}), InputError);
  EXPECT_THROW(TernaryMatrix(2, 2, {1, 0, 0}), InputError);
  TernaryMatrix m(1, 2);
  EXPECT_THROW(m.set(0, 0, -2), InputError);
}

TEST(Quantize, Examples) {
  EXPECT_EQ(quantize(1.0, kActivationFormat).raw, 16);
  EXPECT_EQ(quantize(0.05, kScaleFormat).raw, 3);
  SaturationCounter sat;
  EXPECT_EQ(quantize(3000.0, kActivationFormat, &sat).raw, 32767);
  EXPECT_EQ(sat.events, 1u);
  EXPECT_EQ(quantize(-3000.0, kActivationFormat, &sat).raw, -32768);
  EXPECT_EQ(sat.events, 2u);
}

TEST(Quantize, TiesRoundAwayFromZero) {
  // 0.03125 is exactly half a Q12.4 step.
  EXPECT_EQ(quantize(0.03125, kActivationFormat).raw, 1);
  EXPECT_EQ(quantize(-0.03125, kActivationFormat).raw, -1);
  EXPECT_EQ(quantize(0.09375, kActivationFormat).raw, 2);
  EXPECT_EQ(quantize(-0.09375, kActivationFormat).raw, -2);
}

TEST(Quantize, IdempotentAndBounded) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2000.0, 2000.0);
  for (const auto& fmt : {kActivationFormat, kScaleFormat}) {
    const double half = std::ldexp(1.0, -fmt.frac_bits - 1);
    for (int k = 0; k < 10000; ++k) {
      const double x = u(rng) / (fmt.frac_bits == 6 ? 4.0 : 1.0);
      const FixedValue v = quantize(x, fmt);
      EXPECT_LE(std::fabs(dequantize(v, fmt) - x), half);
      EXPECT_EQ(quantize(dequantize(v, fmt), fmt), v);
    }
  }
}

TEST(Quantize, RejectsNanAndBadFormat) {
  EXPECT_THROW(quantize(std::nan(""), kActivationFormat), InputError);
  EXPECT_THROW(quantize(1.0, FixedPointFormat{8, 8}), InputError);
  EXPECT_FALSE((FixedPointFormat{65, 4}.valid()));
}

TEST(RoundShift, Ties) {
  EXPECT_EQ(round_shift(32, 6), 1);   // 0.5
  EXPECT_EQ(round_shift(-32, 6), -1);
  EXPECT_EQ(round_shift(31, 6), 0);
  EXPECT_EQ(round_shift(-31, 6), 0);
  EXPECT_EQ(round_shift(96, 6), 2);   // 1.5
  EXPECT_EQ(round_shift(7, 0), 7);
}

TEST(Canonicalize, SortsCancelsAndIsAFixpoint) {
  Expression e{{{3, 1}, {1, -1}, {3, -1}, {0, 1}}, 0};
  Expression c = canonicalize(e);
  EXPECT_EQ(c.terms, (std::vector<Term>{{0, 1}, {1, -1}}));
  EXPECT_TRUE(is_canonical(c));
  EXPECT_EQ(canonicalize(c), c);
  EXPECT_THROW(canonicalize(Expression{{{2, 1}, {2, 1}}, 0}), InvariantError);
}

TEST(Matvec, MatchesHandSum) {
  auto m = testing::single_filter_matrix();
  std::vector<std::int64_t> x = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_EQ(matvec(m, x), std::vector<std::int64_t>{5});
  EXPECT_THROW(matvec(m, std::vector<std::int64_t>(3)), InputError);
}

TEST(Tmx, RoundTripAndStrictness) {
  std::mt19937_64 rng(3);
  auto m = testing::random_ternary(5, 17, 0.5, rng);
  EXPECT_EQ(parse_tmx(format_tmx(m)), m);
  EXPECT_THROW(parse_tmx("tmx 1 3\n+0x\n"), InputError);
  EXPECT_THROW(parse_tmx("tmx 2 3\n+0-\n"), InputError);
  EXPECT_THROW(parse_tmx("tmx 1 3\n+0-0\n"), InputError);
  EXPECT_THROW(parse_tmx("tmx 1 3\n+0-\n+++\n"), InputError);
  EXPECT_THROW(parse_tmx("tmx 0 3\n"), InputError);
  EXPECT_THROW(parse_tmx("tmz 1 1\n+\n"), InputError);
}

TEST(Fmx, RoundTripAndErrors) {
  FloatMatrix m(2, 3, {0.5, -1.25, 3e-7, 1e9, -0.0, 2.0 / 3.0});
  FloatMatrix back = parse_fmx(format_fmx(m));
  EXPECT_EQ(back.entries(), m.entries());
  EXPECT_EQ(parse_fmx("fmx 1 2\n+1.5 -2\n").entries(), (std::vector<double>{1.5, -2.0}));
  EXPECT_THROW(parse_fmx("fmx 1 2\n1.0 nan\n"), InputError);
  EXPECT_THROW(parse_fmx("fmx 1 2\n1.0 inf\n"), InputError);
  EXPECT_THROW(parse_fmx("fmx 1 2\n1.0\n"), InputError);
  EXPECT_THROW(parse_fmx("fmx 1 2\n1.0 2.0x\n"), InputError);
}

}  // namespace
}  // namespace ternroll
