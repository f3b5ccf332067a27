#pragma once

// Word- and bit-serial adder/subtractor model. A sample of `total_bits`
// bits is processed as `digits` digits, least significant first, with the
// carry held between digits. The carry is reset to 0 for an addition and
// to 1 for a subtraction, whose operand is inverted digit by digit; a
// multi-operand adder resets it to the number of subtracted operands.

#include <cstdint>
#include <span>
#include <stdexcept>

#include "ternroll/core.hpp"

namespace ternroll {

inline std::uint64_t low_mask(int bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

// Two's-complement wrap of v to `bits` bits, sign-extended back to 64.
inline std::int64_t wrap_signed(std::int64_t v, int bits) {
  if (bits >= 64) return v;
  const std::uint64_t m = low_mask(bits);
  std::uint64_t u = static_cast<std::uint64_t>(v) & m;
  if (u >> (bits - 1)) u |= ~m;
  return static_cast<std::int64_t>(u);
}

class DigitSerialAdder {
 public:
  DigitSerialAdder(int digit_width, std::span<const std::int8_t> signs)
      : width_(digit_width), mask_(low_mask(digit_width)), signs_(signs) {
    if (digit_width < 1 || digit_width > 32) throw InputError("digit width must be in 1..32");
    reset();
  }

  void reset() {
    carry_ = 0;
    for (auto s : signs_) {
      if (s < 0) ++carry_;
    }
  }

  // Consumes one digit of every operand, returns one digit of the sum.
  std::uint64_t step(std::span<const std::uint64_t> operand_digits) {
    std::uint64_t sum = carry_;
    for (std::size_t k = 0; k < signs_.size(); ++k) {
      const std::uint64_t d = operand_digits[k] & mask_;
      sum += signs_[k] < 0 ? (~d & mask_) : d;
    }
    carry_ = sum >> width_;
    return sum & mask_;
  }

  std::uint64_t carry() const { return carry_; }

 private:
  int width_;
  std::uint64_t mask_;
  std::span<const std::int8_t> signs_;
  std::uint64_t carry_ = 0;
};

// Runs a full sample through a serial adder: words are `total_bits` wide,
// split into `digits` digits of total_bits/digits bits. Returns the
// `total_bits`-bit result (unsigned representation).
inline std::uint64_t serial_sum(std::span<const std::uint64_t> words, std::span<const std::int8_t> signs,
                                int total_bits, int digits) {
  if (digits < 1 || total_bits % digits != 0) throw InputError("digit count must divide the word width");
  const int w = total_bits / digits;
  DigitSerialAdder adder(w, signs);
  std::uint64_t buf[8];
  if (words.size() > 8) throw InputError("serial_sum supports at most 8 operands");
  std::uint64_t out = 0;
  for (int d = 0; d < digits; ++d) {
    for (std::size_t k = 0; k < words.size(); ++k) buf[k] = words[k] >> (d * w);
    out |= adder.step({buf, words.size()}) << (d * w);
  }
  return out & low_mask(total_bits);
}

}  // namespace ternroll
