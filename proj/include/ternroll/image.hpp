#pragma once

// Square multi-channel images of fixed-point activations, plus the two
// on-disk forms: `img W H D frac_bits` followed by raw little-endian int16
// samples, and 8-bit PGM/PPM (P2/P3/P5/P6) mapped to [0, 1].

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ternroll/core.hpp"
#include "ternroll/matrix_io.hpp"

namespace ternroll {

// Raster order, channel fastest: value (y, x, c) lives at (y*W + x)*D + c.
struct ImageStream {
  int width = 0;
  int channels = 0;
  std::vector<std::int64_t> data;

  ImageStream() = default;
  ImageStream(int w, int d) : width(w), channels(d), data(static_cast<std::size_t>(w) * w * d, 0) {
    if (w < 1 || d < 1) throw InputError("image dimensions must be >= 1");
  }

  int height() const { return width; }
  std::size_t pixels() const { return static_cast<std::size_t>(width) * width; }
  std::int64_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::int64_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const std::int64_t* pixel(std::size_t index) const { return data.data() + index * channels; }
  friend bool operator==(const ImageStream&, const ImageStream&) = default;
};

// Re-expresses raw values with `from_frac` fractional bits in `fmt`.
inline std::int64_t convert_frac(std::int64_t raw, int from_frac, const FixedPointFormat& fmt,
                                 SaturationCounter* counter = nullptr) {
  std::int64_t v = raw;
  if (from_frac > fmt.frac_bits) v = round_shift(raw, from_frac - fmt.frac_bits);
  else if (from_frac < fmt.frac_bits) v = raw * (std::int64_t{1} << (fmt.frac_bits - from_frac));
  return saturate(v, fmt, counter);
}

namespace detail {

inline void put_le16(std::string& out, std::int64_t v) {
  const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>(u >> 8));
}

// Netpbm token reader that skips whitespace and '#' comments.
class PnmReader {
 public:
  PnmReader(const std::string& s, std::size_t start) : s_(s), pos_(start) {}
  std::size_t pos() const { return pos_; }
  void skip_one_whitespace() {
    if (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  long next_int(const char* what) {
    while (pos_ < s_.size()) {
      if (std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      else if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else break;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw InputError(std::string("image: expected ") + what);
    if (pos_ - start > 9) throw InputError(std::string("image: ") + what + " is too large");
    return std::stol(s_.substr(start, pos_ - start));
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string format_image(const ImageStream& img, const FixedPointFormat& fmt = kActivationFormat) {
  if (fmt.total_bits > 16) throw InputError("image files hold 16-bit samples");
  std::string out = "img " + std::to_string(img.width) + " " + std::to_string(img.width) + " " +
                    std::to_string(img.channels) + " " + std::to_string(fmt.frac_bits) + "\n";
  out.reserve(out.size() + img.data.size() * 2);
  for (auto v : img.data) {
    if (v < fmt.min_raw() || v > fmt.max_raw()) throw InputError("image value out of range for its format");
    detail::put_le16(out, v);
  }
  return out;
}

// Parses either form and converts the samples to `fmt`.
inline ImageStream parse_image(const std::string& bytes, const FixedPointFormat& fmt = kActivationFormat,
                               SaturationCounter* counter = nullptr) {
  if (bytes.rfind("img", 0) == 0) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw InputError("image: missing header line");
    const auto f = detail::split_ws(std::string_view(bytes).substr(0, nl));
    if (f.size() != 5 || f[0] != "img") throw InputError("image: header must be 'img <W> <H> <D> <frac_bits>'");
    std::size_t w = 0, h = 0, d = 0, frac = 0;
    if (!detail::parse_size(f[1], w) || !detail::parse_size(f[2], h) || !detail::parse_size(f[3], d) ||
        !detail::parse_size(f[4], frac)) {
      throw InputError("image: header fields must be non-negative integers");
    }
    if (w != h) throw InputError("image: only square images are supported");
    if (w == 0 || d == 0 || w > 4096 || d > 4096) throw InputError("image: dimensions out of range");
    if (frac >= 16) throw InputError("image: frac_bits must be < 16");
    ImageStream img(static_cast<int>(w), static_cast<int>(d));
    const std::size_t need = img.data.size() * 2;
    if (bytes.size() - nl - 1 != need) {
      throw InputError("image: expected " + std::to_string(need) + " data bytes, found " +
                       std::to_string(bytes.size() - nl - 1));
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
    for (std::size_t k = 0; k < img.data.size(); ++k) {
      const auto u = static_cast<std::uint16_t>(p[2 * k] | (p[2 * k + 1] << 8));
      img.data[k] = convert_frac(static_cast<std::int16_t>(u), static_cast<int>(frac), fmt, counter);
    }
    return img;
  }
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] < '2' || bytes[1] > '6' || bytes[1] == '4') {
    throw InputError("image: unrecognized format (expected 'img' header or P2/P3/P5/P6)");
  }
  const char kind = bytes[1];
  const int d = (kind == '3' || kind == '6') ? 3 : 1;
  const bool binary = kind == '5' || kind == '6';
  detail::PnmReader rd(bytes, 2);
  const long w = rd.next_int("width");
  const long h = rd.next_int("height");
  const long maxval = rd.next_int("maxval");
  if (w != h) throw InputError("image: only square images are supported");
  if (w < 1 || w > 4096) throw InputError("image: dimensions out of range");
  if (maxval != 255) throw InputError("image: only 8-bit netpbm files (maxval 255) are supported");
  ImageStream img(static_cast<int>(w), d);
  if (binary) {
    rd.skip_one_whitespace();
    if (bytes.size() - rd.pos() != img.data.size()) {
      throw InputError("image: expected " + std::to_string(img.data.size()) + " pixel bytes, found " +
                       std::to_string(bytes.size() - rd.pos()));
    }
  }
  for (std::size_t k = 0; k < img.data.size(); ++k) {
    long v = binary ? static_cast<unsigned char>(bytes[rd.pos() + k]) : rd.next_int("pixel value");
    if (v > maxval) throw InputError("image: pixel value exceeds maxval");
    img.data[k] = quantize(static_cast<double>(v) / 255.0, fmt, counter).raw;
  }
  return img;
}

inline ImageStream load_image(const std::string& path, const FixedPointFormat& fmt = kActivationFormat,
                              SaturationCounter* counter = nullptr) {
  return parse_image(detail::read_file(path), fmt, counter);
}

}  // namespace ternroll

