#pragma once

// TMX (ternary) and FMX (float) matrix text formats.
//
//   tmx <rows> <cols>        fmx <rows> <cols>
//   +0-0...                  0.25 -1.5 ...
//
// TMX rows are exactly <cols> characters from {-,0,+}; parsing is strict.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ternroll/core.hpp"

namespace ternroll {

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_size(std::string_view tok, std::size_t& out) {
  if (tok.empty()) return false;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size();
}

inline bool parse_double(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size() && std::isfinite(out);
}

inline std::pair<std::size_t, std::size_t> parse_header(std::string_view line, std::string_view magic,
                                                        const std::string& what) {
  auto toks = split_ws(line);
  std::size_t rows = 0, cols = 0;
  if (toks.size() != 3 || toks[0] != magic || !parse_size(toks[1], rows) || !parse_size(toks[2], cols) ||
      rows == 0 || cols == 0) {
    throw InputError(what + " line 1: expected '" + std::string(magic) + " <rows> <cols>'");
  }
  return {rows, cols};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline TernaryMatrix parse_tmx(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty()) throw InputError("tmx: empty input");
  auto [rows, cols] = detail::parse_header(lines[0], "tmx", "tmx");
  std::vector<Trit> entries;
  entries.reserve(rows * cols);
  std::size_t r = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto line = lines[li];
    if (r == rows) {
      if (!line.empty()) throw InputError("tmx line " + std::to_string(li + 1) + ": extra data after last row");
      continue;
    }
    if (line.size() != cols) {
      throw InputError("tmx line " + std::to_string(li + 1) + ": expected " + std::to_string(cols) +
                       " characters, got " + std::to_string(line.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      switch (line[c]) {
        case '-': entries.push_back(-1); break;
        case '0': entries.push_back(0); break;
        case '+': entries.push_back(1); break;
        default:
          throw InputError("tmx line " + std::to_string(li + 1) + " column " + std::to_string(c + 1) +
                           ": invalid character '" + std::string(1, line[c]) + "'");
      }
    }
    ++r;
  }
  if (r != rows) throw InputError("tmx: expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
  return TernaryMatrix(rows, cols, std::move(entries));
}

inline std::string format_tmx(const TernaryMatrix& m) {
  std::string out = "tmx " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  out.reserve(out.size() + m.rows() * (m.cols() + 1));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (Trit t : m.row(r)) out.push_back(t > 0 ? '+' : (t < 0 ? '-' : '0'));
    out.push_back('\n');
  }
  return out;
}

inline FloatMatrix parse_fmx(std::string_view text) {
  auto lines = detail::split_lines(text);
  if (lines.empty()) throw InputError("fmx: empty input");
  auto [rows, cols] = detail::parse_header(lines[0], "fmx", "fmx");
  std::vector<double> entries;
  entries.reserve(rows * cols);
  std::size_t r = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    auto toks = detail::split_ws(lines[li]);
    if (toks.empty()) continue;
    if (r == rows) throw InputError("fmx line " + std::to_string(li + 1) + ": extra data after last row");
    if (toks.size() != cols) {
      throw InputError("fmx line " + std::to_string(li + 1) + ": expected " + std::to_string(cols) +
                       " values, got " + std::to_string(toks.size()));
    }
    for (auto tok : toks) {
      double v = 0;
      if (!detail::parse_double(tok, v)) {
        throw InputError("fmx line " + std::to_string(li + 1) + ": invalid number '" + std::string(tok) + "'");
      }
      entries.push_back(v);
    }
    ++r;
  }
  if (r != rows) throw InputError("fmx: expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
  return FloatMatrix(rows, cols, std::move(entries));
}

inline std::string format_fmx(const FloatMatrix& m) {
  std::ostringstream out;
  out.precision(17);
  out << "fmx " << m.rows() << " " << m.cols() << "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << "\n";
  }
  return out.str();
}

inline TernaryMatrix load_tmx(const std::string& path) { return parse_tmx(detail::read_file(path)); }
inline FloatMatrix load_fmx(const std::string& path) { return parse_fmx(detail::read_file(path)); }

}  // namespace ternroll
