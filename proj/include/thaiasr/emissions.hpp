// emissions.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// CTC label inventories and per-frame log-probability matrices, plus their
// file formats (vocab text files, NPY v1/v2, whitespace-separated text).

#ifndef THAIASR_EMISSIONS_HPP_
#define THAIASR_EMISSIONS_HPP_

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thaiasr/error.hpp"

namespace thaiasr {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

struct CtcVocab {
  std::vector<std::string> labels;
  int blank = 0;
  std::optional<int> delimiter;
  std::optional<int> unk;

  int size() const { return static_cast<int>(labels.size()); }

  void validate() const {
    const int v = size();
    if (v == 0) throw ConfigError("empty CTC vocabulary");
    auto in_range = [v](int i) { return i >= 0 && i < v; };
    if (!in_range(blank)) throw ConfigError("blank index out of range");
    if (delimiter && !in_range(*delimiter)) throw ConfigError("delimiter index out of range");
    if (unk && !in_range(*unk)) throw ConfigError("unk index out of range");
    if (delimiter && *delimiter == blank) throw ConfigError("blank and delimiter must differ");
    std::set<std::string_view> seen;
    for (const auto& l : labels)
      if (!seen.insert(l).second) throw ConfigError("duplicate CTC label '" + l + "'");
  }
};

// Leading '#key=value' lines (blank, delimiter, unk) followed by one label
// per line; label order defines the emission columns.
inline CtcVocab load_vocab(std::istream& in) {
  CtcVocab vocab;
  std::string line;
  std::size_t lineno = 0;
  bool in_header = true;
  bool have_blank = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (in_header && !line.empty() && line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;  // plain comment
      std::string key = line.substr(1, eq - 1);
      int value = 0;
      const std::string v = line.substr(eq + 1);
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
      if (ec != std::errc() || ptr != v.data() + v.size())
        throw ParseError("bad index in '" + line + "'", lineno);
      if (key == "blank") {
        vocab.blank = value;
        have_blank = true;
      } else if (key == "delimiter") {
        vocab.delimiter = value;
      } else if (key == "unk") {
        vocab.unk = value;
      } else {
        throw ParseError("unknown vocab directive '" + key + "'", lineno);
      }
      continue;
    }
    in_header = false;
    if (line.empty()) throw ParseError("empty label", lineno);
    vocab.labels.push_back(line);
  }
  if (!have_blank) throw ParseError("vocab is missing the #blank=<index> directive");
  vocab.validate();
  return vocab;
}

inline CtcVocab load_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return load_vocab(in);
}

// Row-major frames x labels matrix of log-probabilities.
class Emissions {
 public:
  Emissions() = default;
  Emissions(std::size_t frames, std::size_t labels, std::vector<double> data)
      : frames_(frames), labels_(labels), data_(std::move(data)) {
    if (data_.size() != frames_ * labels_)
      throw ConfigError("emission data has " + std::to_string(data_.size()) +
                        " values, expected " + std::to_string(frames_ * labels_));
    for (double v : data_)
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw ConfigError("emissions contain NaN or +inf");
    normalized_ = check_normalized(1e-3);
  }

  std::size_t frames() const { return frames_; }
  std::size_t labels() const { return labels_; }
  // True when every frame's log-sum-exp is 0 within 1e-3.
  bool normalized() const { return normalized_; }

  std::span<const double> frame(std::size_t t) const {
    return {data_.data() + t * labels_, labels_};
  }
  double at(std::size_t t, std::size_t v) const { return data_[t * labels_ + v]; }
  const std::vector<double>& data() const { return data_; }

  // Turns raw scores (logits) into per-frame log-probabilities.
  void log_softmax() {
    for (std::size_t t = 0; t < frames_; ++t) {
      double* row = data_.data() + t * labels_;
      double lse = kNegInf;
      for (std::size_t v = 0; v < labels_; ++v) lse = log_add(lse, row[v]);
      for (std::size_t v = 0; v < labels_; ++v) row[v] -= lse;
    }
    normalized_ = true;
  }

 private:
  bool check_normalized(double tol) const {
    for (std::size_t t = 0; t < frames_; ++t) {
      double lse = kNegInf;
      for (double v : frame(t)) lse = log_add(lse, v);
      if (!(std::abs(lse) <= tol)) return false;
    }
    return true;
  }

  std::size_t frames_ = 0;
  std::size_t labels_ = 0;
  std::vector<double> data_;
  bool normalized_ = false;
};

// NPY version 1.0/2.0, C order, dtype <f4 or <f8, two dimensions.
inline Emissions load_npy(std::istream& in) {
  static_assert(std::endian::native == std::endian::little, "NPY reader assumes little-endian host");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "\x93NUMPY", 6) != 0)
    throw ParseError("not an NPY file");
  const int major = static_cast<unsigned char>(magic[6]);
  uint32_t header_len = 0;
  if (major == 1) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw ParseError("truncated NPY header");
    header_len = b[0] | (b[1] << 8);
  } else if (major == 2 || major == 3) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated NPY header");
    header_len = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
  } else {
    throw ParseError("unsupported NPY version " + std::to_string(major));
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) throw ParseError("truncated NPY header");

  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))");
  if (!std::regex_search(header, m, descr_re)) throw ParseError("NPY header lacks descr");
  const std::string descr = m[1];
  if (descr != "<f4" && descr != "<f8")
    throw ParseError("NPY dtype must be <f4 or <f8, got " + descr);
  if (!std::regex_search(header, m, order_re) || m[1] == "True")
    throw ParseError("NPY array must be C-ordered");
  if (!std::regex_search(header, m, shape_re)) throw ParseError("NPY array must be two-dimensional");
  const std::size_t frames = std::stoull(m[1]);
  const std::size_t labels = std::stoull(m[2]);

  std::vector<double> data(frames * labels);
  if (descr == "<f4") {
    std::vector<float> raw(data.size());
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4)))
      throw ParseError("truncated NPY data");
    std::copy(raw.begin(), raw.end(), data.begin());
  } else {
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 8)))
      throw ParseError("truncated NPY data");
  }
  return Emissions(frames, labels, std::move(data));
}

inline void write_npy(std::ostream& out, const Emissions& e) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                       std::to_string(e.frames()) + ", " + std::to_string(e.labels()) + "), }";
  // Magic (6) + version (2) + length (2) + header + '\n' padded to 64 bytes.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<uint16_t>(header.size());
  const char lb[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(lb, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : e.data()) {
    float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

// One frame per line, values separated by whitespace; '#' lines ignored.
inline Emissions load_text_matrix(std::istream& in) {
  std::vector<double> data;
  std::size_t labels = 0, frames = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    std::string tok;
    std::size_t n = 0;
    while (ss >> tok) {
      double v = 0;
      if (tok == "-inf" || tok == "-Infinity") {
        v = kNegInf;
      } else {
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          throw ParseError("bad number '" + tok + "'", lineno);
      }
      data.push_back(v);
      ++n;
    }
    if (frames == 0) labels = n;
    if (n != labels)
      throw ParseError("frame has " + std::to_string(n) + " values, expected " + std::to_string(labels),
                       lineno);
    ++frames;
  }
  return Emissions(frames, labels, std::move(data));
}

inline Emissions load_emissions_file(const std::string& path) {
  const bool npy = path.size() >= 4 && path.compare(path.size() - 4, 4, ".npy") == 0;
  std::ifstream in(path, npy ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path);
  try {
    return npy ? load_npy(in) : load_text_matrix(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace thaiasr

#endif  // THAIASR_EMISSIONS_HPP_
