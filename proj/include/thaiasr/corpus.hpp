// corpus.hpp
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
// CommonVoice-style metadata rows and the tab-separated reader behind them.

#ifndef THAIASR_CORPUS_HPP_
#define THAIASR_CORPUS_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "thaiasr/error.hpp"

namespace thaiasr {

struct Utterance {
  std::string client_id;  // speaker
  std::string path;       // clip file name, unique within a corpus
  std::string sentence;
  int64_t duration_ms = 0;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require_column(std::string_view name) const {
    auto c = column(name);
    if (!c) throw ParseError("missing column " + std::string(name), 1);
    return *c;
  }
};

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

// Header row required; blank lines are skipped; rows with more or fewer
// fields than the header are rejected.
inline TsvTable read_tsv(std::istream& in) {
  TsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw ParseError("expected " + std::to_string(table.header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       lineno);
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(lineno);
  }
  if (in.bad()) throw IoError("error reading tab-separated input");
  if (!have_header) throw ParseError("empty input, header row expected", 1);
  return table;
}

struct CorpusLoad {
  std::vector<Utterance> utterances;
  std::size_t missing_duration = 0;
};

inline CorpusLoad load_corpus_metadata(std::istream& in) {
  TsvTable table = read_tsv(in);
  const std::size_t c_client = table.require_column("client_id");
  const std::size_t c_path = table.require_column("path");
  const std::size_t c_sentence = table.require_column("sentence");
  const auto c_duration = table.column("duration_ms");

  CorpusLoad load;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t lineno = table.row_lines[r];
    Utterance u;
    u.client_id = row[c_client];
    u.path = row[c_path];
    u.sentence = row[c_sentence];
    if (u.client_id.empty()) throw ParseError("empty client_id", lineno);
    if (u.path.empty()) throw ParseError("empty path", lineno);
    if (!seen.insert(u.path).second)
      throw ParseError("duplicate path " + u.path, lineno);
    if (!c_duration || row[*c_duration].empty()) {
      ++load.missing_duration;
    } else {
      const std::string& d = row[*c_duration];
      auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), u.duration_ms);
      if (ec != std::errc() || ptr != d.data() + d.size() || u.duration_ms < 0)
        throw ParseError("invalid duration_ms '" + d + "'", lineno);
    }
    load.utterances.push_back(std::move(u));
  }
  return load;
}

inline CorpusLoad load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return load_corpus_metadata(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_corpus_header(std::ostream& out, bool with_provenance) {
  out << "client_id\tpath\tsentence\tduration_ms";
  if (with_provenance) out << "\tprovenance";
  out << '\n';
}

inline void write_corpus_row(std::ostream& out, const Utterance& u,
                             std::string_view provenance = {}) {
  out << u.client_id << '\t' << u.path << '\t' << u.sentence << '\t'
      << u.duration_ms;
  if (!provenance.empty()) out << '\t' << provenance;
  out << '\n';
}

}  // namespace thaiasr

#endif  // THAIASR_CORPUS_HPP_
