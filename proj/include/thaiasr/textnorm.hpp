// textnorm.hpp
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
// Transcript cleaning: NFC, removal of characters outside an allowed set,
// maiyamok (U+0E46) expansion and whitespace collapsing.

#ifndef THAIASR_TEXTNORM_HPP_
#define THAIASR_TEXTNORM_HPP_

#include <algorithm>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thaiasr/corpus.hpp"
#include "thaiasr/error.hpp"
#include "thaiasr/tokenizer.hpp"
#include "thaiasr/unicode.hpp"

namespace thaiasr {

struct CodepointRange {
  char32_t first;
  char32_t last;  // inclusive
};

struct NormalizationConfig {
  // Sorted and non-overlapping. Space is always allowed.
  std::vector<CodepointRange> allowed_ranges = {
      {U'0', U'9'},           {U'A', U'Z'},           {U'a', U'z'},
      {U'\u0E01', U'\u0E45'}, {U'\u0E47', U'\u0E4E'},
  };
  char32_t maiyamok = U'\u0E46';
  bool expand_maiyamok = true;

  void validate() const {
    for (std::size_t i = 0; i < allowed_ranges.size(); ++i) {
      if (allowed_ranges[i].first > allowed_ranges[i].last)
        throw ConfigError("allowed range " + std::to_string(i) + " is inverted");
      if (i > 0 && allowed_ranges[i - 1].last >= allowed_ranges[i].first)
        throw ConfigError("allowed ranges must be sorted and non-overlapping");
    }
  }

  bool allowed(char32_t c) const {
    if (c == U' ') return true;
    auto it = std::upper_bound(
        allowed_ranges.begin(), allowed_ranges.end(), c,
        [](char32_t v, const CodepointRange& r) { return v < r.first; });
    return it != allowed_ranges.begin() && c <= std::prev(it)->last;
  }
};

struct NormalizeResult {
  std::string text;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::u32string filter_allowed(std::u32string_view in,
                                     const NormalizationConfig& config,
                                     bool keep_maiyamok) {
  std::u32string out;
  out.reserve(in.size());
  for (char32_t c : in) {
    if (unicode::is_whitespace(c)) {
      out.push_back(U' ');
    } else if (keep_maiyamok && c == config.maiyamok) {
      out.push_back(c);
    } else if (config.allowed(c)) {
      out.push_back(c);
    }
  }
  return out;
}

inline std::u32string collapse_spaces(std::u32string_view in) {
  std::u32string out;
  for (char32_t c : in) {
    if (c == U' ' && (out.empty() || out.back() == U' ')) continue;
    out.push_back(c);
  }
  while (!out.empty() && out.back() == U' ') out.pop_back();
  return out;
}

}  // namespace detail

// A maiyamok repeats the last token of the text between it and the
// previous space or maiyamok, as segmented by `tokenizer`. A maiyamok with
// no such text (start of transcript, or right after another maiyamok) is
// dropped with a warning.
inline NormalizeResult normalize_transcript(std::string_view raw,
                                            const NormalizationConfig& config,
                                            const Tokenizer& tokenizer) {
  NormalizeResult result;
  std::u32string text = detail::filter_allowed(
      unicode::decode(unicode::nfc(raw)), config, config.expand_maiyamok);

  std::u32string out;
  out.reserve(text.size() * 2);
  std::size_t expansion_end = 0;  // end of the most recent repeated word
  for (char32_t c : text) {
    if (c == U' ') {
      if (!out.empty() && out.back() != U' ') out.push_back(U' ');
      continue;
    }
    if (c != config.maiyamok) {
      out.push_back(c);
      continue;
    }
    // Spaces between a word and its maiyamok are dropped.
    while (!out.empty() && out.back() == U' ') out.pop_back();
    std::size_t begin = out.find_last_of(U' ');
    begin = begin == std::u32string::npos ? 0 : begin + 1;
    begin = std::max(begin, std::min(expansion_end, out.size()));
    if (begin == out.size()) {
      result.warnings.push_back(
          (out.empty() ? "maiyamok at start of text dropped: '"
                       : "maiyamok without a preceding word dropped: '") +
          std::string(raw) + "'");
      continue;
    }
    std::u32string span = out.substr(begin);
    Segmentation seg = tokenizer.tokenize(unicode::encode(span));
    out += seg.tokens.empty() ? span : unicode::decode(seg.tokens.back());
    expansion_end = out.size();
  }

  std::u32string collapsed = detail::collapse_spaces(out);
  // Removing characters can leave combining marks out of canonical order.
  std::u32string renormalized = unicode::decode(unicode::nfc(unicode::encode(collapsed)));
  result.text = unicode::encode(
      detail::collapse_spaces(detail::filter_allowed(renormalized, config, false)));
  return result;
}

// Literal search/replace pairs, applied in order before normalization.
using SubstitutionTable = std::vector<std::pair<std::string, std::string>>;

inline std::string apply_substitutions(std::string text, const SubstitutionTable& table) {
  for (const auto& [from, to] : table) {
    if (from.empty()) continue;
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
      text.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return text;
}

// Tab-separated "from<TAB>to" lines; '#' starts a comment line.
inline SubstitutionTable load_substitutions(std::istream& in) {
  SubstitutionTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("substitution line without a tab", lineno);
    table.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return table;
}

struct NormalizeCorpusResult {
  std::vector<Utterance> utterances;
  std::size_t dropped_empty = 0;
  std::vector<std::string> warnings;
};

inline NormalizeCorpusResult normalize_corpus(const std::vector<Utterance>& utterances,
                                              const NormalizationConfig& config,
                                              const Tokenizer& tokenizer,
                                              const SubstitutionTable& substitutions = {}) {
  config.validate();
  NormalizeCorpusResult result;
  for (const auto& u : utterances) {
    NormalizeResult n = normalize_transcript(
        apply_substitutions(u.sentence, substitutions), config, tokenizer);
    for (auto& w : n.warnings) result.warnings.push_back(u.path + ": " + w);
    if (n.text.empty()) {
      ++result.dropped_empty;
      continue;
    }
    Utterance cleaned = u;
    cleaned.sentence = std::move(n.text);
    result.utterances.push_back(std::move(cleaned));
  }
  return result;
}

}  // namespace thaiasr

#endif  // THAIASR_TEXTNORM_HPP_
