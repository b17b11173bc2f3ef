// metrics.hpp
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
// WER/CER with retokenization. Both reference and hypothesis have all
// whitespace removed and are re-segmented by the evaluation tokenizer
// before word alignment; characters are compared after whitespace removal.
// Corpus rates pool edits over all utterances.

#ifndef THAIASR_METRICS_HPP_
#define THAIASR_METRICS_HPP_

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <sstream>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "thaiasr/corpus.hpp"
#include "thaiasr/error.hpp"
#include "thaiasr/parallel.hpp"
#include "thaiasr/tokenizer.hpp"
#include "thaiasr/unicode.hpp"

namespace thaiasr {

struct EditCounts {
  std::size_t distance = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  // One op per alignment column: '=' match, 'S', 'I', 'D'.
  std::string ops;
};

// Unit-cost Levenshtein distance with an S/I/D split taken from one
// optimal alignment. The backtrace prefers the diagonal (match or
// substitution), then insertion, then deletion.
template <typename T>
EditCounts edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i, j - 1) + 1,
                           at(i - 1, j) + 1});

  EditCounts out;
  out.distance = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        out.ops.push_back(same ? '=' : 'S');
        if (!same) ++out.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      out.ops.push_back('I');
      ++out.insertions;
      --j;
    } else {
      out.ops.push_back('D');
      ++out.deletions;
      --i;
    }
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

template <typename T>
EditCounts edit_distance(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return edit_distance(std::span<const T>(ref), std::span<const T>(hyp));
}

inline std::vector<std::string> postprocess(std::string_view prediction, const Tokenizer& tokenizer) {
  const std::string stripped = unicode::strip_whitespace(prediction);
  if (stripped.empty()) return {};
  return tokenizer.tokenize(stripped).tokens;
}

struct EvalPair {
  std::string id;
  std::string reference;
  std::string hypothesis;
};

struct UtteranceResult {
  std::string id;
  std::vector<std::string> ref_tokens;
  std::vector<std::string> hyp_tokens;
  EditCounts words;
  EditCounts chars;
  std::size_t ref_chars = 0;
};

struct EvalReport {
  double wer = 0;
  double cer = 0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_token_total = 0;
  std::size_t char_substitutions = 0;
  std::size_t char_insertions = 0;
  std::size_t char_deletions = 0;
  std::size_t ref_char_total = 0;
  std::vector<UtteranceResult> per_utterance;
  std::vector<std::string> excluded;  // ids with an empty reference
  std::string tokenizer_id;
  std::string dictionary_hash;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["wer"] = wer;
    j["cer"] = cer;
    j["substitutions"] = substitutions;
    j["insertions"] = insertions;
    j["deletions"] = deletions;
    j["ref_token_total"] = ref_token_total;
    j["char_substitutions"] = char_substitutions;
    j["char_insertions"] = char_insertions;
    j["char_deletions"] = char_deletions;
    j["ref_char_total"] = ref_char_total;
    j["utterances"] = per_utterance.size();
    j["excluded"] = excluded;
    j["tokenizer_id"] = tokenizer_id;
    j["dictionary_hash"] = dictionary_hash;
    auto& rows = j["per_utterance"] = nlohmann::ordered_json::array();
    for (const auto& u : per_utterance) {
      nlohmann::ordered_json r;
      r["id"] = u.id;
      r["ref"] = u.ref_tokens;
      r["hyp"] = u.hyp_tokens;
      r["ops"] = u.words.ops;
      r["substitutions"] = u.words.substitutions;
      r["insertions"] = u.words.insertions;
      r["deletions"] = u.words.deletions;
      r["char_errors"] = u.chars.distance;
      r["ref_chars"] = u.ref_chars;
      rows.push_back(std::move(r));
    }
    return j;
  }

  void write_summary(std::ostream& out) const {
    char line[160];
    out << "metric  errors     ref        rate\n";
    std::snprintf(line, sizeof line, "WER     %-10zu %-10zu %.6f%%\n", substitutions + insertions + deletions,
                  ref_token_total, 100.0 * wer);
    out << line;
    std::snprintf(line, sizeof line, "CER     %-10zu %-10zu %.6f%%\n",
                  char_substitutions + char_insertions + char_deletions, ref_char_total, 100.0 * cer);
    out << line;
    std::snprintf(line, sizeof line, "S/I/D   %zu/%zu/%zu  utterances %zu  excluded %zu  tokenizer %s\n",
                  substitutions, insertions, deletions, per_utterance.size(), excluded.size(),
                  tokenizer_id.c_str());
    out << line;
  }
};

inline EvalReport corpus_wer(std::span<const EvalPair> pairs, const Tokenizer& tokenizer,
                             std::size_t threads = 1) {
  if (pairs.empty()) throw ConfigError("no utterances to evaluate");
  std::vector<UtteranceResult> results(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const EvalPair& p = pairs[i];
    UtteranceResult& r = results[i];
    r.id = p.id;
    r.ref_tokens = postprocess(p.reference, tokenizer);
    if (r.ref_tokens.empty()) return;
    r.hyp_tokens = postprocess(p.hypothesis, tokenizer);
    r.words = edit_distance(r.ref_tokens, r.hyp_tokens);
    const std::u32string ref_chars = unicode::strip_whitespace(unicode::decode(p.reference));
    const std::u32string hyp_chars = unicode::strip_whitespace(unicode::decode(p.hypothesis));
    r.chars = edit_distance(std::span<const char32_t>(ref_chars), std::span<const char32_t>(hyp_chars));
    r.ref_chars = ref_chars.size();
  });

  EvalReport report;
  report.tokenizer_id = tokenizer.id();
  report.dictionary_hash = tokenizer.dictionary_hash();
  for (auto& r : results) {
    if (r.ref_tokens.empty()) {
      report.excluded.push_back(r.id);
      continue;
    }
    report.substitutions += r.words.substitutions;
    report.insertions += r.words.insertions;
    report.deletions += r.words.deletions;
    report.ref_token_total += r.ref_tokens.size();
    report.char_substitutions += r.chars.substitutions;
    report.char_insertions += r.chars.insertions;
    report.char_deletions += r.chars.deletions;
    report.ref_char_total += r.ref_chars;
    report.per_utterance.push_back(std::move(r));
  }
  if (report.ref_token_total > 0)
    report.wer = static_cast<double>(report.substitutions + report.insertions + report.deletions) /
                 static_cast<double>(report.ref_token_total);
  if (report.ref_char_total > 0)
    report.cer = static_cast<double>(report.char_substitutions + report.char_insertions +
                                     report.char_deletions) /
                 static_cast<double>(report.ref_char_total);
  return report;
}

// TSV with a header naming id, reference and hypothesis, or JSON lines
// with those keys. The format is sniffed from the first non-blank byte.
inline std::vector<EvalPair> load_pairs(std::istream& in) {
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto first = content.find_first_not_of(" \t\r\n");
  std::vector<EvalPair> pairs;
  if (first != std::string::npos && content[first] == '{') {
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        pairs.push_back({j.at("id").get<std::string>(), j.at("reference").get<std::string>(),
                         j.at("hypothesis").get<std::string>()});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what(), lineno);
      }
    }
    return pairs;
  }
  std::istringstream tsv(content);
  TsvTable table = read_tsv(tsv);
  const auto c_id = table.require_column("id");
  const auto c_ref = table.require_column("reference");
  const auto c_hyp = table.require_column("hypothesis");
  for (const auto& row : table.rows) pairs.push_back({row[c_id], row[c_ref], row[c_hyp]});
  return pairs;
}

inline std::vector<EvalPair> load_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return load_pairs(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace thaiasr

#endif  // THAIASR_METRICS_HPP_
