// lm.hpp
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
// Backoff n-gram language model (trigram by default): counting,
// interpolated Kneser-Ney estimation with one absolute discount, ARPA
// reading/writing and backoff scoring.
//
// Sentences are padded with order-1 start markers and one end marker, so
// the first word of a trigram model is predicted from the context
// (<s>, <s>). Context-only entries that are never predicted (<s>, and
// <s> <s> for trigrams) carry the conventional -99 log10 probability.

#ifndef THAIASR_LM_HPP_
#define THAIASR_LM_HPP_

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "thaiasr/error.hpp"

namespace thaiasr {

inline constexpr std::string_view kSentenceStart = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknownWord = "<unk>";
inline constexpr int kMaxLmOrder = 6;
// Log10 probability of entries that are never predicted.
inline constexpr double kNeverPredictedLog10 = -99.0;
// Returned for a word with no unigram entry at all (external ARPA files
// without <unk>).
inline constexpr double kMissingUnigramLog10 = -100.0;

using WordId = uint32_t;

struct NGramCounts {
  int order = 3;
  // counts[n - 1]: n-grams of length n ending at a predicted position.
  std::vector<std::map<std::vector<std::string>, uint64_t>> counts;

  uint64_t count(const std::vector<std::string>& ngram) const {
    if (ngram.empty() || ngram.size() > counts.size()) return 0;
    const auto& table = counts[ngram.size() - 1];
    auto it = table.find(ngram);
    return it == table.end() ? 0 : it->second;
  }
};

inline NGramCounts count_ngrams(std::span<const std::vector<std::string>> sentences,
                                int order = 3) {
  if (order < 1 || order > kMaxLmOrder)
    throw ConfigError("LM order must be between 1 and " + std::to_string(kMaxLmOrder));
  if (sentences.empty()) throw ConfigError("no training data");
  NGramCounts result;
  result.order = order;
  result.counts.resize(static_cast<std::size_t>(order));
  std::vector<std::string> padded;
  for (const auto& sentence : sentences) {
    padded.assign(static_cast<std::size_t>(order - 1), std::string(kSentenceStart));
    for (const auto& tok : sentence) {
      if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos)
        throw ConfigError("LM tokens must be non-empty and whitespace-free");
      padded.push_back(tok);
    }
    padded.emplace_back(kSentenceEnd);
    for (std::size_t pos = static_cast<std::size_t>(order - 1); pos < padded.size(); ++pos) {
      for (int n = 1; n <= order; ++n) {
        std::vector<std::string> gram(padded.begin() + static_cast<long>(pos) - (n - 1),
                                      padded.begin() + static_cast<long>(pos) + 1);
        ++result.counts[static_cast<std::size_t>(n - 1)][gram];
      }
    }
  }
  return result;
}

struct NGramEntry {
  double log10_prob = 0;
  double log10_backoff = 0;
};

// Last order-1 words seen, oldest first.
struct LmState {
  std::array<WordId, kMaxLmOrder - 1> words{};
  uint8_t size = 0;

  std::span<const WordId> context() const { return {words.data(), size}; }
  friend bool operator==(const LmState& a, const LmState& b) {
    return a.size == b.size && std::equal(a.words.begin(), a.words.begin() + a.size, b.words.begin());
  }
};

namespace detail {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

// Packs word ids into a byte string; trigrams stay within the small-string
// buffer.
inline std::string pack_ids(std::span<const WordId> ids) {
  std::string key(ids.size() * sizeof(WordId), '\0');
  if (!ids.empty()) std::memcpy(key.data(), ids.data(), key.size());
  return key;
}

inline std::vector<WordId> unpack_ids(std::string_view key) {
  std::vector<WordId> ids(key.size() / sizeof(WordId));
  if (!ids.empty()) std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

}  // namespace detail

class NGramModel {
 public:
  explicit NGramModel(int order = 3) : order_(order), tables_(static_cast<std::size_t>(order)) {
    if (order < 1 || order > kMaxLmOrder)
      throw ConfigError("LM order must be between 1 and " + std::to_string(kMaxLmOrder));
    bos_ = add_word(kSentenceStart);
    eos_ = add_word(kSentenceEnd);
    unk_ = add_word(kUnknownWord);
  }

  int order() const { return order_; }
  WordId bos() const { return bos_; }
  WordId eos() const { return eos_; }
  WordId unk() const { return unk_; }

  std::size_t vocab_size() const { return words_.size(); }
  const std::string& word(WordId id) const { return words_.at(id); }

  std::optional<WordId> find_word(std::string_view w) const {
    auto it = ids_.find(w);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  // Out-of-vocabulary words map to <unk>.
  WordId lookup(std::string_view w) const { return find_word(w).value_or(unk_); }
  // In-vocabulary means the word has a unigram entry.
  bool contains(std::string_view w) const {
    auto id = find_word(w);
    return id && find({&*id, 1}) != nullptr;
  }

  WordId add_word(std::string_view w) {
    auto it = ids_.find(w);
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<WordId>(words_.size());
    words_.emplace_back(w);
    ids_.emplace(std::string(w), id);
    return id;
  }

  // Inserts or replaces the entry for `ngram` (1 <= size <= order).
  void set(std::span<const WordId> ngram, NGramEntry entry) {
    check_size(ngram.size());
    tables_[ngram.size() - 1][detail::pack_ids(ngram)] = entry;
  }

  NGramEntry* find_mutable(std::span<const WordId> ngram) {
    if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
    auto& t = tables_[ngram.size() - 1];
    auto it = t.find(detail::pack_ids(ngram));
    return it == t.end() ? nullptr : &it->second;
  }

  const NGramEntry* find(std::span<const WordId> ngram) const {
    if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
    const auto& t = tables_[ngram.size() - 1];
    auto it = t.find(detail::pack_ids(ngram));
    return it == t.end() ? nullptr : &it->second;
  }

  std::size_t ngram_count(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)).size(); }

  // fn(std::span<const WordId> ngram, const NGramEntry&) for every entry of
  // length n, in unspecified order.
  template <typename Fn>
  void for_each(int n, Fn&& fn) const {
    for (const auto& [key, entry] : tables_.at(static_cast<std::size_t>(n - 1))) {
      std::vector<WordId> ids = detail::unpack_ids(key);
      fn(std::span<const WordId>(ids), entry);
    }
  }

  // log10 P(w | context) with the standard backoff recursion; only the last
  // order-1 context words are used.
  double conditional_log10(std::span<const WordId> context, WordId w) const {
    const std::size_t max_ctx = std::min<std::size_t>(context.size(), tables_.size() - 1);
    std::array<WordId, kMaxLmOrder> buf{};
    double backoff = 0;
    for (std::size_t n = max_ctx + 1; n-- > 0;) {
      std::copy(context.end() - static_cast<long>(n), context.end(), buf.begin());
      buf[n] = w;
      if (const NGramEntry* e = find({buf.data(), n + 1})) return backoff + e->log10_prob;
      if (n > 0)
        if (const NGramEntry* ctx = find({buf.data(), n})) backoff += ctx->log10_backoff;
    }
    return backoff + kMissingUnigramLog10;
  }

  LmState begin_state() const {
    LmState s;
    s.size = static_cast<uint8_t>(order_ - 1);
    std::fill(s.words.begin(), s.words.begin() + s.size, bos_);
    return s;
  }

  std::pair<double, LmState> score_next(const LmState& state, WordId w) const {
    double lp = conditional_log10(state.context(), w);
    LmState next = state;
    const std::size_t keep = static_cast<std::size_t>(order_ - 1);
    if (keep == 0) return {lp, next};
    if (next.size < keep) {
      next.words[next.size++] = w;
    } else {
      std::copy(next.words.begin() + 1, next.words.begin() + next.size, next.words.begin());
      next.words[next.size - 1] = w;
    }
    return {lp, next};
  }

  std::pair<double, LmState> score_next(const LmState& state, std::string_view token) const {
    return score_next(state, lookup(token));
  }

  // Includes the end-of-sentence term.
  double score_sentence(std::span<const std::string> tokens) const {
    LmState state = begin_state();
    double total = 0;
    for (const auto& tok : tokens) {
      auto [lp, next] = score_next(state, tok);
      total += lp;
      state = next;
    }
    return total + score_next(state, eos_).first;
  }

 private:
  void check_size(std::size_t n) const {
    if (n == 0 || n > tables_.size())
      throw ConfigError("n-gram length " + std::to_string(n) + " outside model order " +
                        std::to_string(order_));
  }

  int order_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId, detail::StringHash, std::equal_to<>> ids_;
  std::vector<std::unordered_map<std::string, NGramEntry>> tables_;
  WordId bos_ = 0, eos_ = 0, unk_ = 0;
};

// Interpolated Kneser-Ney with a single absolute discount.
//
// Highest order uses raw counts; lower orders use continuation counts
// (number of distinct one-word left extensions), except n-grams that begin
// with <s>, which keep raw counts. For a context h with adjusted counts a:
//
//   P(w | h) = max(a(h, w) - D, 0) / A(h) + gamma(h) * P(w | h')
//   gamma(h) = D * |{w : a(h, w) > 0}| / A(h)
//
// with h' the context minus its oldest word. The unigram level
// interpolates with the uniform distribution over every predictable word,
// </s> and <unk>. In backoff form each context's backoff weight is exactly
// gamma(h), so every context distribution sums to one.
inline NGramModel estimate(const NGramCounts& counts, double discount = 0.75) {
  if (!(discount > 0.0 && discount < 1.0))
    throw ConfigError("discount must lie in (0, 1), got " + std::to_string(discount));
  const int order = counts.order;
  if (counts.counts.size() != static_cast<std::size_t>(order) || counts.counts[0].empty())
    throw ConfigError("no training data");

  using Gram = std::vector<std::string>;
  std::vector<std::map<Gram, double>> adjusted(static_cast<std::size_t>(order));
  adjusted[static_cast<std::size_t>(order - 1)].insert(counts.counts.back().begin(),
                                                       counts.counts.back().end());
  for (int n = order - 1; n >= 1; --n) {
    auto& a = adjusted[static_cast<std::size_t>(n - 1)];
    for (const auto& [gram, c] : counts.counts[static_cast<std::size_t>(n - 1)])
      if (gram.front() == kSentenceStart) a[gram] = static_cast<double>(c);
    for (const auto& [longer, c] : counts.counts[static_cast<std::size_t>(n)]) {
      Gram suffix(longer.begin() + 1, longer.end());
      if (suffix.front() != kSentenceStart) a[suffix] += 1.0;
    }
  }

  NGramModel model(order);
  auto ids_of = [&](const Gram& g) {
    std::vector<WordId> ids;
    ids.reserve(g.size());
    for (const auto& w : g) ids.push_back(model.add_word(w));
    return ids;
  };

  // Unigrams.
  const auto& uni = adjusted[0];
  std::vector<std::string> vocab;
  double total = 0;
  for (const auto& [g, a] : uni) {
    vocab.push_back(g[0]);
    total += a;
  }
  if (!uni.count({std::string(kUnknownWord)})) vocab.emplace_back(kUnknownWord);
  const double uniform_mass = discount * static_cast<double>(uni.size()) / total;
  const double uniform = uniform_mass / static_cast<double>(vocab.size());
  for (const auto& w : vocab) {
    auto it = uni.find({w});
    const double a = it == uni.end() ? 0.0 : it->second;
    const double p = std::max(a - discount, 0.0) / total + uniform;
    WordId id = model.add_word(w);
    model.set({&id, 1}, {std::log10(p), 0.0});
  }

  for (int n = 2; n <= order; ++n) {
    struct ContextStats {
      double total = 0;
      std::size_t types = 0;
    };
    std::map<Gram, ContextStats> contexts;
    const auto& table = adjusted[static_cast<std::size_t>(n - 1)];
    for (const auto& [g, a] : table) {
      auto& s = contexts[Gram(g.begin(), g.end() - 1)];
      s.total += a;
      ++s.types;
    }
    // Backoff weights live on the context entries one order down.
    std::map<Gram, double> gamma;
    for (const auto& [h, s] : contexts) {
      const double g = discount * static_cast<double>(s.types) / s.total;
      gamma[h] = g;
      std::vector<WordId> hid = ids_of(h);
      NGramEntry* e = model.find_mutable(hid);
      if (!e) {
        model.set(hid, {kNeverPredictedLog10, 0.0});
        e = model.find_mutable(hid);
      }
      e->log10_backoff = std::log10(g);
    }
    for (const auto& [g, a] : table) {
      Gram h(g.begin(), g.end() - 1);
      const auto& s = contexts.at(h);
      std::vector<WordId> ids = ids_of(g);
      std::span<const WordId> lower_ctx(ids.data() + 1, ids.size() - 2);
      const double lower = std::pow(10.0, model.conditional_log10(lower_ctx, ids.back()));
      const double p = std::max(a - discount, 0.0) / s.total + gamma.at(h) * lower;
      model.set(ids, {std::log10(p), 0.0});
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// ARPA

namespace detail {

inline std::string format_log10(double v) {
  if (v == kNeverPredictedLog10) return "-99";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.7f", v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> fields(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

// Entries within each order are sorted by their word strings. Values are
// printed with seven fractional digits; the backoff column is left out when
// it is zero.
inline void write_arpa(const NGramModel& model, std::ostream& out) {
  out << "\\data\\\n";
  for (int n = 1; n <= model.order(); ++n)
    out << "ngram " << n << '=' << model.ngram_count(n) << '\n';
  for (int n = 1; n <= model.order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    std::vector<std::pair<std::vector<std::string>, NGramEntry>> rows;
    rows.reserve(model.ngram_count(n));
    model.for_each(n, [&](std::span<const WordId> ids, const NGramEntry& e) {
      std::vector<std::string> words;
      for (WordId id : ids) words.push_back(model.word(id));
      rows.emplace_back(std::move(words), e);
    });
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [words, e] : rows) {
      out << detail::format_log10(e.log10_prob) << '\t';
      for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
      if (n < model.order() && e.log10_backoff != 0.0)
        out << '\t' << detail::format_log10(e.log10_backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline NGramModel read_arpa(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };

  // Anything before \data\ is ignored.
  bool found_data = false;
  while (next_line())
    if (detail::trim(line) == "\\data\\") {
      found_data = true;
      break;
    }
  if (!found_data) throw ParseError("missing \\data\\ header", lineno);

  std::vector<std::size_t> declared;
  std::string_view t;
  while (true) {
    if (!next_line()) throw ParseError("unexpected end of file in \\data\\ section", lineno);
    t = detail::trim(line);
    if (t.empty()) {
      if (declared.empty()) continue;
      break;
    }
    if (t.rfind("ngram ", 0) != 0) {
      if (t.front() == '\\') break;
      throw ParseError("malformed count line '" + std::string(t) + "'", lineno);
    }
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("malformed count line", lineno);
    auto n = detail::parse_double(detail::trim(t.substr(6, eq - 6)));
    auto c = detail::parse_double(detail::trim(t.substr(eq + 1)));
    if (!n || !c || *n != static_cast<double>(declared.size() + 1) || *c < 0)
      throw ParseError("malformed or out-of-order count line '" + std::string(t) + "'", lineno);
    declared.push_back(static_cast<std::size_t>(*c));
  }
  if (declared.empty()) throw ParseError("no ngram counts declared", lineno);
  if (declared.size() > static_cast<std::size_t>(kMaxLmOrder))
    throw ParseError("order " + std::to_string(declared.size()) + " not supported", lineno);

  NGramModel model(static_cast<int>(declared.size()));
  std::size_t order_seen = 0;
  bool ended = false;
  bool pending_header = !t.empty();  // the line that ended \data\ may be a header
  while (!ended) {
    if (!pending_header) {
      if (!next_line()) throw ParseError("missing \\end\\", lineno);
      t = detail::trim(line);
      if (t.empty()) continue;
    }
    pending_header = false;
    if (t == "\\end\\") {
      if (order_seen != declared.size())
        throw ParseError("\\end\\ before all declared orders were read", lineno);
      ended = true;
      break;
    }
    const std::string expected = "\\" + std::to_string(order_seen + 1) + "-grams:";
    if (t != expected)
      throw ParseError("expected section header '" + expected + "', found '" + std::string(t) + "'",
                       lineno);
    const std::size_t n = ++order_seen;
    const std::size_t header_line = lineno;
    std::size_t entries = 0;
    std::vector<WordId> ids(n);
    while (true) {
      if (!next_line()) throw ParseError("missing \\end\\", lineno);
      t = detail::trim(line);
      if (t.empty()) continue;
      if (t.front() == '\\') {
        pending_header = true;
        break;
      }
      auto f = detail::fields(t);
      if (f.size() != n + 1 && f.size() != n + 2)
        throw ParseError("expected " + std::to_string(n) + " words in " + expected + " entry", lineno);
      auto prob = detail::parse_double(f[0]);
      if (!prob) throw ParseError("bad probability '" + std::string(f[0]) + "'", lineno);
      NGramEntry e{*prob, 0.0};
      if (f.size() == n + 2) {
        auto bo = detail::parse_double(f[n + 1]);
        if (!bo) throw ParseError("bad backoff '" + std::string(f[n + 1]) + "'", lineno);
        e.log10_backoff = *bo;
      }
      for (std::size_t i = 0; i < n; ++i) ids[i] = model.add_word(f[i + 1]);
      if (n > 1 && !model.find({ids.data(), n - 1}))
        throw ParseError("context of " + std::string(t) + " missing from lower order", lineno);
      if (model.find(ids)) throw ParseError("duplicate entry " + std::string(t), lineno);
      model.set(ids, e);
      ++entries;
    }
    if (entries != declared[n - 1])
      throw ParseError("section " + expected + " declares " + std::to_string(declared[n - 1]) +
                           " entries but has " + std::to_string(entries),
                       header_line);
  }
  return model;
}

inline NGramModel read_arpa_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return read_arpa(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_arpa_file(const NGramModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_arpa(model, out);
  if (!out) throw IoError("error writing " + path);
}

}  // namespace thaiasr

#endif  // THAIASR_LM_HPP_
