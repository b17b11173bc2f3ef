// tokenizer.hpp
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
// Dictionary maximal-matching word segmentation and the external tokenizer
// plug-in.
//
// The dictionary segmenter picks, among all segmentations whose tokens are
// either dictionary words or maximal unknown runs, one with the fewest
// tokens. An unknown run starts at a position where no dictionary word
// begins and extends up to the next position where one does (or the end of
// the text). Ties go to the segmentation whose first token is longest, then
// second, and so on.

#ifndef THAIASR_TOKENIZER_HPP_
#define THAIASR_TOKENIZER_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "thaiasr/error.hpp"
#include "thaiasr/process.hpp"
#include "thaiasr/unicode.hpp"

namespace thaiasr {

// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = kHex[h & 0xf];
  return out;
}

// Immutable word list stored as a code-point trie.
class WordDictionary {
 public:
  WordDictionary() : terminal_(1, false) {}

  explicit WordDictionary(const std::vector<std::string>& words)
      : WordDictionary() {
    for (const auto& w : words) insert(w);
    finish();
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  bool contains(std::string_view word) const {
    return std::binary_search(words_.begin(), words_.end(), word);
  }

  // Sorted, unique.
  const std::vector<std::string>& words() const { return words_; }

  // Hash of the sorted entry list; independent of file order and duplicates.
  std::string content_hash() const {
    std::string joined;
    for (const auto& w : words_) {
      joined += w;
      joined += '\n';
    }
    return fnv1a_hex(joined);
  }

  // Calls fn(length) for every dictionary word that starts at text[pos],
  // shortest first.
  template <typename Fn>
  void for_each_match(std::u32string_view text, std::size_t pos,
                      Fn&& fn) const {
    uint32_t node = 0;
    for (std::size_t i = pos; i < text.size(); ++i) {
      auto it = edges_.find(edge_key(node, text[i]));
      if (it == edges_.end()) return;
      node = it->second;
      if (terminal_[node]) fn(i - pos + 1);
    }
  }

  bool starts_word(std::u32string_view text, std::size_t pos) const {
    bool found = false;
    uint32_t node = 0;
    for (std::size_t i = pos; i < text.size() && !found; ++i) {
      auto it = edges_.find(edge_key(node, text[i]));
      if (it == edges_.end()) break;
      node = it->second;
      found = terminal_[node];
    }
    return found;
  }

 private:
  friend WordDictionary load_dictionary(std::istream& in);

  static uint64_t edge_key(uint32_t node, char32_t c) {
    return (static_cast<uint64_t>(node) << 21) | static_cast<uint64_t>(c);
  }

  void insert(std::string_view word) {
    if (word.empty()) return;
    uint32_t node = 0;
    for (char32_t c : unicode::decode(word)) {
      auto [it, inserted] = edges_.try_emplace(
          edge_key(node, c), static_cast<uint32_t>(terminal_.size()));
      if (inserted) terminal_.push_back(false);
      node = it->second;
    }
    terminal_[node] = true;
    words_.emplace_back(word);
  }

  void finish() {
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
  }

  std::unordered_map<uint64_t, uint32_t> edges_;
  std::vector<bool> terminal_;
  std::vector<std::string> words_;
};

// One word per line; surrounding whitespace trimmed, blank lines skipped.
inline WordDictionary load_dictionary(std::istream& in) {
  WordDictionary dict;
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r\n\f\v");
    dict.insert(std::string_view(line).substr(first, last - first + 1));
  }
  if (in.bad()) throw IoError("error reading dictionary");
  dict.finish();
  return dict;
}

inline WordDictionary load_dictionary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary " + path);
  return load_dictionary(in);
}

struct Segmentation {
  std::vector<std::string> tokens;
  std::string source;
};

// Code-point level segmentation; `text` must not contain whitespace.
inline std::vector<std::u32string> segment(std::u32string_view text,
                                           const WordDictionary& dict) {
  const std::size_t n = text.size();
  std::vector<std::u32string> out;
  if (n == 0) return out;

  // next_start[i]: first position >= i where some word begins, or n.
  std::vector<char> starts(n, 0);
  for (std::size_t i = 0; i < n; ++i) starts[i] = dict.starts_word(text, i);
  std::vector<std::size_t> next_start(n + 1, n);
  for (std::size_t i = n; i-- > 0;)
    next_start[i] = starts[i] ? i : next_start[i + 1];

  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  // best[i]: minimum tokens covering text[i..n).
  std::vector<std::size_t> best(n + 1, kInf);
  best[n] = 0;
  for (std::size_t i = n; i-- > 0;) {
    if (starts[i]) {
      dict.for_each_match(text, i, [&](std::size_t len) {
        if (best[i + len] != kInf) best[i] = std::min(best[i], best[i + len] + 1);
      });
    } else {
      best[i] = best[next_start[i]] + 1;
    }
  }

  std::size_t i = 0;
  while (i < n) {
    std::size_t take = 0;
    if (starts[i]) {
      dict.for_each_match(text, i, [&](std::size_t len) {
        if (best[i + len] != kInf && best[i + len] + 1 == best[i]) take = len;
      });
    } else {
      take = next_start[i] - i;
    }
    out.emplace_back(text.substr(i, take));
    i += take;
  }
  return out;
}

// Whitespace is removed before segmenting, so the lossless-join property
// holds for any input.
inline Segmentation tokenize(std::string_view text, const WordDictionary& dict) {
  Segmentation seg;
  seg.source = std::string(text);
  for (const auto& tok : segment(unicode::strip_whitespace(unicode::decode(text)), dict))
    seg.tokens.push_back(unicode::encode(tok));
  return seg;
}

// Pipes the whitespace-stripped text (plus a trailing newline) through
// `command` and reads one token per line back.
inline Segmentation tokenize_external(std::string_view text,
                                      const std::string& command) {
  const std::string stripped = unicode::strip_whitespace(text);
  detail::ProcessResult res;
  try {
    res = detail::run_filter(command, stripped + "\n");
  } catch (const ProcessError& e) {
    throw ProcessError(std::string(e.what()) + " (utterance '" +
                       std::string(text) + "')");
  }
  if (res.exit_status == 126 || res.exit_status == 127)
    throw ProcessError("failed to spawn external tokenizer '" + command +
                       "' (exit " + std::to_string(res.exit_status) +
                       ") on utterance '" + std::string(text) + "'");
  if (res.exit_status != 0)
    throw ProcessError("external tokenizer '" + command + "' exited with " +
                       std::to_string(res.exit_status) + " on utterance '" +
                       std::string(text) + "'");
  Segmentation seg;
  seg.source = std::string(text);
  std::istringstream lines(res.output);
  std::string line;
  std::string joined;
  while (std::getline(lines, line)) {
    std::string tok = unicode::strip_whitespace(line);
    if (tok.empty()) continue;
    joined += tok;
    seg.tokens.push_back(std::move(tok));
  }
  if (joined != stripped)
    throw ProcessError("external tokenizer '" + command +
                       "' returned tokens that do not concatenate to utterance '" +
                       std::string(text) + "'");
  return seg;
}

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual Segmentation tokenize(std::string_view text) const = 0;
  // Recorded in evaluation reports.
  virtual std::string id() const = 0;
  virtual std::string dictionary_hash() const { return {}; }
};

class DictionaryTokenizer final : public Tokenizer {
 public:
  explicit DictionaryTokenizer(std::shared_ptr<const WordDictionary> dict)
      : dict_(std::move(dict)) {}
  explicit DictionaryTokenizer(WordDictionary dict)
      : dict_(std::make_shared<const WordDictionary>(std::move(dict))) {}

  Segmentation tokenize(std::string_view text) const override {
    return thaiasr::tokenize(text, *dict_);
  }
  std::string id() const override { return "maxmatch"; }
  std::string dictionary_hash() const override { return dict_->content_hash(); }
  const WordDictionary& dictionary() const { return *dict_; }

 private:
  std::shared_ptr<const WordDictionary> dict_;
};

// One subprocess per call; calls on the same instance are serialized.
class ExternalTokenizer final : public Tokenizer {
 public:
  explicit ExternalTokenizer(std::string command) : command_(std::move(command)) {
    if (command_.empty()) throw ConfigError("external tokenizer command is empty");
  }

  Segmentation tokenize(std::string_view text) const override {
    std::lock_guard<std::mutex> lock(mu_);
    return tokenize_external(text, command_);
  }
  std::string id() const override { return "external:" + command_; }

 private:
  std::string command_;
  mutable std::mutex mu_;
};

}  // namespace thaiasr

#endif  // THAIASR_TOKENIZER_HPP_
