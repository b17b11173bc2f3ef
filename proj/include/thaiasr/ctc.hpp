// ctc.hpp
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
// CTC decoding: greedy, prefix beam search with word-level n-gram shallow
// fusion, and an exhaustive reference decoder for small inputs.
//
// A hypothesis is a collapsed label sequence. Its score is
//
//   ln P_ctc(labels) + alpha * log10 P_lm(words) + beta * |words|
//
// where words are the non-empty runs between delimiter labels. During the
// search a word is scored against the LM when a delimiter closes it; at the
// end of the utterance the trailing partial word (if any) and the
// end-of-sentence marker are scored, so the final LM term equals the LM's
// sentence score over the words.

#ifndef THAIASR_CTC_HPP_
#define THAIASR_CTC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "thaiasr/emissions.hpp"
#include "thaiasr/error.hpp"
#include "thaiasr/lm.hpp"

namespace thaiasr {

struct DecodeParams {
  std::size_t beam_width = 64;
  double alpha = 0.0;  // LM weight, applied to log10 LM scores
  double beta = 0.0;   // per-word bonus
  // Labels scoring more than this far below the frame's best (natural log)
  // are not expanded. -inf disables pruning.
  double token_min_logp = -5.0;
  std::size_t hypotheses_returned = 1;

  void validate() const {
    if (beam_width < 1) throw ConfigError("beam width must be at least 1");
    if (hypotheses_returned < 1 || hypotheses_returned > beam_width)
      throw ConfigError("hypotheses returned must lie in [1, beam width]");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
    if (std::isnan(beta) || std::isnan(token_min_logp)) throw ConfigError("beta/token_min_logp is NaN");
  }
};

struct Hypothesis {
  std::vector<int> labels;  // collapsed, blanks removed
  std::string text;         // words joined by single spaces
  std::vector<std::string> words;
  double p_blank = kNegInf;
  double p_non_blank = kNegInf;
  LmState lm_state;
  double lm_log10 = 0.0;  // unweighted LM total; 0 when fusion is off
  double combined_score = kNegInf;

  double ctc_score() const { return log_add(p_blank, p_non_blank); }
};

namespace detail {

inline void check_inputs(const Emissions& emissions, const CtcVocab& vocab) {
  vocab.validate();
  if (emissions.frames() == 0) throw ConfigError("emissions have no frames");
  if (emissions.labels() != static_cast<std::size_t>(vocab.size()))
    throw ConfigError("emissions have " + std::to_string(emissions.labels()) +
                      " labels per frame, vocab has " + std::to_string(vocab.size()));
}

inline std::vector<std::string> split_words(std::span<const int> labels, const CtcVocab& vocab) {
  std::vector<std::string> words;
  std::string cur;
  for (int l : labels) {
    if (vocab.delimiter && l == *vocab.delimiter) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += vocab.labels[static_cast<std::size_t>(l)];
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

inline bool fusion_enabled(const DecodeParams& params, const NGramModel* lm) {
  if (params.alpha > 0.0 && !lm) throw ConfigError("alpha > 0 requires a language model");
  return params.alpha > 0.0;
}

inline void rank(std::vector<Hypothesis>& hyps) {
  std::sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.combined_score != b.combined_score) return a.combined_score > b.combined_score;
    return a.labels < b.labels;
  });
}

}  // namespace detail

inline std::vector<int> collapse(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int l : path) {
    if (l != prev && l != blank) out.push_back(l);
    prev = l;
  }
  return out;
}

inline std::string render(std::span<const int> labels, const CtcVocab& vocab) {
  return detail::join_words(detail::split_words(labels, vocab));
}

inline std::string greedy_decode(const Emissions& emissions, const CtcVocab& vocab) {
  detail::check_inputs(emissions, vocab);
  std::vector<int> path;
  path.reserve(emissions.frames());
  for (std::size_t t = 0; t < emissions.frames(); ++t) {
    auto row = emissions.frame(t);
    path.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return render(collapse(path, vocab.blank), vocab);
}

// Prefix beam search. Prefixes live in a tree so that each distinct label
// sequence is one node; the node caches the LM state and score of its
// completed words.
inline std::vector<Hypothesis> beam_search_decode(const Emissions& emissions, const CtcVocab& vocab,
                                                  const DecodeParams& params,
                                                  const NGramModel* lm = nullptr) {
  detail::check_inputs(emissions, vocab);
  params.validate();
  // Null when fusion is off, so every LM call sits behind one pointer test.
  const NGramModel* const fusion_lm = detail::fusion_enabled(params, lm) ? lm : nullptr;

  struct Node {
    int parent;
    int label;  // -1 at the root
    LmState lm_state;
    double lm_log10;
    std::size_t words;
    std::string pending;  // characters of the unfinished word
  };
  std::vector<Node> nodes;
  nodes.push_back({-1, -1, fusion_lm ? fusion_lm->begin_state() : LmState{}, 0.0, 0, {}});
  std::unordered_map<uint64_t, int> children;

  auto child_of = [&](int parent, int label) {
    const uint64_t key = (static_cast<uint64_t>(parent) << 32) | static_cast<uint32_t>(label);
    auto [it, inserted] = children.try_emplace(key, static_cast<int>(nodes.size()));
    if (!inserted) return it->second;
    Node n = nodes[static_cast<std::size_t>(parent)];
    n.parent = parent;
    n.label = label;
    if (vocab.delimiter && label == *vocab.delimiter) {
      if (!n.pending.empty()) {
        if (fusion_lm) {
          auto [lp, next] = fusion_lm->score_next(n.lm_state, n.pending);
          n.lm_log10 += lp;
          n.lm_state = next;
        }
        ++n.words;
        n.pending.clear();
      }
    } else {
      n.pending += vocab.labels[static_cast<std::size_t>(label)];
    }
    nodes.push_back(std::move(n));
    return it->second;
  };

  auto fusion_score = [&](const Node& n) {
    return params.alpha * n.lm_log10 + params.beta * static_cast<double>(n.words);
  };

  struct Beam {
    int node;
    double p_blank;
    double p_non_blank;
    double score;
  };
  std::vector<Beam> beam{{0, 0.0, kNegInf, 0.0}};
  std::unordered_map<int, std::size_t> index;
  std::vector<Beam> next;
  std::vector<int> candidates;

  for (std::size_t t = 0; t < emissions.frames(); ++t) {
    auto row = emissions.frame(t);
    const double best = *std::max_element(row.begin(), row.end());
    candidates.clear();
    for (int c = 0; c < vocab.size(); ++c)
      if (row[static_cast<std::size_t>(c)] >= best + params.token_min_logp) candidates.push_back(c);

    next.clear();
    index.clear();
    auto slot = [&](int node) -> Beam& {
      auto [it, inserted] = index.try_emplace(node, next.size());
      if (inserted) next.push_back({node, kNegInf, kNegInf, 0.0});
      return next[it->second];
    };

    for (const Beam& b : beam) {
      const double total = log_add(b.p_blank, b.p_non_blank);
      const int last = nodes[static_cast<std::size_t>(b.node)].label;
      for (int c : candidates) {
        const double p = row[static_cast<std::size_t>(c)];
        if (c == vocab.blank) {
          Beam& s = slot(b.node);
          s.p_blank = log_add(s.p_blank, total + p);
          continue;
        }
        const int child = child_of(b.node, c);
        if (c == last) {
          // Repeat without an intervening blank collapses into the prefix.
          Beam& same = slot(b.node);
          same.p_non_blank = log_add(same.p_non_blank, b.p_non_blank + p);
          Beam& ext = slot(child);
          ext.p_non_blank = log_add(ext.p_non_blank, b.p_blank + p);
        } else {
          Beam& ext = slot(child);
          ext.p_non_blank = log_add(ext.p_non_blank, total + p);
        }
      }
    }

    for (Beam& b : next)
      b.score = log_add(b.p_blank, b.p_non_blank) + fusion_score(nodes[static_cast<std::size_t>(b.node)]);
    auto better = [](const Beam& a, const Beam& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.node < b.node;
    };
    if (next.size() > params.beam_width) {
      std::nth_element(next.begin(), next.begin() + static_cast<long>(params.beam_width), next.end(),
                       better);
      next.resize(params.beam_width);
    }
    std::sort(next.begin(), next.end(), better);
    beam.swap(next);
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(beam.size());
  for (const Beam& b : beam) {
    if (log_add(b.p_blank, b.p_non_blank) == kNegInf) continue;
    const Node& n = nodes[static_cast<std::size_t>(b.node)];
    Hypothesis h;
    for (int id = b.node; id > 0; id = nodes[static_cast<std::size_t>(id)].parent)
      h.labels.push_back(nodes[static_cast<std::size_t>(id)].label);
    std::reverse(h.labels.begin(), h.labels.end());
    h.words = detail::split_words(h.labels, vocab);
    h.text = detail::join_words(h.words);
    h.p_blank = b.p_blank;
    h.p_non_blank = b.p_non_blank;
    h.lm_state = n.lm_state;
    h.lm_log10 = n.lm_log10;
    std::size_t words = n.words;
    if (!n.pending.empty()) ++words;
    if (fusion_lm) {
      if (!n.pending.empty()) {
        auto [lp, next_state] = fusion_lm->score_next(h.lm_state, n.pending);
        h.lm_log10 += lp;
        h.lm_state = next_state;
      }
      auto [lp, end_state] = fusion_lm->score_next(h.lm_state, fusion_lm->eos());
      h.lm_log10 += lp;
      h.lm_state = end_state;
    }
    h.combined_score = h.ctc_score() + params.alpha * h.lm_log10 + params.beta * static_cast<double>(words);
    hyps.push_back(std::move(h));
  }
  detail::rank(hyps);
  if (hyps.size() > params.hypotheses_returned) hyps.resize(params.hypotheses_returned);
  return hyps;
}

inline constexpr std::size_t kBruteForceMaxFrames = 8;
inline constexpr std::size_t kBruteForceMaxLabels = 5;

// Enumerates all V^T alignment paths and sums their probabilities per
// collapsed label sequence. Only the fusion parameters (alpha, beta) and
// hypotheses_returned are read from `params`; there is no pruning.
inline std::vector<Hypothesis> brute_force_decode(const Emissions& emissions, const CtcVocab& vocab,
                                                  const NGramModel* lm, const DecodeParams& params) {
  detail::check_inputs(emissions, vocab);
  if (emissions.frames() > kBruteForceMaxFrames || emissions.labels() > kBruteForceMaxLabels)
    throw ConfigError("brute-force decoding is limited to T <= 8 and V <= 5");
  const NGramModel* const fusion_lm = detail::fusion_enabled(params, lm) ? lm : nullptr;

  const std::size_t T = emissions.frames();
  const int V = vocab.size();
  std::map<std::vector<int>, std::pair<double, double>> mass;  // (blank-ending, other)
  std::vector<int> path(T, 0);
  while (true) {
    double lp = 0;
    for (std::size_t t = 0; t < T; ++t) lp += emissions.at(t, static_cast<std::size_t>(path[t]));
    auto [it, inserted] = mass.try_emplace(collapse(path, vocab.blank), kNegInf, kNegInf);
    auto& [pb, pnb] = it->second;
    if (path.back() == vocab.blank) {
      pb = log_add(pb, lp);
    } else {
      pnb = log_add(pnb, lp);
    }
    // Odometer increment.
    std::size_t k = 0;
    while (k < T && ++path[k] == V) path[k++] = 0;
    if (k == T) break;
  }

  std::vector<Hypothesis> hyps;
  for (const auto& [labels, m] : mass) {
    Hypothesis h;
    h.labels = labels;
    h.words = detail::split_words(labels, vocab);
    h.text = detail::join_words(h.words);
    h.p_blank = m.first;
    h.p_non_blank = m.second;
    if (fusion_lm) h.lm_log10 = fusion_lm->score_sentence(h.words);
    h.combined_score = h.ctc_score() + params.alpha * h.lm_log10 +
                       params.beta * static_cast<double>(h.words.size());
    hyps.push_back(std::move(h));
  }
  detail::rank(hyps);
  if (hyps.size() > params.hypotheses_returned) hyps.resize(params.hypotheses_returned);
  return hyps;
}

// Immutable vocab + params + optional LM; decode() may be called from many
// threads at once.
class CtcDecoder {
 public:
  CtcDecoder(CtcVocab vocab, DecodeParams params, std::shared_ptr<const NGramModel> lm = nullptr)
      : vocab_(std::move(vocab)), params_(params), lm_(std::move(lm)) {
    vocab_.validate();
    params_.validate();
    detail::fusion_enabled(params_, lm_.get());
  }

  std::vector<Hypothesis> decode(const Emissions& emissions) const {
    return beam_search_decode(emissions, vocab_, params_, lm_.get());
  }
  std::string greedy(const Emissions& emissions) const { return greedy_decode(emissions, vocab_); }

  const CtcVocab& vocab() const { return vocab_; }
  const DecodeParams& params() const { return params_; }
  const NGramModel* lm() const { return lm_.get(); }

 private:
  CtcVocab vocab_;
  DecodeParams params_;
  std::shared_ptr<const NGramModel> lm_;
};

}  // namespace thaiasr

#endif  // THAIASR_CTC_HPP_
