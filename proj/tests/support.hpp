// support.hpp
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
// Random instance generators and synthetic fixtures shared by the unit
// tests and the acceptance runner.

#ifndef THAIASR_TESTS_SUPPORT_HPP_
#define THAIASR_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "thaiasr/thaiasr.hpp"

namespace fixture {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Normally distributed logits pushed through a log-softmax.
inline thaiasr::Emissions random_emissions(Rng& rng, std::size_t frames, std::size_t labels,
                                           double spread = 1.5) {
  std::normal_distribution<double> gauss(0.0, spread);
  std::vector<double> data(frames * labels);
  for (double& v : data) v = gauss(rng);
  thaiasr::Emissions e(frames, labels, std::move(data));
  e.log_softmax();
  return e;
}

// Labels: blank, then optionally '|', then letters from "abc".
inline thaiasr::CtcVocab small_vocab(int labels, bool with_delimiter) {
  thaiasr::CtcVocab v;
  v.labels.push_back("_");
  if (with_delimiter) {
    v.labels.push_back("|");
    v.delimiter = 1;
  }
  const std::string letters = "abc";
  for (std::size_t i = 0; static_cast<int>(v.labels.size()) < labels; ++i)
    v.labels.push_back(std::string(1, letters[i]));
  return v;
}

inline std::string random_word(Rng& rng, const std::string& alphabet, int max_len) {
  std::string w;
  const int len = uniform_int(rng, 1, max_len);
  for (int i = 0; i < len; ++i)
    w += alphabet[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1))];
  return w;
}

inline std::vector<std::vector<std::string>> random_sentences(Rng& rng, const std::string& alphabet,
                                                              int count, int max_words,
                                                              int max_word_len) {
  std::vector<std::vector<std::string>> out;
  for (int s = 0; s < count; ++s) {
    std::vector<std::string> sentence;
    const int n = uniform_int(rng, 1, max_words);
    for (int i = 0; i < n; ++i) sentence.push_back(random_word(rng, alphabet, max_word_len));
    out.push_back(std::move(sentence));
  }
  return out;
}

inline thaiasr::NGramModel random_lm(Rng& rng, const std::string& alphabet, int order = 3) {
  auto sentences = random_sentences(rng, alphabet, uniform_int(rng, 2, 8), 4, 3);
  return thaiasr::estimate(thaiasr::count_ngrams(sentences, order), uniform_real(rng, 0.2, 0.95));
}

inline std::string write_arpa_string(const thaiasr::NGramModel& m) {
  std::ostringstream out;
  thaiasr::write_arpa(m, out);
  return out.str();
}

inline thaiasr::NGramModel read_arpa_string(const std::string& text) {
  std::istringstream in(text);
  return thaiasr::read_arpa(in);
}

// ---------------------------------------------------------------------------
// Split corpora: legacy speakers with a fixed label, some of whom recorded
// more clips later, plus speakers that only appear in the new release.

struct SplitCorpus {
  std::vector<thaiasr::Utterance> current;  // full new release
  std::vector<thaiasr::Utterance> legacy_train, legacy_valid, legacy_test;
  std::size_t new_only_speakers = 0;
};

inline SplitCorpus random_split_corpus(Rng& rng, int legacy_speakers, int new_speakers,
                                       bool with_durations = true) {
  SplitCorpus c;
  c.new_only_speakers = static_cast<std::size_t>(new_speakers);
  int clip = 0;
  auto make = [&](const std::string& speaker) {
    thaiasr::Utterance u;
    u.client_id = speaker;
    u.path = "clip_" + std::to_string(uniform_int(rng, 0, 1 << 20)) + "_" + std::to_string(clip++) + ".mp3";
    u.sentence = "s" + std::to_string(clip);
    u.duration_ms = with_durations ? uniform_int(rng, 1000, 9000) : 0;
    return u;
  };
  for (int s = 0; s < legacy_speakers; ++s) {
    const std::string speaker = "legacy" + std::to_string(s);
    const double r = uniform_real(rng, 0, 1);
    auto& bucket = r < 0.7 ? c.legacy_train : (r < 0.85 ? c.legacy_valid : c.legacy_test);
    const int old_clips = uniform_int(rng, 1, 6);
    for (int k = 0; k < old_clips; ++k) {
      auto u = make(speaker);
      bucket.push_back(u);
      c.current.push_back(u);
    }
    // A quarter of legacy speakers come back with a new clip.
    if (uniform_int(rng, 0, 3) == 0) c.current.push_back(make(speaker));
  }
  for (int s = 0; s < new_speakers; ++s) {
    const std::string speaker = "new" + std::to_string(s);
    const int clips = uniform_int(rng, 1, 8);
    for (int k = 0; k < clips; ++k) c.current.push_back(make(speaker));
  }
  std::shuffle(c.current.begin(), c.current.end(), rng);
  return c;
}

inline std::string manifests(const thaiasr::ResplitResult& r) {
  std::ostringstream out;
  for (auto l : thaiasr::kSplitLabels) thaiasr::write_manifest(out, l, r.assignment, r.corpus);
  out << r.report.to_json().dump();
  return out.str();
}

// ---------------------------------------------------------------------------
// Fusion fixture: sentences from a small word grammar, rendered as CTC
// emissions in which some letters are misheard as a similar-sounding
// letter. The LM knows the grammar, so fusion should repair most of them.

struct FusionFixture {
  thaiasr::CtcVocab vocab;
  std::shared_ptr<const thaiasr::NGramModel> lm;
  thaiasr::WordDictionary dictionary;
  std::vector<std::string> references;
  std::vector<thaiasr::Emissions> emissions;
};

inline FusionFixture make_fusion_fixture(uint64_t seed, int utterances = 50) {
  Rng rng(seed);
  const std::vector<std::vector<std::string>> slots = {
      {"bam", "dig", "kot", "mub"},
      {"pat", "dub", "gin", "tok"},
      {"mop", "tub", "nag", "bid"},
  };
  auto sentence = [&] {
    std::vector<std::string> s;
    for (const auto& slot : slots)
      s.push_back(slot[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(slot.size()) - 1))]);
    return s;
  };

  FusionFixture f;
  const std::string letters = "aioubpdtgkmn";
  f.vocab.labels = {"_", "|"};
  for (char c : letters) f.vocab.labels.push_back(std::string(1, c));
  f.vocab.blank = 0;
  f.vocab.delimiter = 1;
  const std::map<char, char> confusable = {{'b', 'p'}, {'p', 'b'}, {'d', 't'}, {'t', 'd'},
                                           {'g', 'k'}, {'k', 'g'}, {'m', 'n'}, {'n', 'm'}};
  auto label_of = [&](char c) { return c == '|' ? 1 : 2 + static_cast<int>(letters.find(c)); };

  std::vector<std::vector<std::string>> training;
  for (int i = 0; i < 300; ++i) training.push_back(sentence());
  f.lm = std::make_shared<const thaiasr::NGramModel>(
      thaiasr::estimate(thaiasr::count_ngrams(training, 3), 0.75));
  std::ostringstream words;
  for (const auto& slot : slots)
    for (const auto& w : slot) words << w << '\n';
  std::istringstream words_in(words.str());
  f.dictionary = thaiasr::load_dictionary(words_in);

  const int V = f.vocab.size();
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int u = 0; u < utterances; ++u) {
    auto s = sentence();
    std::string text, spelled;
    for (std::size_t i = 0; i < s.size(); ++i) {
      text += (i ? " " : "") + s[i];
      spelled += (i ? "|" : "") + s[i];
    }
    f.references.push_back(text);
    std::vector<double> data;
    auto frame = [&](int best, int rival) {
      std::vector<double> logits(static_cast<std::size_t>(V));
      for (int v = 0; v < V; ++v) logits[static_cast<std::size_t>(v)] = -4.0 + noise(rng);
      logits[static_cast<std::size_t>(best)] = 0.0 + noise(rng) * 0.1;
      if (rival >= 0) logits[static_cast<std::size_t>(rival)] = -0.3 + noise(rng) * 0.1;
      data.insert(data.end(), logits.begin(), logits.end());
    };
    for (char c : spelled) {
      const int truth = label_of(c);
      auto it = confusable.find(c);
      const bool misheard = it != confusable.end() && uniform_real(rng, 0, 1) < 0.3;
      for (int k = 0; k < 2; ++k) {
        if (misheard) {
          frame(label_of(it->second), truth);
        } else {
          frame(truth, -1);
        }
      }
      frame(0, -1);
    }
    const std::size_t frames = data.size() / static_cast<std::size_t>(V);
    thaiasr::Emissions e(frames, static_cast<std::size_t>(V), std::move(data));
    e.log_softmax();
    f.emissions.push_back(std::move(e));
  }
  return f;
}

inline double fixture_wer(const FusionFixture& f, double alpha) {
  thaiasr::DecodeParams params;
  params.alpha = alpha;
  params.beam_width = 64;
  thaiasr::CtcDecoder decoder(f.vocab, params, alpha > 0 ? f.lm : nullptr);
  std::vector<thaiasr::EvalPair> pairs;
  for (std::size_t i = 0; i < f.emissions.size(); ++i) {
    auto hyps = decoder.decode(f.emissions[i]);
    pairs.push_back({std::to_string(i), f.references[i], hyps.empty() ? "" : hyps.front().text});
  }
  thaiasr::DictionaryTokenizer tok(f.dictionary);
  return thaiasr::corpus_wer(pairs, tok).wer;
}

}  // namespace fixture

#endif  // THAIASR_TESTS_SUPPORT_HPP_
