// cli.hpp
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
// The `thaiasr` command line. run() is kept in the header so tests can
// drive every subcommand in-process with string streams.
//
// Exit status: 0 success, 1 validation/usage error, 2 I/O or parse error.

#ifndef THAIASR_CLI_HPP_
#define THAIASR_CLI_HPP_

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "thaiasr/corpus.hpp"
#include "thaiasr/ctc.hpp"
#include "thaiasr/emissions.hpp"
#include "thaiasr/error.hpp"
#include "thaiasr/lm.hpp"
#include "thaiasr/metrics.hpp"
#include "thaiasr/parallel.hpp"
#include "thaiasr/splitter.hpp"
#include "thaiasr/textnorm.hpp"
#include "thaiasr/tokenizer.hpp"
#include "thaiasr/version.hpp"

namespace thaiasr::cli {

// JSON config files for CLI11: nested objects map to subcommand sections,
// e.g. {"threads": 4, "decode": {"alpha": 0.5}}. Flags given on the command
// line take precedence.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::ordered_json j = dump(app, default_also);
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config", "JSON config must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        collect(value, sub, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  static nlohmann::ordered_json dump(const CLI::App* app, bool default_also) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        auto res = opt->results();
        j[name] = res.size() == 1 ? nlohmann::ordered_json(res.front()) : nlohmann::ordered_json(res);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      auto child = dump(sub, default_also);
      if (!child.empty()) j[sub->get_name()] = child;
    }
    return j;
  }
};

namespace detail {

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Primary output goes to --out when given, otherwise to the caller's stream.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream_ = &fallback;
    } else {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw IoError("error writing output");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

inline std::vector<std::string> read_lines(const std::string& path, std::istream& stdin_stream) {
  std::vector<std::string> lines;
  std::ifstream file;
  std::istream* in = &stdin_stream;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) throw IoError("cannot open " + path);
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (in->bad()) throw IoError("error reading " + (path.empty() ? std::string("stdin") : path));
  return lines;
}

struct TokenizerOptions {
  std::string dict;
  std::string command;
};

inline std::unique_ptr<Tokenizer> make_tokenizer(const TokenizerOptions& opts, bool required) {
  if (!opts.dict.empty() && !opts.command.empty())
    throw ConfigError("give either --dict or --tokenizer-cmd, not both");
  if (!opts.dict.empty()) return std::make_unique<DictionaryTokenizer>(load_dictionary_file(opts.dict));
  if (!opts.command.empty()) return std::make_unique<ExternalTokenizer>(opts.command);
  if (required) throw ConfigError("a tokenizer is required: --dict <file> or --tokenizer-cmd <command>");
  return nullptr;
}

inline void add_tokenizer_options(CLI::App* sub, TokenizerOptions& opts) {
  sub->add_option("--dict", opts.dict, "Word list for the dictionary tokenizer (one word per line)");
  sub->add_option("--tokenizer-cmd", opts.command,
                  "External tokenizer: reads text on stdin, writes one token per line");
}

// Lines become LM sentences: retokenized when a tokenizer is configured,
// otherwise split on whitespace.
inline std::vector<std::vector<std::string>> to_sentences(const std::vector<std::string>& lines,
                                                          const Tokenizer* tokenizer) {
  std::vector<std::vector<std::string>> out;
  out.reserve(lines.size());
  for (const auto& line : lines)
    out.push_back(tokenizer ? postprocess(line, *tokenizer) : unicode::split_whitespace(line));
  return out;
}

inline std::vector<CodepointRange> parse_ranges(const std::string& list) {
  std::vector<CodepointRange> ranges;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto dash = item.find('-');
    try {
      const auto first = static_cast<char32_t>(std::stoul(item.substr(0, dash), nullptr, 16));
      const auto last = dash == std::string::npos
                            ? first
                            : static_cast<char32_t>(std::stoul(item.substr(dash + 1), nullptr, 16));
      ranges.push_back({first, last});
    } catch (const std::exception&) {
      throw ConfigError("bad code point range '" + item + "' (expected hex like 0E01-0E45)");
    }
  }
  return ranges;
}

inline SplitTargets parse_targets(const std::string& list) {
  std::vector<double> v;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad split target '" + item + "'");
    }
  }
  if (v.size() != 3) throw ConfigError("--targets needs three fractions: train,valid,test");
  SplitTargets t;
  t.train = v[0];
  t.valid = v[1];
  t.test = v[2];
  return t;
}

struct DecodeOptions {
  std::string emissions;
  std::string emissions_dir;
  std::string vocab;
  std::string lm;
  std::string references;
  DecodeParams params;
  bool greedy = false;
  bool log_softmax = false;
};

inline void add_decode_options(CLI::App* sub, DecodeOptions& o, bool single_file) {
  if (single_file) sub->add_option("--emissions", o.emissions, "Emission matrix (.npy or text)");
  sub->add_option("--emissions-dir", o.emissions_dir,
                  "Directory of <utterance-id>.npy / .txt emission matrices");
  sub->add_option("--vocab", o.vocab, "CTC label file with #blank= / #delimiter= directives");
  sub->add_option("--lm", o.lm, "ARPA language model for shallow fusion");
  sub->add_option("--references", o.references, "TSV with id and reference columns");
  sub->add_option("--alpha", o.params.alpha, "LM weight")->capture_default_str();
  sub->add_option("--beta", o.params.beta, "Word insertion bonus")->capture_default_str();
  sub->add_option("--beam-width", o.params.beam_width, "Beam width")->capture_default_str();
  sub->add_option("--token-min-logp", o.params.token_min_logp,
                  "Per-frame pruning threshold relative to the best label (natural log)")
      ->capture_default_str();
  sub->add_option("--nbest", o.params.hypotheses_returned, "Hypotheses to print")->capture_default_str();
  sub->add_flag("--greedy", o.greedy, "Best-path decoding instead of beam search");
  sub->add_flag("--log-softmax", o.log_softmax, "Normalize raw scores with a log-softmax first");
}

struct Utt {
  std::string id;
  std::string path;
};

inline std::vector<Utt> list_emissions(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::map<std::string, std::string> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".npy" && ext != ".txt") continue;
    const auto id = entry.path().stem().string();
    if (!found.emplace(id, entry.path().string()).second)
      throw ConfigError("two emission files for utterance " + id);
  }
  std::vector<Utt> out;
  for (auto& [id, path] : found) out.push_back({id, path});
  return out;
}

inline std::map<std::string, std::string> load_references(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  TsvTable t = read_tsv(in);
  const auto c_id = t.require_column("id");
  const auto c_ref = t.require_column("reference");
  std::map<std::string, std::string> refs;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!refs.emplace(t.rows[r][c_id], t.rows[r][c_ref]).second)
      throw ParseError("duplicate id " + t.rows[r][c_id], t.row_lines[r]);
  return refs;
}

struct DecodedCorpus {
  std::vector<std::string> ids;
  std::vector<std::string> hypotheses;
};

inline DecodedCorpus decode_directory(const DecodeOptions& o, std::size_t threads) {
  if (o.vocab.empty()) throw ConfigError("--vocab is required");
  std::shared_ptr<const NGramModel> lm;
  if (!o.lm.empty()) lm = std::make_shared<const NGramModel>(read_arpa_file(o.lm));
  CtcDecoder decoder(load_vocab_file(o.vocab), o.params, lm);
  const auto utts = list_emissions(o.emissions_dir);
  DecodedCorpus result;
  result.hypotheses.resize(utts.size());
  for (const auto& u : utts) result.ids.push_back(u.id);
  parallel_for(utts.size(), threads, [&](std::size_t i) {
    Emissions e = load_emissions_file(utts[i].path);
    if (o.log_softmax) e.log_softmax();
    if (o.greedy) {
      result.hypotheses[i] = decoder.greedy(e);
    } else {
      auto hyps = decoder.decode(e);
      result.hypotheses[i] = hyps.empty() ? std::string() : hyps.front().text;
    }
  });
  return result;
}

inline std::vector<EvalPair> attach_references(const DecodedCorpus& decoded,
                                               const std::map<std::string, std::string>& refs) {
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < decoded.ids.size(); ++i) {
    auto it = refs.find(decoded.ids[i]);
    if (it == refs.end()) throw ConfigError("no reference for utterance " + decoded.ids[i]);
    pairs.push_back({decoded.ids[i], it->second, decoded.hypotheses[i]});
  }
  if (refs.size() != pairs.size())
    throw ConfigError(std::to_string(refs.size() - pairs.size()) + " references have no emission file");
  return pairs;
}

inline std::string tsv_field(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  using namespace detail;
  Streams io{in, out, err};

  CLI::App app{"Thai CTC speech recognition decoding and evaluation toolkit", "thaiasr"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags override its values");
  app.fallthrough();
  app.require_subcommand(0, 1);

  uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_path;
  bool version = false;
  app.add_option("--seed", seed, "Seed recorded in reports")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads for decode and evaluate")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
  app.add_option("--out", out_path, "Write results here instead of standard output");
  app.add_flag("--version", version, "Print toolkit and format versions");

  // normalize
  auto* normalize = app.add_subcommand("normalize", "Clean transcripts (one per line, or a corpus TSV)");
  std::string norm_in, norm_subs, norm_ranges;
  bool norm_tsv = false, norm_no_maiyamok = false;
  TokenizerOptions norm_tok;
  normalize->add_option("--in", norm_in, "Input file (default: standard input)");
  normalize->add_flag("--tsv", norm_tsv, "Input is a corpus TSV; the sentence column is cleaned");
  normalize->add_option("--substitutions", norm_subs, "TSV of literal from/to fixes applied first");
  normalize->add_option("--allowed-ranges", norm_ranges, "Kept code points, e.g. 30-39,41-5A,0E01-0E45");
  normalize->add_flag("--no-maiyamok", norm_no_maiyamok, "Drop maiyamok instead of expanding it");
  add_tokenizer_options(normalize, norm_tok);

  // tokenize
  auto* tokenize_cmd = app.add_subcommand("tokenize", "Segment lines into words");
  std::string tok_in, tok_sep = " ";
  TokenizerOptions tok_tok;
  tokenize_cmd->add_option("--in", tok_in, "Input file (default: standard input)");
  tokenize_cmd->add_option("--separator", tok_sep, "Token separator")->capture_default_str();
  add_tokenizer_options(tokenize_cmd, tok_tok);

  // lm-train
  auto* lm_train = app.add_subcommand("lm-train", "Estimate an interpolated Kneser-Ney ARPA model");
  std::string train_text;
  int train_order = 3;
  double train_discount = 0.75;
  TokenizerOptions train_tok;
  lm_train->add_option("--text", train_text, "Training sentences, one per line")->required();
  lm_train->add_option("--order", train_order, "N-gram order")->capture_default_str();
  lm_train->add_option("--discount", train_discount, "Absolute discount in (0, 1)")->capture_default_str();
  add_tokenizer_options(lm_train, train_tok);

  // lm-score
  auto* lm_score = app.add_subcommand("lm-score", "Score sentences with an ARPA model (log10)");
  std::string score_lm, score_text;
  TokenizerOptions score_tok;
  lm_score->add_option("--lm", score_lm, "ARPA model")->required();
  lm_score->add_option("--text", score_text, "Sentences, one per line (default: standard input)");
  add_tokenizer_options(lm_score, score_tok);

  // decode
  auto* decode = app.add_subcommand("decode", "Decode CTC emission matrices");
  DecodeOptions dec;
  add_decode_options(decode, dec, true);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "WER/CER with retokenization");
  std::string eval_pairs;
  DecodeOptions eval_dec;
  TokenizerOptions eval_tok;
  evaluate->add_option("--pairs", eval_pairs, "TSV or JSON lines with id, reference, hypothesis");
  add_decode_options(evaluate, eval_dec, false);
  add_tokenizer_options(evaluate, eval_tok);

  // split
  auto* split = app.add_subcommand("split", "Speaker-disjoint re-split on top of a legacy split");
  std::string v8, v7_train, v7_valid, v7_test, targets_arg, out_dir = ".";
  split->add_option("--v8", v8, "Current release metadata TSV")->required();
  split->add_option("--v7-train", v7_train, "Legacy train TSV")->required();
  split->add_option("--v7-valid", v7_valid, "Legacy valid TSV")->required();
  split->add_option("--v7-test", v7_test, "Legacy test TSV")->required();
  split->add_option("--targets", targets_arg, "train,valid,test duration fractions for new clips");
  split->add_option("--out-dir", out_dir, "Where train.tsv, valid.tsv, test.tsv are written")
      ->capture_default_str();

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  if (version) {
    out << "thaiasr " << kVersion << " (arpa " << kArpaFormatVersion << ", npy 1-3, manifest "
        << kManifestFormatVersion << ")\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return 1;
  }

  try {
    Output output(out_path, io.out);
    std::ostream& o = output.get();

    if (normalize->parsed()) {
      NormalizationConfig config;
      config.expand_maiyamok = !norm_no_maiyamok;
      if (!norm_ranges.empty()) config.allowed_ranges = parse_ranges(norm_ranges);
      config.validate();
      SubstitutionTable subs;
      if (!norm_subs.empty()) {
        std::ifstream s(norm_subs);
        if (!s) throw IoError("cannot open " + norm_subs);
        subs = load_substitutions(s);
      }
      auto tokenizer = make_tokenizer(norm_tok, false);
      if (!tokenizer) tokenizer = std::make_unique<DictionaryTokenizer>(WordDictionary{});
      if (norm_tsv) {
        CorpusLoad load;
        if (norm_in.empty() || norm_in == "-") {
          load = load_corpus_metadata(io.in);
        } else {
          load = load_corpus_file(norm_in);
        }
        auto result = normalize_corpus(load.utterances, config, *tokenizer, subs);
        for (const auto& w : result.warnings) err << "warning: " << w << '\n';
        err << "normalize: kept " << result.utterances.size() << ", dropped " << result.dropped_empty
            << " empty after cleaning\n";
        write_corpus_header(o, false);
        for (const auto& u : result.utterances) write_corpus_row(o, u);
      } else {
        for (const auto& line : read_lines(norm_in, io.in)) {
          auto r = normalize_transcript(apply_substitutions(line, subs), config, *tokenizer);
          for (const auto& w : r.warnings) err << "warning: " << w << '\n';
          o << r.text << '\n';
        }
      }
    } else if (tokenize_cmd->parsed()) {
      auto tokenizer = make_tokenizer(tok_tok, true);
      for (const auto& line : read_lines(tok_in, io.in)) {
        auto tokens = postprocess(line, *tokenizer);
        for (std::size_t i = 0; i < tokens.size(); ++i) o << (i ? tok_sep : "") << tokens[i];
        o << '\n';
      }
    } else if (lm_train->parsed()) {
      auto tokenizer = make_tokenizer(train_tok, false);
      auto sentences = to_sentences(read_lines(train_text, io.in), tokenizer.get());
      std::erase_if(sentences, [](const auto& s) { return s.empty(); });
      NGramModel model = estimate(count_ngrams(sentences, train_order), train_discount);
      err << "lm-train: " << sentences.size() << " sentences, order " << train_order;
      for (int n = 1; n <= model.order(); ++n) err << ", " << n << "-grams " << model.ngram_count(n);
      err << '\n';
      write_arpa(model, o);
    } else if (lm_score->parsed()) {
      NGramModel model = read_arpa_file(score_lm);
      auto tokenizer = make_tokenizer(score_tok, false);
      auto lines = read_lines(score_text, io.in);
      auto sentences = to_sentences(lines, tokenizer.get());
      double total = 0;
      char buf[64];
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const double s = model.score_sentence(sentences[i]);
        total += s;
        std::snprintf(buf, sizeof buf, "%.7f", s);
        o << buf << '\t' << lines[i] << '\n';
      }
      std::snprintf(buf, sizeof buf, "%.7f", total);
      err << "lm-score: " << lines.size() << " sentences, total log10 " << buf << '\n';
    } else if (decode->parsed()) {
      if (dec.emissions.empty() == dec.emissions_dir.empty())
        throw ConfigError("give exactly one of --emissions or --emissions-dir");
      if (dec.vocab.empty()) throw ConfigError("--vocab is required");
      if (!dec.emissions.empty()) {
        std::shared_ptr<const NGramModel> lm;
        if (!dec.lm.empty()) lm = std::make_shared<const NGramModel>(read_arpa_file(dec.lm));
        CtcDecoder decoder(load_vocab_file(dec.vocab), dec.params, lm);
        Emissions e = load_emissions_file(dec.emissions);
        if (dec.log_softmax) e.log_softmax();
        if (dec.greedy) {
          o << decoder.greedy(e) << '\n';
        } else {
          auto hyps = decoder.decode(e);
          if (dec.params.hypotheses_returned == 1) {
            o << (hyps.empty() ? std::string() : hyps.front().text) << '\n';
          } else {
            char buf[64];
            for (const auto& h : hyps) {
              std::snprintf(buf, sizeof buf, "%.9f", h.combined_score);
              o << buf << '\t' << h.text << '\n';
            }
          }
        }
      } else {
        DecodedCorpus decoded = decode_directory(dec, threads);
        if (!dec.references.empty()) {
          auto pairs = attach_references(decoded, load_references(dec.references));
          o << "id\treference\thypothesis\n";
          for (const auto& p : pairs)
            o << tsv_field(p.id) << '\t' << tsv_field(p.reference) << '\t' << tsv_field(p.hypothesis) << '\n';
        } else {
          o << "id\thypothesis\n";
          for (std::size_t i = 0; i < decoded.ids.size(); ++i)
            o << tsv_field(decoded.ids[i]) << '\t' << tsv_field(decoded.hypotheses[i]) << '\n';
        }
      }
    } else if (evaluate->parsed()) {
      auto tokenizer = make_tokenizer(eval_tok, true);
      std::vector<EvalPair> pairs;
      if (!eval_pairs.empty()) {
        if (!eval_dec.emissions_dir.empty())
          throw ConfigError("give either --pairs or --emissions-dir, not both");
        pairs = load_pairs_file(eval_pairs);
      } else {
        if (eval_dec.emissions_dir.empty() || eval_dec.references.empty())
          throw ConfigError("evaluate needs --pairs, or --emissions-dir with --references and --vocab");
        DecodedCorpus decoded = decode_directory(eval_dec, threads);
        pairs = attach_references(decoded, load_references(eval_dec.references));
      }
      EvalReport report = corpus_wer(pairs, *tokenizer, threads);
      for (const auto& id : report.excluded) err << "warning: empty reference, excluded: " << id << '\n';
      o << report.to_json().dump(2) << '\n';
      report.write_summary(err);
    } else if (split->parsed()) {
      SplitTargets targets = targets_arg.empty() ? commonvoice_delta_targets() : parse_targets(targets_arg);
      targets.seed = seed;
      targets.validate();
      auto current = load_corpus_file(v8);
      auto legacy_train = load_corpus_file(v7_train);
      auto legacy_valid = load_corpus_file(v7_valid);
      auto legacy_test = load_corpus_file(v7_test);
      const std::size_t missing = current.missing_duration + legacy_train.missing_duration +
                                  legacy_valid.missing_duration + legacy_test.missing_duration;
      if (missing) err << "split: " << missing << " rows without duration_ms (counted as 0)\n";
      ResplitResult r = resplit(current.utterances, legacy_train.utterances, legacy_valid.utterances,
                                legacy_test.utterances, targets);
      std::filesystem::create_directories(out_dir);
      for (SplitLabel l : kSplitLabels) {
        const auto path = (std::filesystem::path(out_dir) / (std::string(to_string(l)) + ".tsv")).string();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path);
        write_manifest(f, l, r.assignment, r.corpus);
        if (!f) throw IoError("error writing " + path);
      }
      o << r.report.to_json().dump(2) << '\n';
      if (!r.report.offending_speakers.empty()) {
        output.close();
        err << "split: speaker leakage detected\n";
        return 1;
      }
    }
    output.close();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const LeakageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

inline int run(int argc, const char* const* argv) { return run(argc, argv, std::cin, std::cout, std::cerr); }

}  // namespace thaiasr::cli

#endif  // THAIASR_CLI_HPP_
