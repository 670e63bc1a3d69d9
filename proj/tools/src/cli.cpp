#include "ipakit/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipakit/ctc.hpp"
#include "ipakit/curation.hpp"
#include "ipakit/error.hpp"
#include "ipakit/features.hpp"
#include "ipakit/ipa.hpp"
#include "ipakit/metrics.hpp"
#include "ipakit/toy.hpp"
#include "ordered_map.hpp"

namespace ipakit::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kFeatureTableEnv = "IPAKIT_FEATURE_TABLE";
constexpr const char* kFeatureModifiersEnv = "IPAKIT_FEATURE_MODIFIERS";

// Raised for problems that are the caller's fault rather than the data's.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input = "-";
  std::string output = "-";
  std::string feature_table;
  std::string feature_modifiers;
  std::string vocab;
  std::uint64_t seed = kDefaultSeed;
  std::size_t jobs = 1;

  // eval-pfer / analyze-errors
  std::string hyp;
  std::string ref;
  bool normalize_scores = false;
  bool symbol_level = false;
  std::size_t top_k = 20;

  // normalize
  std::string emit_vocab;

  // filter
  curation::FilterConfig filter;
  std::string rejects;

  // segment
  curation::SegmentConfig segment;
  std::string stream_id = "seg";

  // chunk
  curation::ChunkConfig chunk;
  std::optional<double> total_s;

  // consistency-filter
  double percentile = 80.0;
  std::size_t final_index = 0;
  std::string scores;

  // shard
  std::size_t shard_size = curation::kDefaultShardSize;

  // ctc-demo
  ctc::TrainConfig train;
  ctc::SyntheticConfig synthetic;
  double lambda = 0.5;
};

// ---------------------------------------------------------------------------
// Streams

class Io {
 public:
  Io(const Options& opt, std::istream& in, std::ostream& out) : in_(&in), out_(&out) {
    if (opt.input != "-") {
      if (!fs::exists(opt.input)) throw UsageError("input file does not exist: " + opt.input);
      file_in_ = std::make_unique<std::ifstream>(opt.input, std::ios::binary);
      if (!*file_in_) throw UsageError("cannot open input: " + opt.input);
      in_ = file_in_.get();
    }
    if (opt.output != "-") {
      file_out_ = std::make_unique<std::ofstream>(opt.output, std::ios::binary);
      if (!*file_out_) throw UsageError("cannot open output: " + opt.output);
      out_ = file_out_.get();
    }
  }

  std::istream& in() { return *in_; }
  std::ostream& out() { return *out_; }

 private:
  std::istream* in_;
  std::ostream* out_;
  std::unique_ptr<std::ifstream> file_in_;
  std::unique_ptr<std::ofstream> file_out_;
};

std::ofstream open_side_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open output: " + path);
  return out;
}

std::ifstream open_side_input(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("input file does not exist: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open input: " + path);
  return in;
}

// ---------------------------------------------------------------------------
// Shared resources

std::string env_or(const std::string& flag, const char* env) {
  if (!flag.empty()) return flag;
  const char* value = std::getenv(env);
  return value ? value : "";
}

// The bundled table unless a path was given by flag or environment.
std::shared_ptr<const features::FeatureTable> feature_table(const Options& opt) {
  const std::string table = env_or(opt.feature_table, kFeatureTableEnv);
  if (table.empty()) return {std::shared_ptr<const features::FeatureTable>{}, &features::bundled_feature_table()};
  if (!fs::exists(table)) throw UsageError("feature table does not exist: " + table);
  const std::string modifiers = env_or(opt.feature_modifiers, kFeatureModifiersEnv);
  if (!modifiers.empty() && !fs::exists(modifiers)) throw UsageError("modifier table does not exist: " + modifiers);
  try {
    return std::make_shared<features::FeatureTable>(features::load_feature_table(table, modifiers));
  } catch (const Error& e) {
    throw DataError::about(table, e.what());
  }
}

std::shared_ptr<const ipa::Vocabulary> vocabulary(const Options& opt) {
  if (opt.vocab.empty()) return {std::shared_ptr<const ipa::Vocabulary>{}, &ipa::bundled_vocab()};
  auto in = open_side_input(opt.vocab);
  try {
    return std::make_shared<ipa::Vocabulary>(ipa::load_vocab(in, ipa::bundled_chart()));
  } catch (const Error& e) {
    throw DataError::about(opt.vocab, e.what());
  }
}

json parse_object(const Line& line) {
  try {
    auto j = json::parse(line.text);
    if (!j.is_object()) throw DataError("line " + std::to_string(line.number), "expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw DataError("line " + std::to_string(line.number), e.what());
  }
}

std::string record_id(const json& j, const Line& line) {
  if (j.contains("id") && j["id"].is_string()) return j["id"].get<std::string>();
  return "line " + std::to_string(line.number);
}

std::string string_field(const json& j, const char* key, const std::string& id) {
  if (!j.contains(key) || !j[key].is_string()) throw DataError(id, std::string("missing string field '") + key + "'");
  return j[key].get<std::string>();
}

// Runs `body` and converts toolkit errors into DataErrors tagged with `id`.
template <class Body>
auto for_record(const std::string& id, Body&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw DataError(id, e.what());
  } catch (const json::exception& e) {
    throw DataError(id, e.what());
  }
}

json phones_json(const ipa::PhoneSequence& seq) {
  json arr = json::array();
  for (const auto& p : seq.phones) arr.push_back(p.surface());
  return arr;
}

// ---------------------------------------------------------------------------
// normalize / tokenize

void cmd_normalize(const Options& opt, Io& io) {
  const auto& parser = ipa::bundled_parser();
  const auto& table = ipa::bundled_normalization_table();
  std::optional<ipa::VocabularyBuilder> builder;
  if (!opt.emit_vocab.empty()) builder.emplace(ipa::bundled_chart());
  struct Out {
    json record;
    ipa::PhoneSequence seq;
  };
  ordered_map<Out>(
      io.in(), opt.jobs,
      [&](const Line& line, std::size_t) {
        json j = parse_object(line);
        const std::string id = record_id(j, line);
        return for_record(id, [&] {
          auto seq = ipa::normalize(parser.parse(string_field(j, "ipa", id), id), table);
          j["ipa"] = seq.surface(" ");
          j["phones"] = phones_json(seq);
          return Out{std::move(j), std::move(seq)};
        });
      },
      [&](Out&& o) {
        io.out() << o.record.dump() << '\n';
        if (builder) builder->add(o.seq);
      });
  if (builder) {
    auto out = open_side_output(opt.emit_vocab);
    try {
      ipa::save_vocab(builder->build(), out);
    } catch (const Error& e) {
      throw DataError::about(opt.emit_vocab, e.what());
    }
  }
}

void cmd_tokenize(const Options& opt, Io& io) {
  const auto vocab = vocabulary(opt);
  const ipa::Tokenizer tokenizer(ipa::bundled_parser(), ipa::bundled_normalization_table(), *vocab);
  ordered_map<std::string>(
      io.in(), opt.jobs,
      [&](const Line& line, std::size_t) {
        const json j = parse_object(line);
        const std::string id = record_id(j, line);
        return for_record(id, [&] {
          json out;
          out["id"] = id;
          out["tokens"] = tokenizer.encode(string_field(j, "ipa", id));
          return out.dump();
        });
      },
      [&](std::string&& s) { io.out() << s << '\n'; });
}

// ---------------------------------------------------------------------------
// eval-pfer / analyze-errors

struct Pair {
  std::string id;
  std::string hyp;
  std::string ref;
};

struct Scored {
  std::string id;
  double pfer = 0.0;
  std::size_t ref_phones = 0;
  metrics::AlignedUtterance aligned;
};

// Either --input with {id, hyp, ref} records, or --hyp/--ref files of
// {id, ipa} records joined on id in reference order.
std::vector<std::string> paired_lines(const Options& opt) {
  auto load = [](const std::string& path) {
    auto in = open_side_input(path);
    std::vector<std::pair<std::string, std::string>> rows;
    std::string text;
    std::size_t n = 0;
    while (std::getline(in, text)) {
      ++n;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = parse_object({n, text});
      const std::string id = record_id(j, {n, text});
      rows.emplace_back(id, string_field(j, "ipa", id));
    }
    return rows;
  };
  const auto hyps = load(opt.hyp);
  const auto refs = load(opt.ref);
  std::map<std::string, std::string> by_id;
  for (const auto& [id, ipa] : hyps) {
    if (!by_id.emplace(id, ipa).second) throw DataError(id, "duplicate id in " + opt.hyp);
  }
  std::vector<std::string> lines;
  for (const auto& [id, ipa] : refs) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError(id, "no hypothesis for reference id");
    json j;
    j["id"] = id;
    j["hyp"] = it->second;
    j["ref"] = ipa;
    lines.push_back(j.dump());
    by_id.erase(it);
  }
  if (!by_id.empty()) throw DataError(by_id.begin()->first, "no reference for hypothesis id");
  return lines;
}

template <class Sink>
void score_pairs(const Options& opt, Io& io, const features::FeatureTable& table, Sink&& sink) {
  const auto& parser = ipa::bundled_parser();
  const auto& norm = ipa::bundled_normalization_table();
  const auto level = opt.symbol_level ? metrics::AlignmentLevel::kSymbol : metrics::AlignmentLevel::kPhone;
  std::vector<features::FeatureCache> caches(std::max<std::size_t>(opt.jobs, 1), features::FeatureCache(table));
  auto map = [&](const Line& line, std::size_t worker) {
    const json j = parse_object(line);
    const std::string id = record_id(j, line);
    return for_record(id, [&] {
      const auto hyp = ipa::normalize(parser.parse(string_field(j, "hyp", id), id), norm);
      const auto ref = ipa::normalize(parser.parse(string_field(j, "ref", id), id), norm);
      auto& cache = caches[worker];
      Scored s{id, metrics::pfer(hyp, ref, cache), ref.phones.size(), metrics::align_utterance(hyp, ref, cache, level)};
      return s;
    });
  };
  if (!opt.hyp.empty() || !opt.ref.empty()) {
    if (opt.hyp.empty() || opt.ref.empty()) throw UsageError("--hyp and --ref must be given together");
    std::stringstream joined;
    for (const auto& l : paired_lines(opt)) joined << l << '\n';
    ordered_map<Scored>(joined, opt.jobs, map, sink);
  } else {
    ordered_map<Scored>(io.in(), opt.jobs, map, sink);
  }
}

json summary_json(const metrics::ErrorSummary& summary, std::size_t k, bool symbol_level) {
  json out;
  out["level"] = symbol_level ? "symbol" : "phone";
  const auto& t = summary.type_totals;
  out["type_totals"] = {{"substitutions", t.substitutions}, {"insertions", t.insertions}, {"deletions", t.deletions}};
  const double total = static_cast<double>(t.total());
  auto share = [&](std::size_t n) { return total > 0 ? static_cast<double>(n) / total : 0.0; };
  out["type_proportions"] = {{"substitutions", share(t.substitutions)},
                             {"insertions", share(t.insertions)},
                             {"deletions", share(t.deletions)}};
  auto table = [&](const std::map<std::string, std::size_t>& counts) {
    json arr = json::array();
    for (const auto& [unit, n] : metrics::top_k(counts, k)) arr.push_back({{"unit", unit}, {"count", n}});
    return arr;
  };
  out["deletions"] = table(summary.deletions);
  out["insertions"] = table(summary.insertions);
  json subs = json::array();
  for (const auto& [pair, n] : metrics::top_k(summary.substitutions, k)) {
    subs.push_back({{"ref", pair.first}, {"hyp", pair.second}, {"count", n}});
  }
  out["substitutions"] = subs;
  return out;
}

void cmd_eval_pfer(const Options& opt, Io& io) {
  const auto table = feature_table(opt);
  metrics::ErrorSummary summary;
  std::vector<double> scores;
  std::vector<double> normalized;
  json per_utterance = json::array();
  score_pairs(opt, io, *table, [&](Scored&& s) {
    scores.push_back(s.pfer);
    json row{{"id", s.id}, {"pfer", s.pfer}};
    if (opt.normalize_scores) {
      const double n = s.ref_phones ? s.pfer / static_cast<double>(s.ref_phones) : 0.0;
      normalized.push_back(n);
      row["pfer_per_ref_phone"] = n;
    }
    per_utterance.push_back(std::move(row));
    summary.add(s.aligned);
  });
  if (scores.empty()) throw DataError::about("input", "no records");
  json report;
  report["utterances"] = scores.size();
  report["mean_pfer"] = metrics::aggregate(scores);
  if (opt.normalize_scores) report["mean_pfer_per_ref_phone"] = metrics::aggregate(normalized);
  report["scores"] = std::move(per_utterance);
  report["errors"] = summary_json(summary, opt.top_k, opt.symbol_level);
  io.out() << report.dump(2) << '\n';
}

void cmd_analyze_errors(const Options& opt, Io& io) {
  const auto table = feature_table(opt);
  metrics::ErrorSummary summary;
  std::size_t n = 0;
  score_pairs(opt, io, *table, [&](Scored&& s) {
    summary.add(s.aligned);
    ++n;
  });
  json report = summary_json(summary, opt.top_k, opt.symbol_level);
  report["utterances"] = n;
  io.out() << report.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// filter / segment / chunk

void cmd_filter(const Options& opt, Io& io) {
  const auto vocab = vocabulary(opt);
  const ipa::Tokenizer tokenizer(ipa::bundled_parser(), ipa::bundled_normalization_table(), *vocab);
  std::optional<std::ofstream> rejects;
  if (!opt.rejects.empty()) rejects.emplace(open_side_output(opt.rejects));
  struct Out {
    curation::UtteranceRecord record;
    curation::FilterDecision decision;
  };
  std::size_t kept = 0, dropped = 0;
  ordered_map<Out>(
      io.in(), opt.jobs,
      [&](const Line& line, std::size_t) {
        const json j = parse_object(line);
        const std::string id = record_id(j, line);
        return for_record(id, [&] {
          auto rec = curation::record_from_json(line.text);
          auto decision = curation::filter_utterance(rec, tokenizer, opt.filter);
          return Out{std::move(rec), decision};
        });
      },
      [&](Out&& o) {
        if (o.decision.keep()) {
          ++kept;
          io.out() << curation::to_json_line(o.record) << '\n';
        } else {
          ++dropped;
          if (rejects) {
            *rejects << json{{"id", o.record.id}, {"reason", curation::to_string(*o.decision.reject)}}.dump() << '\n';
          }
        }
      });
  std::cerr << "filter: kept " << kept << ", rejected " << dropped << '\n';
}

void cmd_segment(const Options& opt, Io& io) {
  std::vector<curation::SegmentEvent> events;
  std::string text;
  std::size_t n = 0;
  while (std::getline(io.in(), text)) {
    ++n;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(curation::event_from_json(text));
    } catch (const Error& e) {
      throw DataError::about(opt.stream_id + " event line " + std::to_string(n), e.what());
    }
  }
  curation::SegmentationResult result;
  try {
    result = curation::segment_silence(events, ipa::bundled_parser(), opt.segment, opt.stream_id);
  } catch (const Error& e) {
    const std::string where = e.position() ? " event " + std::to_string(*e.position()) : "";
    throw DataError::about(opt.stream_id + where, e.what());
  }
  for (const auto& seq : result.kept) {
    io.out() << json{{"id", seq.utterance_id}, {"ipa", seq.surface(" ")}, {"phones", phones_json(seq)}}.dump() << '\n';
  }
  for (const auto& d : result.dropped) {
    std::cerr << "segment: dropped candidate " << d.index << " (" << d.phone_count << " phones): " << d.reason << '\n';
  }
}

void cmd_chunk(const Options& opt, Io& io) {
  auto emit = [&](const std::string& id, double total, std::uint64_t seed) {
    const auto chunks = curation::random_chunks(total, seed, opt.chunk);
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      io.out() << json{{"id", id + "_" + std::to_string(k)},
                       {"source_id", id},
                       {"start_s", chunks[k].first},
                       {"end_s", chunks[k].second}}
                      .dump()
               << '\n';
    }
  };
  if (opt.total_s) {
    for_record("total", [&] { emit("chunk", *opt.total_s, opt.seed); });
    return;
  }
  // One record per recording: {id, duration_s}. Record k draws from its own
  // stream of the run seed, so output does not depend on batching.
  std::size_t index = 0;
  ordered_map<std::string>(
      io.in(), 1,
      [&](const Line& line, std::size_t) {
        const json j = parse_object(line);
        const std::string id = record_id(j, line);
        for_record(id, [&] {
          if (!j.contains("duration_s") || !j["duration_s"].is_number()) throw DataError(id, "missing duration_s");
          emit(id, j["duration_s"].get<double>(), ctc::derive_seed(opt.seed, index++));
        });
        return std::string();
      },
      [](std::string&&) {});
}

// ---------------------------------------------------------------------------
// consistency-filter / shard

void cmd_consistency_filter(const Options& opt, Io& io) {
  const auto table = feature_table(opt);
  const auto& parser = ipa::bundled_parser();
  const auto& norm = ipa::bundled_normalization_table();
  std::vector<features::FeatureCache> caches(std::max<std::size_t>(opt.jobs, 1), features::FeatureCache(*table));
  struct Scored {
    curation::PseudoLabelSet labels;
    double score;
  };
  std::vector<Scored> all;
  std::map<std::string, double> scores;
  ordered_map<Scored>(
      io.in(), opt.jobs,
      [&](const Line& line, std::size_t worker) {
        const json j = parse_object(line);
        const std::string id = record_id(j, line);
        return for_record(id, [&] {
          auto labels = curation::pseudo_labels_from_json(line.text, opt.final_index);
          try {
            const double s = curation::pairwise_consistency(labels, parser, norm, caches[worker]);
            return Scored{std::move(labels), s};
          } catch (const Error& e) {
            const std::string model = e.position() ? " (model " + std::to_string(*e.position()) + ")" : "";
            throw DataError(id + model, e.what());
          }
        });
      },
      [&](Scored&& s) {
        if (!scores.emplace(s.labels.id, s.score).second) throw DataError(s.labels.id, "duplicate id");
        all.push_back(std::move(s));
      });
  if (all.empty()) throw DataError::about("input", "no records");
  if (!(opt.percentile > 0.0 && opt.percentile <= 100.0)) throw UsageError("--percentile must be in (0, 100]");
  const auto kept = curation::percentile_filter(scores, opt.percentile);
  std::optional<std::ofstream> score_out;
  if (!opt.scores.empty()) score_out.emplace(open_side_output(opt.scores));
  for (const auto& s : all) {
    const bool keep = kept.contains(s.labels.id);
    if (score_out) *score_out << json{{"id", s.labels.id}, {"score", s.score}, {"kept", keep}}.dump() << '\n';
    if (!keep) continue;
    io.out() << json{{"id", s.labels.id},
                     {"ipa", s.labels.transcriptions[s.labels.final_index]},
                     {"score", s.score}}
                    .dump()
             << '\n';
  }
}

void cmd_shard(const Options& opt, std::istream& in, std::ostream& out) {
  if (opt.output == "-") throw UsageError("shard needs --output <directory>");
  if (opt.shard_size == 0) throw UsageError("--shard-size must be positive");
  std::unique_ptr<std::ifstream> file;
  std::istream* source = &in;
  if (opt.input != "-") {
    file = std::make_unique<std::ifstream>(open_side_input(opt.input));
    source = file.get();
  }
  std::optional<curation::ShardWriter> writer;
  try {
    writer.emplace(opt.output, opt.shard_size);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::set<std::string> seen;
  ordered_map<curation::UtteranceRecord>(
      *source, 1,
      [&](const Line& line, std::size_t) {
        const json j = parse_object(line);
        return for_record(record_id(j, line), [&] { return curation::record_from_json(line.text); });
      },
      [&](curation::UtteranceRecord&& r) {
        if (!seen.insert(r.id).second) throw DataError(r.id, "duplicate id in manifest");
        for_record(r.id, [&] { writer->add(r); });
      });
  out << writer->finish().to_json() << '\n';
}

// ---------------------------------------------------------------------------
// ctc-demo

void cmd_ctc_demo(const Options& opt, Io& io) {
  auto cfg = opt.train;
  cfg.loss.lambda = opt.lambda;
  const auto data = ctc::make_separable_dataset(opt.synthetic, ctc::derive_seed(opt.seed, 0));
  json steps = json::array();
  auto run = for_record("ctc-demo", [&] {
    return ctc::train_toy(data, cfg, ctc::derive_seed(opt.seed, 1), [&](const ctc::StepRecord& r) {
      steps.push_back({{"step", r.step},
                       {"loss", r.loss},
                       {"ctc_a", r.ctc_a},
                       {"ctc_b", r.ctc_b},
                       {"cr", r.cr},
                       {"decode_exact_match_rate", r.decode_exact_match_rate}});
    });
  });
  json log;
  log["seed"] = opt.seed;
  log["config"] = {{"utterances", opt.synthetic.utterances},
                   {"vocab_size", opt.synthetic.vocab_size},
                   {"noise_sigma", opt.synthetic.noise_sigma},
                   {"steps", cfg.steps},
                   {"learning_rate", cfg.learning_rate},
                   {"context", cfg.context},
                   {"alpha", cfg.loss.alpha},
                   {"cr_scale", cfg.loss.cr_scale},
                   {"mask_count", cfg.loss.mask_count},
                   {"mask_max_fraction", cfg.loss.mask_max_fraction}};
  log["steps"] = std::move(steps);
  log["final_decode_exact_match_rate"] = ctc::exact_match_rate(run.model, data);
  io.out() << log.dump(1) << '\n';
}

// ---------------------------------------------------------------------------

void add_io(CLI::App* cmd, Options& opt) {
  cmd->add_option("-i,--input", opt.input, "Input JSONL file ('-' for stdin)");
  cmd->add_option("-o,--output", opt.output, "Output file ('-' for stdout)");
}

void add_jobs(CLI::App* cmd, Options& opt) {
  cmd->add_option("-j,--jobs", opt.jobs, "Worker threads; output order is input order")->check(CLI::PositiveNumber);
}

void add_features(CLI::App* cmd, Options& opt) {
  cmd->add_option("--feature-table", opt.feature_table,
                  std::string("Feature table TSV (default: $") + kFeatureTableEnv + " or the bundled table)");
  cmd->add_option("--feature-modifiers", opt.feature_modifiers,
                  std::string("Diacritic modifier TSV (default: $") + kFeatureModifiersEnv + ")");
}

void add_pair_inputs(CLI::App* cmd, Options& opt) {
  add_io(cmd, opt);
  add_jobs(cmd, opt);
  add_features(cmd, opt);
  cmd->add_option("--hyp", opt.hyp, "Hypothesis JSONL {id, ipa}; use with --ref instead of --input");
  cmd->add_option("--ref", opt.ref, "Reference JSONL {id, ipa}");
  cmd->add_flag("--symbol-level", opt.symbol_level, "Error tables over tokens (bases and diacritics), sub cost 1");
  cmd->add_option("--top-k", opt.top_k, "Rows per error table")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"ipakit: IPA tokenization, PFER scoring, CR-CTC and data curation"};
  app.name("ipakit");
  app.require_subcommand(1, 1);

  auto* normalize = app.add_subcommand("normalize", "Parse and normalize {id, ipa} records");
  add_io(normalize, opt);
  add_jobs(normalize, opt);
  normalize->add_option("--emit-vocab", opt.emit_vocab, "Also build a vocabulary from the corpus and write it here");

  auto* tokenize = app.add_subcommand("tokenize", "Map {id, ipa} records to token ids");
  add_io(tokenize, opt);
  add_jobs(tokenize, opt);
  tokenize->add_option("--vocab", opt.vocab, "Vocabulary file (default: bundled)");

  auto* eval = app.add_subcommand("eval-pfer", "Score {id, hyp, ref} records with PFER");
  add_pair_inputs(eval, opt);
  eval->add_flag("--normalize", opt.normalize_scores, "Also report PFER divided by reference length");

  auto* analyze = app.add_subcommand("analyze-errors", "Deletion/insertion/substitution tables");
  add_pair_inputs(analyze, opt);

  auto* filter = app.add_subcommand("filter", "Drop manifest records outside the duration/token bounds");
  add_io(filter, opt);
  add_jobs(filter, opt);
  filter->add_option("--vocab", opt.vocab, "Vocabulary file (default: bundled)");
  filter->add_option("--rejects", opt.rejects, "Write {id, reason} for rejected records here");
  filter->add_option("--min-dur", opt.filter.min_dur_s)->capture_default_str();
  filter->add_option("--max-dur", opt.filter.max_dur_s)->capture_default_str();
  filter->add_option("--min-tokens", opt.filter.min_tokens)->capture_default_str();
  filter->add_option("--max-tokens", opt.filter.max_tokens)->capture_default_str();
  filter->add_option("--max-len-ratio", opt.filter.max_len_ratio)->capture_default_str();
  filter->add_option("--frame-rate", opt.filter.frame_rate_hz)->capture_default_str();

  auto* segment = app.add_subcommand("segment", "Cut a timed phone/silence event stream at long silences");
  add_io(segment, opt);
  segment->add_option("--stream-id", opt.stream_id, "Prefix for output ids")->capture_default_str();
  segment->add_option("--min-silence", opt.segment.min_silence_s)->capture_default_str();
  segment->add_option("--min-phones", opt.segment.min_phones)->capture_default_str();
  segment->add_option("--max-phones", opt.segment.max_phones)->capture_default_str();

  auto* chunk = app.add_subcommand("chunk", "Random 1-20 s chunking of {id, duration_s} records");
  add_io(chunk, opt);
  chunk->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
  chunk->add_option("--total", opt.total_s, "Chunk a single recording of this many seconds instead of --input");
  chunk->add_option("--min-chunk", opt.chunk.min_chunk_s)->capture_default_str();
  chunk->add_option("--max-chunk", opt.chunk.max_chunk_s)->capture_default_str();

  auto* consistency = app.add_subcommand("consistency-filter", "Keep pseudo-labels whose pairwise PFER is low");
  add_io(consistency, opt);
  add_jobs(consistency, opt);
  add_features(consistency, opt);
  consistency->add_option("--percentile", opt.percentile, "Keep scores at or below this percentile")
      ->capture_default_str();
  consistency->add_option("--final-index", opt.final_index, "Model whose transcription is kept, if not in the record")
      ->capture_default_str();
  consistency->add_option("--scores", opt.scores, "Write {id, score, kept} for every record here");

  auto* shard = app.add_subcommand("shard", "Split a manifest into numbered JSONL shards");
  add_io(shard, opt);
  shard->add_option("--shard-size", opt.shard_size, "Records per shard")->capture_default_str();

  auto* demo = app.add_subcommand("ctc-demo", "Train the toy CR-CTC model and write a JSON run log");
  add_io(demo, opt);
  demo->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
  demo->add_option("--steps", opt.train.steps)->capture_default_str();
  demo->add_option("--alpha", opt.train.loss.alpha, "CR weight")->capture_default_str();
  demo->add_option("--lambda", opt.lambda, "Pseudo-label weight (recorded only)")->capture_default_str();
  demo->add_option("--learning-rate", opt.train.learning_rate)->capture_default_str();
  demo->add_option("--context", opt.train.context, "Frames of context on each side")->capture_default_str();
  demo->add_option("--utterances", opt.synthetic.utterances)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return kUsageError;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "shard") {
      cmd_shard(opt, in, out);
      return kSuccess;
    }
    Io io(opt, in, out);
    if (name == "normalize") cmd_normalize(opt, io);
    else if (name == "tokenize") cmd_tokenize(opt, io);
    else if (name == "eval-pfer") cmd_eval_pfer(opt, io);
    else if (name == "analyze-errors") cmd_analyze_errors(opt, io);
    else if (name == "filter") cmd_filter(opt, io);
    else if (name == "segment") cmd_segment(opt, io);
    else if (name == "chunk") cmd_chunk(opt, io);
    else if (name == "consistency-filter") cmd_consistency_filter(opt, io);
    else if (name == "ctc-demo") cmd_ctc_demo(opt, io);
    io.out().flush();
    return kSuccess;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << (e.record_level() ? "record " : "") << e.subject() << ": " << e.what() << '\n';
    return kDataError;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cin, std::cout, std::cerr);
}

}  // namespace ipakit::cli
