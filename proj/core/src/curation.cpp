#include "ipakit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include <json.hpp>

#include "ipakit/error.hpp"
#include "ipakit/metrics.hpp"

namespace ipakit::curation {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kTimeEps = 1e-9;

ordered_json parse_json_object(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "JSON record is not an object");
  return j;
}

template <class T>
T required(const ordered_json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) throw Error(ErrorCode::kInvalidArgument, std::string("missing field '") + field + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace

std::string to_json_line(const UtteranceRecord& record) {
  ordered_json j;
  j["id"] = record.id;
  j["duration_s"] = record.duration_s;
  j["ipa"] = record.ipa;
  if (record.language) j["language"] = *record.language;
  if (record.source) j["source"] = *record.source;
  return j.dump();
}

UtteranceRecord record_from_json(std::string_view line) {
  const auto j = parse_json_object(line);
  UtteranceRecord r;
  r.id = required<std::string>(j, "id");
  r.duration_s = required<double>(j, "duration_s");
  r.ipa = required<std::string>(j, "ipa");
  if (j.contains("language") && !j["language"].is_null()) r.language = required<std::string>(j, "language");
  if (j.contains("source") && !j["source"].is_null()) r.source = required<std::string>(j, "source");
  return r;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kUntokenizableIpa: return "UntokenizableIPA";
    case RejectReason::kTooShort: return "TooShort";
    case RejectReason::kTooLong: return "TooLong";
    case RejectReason::kTooFewTokens: return "TooFewTokens";
    case RejectReason::kTooManyTokens: return "TooManyTokens";
    case RejectReason::kLengthRatio: return "LengthRatio";
  }
  return "Unknown";
}

std::size_t output_frames(double duration_s, double frame_rate_hz) {
  if (!(duration_s > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(frame_rate_hz * duration_s + kTimeEps));
}

FilterDecision check_bounds(double duration_s, std::size_t token_count, const FilterConfig& config) {
  FilterDecision d{std::nullopt, token_count};
  if (!(duration_s >= config.min_dur_s - kTimeEps)) {
    d.reject = RejectReason::kTooShort;
  } else if (duration_s > config.max_dur_s + kTimeEps) {
    d.reject = RejectReason::kTooLong;
  } else if (token_count < config.min_tokens) {
    d.reject = RejectReason::kTooFewTokens;
  } else if (token_count > config.max_tokens) {
    d.reject = RejectReason::kTooManyTokens;
  } else {
    const double frames = static_cast<double>(output_frames(duration_s, config.frame_rate_hz));
    if (static_cast<double>(token_count) > config.max_len_ratio * frames + kTimeEps) {
      d.reject = RejectReason::kLengthRatio;
    }
  }
  return d;
}

FilterDecision filter_utterance(const UtteranceRecord& record, const ipa::Tokenizer& tokenizer,
                                const FilterConfig& config) {
  std::size_t tokens = 0;
  try {
    tokens = tokenizer.encode(record.ipa).size();
  } catch (const Error&) {
    return FilterDecision{RejectReason::kUntokenizableIpa, 0};
  }
  return check_bounds(record.duration_s, tokens, config);
}

// ---------------------------------------------------------------------------

SegmentEvent event_from_json(std::string_view line) {
  const auto j = parse_json_object(line);
  SegmentEvent e;
  const auto type = required<std::string>(j, "type");
  if (type == "phone") {
    e.kind = SegmentEvent::Kind::kPhone;
    e.symbol = required<std::string>(j, "symbol");
  } else if (type == "silence") {
    e.kind = SegmentEvent::Kind::kSilence;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "event type must be phone or silence, got '" + type + "'");
  }
  e.start_s = required<double>(j, "start_s");
  e.end_s = required<double>(j, "end_s");
  return e;
}

SegmentationResult segment_silence(std::span<const SegmentEvent> stream, const ipa::Parser& parser,
                                   const SegmentConfig& config, std::string_view stream_id) {
  SegmentationResult result;
  std::size_t candidate = 0;
  ipa::PhoneSequence current;

  const auto close_segment = [&] {
    const std::size_t n = current.phones.size();
    if (n == 0) return;  // back-to-back silences
    if (n < config.min_phones || n > config.max_phones) {
      result.dropped.push_back({candidate, n,
                                n < config.min_phones ? "fewer than " + std::to_string(config.min_phones) + " phones"
                                                      : "more than " + std::to_string(config.max_phones) + " phones"});
    } else {
      current.utterance_id = std::string(stream_id) + "_" + std::to_string(candidate);
      result.kept.push_back(std::move(current));
    }
    current = {};
    ++candidate;
  };

  double previous_end = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const SegmentEvent& e = stream[i];
    if (e.end_s < e.start_s || e.start_s < previous_end - kTimeEps) {
      throw Error(ErrorCode::kInvalidArgument, "event " + std::to_string(i) + " overlaps or runs backwards", i);
    }
    previous_end = e.end_s;
    if (e.kind == SegmentEvent::Kind::kSilence) {
      if (e.end_s - e.start_s >= config.min_silence_s - kTimeEps) close_segment();
      continue;
    }
    auto phones = parser.parse(e.symbol).phones;
    current.phones.insert(current.phones.end(), std::make_move_iterator(phones.begin()),
                          std::make_move_iterator(phones.end()));
  }
  close_segment();
  return result;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<double, double>> random_chunks(double total_s, std::uint64_t seed, const ChunkConfig& config) {
  if (!(total_s >= config.min_chunk_s)) {
    throw Error(ErrorCode::kTotalTooShort, "total duration " + std::to_string(total_s) + " s is below " +
                                               std::to_string(config.min_chunk_s) + " s");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> length(config.min_chunk_s, config.max_chunk_s);
  std::vector<std::pair<double, double>> chunks;
  double start = 0.0;
  while (total_s - start >= config.min_chunk_s) {
    const double end = std::min(start + length(rng), total_s);
    chunks.emplace_back(start, end);
    start = end;
  }
  return chunks;
}

// ---------------------------------------------------------------------------

PseudoLabelSet pseudo_labels_from_json(std::string_view line, std::size_t default_final_index) {
  const auto j = parse_json_object(line);
  PseudoLabelSet p;
  p.id = required<std::string>(j, "id");
  p.transcriptions = required<std::vector<std::string>>(j, "transcriptions");
  p.final_index = j.contains("final_index") ? required<std::size_t>(j, "final_index") : default_final_index;
  if (p.transcriptions.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "record '" + p.id + "' needs at least two transcriptions");
  }
  if (p.final_index >= p.transcriptions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "record '" + p.id + "' final_index out of range");
  }
  return p;
}

double pairwise_consistency(const PseudoLabelSet& labels, const ipa::Parser& parser,
                            const ipa::NormalizationTable& table, features::FeatureCache& cache) {
  const std::size_t k = labels.transcriptions.size();
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "pairwise consistency needs K >= 2");

  std::vector<ipa::PhoneSequence> seqs;
  seqs.reserve(k);
  for (std::size_t m = 0; m < k; ++m) {
    try {
      seqs.push_back(ipa::normalize(parser.parse(labels.transcriptions[m]), table));
      for (const auto& phone : seqs.back().phones) cache.get(phone);
    } catch (const Error& e) {
      throw Error(e.code(), "model " + std::to_string(m) + " of '" + labels.id + "': " + e.what(), m);
    }
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) sum += metrics::pfer(seqs[a], seqs[b], cache);
  }
  return sum / static_cast<double>(k * (k - 1) / 2);
}

double percentile_threshold(std::span<const double> scores, double percentile) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "no scores to threshold");
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "percentile must lie in [0, 100]");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::set<std::string> percentile_filter(const std::map<std::string, double>& scores, double percentile) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& [id, score] : scores) values.push_back(score);
  const double threshold = percentile_threshold(values, percentile);
  std::set<std::string> kept;
  for (const auto& [id, score] : scores) {
    if (score <= threshold) kept.insert(id);
  }
  return kept;
}

// ---------------------------------------------------------------------------

std::size_t ShardManifest::total() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.count;
  return n;
}

std::string ShardManifest::to_json() const {
  ordered_json j;
  j["shards"] = ordered_json::array();
  for (const auto& s : shards) j["shards"].push_back({{"path", s.path.string()}, {"count", s.count}});
  j["total"] = total();
  return j.dump(2);
}

ShardWriter::ShardWriter(std::filesystem::path out_dir, std::size_t shard_size)
    : out_dir_(std::move(out_dir)), shard_size_(shard_size) {
  if (shard_size_ == 0) throw Error(ErrorCode::kInvalidArgument, "shard size must be positive");
  std::error_code ec;
  std::filesystem::create_directories(out_dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + out_dir_.string() + ": " + ec.message());
}

void ShardWriter::open_next() {
  if (out_.is_open()) out_.close();
  char name[32];
  std::snprintf(name, sizeof name, "shard-%06zu.jsonl", manifest_.shards.size());
  const auto path = out_dir_ / name;
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  manifest_.shards.push_back({path, 0});
}

void ShardWriter::add(const UtteranceRecord& record) {
  if (manifest_.shards.empty() || manifest_.shards.back().count == shard_size_) open_next();
  out_ << to_json_line(record) << '\n';
  if (!out_) throw Error(ErrorCode::kIoError, "write failed: " + manifest_.shards.back().path.string());
  ++manifest_.shards.back().count;
}

ShardManifest ShardWriter::finish() {
  if (out_.is_open()) {
    out_.close();
    if (out_.fail()) throw Error(ErrorCode::kIoError, "close failed: " + manifest_.shards.back().path.string());
  }
  return std::move(manifest_);
}

ShardManifest write_shards(std::span<const UtteranceRecord> records, const std::filesystem::path& out_dir,
                           std::size_t shard_size) {
  ShardWriter writer(out_dir, shard_size);
  for (const auto& r : records) writer.add(r);
  return writer.finish();
}

std::vector<UtteranceRecord> read_shards(const ShardManifest& manifest) {
  std::vector<UtteranceRecord> records;
  for (const auto& shard : manifest.shards) {
    std::ifstream in(shard.path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + shard.path.string());
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) records.push_back(record_from_json(line));
    }
  }
  return records;
}

}  // namespace ipakit::curation
