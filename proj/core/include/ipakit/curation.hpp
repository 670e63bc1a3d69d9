#pragma once

// Dataset-side procedures: sample filtering, silence segmentation, random
// chunking, pseudo-label consistency filtering and sharding.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ipakit/features.hpp"
#include "ipakit/ipa.hpp"

namespace ipakit::curation {

struct UtteranceRecord {
  std::string id;
  double duration_s = 0.0;
  std::string ipa;
  std::optional<std::string> language;
  std::optional<std::string> source;

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

// JSONL line <-> record. Field order on output: id, duration_s, ipa,
// language, source (optional fields omitted when unset).
std::string to_json_line(const UtteranceRecord& record);
UtteranceRecord record_from_json(std::string_view line);

struct FilterConfig {
  double min_dur_s = 1.0;
  double max_dur_s = 24.0;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 512;
  double max_len_ratio = 0.9;
  double frame_rate_hz = 50.0;
};

enum class RejectReason { kUntokenizableIpa, kTooShort, kTooLong, kTooFewTokens, kTooManyTokens, kLengthRatio };

std::string_view to_string(RejectReason reason);

struct FilterDecision {
  std::optional<RejectReason> reject;  // nullopt means keep
  std::size_t token_count = 0;

  bool keep() const { return !reject.has_value(); }
};

/// Output frames for a clip: floor(frame_rate_hz * duration_s).
std::size_t output_frames(double duration_s, double frame_rate_hz);

/// The bounds check alone, for an already-known token count. Criteria are
/// tried in order: duration, token count, token/frame ratio.
FilterDecision check_bounds(double duration_s, std::size_t token_count, const FilterConfig& config);

/// Tokenize `record.ipa` and apply check_bounds; untokenizable text is a
/// rejection, not an error.
FilterDecision filter_utterance(const UtteranceRecord& record, const ipa::Tokenizer& tokenizer,
                                const FilterConfig& config = {});

// ---------------------------------------------------------------------------
// Silence segmentation

struct SegmentEvent {
  enum class Kind { kPhone, kSilence };
  Kind kind = Kind::kPhone;
  std::string symbol;  // phones only
  double start_s = 0.0;
  double end_s = 0.0;
};

SegmentEvent event_from_json(std::string_view line);

struct SegmentConfig {
  double min_silence_s = 0.200;
  std::size_t min_phones = 20;
  std::size_t max_phones = 50;
};

struct DroppedSegment {
  std::size_t index = 0;  // position among all candidate segments
  std::size_t phone_count = 0;
  std::string reason;
};

struct SegmentationResult {
  std::vector<ipa::PhoneSequence> kept;  // ids: <stream_id>_<candidate index>
  std::vector<DroppedSegment> dropped;
};

/// Split at every silence lasting at least min_silence_s and keep segments
/// whose phone count lies in [min_phones, max_phones]. Shorter silences are
/// ignored. Throws kInvalidArgument if events overlap or run backwards.
SegmentationResult segment_silence(std::span<const SegmentEvent> stream, const ipa::Parser& parser,
                                   const SegmentConfig& config = {}, std::string_view stream_id = "seg");

// ---------------------------------------------------------------------------
// Random chunking

struct ChunkConfig {
  double min_chunk_s = 1.0;
  double max_chunk_s = 20.0;
};

/// Consecutive chunks from 0 with lengths uniform in [min, max]. When the
/// remaining audio is shorter than the drawn length the chunk is cut at the
/// end; a residue shorter than min_chunk_s is discarded. Throws
/// kTotalTooShort when total_s < min_chunk_s.
std::vector<std::pair<double, double>> random_chunks(double total_s, std::uint64_t seed,
                                                     const ChunkConfig& config = {});

// ---------------------------------------------------------------------------
// Pseudo-label consistency filtering

struct PseudoLabelSet {
  std::string id;
  std::vector<std::string> transcriptions;  // one per model, K >= 2
  std::size_t final_index = 0;
};

PseudoLabelSet pseudo_labels_from_json(std::string_view line, std::size_t default_final_index = 0);

/// Mean PFER over all K(K-1)/2 unordered pairs of transcriptions. Parse or
/// feature errors are rethrown with position = offending model index.
double pairwise_consistency(const PseudoLabelSet& labels, const ipa::Parser& parser,
                            const ipa::NormalizationTable& table, features::FeatureCache& cache);

/// Nearest-rank percentile: the value at 1-based rank ceil(p / 100 * n) of the
/// ascending scores. Throws kEmptyInput.
double percentile_threshold(std::span<const double> scores, double percentile);

/// Ids whose score is <= the nearest-rank percentile threshold.
std::set<std::string> percentile_filter(const std::map<std::string, double>& scores, double percentile = 80.0);

// ---------------------------------------------------------------------------
// Sharding

inline constexpr std::size_t kDefaultShardSize = 20000;

struct ShardInfo {
  std::filesystem::path path;
  std::size_t count = 0;
};

struct ShardManifest {
  std::vector<ShardInfo> shards;
  std::size_t total() const;
  std::string to_json() const;
};

/// Streams records into out_dir/shard-NNNNNN.jsonl files of `shard_size`
/// records each, in arrival order. A shard file is only created once it has a
/// record.
class ShardWriter {
 public:
  ShardWriter(std::filesystem::path out_dir, std::size_t shard_size = kDefaultShardSize);

  void add(const UtteranceRecord& record);
  ShardManifest finish();

 private:
  void open_next();

  std::filesystem::path out_dir_;
  std::size_t shard_size_;
  std::ofstream out_;
  ShardManifest manifest_;
};

ShardManifest write_shards(std::span<const UtteranceRecord> records, const std::filesystem::path& out_dir,
                           std::size_t shard_size = kDefaultShardSize);

std::vector<UtteranceRecord> read_shards(const ShardManifest& manifest);

}  // namespace ipakit::curation
