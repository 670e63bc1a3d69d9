#pragma once

// Phone feature error rate (PFER), edit alignments and error statistics.
//
// PFER is the minimum edit cost between a hypothesis and a reference with
// unit insertion/deletion cost and substitution cost equal to the feature
// distance of the two phones. It is a distance, not a ratio: it is not divided
// by the reference length.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipakit/features.hpp"
#include "ipakit/ipa.hpp"

namespace ipakit::metrics {

inline constexpr double kIndelCost = 1.0;
inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

enum class EditKind { kMatch, kSubstitute, kInsert, kDelete };

struct EditOp {
  EditKind kind;
  std::size_t hyp = kNoIndex;  // unset for kDelete
  std::size_t ref = kNoIndex;  // unset for kInsert
  double cost = 0.0;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

struct Alignment {
  std::vector<EditOp> ops;
  double total_cost = 0.0;
};

/// Edit DP over abstract unit sequences. `sub(i, j)` returns {same unit?, cost}
/// for hypothesis unit i against reference unit j. Ties in the backtrace
/// prefer match/substitute, then delete, then insert.
template <class SubCost>
Alignment align_units(std::size_t hyp_len, std::size_t ref_len, SubCost&& sub);

template <class SubCost>
double edit_cost(std::size_t hyp_len, std::size_t ref_len, SubCost&& sub);

double pfer(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, const features::FeatureTable& table);
Alignment align(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, const features::FeatureTable& table);

// Same, resolving phones through a per-thread cache.
double pfer(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, features::FeatureCache& cache);
Alignment align(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, features::FeatureCache& cache);

// Phone level: units are phones, substitution cost is feature distance.
// Symbol level: units are tokens (each base and each diacritic), substitution
// cost is 1.
enum class AlignmentLevel { kPhone, kSymbol };

/// An alignment together with the unit labels its indices refer to.
struct AlignedUtterance {
  Alignment alignment;
  std::vector<std::string> hyp_units;
  std::vector<std::string> ref_units;
};

AlignedUtterance align_utterance(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref,
                                 features::FeatureCache& cache, AlignmentLevel level = AlignmentLevel::kPhone);

std::vector<std::string> symbol_units(const ipa::PhoneSequence& seq);

struct TypeTotals {
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;

  std::size_t total() const { return insertions + deletions + substitutions; }
  friend bool operator==(const TypeTotals&, const TypeTotals&) = default;
};

struct ErrorSummary {
  std::map<std::string, std::size_t> deletions;   // reference unit -> count
  std::map<std::string, std::size_t> insertions;  // hypothesis unit -> count
  std::map<std::pair<std::string, std::string>, std::size_t> substitutions;  // (ref, hyp) -> count
  TypeTotals type_totals;

  void add(const AlignedUtterance& utterance);
  // Count addition; commutative, so per-thread summaries merge in any order.
  void merge(const ErrorSummary& other);
};

ErrorSummary error_summary(std::span<const AlignedUtterance> utterances);

/// Entries sorted by count descending, then key ascending.
template <class Key>
std::vector<std::pair<Key, std::size_t>> top_k(const std::map<Key, std::size_t>& counts, std::size_t k);

/// Arithmetic mean; throws kEmptyInput on an empty list.
double aggregate(std::span<const double> scores);

// ---------------------------------------------------------------------------

template <class SubCost>
Alignment align_units(std::size_t hyp_len, std::size_t ref_len, SubCost&& sub) {
  const std::size_t cols = ref_len + 1;
  std::vector<double> cost((hyp_len + 1) * cols);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return cost[i * cols + j]; };

  for (std::size_t i = 0; i <= hyp_len; ++i) at(i, 0) = static_cast<double>(i) * kIndelCost;
  for (std::size_t j = 0; j <= ref_len; ++j) at(0, j) = static_cast<double>(j) * kIndelCost;
  for (std::size_t i = 1; i <= hyp_len; ++i) {
    for (std::size_t j = 1; j <= ref_len; ++j) {
      const auto [same, c] = sub(i - 1, j - 1);
      const double diag = at(i - 1, j - 1) + (same ? 0.0 : c);
      at(i, j) = std::min({diag, at(i, j - 1) + kIndelCost, at(i - 1, j) + kIndelCost});
    }
  }

  Alignment out;
  out.total_cost = at(hyp_len, ref_len);
  std::size_t i = hyp_len;
  std::size_t j = ref_len;
  constexpr double kTieEps = 1e-12;
  while (i > 0 || j > 0) {
    const double here = at(i, j);
    if (i > 0 && j > 0) {
      const auto [same, c] = sub(i - 1, j - 1);
      const double step = same ? 0.0 : c;
      if (std::abs(at(i - 1, j - 1) + step - here) <= kTieEps) {
        out.ops.push_back({same ? EditKind::kMatch : EditKind::kSubstitute, i - 1, j - 1, step});
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && std::abs(at(i, j - 1) + kIndelCost - here) <= kTieEps) {
      out.ops.push_back({EditKind::kDelete, kNoIndex, j - 1, kIndelCost});
      --j;
      continue;
    }
    out.ops.push_back({EditKind::kInsert, i - 1, kNoIndex, kIndelCost});
    --i;
  }
  std::reverse(out.ops.begin(), out.ops.end());
  return out;
}

template <class SubCost>
double edit_cost(std::size_t hyp_len, std::size_t ref_len, SubCost&& sub) {
  // Two rolling rows.
  std::vector<double> prev(ref_len + 1);
  std::vector<double> row(ref_len + 1);
  for (std::size_t j = 0; j <= ref_len; ++j) prev[j] = static_cast<double>(j) * kIndelCost;
  for (std::size_t i = 1; i <= hyp_len; ++i) {
    row[0] = static_cast<double>(i) * kIndelCost;
    for (std::size_t j = 1; j <= ref_len; ++j) {
      const auto [same, c] = sub(i - 1, j - 1);
      row[j] = std::min({prev[j - 1] + (same ? 0.0 : c), row[j - 1] + kIndelCost, prev[j] + kIndelCost});
    }
    std::swap(prev, row);
  }
  return prev[ref_len];
}

template <class Key>
std::vector<std::pair<Key, std::size_t>> top_k(const std::map<Key, std::size_t>& counts, std::size_t k) {
  std::vector<std::pair<Key, std::size_t>> entries(counts.begin(), counts.end());
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

}  // namespace ipakit::metrics
