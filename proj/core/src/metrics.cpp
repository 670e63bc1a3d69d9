#include "ipakit/metrics.hpp"

#include <numeric>

#include "ipakit/error.hpp"

namespace ipakit::metrics {
namespace {

struct PhoneSubCost {
  std::span<const ipa::Phone> hyp;
  std::span<const ipa::Phone> ref;
  std::span<const features::FeatureVector* const> hyp_vectors;
  std::span<const features::FeatureVector* const> ref_vectors;

  std::pair<bool, double> operator()(std::size_t i, std::size_t j) const {
    if (hyp[i] == ref[j]) return {true, 0.0};
    return {false, features::vector_distance(*hyp_vectors[i], *ref_vectors[j])};
  }
};

std::vector<const features::FeatureVector*> resolve(const ipa::PhoneSequence& seq, features::FeatureCache& cache) {
  std::vector<const features::FeatureVector*> out;
  out.reserve(seq.phones.size());
  for (const auto& phone : seq.phones) out.push_back(&cache.get(phone));
  return out;
}

}  // namespace

double pfer(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, features::FeatureCache& cache) {
  const auto hv = resolve(hyp, cache);
  const auto rv = resolve(ref, cache);
  return edit_cost(hyp.phones.size(), ref.phones.size(), PhoneSubCost{hyp.phones, ref.phones, hv, rv});
}

Alignment align(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, features::FeatureCache& cache) {
  const auto hv = resolve(hyp, cache);
  const auto rv = resolve(ref, cache);
  return align_units(hyp.phones.size(), ref.phones.size(), PhoneSubCost{hyp.phones, ref.phones, hv, rv});
}

double pfer(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, const features::FeatureTable& table) {
  features::FeatureCache cache(table);
  return pfer(hyp, ref, cache);
}

Alignment align(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref, const features::FeatureTable& table) {
  features::FeatureCache cache(table);
  return align(hyp, ref, cache);
}

std::vector<std::string> symbol_units(const ipa::PhoneSequence& seq) {
  std::vector<std::string> units;
  for (const auto& phone : seq.phones) {
    units.push_back(phone.base);
    units.insert(units.end(), phone.diacritics.begin(), phone.diacritics.end());
  }
  return units;
}

AlignedUtterance align_utterance(const ipa::PhoneSequence& hyp, const ipa::PhoneSequence& ref,
                                 features::FeatureCache& cache, AlignmentLevel level) {
  AlignedUtterance out;
  if (level == AlignmentLevel::kPhone) {
    out.alignment = align(hyp, ref, cache);
    for (const auto& p : hyp.phones) out.hyp_units.push_back(p.surface());
    for (const auto& p : ref.phones) out.ref_units.push_back(p.surface());
    return out;
  }
  out.hyp_units = symbol_units(hyp);
  out.ref_units = symbol_units(ref);
  out.alignment = align_units(out.hyp_units.size(), out.ref_units.size(), [&](std::size_t i, std::size_t j) {
    const bool same = out.hyp_units[i] == out.ref_units[j];
    return std::pair<bool, double>{same, same ? 0.0 : 1.0};
  });
  return out;
}

void ErrorSummary::add(const AlignedUtterance& utterance) {
  for (const auto& op : utterance.alignment.ops) {
    switch (op.kind) {
      case EditKind::kMatch:
        break;
      case EditKind::kSubstitute:
        ++substitutions[{utterance.ref_units.at(op.ref), utterance.hyp_units.at(op.hyp)}];
        ++type_totals.substitutions;
        break;
      case EditKind::kInsert:
        ++insertions[utterance.hyp_units.at(op.hyp)];
        ++type_totals.insertions;
        break;
      case EditKind::kDelete:
        ++deletions[utterance.ref_units.at(op.ref)];
        ++type_totals.deletions;
        break;
    }
  }
}

void ErrorSummary::merge(const ErrorSummary& other) {
  for (const auto& [k, n] : other.deletions) deletions[k] += n;
  for (const auto& [k, n] : other.insertions) insertions[k] += n;
  for (const auto& [k, n] : other.substitutions) substitutions[k] += n;
  type_totals.insertions += other.type_totals.insertions;
  type_totals.deletions += other.type_totals.deletions;
  type_totals.substitutions += other.type_totals.substitutions;
}

ErrorSummary error_summary(std::span<const AlignedUtterance> utterances) {
  ErrorSummary summary;
  for (const auto& u : utterances) summary.add(u);
  return summary;
}

double aggregate(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "cannot average an empty score list");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

}  // namespace ipakit::metrics
