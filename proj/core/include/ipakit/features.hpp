#pragma once

#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ipakit/ipa.hpp"

namespace ipakit::features {

// Ternary feature value: -1 (minus), 0 (unspecified), +1 (plus).
using FeatureValue = std::int8_t;

struct FeatureVector {
  std::vector<FeatureValue> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Partial overwrite applied by a diacritic.
using FeatureModifier = std::vector<std::pair<std::size_t, FeatureValue>>;

class FeatureTable {
 public:
  explicit FeatureTable(std::vector<std::string> feature_names);

  void add_base(const std::string& symbol, FeatureVector row);
  void add_modifier(const std::string& diacritic, FeatureModifier modifier);

  std::size_t feature_count() const { return names_.size(); }
  const std::vector<std::string>& feature_names() const { return names_; }
  std::size_t feature_index(const std::string& name) const;

  const FeatureVector* base_row(const std::string& symbol) const;
  const FeatureModifier* modifier(const std::string& diacritic) const;

  const std::map<std::string, FeatureVector>& base_rows() const { return rows_; }
  const std::map<std::string, FeatureModifier>& modifiers() const { return modifiers_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, FeatureVector> rows_;
  std::map<std::string, FeatureModifier> modifiers_;
};

// Base table: header `phone<TAB>name1..nameF`, rows `symbol<TAB>v1..vF` with
// values in {+, -, 0}. Modifier table: header `kind<TAB>symbol<TAB>names`, rows
// `diacritic<TAB>symbol<TAB>v1..vF` where "." leaves a feature untouched. The
// modifier header must list the same feature names in the same order.
FeatureTable load_feature_table(std::istream& table, std::istream* modifiers = nullptr);
FeatureTable load_feature_table(const std::filesystem::path& table,
                                const std::filesystem::path& modifiers = {});

const FeatureTable& bundled_feature_table();

/// Base row with each diacritic's modifier applied in order; later diacritics
/// overwrite earlier ones on shared indices.
FeatureVector phone_features(const ipa::Phone& phone, const FeatureTable& table);

/// Fraction of positions where the two vectors differ.
double vector_distance(const FeatureVector& a, const FeatureVector& b);

double feature_distance(const ipa::Phone& a, const ipa::Phone& b, const FeatureTable& table);

/// Memoizing resolver for hot loops (PFER over a corpus). Not thread-safe;
/// use one per thread.
class FeatureCache {
 public:
  explicit FeatureCache(const FeatureTable& table) : table_(table) {}

  const FeatureVector& get(const ipa::Phone& phone);
  const FeatureTable& table() const { return table_; }

 private:
  const FeatureTable& table_;
  std::unordered_map<std::string, FeatureVector> cache_;
};

}  // namespace ipakit::features
