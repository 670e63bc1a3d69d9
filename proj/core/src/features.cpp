#include "ipakit/features.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ipakit/bundled.hpp"
#include "ipakit/error.hpp"
#include "ipakit/unicode.hpp"
#include "text_util.hpp"

namespace ipakit::features {
namespace {

std::string canonical_symbol(const std::string& raw) {
  return unicode::encode_utf8(unicode::decompose_utf8(raw));
}

// Column numbers in errors are 1-based, counting the symbol column.
FeatureValue parse_value(const std::string& cell, std::size_t line, std::size_t column) {
  if (cell == "+") return 1;
  if (cell == "-") return -1;
  if (cell == "0") return 0;
  throw Error(ErrorCode::kUnknownFeatureValue,
              "value '" + cell + "' at line " + std::to_string(line) + ", column " + std::to_string(column), line);
}

}  // namespace

FeatureTable::FeatureTable(std::vector<std::string> feature_names) : names_(std::move(feature_names)) {
  if (names_.empty()) throw Error(ErrorCode::kMalformedRow, "feature table declares no features", 1);
}

void FeatureTable::add_base(const std::string& symbol, FeatureVector row) {
  if (row.size() != names_.size()) {
    throw Error(ErrorCode::kMalformedRow, "row for '" + symbol + "' has " + std::to_string(row.size()) +
                                              " values, expected " + std::to_string(names_.size()));
  }
  if (!rows_.emplace(symbol, std::move(row)).second) {
    throw Error(ErrorCode::kDuplicatePhone, "duplicate phone '" + symbol + "'");
  }
}

void FeatureTable::add_modifier(const std::string& diacritic, FeatureModifier modifier) {
  for (const auto& [index, value] : modifier) {
    if (index >= names_.size()) {
      throw Error(ErrorCode::kMalformedRow, "modifier for '" + diacritic + "' touches feature " +
                                                std::to_string(index) + " of " + std::to_string(names_.size()));
    }
  }
  if (!modifiers_.emplace(diacritic, std::move(modifier)).second) {
    throw Error(ErrorCode::kDuplicatePhone, "duplicate diacritic '" + diacritic + "'");
  }
}

std::size_t FeatureTable::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw Error(ErrorCode::kInvalidArgument, "no feature named '" + name + "'");
}

const FeatureVector* FeatureTable::base_row(const std::string& symbol) const {
  const auto it = rows_.find(symbol);
  return it == rows_.end() ? nullptr : &it->second;
}

const FeatureModifier* FeatureTable::modifier(const std::string& diacritic) const {
  const auto it = modifiers_.find(diacritic);
  return it == modifiers_.end() ? nullptr : &it->second;
}

FeatureTable load_feature_table(std::istream& table_in, std::istream* modifiers_in) {
  std::string line;
  std::size_t line_no = 0;

  while (detail::read_line(table_in, line)) {
    ++line_no;
    if (!line.empty()) break;
  }
  if (line.empty()) throw Error(ErrorCode::kMalformedRow, "feature table has no header", line_no);
  auto header = detail::split_tabs(line);
  if (header.size() < 2) throw Error(ErrorCode::kMalformedRow, "feature table header too short", line_no);
  FeatureTable table(std::vector<std::string>(header.begin() + 1, header.end()));
  const std::size_t f = table.feature_count();

  while (detail::read_line(table_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != f + 1 || cells[0].empty()) {
      throw Error(ErrorCode::kMalformedRow,
                  "line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(f + 1),
                  line_no);
    }
    FeatureVector row;
    row.values.reserve(f);
    for (std::size_t c = 1; c <= f; ++c) row.values.push_back(parse_value(cells[c], line_no, c + 1));
    const std::string symbol = canonical_symbol(cells[0]);
    if (table.base_row(symbol) != nullptr) {
      throw Error(ErrorCode::kDuplicatePhone, "duplicate phone '" + symbol + "' on line " + std::to_string(line_no),
                  line_no);
    }
    table.add_base(symbol, std::move(row));
  }

  if (modifiers_in == nullptr) return table;

  line_no = 0;
  while (detail::read_line(*modifiers_in, line)) {
    ++line_no;
    if (!line.empty()) break;
  }
  header = detail::split_tabs(line);
  if (header.size() != f + 2 || !std::equal(header.begin() + 2, header.end(), table.feature_names().begin())) {
    throw Error(ErrorCode::kMalformedRow, "modifier header does not match the feature table", line_no);
  }
  while (detail::read_line(*modifiers_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != f + 2 || cells[0] != "diacritic" || cells[1].empty()) {
      throw Error(ErrorCode::kMalformedRow, "modifier line " + std::to_string(line_no), line_no);
    }
    FeatureModifier modifier;
    for (std::size_t c = 2; c < cells.size(); ++c) {
      if (cells[c] == ".") continue;
      modifier.emplace_back(c - 2, parse_value(cells[c], line_no, c + 1));
    }
    const std::string symbol = canonical_symbol(cells[1]);
    if (table.modifier(symbol) != nullptr) {
      throw Error(ErrorCode::kDuplicatePhone,
                  "duplicate diacritic '" + symbol + "' on line " + std::to_string(line_no), line_no);
    }
    table.add_modifier(symbol, std::move(modifier));
  }
  return table;
}

FeatureTable load_feature_table(const std::filesystem::path& table, const std::filesystem::path& modifiers) {
  std::ifstream table_in(table);
  if (!table_in) throw Error(ErrorCode::kIoError, "cannot open " + table.string());
  if (modifiers.empty()) return load_feature_table(table_in);
  std::ifstream modifiers_in(modifiers);
  if (!modifiers_in) throw Error(ErrorCode::kIoError, "cannot open " + modifiers.string());
  return load_feature_table(table_in, &modifiers_in);
}

const FeatureTable& bundled_feature_table() {
  static const FeatureTable table = [] {
    std::istringstream rows{std::string(bundled::features_tsv())};
    std::istringstream modifiers{std::string(bundled::modifiers_tsv())};
    return load_feature_table(rows, &modifiers);
  }();
  return table;
}

FeatureVector phone_features(const ipa::Phone& phone, const FeatureTable& table) {
  const FeatureVector* row = table.base_row(phone.base);
  if (row == nullptr) throw Error(ErrorCode::kPhoneNotInTable, "no feature row for '" + phone.base + "'");
  FeatureVector out = *row;
  for (const auto& d : phone.diacritics) {
    const FeatureModifier* modifier = table.modifier(d);
    if (modifier == nullptr) throw Error(ErrorCode::kDiacriticNotInTable, "no modifier for '" + d + "'");
    for (const auto& [index, value] : *modifier) out.values[index] = value;
  }
  return out;
}

double vector_distance(const FeatureVector& a, const FeatureVector& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw Error(ErrorCode::kShapeMismatch, "feature vectors of length " + std::to_string(a.size()) + " and " +
                                               std::to_string(b.size()));
  }
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a.values[i] != b.values[i];
  return static_cast<double>(differing) / static_cast<double>(a.size());
}

double feature_distance(const ipa::Phone& a, const ipa::Phone& b, const FeatureTable& table) {
  return vector_distance(phone_features(a, table), phone_features(b, table));
}

const FeatureVector& FeatureCache::get(const ipa::Phone& phone) {
  const std::string key = phone.surface();
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, phone_features(phone, table_)).first;
  return it->second;
}

}  // namespace ipakit::features
