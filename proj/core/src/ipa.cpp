#include "ipakit/ipa.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "ipakit/bundled.hpp"
#include "ipakit/error.hpp"
#include "ipakit/unicode.hpp"
#include "text_util.hpp"

namespace ipakit::ipa {
namespace {

constexpr char32_t kTieAbove = U'͡';
constexpr char32_t kTieBelow = U'͜';

bool is_tie(char32_t cp) { return cp == kTieAbove || cp == kTieBelow; }

char32_t single_code_point(const std::string& symbol, const char* what) {
  const std::u32string cps = unicode::decompose_utf8(symbol);
  if (cps.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " must be a single code point: '" + symbol + "'");
  }
  return cps.front();
}

}  // namespace

std::string Phone::surface() const {
  std::string out = base;
  for (const auto& d : diacritics) out += d;
  return out;
}

std::string PhoneSequence::surface(std::string_view separator) const {
  std::string out;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    if (i > 0) out += separator;
    out += phones[i].surface();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chart and normalization table

IpaChart load_ipa_chart(std::istream& in) {
  IpaChart chart;
  std::string line;
  std::size_t line_no = 0;
  while (detail::read_line(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != 2 || cells[1].empty()) {
      throw Error(ErrorCode::kMalformedRow, "chart line " + std::to_string(line_no), line_no);
    }
    std::string symbol = unicode::encode_utf8(unicode::decompose_utf8(cells[1]));
    if (cells[0] == "base") {
      chart.bases.push_back(std::move(symbol));
    } else if (cells[0] == "diacritic") {
      single_code_point(symbol, "diacritic");
      chart.diacritics.push_back(std::move(symbol));
    } else {
      throw Error(ErrorCode::kMalformedRow, "unknown kind '" + cells[0] + "'", line_no);
    }
  }
  std::sort(chart.bases.begin(), chart.bases.end());
  chart.bases.erase(std::unique(chart.bases.begin(), chart.bases.end()), chart.bases.end());
  return chart;
}

const IpaChart& bundled_chart() {
  static const IpaChart chart = [] {
    std::istringstream in{std::string(bundled::ipa_chart_tsv())};
    return load_ipa_chart(in);
  }();
  return chart;
}

NormalizationTable::NormalizationTable(std::map<char32_t, std::u32string> unifications,
                                       std::vector<std::string> diacritic_priority)
    : unifications_(std::move(unifications)), priority_(std::move(diacritic_priority)) {
  for (const auto& [key, canonical] : unifications_) {
    for (char32_t cp : canonical) {
      if (unifications_.contains(cp)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "canonical form of " + unicode::code_point_label(key) +
                        " contains deprecated symbol " + unicode::code_point_label(cp));
      }
    }
  }
  for (std::size_t i = 0; i < priority_.size(); ++i) {
    if (!rank_.emplace(priority_[i], i).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate diacritic in priority: " + priority_[i]);
    }
  }
}

std::u32string NormalizationTable::unify(std::u32string_view text) const {
  std::u32string out;
  out.reserve(text.size());
  for (char32_t cp : text) {
    const auto it = unifications_.find(cp);
    if (it == unifications_.end()) {
      out.push_back(cp);
    } else {
      out += it->second;
    }
  }
  return out;
}

std::size_t NormalizationTable::rank(const std::string& diacritic) const {
  const auto it = rank_.find(diacritic);
  return it == rank_.end() ? priority_.size() : it->second;
}

bool NormalizationTable::diacritic_less(const std::string& a, const std::string& b) const {
  const std::size_t ra = rank(a);
  const std::size_t rb = rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

NormalizationTable load_normalization_table(std::istream& in,
                                            std::vector<std::string> diacritic_priority) {
  std::map<char32_t, std::u32string> unifications;
  std::string line;
  std::size_t line_no = 0;
  while (detail::read_line(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    const auto cells = detail::split_tabs(line);
    if (cells.size() != 2) {
      throw Error(ErrorCode::kMalformedRow, "normalization line " + std::to_string(line_no), line_no);
    }
    const std::u32string key = unicode::decompose_utf8(cells[0]);
    std::u32string canonical = unicode::decompose_utf8(cells[1]);
    if (key.size() != 1 || canonical.empty()) {
      throw Error(ErrorCode::kMalformedRow,
                  "expected one deprecated code point and a canonical form on line " +
                      std::to_string(line_no),
                  line_no);
    }
    if (!unifications.emplace(key.front(), std::move(canonical)).second) {
      throw Error(ErrorCode::kMalformedRow, "duplicate key on line " + std::to_string(line_no), line_no);
    }
  }
  return NormalizationTable(std::move(unifications), std::move(diacritic_priority));
}

const NormalizationTable& bundled_normalization_table() {
  static const NormalizationTable table = [] {
    std::istringstream in{std::string(bundled::unification_tsv())};
    return load_normalization_table(in, bundled_chart().diacritics);
  }();
  return table;
}

// ---------------------------------------------------------------------------
// Parser

Parser::Parser(const IpaChart& chart, const NormalizationTable* table) {
  for (const auto& base : chart.bases) {
    std::u32string cps = unicode::decompose_utf8(base);
    if (cps.empty()) continue;
    max_base_length_ = std::max(max_base_length_, cps.size());
    base_starts_.insert(cps.front());
    bases_.insert(std::move(cps));
  }
  for (const auto& d : chart.diacritics) diacritics_.insert(single_code_point(d, "diacritic"));

  if (table == nullptr) return;
  // A deprecated symbol parses as whatever its canonical form starts as.
  for (const auto& [key, canonical] : table->unifications()) {
    const char32_t head = canonical.front();
    if (diacritics_.contains(head) && canonical.size() == 1) {
      diacritics_.insert(key);
    } else if (base_starts_.contains(head)) {
      bases_.insert(std::u32string(1, key));
      base_starts_.insert(key);
    }
  }
}

bool Parser::is_base_start(char32_t cp) const { return base_starts_.contains(cp); }

std::size_t Parser::longest_base(std::u32string_view text, std::size_t pos) const {
  if (pos >= text.size() || !base_starts_.contains(text[pos])) return 0;
  const std::size_t limit = std::min(max_base_length_, text.size() - pos);
  for (std::size_t len = limit; len > 0; --len) {
    if (bases_.contains(std::u32string(text.substr(pos, len)))) return len;
  }
  return 0;
}

PhoneSequence Parser::parse(std::string_view text, std::string utterance_id) const {
  const std::u32string cps = unicode::decompose_utf8(text);
  const std::u32string_view view(cps);
  PhoneSequence seq{std::move(utterance_id), {}};

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t cp = cps[i];
    if (unicode::is_whitespace(cp)) {
      ++i;
      continue;
    }
    std::size_t len = longest_base(view, i);
    if (len == 0) {
      if (diacritics_.contains(cp)) {
        throw Error(ErrorCode::kDanglingDiacritic,
                    "diacritic " + unicode::code_point_label(cp) + " at index " + std::to_string(i) +
                        " has no base",
                    i);
      }
      throw Error(ErrorCode::kUnknownSymbol,
                  "unknown symbol " + unicode::code_point_label(cp) + " at index " + std::to_string(i), i);
    }

    std::u32string base(view.substr(i, len));
    std::vector<std::string> diacritics;
    i += len;
    while (i < cps.size()) {
      if (diacritics_.contains(cps[i])) {
        diacritics.push_back(unicode::encode_utf8(cps[i]));
        ++i;
        continue;
      }
      // Tie bar joins the next base into one cluster.
      if (is_tie(cps[i]) && (len = longest_base(view, i + 1)) > 0) {
        base += view.substr(i, len + 1);
        i += len + 1;
        continue;
      }
      break;
    }
    seq.phones.push_back(Phone{unicode::encode_utf8(base), std::move(diacritics)});
  }
  return seq;
}

const Parser& bundled_parser() {
  static const Parser parser(bundled_chart(), &bundled_normalization_table());
  return parser;
}

// ---------------------------------------------------------------------------
// Normalization

Phone normalize(const Phone& phone, const NormalizationTable& table) {
  Phone out;
  out.base = unicode::encode_utf8(table.unify(unicode::decompose_utf8(phone.base)));
  out.diacritics.reserve(phone.diacritics.size());
  for (const auto& d : phone.diacritics) {
    out.diacritics.push_back(unicode::encode_utf8(table.unify(unicode::decompose_utf8(d))));
  }

  const auto less = [&table](const std::string& a, const std::string& b) {
    return table.diacritic_less(a, b);
  };
  if (out.diacritics.size() > kMaxDiacriticsKept) {
    const auto best = std::min_element(out.diacritics.begin(), out.diacritics.end(), less);
    out.diacritics = {*best};
  }
  std::sort(out.diacritics.begin(), out.diacritics.end(), less);
  out.diacritics.erase(std::unique(out.diacritics.begin(), out.diacritics.end()), out.diacritics.end());

  // Decomposition reorders adjacent combining marks by combining class, so a
  // priority order like nasal-over-voiceless would not survive detokenize ->
  // parse. Apply the same reordering here: within each run of combining
  // diacritics, stable by class.
  const auto ccc = [](const std::string& d) { return unicode::combining_class(unicode::decode_utf8(d).front()); };
  for (auto run = out.diacritics.begin(); run != out.diacritics.end();) {
    if (ccc(*run) == 0) {
      ++run;
      continue;
    }
    auto end = std::find_if(run, out.diacritics.end(), [&](const std::string& d) { return ccc(d) == 0; });
    std::stable_sort(run, end, [&](const std::string& a, const std::string& b) { return ccc(a) < ccc(b); });
    run = end;
  }
  return out;
}

PhoneSequence normalize(const PhoneSequence& seq, const NormalizationTable& table) {
  PhoneSequence out{seq.utterance_id, {}};
  out.phones.reserve(seq.phones.size());
  for (const auto& phone : seq.phones) out.phones.push_back(normalize(phone, table));
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> bases, std::vector<std::string> diacritics) {
  num_bases_ = bases.size();
  symbols_.reserve(1 + bases.size() + diacritics.size());
  for (auto& b : bases) symbols_.push_back(std::move(b));
  for (auto& d : diacritics) symbols_.push_back(std::move(d));
  for (std::size_t id = 1; id < symbols_.size(); ++id) {
    if (symbols_[id].empty()) {
      throw Error(ErrorCode::kInvalidArgument, "empty vocabulary symbol at id " + std::to_string(id), id);
    }
    if (!ids_.emplace(symbols_[id], static_cast<TokenId>(id)).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary symbol '" + symbols_[id] + "'", id);
    }
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view symbol) const {
  const auto it = ids_.find(std::string(symbol));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw Error(ErrorCode::kOutOfVocabulary, "token id " + std::to_string(id) + " out of range");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

bool Vocabulary::is_diacritic(TokenId id) const {
  return id > 0 && static_cast<std::size_t>(id) > num_bases_ && static_cast<std::size_t>(id) < symbols_.size();
}

std::span<const std::string> Vocabulary::bases() const {
  return std::span<const std::string>(symbols_).subspan(1, num_bases_);
}

std::span<const std::string> Vocabulary::diacritics() const {
  return std::span<const std::string>(symbols_).subspan(1 + num_bases_);
}

Vocabulary load_vocab(std::istream& in, const IpaChart& chart) {
  const std::set<std::string> chart_diacritics(chart.diacritics.begin(), chart.diacritics.end());
  std::vector<std::string> bases;
  std::vector<std::string> diacritics;
  std::string line;
  std::size_t line_no = 0;
  while (detail::read_line(in, line)) {
    ++line_no;
    if (line.empty()) {
      throw Error(ErrorCode::kMalformedRow, "empty vocabulary line " + std::to_string(line_no), line_no);
    }
    std::string symbol = unicode::encode_utf8(unicode::decompose_utf8(line));
    if (chart_diacritics.contains(symbol)) {
      diacritics.push_back(std::move(symbol));
    } else if (!diacritics.empty()) {
      throw Error(ErrorCode::kMalformedRow,
                  "base symbol '" + symbol + "' after diacritics on line " + std::to_string(line_no), line_no);
    } else {
      bases.push_back(std::move(symbol));
    }
  }
  return Vocabulary(std::move(bases), std::move(diacritics));
}

void save_vocab(const Vocabulary& vocab, std::ostream& out) {
  for (std::size_t id = 1; id < vocab.size(); ++id) out << vocab.symbol(static_cast<TokenId>(id)) << '\n';
}

const Vocabulary& bundled_vocab() {
  static const Vocabulary vocab = [] {
    const IpaChart& chart = bundled_chart();
    const std::size_t n = std::min(kDiacriticVocabSize, chart.diacritics.size());
    return Vocabulary(chart.bases,
                      std::vector<std::string>(chart.diacritics.begin(), chart.diacritics.begin() + n));
  }();
  return vocab;
}

std::vector<TokenId> tokenize(const PhoneSequence& seq, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(seq.phones.size() * 2);
  const auto lookup = [&vocab](const std::string& symbol) {
    const auto id = vocab.find(symbol);
    if (!id) throw Error(ErrorCode::kOutOfVocabulary, "symbol '" + symbol + "' has no token id");
    return *id;
  };
  for (const auto& phone : seq.phones) {
    ids.push_back(lookup(phone.base));
    for (const auto& d : phone.diacritics) ids.push_back(lookup(d));
  }
  return ids;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  bool have_base = false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id == kBlankId) {
      throw Error(ErrorCode::kBlankInText, "blank token at position " + std::to_string(i), i);
    }
    if (!vocab.contains(id)) {
      throw Error(ErrorCode::kOutOfVocabulary, "token id " + std::to_string(id) + " at position " + std::to_string(i),
                  i);
    }
    if (vocab.is_diacritic(id)) {
      if (!have_base) {
        throw Error(ErrorCode::kDanglingDiacritic,
                    "diacritic token at position " + std::to_string(i) + " has no base", i);
      }
    } else {
      have_base = true;
    }
    out += vocab.symbol(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary construction

void VocabularyBuilder::add(const PhoneSequence& seq) {
  ++sequences_;
  for (const auto& phone : seq.phones) {
    observed_bases_.insert(phone.base);
    for (const auto& d : phone.diacritics) ++diacritic_counts_[d];
  }
}

Vocabulary VocabularyBuilder::build() const {
  if (sequences_ == 0) throw Error(ErrorCode::kEmptyCorpus, "build_vocab needs at least one sequence");

  std::set<std::string> bases(chart_.bases.begin(), chart_.bases.end());
  bases.insert(observed_bases_.begin(), observed_bases_.end());

  // Frequency descending, then code point ascending. std::string compares
  // UTF-8 bytes as unsigned, which matches code point order.
  std::vector<std::pair<std::string, std::size_t>> ranked(diacritic_counts_.begin(), diacritic_counts_.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> diacritics;
  for (const auto& [symbol, count] : ranked) {
    if (diacritics.size() == kDiacriticVocabSize) break;
    diacritics.push_back(symbol);
  }
  // Short corpora: top up from the chart's default order.
  for (const auto& d : chart_.diacritics) {
    if (diacritics.size() == kDiacriticVocabSize) break;
    if (std::find(diacritics.begin(), diacritics.end(), d) == diacritics.end()) diacritics.push_back(d);
  }
  for (const auto& d : diacritics) bases.erase(d);

  return Vocabulary(std::vector<std::string>(bases.begin(), bases.end()), std::move(diacritics));
}

Vocabulary build_vocab(std::span<const PhoneSequence> corpus, const IpaChart& chart) {
  VocabularyBuilder builder(chart);
  for (const auto& seq : corpus) builder.add(seq);
  return builder.build();
}

// ---------------------------------------------------------------------------
// Inventory

std::string PhoneInventory::key(const Phone& phone) {
  std::vector<std::string> diacritics = phone.diacritics;
  std::sort(diacritics.begin(), diacritics.end());
  std::string k = phone.base;
  for (const auto& d : diacritics) k += d;
  return k;
}

void PhoneInventory::add(const Phone& phone) { keys_.insert(key(phone)); }

bool PhoneInventory::contains(const Phone& phone) const { return keys_.contains(key(phone)); }

PhoneInventory load_inventory(std::istream& in, const Parser& parser) {
  PhoneInventory inventory;
  std::string line;
  std::size_t line_no = 0;
  while (detail::read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    PhoneSequence seq;
    try {
      seq = parser.parse(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedRow,
                  "inventory line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (seq.phones.size() != 1) {
      throw Error(ErrorCode::kMalformedRow,
                  "inventory line " + std::to_string(line_no) + " is not a single phone", line_no);
    }
    inventory.add(seq.phones.front());
  }
  return inventory;
}

std::vector<std::pair<std::size_t, Phone>> validate(const PhoneSequence& seq, const PhoneInventory& inventory) {
  std::vector<std::pair<std::size_t, Phone>> unattested;
  for (std::size_t i = 0; i < seq.phones.size(); ++i) {
    if (!inventory.contains(seq.phones[i])) unattested.emplace_back(i, seq.phones[i]);
  }
  return unattested;
}

// ---------------------------------------------------------------------------

const Tokenizer& Tokenizer::bundled() {
  static const Tokenizer tokenizer(bundled_parser(), bundled_normalization_table(), bundled_vocab());
  return tokenizer;
}

PhoneSequence Tokenizer::canonical(std::string_view text, std::string utterance_id) const {
  return normalize(parser_.parse(text, std::move(utterance_id)), table_);
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const { return tokenize(canonical(text), vocab_); }

}  // namespace ipakit::ipa
