#pragma once

// IPA parsing, normalization and tokenization.
//
// All symbols are stored as UTF-8 in canonical decomposition (NFD). A phone is
// one base symbol (a single letter, a multi-code-point letter such as c + U+0327,
// or a tie-bar cluster) followed by zero or more single-code-point diacritics.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ipakit::ipa {

using TokenId = std::int32_t;
inline constexpr TokenId kBlankId = 0;
inline constexpr std::size_t kDiacriticVocabSize = 15;
inline constexpr std::size_t kMaxDiacriticsKept = 3;

struct Phone {
  std::string base;
  std::vector<std::string> diacritics;

  std::string surface() const;

  friend bool operator==(const Phone&, const Phone&) = default;
  friend auto operator<=>(const Phone&, const Phone&) = default;
};

struct PhoneSequence {
  std::string utterance_id;
  std::vector<Phone> phones;

  // Phones concatenated with `separator` between them.
  std::string surface(std::string_view separator = "") const;

  friend bool operator==(const PhoneSequence&, const PhoneSequence&) = default;
};

/// The symbol chart the toolkit recognizes: base letters in code-point order
/// and diacritics in default priority order (most frequent first).
struct IpaChart {
  std::vector<std::string> bases;
  std::vector<std::string> diacritics;
};

IpaChart load_ipa_chart(std::istream& in);
const IpaChart& bundled_chart();

class PhoneInventory;

/// Deprecated-to-canonical symbol map plus diacritic priority.
///
/// Keys are single code points; a canonical form may span several code points
/// (ligature affricates unfold into tie-bar clusters). No key may occur inside
/// any canonical form, which makes unification idempotent.
class NormalizationTable {
 public:
  NormalizationTable() = default;
  NormalizationTable(std::map<char32_t, std::u32string> unifications,
                     std::vector<std::string> diacritic_priority);

  const std::map<char32_t, std::u32string>& unifications() const { return unifications_; }
  const std::vector<std::string>& diacritic_priority() const { return priority_; }

  std::u32string unify(std::u32string_view text) const;

  // Rank in the priority order; unknown diacritics rank after all known ones.
  std::size_t rank(const std::string& diacritic) const;
  bool diacritic_less(const std::string& a, const std::string& b) const;

  void set_inventory(std::shared_ptr<const PhoneInventory> inventory) { inventory_ = std::move(inventory); }
  const PhoneInventory* inventory() const { return inventory_.get(); }

 private:
  std::map<char32_t, std::u32string> unifications_;
  std::vector<std::string> priority_;
  std::unordered_map<std::string, std::size_t> rank_;
  std::shared_ptr<const PhoneInventory> inventory_;
};

// Two-column `deprecated<TAB>canonical` file. Blank lines and lines starting
// with "#" are skipped.
NormalizationTable load_normalization_table(std::istream& in,
                                            std::vector<std::string> diacritic_priority);
const NormalizationTable& bundled_normalization_table();

/// Greedy left-to-right segmenter over a chart plus the deprecated symbols of a
/// normalization table (so un-normalized input still parses).
class Parser {
 public:
  explicit Parser(const IpaChart& chart, const NormalizationTable* table = nullptr);

  // Throws kInvalidUtf8, kUnknownSymbol or kDanglingDiacritic. Positions are
  // code point indices into the decomposed text.
  PhoneSequence parse(std::string_view text, std::string utterance_id = {}) const;

  bool is_base_start(char32_t cp) const;
  bool is_diacritic(char32_t cp) const { return diacritics_.contains(cp); }

 private:
  std::size_t longest_base(std::u32string_view text, std::size_t pos) const;

  std::set<std::u32string> bases_;
  std::set<char32_t> base_starts_;
  std::set<char32_t> diacritics_;
  std::size_t max_base_length_ = 1;
};

const Parser& bundled_parser();

/// Unify deprecated code points, reduce phones with more than three diacritics
/// to their single highest-priority diacritic, drop duplicates and order the
/// rest by priority. Adjacent combining marks are then put in canonical
/// (combining class) order so the result is stable under decomposition.
PhoneSequence normalize(const PhoneSequence& seq, const NormalizationTable& table);
Phone normalize(const Phone& phone, const NormalizationTable& table);

class Vocabulary {
 public:
  Vocabulary() = default;
  // Ids: blank = 0, then bases in the given order, then diacritics in rank order.
  Vocabulary(std::vector<std::string> bases, std::vector<std::string> diacritics);

  std::optional<TokenId> find(std::string_view symbol) const;
  const std::string& symbol(TokenId id) const;
  bool is_diacritic(TokenId id) const;
  bool contains(TokenId id) const { return id > kBlankId && static_cast<std::size_t>(id) < symbols_.size(); }

  // Including the blank.
  std::size_t size() const { return symbols_.size(); }
  std::span<const std::string> bases() const;
  std::span<const std::string> diacritics() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.symbols_ == b.symbols_ && a.num_bases_ == b.num_bases_;
  }

 private:
  std::vector<std::string> symbols_{std::string{}};
  std::size_t num_bases_ = 0;
  std::unordered_map<std::string, TokenId> ids_;
};

// One symbol per line; line n (1-based) holds token id n, id 0 is the implicit
// blank. Symbols listed in the chart's diacritic set are diacritic tokens and
// must follow every base.
Vocabulary load_vocab(std::istream& in, const IpaChart& chart);
void save_vocab(const Vocabulary& vocab, std::ostream& out);

// Chart bases plus the first fifteen chart diacritics.
const Vocabulary& bundled_vocab();

std::vector<TokenId> tokenize(const PhoneSequence& seq, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

/// Streaming form of build_vocab.
class VocabularyBuilder {
 public:
  explicit VocabularyBuilder(const IpaChart& chart) : chart_(chart) {}

  void add(const PhoneSequence& seq);
  // Throws kEmptyCorpus if nothing was added.
  Vocabulary build() const;

 private:
  const IpaChart& chart_;
  std::set<std::string> observed_bases_;
  std::map<std::string, std::size_t> diacritic_counts_;
  std::size_t sequences_ = 0;
};

Vocabulary build_vocab(std::span<const PhoneSequence> corpus, const IpaChart& chart);

/// Attested phones, compared on base plus the set of diacritics (order-free).
class PhoneInventory {
 public:
  void add(const Phone& phone);
  bool contains(const Phone& phone) const;
  std::size_t size() const { return keys_.size(); }

 private:
  static std::string key(const Phone& phone);
  std::set<std::string> keys_;
};

// One phone per line, written as base + diacritics.
PhoneInventory load_inventory(std::istream& in, const Parser& parser);

std::vector<std::pair<std::size_t, Phone>> validate(const PhoneSequence& seq,
                                                    const PhoneInventory& inventory);

/// parse -> normalize -> tokenize in one object.
class Tokenizer {
 public:
  Tokenizer(const Parser& parser, const NormalizationTable& table, const Vocabulary& vocab)
      : parser_(parser), table_(table), vocab_(vocab) {}

  static const Tokenizer& bundled();

  PhoneSequence canonical(std::string_view text, std::string utterance_id = {}) const;
  std::vector<TokenId> encode(std::string_view text) const;

  const Parser& parser() const { return parser_; }
  const NormalizationTable& table() const { return table_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  const Parser& parser_;
  const NormalizationTable& table_;
  const Vocabulary& vocab_;
};

}  // namespace ipakit::ipa
