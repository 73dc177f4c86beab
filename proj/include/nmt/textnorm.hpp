#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nmt
{

  // Version of the punctuation rule table used by tokenize(). Bump whenever
  // the rules change so stored corpora can be re-tokenized consistently.
  inline constexpr int tokenizer_rules_version = 1;

  // Appended to every non-final part of a split compound. U+2581 does not
  // survive tokenize() (it is treated as a symbol and isolated), so a token
  // ending in the marker can only come from split_compound().
  inline constexpr std::string_view join_marker = "\xE2\x96\x81+";

  // Splits a raw UTF-8 line into tokens: whitespace separation, then leading
  // and trailing punctuation detached one character at a time, and
  // always-isolated symbols (brackets, quotes, !, ?, ;) cut out of words.
  // Throws DecodeError on invalid UTF-8.
  std::vector<std::string> tokenize(std::string_view line);

  std::string join_tokens(const std::vector<std::string>& tokens);

  // Word -> count evidence for compound splitting.
  class FreqLexicon
  {
  public:
    void add(const std::string& word, std::uint64_t count = 1);
    std::uint64_t count(const std::string& word) const;
    std::size_t size() const
    {
      return _counts.size();
    }

    static FreqLexicon from_corpus(const std::vector<std::vector<std::string>>& sentences);

    // "word TAB count" lines, sorted by word.
    void save(const std::string& path) const;
    static FreqLexicon load(const std::string& path);

  private:
    std::unordered_map<std::string, std::uint64_t> _counts;
  };

  struct CompoundSplitOptions
  {
    std::size_t min_part_length = 4;  // in characters
    std::size_t max_parts = 2;
  };

  // Splits `token` into the part sequence with the highest geometric mean of
  // lexicon counts when that mean strictly exceeds the count of the whole
  // token. Non-final parts carry join_marker.
  std::vector<std::string> split_compound(const std::string& token,
                                          const FreqLexicon& lexicon,
                                          const CompoundSplitOptions& options = {});

  // Fuses every marker-bearing token with its successor. A marker on the
  // last token is stripped and reported through `dangling_marker`.
  std::vector<std::string> join_compounds(const std::vector<std::string>& tokens,
                                          bool* dangling_marker = nullptr);

  enum class CaseFactor : std::uint8_t
  {
    Lower = 0,        // L: all letters lowercase
    Capitalized = 1,  // C: first letter uppercase, the others lowercase
    Upper = 2,        // U: at least two letters, all uppercase
    Mixed = 3,        // M: anything else with letters
    None = 4,         // N: no cased letter
  };

  inline constexpr int num_case_factors = 5;

  char case_factor_tag(CaseFactor factor);
  CaseFactor case_factor_from_tag(char tag);

  CaseFactor classify_case(std::string_view token);

  std::string to_lower(std::string_view text);

  struct CaseEncoded
  {
    std::vector<std::string> tokens;
    std::vector<CaseFactor> factors;
    // Original surface of every Mixed token, empty string elsewhere.
    std::vector<std::string> mixed_surfaces;
  };

  CaseEncoded encode_case(const std::vector<std::string>& tokens);

  // Reapplies case factors. Mixed tokens are restored from `mixed_surfaces`
  // when given (same length as tokens), otherwise left lowercase.
  std::vector<std::string> decode_case(const std::vector<std::string>& tokens,
                                       const std::vector<CaseFactor>& factors,
                                       const std::vector<std::string>* mixed_surfaces = nullptr);

  // Sidecar serialization: one space-separated tag sequence per line.
  std::string format_case_factors(const std::vector<CaseFactor>& factors);
  std::vector<CaseFactor> parse_case_factors(std::string_view line);

}
