#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nmt
{

  // End-of-word symbol appended as a separate symbol to every word while
  // learning and applying merges.
  inline constexpr std::string_view end_of_word = "</w>";
  inline constexpr std::string_view default_bpe_marker = "@@";

  using SymbolPair = std::pair<std::string, std::string>;

  // Ordered merge operations. Position in the table is the merge priority.
  class MergeTable
  {
  public:
    MergeTable() = default;
    explicit MergeTable(std::vector<SymbolPair> merges);

    // Throws ConfigError on a duplicate pair.
    void add(SymbolPair pair);

    const std::vector<SymbolPair>& merges() const
    {
      return _merges;
    }
    std::size_t size() const
    {
      return _merges.size();
    }
    // Rank of a pair, or -1 if absent.
    long rank(const std::string& left, const std::string& right) const;

    void save(std::ostream& out) const;
    static MergeTable load(std::istream& in);
    void save(const std::string& path) const;
    static MergeTable load(const std::string& path);

  private:
    struct PairHash
    {
      std::size_t operator()(const SymbolPair& p) const;
    };

    std::vector<SymbolPair> _merges;
    std::unordered_map<SymbolPair, long, PairHash> _ranks;
  };

  inline constexpr std::string_view merge_table_header = "#nmt-bpe-merges 1";

  // Learns up to `num_merges` merges. At each step the adjacent symbol pair
  // with the highest frequency (weighted by word counts) is merged; ties go
  // to the lexicographically smallest (left, right). Stops early when no
  // pair is left.
  MergeTable learn_bpe(const std::map<std::string, std::uint64_t>& word_counts,
                       std::size_t num_merges);

  // Word counts over a tokenized corpus.
  std::map<std::string, std::uint64_t>
  count_words(const std::vector<std::vector<std::string>>& sentences);

  class BpeModel
  {
  public:
    explicit BpeModel(MergeTable merges, std::string marker = std::string(default_bpe_marker));

    // Segments one word; every piece but the last carries the marker.
    std::vector<std::string> apply(const std::string& word) const;
    std::vector<std::string> apply(const std::vector<std::string>& words) const;

    const MergeTable& merges() const
    {
      return _merges;
    }
    const std::string& marker() const
    {
      return _marker;
    }

  private:
    MergeTable _merges;
    std::string _marker;
  };

  // Concatenates marker-bearing pieces with their successor. A trailing
  // marker on the last piece is stripped and flagged through
  // `dangling_marker`.
  std::vector<std::string> revert_bpe(const std::vector<std::string>& pieces,
                                      std::string_view marker = default_bpe_marker,
                                      bool* dangling_marker = nullptr);

  // Symbol <-> id map. Ids 0..3 are the reserved specials.
  class Vocabulary
  {
  public:
    static constexpr std::int32_t unk_id = 0;
    static constexpr std::int32_t bos_id = 1;
    static constexpr std::int32_t eos_id = 2;
    static constexpr std::int32_t pad_id = 3;
    static constexpr std::size_t num_specials = 4;

    static const std::vector<std::string>& specials();

    Vocabulary();
    explicit Vocabulary(const std::vector<std::string>& symbols);

    std::int32_t id(const std::string& symbol) const;  // unk_id if absent
    bool contains(const std::string& symbol) const;
    const std::string& symbol(std::int32_t id) const;
    std::size_t size() const
    {
      return _symbols.size();
    }
    const std::vector<std::string>& symbols() const
    {
      return _symbols;
    }

    std::vector<std::int32_t> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<std::int32_t>& ids) const;

    std::uint64_t fingerprint() const;

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

  private:
    std::vector<std::string> _symbols;
    std::unordered_map<std::string, std::int32_t> _ids;
  };

  // Keeps the `size - num_specials` most frequent symbols (ties: lexicographic)
  // after the specials. Throws ConfigError if size < num_specials.
  Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                         std::size_t size);

}
