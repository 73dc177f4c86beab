#include <gtest/gtest.h>

#include <sstream>

#include "bpe_oracle.hpp"
#include "nmt/error.hpp"
#include "nmt/rng.hpp"
#include "nmt/subword.hpp"

using namespace nmt;
using Tokens = std::vector<std::string>;

namespace
{

  std::string random_word(Rng& rng, const Tokens& alphabet, std::size_t max_len)
  {
    std::string w;
    const auto n = 1 + rng.uniform_index(max_len);
    for (std::size_t i = 0; i < n; ++i)
      w += alphabet[rng.uniform_index(alphabet.size())];
    return w;
  }

  std::map<std::string, std::uint64_t> random_counts(Rng& rng, std::size_t max_types)
  {
    static const Tokens alphabet = {"a", "b", "c", "d", "e", "ä"};
    std::map<std::string, std::uint64_t> counts;
    const auto types = 1 + rng.uniform_index(max_types);
    while (counts.size() < types)
      counts[random_word(rng, alphabet, 7)] = 1 + rng.uniform_index(20);
    return counts;
  }

}

TEST(LearnBpe, FirstMergeOfClassicCorpus)
{
  const auto table = learn_bpe({{"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}}, 1);
  ASSERT_EQ(table.size(), 1u);
  EXPECT_EQ(table.merges()[0], (SymbolPair{"e", "s"}));
}

TEST(LearnBpe, EdgeCases)
{
  EXPECT_EQ(learn_bpe({{"low", 5}}, 0).size(), 0u);
  // "aa" has two adjacent pairs once the end-of-word symbol is counted;
  // they tie and "</w>" sorts before "a".
  const auto aa = learn_bpe({{"aa", 1}}, 2);
  ASSERT_EQ(aa.size(), 2u);
  EXPECT_EQ(aa.merges()[0], (SymbolPair{"a", "</w>"}));
  EXPECT_EQ(aa.merges()[1], (SymbolPair{"a", "a</w>"}));
  // Stops once every word is a single symbol.
  EXPECT_EQ(learn_bpe({{"ab", 1}}, 10).size(), 2u);
}

TEST(LearnBpe, MatchesBruteForceOracle)
{
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial)
  {
    const auto counts = random_counts(rng, 50);
    const auto expected = oracle::brute_force_bpe(counts, 60);
    const auto table = learn_bpe(counts, 60);
    ASSERT_EQ(table.merges(), expected) << "trial " << trial;
  }
}

TEST(ApplyBpe, Examples)
{
  MergeTable table;
  table.add({"e", "s"});
  table.add({"es", "t"});
  const BpeModel bpe(table);
  EXPECT_EQ(bpe.apply(std::string("lowest")), (Tokens{"l@@", "o@@", "w@@", "est"}));
  EXPECT_EQ(bpe.apply(std::string("a")), Tokens{"a"});
  const BpeModel empty{MergeTable{}};
  EXPECT_EQ(empty.apply(std::string("low")), (Tokens{"l@@", "o@@", "w"}));
}

TEST(ApplyBpe, WordFinalMergesOnlyApplyAtTheEnd)
{
  MergeTable table;
  table.add({"s", "</w>"});
  const BpeModel bpe(table);
  EXPECT_EQ(bpe.apply(std::string("ss")), (Tokens{"s@@", "s"}));
  EXPECT_EQ(bpe.apply(std::string("sa")), (Tokens{"s@@", "a"}));
}

TEST(ApplyBpe, CustomMarker)
{
  const BpeModel bpe(MergeTable{}, "~");
  EXPECT_EQ(bpe.apply(std::string("ab")), (Tokens{"a~", "b"}));
  EXPECT_EQ(revert_bpe({"a~", "b"}, "~"), Tokens{"ab"});
}

TEST(RevertBpe, Examples)
{
  EXPECT_EQ(revert_bpe({"l@@", "o@@", "w@@", "est"}), Tokens{"lowest"});
  EXPECT_EQ(revert_bpe({"cat"}), Tokens{"cat"});
  EXPECT_EQ(revert_bpe({"a@@", "b", "c"}), (Tokens{"ab", "c"}));
  bool dangling = false;
  EXPECT_EQ(revert_bpe({"a", "b@@"}, "@@", &dangling), (Tokens{"a", "b"}));
  EXPECT_TRUE(dangling);
}

TEST(ApplyBpe, RoundTripAndMonotoneCoalescing)
{
  Rng rng(77);
  const auto counts = random_counts(rng, 50);
  const auto table = learn_bpe(counts, 80);
  static const Tokens alphabet = {"a", "b", "c", "d", "e", "ä", "z", "@"};
  std::vector<BpeModel> prefixes;
  for (std::size_t k = 0; k <= table.size(); k += 8)
    prefixes.emplace_back(MergeTable(std::vector<SymbolPair>(table.merges().begin(),
                                                             table.merges().begin() + static_cast<long>(k))));
  for (int i = 0; i < 10000; ++i)
  {
    const auto word = random_word(rng, alphabet, 10);
    std::size_t prev = SIZE_MAX;
    for (const auto& bpe : prefixes)
    {
      const auto pieces = bpe.apply(word);
      ASSERT_EQ(revert_bpe(pieces), Tokens{word});
      ASSERT_LE(pieces.size(), prev);
      prev = pieces.size();
    }
  }
}

TEST(MergeTable, DuplicateRejectedAndFileRoundTrip)
{
  MergeTable table;
  table.add({"a", "b"});
  EXPECT_THROW(table.add({"a", "b"}), ConfigError);
  table.add({"ab", "</w>"});
  EXPECT_EQ(table.rank("ab", "</w>"), 1);
  EXPECT_EQ(table.rank("x", "y"), -1);
  std::stringstream buf;
  table.save(buf);
  EXPECT_EQ(buf.str(), std::string(merge_table_header) + "\na b\nab </w>\n");
  const auto loaded = MergeTable::load(buf);
  EXPECT_EQ(loaded.merges(), table.merges());
}

TEST(Vocabulary, BuildAndTieBreak)
{
  const std::vector<Tokens> corpus = {{"b", "a", "c"}, {"c", "a"}};
  const auto v = build_vocab(corpus, 10);
  ASSERT_EQ(v.size(), 7u);
  EXPECT_EQ(v.symbol(0), "<unk>");
  EXPECT_EQ(v.symbol(3), "<pad>");
  EXPECT_EQ(v.symbol(4), "a");  // a and c tie at 2; a is smaller
  EXPECT_EQ(v.symbol(5), "c");
  EXPECT_EQ(v.symbol(6), "b");
  EXPECT_EQ(v.id("zzz"), Vocabulary::unk_id);
  EXPECT_THROW(build_vocab(corpus, 3), ConfigError);
  const auto capped = build_vocab(corpus, 5);
  EXPECT_EQ(capped.size(), 5u);
  EXPECT_EQ(capped.symbol(4), "a");
}

TEST(Vocabulary, IdsAreABijection)
{
  Rng rng(9);
  std::vector<Tokens> corpus(50);
  for (auto& s : corpus)
    for (int k = 0; k < 8; ++k)
      s.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(26))));
  const auto v = build_vocab(corpus, 20);
  for (std::size_t i = 0; i < v.size(); ++i)
    EXPECT_EQ(v.id(v.symbol(static_cast<std::int32_t>(i))), static_cast<std::int32_t>(i));
  EXPECT_THROW(v.symbol(static_cast<std::int32_t>(v.size())), InputError);
}
