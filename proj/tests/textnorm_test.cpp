#include <gtest/gtest.h>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"
#include "nmt/textnorm.hpp"

using namespace nmt;
using Tokens = std::vector<std::string>;

namespace
{

  // Random line over letters of several scripts, digits, punctuation and
  // whitespace.
  std::string random_line(Rng& rng, std::size_t max_len = 40)
  {
    static const Tokens alphabet = {"a", "b", "e", "s", "t", "A", "B", "E", "S", "T", "ß", "ä", "Ä", "é", "É",
                                    "ω", "Ω", "ж", "Ж", "0", "7", ",", ".", "!", "?", "(", ")", "\"", "'",
                                    "-", ":", ";", "«", "»", "%", " ", " ", " ", "\t"};
    std::string line;
    const auto n = rng.uniform_index(max_len + 1);
    for (std::size_t i = 0; i < n; ++i)
      line += alphabet[rng.uniform_index(alphabet.size())];
    return line;
  }

}

TEST(Tokenize, PunctuationIsDetached)
{
  EXPECT_EQ(tokenize("Hello, world!"), (Tokens{"Hello", ",", "world", "!"}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("a b"), (Tokens{"a", "b"}));
  EXPECT_EQ(tokenize("  a \t b  "), (Tokens{"a", "b"}));
  EXPECT_EQ(tokenize("(test)"), (Tokens{"(", "test", ")"}));
  EXPECT_EQ(tokenize("\"Ja!\""), (Tokens{"\"", "Ja", "!", "\""}));
  EXPECT_EQ(tokenize("U.S."), (Tokens{"U.S", "."}));
  EXPECT_EQ(tokenize("3,5"), (Tokens{"3,5"}));
  EXPECT_EQ(tokenize("«Haus»"), (Tokens{"«", "Haus", "»"}));
}

TEST(Tokenize, InvalidUtf8ReportsOffset)
{
  try
  {
    tokenize("ab \xC3\x28");
    FAIL() << "expected DecodeError";
  }
  catch (const DecodeError& e)
  {
    EXPECT_EQ(e.offset(), 3u);
  }
  EXPECT_THROW(tokenize("\xC0\xAF"), DecodeError);  // overlong '/'
  EXPECT_THROW(tokenize("\xED\xA0\x80"), DecodeError);  // surrogate
}

TEST(Tokenize, IdempotentOnRandomLines)
{
  Rng rng(11);
  for (int i = 0; i < 2000; ++i)
  {
    const auto tokens = tokenize(random_line(rng));
    for (const auto& t : tokens)
    {
      EXPECT_FALSE(t.empty());
      EXPECT_EQ(t.find(' '), std::string::npos);
    }
    EXPECT_EQ(tokenize(join_tokens(tokens)), tokens);
  }
}

TEST(Tokenize, NeverEmitsJoinMarker)
{
  const auto tokens = tokenize("haus\xE2\x96\x81+ boot");
  for (const auto& t : tokens)
    EXPECT_FALSE(t.size() >= join_marker.size()
                 && t.compare(t.size() - join_marker.size(), join_marker.size(), join_marker) == 0)
        << t;
}

TEST(Compound, SplitsWhenGeometricMeanWins)
{
  FreqLexicon lex;
  lex.add("aktien", 10);
  lex.add("kurse", 12);
  lex.add("aktienkurse", 1);
  EXPECT_EQ(split_compound("aktienkurse", lex), (Tokens{"aktien\xE2\x96\x81+", "kurse"}));
  EXPECT_EQ(split_compound("kurse", lex), Tokens{"kurse"});
  EXPECT_EQ(split_compound("xyz", FreqLexicon{}), Tokens{"xyz"});
}

TEST(Compound, WholeWordWinsTies)
{
  FreqLexicon lex;
  lex.add("haus", 4);
  lex.add("boot", 4);
  lex.add("hausboot", 4);
  EXPECT_EQ(split_compound("hausboot", lex), Tokens{"hausboot"});
}

TEST(Compound, MinimumPartLength)
{
  FreqLexicon lex;
  lex.add("abc", 100);
  lex.add("defgh", 100);
  EXPECT_EQ(split_compound("abcdefgh", lex), Tokens{"abcdefgh"});
  CompoundSplitOptions loose;
  loose.min_part_length = 3;
  EXPECT_EQ(split_compound("abcdefgh", lex, loose).size(), 2u);
}

TEST(Compound, JoinIsInverse)
{
  const std::string m(join_marker);
  EXPECT_EQ(join_compounds({"aktien" + m, "kurse"}), Tokens{"aktienkurse"});
  EXPECT_EQ(join_compounds({"kurse"}), Tokens{"kurse"});
  EXPECT_EQ(join_compounds({"a" + m, "b" + m, "c"}), Tokens{"abc"});
  bool dangling = false;
  EXPECT_EQ(join_compounds({"x", "a" + m}, &dangling), (Tokens{"x", "a"}));
  EXPECT_TRUE(dangling);
}

TEST(Compound, SplitThenJoinRoundTrips)
{
  Rng rng(5);
  const Tokens parts = {"haus", "boot", "bahn", "hof", "kurse", "aktien", "zeit", "ung"};
  FreqLexicon lex;
  for (const auto& p : parts)
    lex.add(p, 1 + rng.uniform_index(50));
  for (int i = 0; i < 500; ++i)
  {
    Tokens sentence;
    const auto n = 1 + rng.uniform_index(6);
    for (std::size_t k = 0; k < n; ++k)
      sentence.push_back(parts[rng.uniform_index(parts.size())] + parts[rng.uniform_index(parts.size())]);
    Tokens split;
    for (const auto& t : sentence)
      for (auto& piece : split_compound(t, lex))
        split.push_back(piece);
    bool dangling = true;
    EXPECT_EQ(join_compounds(split, &dangling), sentence);
    EXPECT_FALSE(dangling);
  }
}

TEST(Case, Classification)
{
  EXPECT_EQ(classify_case("hello"), CaseFactor::Lower);
  EXPECT_EQ(classify_case("Hello"), CaseFactor::Capitalized);
  EXPECT_EQ(classify_case("USA"), CaseFactor::Upper);
  EXPECT_EQ(classify_case("iPhone"), CaseFactor::Mixed);
  EXPECT_EQ(classify_case("123"), CaseFactor::None);
  EXPECT_EQ(classify_case(","), CaseFactor::None);
  EXPECT_EQ(classify_case("A"), CaseFactor::Capitalized);
  EXPECT_EQ(classify_case("Ärger"), CaseFactor::Capitalized);
  EXPECT_EQ(classify_case("ΩΜΕΓΑ"), CaseFactor::Upper);
  EXPECT_EQ(classify_case("straße"), CaseFactor::Lower);
}

TEST(Case, EncodeExamples)
{
  auto e = encode_case({"Hello"});
  EXPECT_EQ(e.tokens, Tokens{"hello"});
  EXPECT_EQ(e.factors, std::vector<CaseFactor>{CaseFactor::Capitalized});
  e = encode_case({"USA"});
  EXPECT_EQ(e.tokens, Tokens{"usa"});
  EXPECT_EQ(e.factors, std::vector<CaseFactor>{CaseFactor::Upper});
  e = encode_case({"123"});
  EXPECT_EQ(e.tokens, Tokens{"123"});
  EXPECT_EQ(e.factors, std::vector<CaseFactor>{CaseFactor::None});
}

TEST(Case, DecodeExamples)
{
  EXPECT_EQ(decode_case({"hello"}, {CaseFactor::Capitalized}), Tokens{"Hello"});
  EXPECT_EQ(decode_case({"usa"}, {CaseFactor::Upper}), Tokens{"USA"});
  EXPECT_THROW(decode_case({"x"}, {CaseFactor::Lower, CaseFactor::Capitalized}), InputError);
  // Without the sidecar a mixed token stays lowercase.
  EXPECT_EQ(decode_case({"iphone"}, {CaseFactor::Mixed}), Tokens{"iphone"});
}

TEST(Case, RoundTripOnRandomLines)
{
  Rng rng(3);
  for (int i = 0; i < 2000; ++i)
  {
    const auto tokens = tokenize(random_line(rng));
    const auto enc = encode_case(tokens);
    ASSERT_EQ(enc.tokens.size(), enc.factors.size());
    for (const auto& t : enc.tokens)
      EXPECT_EQ(t, to_lower(t));
    EXPECT_EQ(decode_case(enc.tokens, enc.factors, &enc.mixed_surfaces), tokens);
    bool mixed = false;
    for (const auto f : enc.factors)
      mixed |= f == CaseFactor::Mixed;
    if (!mixed)
      EXPECT_EQ(decode_case(enc.tokens, enc.factors), tokens);
  }
}

TEST(Case, SidecarFormat)
{
  const std::vector<CaseFactor> f = {CaseFactor::Lower, CaseFactor::Capitalized, CaseFactor::Upper,
                                     CaseFactor::Mixed, CaseFactor::None};
  EXPECT_EQ(format_case_factors(f), "L C U M N");
  EXPECT_EQ(parse_case_factors("L C U M N"), f);
  EXPECT_EQ(parse_case_factors(""), std::vector<CaseFactor>{});
  EXPECT_THROW(parse_case_factors("L X"), InputError);
}
