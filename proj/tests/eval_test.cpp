#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nmt/error.hpp"
#include "nmt/eval.hpp"
#include "nmt/rng.hpp"

using namespace nmt;
using Lines = std::vector<std::string>;

namespace
{

  std::string random_sentence(Rng& rng, std::size_t min_len)
  {
    static const Lines words = {"the", "cat", "sat", "on", "mat", "a", "dog", "ran", "The", "."};
    std::string s;
    const auto n = min_len + rng.uniform_index(8);
    for (std::size_t i = 0; i < n; ++i)
      s += (i ? " " : "") + words[rng.uniform_index(words.size())];
    return s;
  }

}

TEST(Bleu, IdentityIsExactlyHundred)
{
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial)
  {
    Lines corpus;
    for (int i = 0; i < 1 + trial % 7; ++i)
      corpus.push_back(random_sentence(rng, 4));
    EXPECT_EQ(bleu(corpus, corpus).bleu, 100.0);
  }
}

TEST(Bleu, HandCountedExample)
{
  // Independently: sacrebleu (tokenize=none, no smoothing) gives 57.89300674674101.
  const auto r = bleu({"the cat sat on mat"}, {"the cat sat on the mat"});
  EXPECT_NEAR(r.bleu, 57.893006746741, 1e-9);
  EXPECT_DOUBLE_EQ(r.precisions[0], 1.0);
  EXPECT_DOUBLE_EQ(r.precisions[1], 0.75);
  EXPECT_DOUBLE_EQ(r.precisions[2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.precisions[3], 0.5);
  EXPECT_DOUBLE_EQ(r.brevity_penalty, std::exp(-0.2));
  EXPECT_EQ(format_bleu(r), "BLEU = 57.89, 100.0/75.0/66.7/50.0 (BP=0.819, ratio=0.833, hyp_len=5, ref_len=6)");
}

TEST(Bleu, ShortPerfectHypothesisScoresZero)
{
  EXPECT_EQ(bleu({"a b c"}, {"a b c"}).bleu, 0.0);
}

TEST(Bleu, ClippingAndLowercase)
{
  const auto r = bleu({"the the the the"}, {"the cat"});
  EXPECT_DOUBLE_EQ(r.precisions[0], 0.25);
  EXPECT_LT(bleu({"The Cat sat on the mat"}, {"the cat sat on the mat"}).bleu, 100.0);
  EXPECT_EQ(bleu({"The Cat sat on the mat"}, {"the cat sat on the mat"}, true).bleu, 100.0);
}

TEST(Bleu, Errors)
{
  EXPECT_THROW(bleu({"a"}, {"a", "b"}), InputError);
  EXPECT_THROW(bleu({}, {}), InputError);
}

TEST(Bleu, CorpusInvariants)
{
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial)
  {
    Lines hyp, ref;
    for (int i = 0; i < 1 + trial % 9; ++i)
    {
      hyp.push_back(random_sentence(rng, 1));
      ref.push_back(random_sentence(rng, 1));
    }
    const double b = bleu(hyp, ref).bleu;
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 100.0);

    std::vector<std::size_t> order(hyp.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    Lines ph, pr;
    for (const auto i : order)
    {
      ph.push_back(hyp[i]);
      pr.push_back(ref[i]);
    }
    EXPECT_EQ(bleu(ph, pr).bleu, b);

    Lines hh = hyp, rr = ref;
    hh.insert(hh.end(), hyp.begin(), hyp.end());
    rr.insert(rr.end(), ref.begin(), ref.end());
    EXPECT_DOUBLE_EQ(bleu(hh, rr).bleu, b);
  }
}

TEST(Bleu, Average)
{
  BleuReport a, b;
  a.bleu = 20;
  b.bleu = 30;
  EXPECT_EQ(average_bleu({a}), 20.0);
  EXPECT_EQ(average_bleu({a, b}), 25.0);
  EXPECT_THROW(average_bleu({}), InputError);
}
