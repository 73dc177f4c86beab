#include <gtest/gtest.h>

#include <cmath>

#include "nmt/error.hpp"
#include "nmt/model.hpp"
#include "nmt/rng.hpp"
#include "scalar_oracle.hpp"
#include "test_util.hpp"

using namespace nmt;
using nmt::test::random_pair;
using nmt::test::random_sequence;
using nmt::test::tiny_config;

namespace
{

  oracle::Vec to_vec(const Vector& v)
  {
    return oracle::Vec(v.data(), v.data() + v.size());
  }

  LstmLayerParams random_layer(std::size_t in, std::size_t hidden, std::uint64_t seed)
  {
    Rng rng(seed);
    LstmLayerParams p;
    p.weight = Matrix(4 * hidden, in + hidden);
    p.bias = Matrix(4 * hidden, 1);
    for (Eigen::Index i = 0; i < p.weight.size(); ++i)
      p.weight.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < p.bias.size(); ++i)
      p.bias.data()[i] = rng.uniform(-1, 1);
    return p;
  }

}

TEST(LstmStepTest, ZeroEverythingGivesZeroState)
{
  LstmLayerParams p{Matrix::Zero(12, 6), Matrix::Zero(12, 1)};
  const auto s = lstm_step(p, Vector::Zero(3), Vector::Zero(3), Vector::Zero(3));
  EXPECT_EQ(s.h, Vector::Zero(3));
  EXPECT_EQ(s.c, Vector::Zero(3));
}

TEST(LstmStepTest, ForgetGateInertOnZeroCell)
{
  auto p = random_layer(3, 3, 7);
  const Vector x = Vector::Constant(3, 0.3);
  const Vector h = Vector::Constant(3, -0.2);
  const auto a = lstm_step(p, x, h, Vector::Zero(3));
  p.bias.middleRows(3, 3).setConstant(5.0);
  const auto b = lstm_step(p, x, h, Vector::Zero(3));
  EXPECT_EQ(a.h, b.h);
  EXPECT_EQ(a.c, b.c);
}

TEST(LstmStepTest, MatchesScalarOracle)
{
  const auto p = random_layer(3, 3, 11);
  Rng rng(3);
  Vector x(3), h(3), c(3);
  for (int i = 0; i < 3; ++i)
  {
    x(i) = rng.uniform(-1, 1);
    h(i) = rng.uniform(-1, 1);
    c(i) = rng.uniform(-1, 1);
  }
  const auto s = lstm_step(p, x, h, c);
  const auto o = oracle::lstm(p, to_vec(x), to_vec(h), to_vec(c));
  for (int i = 0; i < 3; ++i)
  {
    EXPECT_NEAR(s.h(i), o.h[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_NEAR(s.c(i), o.c[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(LstmStepTest, DimensionMismatchThrows)
{
  LstmLayerParams p{Matrix::Zero(12, 6), Matrix::Zero(12, 1)};
  EXPECT_THROW(lstm_step(p, Vector::Zero(4), Vector::Zero(3), Vector::Zero(3)), InputError);
}

TEST(AttentionTest, SingleSourcePositionGetsAllWeight)
{
  Matrix states(2, 1);
  states << 3.0, -7.0;
  const auto r = attention(Vector::Constant(2, 0.5), states, Matrix::Identity(2, 2));
  ASSERT_EQ(r.alignment.size(), 1);
  EXPECT_EQ(r.alignment(0), 1.0);
  EXPECT_EQ(r.context, states.col(0));
}

TEST(AttentionTest, EqualScoresGiveUniformWeights)
{
  Matrix states = Matrix::Random(4, 5);
  const auto r = attention(Vector::Constant(4, 0.5), states, Matrix::Zero(4, 4));
  for (int s = 0; s < 5; ++s)
    EXPECT_EQ(r.alignment(s), 1.0 / 5.0);
}

TEST(AttentionTest, HandComputedExample)
{
  Vector h(2);
  h << 1, 0;
  Matrix states(2, 2);
  states << 1, 0,
            0, 1;
  const auto r = attention(h, states, Matrix::Identity(2, 2));
  // softmax of logits (1, 0)
  const double a0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(r.alignment(0), a0, 1e-15);
  EXPECT_NEAR(r.alignment(1), 1.0 - a0, 1e-15);
  EXPECT_NEAR(r.alignment(0), 0.7311, 1e-4);
  EXPECT_NEAR(r.context(0), 0.7311, 1e-4);
  EXPECT_NEAR(r.context(1), 0.2689, 1e-4);
}

TEST(SoftmaxTest, SingleLogitIsCertain)
{
  Vector z(1);
  z << -123.0;
  EXPECT_EQ(softmax(z)(0), 1.0);
}

TEST(EncodeTest, ZeroWeightsGiveZeroStates)
{
  const auto p = ModelParams::zeros(tiny_config());
  Rng rng(1);
  const auto enc = encode(p, random_sequence(rng, 12, 5));
  EXPECT_EQ(enc.states.cols(), 6);
  EXPECT_TRUE(enc.states.isZero(0.0));
}

TEST(EncodeTest, MatchesUnrolledOracle)
{
  const auto p = ModelParams::random(tiny_config(12, 5, 3, 4), 99, 0.5);
  Rng rng(2);
  const auto src = random_sequence(rng, 12, 6);
  const auto enc = encode(p, src);
  const auto ref = oracle::encode(p, src);
  for (std::size_t t = 0; t < ref.states.size(); ++t)
    for (std::size_t k = 0; k < 5; ++k)
      EXPECT_NEAR(enc.states(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)), ref.states[t][k], 1e-10);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t k = 0; k < 5; ++k)
    {
      EXPECT_NEAR(enc.final_h[l](static_cast<Eigen::Index>(k)), ref.final_h[l][k], 1e-10);
      EXPECT_NEAR(enc.final_c[l](static_cast<Eigen::Index>(k)), ref.final_c[l][k], 1e-10);
    }
}

TEST(EncodeTest, TiedDirectionsArePalindromeSymmetric)
{
  auto p = ModelParams::random(tiny_config(12, 6, 2, 5), 5, 0.5);
  p.encoder_bwd = p.encoder_fwd;
  // The encoder appends <eos> (id 2); a leading <eos> keeps the input
  // palindromic.
  Sequence src{{2, 7, 9, 7}, {4, 0, 1, 0}};
  const auto enc = encode(p, src);
  const auto J = enc.states.cols();
  ASSERT_EQ(J, 5);
  for (Eigen::Index t = 0; t < J; ++t)
    EXPECT_LT((enc.states.col(t) - enc.states.col(J - 1 - t)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EncodeTest, OutOfVocabularyIdThrows)
{
  const auto p = ModelParams::zeros(tiny_config());
  EXPECT_THROW(encode(p, Sequence{{4, 12}, {}}), InputError);
  EXPECT_THROW(encode(p, Sequence{}), InputError);
}

TEST(DecodeStepTest, DistributionsSumToOneAndMatchOracle)
{
  const auto p = ModelParams::random(tiny_config(10, 4, 2, 3), 21, 0.5);
  Rng rng(4);
  const auto src = random_sequence(rng, 10, 4);
  const auto enc = encode(p, src);
  const auto ref_enc = oracle::encode(p, src);
  auto state = initial_decoder_state(p, enc);
  auto ref_state = oracle::initial_state(p, ref_enc);
  std::int32_t tok = 1, cas = 4;
  for (int step = 0; step < 4; ++step)
  {
    const auto out = decode_step(p, enc, state, tok, cas);
    const auto ref = oracle::decode_step(p, ref_enc, ref_state, tok, cas);
    EXPECT_NEAR(out.log_probs.array().exp().sum(), 1.0, 1e-6);
    EXPECT_NEAR(out.case_log_probs.array().exp().sum(), 1.0, 1e-6);
    for (Eigen::Index k = 0; k < out.log_probs.size(); ++k)
      EXPECT_NEAR(out.log_probs(k), ref.log_probs[static_cast<std::size_t>(k)], 1e-10);
    for (Eigen::Index k = 0; k < out.alignment.size(); ++k)
      EXPECT_NEAR(out.alignment(k), ref.alignment[static_cast<std::size_t>(k)], 1e-10);
    state = out.state;
    ref_state = ref.state;
    tok = static_cast<std::int32_t>(4 + step);
    cas = step % 5;
  }
}

TEST(ForwardLossTest, UniformOutputCostsLogVPerToken)
{
  auto p = ModelParams::random(tiny_config(17), 1);
  p.out_weight.setZero();
  p.out_bias.setZero();
  Rng rng(5);
  std::vector<SequencePair> batch = {random_pair(rng, 17, 3, 5), random_pair(rng, 17, 6, 2)};
  const auto r = forward_loss(p, batch);
  EXPECT_EQ(r.num_tokens, 9u);
  EXPECT_NEAR(r.word_nll_mean(), std::log(17.0), 1e-12);
}

TEST(ForwardLossTest, DeterministicForFixedSeed)
{
  const auto p = ModelParams::random(tiny_config(), 2);
  Rng rng(6);
  std::vector<SequencePair> batch = {random_pair(rng, 12, 4, 4), random_pair(rng, 12, 2, 5)};
  EXPECT_EQ(forward_loss(p, batch).loss, forward_loss(p, batch).loss);
  ForwardOptions drop{0.3, 77};
  EXPECT_EQ(forward_loss(p, batch, drop).loss, forward_loss(p, batch, drop).loss);
  ForwardOptions other{0.3, 78};
  EXPECT_NE(forward_loss(p, batch, drop).loss, forward_loss(p, batch, other).loss);
}

TEST(ForwardLossTest, BatchedLossMatchesPerPairOracle)
{
  const auto p = ModelParams::random(tiny_config(9, 2, 1, 2), 31, 0.8);
  Rng rng(8);
  std::vector<SequencePair> batch = {random_pair(rng, 9, 1, 3), random_pair(rng, 9, 4, 1),
                                     random_pair(rng, 9, 2, 2)};
  const auto r = forward_loss(p, batch);
  double word = 0, cas = 0;
  std::size_t tokens = 0;
  for (const auto& pair : batch)
  {
    const auto o = oracle::pair_loss(p, pair);
    word += o.word_nll;
    cas += o.case_nll;
    tokens += o.tokens;
  }
  EXPECT_EQ(r.num_tokens, tokens);
  EXPECT_NEAR(r.word_nll_sum, word, 1e-10);
  EXPECT_NEAR(r.case_nll_sum, cas, 1e-10);
  EXPECT_NEAR(r.loss, (word + cas) / static_cast<double>(tokens), 1e-10);
}

TEST(ForwardLossTest, RejectsOverlongAndEmptySequences)
{
  const auto p = ModelParams::random(tiny_config(), 2);
  Rng rng(9);
  std::vector<SequencePair> batch = {random_pair(rng, 12, 5, 3)};
  ForwardOptions opts;
  opts.max_length = 4;
  EXPECT_THROW(forward_loss(p, batch, opts), InputError);
  batch[0].target.ids.clear();
  batch[0].target.case_ids.clear();
  EXPECT_THROW(forward_loss(p, batch), InputError);
}

TEST(BackwardTest, GradientShapesMatchAndUnusedEmbeddingsAreZero)
{
  const auto p = ModelParams::random(tiny_config(), 3);
  std::vector<SequencePair> batch = {SequencePair{Sequence{{4, 5}, {0, 1}}, Sequence{{6, 7, 8}, {}}}};
  const auto r = forward_loss(p, batch);
  const auto g = backward(r, p);
  EXPECT_TRUE(same_shapes(g, p));
  EXPECT_TRUE(g.src_embedding.row(11).isZero(0.0));
  EXPECT_TRUE(g.tgt_embedding.row(10).isZero(0.0));
  EXPECT_TRUE(g.src_embedding.row(3).isZero(0.0));  // <pad>
}

#include "gradcheck.hpp"

TEST(BackwardTest, MatchesFiniteDifferencesWithPaddingAndDropout)
{
  auto cfg = tiny_config(10, 5, 2, 4);
  const auto p = ModelParams::random(cfg, 17, 0.3);
  Rng rng(10);
  std::vector<SequencePair> batch = {random_pair(rng, 10, 3, 4), random_pair(rng, 10, 5, 2),
                                     random_pair(rng, 10, 1, 1)};
  ForwardOptions opts{0.3, 1234};
  const auto report = nmt::test::gradient_check(p, batch, opts, 300, 42);
  EXPECT_GE(report.pass_rate(), 0.99) << "worst relative error " << report.worst;
}

TEST(BackwardTest, MatchesFiniteDifferencesWithoutInputFeed)
{
  auto cfg = tiny_config(8, 4, 1, 3);
  cfg.input_feed = false;
  const auto p = ModelParams::random(cfg, 18, 0.3);
  Rng rng(11);
  std::vector<SequencePair> batch = {random_pair(rng, 8, 2, 3), random_pair(rng, 8, 4, 4)};
  const auto report = nmt::test::gradient_check(p, batch, {}, 200, 43);
  EXPECT_GE(report.pass_rate(), 0.99) << "worst relative error " << report.worst;
}
