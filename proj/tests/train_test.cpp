#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "nmt/error.hpp"
#include "nmt/train.hpp"
#include "test_util.hpp"

using namespace nmt;

namespace
{

  Shard copy_shard(std::uint64_t seed, std::size_t n, std::size_t vocab = 12)
  {
    Rng rng(seed);
    Shard shard;
    for (std::size_t i = 0; i < n; ++i)
    {
      auto s = test::random_sequence(rng, vocab, 1 + rng.uniform_index(4));
      shard.push_back(SequencePair{s, s});
    }
    return shard;
  }

  TrainOptions small_options()
  {
    TrainOptions o;
    o.batch_size = 8;
    o.dropout = 0.1;
    return o;
  }

}

TEST(Sgd, PlainStepAndClipping)
{
  auto params = ModelParams::zeros(test::tiny_config());
  auto grads = params.zeros_like();
  grads.out_bias(0, 0) = 3;
  grads.out_bias(1, 0) = 4;
  EXPECT_DOUBLE_EQ(sgd_update(params, grads, 0.5, 0), 5.0);
  EXPECT_DOUBLE_EQ(params.out_bias(0, 0), -1.5);
  EXPECT_DOUBLE_EQ(params.out_bias(1, 0), -2.0);

  params = ModelParams::zeros(test::tiny_config());
  sgd_update(params, grads, 1.0, 1.0);  // norm 5 clipped to 1
  EXPECT_DOUBLE_EQ(params.out_bias(0, 0), -0.6);
  EXPECT_DOUBLE_EQ(params.out_bias(1, 0), -0.8);
}

TEST(Sgd, NonFiniteGradientAbortsWithoutChanges)
{
  auto params = ModelParams::random(test::tiny_config(), 3);
  const auto before = params;
  auto grads = params.zeros_like();
  grads.attn_score(0, 0) = std::nan("");
  EXPECT_THROW(sgd_update(params, grads, 1.0, 5.0), NumericError);
  EXPECT_TRUE(bitwise_equal(params, before));
}

TEST(Batches, SizesAndCoverage)
{
  std::vector<std::size_t> lengths(130);
  for (std::size_t i = 0; i < lengths.size(); ++i)
    lengths[i] = 1 + i % 7;
  const auto batches = make_batches(lengths, 64, 5);
  std::multiset<std::size_t> sizes;
  std::set<std::size_t> seen;
  for (const auto& b : batches)
  {
    sizes.insert(b.size());
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{2, 64, 64}));
  EXPECT_EQ(seen.size(), 130u);
  EXPECT_EQ(make_batches(lengths, 64, 5), batches);
  EXPECT_NE(make_batches(lengths, 64, 6), batches);
}

TEST(Batches, BucketedByLength)
{
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < 40; ++i)
    lengths.push_back(i % 4);
  for (const auto& b : make_batches(lengths, 10, 1))
  {
    std::set<std::size_t> ls;
    for (const auto i : b)
      ls.insert(lengths[i]);
    EXPECT_EQ(ls.size(), 1u);
  }
}

TEST(Epoch, DecreasesLossAndCountsUpdates)
{
  auto state = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 9);
  const auto shard = copy_shard(1, 40);
  const double before = evaluate_ppl(state.params, shard);
  const auto stats = run_epoch(state, shard, small_options());
  EXPECT_EQ(stats.updates, 5u);
  EXPECT_EQ(state.updates, 5u);
  EXPECT_EQ(state.epoch, 0u);
  EXPECT_LT(evaluate_ppl(state.params, shard), before);
}

TEST(Epoch, FiltersOverlongAndRejectsEmpty)
{
  auto state = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 9);
  auto shard = copy_shard(1, 10);
  Rng rng(3);
  auto longer = test::random_sequence(rng, 12, 6);
  shard.push_back(SequencePair{longer, longer});
  auto opts = small_options();
  opts.max_length = 5;
  const auto stats = run_epoch(state, shard, opts);
  EXPECT_EQ(stats.skipped, 1u);
  EXPECT_EQ(stats.sentences, 10u);
  EXPECT_THROW(run_epoch(state, Shard{}, opts), InputError);
}

TEST(Epoch, SameSeedSameParameters)
{
  const auto shard = copy_shard(2, 30);
  auto a = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 9);
  auto b = a;
  run_epoch(a, shard, small_options());
  run_epoch(b, shard, small_options());
  EXPECT_TRUE(bitwise_equal(a.params, b.params));
}

TEST(Ppl, UniformModelGivesVocabularySize)
{
  const auto params = ModelParams::zeros(test::tiny_config());
  EXPECT_NEAR(evaluate_ppl(params, copy_shard(3, 10)), 12.0, 1e-9);
  EXPECT_THROW(evaluate_ppl(params, Shard{}), InputError);
}

TEST(LearningRate, PlateauTriggersDecay)
{
  TrainState s;
  update_lr(s, 13.29, 0.03);
  EXPECT_EQ(s.lr, 1.0);
  update_lr(s, 13.00, 0.03);  // 2.2% < 3%
  EXPECT_TRUE(s.decay_mode);
  EXPECT_EQ(s.lr, 0.7);
  update_lr(s, 12.9, 0.03);
  EXPECT_EQ(s.lr, 0.7 * 0.7);
  EXPECT_EQ(s.epoch, 3u);
  EXPECT_EQ(s.ppl_history.size(), 3u);
}

TEST(LearningRate, ZeroThresholdNeverDecaysOnImprovement)
{
  TrainState s;
  double ppl = 100;
  for (int i = 0; i < 20; ++i)
  {
    ppl *= 0.999;
    update_lr(s, ppl, 0.0);
    EXPECT_EQ(s.lr, 1.0);
  }
  EXPECT_FALSE(s.decay_mode);
}

TEST(LearningRate, DecayIsRepeatedMultiplication)
{
  TrainState s;
  update_lr(s, 10, 0.01);
  update_lr(s, 10, 0.01);
  double expected = 0.7;
  for (int k = 1; k <= 10; ++k)
  {
    EXPECT_EQ(s.lr, expected);
    update_lr(s, 10 - k * 0.1, 0.01);
    expected *= 0.7;
  }
}

TEST(Schedule, Phases)
{
  const auto full = build_schedule(true, 3, true);
  ASSERT_EQ(full.phases.size(), 3u);
  EXPECT_EQ(full.phases[0].kind, PhaseKind::UntilPlateau);
  EXPECT_EQ(full.phases[0].shards, std::vector<std::string>{"P"});
  EXPECT_EQ(full.phases[1].kind, PhaseKind::Constant);
  EXPECT_EQ(full.phases[1].shards, (std::vector<std::string>{"P+M1", "P+M2", "P+M3"}));
  EXPECT_EQ(full.phases[2].kind, PhaseKind::Decay);
  EXPECT_EQ(full.phases[2].shards, std::vector<std::string>{"P'+M'"});

  const auto parallel_only = build_schedule(true, 0, false);
  EXPECT_EQ(parallel_only.phases.size(), 1u);
  EXPECT_THROW(build_schedule(false, 0, false), ConfigError);
  EXPECT_THROW(build_schedule(true, 2, false), ConfigError);
}

TEST(Schedule, RunPhaseFollowsLearningRatePlan)
{
  const auto shard = copy_shard(5, 24);
  auto opts = small_options();
  std::map<std::string, Shard> shards = {{"P", shard}, {"P+M1", shard}, {"P+M2", shard}, {"P'+M'", shard}};
  auto resolve = [&](const std::string& l) -> const Shard& { return shards.at(l); };
  auto state = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 1);

  SchedulePhase plateau{PhaseKind::UntilPlateau, {"P"}, 6, 2};
  opts.plateau_threshold = 2.0;  // any epoch after the first counts as a plateau
  const auto log1 = run_phase(state, plateau, resolve, shard, opts);
  ASSERT_EQ(log1.size(), 4u);
  EXPECT_EQ(log1[0].lr, 1.0);
  EXPECT_EQ(log1[1].lr, 1.0);
  EXPECT_EQ(log1[2].lr, 0.7);
  EXPECT_EQ(log1[3].lr, 0.7 * 0.7);

  SchedulePhase mixed{PhaseKind::Constant, {"P+M1", "P+M2"}, 0, 0};
  const auto log2 = run_phase(state, mixed, resolve, shard, opts);
  ASSERT_EQ(log2.size(), 2u);
  EXPECT_EQ(log2[0].label, "P+M1");
  EXPECT_EQ(log2[1].label, "P+M2");
  EXPECT_EQ(log2[1].lr, 1.0);

  SchedulePhase decay{PhaseKind::Decay, {"P'+M'"}, 0, 3};
  const auto log3 = run_phase(state, decay, resolve, shard, opts);
  ASSERT_EQ(log3.size(), 3u);
  EXPECT_EQ(log3[0].lr, 0.7);
  EXPECT_EQ(log3[2].lr, 0.7 * 0.7 * 0.7);
  EXPECT_EQ(state.epoch, 9u);
  EXPECT_EQ(state.ppl_history.size(), 9u);
  EXPECT_EQ(log3[2].epoch, 9u);
}

TEST(Log, Format)
{
  EpochLog e{3, "P+M1", 0.7, 2.5, 13.29, 1.25};
  EXPECT_EQ(format_epoch_log(e), "3\tP+M1\t0.7\t2.5000\t13.2900\t1.2");
}

TEST(Checkpoint, ResumeEqualsUninterruptedTraining)
{
  const auto shard = copy_shard(6, 30);
  const auto opts = small_options();
  auto straight = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 77);
  run_epoch(straight, shard, opts);
  update_lr(straight, evaluate_ppl(straight.params, shard), 0.01);
  run_epoch(straight, shard, opts);

  auto first = TrainState::fresh(ModelParams::random(test::tiny_config(), 4), 77);
  run_epoch(first, shard, opts);
  update_lr(first, evaluate_ppl(first.params, shard), 0.01);
  const auto path = (std::filesystem::temp_directory_path() / "nmt_resume.ckpt").string();
  save_checkpoint(first, path, {{"vocab.src", "abc"}});
  Metadata meta;
  auto resumed = load_checkpoint(path, &meta);
  std::filesystem::remove(path);
  EXPECT_EQ(meta.at("vocab.src"), "abc");
  EXPECT_EQ(resumed.epoch, 1u);
  EXPECT_EQ(resumed.lr, first.lr);
  EXPECT_EQ(resumed.ppl_history, first.ppl_history);
  run_epoch(resumed, shard, opts);
  EXPECT_TRUE(bitwise_equal(resumed.params, straight.params));
  EXPECT_EQ(resumed.rng_state, straight.rng_state);
}

TEST(Options, Validation)
{
  TrainOptions o;
  EXPECT_EQ(o.batch_size, 64u);
  EXPECT_EQ(o.dropout, 0.3);
  EXPECT_EQ(o.max_length, 80u);
  EXPECT_NO_THROW(o.validate());
  o.dropout = 1.5;
  EXPECT_THROW(o.validate(), ConfigError);
}
