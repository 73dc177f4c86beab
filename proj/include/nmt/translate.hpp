#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "nmt/model.hpp"
#include "nmt/subword.hpp"
#include "nmt/train.hpp"

namespace nmt
{

  struct Hypothesis
  {
    std::vector<std::int32_t> ids;       // may end with <eos>
    std::vector<std::int32_t> case_ids;  // one per id
    double log_prob = 0;                 // cumulative word log-probability
    bool finished = false;

    bool ended_with_eos() const;
    // The translation proper: ids and case factors without the final <eos>.
    Sequence output() const;
  };

  struct DecodeOptions
  {
    std::size_t beam_size = 5;
    std::size_t max_length = default_max_length;
    bool normalize = true;  // rank finished hypotheses by log_prob / length
    // Never emitted. <unk> stays allowed.
    std::set<std::int32_t> banned = {1, 3};  // <s>, <pad>
  };

  double hypothesis_score(const Hypothesis& h, bool normalize);

  // Argmax word at each step (ties: lowest id), argmax case factor fed back.
  Hypothesis greedy_decode(const ModelParams& params, const Sequence& source,
                           const DecodeOptions& options = {});

  // Returns finished hypotheses best first (at most beam_size).
  std::vector<Hypothesis> beam_search(const ModelParams& params, const Sequence& source,
                                      const DecodeOptions& options = {});

  Hypothesis beam_decode(const ModelParams& params, const Sequence& source,
                         const DecodeOptions& options = {});

  // Decodes every source independently; results keep the input order.
  // Uses greedy decoding when beam_size is 1.
  std::vector<Hypothesis> translate_corpus(const ModelParams& params,
                                           const std::vector<Sequence>& sources,
                                           const DecodeOptions& options = {},
                                           std::size_t threads = 1);

  struct SyntheticCorpus
  {
    Shard pairs;                      // (machine-translated source, original target)
    std::vector<std::size_t> bounds;  // shard i is [bounds[i], bounds[i+1])

    std::size_t num_shards() const
    {
      return bounds.empty() ? 0 : bounds.size() - 1;
    }
    Shard shard(std::size_t i) const;
  };

  // Boundaries of consecutive shards of `shard_size` (the last may be smaller).
  std::vector<std::size_t> shard_bounds(std::size_t n, std::size_t shard_size);

  // Translates a monolingual target corpus with a target->source model and
  // pairs each sentence with its translation.
  SyntheticCorpus back_translate(const ModelParams& reverse_params,
                                 const std::vector<Sequence>& monolingual,
                                 std::size_t shard_size,
                                 const DecodeOptions& options = {},
                                 std::size_t threads = 1);

  enum class HyperspecMode
  {
    OwnHypotheses,
    References,
  };

  struct InDomainSet
  {
    std::string label;
    std::vector<Sequence> sources;
    std::vector<Sequence> references;  // may be empty in OwnHypotheses mode
  };

  // Concatenates all sets except `exclude` (empty: keep all).
  InDomainSet merge_in_domain(const std::vector<InDomainSet>& sets, const std::string& exclude = {});

  struct HyperspecOptions
  {
    HyperspecMode mode = HyperspecMode::OwnHypotheses;
    double lr = 0.7;
    std::size_t epochs = 1;
    DecodeOptions decode;
    std::size_t threads = 1;
  };

  // Extra epochs at a fixed learning rate on in-domain pairs whose targets
  // are the model's own single-best decodes or the given references. Pairs
  // whose decode is empty are dropped. Returns the updated state; `state`
  // itself is not modified.
  TrainState hyper_specialize(const TrainState& state,
                              const InDomainSet& in_domain,
                              const HyperspecOptions& options,
                              const TrainOptions& training);

}
