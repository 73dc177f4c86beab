#include "nmt/translate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "nmt/error.hpp"
#include "nmt/subword.hpp"
#include "nmt/textnorm.hpp"

namespace nmt
{

  namespace
  {

    constexpr std::int32_t case_none = static_cast<std::int32_t>(CaseFactor::None);

    std::int32_t argmax_case(const Vector& log_probs)
    {
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < log_probs.size(); ++k)
        if (log_probs(k) > log_probs(best))
          best = k;
      return static_cast<std::int32_t>(best);
    }

    std::vector<std::int32_t> allowed_tokens(std::size_t vocab, const DecodeOptions& options)
    {
      std::vector<std::int32_t> allowed;
      for (std::size_t w = 0; w < vocab; ++w)
        if (!options.banned.count(static_cast<std::int32_t>(w)))
          allowed.push_back(static_cast<std::int32_t>(w));
      if (allowed.empty())
        throw ConfigError("every target token is banned");
      return allowed;
    }

    struct Candidate
    {
      double score;
      std::size_t parent;
      std::int32_t token;
    };

    bool better(const Candidate& a, const Candidate& b)
    {
      if (a.score != b.score)
        return a.score > b.score;
      if (a.parent != b.parent)
        return a.parent < b.parent;
      return a.token < b.token;
    }

  }

  bool Hypothesis::ended_with_eos() const
  {
    return !ids.empty() && ids.back() == Vocabulary::eos_id;
  }

  Sequence Hypothesis::output() const
  {
    Sequence out;
    const std::size_t n = ended_with_eos() ? ids.size() - 1 : ids.size();
    out.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
    out.case_ids.assign(case_ids.begin(), case_ids.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }

  double hypothesis_score(const Hypothesis& h, bool normalize)
  {
    if (!normalize || h.ids.empty())
      return h.log_prob;
    return h.log_prob / static_cast<double>(h.ids.size());
  }

  Hypothesis greedy_decode(const ModelParams& params, const Sequence& source,
                           const DecodeOptions& options)
  {
    const auto allowed = allowed_tokens(static_cast<std::size_t>(params.out_bias.rows()), options);
    const auto encoded = encode(params, source);
    auto state = initial_decoder_state(params, encoded);
    std::int32_t prev = Vocabulary::bos_id;
    std::int32_t prev_case = case_none;
    Hypothesis hyp;
    for (std::size_t t = 0; t < options.max_length; ++t)
    {
      auto step = decode_step(params, encoded, state, prev, prev_case);
      std::int32_t best = allowed.front();
      for (const auto w : allowed)
        if (step.log_probs(w) > step.log_probs(best))
          best = w;
      const auto c = argmax_case(step.case_log_probs);
      hyp.ids.push_back(best);
      hyp.case_ids.push_back(c);
      hyp.log_prob += step.log_probs(best);
      if (best == Vocabulary::eos_id)
        break;
      state = std::move(step.state);
      prev = best;
      prev_case = c;
    }
    hyp.finished = true;
    return hyp;
  }

  std::vector<Hypothesis> beam_search(const ModelParams& params, const Sequence& source,
                                      const DecodeOptions& options)
  {
    if (options.beam_size == 0)
      throw ConfigError("beam size must be at least 1");
    const auto allowed = allowed_tokens(static_cast<std::size_t>(params.out_bias.rows()), options);
    const auto encoded = encode(params, source);

    struct Live
    {
      Hypothesis hyp;
      DecoderState state;
    };
    std::vector<Live> live{{Hypothesis{}, initial_decoder_state(params, encoded)}};
    std::vector<Hypothesis> finished;
    std::vector<StepOutput> steps;
    std::vector<Candidate> candidates;

    for (std::size_t t = 1; t <= options.max_length && !live.empty(); ++t)
    {
      const std::size_t width = options.beam_size - finished.size();
      if (width == 0)
        break;
      steps.clear();
      candidates.clear();
      for (std::size_t p = 0; p < live.size(); ++p)
      {
        const auto& h = live[p].hyp;
        const std::int32_t prev = h.ids.empty() ? Vocabulary::bos_id : h.ids.back();
        const std::int32_t prev_case = h.case_ids.empty() ? case_none : h.case_ids.back();
        steps.push_back(decode_step(params, encoded, live[p].state, prev, prev_case));
        for (const auto w : allowed)
          candidates.push_back({h.log_prob + steps.back().log_probs(w), p, w});
      }
      const std::size_t keep = std::min(width, candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                        candidates.end(), better);

      std::vector<Live> next;
      for (std::size_t k = 0; k < keep; ++k)
      {
        const auto& cand = candidates[k];
        Hypothesis h = live[cand.parent].hyp;
        h.ids.push_back(cand.token);
        h.case_ids.push_back(argmax_case(steps[cand.parent].case_log_probs));
        h.log_prob = cand.score;
        if (cand.token == Vocabulary::eos_id || t == options.max_length)
        {
          h.finished = true;
          finished.push_back(std::move(h));
        }
        else
          next.push_back({std::move(h), steps[cand.parent].state});
      }
      live = std::move(next);
    }

    std::stable_sort(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
      return hypothesis_score(a, options.normalize) > hypothesis_score(b, options.normalize);
    });
    return finished;
  }

  Hypothesis beam_decode(const ModelParams& params, const Sequence& source,
                         const DecodeOptions& options)
  {
    auto all = beam_search(params, source, options);
    if (all.empty())  // max_length == 0
    {
      Hypothesis h;
      h.finished = true;
      return h;
    }
    return std::move(all.front());
  }

  std::vector<Hypothesis> translate_corpus(const ModelParams& params,
                                           const std::vector<Sequence>& sources,
                                           const DecodeOptions& options,
                                           std::size_t threads)
  {
    std::vector<Hypothesis> out(sources.size());
    auto decode_one = [&](std::size_t i) {
      out[i] = options.beam_size == 1 ? greedy_decode(params, sources[i], options)
                                      : beam_decode(params, sources[i], options);
    };
    threads = std::max<std::size_t>(1, std::min(threads, sources.size()));
    if (threads == 1)
    {
      for (std::size_t i = 0; i < sources.size(); ++i)
        decode_one(i);
      return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < sources.size(); i = next++)
        {
          try
          {
            decode_one(i);
          }
          catch (...)
          {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure)
              failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool)
      t.join();
    if (failure)
      std::rethrow_exception(failure);
    return out;
  }

  Shard SyntheticCorpus::shard(std::size_t i) const
  {
    if (i + 1 >= bounds.size())
      throw InputError("synthetic shard index out of range");
    return Shard(pairs.begin() + static_cast<std::ptrdiff_t>(bounds[i]),
                 pairs.begin() + static_cast<std::ptrdiff_t>(bounds[i + 1]));
  }

  std::vector<std::size_t> shard_bounds(std::size_t n, std::size_t shard_size)
  {
    if (shard_size == 0)
      throw ConfigError("shard size must be positive");
    std::vector<std::size_t> bounds{0};
    for (std::size_t end = shard_size; bounds.back() < n; end += shard_size)
      bounds.push_back(std::min(end, n));
    if (n == 0)
      bounds.clear();
    return bounds;
  }

  SyntheticCorpus back_translate(const ModelParams& reverse_params,
                                 const std::vector<Sequence>& monolingual,
                                 std::size_t shard_size,
                                 const DecodeOptions& options,
                                 std::size_t threads)
  {
    SyntheticCorpus corpus;
    corpus.bounds = shard_bounds(monolingual.size(), shard_size);
    const auto hyps = translate_corpus(reverse_params, monolingual, options, threads);
    corpus.pairs.reserve(monolingual.size());
    for (std::size_t i = 0; i < monolingual.size(); ++i)
      corpus.pairs.push_back({hyps[i].output(), monolingual[i]});
    return corpus;
  }

  InDomainSet merge_in_domain(const std::vector<InDomainSet>& sets, const std::string& exclude)
  {
    InDomainSet merged;
    merged.label = exclude.empty() ? "all" : "all-" + exclude;
    bool found = exclude.empty();
    for (const auto& set : sets)
    {
      if (!exclude.empty() && set.label == exclude)
      {
        found = true;
        continue;
      }
      if (!set.references.empty() && set.references.size() != set.sources.size())
        throw InputError("in-domain set " + set.label + " has misaligned references");
      merged.sources.insert(merged.sources.end(), set.sources.begin(), set.sources.end());
      merged.references.insert(merged.references.end(), set.references.begin(), set.references.end());
    }
    if (!found)
      throw ConfigError("no in-domain set named " + exclude);
    if (merged.references.size() != merged.sources.size())
      merged.references.clear();
    return merged;
  }

  TrainState hyper_specialize(const TrainState& state,
                              const InDomainSet& in_domain,
                              const HyperspecOptions& options,
                              const TrainOptions& training)
  {
    if (in_domain.sources.empty())
      throw InputError("hyper-specialisation needs a non-empty in-domain set");
    if (!(options.lr > 0))
      throw ConfigError("hyper-specialisation learning rate must be positive");
    TrainState adapted = state;
    if (options.epochs == 0)
      return adapted;

    Shard pairs;
    if (options.mode == HyperspecMode::References)
    {
      if (in_domain.references.size() != in_domain.sources.size())
        throw InputError("reference mode needs one reference per in-domain source");
      for (std::size_t i = 0; i < in_domain.sources.size(); ++i)
        pairs.push_back({in_domain.sources[i], in_domain.references[i]});
    }
    else
    {
      const auto hyps = translate_corpus(state.params, in_domain.sources, options.decode, options.threads);
      for (std::size_t i = 0; i < hyps.size(); ++i)
      {
        auto target = hyps[i].output();
        if (!target.ids.empty())
          pairs.push_back({in_domain.sources[i], std::move(target)});
      }
      if (pairs.empty())
        throw InputError("every in-domain hypothesis is empty");
    }

    adapted.lr = options.lr;
    for (std::size_t e = 0; e < options.epochs; ++e)
      run_epoch(adapted, pairs, training);
    return adapted;
  }

}
