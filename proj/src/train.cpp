#include "nmt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"

namespace nmt
{

  namespace
  {

    std::string hex_double(double v)
    {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%a", v);
      return buf;
    }

    double parse_double(const std::string& s)
    {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0')
        throw IoError("invalid number in checkpoint metadata: " + s);
      return v;
    }

    const std::string& require(const Metadata& meta, const std::string& key)
    {
      const auto it = meta.find(key);
      if (it == meta.end())
        throw IoError("checkpoint metadata lacks " + key);
      return it->second;
    }

  }

  void TrainOptions::validate() const
  {
    if (batch_size == 0)
      throw ConfigError("batch size must be positive");
    if (dropout < 0 || dropout >= 1)
      throw ConfigError("dropout must be in [0, 1)");
    if (max_length == 0)
      throw ConfigError("maximum length must be positive");
    if (!(initial_lr > 0))
      throw ConfigError("learning rate must be positive");
    if (!(decay > 0 && decay < 1))
      throw ConfigError("decay factor must be in (0, 1)");
  }

  TrainState TrainState::fresh(ModelParams params, std::uint64_t seed, double initial_lr)
  {
    TrainState state;
    state.params = std::move(params);
    state.lr = initial_lr;
    state.rng_state = seed;
    return state;
  }

  double global_norm(const ModelParams& grads)
  {
    double sq = 0;
    grads.for_each([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
    return std::sqrt(sq);
  }

  double sgd_update(ModelParams& params, const ModelParams& grads, double lr, double clip_norm)
  {
    if (!(lr > 0))
      throw ConfigError("learning rate must be positive");
    if (!same_shapes(params, grads))
      throw InputError("gradient shapes do not match the parameters");
    const double norm = global_norm(grads);
    if (!std::isfinite(norm))
      throw NumericError("non-finite gradient; batch aborted");
    double step = lr;
    if (clip_norm > 0 && norm > clip_norm)
      step *= clip_norm / norm;
    std::vector<const Matrix*> g;
    grads.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
    std::size_t i = 0;
    params.for_each([&](const std::string&, Matrix& m) { m.noalias() -= step * (*g[i++]); });
    return norm;
  }

  std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& lengths,
                                                     std::size_t batch_size,
                                                     std::uint64_t seed)
  {
    if (batch_size == 0)
      throw ConfigError("batch size must be positive");
    Rng rng(seed);
    std::vector<std::size_t> order(lengths.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size)
    {
      const auto end = std::min(order.size(), start + batch_size);
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    for (std::size_t i = batches.size(); i > 1; --i)
      std::swap(batches[i - 1], batches[rng.uniform_index(i)]);
    return batches;
  }

  std::vector<std::size_t> usable_pairs(const Shard& shard, std::size_t max_length)
  {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < shard.size(); ++i)
    {
      const auto s = shard[i].source.size();
      const auto t = shard[i].target.size();
      if (s >= 1 && t >= 1 && s <= max_length && t <= max_length)
        usable.push_back(i);
    }
    return usable;
  }

  EpochStats run_epoch(TrainState& state, const Shard& shard, const TrainOptions& options)
  {
    options.validate();
    const auto usable = usable_pairs(shard, options.max_length);
    if (usable.empty())
      throw InputError("training shard has no usable sentence pairs");

    EpochStats stats;
    stats.sentences = usable.size();
    stats.skipped = shard.size() - usable.size();
    const std::uint64_t epoch_seed = Rng::advance(state.rng_state);
    std::vector<std::size_t> lengths;
    lengths.reserve(usable.size());
    for (const auto i : usable)
      lengths.push_back(shard[i].source.size());
    const auto batches = make_batches(lengths, options.batch_size, epoch_seed);

    double objective = 0;
    std::size_t tokens = 0;
    std::vector<SequencePair> batch;
    for (std::size_t b = 0; b < batches.size(); ++b)
    {
      batch.clear();
      for (const auto pos : batches[b])
        batch.push_back(shard[usable[pos]]);
      ForwardOptions fwd;
      fwd.dropout = options.dropout;
      fwd.seed = Rng::derive(epoch_seed, b);
      fwd.max_length = options.max_length;
      const auto result = forward_loss(state.params, batch, fwd);
      const auto grads = backward(result, state.params);
      sgd_update(state.params, grads, state.lr, options.clip_norm);
      objective += result.loss * static_cast<double>(result.num_tokens);
      tokens += result.num_tokens;
      ++stats.updates;
      ++state.updates;
    }
    stats.train_loss = objective / static_cast<double>(tokens);
    return stats;
  }

  double evaluate_ppl(const ModelParams& params, const Shard& corpus, std::size_t max_length,
                      std::size_t batch_size)
  {
    const auto usable = usable_pairs(corpus, max_length);
    if (usable.empty())
      throw InputError("cannot evaluate perplexity on an empty corpus");
    double nll = 0;
    std::size_t tokens = 0;
    ForwardOptions fwd;
    fwd.max_length = max_length;
    fwd.keep_cache = false;
    std::vector<SequencePair> batch;
    for (std::size_t start = 0; start < usable.size(); start += batch_size)
    {
      batch.clear();
      for (std::size_t k = start; k < std::min(usable.size(), start + batch_size); ++k)
        batch.push_back(corpus[usable[k]]);
      const auto r = forward_loss(params, batch, fwd);
      nll += r.word_nll_sum;
      tokens += r.num_tokens;
    }
    return std::exp(nll / static_cast<double>(tokens));
  }

  void update_lr(TrainState& state, double new_ppl, double threshold, double decay)
  {
    if (!state.decay_mode && !state.ppl_history.empty())
    {
      const double prev = state.ppl_history.back();
      const double improvement = (prev - new_ppl) / prev;
      if (improvement < threshold)
        state.decay_mode = true;
    }
    state.ppl_history.push_back(new_ppl);
    ++state.epoch;
    if (state.decay_mode)
      state.lr *= decay;
  }

  TrainingSchedule build_schedule(bool has_parallel,
                                  std::size_t num_synthetic_shards,
                                  bool has_selected,
                                  const ScheduleOptions& options)
  {
    if (!has_parallel)
      throw ConfigError("training schedule needs parallel data (P)");
    if (num_synthetic_shards > 0 && !has_selected)
      throw ConfigError("synthetic shards given but no selected data (P'+M') for the decay phase");
    if (options.max_plateau_epochs == 0)
      throw ConfigError("the parallel phase needs at least one epoch");

    TrainingSchedule schedule;
    SchedulePhase parallel;
    parallel.kind = PhaseKind::UntilPlateau;
    parallel.shards = {parallel_label};
    parallel.max_epochs = options.max_plateau_epochs;
    parallel.decay_epochs = options.decay_epochs_parallel;
    schedule.phases.push_back(parallel);

    if (num_synthetic_shards > 0)
    {
      SchedulePhase mixed;
      mixed.kind = PhaseKind::Constant;
      for (std::size_t i = 1; i <= num_synthetic_shards; ++i)
        mixed.shards.push_back(synthetic_shard_label(i));
      schedule.phases.push_back(mixed);
    }
    if (has_selected)
    {
      SchedulePhase selected;
      selected.kind = PhaseKind::Decay;
      selected.shards = {selected_label};
      selected.decay_epochs = options.decay_epochs_selected;
      schedule.phases.push_back(selected);
    }
    return schedule;
  }

  std::string synthetic_shard_label(std::size_t i)
  {
    return "P+M" + std::to_string(i);
  }

  std::string format_epoch_log(const EpochLog& e)
  {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%zu\t%s\t%.6g\t%.4f\t%.4f\t%.1f", e.epoch, e.label.c_str(), e.lr,
                  e.train_loss, e.valid_ppl, e.seconds);
    return buf;
  }

  std::vector<EpochLog> run_phase(TrainState& state,
                                  const SchedulePhase& phase,
                                  const ShardResolver& shards,
                                  const Shard& validation,
                                  const TrainOptions& options,
                                  const EpochCallback& on_epoch)
  {
    options.validate();
    if (phase.shards.empty())
      throw ConfigError("schedule phase without shards");

    std::vector<EpochLog> log;
    state.lr = options.initial_lr;
    state.decay_mode = false;
    std::size_t total = 0;
    switch (phase.kind)
    {
    case PhaseKind::UntilPlateau:
      total = phase.max_epochs;
      break;
    case PhaseKind::Constant:
      total = phase.shards.size();
      break;
    case PhaseKind::Decay:
      total = phase.decay_epochs;
      state.decay_mode = true;
      state.lr = options.initial_lr * options.decay;
      break;
    }

    std::size_t decay_done = 0;
    for (std::size_t k = 0; k < total; ++k)
    {
      const auto& label = phase.shards[k % phase.shards.size()];
      const auto start = std::chrono::steady_clock::now();
      EpochLog entry;
      entry.label = label;
      entry.lr = state.lr;
      const bool was_decaying = state.decay_mode;
      const auto stats = run_epoch(state, shards(label), options);
      entry.train_loss = stats.train_loss;
      entry.valid_ppl = evaluate_ppl(state.params, validation, options.max_length);
      switch (phase.kind)
      {
      case PhaseKind::Constant:
        state.ppl_history.push_back(entry.valid_ppl);
        ++state.epoch;
        break;
      case PhaseKind::UntilPlateau:
      case PhaseKind::Decay:
        update_lr(state, entry.valid_ppl, options.plateau_threshold, options.decay);
        break;
      }
      entry.epoch = state.epoch;
      entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.push_back(entry);
      if (on_epoch)
        on_epoch(entry, state);
      if (phase.kind == PhaseKind::UntilPlateau && was_decaying)
      {
        if (++decay_done >= phase.decay_epochs)
          break;
      }
      if (phase.kind == PhaseKind::UntilPlateau && state.decay_mode && !was_decaying
          && phase.decay_epochs == 0)
        break;
    }
    return log;
  }

  void save_checkpoint(const TrainState& state, const std::string& path, const Metadata& extra)
  {
    Metadata meta = extra;
    meta["train.epoch"] = std::to_string(state.epoch);
    meta["train.lr"] = hex_double(state.lr);
    meta["train.decay_mode"] = state.decay_mode ? "1" : "0";
    meta["train.rng_state"] = std::to_string(state.rng_state);
    meta["train.updates"] = std::to_string(state.updates);
    std::string history;
    for (const double ppl : state.ppl_history)
    {
      if (!history.empty())
        history += ' ';
      history += hex_double(ppl);
    }
    meta["train.ppl_history"] = history;
    save_checkpoint_file(path, state.params, meta);
  }

  TrainState load_checkpoint(const std::string& path, Metadata* metadata)
  {
    auto ckpt = load_checkpoint_file(path);
    const auto& meta = ckpt.metadata;
    TrainState state;
    try
    {
      state.epoch = std::stoull(require(meta, "train.epoch"));
      state.rng_state = std::stoull(require(meta, "train.rng_state"));
      state.updates = std::stoull(require(meta, "train.updates"));
    }
    catch (const std::invalid_argument&)
    {
      throw IoError("invalid training state in checkpoint: " + path);
    }
    state.lr = parse_double(require(meta, "train.lr"));
    state.decay_mode = require(meta, "train.decay_mode") == "1";
    std::istringstream in(require(meta, "train.ppl_history"));
    std::string tok;
    while (in >> tok)
      state.ppl_history.push_back(parse_double(tok));
    if (state.ppl_history.size() != state.epoch)
      throw IoError("checkpoint perplexity history does not match its epoch count");
    state.params = std::move(ckpt.params);
    if (metadata)
      *metadata = std::move(ckpt.metadata);
    return state;
  }

}
