#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmt/checkpoint.hpp"
#include "nmt/model.hpp"

namespace nmt
{

  using Shard = std::vector<SequencePair>;

  struct TrainOptions
  {
    std::size_t batch_size = 64;
    double dropout = 0.3;
    std::size_t max_length = default_max_length;
    // Global-norm gradient clipping; <= 0 disables it.
    double clip_norm = 5.0;
    double initial_lr = 1.0;
    double decay = 0.7;
    // Relative validation-PPL improvement below which decay mode starts.
    double plateau_threshold = 0.01;

    void validate() const;
  };

  struct TrainState
  {
    ModelParams params;
    std::size_t epoch = 0;  // completed epochs
    double lr = 1.0;
    bool decay_mode = false;
    std::vector<double> ppl_history;
    std::uint64_t rng_state = 0;
    std::uint64_t updates = 0;

    static TrainState fresh(ModelParams params, std::uint64_t seed, double initial_lr = 1.0);
  };

  // p <- p - lr * g after optional global-norm clipping. Returns the
  // unclipped gradient norm. Throws NumericError (leaving params untouched)
  // on non-finite gradients.
  double sgd_update(ModelParams& params, const ModelParams& grads, double lr, double clip_norm);

  double global_norm(const ModelParams& grads);

  // Seeded shuffle, stable sort by length (bucketing), cut into batches,
  // seeded shuffle of the batch order. Returns positions into `lengths`.
  std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& lengths,
                                                     std::size_t batch_size,
                                                     std::uint64_t seed);

  // Indices of pairs whose both sides have 1..max_length tokens.
  std::vector<std::size_t> usable_pairs(const Shard& shard, std::size_t max_length);

  struct EpochStats
  {
    double train_loss = 0;  // mean objective per target token
    std::size_t updates = 0;
    std::size_t sentences = 0;
    std::size_t skipped = 0;  // filtered by length
  };

  // One pass over the usable pairs of `shard` at state.lr. Advances the
  // state's rng and update counter but not the epoch counter. Throws
  // InputError when no pair is usable.
  EpochStats run_epoch(TrainState& state, const Shard& shard, const TrainOptions& options);

  // exp(mean word NLL per target token), teacher-forced, dropout off.
  double evaluate_ppl(const ModelParams& params, const Shard& corpus,
                      std::size_t max_length = default_max_length,
                      std::size_t batch_size = 64);

  // Records `new_ppl`, completes the epoch, and adjusts the learning rate:
  // decay mode starts when the relative improvement over the previous
  // epoch falls below `threshold`; in decay mode lr is multiplied by
  // `decay` after every epoch.
  void update_lr(TrainState& state, double new_ppl, double threshold, double decay = 0.7);

  // --- epoch plan -----------------------------------------------------------

  enum class PhaseKind
  {
    UntilPlateau,  // lr at its initial value until the plateau, then decay epochs
    Constant,      // one epoch per shard at the initial lr
    Decay,         // decay mode from the first epoch
  };

  struct SchedulePhase
  {
    PhaseKind kind = PhaseKind::UntilPlateau;
    std::vector<std::string> shards;  // labels, cycled one per epoch
    std::size_t max_epochs = 0;       // cap for UntilPlateau
    std::size_t decay_epochs = 0;     // epochs after the plateau, or Decay length
  };

  struct TrainingSchedule
  {
    std::vector<SchedulePhase> phases;
    double initial_lr = 1.0;
    double decay = 0.7;
  };

  struct ScheduleOptions
  {
    std::size_t max_plateau_epochs = 10;
    std::size_t decay_epochs_parallel = 4;
    std::size_t decay_epochs_selected = 5;
  };

  // P until plateau (then decay), P+M1..P+Mk at the initial lr, then decay
  // epochs on the selected P'+M'. Throws ConfigError on missing inputs.
  TrainingSchedule build_schedule(bool has_parallel,
                                  std::size_t num_synthetic_shards,
                                  bool has_selected,
                                  const ScheduleOptions& options = {});

  std::string synthetic_shard_label(std::size_t i);  // "P+M<i>", 1-based
  inline constexpr const char* parallel_label = "P";
  inline constexpr const char* selected_label = "P'+M'";

  struct EpochLog
  {
    std::size_t epoch = 0;
    std::string label;
    double lr = 0;
    double train_loss = 0;
    double valid_ppl = 0;
    double seconds = 0;
  };

  // "epoch TAB label TAB lr TAB train-loss TAB valid-ppl TAB seconds"
  std::string format_epoch_log(const EpochLog& entry);

  using ShardResolver = std::function<const Shard&(const std::string& label)>;
  using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

  // Runs one phase; returns the log of its epochs.
  std::vector<EpochLog> run_phase(TrainState& state,
                                  const SchedulePhase& phase,
                                  const ShardResolver& shards,
                                  const Shard& validation,
                                  const TrainOptions& options,
                                  const EpochCallback& on_epoch = {});

  // --- checkpoints ------------------------------------------------------------

  void save_checkpoint(const TrainState& state, const std::string& path,
                       const Metadata& extra = {});
  // Returns the state and the stored metadata (including `extra`).
  TrainState load_checkpoint(const std::string& path, Metadata* metadata = nullptr);

}
