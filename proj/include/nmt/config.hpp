#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmt/error.hpp"

namespace nmt
{

  // Every problem found while reading a configuration.
  class ConfigErrors : public ConfigError
  {
  public:
    explicit ConfigErrors(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const
    {
      return _errors;
    }

  private:
    std::vector<std::string> _errors;
  };

  struct TestSetPaths
  {
    std::string label;
    std::string source;
    std::string target;
  };

  struct PipelineConfig
  {
    // [data] paths are resolved against the config file's directory.
    std::string parallel_source;
    std::string parallel_target;
    std::string monolingual;  // target language
    std::string valid_source;
    std::string valid_target;
    std::vector<TestSetPaths> tests;  // [tests] label = source target

    // [preprocess]
    std::string split_compounds = "source";  // source | target | none
    std::size_t min_part_length = 4;
    std::size_t max_parts = 2;
    std::size_t bpe_merges = 30000;
    std::size_t vocab_size = 30000;

    // [model]
    std::size_t layers = 4;
    std::size_t hidden = 1000;
    std::size_t embedding = 500;
    std::size_t case_embedding = 8;
    bool input_feed = true;
    double init_range = 0.1;

    // [train]
    std::size_t batch = 64;
    double dropout = 0.3;
    std::size_t max_length = 80;
    double lr = 1.0;
    double decay = 0.7;
    double threshold = 0.01;
    double clip_norm = 5.0;
    std::size_t max_epochs = 10;
    std::size_t decay_epochs = 4;
    std::size_t selected_epochs = 5;

    // [backtranslate]
    std::size_t shard_size = 4500000;
    std::size_t reverse_max_epochs = 10;

    // [select]
    std::size_t quota_parallel = 2500000;
    std::size_t quota_synthetic = 2500000;
    std::size_t sample_size = 0;

    // [hyperspec]
    bool hyperspec = true;
    std::string hyperspec_mode = "own";  // own | references
    double hyperspec_lr = 0.7;
    std::size_t hyperspec_epochs = 1;
    std::string hyperspec_exclude;

    // [decode]
    std::size_t beam = 5;
    bool normalize = true;
    std::size_t decode_max_length = 80;

    // [run]
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool deterministic = true;
    std::string output_dir = "run";

    // Flat view "section.key" -> value, for manifests.
    std::map<std::string, std::string> resolved() const;
  };

  // Parses the text of a config file. Unknown keys, type mismatches and
  // out-of-range values are all collected and thrown together.
  // `env` overrides use NMT_<SECTION>_<KEY> (upper case); pass an empty map
  // to ignore the environment. Relative paths are resolved against
  // `base_dir`.
  PipelineConfig parse_config(const std::string& text,
                              const std::string& base_dir,
                              const std::map<std::string, std::string>& env = {});

  // Reads and parses a file, then checks that every referenced file exists.
  PipelineConfig validate_config(const std::string& path,
                                 const std::map<std::string, std::string>& env = {});

  // NMT_* variables of the process environment.
  std::map<std::string, std::string> environment_overrides();

  // Checks that the inputs a full pipeline run needs are configured.
  void require_pipeline_inputs(const PipelineConfig& config);

}
