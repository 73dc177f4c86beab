#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmt/config.hpp"
#include "nmt/eval.hpp"
#include "nmt/model.hpp"
#include "nmt/subword.hpp"
#include "nmt/textnorm.hpp"

namespace nmt
{

  inline constexpr const char* tool_version = "1.0.0";

  enum class Side
  {
    Source,
    Target,
  };

  struct PreprocessSettings
  {
    std::string split_compounds = "source";  // source | target | none
    CompoundSplitOptions compound;
    std::string marker = std::string(default_bpe_marker);

    bool splits(Side side) const
    {
      return split_compounds == (side == Side::Source ? "source" : "target");
    }
  };

  // Lowercased words (after compound splitting) and their case factors.
  struct WordSequence
  {
    std::vector<std::string> words;
    std::vector<CaseFactor> factors;
  };

  // Raw text <-> model ids: tokenization, case factors, compound splitting,
  // BPE and vocabulary lookup. Every subword piece carries the case factor
  // of its word; on the way back a word takes the factor of its first piece.
  class Preprocessor
  {
  public:
    explicit Preprocessor(PreprocessSettings settings = {});

    const PreprocessSettings& settings() const
    {
      return _settings;
    }

    // Compound-splitting evidence from raw training lines of one side.
    void learn_lexicon(Side side, const std::vector<std::string>& lines);

    WordSequence words(std::string_view line, Side side) const;

    // Joint BPE over both sides' words, then one vocabulary per side.
    void learn_subwords(const std::vector<WordSequence>& source_words,
                        const std::vector<WordSequence>& target_words,
                        std::size_t merges,
                        std::size_t vocab_size);

    bool has_subwords() const
    {
      return _bpe.has_value();
    }
    std::vector<std::string> pieces(const WordSequence& words) const;
    Sequence encode(const WordSequence& words, Side side) const;
    Sequence encode(std::string_view line, Side side) const
    {
      return encode(words(line, side), side);
    }
    // Subword pieces of a sequence, as text (for inspection files).
    std::string piece_text(const Sequence& seq, Side side) const;
    // Model output back to tokenized, recased text.
    std::string decode(const Sequence& seq, Side side) const;

    const Vocabulary& vocab(Side side) const;
    const BpeModel& bpe() const;

    // Directory layout: preprocess.txt, lexicon.src, lexicon.tgt,
    // bpe.merges, vocab.src, vocab.tgt.
    void save(const std::string& dir) const;
    static Preprocessor load(const std::string& dir);

  private:
    PreprocessSettings _settings;
    FreqLexicon _lexicon[2];
    std::optional<BpeModel> _bpe;
    Vocabulary _vocab[2];
  };

  // Tokenized reference text as compared by BLEU.
  std::string tokenized_reference(std::string_view line);

  std::vector<std::string> read_lines(const std::string& path);
  void write_lines(const std::string& path, const std::vector<std::string>& lines);

  struct StageRecord
  {
    std::string name;
    std::map<std::string, std::string> outputs;  // file -> content hash
    double seconds = 0;
  };

  struct RunManifest
  {
    std::map<std::string, std::string> config;
    std::string version = tool_version;
    std::uint64_t seed = 0;
    bool deterministic = true;
    std::map<std::string, std::string> inputs;  // path -> content hash
    std::vector<StageRecord> stages;
    std::map<std::string, std::string> results;

    // "stage/file" -> hash over every stage.
    std::map<std::string, std::string> output_hashes() const;
    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    void write(const std::string& path) const;
    static RunManifest read(const std::string& path);
  };

  struct PipelineSummary
  {
    std::vector<std::string> test_labels;
    std::vector<BleuReport> base;
    std::vector<BleuReport> adapted;  // empty when hyper-specialisation is off
    double in_domain_ppl_before = 0;
    double in_domain_ppl_after = 0;
    RunManifest manifest;
  };

  // preprocess -> BPE -> train(P) -> back-translate -> train(P+Mi) ->
  // select -> train(P'+M', decay) -> hyper-specialise -> BLEU. Writes every
  // artifact and manifest.json under config.output_dir; progress goes to
  // `log` when given.
  PipelineSummary run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr);

}
