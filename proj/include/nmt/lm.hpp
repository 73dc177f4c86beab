#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace nmt
{

  using Sentence = std::vector<std::string>;

  // Interpolated trigram LM. Weights are ordered (trigram, bigram, unigram).
  // The unigram level is an add-one estimate over the V observed event types
  // plus one unknown-word slot; the higher levels are maximum-likelihood
  // estimates that fall back to the next lower level for unseen contexts.
  class NGramModel
  {
  public:
    static constexpr int order = 3;
    static constexpr const char* bos = "<s>";
    static constexpr const char* eos = "</s>";
    static constexpr const char* unk = "<unk>";

    using Weights = std::array<double, 3>;
    static constexpr Weights default_weights = {0.5, 0.3, 0.2};

    // Throws InputError on an empty corpus and ConfigError on invalid weights.
    static NGramModel train(const std::vector<Sentence>& corpus,
                            const Weights& weights = default_weights);

    // p(word | u v); `u` and `v` may be <s>.
    double prob(const std::string& u, const std::string& v, const std::string& word) const;

    // Per-token cross-entropy in bits, counting the </s> event. Throws
    // InputError on an empty sentence.
    double cross_entropy(const Sentence& sentence) const;

    const Weights& weights() const
    {
      return _weights;
    }
    // Number of distinct predicted event types (words and </s>).
    std::uint64_t vocab_size() const
    {
      return _vocab_size;
    }
    std::uint64_t num_events() const
    {
      return _num_events;
    }
    // Predicted event types, sorted.
    std::vector<std::string> vocabulary() const;

    // Text format: header lines, then sorted "ngram TAB count".
    void save(std::ostream& out) const;
    static NGramModel load(std::istream& in);
    void save(const std::string& path) const;
    static NGramModel load(const std::string& path);

  private:
    struct Level
    {
      // key = space-joined n-gram, value = count.
      std::unordered_map<std::string, std::uint64_t> events;
      // key = space-joined history, value = total continuations.
      std::unordered_map<std::string, std::uint64_t> histories;
    };

    void add_event(int n, const std::string& history, const std::string& word, std::uint64_t count);
    double unigram(const std::string& word) const;

    Weights _weights = default_weights;
    std::uint64_t _vocab_size = 0;
    std::uint64_t _num_events = 0;
    std::array<Level, 3> _levels;  // index n-1
  };

  void validate_weights(const NGramModel::Weights& weights);

  // Uniform sample without replacement, reproducible for a given seed.
  // Throws InputError if n exceeds the corpus size.
  std::vector<Sentence> sample_corpus(const std::vector<Sentence>& corpus,
                                      std::size_t n,
                                      std::uint64_t seed);

  // Indices chosen by sample_corpus, in sample order.
  std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, std::uint64_t seed);

}
