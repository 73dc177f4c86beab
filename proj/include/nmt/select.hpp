#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmt/lm.hpp"

namespace nmt
{

  struct SentenceScore
  {
    std::size_t index = 0;
    double h_in = 0;   // bits/token under the in-domain LM
    double h_out = 0;  // bits/token under the generic-sample LM
    double delta = 0;  // h_in - h_out; lower is closer to the domain
  };

  // Scores every sentence with the two LMs; result in corpus order.
  std::vector<SentenceScore> score_sentences(const NGramModel& in_domain_lm,
                                             const NGramModel& out_domain_lm,
                                             const std::vector<Sentence>& corpus);

  // Sorts ascending by delta, ties by original index.
  void sort_by_delta(std::vector<SentenceScore>& scores);

  struct ScoringOptions
  {
    // Size of the random generic sample used for the out-of-domain LM;
    // 0 means "same size as the in-domain corpus" (capped at the generic
    // corpus size).
    std::size_t sample_size = 0;
    NGramModel::Weights weights = NGramModel::default_weights;
  };

  // Trains the in-domain LM on `in_domain` and the generic LM on a random
  // sample of `generic`, then returns the generic sentences sorted by delta.
  std::vector<SentenceScore> score_and_sort(const std::vector<Sentence>& generic,
                                            const std::vector<Sentence>& in_domain,
                                            std::uint64_t seed,
                                            const ScoringOptions& options = {});

  struct ParallelCorpus
  {
    std::vector<Sentence> source;
    std::vector<Sentence> target;

    std::size_t size() const
    {
      return source.size();
    }
  };

  struct LabeledCorpus
  {
    std::string label;  // "P", "M", ...
    ParallelCorpus data;
    std::size_t quota = 0;
  };

  struct SelectionJob
  {
    std::vector<LabeledCorpus> generic;
    std::vector<Sentence> in_domain;  // source side of the test sets
    std::uint64_t seed = 1;
    ScoringOptions options;
  };

  struct SelectionResult
  {
    ParallelCorpus selected;
    // Number of selected pairs per generic corpus, in job order.
    std::vector<std::size_t> counts;
    // Union index of every selected pair, parallel to `selected`.
    std::vector<std::size_t> indices;
    // Scores of the whole generic union; `index` runs over the corpora
    // concatenated in job order.
    std::vector<SentenceScore> scores;
  };

  // Scores the source side of the union of all generic corpora against the
  // in-domain text and keeps the `quota` best pairs of every corpus. The
  // selection is emitted corpus by corpus, each block in ascending delta.
  SelectionResult select_top(const SelectionJob& job);

  // "index TAB h_in TAB h_out TAB delta" per line.
  void write_score_sidecar(std::ostream& out, const std::vector<SentenceScore>& scores);

}
