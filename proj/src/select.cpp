#include "nmt/select.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <set>

#include "nmt/error.hpp"

namespace nmt
{

  std::vector<SentenceScore> score_sentences(const NGramModel& in_domain_lm,
                                             const NGramModel& out_domain_lm,
                                             const std::vector<Sentence>& corpus)
  {
    std::vector<SentenceScore> scores(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
    {
      auto& score = scores[i];
      score.index = i;
      score.h_in = in_domain_lm.cross_entropy(corpus[i]);
      score.h_out = out_domain_lm.cross_entropy(corpus[i]);
      score.delta = score.h_in - score.h_out;
    }
    return scores;
  }

  void sort_by_delta(std::vector<SentenceScore>& scores)
  {
    std::sort(scores.begin(), scores.end(), [](const SentenceScore& a, const SentenceScore& b) {
      if (a.delta != b.delta)
        return a.delta < b.delta;
      return a.index < b.index;
    });
  }

  std::vector<SentenceScore> score_and_sort(const std::vector<Sentence>& generic,
                                            const std::vector<Sentence>& in_domain,
                                            std::uint64_t seed,
                                            const ScoringOptions& options)
  {
    if (generic.empty())
      throw InputError("Moore-Lewis scoring: empty generic corpus");
    if (in_domain.empty())
      throw InputError("Moore-Lewis scoring: empty in-domain corpus");
    std::size_t n = options.sample_size == 0 ? in_domain.size() : options.sample_size;
    n = std::min(n, generic.size());
    const auto in_lm = NGramModel::train(in_domain, options.weights);
    const auto out_lm = NGramModel::train(sample_corpus(generic, n, seed), options.weights);
    auto scores = score_sentences(in_lm, out_lm, generic);
    sort_by_delta(scores);
    return scores;
  }

  SelectionResult select_top(const SelectionJob& job)
  {
    std::set<std::string> labels;
    std::vector<Sentence> all_sources;
    std::vector<std::size_t> owner;
    std::vector<std::size_t> offset;
    for (std::size_t c = 0; c < job.generic.size(); ++c)
    {
      const auto& corpus = job.generic[c];
      if (!labels.insert(corpus.label).second)
        throw ConfigError("duplicate corpus label in selection job: " + corpus.label);
      if (corpus.data.source.size() != corpus.data.target.size())
        throw InputError("corpus " + corpus.label + " is not sentence-aligned");
      if (corpus.quota > corpus.data.size())
        throw ConfigError("quota " + std::to_string(corpus.quota) + " exceeds the size of corpus "
                          + corpus.label + " (" + std::to_string(corpus.data.size()) + ")");
      offset.push_back(all_sources.size());
      for (const auto& s : corpus.data.source)
      {
        all_sources.push_back(s);
        owner.push_back(c);
      }
    }

    SelectionResult result;
    result.counts.assign(job.generic.size(), 0);
    bool any_quota = false;
    for (const auto& corpus : job.generic)
      any_quota = any_quota || corpus.quota > 0;
    if (!any_quota)
      return result;

    result.scores = score_and_sort(all_sources, job.in_domain, job.seed, job.options);

    std::vector<std::vector<std::size_t>> picked(job.generic.size());
    for (const auto& score : result.scores)
    {
      const auto c = owner[score.index];
      if (picked[c].size() < job.generic[c].quota)
        picked[c].push_back(score.index - offset[c]);
    }
    for (std::size_t c = 0; c < job.generic.size(); ++c)
    {
      for (const auto i : picked[c])
      {
        result.selected.source.push_back(job.generic[c].data.source[i]);
        result.selected.target.push_back(job.generic[c].data.target[i]);
        result.indices.push_back(offset[c] + i);
      }
      result.counts[c] = picked[c].size();
    }
    return result;
  }

  void write_score_sidecar(std::ostream& out, const std::vector<SentenceScore>& scores)
  {
    char buf[128];
    for (const auto& s : scores)
    {
      std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.6f\t%.6f\n", s.index, s.h_in, s.h_out, s.delta);
      out << buf;
    }
  }

}
