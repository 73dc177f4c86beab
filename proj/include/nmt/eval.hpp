#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace nmt
{

  struct BleuStats
  {
    std::array<std::uint64_t, 4> matches{};
    std::array<std::uint64_t, 4> totals{};
    std::uint64_t hyp_len = 0;
    std::uint64_t ref_len = 0;

    BleuStats& operator+=(const BleuStats& other);
  };

  struct BleuReport
  {
    double bleu = 0;  // percentage
    std::array<double, 4> precisions{};
    double brevity_penalty = 1;
    std::uint64_t hyp_len = 0;
    std::uint64_t ref_len = 0;

    double ratio() const
    {
      return ref_len == 0 ? 0.0 : static_cast<double>(hyp_len) / static_cast<double>(ref_len);
    }
  };

  // Clipped n-gram statistics of one whitespace-tokenized segment.
  BleuStats segment_stats(const std::string& hypothesis, const std::string& reference,
                          bool lowercase = false);

  BleuReport bleu_from_stats(const BleuStats& stats);

  // Corpus BLEU with multi-bleu semantics: one reference per line, clipped
  // counts summed over the corpus, brevity penalty from corpus lengths.
  // Throws InputError on a line-count mismatch or an empty corpus.
  BleuReport bleu(const std::vector<std::string>& hypotheses,
                  const std::vector<std::string>& references,
                  bool lowercase = false);

  // "BLEU = 57.89, 100.0/75.0/66.7/50.0 (BP=0.819, ratio=0.833, hyp_len=5, ref_len=6)"
  std::string format_bleu(const BleuReport& report);

  double average_bleu(const std::vector<BleuReport>& reports);

}
