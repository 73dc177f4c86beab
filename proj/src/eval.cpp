#include "nmt/eval.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "nmt/error.hpp"
#include "nmt/textnorm.hpp"

namespace nmt
{

  namespace
  {

    std::vector<std::string> words(const std::string& line, bool lowercase)
    {
      std::istringstream in(lowercase ? to_lower(line) : line);
      std::vector<std::string> out;
      std::string w;
      while (in >> w)
        out.push_back(std::move(w));
      return out;
    }

    std::map<std::vector<std::string>, std::uint64_t> ngrams(const std::vector<std::string>& toks,
                                                             std::size_t n)
    {
      std::map<std::vector<std::string>, std::uint64_t> counts;
      for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
      return counts;
    }

  }

  BleuStats& BleuStats::operator+=(const BleuStats& other)
  {
    for (std::size_t n = 0; n < 4; ++n)
    {
      matches[n] += other.matches[n];
      totals[n] += other.totals[n];
    }
    hyp_len += other.hyp_len;
    ref_len += other.ref_len;
    return *this;
  }

  BleuStats segment_stats(const std::string& hypothesis, const std::string& reference, bool lowercase)
  {
    const auto hyp = words(hypothesis, lowercase);
    const auto ref = words(reference, lowercase);
    BleuStats s;
    s.hyp_len = hyp.size();
    s.ref_len = ref.size();
    for (std::size_t n = 1; n <= 4; ++n)
    {
      const auto h = ngrams(hyp, n);
      const auto r = ngrams(ref, n);
      for (const auto& [gram, count] : h)
      {
        s.totals[n - 1] += count;
        const auto it = r.find(gram);
        if (it != r.end())
          s.matches[n - 1] += std::min(count, it->second);
      }
    }
    return s;
  }

  BleuReport bleu_from_stats(const BleuStats& stats)
  {
    BleuReport report;
    report.hyp_len = stats.hyp_len;
    report.ref_len = stats.ref_len;
    bool zero = false;
    double log_sum = 0;
    for (std::size_t n = 0; n < 4; ++n)
    {
      const double p = stats.totals[n] == 0
                           ? 0.0
                           : static_cast<double>(stats.matches[n]) / static_cast<double>(stats.totals[n]);
      report.precisions[n] = p;
      if (p == 0)
        zero = true;
      else
        log_sum += std::log(p);
    }
    if (stats.hyp_len < stats.ref_len)
      report.brevity_penalty =
          stats.hyp_len == 0
              ? 0.0
              : std::exp(1.0 - static_cast<double>(stats.ref_len) / static_cast<double>(stats.hyp_len));
    report.bleu = zero ? 0.0 : 100.0 * report.brevity_penalty * std::exp(log_sum / 4.0);
    return report;
  }

  BleuReport bleu(const std::vector<std::string>& hypotheses,
                  const std::vector<std::string>& references,
                  bool lowercase)
  {
    if (hypotheses.size() != references.size())
      throw InputError("hypothesis and reference line counts differ (" + std::to_string(hypotheses.size())
                       + " vs " + std::to_string(references.size()) + ")");
    if (hypotheses.empty())
      throw InputError("cannot compute BLEU on an empty corpus");
    BleuStats total;
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
      total += segment_stats(hypotheses[i], references[i], lowercase);
    return bleu_from_stats(total);
  }

  std::string format_bleu(const BleuReport& r)
  {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%llu, ref_len=%llu)",
                  r.bleu, 100 * r.precisions[0], 100 * r.precisions[1], 100 * r.precisions[2],
                  100 * r.precisions[3], r.brevity_penalty, r.ratio(),
                  static_cast<unsigned long long>(r.hyp_len), static_cast<unsigned long long>(r.ref_len));
    return buf;
  }

  double average_bleu(const std::vector<BleuReport>& reports)
  {
    if (reports.empty())
      throw InputError("average BLEU needs at least one report");
    double sum = 0;
    for (const auto& r : reports)
      sum += r.bleu;
    return sum / static_cast<double>(reports.size());
  }

}
