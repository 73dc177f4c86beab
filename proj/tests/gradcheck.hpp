#pragma once

// Central finite-difference check of backward() on randomly sampled
// coordinates.

#include <cmath>
#include <vector>

#include "nmt/model.hpp"
#include "nmt/rng.hpp"

namespace nmt::test
{

  struct GradCheckReport
  {
    std::size_t checked = 0;
    std::size_t passed = 0;
    double worst = 0;

    double pass_rate() const
    {
      return checked == 0 ? 0.0 : static_cast<double>(passed) / static_cast<double>(checked);
    }
  };

  // Relative error |a - n| / max(|a|, |n|), with a 1e-8 floor on the
  // denominator so exactly-zero gradients compare on absolute error.
  inline double relative_error(double analytic, double numeric)
  {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / scale;
  }

  inline GradCheckReport gradient_check(ModelParams params,
                                        const std::vector<SequencePair>& batch,
                                        const ForwardOptions& options,
                                        std::size_t samples,
                                        std::uint64_t seed,
                                        double eps = 1e-4,
                                        double tolerance = 1e-4)
  {
    const auto base = forward_loss(params, batch, options);
    const auto grad = backward(base, params);

    std::vector<Matrix*> tensors;
    std::vector<const Matrix*> grads;
    params.for_each([&](const std::string&, Matrix& m) { tensors.push_back(&m); });
    grad.for_each([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
    std::size_t total = 0;
    for (const auto* m : tensors)
      total += static_cast<std::size_t>(m->size());

    ForwardOptions probe = options;
    probe.keep_cache = false;
    Rng rng(seed);
    GradCheckReport report;
    for (std::size_t s = 0; s < samples; ++s)
    {
      auto flat = rng.uniform_index(total);
      std::size_t t = 0;
      while (flat >= static_cast<std::size_t>(tensors[t]->size()))
      {
        flat -= static_cast<std::size_t>(tensors[t]->size());
        ++t;
      }
      double& value = tensors[t]->data()[flat];
      const double saved = value;
      value = saved + eps;
      const double plus = forward_loss(params, batch, probe).loss;
      value = saved - eps;
      const double minus = forward_loss(params, batch, probe).loss;
      value = saved;
      const double numeric = (plus - minus) / (2 * eps);
      const double analytic = grads[t]->data()[flat];
      const double err = relative_error(analytic, numeric);
      ++report.checked;
      if (err < tolerance)
        ++report.passed;
      report.worst = std::max(report.worst, err);
    }
    return report;
  }

}
