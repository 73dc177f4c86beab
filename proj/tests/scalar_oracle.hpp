#pragma once

// Straight-line scalar re-implementation of the network equations, used only
// as an independent reference in tests. It reads parameters element by
// element and shares no code with the Eigen implementation.

#include <cmath>
#include <vector>

#include "nmt/model.hpp"

namespace oracle
{

  using Vec = std::vector<double>;

  inline double sigm(double z)
  {
    return 1.0 / (1.0 + std::exp(-z));
  }

  struct State
  {
    Vec h, c;
  };

  inline State lstm(const nmt::LstmLayerParams& p, const Vec& x, const Vec& h, const Vec& c)
  {
    const std::size_t H = h.size();
    const std::size_t D = x.size();
    State out{Vec(H), Vec(H)};
    for (std::size_t k = 0; k < H; ++k)
    {
      double z[4];
      for (int gate = 0; gate < 4; ++gate)
      {
        const auto row = static_cast<Eigen::Index>(gate * H + k);
        double acc = p.bias(row, 0);
        for (std::size_t j = 0; j < D; ++j)
          acc += p.weight(row, static_cast<Eigen::Index>(j)) * x[j];
        for (std::size_t j = 0; j < H; ++j)
          acc += p.weight(row, static_cast<Eigen::Index>(D + j)) * h[j];
        z[gate] = acc;
      }
      const double i = sigm(z[0]);
      const double f = sigm(z[1]);
      const double o = sigm(z[2]);
      const double g = std::tanh(z[3]);
      out.c[k] = f * c[k] + i * g;
      out.h[k] = o * std::tanh(out.c[k]);
    }
    return out;
  }

  inline Vec row(const nmt::Matrix& m, std::int32_t r)
  {
    Vec v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      v[static_cast<std::size_t>(c)] = m(r, c);
    return v;
  }

  inline Vec concat(const Vec& a, const Vec& b)
  {
    Vec v = a;
    v.insert(v.end(), b.begin(), b.end());
    return v;
  }

  inline Vec matvec(const nmt::Matrix& m, const Vec& x)
  {
    Vec y(static_cast<std::size_t>(m.rows()), 0.0);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        y[static_cast<std::size_t>(r)] += m(r, c) * x[static_cast<std::size_t>(c)];
    return y;
  }

  inline Vec log_softmax(const Vec& z)
  {
    double mx = z[0];
    for (double v : z)
      mx = std::max(mx, v);
    double s = 0;
    for (double v : z)
      s += std::exp(v - mx);
    Vec out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      out[i] = z[i] - mx - std::log(s);
    return out;
  }

  struct Encoded
  {
    std::vector<Vec> states;  // J + 1 positions
    std::vector<Vec> final_h, final_c;
  };

  inline Encoded encode(const nmt::ModelParams& p, const nmt::Sequence& src)
  {
    const auto& cfg = p.config;
    const std::size_t J = src.ids.size() + 1;
    std::vector<Vec> inputs;
    for (std::size_t t = 0; t < J; ++t)
    {
      const bool eos = t + 1 == J;
      const std::int32_t tok = eos ? 2 : src.ids[t];
      const std::int32_t cas = eos || src.case_ids.empty() ? 4 : src.case_ids[t];
      inputs.push_back(concat(row(p.src_embedding, tok), row(p.src_case_embedding, cas)));
    }
    Encoded out;
    std::vector<Vec> fwd = inputs, bwd = inputs;
    for (std::size_t l = 0; l < cfg.layers; ++l)
    {
      State s{Vec(cfg.hidden, 0.0), Vec(cfg.hidden, 0.0)};
      for (std::size_t t = 0; t < J; ++t)
      {
        s = lstm(p.encoder_fwd[l], fwd[t], s.h, s.c);
        fwd[t] = s.h;
      }
      State b{Vec(cfg.hidden, 0.0), Vec(cfg.hidden, 0.0)};
      for (std::size_t t = J; t-- > 0;)
      {
        b = lstm(p.encoder_bwd[l], bwd[t], b.h, b.c);
        bwd[t] = b.h;
      }
      Vec fh(cfg.hidden), fc(cfg.hidden);
      for (std::size_t k = 0; k < cfg.hidden; ++k)
      {
        fh[k] = s.h[k] + b.h[k];
        fc[k] = s.c[k] + b.c[k];
      }
      out.final_h.push_back(fh);
      out.final_c.push_back(fc);
    }
    for (std::size_t t = 0; t < J; ++t)
    {
      Vec v(cfg.hidden);
      for (std::size_t k = 0; k < cfg.hidden; ++k)
        v[k] = fwd[t][k] + bwd[t][k];
      out.states.push_back(v);
    }
    return out;
  }

  struct DecState
  {
    std::vector<Vec> h, c;
    Vec feed;
  };

  struct Step
  {
    Vec log_probs, case_log_probs, alignment;
    DecState state;
  };

  inline Step decode_step(const nmt::ModelParams& p, const Encoded& enc, const DecState& st,
                          std::int32_t tok, std::int32_t cas)
  {
    const auto& cfg = p.config;
    const std::size_t H = cfg.hidden;
    Vec x = concat(row(p.tgt_embedding, tok), row(p.tgt_case_embedding, cas));
    if (cfg.input_feed)
      x = concat(x, st.feed);
    Step out;
    for (std::size_t l = 0; l < cfg.layers; ++l)
    {
      const State s = lstm(p.decoder[l], x, st.h[l], st.c[l]);
      out.state.h.push_back(s.h);
      out.state.c.push_back(s.c);
      x = s.h;
    }
    const Vec& top = out.state.h.back();
    // score_s = sum_ij h_i W_ij hbar_sj
    Vec scores;
    for (const auto& hs : enc.states)
    {
      double sc = 0;
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < H; ++j)
          sc += top[i] * p.attn_score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * hs[j];
      scores.push_back(sc);
    }
    const Vec la = log_softmax(scores);
    Vec ctx(H, 0.0);
    for (std::size_t s = 0; s < enc.states.size(); ++s)
    {
      out.alignment.push_back(std::exp(la[s]));
      for (std::size_t k = 0; k < H; ++k)
        ctx[k] += out.alignment[s] * enc.states[s][k];
    }
    Vec ht = matvec(p.attn_combine, concat(ctx, top));
    for (auto& v : ht)
      v = std::tanh(v);
    out.state.feed = ht;
    Vec logits = matvec(p.out_weight, ht);
    for (std::size_t k = 0; k < logits.size(); ++k)
      logits[k] += p.out_bias(static_cast<Eigen::Index>(k), 0);
    out.log_probs = log_softmax(logits);
    Vec case_logits = matvec(p.case_weight, ht);
    for (std::size_t k = 0; k < case_logits.size(); ++k)
      case_logits[k] += p.case_bias(static_cast<Eigen::Index>(k), 0);
    out.case_log_probs = log_softmax(case_logits);
    return out;
  }

  inline DecState initial_state(const nmt::ModelParams& p, const Encoded& enc)
  {
    return DecState{enc.final_h, enc.final_c, Vec(p.config.hidden, 0.0)};
  }

  struct PairLoss
  {
    double word_nll = 0;
    double case_nll = 0;
    std::size_t tokens = 0;
  };

  inline PairLoss pair_loss(const nmt::ModelParams& p, const nmt::SequencePair& pair)
  {
    const auto enc = oracle::encode(p, pair.source);
    DecState st = oracle::initial_state(p, enc);
    PairLoss out;
    std::int32_t prev = 1;
    std::int32_t prev_case = 4;
    const auto& tgt = pair.target;
    for (std::size_t i = 0; i <= tgt.ids.size(); ++i)
    {
      const auto step = oracle::decode_step(p, enc, st, prev, prev_case);
      const bool eos = i == tgt.ids.size();
      const std::int32_t y = eos ? 2 : tgt.ids[i];
      const std::int32_t yc = eos || tgt.case_ids.empty() ? 4 : tgt.case_ids[i];
      out.word_nll -= step.log_probs[static_cast<std::size_t>(y)];
      out.case_nll -= step.case_log_probs[static_cast<std::size_t>(yc)];
      ++out.tokens;
      st = step.state;
      prev = y;
      prev_case = yc;
    }
    return out;
  }

}
