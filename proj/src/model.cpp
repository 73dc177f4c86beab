#include "nmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "nmt/error.hpp"
#include "nmt/rng.hpp"
#include "nmt/subword.hpp"
#include "nmt/textnorm.hpp"

namespace nmt
{

  namespace
  {

    constexpr std::int32_t case_none = static_cast<std::int32_t>(CaseFactor::None);

    Eigen::Index idx(std::size_t n)
    {
      return static_cast<Eigen::Index>(n);
    }

    LstmLayerParams lstm_zeros(std::size_t input_dim, std::size_t hidden)
    {
      LstmLayerParams p;
      p.weight = Matrix::Zero(idx(4 * hidden), idx(input_dim + hidden));
      p.bias = Matrix::Zero(idx(4 * hidden), 1);
      return p;
    }

    Matrix sigmoid(const Matrix& z)
    {
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    }

    // Column-wise softmax; also returns log-probabilities.
    void softmax_columns(const Matrix& logits, Matrix& probs, Matrix& log_probs)
    {
      const RowVector max = logits.colwise().maxCoeff();
      Matrix shifted = logits.rowwise() - max;
      probs = shifted.array().exp().matrix();
      const RowVector sum = probs.colwise().sum();
      const RowVector log_sum = sum.array().log().matrix();
      log_probs = shifted.rowwise() - log_sum;
      probs = probs.array().rowwise() / sum.array();
    }

    void check_sequence(const Sequence& seq, std::size_t vocab, std::size_t max_length,
                        const char* side)
    {
      if (seq.ids.empty())
        throw InputError(std::string("empty ") + side + " sequence");
      if (seq.ids.size() > max_length)
        throw InputError(std::string(side) + " sequence of length " + std::to_string(seq.ids.size())
                         + " exceeds the maximum length " + std::to_string(max_length));
      if (!seq.case_ids.empty() && seq.case_ids.size() != seq.ids.size())
        throw InputError(std::string(side) + " case factors do not match the tokens");
      for (const auto id : seq.ids)
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
          throw InputError(std::string(side) + " token id " + std::to_string(id)
                           + " outside the vocabulary");
      for (const auto c : seq.case_ids)
        if (c < 0 || c >= num_case_factors)
          throw InputError(std::string(side) + " case id " + std::to_string(c) + " out of range");
    }

    std::int32_t case_at(const Sequence& seq, std::size_t i)
    {
      return seq.case_ids.empty() ? case_none : seq.case_ids[i];
    }

    // Inverted dropout mask: entries are 0 or 1/(1-p).
    Matrix dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double p)
    {
      Matrix mask(rows, cols);
      const double keep = 1.0 / (1.0 - p);
      for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r)
          mask(r, c) = rng.uniform() < p ? 0.0 : keep;
      return mask;
    }

    void embed(const Matrix& word_embedding, const Matrix& case_embedding,
               std::int32_t token, std::int32_t case_id, Eigen::Ref<Vector> out)
    {
      const auto e = word_embedding.cols();
      out.head(e) = word_embedding.row(token).transpose();
      out.segment(e, case_embedding.cols()) = case_embedding.row(case_id).transpose();
    }

  }

  void ModelConfig::validate() const
  {
    if (src_vocab < Vocabulary::num_specials || tgt_vocab < Vocabulary::num_specials)
      throw ConfigError("vocabularies must hold at least the reserved special symbols");
    if (embedding_dim == 0 || case_dim == 0 || hidden == 0 || layers == 0)
      throw ConfigError("model dimensions must be positive");
    if (case_loss_weight < 0)
      throw ConfigError("case loss weight must be non-negative");
  }

  ModelParams ModelParams::zeros(const ModelConfig& config)
  {
    config.validate();
    ModelParams p;
    p.config = config;
    const auto E = config.embedding_dim;
    const auto C = config.case_dim;
    const auto H = config.hidden;
    p.src_embedding = Matrix::Zero(idx(config.src_vocab), idx(E));
    p.src_case_embedding = Matrix::Zero(num_case_factors, idx(C));
    p.tgt_embedding = Matrix::Zero(idx(config.tgt_vocab), idx(E));
    p.tgt_case_embedding = Matrix::Zero(num_case_factors, idx(C));
    for (std::size_t l = 0; l < config.layers; ++l)
    {
      const std::size_t enc_in = l == 0 ? E + C : H;
      const std::size_t dec_in = l == 0 ? E + C + (config.input_feed ? H : 0) : H;
      p.encoder_fwd.push_back(lstm_zeros(enc_in, H));
      p.encoder_bwd.push_back(lstm_zeros(enc_in, H));
      p.decoder.push_back(lstm_zeros(dec_in, H));
    }
    p.attn_score = Matrix::Zero(idx(H), idx(H));
    p.attn_combine = Matrix::Zero(idx(H), idx(2 * H));
    p.out_weight = Matrix::Zero(idx(config.tgt_vocab), idx(H));
    p.out_bias = Matrix::Zero(idx(config.tgt_vocab), 1);
    p.case_weight = Matrix::Zero(num_case_factors, idx(H));
    p.case_bias = Matrix::Zero(num_case_factors, 1);
    return p;
  }

  ModelParams ModelParams::random(const ModelConfig& config, std::uint64_t seed, double range)
  {
    auto p = zeros(config);
    Rng rng(seed);
    p.for_each([&](const std::string&, Matrix& m) {
      // Row-major fill so the values do not depend on storage order.
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = rng.uniform(-range, range);
    });
    return p;
  }

  void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn)
  {
    fn("src_embedding", src_embedding);
    fn("src_case_embedding", src_case_embedding);
    fn("tgt_embedding", tgt_embedding);
    fn("tgt_case_embedding", tgt_case_embedding);
    auto stack = [&](const std::string& name, std::vector<LstmLayerParams>& layers) {
      for (std::size_t l = 0; l < layers.size(); ++l)
      {
        fn(name + "." + std::to_string(l) + ".weight", layers[l].weight);
        fn(name + "." + std::to_string(l) + ".bias", layers[l].bias);
      }
    };
    stack("encoder_fwd", encoder_fwd);
    stack("encoder_bwd", encoder_bwd);
    stack("decoder", decoder);
    fn("attention.score", attn_score);
    fn("attention.combine", attn_combine);
    fn("generator.weight", out_weight);
    fn("generator.bias", out_bias);
    fn("case_generator.weight", case_weight);
    fn("case_generator.bias", case_bias);
  }

  void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const
  {
    const_cast<ModelParams*>(this)->for_each(
      [&](const std::string& name, Matrix& m) { fn(name, m); });
  }

  std::size_t ModelParams::num_parameters() const
  {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool ModelParams::all_finite() const
  {
    bool finite = true;
    for_each([&](const std::string&, const Matrix& m) { finite = finite && m.allFinite(); });
    return finite;
  }

  bool same_shapes(const ModelParams& a, const ModelParams& b)
  {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> sa, sb;
    a.for_each([&](const std::string&, const Matrix& m) { sa.emplace_back(m.rows(), m.cols()); });
    b.for_each([&](const std::string&, const Matrix& m) { sb.emplace_back(m.rows(), m.cols()); });
    return sa == sb;
  }

  bool bitwise_equal(const ModelParams& a, const ModelParams& b)
  {
    if (!(a.config == b.config) || !same_shapes(a, b))
      return false;
    std::vector<const Matrix*> ma, mb;
    a.for_each([&](const std::string&, const Matrix& m) { ma.push_back(&m); });
    b.for_each([&](const std::string&, const Matrix& m) { mb.push_back(&m); });
    for (std::size_t i = 0; i < ma.size(); ++i)
      if (std::memcmp(ma[i]->data(), mb[i]->data(), sizeof(double) * static_cast<std::size_t>(ma[i]->size())) != 0)
        return false;
    return true;
  }

  void lstm_forward(const LstmLayerParams& params,
                    const Matrix& x,
                    const Matrix& h_prev,
                    const Matrix& c_prev,
                    const RowVector* mask,
                    LstmStepCache& cache)
  {
    const auto H = idx(params.hidden());
    cache.input.resize(x.rows() + H, x.cols());
    cache.input.topRows(x.rows()) = x;
    cache.input.bottomRows(H) = h_prev;
    cache.c_prev = c_prev;
    Matrix z = params.weight * cache.input;
    z.colwise() += params.bias.col(0);
    cache.i = sigmoid(z.middleRows(0, H));
    cache.f = sigmoid(z.middleRows(H, H));
    cache.o = sigmoid(z.middleRows(2 * H, H));
    cache.g = z.middleRows(3 * H, H).array().tanh().matrix();
    cache.c_new = (cache.f.array() * c_prev.array() + cache.i.array() * cache.g.array()).matrix();
    cache.tanh_c = cache.c_new.array().tanh().matrix();
    const Matrix h_new = (cache.o.array() * cache.tanh_c.array()).matrix();
    if (mask)
    {
      cache.mask = *mask;
      const RowVector keep = (1.0 - mask->array()).matrix();
      cache.h = (h_new.array().rowwise() * mask->array() + h_prev.array().rowwise() * keep.array()).matrix();
      cache.c = (cache.c_new.array().rowwise() * mask->array() + c_prev.array().rowwise() * keep.array()).matrix();
    }
    else
    {
      cache.mask.resize(0);
      cache.h = h_new;
      cache.c = cache.c_new;
    }
  }

  void lstm_backward(const LstmLayerParams& params,
                     const LstmStepCache& cache,
                     const Matrix& dh,
                     const Matrix& dc,
                     LstmLayerParams& grad,
                     Matrix& dx,
                     Matrix& dh_prev,
                     Matrix& dc_prev)
  {
    const auto H = idx(params.hidden());
    Matrix dh_new;
    Matrix dc_new;
    Matrix dh_pass;
    Matrix dc_pass;
    const bool masked = cache.mask.size() > 0;
    if (masked)
    {
      const RowVector keep = (1.0 - cache.mask.array()).matrix();
      dh_new = (dh.array().rowwise() * cache.mask.array()).matrix();
      dc_new = (dc.array().rowwise() * cache.mask.array()).matrix();
      dh_pass = (dh.array().rowwise() * keep.array()).matrix();
      dc_pass = (dc.array().rowwise() * keep.array()).matrix();
    }
    else
    {
      dh_new = dh;
      dc_new = dc;
    }

    const auto& i = cache.i.array();
    const auto& f = cache.f.array();
    const auto& o = cache.o.array();
    const auto& g = cache.g.array();
    const auto& tc = cache.tanh_c.array();
    const Eigen::ArrayXXd dc_total = dc_new.array() + dh_new.array() * o * (1.0 - tc * tc);

    Matrix dz(4 * H, dh.cols());
    dz.middleRows(0, H) = (dc_total * g * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc_total * cache.c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dh_new.array() * tc * o * (1.0 - o)).matrix();
    dz.middleRows(3 * H, H) = (dc_total * i * (1.0 - g * g)).matrix();

    grad.weight.noalias() += dz * cache.input.transpose();
    grad.bias.col(0) += dz.rowwise().sum();

    const Matrix dinput = params.weight.transpose() * dz;
    const auto D = cache.input.rows() - H;
    dx = dinput.topRows(D);
    dh_prev = dinput.bottomRows(H);
    dc_prev = (dc_total * f).matrix();
    if (masked)
    {
      dh_prev += dh_pass;
      dc_prev += dc_pass;
    }
  }

  LstmState lstm_step(const LstmLayerParams& params,
                      const Vector& x,
                      const Vector& h_prev,
                      const Vector& c_prev)
  {
    if (static_cast<std::size_t>(x.size()) != params.input_dim()
        || static_cast<std::size_t>(h_prev.size()) != params.hidden()
        || static_cast<std::size_t>(c_prev.size()) != params.hidden())
      throw InputError("lstm_step: dimension mismatch");
    LstmStepCache cache;
    lstm_forward(params, x, h_prev, c_prev, nullptr, cache);
    if (!cache.h.allFinite() || !cache.c.allFinite())
      throw NumericError("non-finite LSTM output");
    return LstmState{cache.h.col(0), cache.c.col(0)};
  }

  Vector softmax(const Vector& logits)
  {
    const double max = logits.maxCoeff();
    Vector e = (logits.array() - max).exp().matrix();
    return e / e.sum();
  }

  AttentionResult attention(const Vector& decoder_state,
                            const Matrix& encoder_states,
                            const Matrix& score_matrix)
  {
    if (encoder_states.cols() == 0)
      throw InputError("attention over an empty source");
    if (score_matrix.rows() != decoder_state.size() || score_matrix.cols() != encoder_states.rows())
      throw InputError("attention: dimension mismatch");
    AttentionResult r;
    const Vector u = score_matrix.transpose() * decoder_state;
    r.scores = encoder_states.transpose() * u;
    r.alignment = softmax(r.scores);
    r.context = encoder_states * r.alignment;
    return r;
  }

  EncoderOutput encode(const ModelParams& params, const Sequence& source)
  {
    const auto& cfg = params.config;
    check_sequence(source, cfg.src_vocab, std::numeric_limits<std::size_t>::max(), "source");
    const std::size_t J = source.size() + 1;
    const auto H = idx(cfg.hidden);
    const auto D0 = idx(cfg.embedding_dim + cfg.case_dim);

    std::vector<Vector> inputs(J, Vector(D0));
    for (std::size_t t = 0; t < J; ++t)
    {
      const bool eos = t == source.size();
      embed(params.src_embedding, params.src_case_embedding,
            eos ? Vocabulary::eos_id : source.ids[t],
            eos ? case_none : case_at(source, t), inputs[t]);
    }

    EncoderOutput out;
    out.states = Matrix::Zero(H, idx(J));
    std::vector<Vector> fwd = inputs;
    std::vector<Vector> bwd = inputs;
    for (std::size_t l = 0; l < cfg.layers; ++l)
    {
      Vector h = Vector::Zero(H), c = Vector::Zero(H);
      for (std::size_t t = 0; t < J; ++t)
      {
        auto s = lstm_step(params.encoder_fwd[l], fwd[t], h, c);
        h = s.h;
        c = s.c;
        fwd[t] = h;
      }
      Vector hf = h, cf = c;
      h.setZero();
      c.setZero();
      for (std::size_t t = J; t-- > 0;)
      {
        auto s = lstm_step(params.encoder_bwd[l], bwd[t], h, c);
        h = s.h;
        c = s.c;
        bwd[t] = h;
      }
      out.final_h.push_back(hf + h);
      out.final_c.push_back(cf + c);
    }
    for (std::size_t t = 0; t < J; ++t)
      out.states.col(idx(t)) = fwd[t] + bwd[t];
    return out;
  }

  DecoderState initial_decoder_state(const ModelParams& params, const EncoderOutput& encoded)
  {
    DecoderState state;
    state.h = encoded.final_h;
    state.c = encoded.final_c;
    state.feed = Vector::Zero(idx(params.config.hidden));
    return state;
  }

  StepOutput decode_step(const ModelParams& params,
                         const EncoderOutput& encoded,
                         const DecoderState& state,
                         std::int32_t prev_token,
                         std::int32_t prev_case)
  {
    const auto& cfg = params.config;
    if (prev_token < 0 || static_cast<std::size_t>(prev_token) >= cfg.tgt_vocab)
      throw InputError("decode_step: target id out of range");
    if (prev_case < 0 || prev_case >= num_case_factors)
      throw InputError("decode_step: case id out of range");
    const auto E = idx(cfg.embedding_dim);
    const auto C = idx(cfg.case_dim);
    const auto H = idx(cfg.hidden);

    Vector x(params.decoder[0].input_dim());
    embed(params.tgt_embedding, params.tgt_case_embedding, prev_token, prev_case,
          x.head(E + C));
    if (cfg.input_feed)
      x.tail(H) = state.feed;

    StepOutput out;
    out.state.h.resize(cfg.layers);
    out.state.c.resize(cfg.layers);
    for (std::size_t l = 0; l < cfg.layers; ++l)
    {
      auto s = lstm_step(params.decoder[l], x, state.h[l], state.c[l]);
      out.state.h[l] = s.h;
      out.state.c[l] = s.c;
      x = s.h;
    }
    const Vector& top = out.state.h.back();
    const auto att = attention(top, encoded.states, params.attn_score);
    Vector concat(2 * H);
    concat << att.context, top;
    const Vector htilde = (params.attn_combine * concat).array().tanh().matrix();
    out.state.feed = htilde;
    out.alignment = att.alignment;

    Matrix probs, log_probs;
    const Matrix logits = params.out_weight * htilde + params.out_bias;
    softmax_columns(logits, probs, log_probs);
    out.log_probs = log_probs.col(0);
    const Matrix case_logits = params.case_weight * htilde + params.case_bias;
    softmax_columns(case_logits, probs, log_probs);
    out.case_log_probs = log_probs.col(0);
    if (!out.log_probs.allFinite() || !out.case_log_probs.allFinite())
      throw NumericError("non-finite decoder output");
    return out;
  }

  // ---------------------------------------------------------------------
  // Batched teacher-forced forward pass and its exact backward pass.

  struct ForwardCache
  {
    std::size_t batch = 0;
    std::size_t src_steps = 0;  // max source length + 1
    std::size_t tgt_steps = 0;  // max target length + 1
    double scale = 0;           // 1 / num_tokens
    double case_weight = 0;

    std::vector<std::size_t> src_len;  // including <eos>
    std::vector<std::size_t> tgt_len;  // including <eos>
    std::vector<std::vector<std::int32_t>> src_tok, src_case;  // [t][b]
    std::vector<std::vector<std::int32_t>> dec_in_tok, dec_in_case;
    std::vector<std::vector<std::int32_t>> dec_out_tok, dec_out_case;

    // Encoder, [layer][t].
    std::vector<std::vector<LstmStepCache>> enc_fwd, enc_bwd;
    std::vector<std::vector<Matrix>> enc_fwd_drop, enc_bwd_drop;  // layer >= 1 inputs
    std::vector<Matrix> enc_states;  // per sentence, H x src_len[b]

    // Decoder, [t].
    std::vector<std::vector<LstmStepCache>> dec;  // [t][layer]
    std::vector<std::vector<Matrix>> dec_drop;    // [t][layer], layer >= 1
    std::vector<Matrix> attn_u;                   // W_a^T h_top
    std::vector<std::vector<Vector>> alignment;   // [t][b]
    std::vector<Matrix> concat;                   // [c; h]
    std::vector<Matrix> htilde;
    std::vector<Matrix> probs;
    std::vector<Matrix> case_probs;
  };

  ForwardResult forward_loss(const ModelParams& params,
                             const std::vector<SequencePair>& batch,
                             const ForwardOptions& options)
  {
    const auto& cfg = params.config;
    if (batch.empty())
      throw InputError("forward_loss: empty batch");
    if (options.dropout < 0 || options.dropout >= 1)
      throw ConfigError("dropout must be in [0, 1)");
    for (const auto& pair : batch)
    {
      check_sequence(pair.source, cfg.src_vocab, options.max_length, "source");
      check_sequence(pair.target, cfg.tgt_vocab, options.max_length, "target");
    }

    const std::size_t B = batch.size();
    const auto H = idx(cfg.hidden);
    const auto E = idx(cfg.embedding_dim);
    const auto C = idx(cfg.case_dim);
    const std::size_t L = cfg.layers;
    Rng rng(options.seed);
    const bool use_dropout = options.dropout > 0;

    auto cache = std::make_shared<ForwardCache>();
    auto& fc = *cache;
    fc.batch = B;
    fc.case_weight = cfg.case_loss_weight;
    for (const auto& pair : batch)
    {
      fc.src_len.push_back(pair.source.size() + 1);
      fc.tgt_len.push_back(pair.target.size() + 1);
    }
    const std::size_t J = fc.src_steps = *std::max_element(fc.src_len.begin(), fc.src_len.end());
    const std::size_t I = fc.tgt_steps = *std::max_element(fc.tgt_len.begin(), fc.tgt_len.end());

    fc.src_tok.assign(J, std::vector<std::int32_t>(B, Vocabulary::pad_id));
    fc.src_case.assign(J, std::vector<std::int32_t>(B, case_none));
    std::vector<RowVector> src_mask(J, RowVector::Zero(idx(B)));
    fc.dec_in_tok.assign(I, std::vector<std::int32_t>(B, Vocabulary::pad_id));
    fc.dec_in_case.assign(I, std::vector<std::int32_t>(B, case_none));
    fc.dec_out_tok.assign(I, std::vector<std::int32_t>(B, -1));
    fc.dec_out_case.assign(I, std::vector<std::int32_t>(B, case_none));
    std::size_t num_tokens = 0;
    for (std::size_t b = 0; b < B; ++b)
    {
      const auto& src = batch[b].source;
      const auto& tgt = batch[b].target;
      for (std::size_t t = 0; t < src.size(); ++t)
      {
        fc.src_tok[t][b] = src.ids[t];
        fc.src_case[t][b] = case_at(src, t);
      }
      fc.src_tok[src.size()][b] = Vocabulary::eos_id;
      for (std::size_t t = 0; t <= src.size(); ++t)
        src_mask[t](idx(b)) = 1.0;

      fc.dec_in_tok[0][b] = Vocabulary::bos_id;
      for (std::size_t t = 0; t < tgt.size(); ++t)
      {
        fc.dec_in_tok[t + 1][b] = tgt.ids[t];
        fc.dec_in_case[t + 1][b] = case_at(tgt, t);
        fc.dec_out_tok[t][b] = tgt.ids[t];
        fc.dec_out_case[t][b] = case_at(tgt, t);
      }
      fc.dec_out_tok[tgt.size()][b] = Vocabulary::eos_id;
      num_tokens += tgt.size() + 1;
    }
    fc.scale = 1.0 / static_cast<double>(num_tokens);

    // Encoder.
    std::vector<Matrix> x0(J, Matrix(E + C, idx(B)));
    for (std::size_t t = 0; t < J; ++t)
      for (std::size_t b = 0; b < B; ++b)
        embed(params.src_embedding, params.src_case_embedding, fc.src_tok[t][b],
              fc.src_case[t][b], x0[t].col(idx(b)));

    fc.enc_fwd.assign(L, std::vector<LstmStepCache>(J));
    fc.enc_bwd.assign(L, std::vector<LstmStepCache>(J));
    fc.enc_fwd_drop.assign(L, std::vector<Matrix>(J));
    fc.enc_bwd_drop.assign(L, std::vector<Matrix>(J));
    std::vector<Matrix> final_h(L), final_c(L);
    for (std::size_t l = 0; l < L; ++l)
    {
      for (int dir = 0; dir < 2; ++dir)
      {
        auto& steps = dir == 0 ? fc.enc_fwd[l] : fc.enc_bwd[l];
        auto& drops = dir == 0 ? fc.enc_fwd_drop[l] : fc.enc_bwd_drop[l];
        const auto& below = l == 0 ? fc.enc_fwd[0] : (dir == 0 ? fc.enc_fwd[l - 1] : fc.enc_bwd[l - 1]);
        const auto& stack = dir == 0 ? params.encoder_fwd[l] : params.encoder_bwd[l];
        Matrix h = Matrix::Zero(H, idx(B)), c = Matrix::Zero(H, idx(B));
        for (std::size_t k = 0; k < J; ++k)
        {
          const std::size_t t = dir == 0 ? k : J - 1 - k;
          Matrix x;
          if (l == 0)
            x = x0[t];
          else if (use_dropout)
          {
            drops[t] = dropout_mask(rng, H, idx(B), options.dropout);
            x = (below[t].h.array() * drops[t].array()).matrix();
          }
          else
            x = below[t].h;
          lstm_forward(stack, x, h, c, &src_mask[t], steps[t]);
          h = steps[t].h;
          c = steps[t].c;
        }
        if (dir == 0)
        {
          final_h[l] = h;
          final_c[l] = c;
        }
        else
        {
          final_h[l] += h;
          final_c[l] += c;
        }
      }
    }
    fc.enc_states.resize(B);
    for (std::size_t b = 0; b < B; ++b)
    {
      auto& states = fc.enc_states[b];
      states.resize(H, idx(fc.src_len[b]));
      for (std::size_t t = 0; t < fc.src_len[b]; ++t)
        states.col(idx(t)) = fc.enc_fwd[L - 1][t].h.col(idx(b)) + fc.enc_bwd[L - 1][t].h.col(idx(b));
    }

    // Decoder.
    fc.dec.assign(I, std::vector<LstmStepCache>(L));
    fc.dec_drop.assign(I, std::vector<Matrix>(L));
    fc.attn_u.resize(I);
    fc.alignment.assign(I, std::vector<Vector>(B));
    fc.concat.resize(I);
    fc.htilde.resize(I);
    fc.probs.resize(I);
    fc.case_probs.resize(I);
    std::vector<Matrix> h = final_h, c = final_c;
    Matrix feed = Matrix::Zero(H, idx(B));
    double word_nll = 0;
    double case_nll = 0;
    for (std::size_t t = 0; t < I; ++t)
    {
      Matrix x(params.decoder[0].input_dim(), idx(B));
      for (std::size_t b = 0; b < B; ++b)
        embed(params.tgt_embedding, params.tgt_case_embedding, fc.dec_in_tok[t][b],
              fc.dec_in_case[t][b], x.col(idx(b)).head(E + C));
      if (cfg.input_feed)
        x.bottomRows(H) = feed;
      for (std::size_t l = 0; l < L; ++l)
      {
        if (l > 0)
        {
          if (use_dropout)
          {
            fc.dec_drop[t][l] = dropout_mask(rng, H, idx(B), options.dropout);
            x = (fc.dec[t][l - 1].h.array() * fc.dec_drop[t][l].array()).matrix();
          }
          else
            x = fc.dec[t][l - 1].h;
        }
        lstm_forward(params.decoder[l], x, h[l], c[l], nullptr, fc.dec[t][l]);
        h[l] = fc.dec[t][l].h;
        c[l] = fc.dec[t][l].c;
      }
      const Matrix& top = h[L - 1];
      fc.attn_u[t] = params.attn_score.transpose() * top;
      Matrix& concat = fc.concat[t];
      concat.resize(2 * H, idx(B));
      concat.bottomRows(H) = top;
      for (std::size_t b = 0; b < B; ++b)
      {
        const Matrix& states = fc.enc_states[b];
        const Vector scores = states.transpose() * fc.attn_u[t].col(idx(b));
        fc.alignment[t][b] = softmax(scores);
        concat.col(idx(b)).head(H) = states * fc.alignment[t][b];
      }
      fc.htilde[t] = (params.attn_combine * concat).array().tanh().matrix();
      feed = fc.htilde[t];

      Matrix logits = params.out_weight * fc.htilde[t];
      logits.colwise() += params.out_bias.col(0);
      Matrix log_probs;
      softmax_columns(logits, fc.probs[t], log_probs);
      Matrix case_logits = params.case_weight * fc.htilde[t];
      case_logits.colwise() += params.case_bias.col(0);
      Matrix case_log_probs;
      softmax_columns(case_logits, fc.case_probs[t], case_log_probs);
      for (std::size_t b = 0; b < B; ++b)
      {
        const auto y = fc.dec_out_tok[t][b];
        if (y < 0)
          continue;
        word_nll -= log_probs(y, idx(b));
        case_nll -= case_log_probs(fc.dec_out_case[t][b], idx(b));
      }
    }

    ForwardResult result;
    result.word_nll_sum = word_nll;
    result.case_nll_sum = case_nll;
    result.num_tokens = num_tokens;
    result.loss = (word_nll + cfg.case_loss_weight * case_nll) * fc.scale;
    if (!std::isfinite(result.loss))
      throw NumericError("non-finite training loss");
    if (options.keep_cache)
      result.cache = std::move(cache);
    return result;
  }

  ModelParams backward(const ForwardResult& forward, const ModelParams& params)
  {
    if (!forward.cache)
      throw ConfigError("backward: forward pass was run without a cache");
    const auto& fc = *forward.cache;
    const auto& cfg = params.config;
    const std::size_t B = fc.batch;
    const std::size_t J = fc.src_steps;
    const std::size_t I = fc.tgt_steps;
    const std::size_t L = cfg.layers;
    const auto H = idx(cfg.hidden);
    const auto E = idx(cfg.embedding_dim);
    const auto C = idx(cfg.case_dim);

    ModelParams grad = params.zeros_like();
    std::vector<Matrix> d_states(B);
    for (std::size_t b = 0; b < B; ++b)
      d_states[b] = Matrix::Zero(H, idx(fc.src_len[b]));

    std::vector<Matrix> dh_next(L, Matrix::Zero(H, idx(B)));
    std::vector<Matrix> dc_next(L, Matrix::Zero(H, idx(B)));
    Matrix d_feed = Matrix::Zero(H, idx(B));
    Matrix dx, dh_prev, dc_prev;

    for (std::size_t t = I; t-- > 0;)
    {
      Matrix d_logits = fc.probs[t];
      Matrix d_case_logits = fc.case_probs[t];
      for (std::size_t b = 0; b < B; ++b)
      {
        const auto y = fc.dec_out_tok[t][b];
        if (y < 0)
        {
          d_logits.col(idx(b)).setZero();
          d_case_logits.col(idx(b)).setZero();
          continue;
        }
        d_logits(y, idx(b)) -= 1.0;
        d_case_logits(fc.dec_out_case[t][b], idx(b)) -= 1.0;
      }
      d_logits *= fc.scale;
      d_case_logits *= fc.scale * fc.case_weight;

      const Matrix& htilde = fc.htilde[t];
      grad.out_weight.noalias() += d_logits * htilde.transpose();
      grad.out_bias.col(0) += d_logits.rowwise().sum();
      grad.case_weight.noalias() += d_case_logits * htilde.transpose();
      grad.case_bias.col(0) += d_case_logits.rowwise().sum();

      Matrix d_htilde = params.out_weight.transpose() * d_logits;
      d_htilde.noalias() += params.case_weight.transpose() * d_case_logits;
      d_htilde += d_feed;
      const Matrix d_pre = (d_htilde.array() * (1.0 - htilde.array() * htilde.array())).matrix();
      grad.attn_combine.noalias() += d_pre * fc.concat[t].transpose();
      const Matrix d_concat = params.attn_combine.transpose() * d_pre;

      Matrix d_top = d_concat.bottomRows(H);
      Matrix d_u(H, idx(B));
      for (std::size_t b = 0; b < B; ++b)
      {
        const Matrix& states = fc.enc_states[b];
        const Vector& a = fc.alignment[t][b];
        const Vector dc = d_concat.col(idx(b)).head(H);
        d_states[b].noalias() += dc * a.transpose();
        const Vector da = states.transpose() * dc;
        const Vector ds = (a.array() * (da.array() - a.dot(da))).matrix();
        d_states[b].noalias() += fc.attn_u[t].col(idx(b)) * ds.transpose();
        d_u.col(idx(b)) = states * ds;
      }
      // u = W_a^T h_top
      d_top.noalias() += params.attn_score * d_u;
      grad.attn_score.noalias() += fc.dec[t][L - 1].h * d_u.transpose();

      Matrix d_out = d_top;
      for (std::size_t l = L; l-- > 0;)
      {
        const Matrix dh = d_out + dh_next[l];
        lstm_backward(params.decoder[l], fc.dec[t][l], dh, dc_next[l], grad.decoder[l],
                      dx, dh_prev, dc_prev);
        dh_next[l] = dh_prev;
        dc_next[l] = dc_prev;
        if (l > 0)
        {
          if (fc.dec_drop[t][l].size() > 0)
            d_out = (dx.array() * fc.dec_drop[t][l].array()).matrix();
          else
            d_out = dx;
        }
      }
      // dx now belongs to layer 0: [embedding; case embedding; feed].
      for (std::size_t b = 0; b < B; ++b)
      {
        grad.tgt_embedding.row(fc.dec_in_tok[t][b]) += dx.col(idx(b)).head(E).transpose();
        grad.tgt_case_embedding.row(fc.dec_in_case[t][b]) += dx.col(idx(b)).segment(E, C).transpose();
      }
      if (cfg.input_feed)
        d_feed = dx.bottomRows(H);
    }

    // Encoder. dh_next/dc_next hold the gradient of the decoder's initial
    // state, i.e. of both directions' final states.
    std::vector<Matrix> d_top(J, Matrix::Zero(H, idx(B)));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < fc.src_len[b]; ++t)
        d_top[t].col(idx(b)) = d_states[b].col(idx(t));

    for (int dir = 0; dir < 2; ++dir)
    {
      const auto& steps = dir == 0 ? fc.enc_fwd : fc.enc_bwd;
      const auto& drops = dir == 0 ? fc.enc_fwd_drop : fc.enc_bwd_drop;
      const auto& stack = dir == 0 ? params.encoder_fwd : params.encoder_bwd;
      auto& gstack = dir == 0 ? grad.encoder_fwd : grad.encoder_bwd;
      std::vector<Matrix> d_out = d_top;
      for (std::size_t l = L; l-- > 0;)
      {
        Matrix dh_carry = dh_next[l];
        Matrix dc_carry = dc_next[l];
        std::vector<Matrix> d_below(J);
        for (std::size_t k = J; k-- > 0;)
        {
          const std::size_t t = dir == 0 ? k : J - 1 - k;
          const Matrix dh = d_out[t] + dh_carry;
          lstm_backward(stack[l], steps[l][t], dh, dc_carry, gstack[l], dx, dh_prev, dc_prev);
          dh_carry = dh_prev;
          dc_carry = dc_prev;
          if (l == 0)
          {
            for (std::size_t b = 0; b < B; ++b)
            {
              grad.src_embedding.row(fc.src_tok[t][b]) += dx.col(idx(b)).head(E).transpose();
              grad.src_case_embedding.row(fc.src_case[t][b]) += dx.col(idx(b)).segment(E, C).transpose();
            }
          }
          else if (drops[l][t].size() > 0)
            d_below[t] = (dx.array() * drops[l][t].array()).matrix();
          else
            d_below[t] = dx;
        }
        if (l > 0)
          d_out = std::move(d_below);
      }
    }

    if (!grad.all_finite())
      throw NumericError("non-finite gradient");
    return grad;
  }

}
