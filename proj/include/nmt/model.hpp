#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nmt
{

  using Matrix = Eigen::MatrixXd;
  using Vector = Eigen::VectorXd;
  using RowVector = Eigen::RowVectorXd;

  inline constexpr std::size_t default_max_length = 80;

  struct ModelConfig
  {
    std::size_t src_vocab = 0;
    std::size_t tgt_vocab = 0;
    std::size_t embedding_dim = 500;
    std::size_t case_dim = 8;
    std::size_t hidden = 1000;
    std::size_t layers = 4;
    bool input_feed = true;
    double case_loss_weight = 1.0;

    // Throws ConfigError on zero sizes.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
  };

  // One LSTM layer. Gate blocks in `weight` rows: input, forget, output,
  // candidate; columns: [x; h_prev].
  struct LstmLayerParams
  {
    Matrix weight;  // 4H x (D + H)
    Matrix bias;    // 4H x 1

    std::size_t hidden() const
    {
      return static_cast<std::size_t>(weight.rows() / 4);
    }
    std::size_t input_dim() const
    {
      return static_cast<std::size_t>(weight.cols()) - hidden();
    }
  };

  struct ModelParams
  {
    ModelConfig config;
    Matrix src_embedding;       // Vs x E
    Matrix src_case_embedding;  // 5 x Ec
    Matrix tgt_embedding;       // Vt x E
    Matrix tgt_case_embedding;  // 5 x Ec
    std::vector<LstmLayerParams> encoder_fwd;
    std::vector<LstmLayerParams> encoder_bwd;
    std::vector<LstmLayerParams> decoder;
    Matrix attn_score;    // W_a, H x H
    Matrix attn_combine;  // W_c, H x 2H, applied to [context; h]
    Matrix out_weight;    // Vt x H
    Matrix out_bias;      // Vt x 1
    Matrix case_weight;   // 5 x H
    Matrix case_bias;     // 5 x 1

    // Zero-filled parameters with the shapes implied by `config`.
    static ModelParams zeros(const ModelConfig& config);
    // Uniform in [-range, range] from a fixed seed.
    static ModelParams random(const ModelConfig& config, std::uint64_t seed, double range = 0.1);

    ModelParams zeros_like() const
    {
      return zeros(config);
    }

    // Visits every tensor in a fixed order with a stable name.
    void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

    std::size_t num_parameters() const;
    bool all_finite() const;
  };

  bool same_shapes(const ModelParams& a, const ModelParams& b);
  bool bitwise_equal(const ModelParams& a, const ModelParams& b);

  struct Sequence
  {
    std::vector<std::int32_t> ids;
    std::vector<std::int32_t> case_ids;

    std::size_t size() const
    {
      return ids.size();
    }
  };

  struct SequencePair
  {
    Sequence source;
    Sequence target;
  };

  // --- building blocks --------------------------------------------------

  struct LstmStepCache
  {
    Matrix input;  // [x; h_prev], (D + H) x B
    Matrix c_prev;
    Matrix i, f, o, g;
    Matrix c_new;   // unmasked cell state
    Matrix tanh_c;
    Matrix h, c;    // outputs (masked when a mask was given)
    RowVector mask;  // empty when the step is unmasked
  };

  // One batched LSTM step over B columns. Columns whose mask entry is 0 keep
  // their previous (h, c).
  void lstm_forward(const LstmLayerParams& params,
                    const Matrix& x,
                    const Matrix& h_prev,
                    const Matrix& c_prev,
                    const RowVector* mask,
                    LstmStepCache& cache);

  // Accumulates into `grad` and writes input/state gradients.
  void lstm_backward(const LstmLayerParams& params,
                     const LstmStepCache& cache,
                     const Matrix& dh,
                     const Matrix& dc,
                     LstmLayerParams& grad,
                     Matrix& dx,
                     Matrix& dh_prev,
                     Matrix& dc_prev);

  struct LstmState
  {
    Vector h;
    Vector c;
  };

  LstmState lstm_step(const LstmLayerParams& params,
                      const Vector& x,
                      const Vector& h_prev,
                      const Vector& c_prev);

  struct AttentionResult
  {
    Vector alignment;  // a_t(s), sums to 1
    Vector context;    // sum_s a_t(s) h_s
    Vector scores;     // h_t^T W_a h_s
  };

  // Softmax over s of h^T W_a h_s and the alignment-weighted context.
  AttentionResult attention(const Vector& decoder_state,
                            const Matrix& encoder_states,  // H x J
                            const Matrix& score_matrix);

  // Numerically stable softmax of a logit vector.
  Vector softmax(const Vector& logits);

  // --- encoder / decoder -------------------------------------------------

  struct EncoderOutput
  {
    Matrix states;                 // H x (J + 1), forward + backward top outputs
    std::vector<Vector> final_h;   // per layer, forward final + backward final
    std::vector<Vector> final_c;
  };

  // Encodes s_1..s_J followed by <eos>. Throws InputError on an out-of-range
  // id or an empty source.
  EncoderOutput encode(const ModelParams& params, const Sequence& source);

  struct DecoderState
  {
    std::vector<Vector> h;  // per layer
    std::vector<Vector> c;
    Vector feed;            // previous attentional hidden state
  };

  DecoderState initial_decoder_state(const ModelParams& params, const EncoderOutput& encoded);

  struct StepOutput
  {
    Vector log_probs;       // over the target vocabulary
    Vector case_log_probs;  // over the case factors
    Vector alignment;
    DecoderState state;
  };

  // Feeds the previous target token and case factor and predicts the next.
  StepOutput decode_step(const ModelParams& params,
                         const EncoderOutput& encoded,
                         const DecoderState& state,
                         std::int32_t prev_token,
                         std::int32_t prev_case);

  // --- training ------------------------------------------------------------

  struct ForwardCache;

  struct ForwardResult
  {
    double loss = 0;            // (word NLL + w * case NLL) / num_tokens
    double word_nll_sum = 0;    // nats, summed over target tokens
    double case_nll_sum = 0;
    std::size_t num_tokens = 0; // target tokens including <eos>
    std::shared_ptr<ForwardCache> cache;

    double word_nll_mean() const
    {
      return num_tokens == 0 ? 0.0 : word_nll_sum / static_cast<double>(num_tokens);
    }
  };

  struct ForwardOptions
  {
    double dropout = 0.0;
    std::uint64_t seed = 0;
    std::size_t max_length = default_max_length;
    bool keep_cache = true;
  };

  // Teacher-forced loss of a batch. Throws InputError when a sequence is
  // empty or longer than max_length, NumericError on non-finite values.
  ForwardResult forward_loss(const ModelParams& params,
                             const std::vector<SequencePair>& batch,
                             const ForwardOptions& options = {});

  // Exact gradient of ForwardResult::loss with respect to every parameter.
  ModelParams backward(const ForwardResult& forward, const ModelParams& params);

}
