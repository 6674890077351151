#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gazekit/geometry.hpp"
#include "gazekit/rng.hpp"

namespace gaze {

enum class EncoderVariant { PreLN, PostLN, B2T };
enum class PositionalEncoding { Learned, Sinusoidal };
enum class RunMode { Training, Inference };

struct HyperParams {
    int d_model = 1024;
    int d_ff = 2048;
    int n_heads = 8;
    int n_layers = 6;
    int n_tokens = 5; // class token + feature tokens
    double dropout_attn = 0.1;
    double dropout_ff = 0.1;
    EncoderVariant variant = EncoderVariant::B2T;
    PositionalEncoding positional = PositionalEncoding::Learned;

    int head_dim() const { return d_model / n_heads; }
    void validate() const; // throws ConfigError
};

/// Feature tokens, one row per token (n_tokens - 1 rows of d_model).
using TokenSet = Eigen::MatrixXd;

struct LayerNormParams {
    Eigen::VectorXd gain;
    Eigen::VectorXd bias;
};

struct EncoderLayerParams {
    Eigen::MatrixXd wq, wk, wv, wo;      // d_model x d_model
    LayerNormParams ln1, ln2;
    Eigen::MatrixXd ff_w1;               // d_model x d_ff
    Eigen::VectorXd ff_b1;
    Eigen::MatrixXd ff_w2;               // d_ff x d_model
    Eigen::VectorXd ff_b2;
};

struct FusionParams {
    Eigen::VectorXd class_token;   // d_model, zero-initialized
    Eigen::MatrixXd positional;    // n_tokens x d_model (learned encoding)
    std::vector<EncoderLayerParams> layers;
    Eigen::MatrixXd head_w;        // d_model x 2
    Eigen::Vector2d head_b;

    /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) everywhere except the class
    /// token, which starts at zero
    static FusionParams init(const HyperParams& hp, std::uint64_t seed);
    static FusionParams zeros(const HyperParams& hp);
};

/// Ablation substitute for the transformer (no class token, no positional
/// encoding): dropout -> linear -> LN -> ReLU -> dropout -> linear -> LN ->
/// dropout -> linear -> 2.
struct MlpSubstituteParams {
    Eigen::MatrixXd w_in;   // (n_tokens_fed * d_model) x d_ff
    Eigen::VectorXd b_in;
    LayerNormParams ln1;    // d_ff
    Eigen::MatrixXd w_hidden; // d_ff x d_ff
    Eigen::VectorXd b_hidden;
    LayerNormParams ln2;    // d_ff
    Eigen::MatrixXd w_out;  // d_ff x 2
    Eigen::Vector2d b_out;
    double dropout = 0.1;

    static MlpSubstituteParams init(int n_tokens_fed, int d_model, int d_ff, std::uint64_t seed);
    static MlpSubstituteParams zeros(int n_tokens_fed, int d_model, int d_ff);
};

/// Four per-subject scalars applied to subject-independent predictions.
/// The scale is stored centered at zero: effective scale = 1 + scale.
struct SubjectBias {
    double offset_pitch = 0.0;
    double offset_yaw = 0.0;
    double scale_pitch = 0.0; // centered
    double scale_yaw = 0.0;   // centered
};

/// ReLU(W x + b). Throws ShapeMismatchError.
Eigen::VectorXd project_to_token(const Eigen::VectorXd& features, const Eigen::MatrixXd& weights,
                                 const Eigen::VectorXd& bias);

/// Multi-head self-attention: softmax(Q Kh^T / sqrt(d_k)) V per head,
/// concatenated, projected by wo.
Eigen::MatrixXd mhsa_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& layer, int n_heads);

/// One encoder block of the chosen variant, inference mode (no dropout).
Eigen::MatrixXd encoder_block_forward(const Eigen::MatrixXd& x, const EncoderLayerParams& layer,
                                      const HyperParams& hp);

/// Full forward pass: class token + positional encoding, n_layers encoder
/// blocks, class-token readout through the linear head (no activation).
/// Training mode draws dropout masks from rng; Inference ignores it.
/// Throws TokenCountMismatchError when tokens.rows() != n_tokens - 1.
GazeAngles fusion_forward(const TokenSet& tokens, const FusionParams& params, const HyperParams& hp,
                          RunMode mode = RunMode::Inference, Rng* rng = nullptr);

GazeAngles mlp_substitute_forward(const TokenSet& tokens, const MlpSubstituteParams& params,
                                  RunMode mode = RunMode::Inference, Rng* rng = nullptr);

/// g' = i' * (1 + scale) + offset, per axis.
GazeAngles apply_subject_bias(const GazeAngles& prediction, const SubjectBias& bias);

/// Fixed sin/cos positional table (the non-learnable alternative).
Eigen::MatrixXd sinusoidal_positional(int n_tokens, int d_model);

// ---------------------------------------------------------------------------
// Training machinery

struct TrainingSample {
    TokenSet tokens;
    Eigen::Vector2d target; // (pitch, yaw)
};

/// Named view into a parameter tensor; the backbone of flattening,
/// serialization and Adam updates.
struct TensorRef {
    std::string name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorRef> tensor_refs(FusionParams& params);
std::vector<TensorRef> tensor_refs(MlpSubstituteParams& params);

Eigen::VectorXd flatten_params(FusionParams& params);
void unflatten_params(const Eigen::VectorXd& flat, FusionParams& params);
Eigen::VectorXd flatten_params(MlpSubstituteParams& params);
void unflatten_params(const Eigen::VectorXd& flat, MlpSubstituteParams& params);

/// Mean squared error over the batch: (1/M) sum |y_hat - y|^2.
double fusion_batch_loss(const std::vector<TrainingSample>& batch, const FusionParams& params,
                         const HyperParams& hp);
double mlp_batch_loss(const std::vector<TrainingSample>& batch, const MlpSubstituteParams& params);

/// Exact reverse-mode gradients of the batch MSE with respect to every
/// parameter. Returns the loss; gradients land in `grads` (same shapes as
/// the parameters). Dropout is inference-mode (disabled).
double fusion_backward(const std::vector<TrainingSample>& batch, const FusionParams& params,
                       const HyperParams& hp, FusionParams& grads);
double mlp_backward(const std::vector<TrainingSample>& batch, const MlpSubstituteParams& params,
                    MlpSubstituteParams& grads);

/// Central-difference gradient of an arbitrary scalar loss. Throws on eps <= 0.
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& loss,
                                 const Eigen::VectorXd& params, double eps = 1e-5);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
};

/// Standard bias-corrected Adam update on a flat parameter vector.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct FitConfig {
    int epochs = 200;
    double learning_rate = 1e-2;
    double lr_decay = 1.0;     // multiplied into lr every lr_decay_epochs
    int lr_decay_epochs = 10;
    int batch_size = 16;
    std::uint64_t seed = 0;
};

struct FitResult {
    FusionParams params;
    std::vector<double> loss_trace; // mean train MSE per epoch
};

/// Desk-scale MSE training loop with Adam. Throws EmptyDatasetError.
FitResult fit_toy(const std::vector<TrainingSample>& dataset, const HyperParams& hp,
                  const FitConfig& config);

} // namespace gaze
