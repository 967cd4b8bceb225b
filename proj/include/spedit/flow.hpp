#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spedit/features.hpp"
#include "spedit/lm.hpp"
#include "spedit/nn.hpp"

namespace spedit {

struct FlowConfig {
    double sigma_min = 1e-4;
    int blocks = 4;       // residual 1-D conv blocks
    int width = 128;
    int kernel = 3;
    int token_emb_dim = 64;
    int time_feat_dim = 16;  // Fourier features of t
    int n_bins = 80;
    int spk_dim = 80;
    int downsample = 2;  // token rate factor r (frames per token)
    int ode_steps = 10;
    double mask_fill = 0.0;  // masked-target fill, in normalized mel units
    // Affine mel normalization (z = (mel - mean) / scale), fit on training data.
    double mel_mean = 0.0;
    double mel_scale = 1.0;
    int v_s = 64;
    uint64_t seed = 0;

    void validate() const;
};

// Conditioning for the vector field: speaker vector, concatenated token
// sequence, and the guide [X1, masked Y1] with the region boundary.
struct FlowCondition {
    SpeakerEmbedding speaker;
    SemanticTokenSeq tokens;       // [mu_X, mu_Y]
    nn::Mat guide;                 // T_Z x B, Y region filled with mask value
    Eigen::Index boundary = 0;     // T_X, frames
};

struct FlowBatch {
    nn::Mat z0;  // noise sample
    nn::Mat z1;  // clean concatenated mels
    double t = 0.0;
    FlowCondition cond;
};

// phi_t = (1 - (1 - sigma) t) Z0 + t Z1
nn::Mat ot_path(const nn::Mat& z0, const nn::Mat& z1, double t, double sigma_min);
// omega = Z1 - (1 - sigma) Z0, constant in t
nn::Mat ot_target_field(const nn::Mat& z0, const nn::Mat& z1, double sigma_min);

// Repeats the last row (or writes `fill` when empty) so the mel covers
// exactly `rows` frames.
nn::Mat pad_frames(const nn::Mat& m, Eigen::Index rows, double fill);

// Assembles guide + token sequence; x1 is the clean original mel in the same
// (normalized) units the flow operates in.
FlowCondition build_condition(const SpeakerEmbedding& v, const SemanticTokenSeq& mu_x,
                              const SemanticTokenSeq& mu_y, const nn::Mat& x1,
                              const FlowConfig& cfg);

using VectorFieldFn =
    std::function<nn::Mat(const nn::Mat& phi, double t, const FlowCondition& cond)>;

// mean |omega - field(phi_t, t; cond)| over every frame and bin; works for
// any vector field, including the FlowModel's and closed-form oracles.
double cfm_loss(const FlowBatch& batch, const VectorFieldFn& field, double sigma_min);

// Residual conv-block vector field. The network predicts the clean-signal
// anchor; the field is derived as (anchor - (1-sigma) z) / (1 - (1-sigma) t),
// which keeps the regression target bounded across t.
class FlowModel {
public:
    explicit FlowModel(const FlowConfig& cfg);

    const FlowConfig& config() const { return cfg_; }
    FlowConfig& mutable_config() { return cfg_; }
    std::vector<nn::Parameter*> parameters();

    // Graph-building anchor prediction (T_Z x B).
    nn::Tensor anchor(const nn::Tensor& phi, double t, const FlowCondition& cond);
    // Vector field evaluation (no gradients retained).
    nn::Mat field(const nn::Mat& z, double t, const FlowCondition& cond);
    // Graph-building |omega - nu_theta| loss for one batch element.
    nn::Tensor loss_graph(const FlowBatch& batch);

    // Euler integration over the full concatenated sequence from seeded
    // noise; returns the Y region (normalized units), r*|mu_Y| frames.
    nn::Mat sample(const FlowCondition& cond, int n_steps, uint64_t seed);

private:
    FlowConfig cfg_;
    std::vector<nn::Parameter> params_;
    nn::Parameter& p(const std::string& name);
};

struct FlowExample {
    FlowCondition cond;
    nn::Mat z1;  // normalized [X1, Y1]
};

struct FlowTrainResult {
    int steps = 0;
    int epochs_run = 0;
    double final_epoch_loss = 0.0;
    std::vector<TrainLogRow> log;
};

// Deterministic under seed; per-example t and noise draws use per-example
// seeded streams.
FlowTrainResult train_flow(FlowModel& flow, const std::vector<FlowExample>& examples,
                           const TrainHyper& hyper, uint64_t seed);

void save_flow_checkpoint(const std::string& path, FlowModel& flow, int step);
FlowModel load_flow_checkpoint(const std::string& path);

}  // namespace spedit
