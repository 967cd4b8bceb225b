#include "spedit/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spedit/checkpoint.hpp"
#include "spedit/errors.hpp"

namespace spedit {

using nn::Mat;
using nn::Tensor;

void FlowConfig::validate() const {
    if (sigma_min <= 0.0 || sigma_min > 0.1)
        throw ConfigError("sigma_min outside (0, 0.1]; the anchored field divides by "
                          "max(1 - (1 - sigma) t, sigma)");
    if (ode_steps < 1) throw ConfigError("ode_steps must be >= 1");
    if (blocks < 1 || width < 1 || kernel < 1 || kernel % 2 == 0)
        throw ConfigError("degenerate flow network spec");
    if (downsample < 1 || n_bins < 1 || v_s < 1) throw ConfigError("degenerate flow config");
    if (mel_scale <= 0) throw ConfigError("mel_scale must be positive");
}

Mat ot_path(const Mat& z0, const Mat& z1, double t, double sigma_min) {
    if (z0.rows() != z1.rows() || z0.cols() != z1.cols())
        throw ShapeError("ot_path shape mismatch");
    if (t < 0.0 || t > 1.0) throw RangeError("t outside [0, 1]");
    return (1.0 - (1.0 - sigma_min) * t) * z0 + t * z1;
}

Mat ot_target_field(const Mat& z0, const Mat& z1, double sigma_min) {
    if (z0.rows() != z1.rows() || z0.cols() != z1.cols())
        throw ShapeError("ot_target_field shape mismatch");
    return z1 - (1.0 - sigma_min) * z0;
}

Mat pad_frames(const Mat& m, Eigen::Index rows, double fill) {
    Mat out(rows, m.cols());
    if (m.rows() == 0) {
        out.setConstant(fill);
        return out;
    }
    Eigen::Index keep = std::min(m.rows(), rows);
    out.topRows(keep) = m.topRows(keep);
    for (Eigen::Index r = keep; r < rows; ++r) out.row(r) = m.row(m.rows() - 1);
    return out;
}

FlowCondition build_condition(const SpeakerEmbedding& v, const SemanticTokenSeq& mu_x,
                              const SemanticTokenSeq& mu_y, const Mat& x1,
                              const FlowConfig& cfg) {
    if (mu_x.ids.empty() || mu_y.ids.empty())
        throw RangeError("condition requires non-empty token sequences");
    if (x1.cols() != cfg.n_bins) throw ShapeError("x1 bin count mismatch");
    const Eigen::Index r = cfg.downsample;
    const Eigen::Index tx = r * static_cast<Eigen::Index>(mu_x.ids.size());
    const Eigen::Index ty = r * static_cast<Eigen::Index>(mu_y.ids.size());
    // x1 frame count must be consistent with the token rate: ceil(T / r) tokens.
    if (x1.rows() > tx || x1.rows() <= tx - r)
        throw ShapeError("x1 frame count inconsistent with token count");

    FlowCondition cond;
    cond.speaker = v;
    cond.tokens.ids = mu_x.ids;
    cond.tokens.ids.insert(cond.tokens.ids.end(), mu_y.ids.begin(), mu_y.ids.end());
    cond.tokens.token_rate_hz = mu_x.token_rate_hz;
    cond.boundary = tx;
    cond.guide = Mat::Constant(tx + ty, cfg.n_bins, cfg.mask_fill);
    cond.guide.topRows(tx) = pad_frames(x1, tx, cfg.mask_fill);
    return cond;
}

double cfm_loss(const FlowBatch& batch, const VectorFieldFn& field, double sigma_min) {
    Mat phi = ot_path(batch.z0, batch.z1, batch.t, sigma_min);
    Mat omega = ot_target_field(batch.z0, batch.z1, sigma_min);
    Mat nu = field(phi, batch.t, batch.cond);
    if (nu.rows() != omega.rows() || nu.cols() != omega.cols())
        throw ShapeError("field output shape mismatch");
    return (omega - nu).array().abs().mean();
}

FlowModel::FlowModel(const FlowConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int w = cfg_.width;
    const int in_ch = 2 * cfg_.n_bins + cfg_.token_emb_dim;
    std::mt19937_64 rng(cfg_.seed);
    const double s = 0.05;

    auto add_p = [&](const std::string& name, Mat m) {
        params_.emplace_back(name, std::move(m));
    };
    add_p("tok_emb", nn::randn(cfg_.v_s, cfg_.token_emb_dim, 0.1, rng));
    add_p("w_in", nn::randn(in_ch, w, s, rng));
    add_p("b_in", Mat::Zero(1, w));
    for (int b = 0; b < cfg_.blocks; ++b) {
        std::string pre = "b" + std::to_string(b) + ".";
        add_p(pre + "conv1", nn::randn(w * cfg_.kernel, w, s / std::sqrt(cfg_.kernel), rng));
        add_p(pre + "c1b", Mat::Zero(1, w));
        add_p(pre + "wt", nn::randn(cfg_.time_feat_dim, w, s, rng));
        add_p(pre + "wv", nn::randn(cfg_.spk_dim, w, s, rng));
        add_p(pre + "conv2", nn::randn(w * cfg_.kernel, w, s / std::sqrt(cfg_.kernel), rng));
        add_p(pre + "c2b", Mat::Zero(1, w));
    }
    add_p("ln_g", Mat::Ones(1, w));
    add_p("ln_b", Mat::Zero(1, w));
    add_p("w_out", nn::randn(w, cfg_.n_bins, s, rng));
    add_p("b_out", Mat::Zero(1, cfg_.n_bins));
}

nn::Parameter& FlowModel::p(const std::string& name) {
    for (auto& prm : params_)
        if (prm.name == name) return prm;
    throw ConfigError("unknown parameter: " + name);
}

std::vector<nn::Parameter*> FlowModel::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& prm : params_) out.push_back(&prm);
    return out;
}

namespace {

Eigen::RowVectorXd time_features(double t, int dim) {
    Eigen::RowVectorXd f(dim);
    for (int k = 0; k < dim / 2; ++k) {
        f(2 * k) = std::sin(2.0 * M_PI * (k + 1) * t);
        f(2 * k + 1) = std::cos(2.0 * M_PI * (k + 1) * t);
    }
    if (dim % 2) f(dim - 1) = t;
    return f;
}

}  // namespace

Tensor FlowModel::anchor(const Tensor& phi, double t, const FlowCondition& cond) {
    const Eigen::Index tz = cond.guide.rows();
    if (phi.rows() != tz || phi.cols() != cfg_.n_bins)
        throw ShapeError("state shape disagrees with condition");
    if (static_cast<Eigen::Index>(cond.tokens.ids.size()) * cfg_.downsample != tz)
        throw ShapeError("token count times downsample must equal frame count");
    if (cond.boundary <= 0 || cond.boundary >= tz)
        throw ShapeError("region boundary outside (0, T_Z)");
    if (cond.speaker.v.size() != cfg_.spk_dim) throw ShapeError("speaker dimension mismatch");

    // Upsample token ids to frame rate.
    std::vector<int> frame_tokens(tz);
    for (Eigen::Index f = 0; f < tz; ++f) {
        int id = cond.tokens.ids[f / cfg_.downsample];
        if (id < 0 || id >= cfg_.v_s) throw RangeError("token id outside codebook");
        frame_tokens[f] = id;
    }

    Tensor tok = nn::gather_rows(nn::leaf(p("tok_emb")), frame_tokens);
    Tensor h = nn::concat_cols({phi, nn::constant(cond.guide), tok});
    h = nn::add_rowvec(nn::matmul(h, nn::leaf(p("w_in"))), nn::leaf(p("b_in")));

    Tensor tf = nn::constant(time_features(t, cfg_.time_feat_dim));
    Tensor spk = nn::constant(cond.speaker.v.transpose());
    for (int b = 0; b < cfg_.blocks; ++b) {
        std::string pre = "b" + std::to_string(b) + ".";
        Tensor u = nn::add_rowvec(
            nn::matmul(nn::unfold_rows(h, cfg_.kernel), nn::leaf(p(pre + "conv1"))),
            nn::leaf(p(pre + "c1b")));
        u = nn::add_rowvec(u, nn::matmul(tf, nn::leaf(p(pre + "wt"))));
        u = nn::add_rowvec(u, nn::matmul(spk, nn::leaf(p(pre + "wv"))));
        u = nn::relu(u);
        u = nn::add_rowvec(
            nn::matmul(nn::unfold_rows(u, cfg_.kernel), nn::leaf(p(pre + "conv2"))),
            nn::leaf(p(pre + "c2b")));
        h = nn::add(h, u);
    }
    h = nn::layer_norm(h, nn::leaf(p("ln_g")), nn::leaf(p("ln_b")));
    return nn::add_rowvec(nn::matmul(h, nn::leaf(p("w_out"))), nn::leaf(p("b_out")));
}

Mat FlowModel::field(const Mat& z, double t, const FlowCondition& cond) {
    Mat a = anchor(nn::constant(z), t, cond).value();
    double denom = 1.0 - (1.0 - cfg_.sigma_min) * t;
    denom = std::max(denom, cfg_.sigma_min > 0 ? cfg_.sigma_min : 1e-8);
    return (a - (1.0 - cfg_.sigma_min) * z) / denom;
}

Tensor FlowModel::loss_graph(const FlowBatch& batch) {
    // Anchored regression objective: since the target field satisfies
    // omega = (Z1 - (1 - sigma) phi_t) / (1 - (1 - sigma) t), matching the
    // anchor to Z1 matches the field, but without the 1/(1 - (1 - sigma) t)
    // amplification that otherwise lets draws near t = 1 dominate training.
    Mat phi = ot_path(batch.z0, batch.z1, batch.t, cfg_.sigma_min);
    Tensor a = anchor(nn::constant(phi), batch.t, batch.cond);
    return nn::l1_loss(a, batch.z1);
}

Mat FlowModel::sample(const FlowCondition& cond, int n_steps, uint64_t seed) {
    if (n_steps < 1) throw ConfigError("need at least one ODE step");
    const Eigen::Index tz = cond.guide.rows();
    std::mt19937_64 rng(seed);
    Mat z = nn::randn(tz, cfg_.n_bins, 1.0, rng);
    const double dt = 1.0 / n_steps;
    for (int n = 0; n < n_steps; ++n) {
        double t = static_cast<double>(n) / n_steps;
        z += dt * field(z, t, cond);
    }
    return z.bottomRows(tz - cond.boundary);
}

FlowTrainResult train_flow(FlowModel& flow, const std::vector<FlowExample>& examples,
                           const TrainHyper& hyper, uint64_t seed) {
    if (examples.empty()) throw ConfigError("no flow training examples");
    auto params = flow.parameters();
    nn::Adam adam({hyper.lr, 0.9, 0.999, 1e-8, hyper.warmup_steps});

    // Per-example seeded draw streams keep t / noise sampling reproducible
    // regardless of batch schedule.
    std::vector<std::mt19937_64> streams;
    for (std::size_t i = 0; i < examples.size(); ++i)
        streams.emplace_back(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    std::mt19937_64 order_rng(seed);

    FlowTrainResult result;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::vector<std::size_t> order(examples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), order_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            std::size_t bs = std::min<std::size_t>(hyper.batch, order.size() - start);
            for (auto* prm : params) prm->zero_grad();
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < bs; ++b) {
                std::size_t idx = order[start + b];
                auto& rng = streams[idx];
                FlowBatch batch;
                batch.cond = examples[idx].cond;
                batch.z1 = examples[idx].z1;
                batch.z0 = nn::randn(batch.z1.rows(), batch.z1.cols(), 1.0, rng);
                batch.t = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                Tensor l = flow.loss_graph(batch);
                batch_loss += l.value()(0, 0);
                nn::backward(l);
            }
            for (auto* prm : params) prm->grad /= static_cast<double>(bs);
            double lr = adam.lr_at(adam.steps_taken());
            adam.step(params);
            ++result.steps;
            result.log.push_back({result.steps, batch_loss / bs, lr});
            epoch_loss += batch_loss;
        }
        result.epochs_run = epoch + 1;
        result.final_epoch_loss = epoch_loss / examples.size();
    }
    return result;
}

namespace {

nlohmann::json flow_config_to_json(const FlowConfig& c) {
    return {{"sigma_min", c.sigma_min}, {"blocks", c.blocks},   {"width", c.width},
            {"kernel", c.kernel},       {"token_emb_dim", c.token_emb_dim},
            {"time_feat_dim", c.time_feat_dim}, {"n_bins", c.n_bins},
            {"spk_dim", c.spk_dim},     {"downsample", c.downsample},
            {"ode_steps", c.ode_steps}, {"mask_fill", c.mask_fill},
            {"mel_mean", c.mel_mean},   {"mel_scale", c.mel_scale},
            {"v_s", c.v_s},             {"seed", c.seed}};
}

FlowConfig flow_config_from_json(const nlohmann::json& j) {
    FlowConfig c;
    c.sigma_min = j.at("sigma_min").get<double>();
    c.blocks = j.at("blocks").get<int>();
    c.width = j.at("width").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.token_emb_dim = j.at("token_emb_dim").get<int>();
    c.time_feat_dim = j.at("time_feat_dim").get<int>();
    c.n_bins = j.at("n_bins").get<int>();
    c.spk_dim = j.at("spk_dim").get<int>();
    c.downsample = j.at("downsample").get<int>();
    c.ode_steps = j.at("ode_steps").get<int>();
    c.mask_fill = j.at("mask_fill").get<double>();
    c.mel_mean = j.at("mel_mean").get<double>();
    c.mel_scale = j.at("mel_scale").get<double>();
    c.v_s = j.at("v_s").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

void save_flow_checkpoint(const std::string& path, FlowModel& flow, int step) {
    nlohmann::json meta;
    meta["format"] = "spedit-flow-v1";
    meta["config"] = flow_config_to_json(flow.config());
    meta["step"] = step;
    auto params = flow.parameters();
    save_checkpoint(path, meta, params);
}

FlowModel load_flow_checkpoint(const std::string& path) {
    nlohmann::json meta = read_checkpoint_meta(path);
    if (meta.value("format", "") != "spedit-flow-v1")
        throw SchemaError(path + ": not a flow checkpoint");
    FlowModel flow(flow_config_from_json(meta.at("config")));
    auto params = flow.parameters();
    load_checkpoint(path, params);
    return flow;
}

}  // namespace spedit
