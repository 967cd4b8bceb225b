#include "spedit/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "spedit/checkpoint.hpp"
#include "spedit/errors.hpp"

namespace spedit {

using nn::Mat;
using nn::Tensor;

void LMConfig::validate() const {
    if (width % heads != 0) throw ConfigError("model width must be divisible by heads");
    if (layers < 1 || width < 1 || ff_width < 1 || max_len < 8)
        throw ConfigError("degenerate LM config");
    if (vocab.v_s < 1) throw ConfigError("empty semantic vocabulary");
}

namespace {

nlohmann::json lm_config_to_json(const LMConfig& c) {
    return {{"layers", c.layers},       {"width", c.width},
            {"heads", c.heads},         {"ff_width", c.ff_width},
            {"max_len", c.max_len},     {"max_text_pos", c.max_text_pos},
            {"max_speech_pos", c.max_speech_pos}, {"spk_dim", c.spk_dim},
            {"v_s", c.vocab.v_s},       {"seed", c.seed}};
}

LMConfig lm_config_from_json(const nlohmann::json& j) {
    LMConfig c;
    c.layers = j.at("layers").get<int>();
    c.width = j.at("width").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ff_width = j.at("ff_width").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.max_text_pos = j.at("max_text_pos").get<int>();
    c.max_speech_pos = j.at("max_speech_pos").get<int>();
    c.spk_dim = j.at("spk_dim").get<int>();
    c.vocab.v_s = j.at("v_s").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

}  // namespace

EditorLM::EditorLM(const LMConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.width;
    const int v = cfg_.vocab.size();
    std::mt19937_64 rng(cfg_.seed);
    const double s = 0.02;

    auto add_p = [&](const std::string& name, Mat m) {
        params_.emplace_back(name, std::move(m));
    };
    add_p("tok_emb", nn::randn(v, d, s, rng));
    add_p("seg_emb", nn::randn(7, d, s, rng));
    add_p("pos_text", nn::randn(cfg_.max_text_pos, d, s, rng));
    add_p("pos_speech", nn::randn(cfg_.max_speech_pos, d, s, rng));
    add_p("spk_proj", nn::randn(cfg_.spk_dim, d, s, rng));
    for (int l = 0; l < cfg_.layers; ++l) {
        std::string pre = "l" + std::to_string(l) + ".";
        add_p(pre + "ln1_g", Mat::Ones(1, d));
        add_p(pre + "ln1_b", Mat::Zero(1, d));
        for (const char* w : {"wq", "wk", "wv", "wo"})
            add_p(pre + w, nn::randn(d, d, s, rng));
        for (const char* b : {"bq", "bk", "bv", "bo"}) add_p(pre + b, Mat::Zero(1, d));
        add_p(pre + "ln2_g", Mat::Ones(1, d));
        add_p(pre + "ln2_b", Mat::Zero(1, d));
        add_p(pre + "w1", nn::randn(d, cfg_.ff_width, s, rng));
        add_p(pre + "b1", Mat::Zero(1, cfg_.ff_width));
        add_p(pre + "w2", nn::randn(cfg_.ff_width, d, s, rng));
        add_p(pre + "b2", Mat::Zero(1, d));
    }
    add_p("ln_f_g", Mat::Ones(1, d));
    add_p("ln_f_b", Mat::Zero(1, d));
    add_p("w_out", Mat::Zero(d, v));  // zero head: untrained model is uniform
    add_p("b_out", Mat::Zero(1, v));
}

nn::Parameter& EditorLM::p(const std::string& name) {
    for (auto& prm : params_)
        if (prm.name == name) return prm;
    throw ConfigError("unknown parameter: " + name);
}

std::vector<nn::Parameter*> EditorLM::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& prm : params_) out.push_back(&prm);
    return out;
}

std::size_t EditorLM::parameter_count() {
    std::size_t n = 0;
    for (auto& prm : params_) n += static_cast<std::size_t>(prm.value.size());
    return n;
}

Tensor EditorLM::forward(const TokenSequence& seq, const SpeakerEmbedding& spk) {
    const auto T = static_cast<Eigen::Index>(seq.size());
    if (T == 0) throw RangeError("empty sequence");
    if (T > cfg_.max_len) throw RangeError("sequence exceeds max_len (no silent truncation)");
    if (spk.v.size() != cfg_.spk_dim) throw ShapeError("speaker embedding dimension mismatch");
    const int d = cfg_.width;

    std::vector<int> text_pos(T, 0), speech_pos(T, 0), seg_ids(T, 0);
    Mat text_mask = Mat::Zero(T, d), speech_mask = Mat::Zero(T, d), spk_sel = Mat::Zero(T, 1);
    for (Eigen::Index t = 0; t < T; ++t) {
        int id = seq.ids[t];
        if (id < 0 || id >= cfg_.vocab.size()) throw RangeError("id outside unified vocabulary");
        seg_ids[t] = static_cast<int>(seq.segments[t]);
        if (seq.segments[t] == Segment::Text) {
            if (seq.positions[t] >= cfg_.max_text_pos)
                throw RangeError("text position beyond table");
            text_pos[t] = seq.positions[t];
            text_mask.row(t).setOnes();
        } else {
            if (seq.positions[t] >= cfg_.max_speech_pos)
                throw RangeError("speech position beyond table");
            speech_pos[t] = seq.positions[t];
            speech_mask.row(t).setOnes();
        }
        if (seq.segments[t] == Segment::Speaker) spk_sel(t, 0) = 1.0;
    }

    Tensor x = nn::gather_rows(nn::leaf(p("tok_emb")), seq.ids);
    x = nn::add(x, nn::gather_rows(nn::leaf(p("seg_emb")), seg_ids));
    x = nn::add(x, nn::hadamard(nn::gather_rows(nn::leaf(p("pos_text")), text_pos),
                                nn::constant(text_mask)));
    x = nn::add(x, nn::hadamard(nn::gather_rows(nn::leaf(p("pos_speech")), speech_pos),
                                nn::constant(speech_mask)));
    Tensor spk_row = nn::matmul(nn::constant(spk.v.transpose()), nn::leaf(p("spk_proj")));
    x = nn::add(x, nn::matmul(nn::constant(spk_sel), spk_row));

    const int dh = d / cfg_.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < cfg_.layers; ++l) {
        std::string pre = "l" + std::to_string(l) + ".";
        Tensor h = nn::layer_norm(x, nn::leaf(p(pre + "ln1_g")), nn::leaf(p(pre + "ln1_b")));
        Tensor q = nn::add_rowvec(nn::matmul(h, nn::leaf(p(pre + "wq"))), nn::leaf(p(pre + "bq")));
        Tensor k = nn::add_rowvec(nn::matmul(h, nn::leaf(p(pre + "wk"))), nn::leaf(p(pre + "bk")));
        Tensor v = nn::add_rowvec(nn::matmul(h, nn::leaf(p(pre + "wv"))), nn::leaf(p(pre + "bv")));
        std::vector<Tensor> head_outs;
        for (int hd = 0; hd < cfg_.heads; ++hd) {
            Tensor qh = nn::slice_cols(q, hd * dh, dh);
            Tensor kh = nn::slice_cols(k, hd * dh, dh);
            Tensor vh = nn::slice_cols(v, hd * dh, dh);
            Tensor att = nn::causal_softmax(nn::scale(nn::matmul_nt(qh, kh), att_scale));
            head_outs.push_back(nn::matmul(att, vh));
        }
        Tensor att_out = nn::concat_cols(head_outs);
        att_out = nn::add_rowvec(nn::matmul(att_out, nn::leaf(p(pre + "wo"))),
                                 nn::leaf(p(pre + "bo")));
        x = nn::add(x, att_out);

        Tensor h2 = nn::layer_norm(x, nn::leaf(p(pre + "ln2_g")), nn::leaf(p(pre + "ln2_b")));
        Tensor ff = nn::relu(
            nn::add_rowvec(nn::matmul(h2, nn::leaf(p(pre + "w1"))), nn::leaf(p(pre + "b1"))));
        ff = nn::add_rowvec(nn::matmul(ff, nn::leaf(p(pre + "w2"))), nn::leaf(p(pre + "b2")));
        x = nn::add(x, ff);
    }
    x = nn::layer_norm(x, nn::leaf(p("ln_f_g")), nn::leaf(p("ln_f_b")));
    return nn::add_rowvec(nn::matmul(x, nn::leaf(p("w_out"))), nn::leaf(p("b_out")));
}

Mat EditorLM::forward_logprobs(const TokenSequence& seq, const SpeakerEmbedding& spk) {
    Mat logits = forward(seq, spk).value();
    for (Eigen::Index t = 0; t < logits.rows(); ++t)
        logits.row(t) = nn::log_softmax_row(logits.row(t));
    return logits;
}

Tensor EditorLM::loss(const LMTrainExample& ex) {
    Tensor logits = forward(ex.seq, ex.speaker);
    const auto T = static_cast<Eigen::Index>(ex.seq.size());
    std::vector<int> targets(T, 0);
    std::vector<char> mask(T, 0);
    double supervised = 0;
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        if (ex.loss_mask[t + 1]) {
            mask[t] = 1;
            targets[t] = ex.seq.ids[t + 1];
            supervised += 1;
        }
    }
    if (supervised == 0) throw ShapeError("example has no supervised positions");
    return nn::masked_cross_entropy(logits, targets, mask, supervised);
}

double lm_loss_value(const Mat& logprobs, const LMTrainExample& ex) {
    const auto T = static_cast<Eigen::Index>(ex.seq.size());
    if (logprobs.rows() != T) throw ShapeError("logprobs/example length mismatch");
    double loss = 0;
    int count = 0;
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        if (!ex.loss_mask[t + 1]) continue;
        loss -= logprobs(t, ex.seq.ids[t + 1]);
        ++count;
    }
    if (count == 0) throw ShapeError("example has no supervised positions");
    return loss / count;
}

double masked_accuracy(const Mat& logprobs, const LMTrainExample& ex) {
    int hits = 0, count = 0;
    for (Eigen::Index t = 0; t + 1 < static_cast<Eigen::Index>(ex.seq.size()); ++t) {
        if (!ex.loss_mask[t + 1]) continue;
        Eigen::Index argmax;
        logprobs.row(t).maxCoeff(&argmax);
        hits += (argmax == ex.seq.ids[t + 1]);
        ++count;
    }
    return count ? static_cast<double>(hits) / count : 0.0;
}

DecodeResult decode(const InferencePrompt& prompt, EditorLM& lm, const DecodeStrategy& strategy,
                    int max_new, uint64_t seed) {
    const auto& cfg = lm.config();
    if (static_cast<int>(prompt.seq.size()) + max_new > cfg.max_len)
        throw RangeError("prompt plus max_new exceeds max_len");

    DecodeResult result;
    result.tokens.token_rate_hz = 0;  // caller knows the token rate
    std::mt19937_64 rng(seed);
    TokenSequence seq = prompt.seq;
    // One-shot prompts carry pre-generated target-stream tokens; continue
    // their position numbering.
    int pos_base = static_cast<int>(
        std::count(seq.segments.begin(), seq.segments.end(), Segment::TgtSpeech));

    std::vector<int> allowed;
    for (int t = 0; t < cfg.vocab.v_s; ++t) allowed.push_back(cfg.vocab.sem_id(t));
    allowed.push_back(VocabLayout::kEnd);

    for (int step = 0; step < max_new; ++step) {
        Mat logits = lm.forward(seq, prompt.speaker).value();
        Eigen::RowVectorXd row = logits.row(logits.rows() - 1);

        int chosen;
        if (strategy.kind == DecodeStrategy::Kind::Greedy) {
            chosen = allowed[0];
            double best = row(allowed[0]);
            for (int id : allowed)
                if (row(id) > best) best = row(id), chosen = id;
        } else {
            std::vector<int> ids = allowed;
            std::sort(ids.begin(), ids.end(),
                      [&](int a, int b) { return row(a) != row(b) ? row(a) > row(b) : a < b; });
            int k = std::min<int>(strategy.k, static_cast<int>(ids.size()));
            Eigen::VectorXd logit_k(k);
            for (int i = 0; i < k; ++i) logit_k(i) = row(ids[i]) / strategy.temperature;
            Eigen::VectorXd probs =
                nn::log_softmax_row(logit_k.transpose()).array().exp().transpose();
            double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double acc = 0;
            chosen = ids[k - 1];
            for (int i = 0; i < k; ++i) {
                acc += probs(i);
                if (u <= acc) {
                    chosen = ids[i];
                    break;
                }
            }
        }

        if (chosen == VocabLayout::kEnd) {
            result.saw_end = true;
            break;
        }
        result.tokens.ids.push_back(cfg.vocab.sem_token(chosen));
        seq.ids.push_back(chosen);
        seq.segments.push_back(Segment::TgtSpeech);
        seq.positions.push_back(pos_base + static_cast<int>(result.tokens.ids.size()) - 1);
    }
    return result;
}

LMTrainResult train_lm(EditorLM& lm, const std::vector<LMTrainExample>& examples,
                       const TrainHyper& hyper, uint64_t seed) {
    if (examples.empty()) throw ConfigError("no training examples");
    auto params = lm.parameters();
    nn::Adam adam({hyper.lr, 0.9, 0.999, 1e-8, hyper.warmup_steps});
    std::mt19937_64 rng(seed);

    LMTrainResult result;
    int epochs_past_target = -1;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::vector<std::size_t> order(examples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
            std::size_t bs = std::min<std::size_t>(hyper.batch, order.size() - start);
            for (auto* prm : params) prm->zero_grad();
            double batch_loss = 0;
            for (std::size_t b = 0; b < bs; ++b) {
                Tensor l = lm.loss(examples[order[start + b]]);
                batch_loss += l.value()(0, 0);
                nn::backward(l);
            }
            for (auto* prm : params) prm->grad /= static_cast<double>(bs);
            double lr = adam.lr_at(adam.steps_taken());
            adam.step(params);
            ++result.steps;
            result.log.push_back({result.steps, batch_loss / bs, lr});
        }
        result.epochs_run = epoch + 1;

        double acc = 0;
        for (const auto& ex : examples)
            acc += masked_accuracy(lm.forward_logprobs(ex.seq, ex.speaker), ex);
        acc /= examples.size();
        result.final_masked_accuracy = acc;
        if (acc >= hyper.stop_accuracy) {
            if (epochs_past_target < 0) epochs_past_target = 0;
            if (++epochs_past_target > hyper.stop_extra_epochs) break;
        }
    }
    return result;
}

void save_lm_checkpoint(const std::string& path, EditorLM& lm, int step) {
    nlohmann::json meta;
    meta["format"] = "spedit-lm-v1";
    meta["config"] = lm_config_to_json(lm.config());
    meta["step"] = step;
    auto params = lm.parameters();
    save_checkpoint(path, meta, params);
}

EditorLM load_lm_checkpoint(const std::string& path) {
    nlohmann::json meta = read_checkpoint_meta(path);
    if (meta.value("format", "") != "spedit-lm-v1")
        throw SchemaError(path + ": not an LM checkpoint");
    EditorLM lm(lm_config_from_json(meta.at("config")));
    auto params = lm.parameters();
    load_checkpoint(path, params);
    return lm;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write training log: " + path);
    f << "step,loss,lr\n";
    f.precision(12);
    for (const auto& row : log) f << row.step << "," << row.loss << "," << row.lr << "\n";
}

}  // namespace spedit
