#include "spedit/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spedit/errors.hpp"

namespace fs = std::filesystem;

namespace spedit {

namespace {

std::string resolve(const std::string& root, const std::string& rel) {
    fs::path p(rel);
    if (p.is_absolute() || root.empty()) return rel;
    return (fs::path(root) / p).string();
}

}  // namespace

Codebook fit_corpus_codebook(const std::vector<ManifestEntry>& entries,
                             const std::string& root_dir, const FeaturizerConfig& cfg,
                             uint64_t seed) {
    if (entries.empty()) throw SchemaError("cannot fit a codebook on an empty manifest");
    std::vector<MelSpectrogram> mels;
    mels.reserve(entries.size());
    for (const auto& e : entries)
        mels.push_back(mel(read_wav(resolve(root_dir, e.tgt_wav)), cfg.mel));
    return fit_codebook(mels, cfg.v_s, seed, cfg.codebook_iters);
}

std::vector<FeaturizedPair> featurize_manifest(const std::vector<ManifestEntry>& entries,
                                               const std::string& root_dir, const Codebook& cb,
                                               const FeaturizerConfig& cfg) {
    std::vector<FeaturizedPair> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        FeaturizedPair fp;
        fp.entry = e;
        fp.orig_mel = mel(read_wav(resolve(root_dir, e.orig_wav)), cfg.mel);
        fp.tgt_mel = mel(read_wav(resolve(root_dir, e.tgt_wav)), cfg.mel);
        fp.lm.speaker = speaker_embed(fp.tgt_mel);
        fp.lm.target_text = encode_text(e.tgt_text);
        fp.lm.orig_tokens = tokenize_speech(fp.orig_mel, cb, cfg.downsample);
        fp.lm.target_tokens = tokenize_speech(fp.tgt_mel, cb, cfg.downsample);
        out.push_back(std::move(fp));
    }
    return out;
}

std::vector<LMTrainExample> to_lm_examples(const std::vector<FeaturizedPair>& pairs,
                                           const VocabLayout& layout) {
    std::vector<LMTrainExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(build_training_sequence(p.lm, layout));
    return out;
}

std::vector<LMTrainExample> augment_text_prefix(const std::vector<FeaturizedPair>& pairs,
                                                const VocabLayout& layout, int copies,
                                                uint64_t seed) {
    std::vector<std::string> vocab;
    {
        std::set<std::string> seen;
        for (const auto& p : pairs)
            for (const auto& w : split_words(p.entry.tgt_text))
                if (seen.insert(w).second) vocab.push_back(w);
    }
    std::mt19937_64 rng(seed);
    std::vector<LMTrainExample> out;
    for (const auto& p : pairs) {
        for (int c = 0; c < copies; ++c) {
            std::vector<std::string> decoy = split_words(p.entry.tgt_text);
            int n_edits = 1 + static_cast<int>(rng() % 3);
            for (int e = 0; e < n_edits && !vocab.empty(); ++e) {
                std::size_t pos = rng() % std::max<std::size_t>(decoy.size(), 1);
                switch (rng() % 3) {
                    case 0:  // substitute
                        if (!decoy.empty()) decoy[pos] = vocab[rng() % vocab.size()];
                        break;
                    case 1:  // insert
                        decoy.insert(decoy.begin() + pos, vocab[rng() % vocab.size()]);
                        break;
                    default:  // delete
                        if (decoy.size() > 1) decoy.erase(decoy.begin() + pos);
                        break;
                }
            }
            PairFeatures feats = p.lm;
            feats.target_text = encode_text(join_words(decoy) + " " + p.entry.tgt_text);
            out.push_back(build_training_sequence(feats, layout));
        }
    }
    return out;
}

std::vector<FlowExample> to_flow_examples(const std::vector<FeaturizedPair>& pairs,
                                          FlowConfig& cfg) {
    if (pairs.empty()) throw SchemaError("no pairs for flow examples");
    // Fit the affine normalization on every frame of both sides.
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto& p : pairs) {
        for (const Mat* m : {&p.orig_mel.frames, &p.tgt_mel.frames}) {
            sum += m->sum();
            sumsq += m->array().square().sum();
            n += static_cast<std::size_t>(m->size());
        }
    }
    double mean = sum / static_cast<double>(n);
    double var = sumsq / static_cast<double>(n) - mean * mean;
    cfg.mel_mean = mean;
    cfg.mel_scale = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);

    std::vector<FlowExample> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        nn::Mat x1 = (p.orig_mel.frames.array() - cfg.mel_mean) / cfg.mel_scale;
        nn::Mat y1 = (p.tgt_mel.frames.array() - cfg.mel_mean) / cfg.mel_scale;
        FlowExample ex;
        ex.cond = build_condition(p.lm.speaker, p.lm.orig_tokens, p.lm.target_tokens, x1, cfg);
        Eigen::Index tz = ex.cond.guide.rows();
        ex.z1 = nn::Mat::Zero(tz, x1.cols());
        ex.z1.topRows(x1.rows()) = x1;
        nn::Mat y1p = pad_frames(y1, tz - ex.cond.boundary, cfg.mask_fill);
        ex.z1.bottomRows(tz - ex.cond.boundary) = y1p;
        out.push_back(std::move(ex));
    }
    return out;
}

EditResult run_edit(const EditRequest& req, EditorLM& lm, FlowModel& flow, const Codebook& cb,
                    const FeaturizerConfig& feat_cfg) {
    AudioClip orig = read_wav(req.original_wav);
    MelSpectrogram orig_mel = mel(orig, feat_cfg.mel);
    SemanticTokenSeq mu_x = tokenize_speech(orig_mel, cb, feat_cfg.downsample);
    SpeakerEmbedding spk = speaker_embed(orig_mel);

    InferencePrompt prompt = build_inference_prompt(
        req.mode == InferenceMode::OneShot ? req.original_text : std::nullopt, req.target_text,
        mu_x, spk, req.mode, lm.config().vocab);
    DecodeResult dec = decode(prompt, lm, req.strategy, req.max_new, req.seed);

    EditResult res;
    res.decoded_tokens = dec.tokens;
    res.saw_end = dec.saw_end;

    const FlowConfig& fcfg = flow.config();
    nn::Mat x1 = (orig_mel.frames.array() - fcfg.mel_mean) / fcfg.mel_scale;
    FlowCondition cond = build_condition(spk, mu_x, dec.tokens, x1, fcfg);
    nn::Mat y = flow.sample(cond, fcfg.ode_steps, req.seed);
    res.edited_mel.frames = (y.array() * fcfg.mel_scale + fcfg.mel_mean).matrix();
    res.edited_mel.frame_rate_hz = orig_mel.frame_rate_hz;
    res.edited_mel.config_id = orig_mel.config_id;
    return res;
}

void save_mel(const std::string& path, const MelSpectrogram& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write("SPEDITMEL1\n", 11);
    int64_t rows = m.frames.rows(), cols = m.frames.cols(), rate = m.frame_rate_hz;
    f.write(reinterpret_cast<const char*>(&rows), 8);
    f.write(reinterpret_cast<const char*>(&cols), 8);
    f.write(reinterpret_cast<const char*>(&rate), 8);
    uint64_t id_len = m.config_id.size();
    f.write(reinterpret_cast<const char*>(&id_len), 8);
    f.write(m.config_id.data(), static_cast<std::streamsize>(id_len));
    f.write(reinterpret_cast<const char*>(m.frames.data()),
            static_cast<std::streamsize>(sizeof(double)) * rows * cols);
    if (!f) throw IoError("short write to " + path);
}

MelSpectrogram load_mel(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    char magic[11];
    f.read(magic, 11);
    if (!f || std::memcmp(magic, "SPEDITMEL1\n", 11) != 0)
        throw SchemaError("bad mel file magic in " + path);
    int64_t rows = 0, cols = 0, rate = 0;
    uint64_t id_len = 0;
    f.read(reinterpret_cast<char*>(&rows), 8);
    f.read(reinterpret_cast<char*>(&cols), 8);
    f.read(reinterpret_cast<char*>(&rate), 8);
    f.read(reinterpret_cast<char*>(&id_len), 8);
    if (!f || rows < 0 || cols <= 0 || id_len > 4096)
        throw SchemaError("bad mel header in " + path);
    MelSpectrogram m;
    m.config_id.resize(id_len);
    f.read(m.config_id.data(), static_cast<std::streamsize>(id_len));
    m.frame_rate_hz = static_cast<int>(rate);
    m.frames.resize(rows, cols);
    f.read(reinterpret_cast<char*>(m.frames.data()),
           static_cast<std::streamsize>(sizeof(double)) * rows * cols);
    if (!f) throw SchemaError("truncated mel file " + path);
    return m;
}

std::vector<EvalPairSpec> read_eval_pairs(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::vector<EvalPairSpec> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        EvalPairSpec s;
        for (const char* key : {"id", "ref_wav", "ref_text", "hyp_wav", "hyp_text"})
            if (!j.contains(key) || !j[key].is_string())
                throw SchemaError(path + ":" + std::to_string(line_no) +
                                  ": missing string field '" + key + "'");
        s.id = j["id"];
        s.ref_wav = j["ref_wav"];
        s.ref_text = j["ref_text"];
        s.hyp_wav = j["hyp_wav"];
        s.hyp_text = j["hyp_text"];
        s.orig_wav = j.value("orig_wav", "");
        s.orig_ali = j.value("orig_ali", "");
        s.tgt_ali = j.value("tgt_ali", "");
        out.push_back(std::move(s));
    }
    return out;
}

EvalReport evaluate_pairs(const std::vector<EvalPairSpec>& pairs, const std::string& root_dir,
                          const EvalOptions& opts) {
    if (pairs.empty()) throw SchemaError("empty evaluation pair list");
    EvalReport rep;
    std::map<std::string, double> gen_scores_all, gt_scores_all;
    for (const auto& s : pairs) {
        AudioClip ref = read_wav(resolve(root_dir, s.ref_wav));
        AudioClip hyp = read_wav(resolve(root_dir, s.hyp_wav));

        std::optional<double> reg_mcd;
        if (opts.replace || !s.tgt_ali.empty()) {
            if (s.orig_wav.empty() || s.orig_ali.empty() || s.tgt_ali.empty())
                throw SchemaError("pair '" + s.id +
                                  "' needs orig_wav/orig_ali/tgt_ali for region processing");
            AudioClip orig = read_wav(resolve(root_dir, s.orig_wav));
            AlignedUtterance oa = load_alignment(resolve(root_dir, s.orig_ali));
            AlignedUtterance ta = load_alignment(resolve(root_dir, s.tgt_ali));
            EditScript script = compute_edit_script(oa.words, ta.words);
            RegionPairList unedited = map_unedited_regions(oa, ta, script);
            if (opts.replace) {
                ReplaceOptions ro;
                ro.fade_ms = opts.fade_ms;
                hyp = replace_unedited(hyp, orig, unedited, ro);
            }
            // Edited regions live in the gaps between unedited runs; both the
            // reference and the hypothesis sit on the target timeline.
            std::vector<TimeInterval> keep;
            for (const auto& r : unedited) keep.push_back(r.tgt);
            double dur = static_cast<double>(ref.samples.size()) / ref.sample_rate;
            std::vector<TimeInterval> edited = complement_intervals(keep, dur);
            RegionPairList edited_pairs;
            for (const auto& iv : edited)
                if (iv.duration() > 0.05) edited_pairs.push_back({iv, iv});
            if (!edited_pairs.empty())
                reg_mcd = region_mcd(ref, hyp, edited_pairs, opts.mel);
        }

        UttEval ue;
        ue.id = s.id;
        ue.wer = wer(s.ref_text, s.hyp_text);
        MelSpectrogram ref_mel = mel(ref, opts.mel);
        MelSpectrogram hyp_mel = mel(hyp, opts.mel);
        ue.spk_sim = spk_sim(speaker_embed(ref_mel), speaker_embed(hyp_mel));
        ue.mcd = mcd_dtw(ref_mel, hyp_mel);
        ue.region_mcd = reg_mcd;
        rep.utts.push_back(std::move(ue));
    }
    rep.count = static_cast<int>(rep.utts.size());
    double reg_sum = 0.0;
    int reg_n = 0;
    for (const auto& u : rep.utts) {
        rep.mean_wer += u.wer;
        rep.mean_spk_sim += u.spk_sim;
        rep.mean_mcd += u.mcd;
        if (u.region_mcd) {
            reg_sum += *u.region_mcd;
            ++reg_n;
        }
    }
    rep.mean_wer /= rep.count;
    rep.mean_spk_sim /= rep.count;
    rep.mean_mcd /= rep.count;
    if (reg_n > 0) rep.mean_region_mcd = reg_sum / reg_n;
    for (const auto& [name, paths] : opts.score_files)
        rep.mae_mos[name] = mae_mos(resolve(root_dir, paths.first), resolve(root_dir, paths.second));
    return rep;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        return std::string(buf);
    };
    auto opt = [&](const std::map<std::string, double>& m, const std::string& key) {
        auto it = m.find(key);
        return it == m.end() ? std::string("NA") : num(it->second);
    };
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Method", "WER (%)", "SpkSIM", "MCD", "MOSNet", "MAE_MOSNet", "UTMOS",
                     "MAE_UTMOS"});
    for (const auto& r : rows) {
        const auto& m = r.report.mae_mos;
        cells.push_back({r.method, num(r.report.mean_wer), num(r.report.mean_spk_sim),
                         num(r.report.mean_mcd), opt(m, "MOSNet_abs"), opt(m, "MOSNet"),
                         opt(m, "UTMOS_abs"), opt(m, "UTMOS")});
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        os << "|";
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            os << " " << cells[i][c] << std::string(width[c] - cells[i][c].size(), ' ') << " |";
        }
        os << "\n";
        if (i == 0) {
            os << "|";
            for (std::size_t c = 0; c < width.size(); ++c)
                os << std::string(width[c] + 2, '-') << "|";
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace spedit
