// spedit: dataset construction, training, editing, and evaluation commands
// over a JSON run configuration.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "spedit/checkpoint.hpp"
#include "spedit/errors.hpp"
#include "spedit/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
    uint64_t seed = 1;
    std::string out_dir = "runs/default";
    std::string dataset_dir;  // defaults to out_dir + "/dataset"

    spedit::SyntheticCorpusConfig corpus;
    std::map<spedit::EditTask, double> mix = {{spedit::EditTask::Insert, 0.3},
                                              {spedit::EditTask::Delete, 0.3},
                                              {spedit::EditTask::Substitute, 0.3},
                                              {spedit::EditTask::Multi, 0.1}};
    spedit::SpanSamplerConfig sampler;

    spedit::FeaturizerConfig featurizer;
    spedit::LMConfig lm;
    spedit::TrainHyper lm_train;
    int lm_aug_copies = 2;  // decoy-prefix robustness copies per pair
    spedit::FlowConfig flow;
    spedit::TrainHyper flow_train;
    spedit::DecodeStrategy decode = spedit::DecodeStrategy::greedy();
    int max_new = 1024;

    json raw;  // resolved snapshot source
};

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path, std::optional<uint64_t> seed_override) {
    std::ifstream f(path);
    if (!f) throw spedit::ConfigError("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw spedit::ConfigError(std::string("config parse error: ") + e.what());
    }
    RunConfig c;
    get_if(j, "seed", c.seed);
    get_if(j, "out_dir", c.out_dir);
    get_if(j, "dataset_dir", c.dataset_dir);
    if (j.contains("corpus")) {
        const json& jc = j["corpus"];
        get_if(jc, "n_utts", c.corpus.n_utts);
        get_if(jc, "min_words", c.corpus.min_words);
        get_if(jc, "max_words", c.corpus.max_words);
        get_if(jc, "word_dur_s", c.corpus.word_dur_s);
        get_if(jc, "amplitude", c.corpus.amplitude);
        get_if(jc, "vocab_freqs_hz", c.corpus.vocab_freqs_hz);
    }
    if (j.contains("mix")) {
        c.mix.clear();
        for (const auto& [name, v] : j["mix"].items())
            c.mix[spedit::task_from_name(name)] = v.get<double>();
    }
    if (j.contains("sampler")) {
        const json& js = j["sampler"];
        get_if(js, "min_spans", c.sampler.min_spans);
        get_if(js, "max_spans", c.sampler.max_spans);
        get_if(js, "min_span_words", c.sampler.min_span_words);
        get_if(js, "max_span_words", c.sampler.max_span_words);
        get_if(js, "min_margin_words", c.sampler.min_margin_words);
        get_if(js, "min_gap_words", c.sampler.min_gap_words);
    }
    if (j.contains("featurizer")) {
        const json& jf = j["featurizer"];
        get_if(jf, "v_s", c.featurizer.v_s);
        get_if(jf, "downsample", c.featurizer.downsample);
        get_if(jf, "codebook_iters", c.featurizer.codebook_iters);
        get_if(jf, "n_fft", c.featurizer.mel.n_fft);
        get_if(jf, "win_samples", c.featurizer.mel.win_samples);
        get_if(jf, "hop_samples", c.featurizer.mel.hop_samples);
        get_if(jf, "n_bins", c.featurizer.mel.n_bins);
    }
    if (j.contains("lm")) {
        const json& jl = j["lm"];
        get_if(jl, "layers", c.lm.layers);
        get_if(jl, "width", c.lm.width);
        get_if(jl, "heads", c.lm.heads);
        get_if(jl, "ff_width", c.lm.ff_width);
        get_if(jl, "max_len", c.lm.max_len);
        get_if(jl, "max_text_pos", c.lm.max_text_pos);
        get_if(jl, "max_speech_pos", c.lm.max_speech_pos);
        if (jl.contains("train")) {
            const json& jt = jl["train"];
            get_if(jt, "lr", c.lm_train.lr);
            get_if(jt, "warmup_steps", c.lm_train.warmup_steps);
            get_if(jt, "epochs", c.lm_train.epochs);
            get_if(jt, "batch", c.lm_train.batch);
            get_if(jt, "stop_accuracy", c.lm_train.stop_accuracy);
            get_if(jt, "stop_extra_epochs", c.lm_train.stop_extra_epochs);
            get_if(jt, "aug_copies", c.lm_aug_copies);
        }
    }
    if (j.contains("flow")) {
        const json& jf = j["flow"];
        get_if(jf, "sigma_min", c.flow.sigma_min);
        get_if(jf, "blocks", c.flow.blocks);
        get_if(jf, "width", c.flow.width);
        get_if(jf, "kernel", c.flow.kernel);
        get_if(jf, "token_emb_dim", c.flow.token_emb_dim);
        get_if(jf, "ode_steps", c.flow.ode_steps);
        if (jf.contains("train")) {
            const json& jt = jf["train"];
            get_if(jt, "lr", c.flow_train.lr);
            get_if(jt, "warmup_steps", c.flow_train.warmup_steps);
            get_if(jt, "epochs", c.flow_train.epochs);
            get_if(jt, "batch", c.flow_train.batch);
        }
    }
    if (j.contains("decode")) {
        const json& jd = j["decode"];
        std::string kind = jd.value("kind", "greedy");
        if (kind == "greedy") {
            c.decode = spedit::DecodeStrategy::greedy();
        } else if (kind == "top_k") {
            c.decode.kind = spedit::DecodeStrategy::Kind::TopK;
            get_if(jd, "k", c.decode.k);
            get_if(jd, "temperature", c.decode.temperature);
        } else {
            throw spedit::ConfigError("unknown decode kind: " + kind);
        }
        get_if(jd, "max_new", c.max_new);
    }
    if (seed_override) c.seed = *seed_override;

    if (c.dataset_dir.empty()) c.dataset_dir = c.out_dir + "/dataset";
    c.lm.vocab.v_s = c.featurizer.v_s;
    c.lm.spk_dim = c.featurizer.mel.n_bins;
    c.lm.seed = c.seed;
    c.flow.v_s = c.featurizer.v_s;
    c.flow.n_bins = c.featurizer.mel.n_bins;
    c.flow.spk_dim = c.featurizer.mel.n_bins;
    c.flow.downsample = c.featurizer.downsample;
    c.flow.seed = c.seed;
    c.lm.validate();
    c.flow.validate();

    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["dataset_dir"] = c.dataset_dir;
    c.raw = j;
    return c;
}

void write_snapshot(const RunConfig& c, const std::string& dir) {
    fs::create_directories(dir);
    std::ofstream f(dir + "/config.snapshot.json");
    if (!f) throw spedit::IoError("cannot write config snapshot in " + dir);
    f << c.raw.dump(2) << "\n";
}

int cmd_build_dataset(const RunConfig& c) {
    auto corpus = spedit::generate_synthetic_corpus(c.corpus, c.seed);
    auto summary = spedit::build_manifest(corpus, c.mix, c.sampler, c.seed, c.dataset_dir);
    write_snapshot(c, c.dataset_dir);
    std::cout << "manifest: " << summary.manifest_path << "\n";
    for (const auto& [task, n] : summary.task_counts)
        std::cout << "  " << task << ": " << n << "\n";
    std::cout << "  total: " << summary.total << " (skipped " << summary.skipped << ")\n";
    return kExitOk;
}

int cmd_train(const RunConfig& c, const std::string& stage, bool resume) {
    auto entries = spedit::read_manifest(c.dataset_dir + "/manifest.jsonl");
    fs::create_directories(c.out_dir);

    std::string cb_path = c.out_dir + "/codebook.json";
    spedit::Codebook cb;
    if (resume && fs::exists(cb_path)) {
        cb = spedit::load_codebook(cb_path);
    } else {
        cb = spedit::fit_corpus_codebook(entries, c.dataset_dir, c.featurizer, c.seed);
        spedit::save_codebook(cb_path, cb);
    }
    auto pairs = spedit::featurize_manifest(entries, c.dataset_dir, cb, c.featurizer);

    bool do_lm = stage == "lm" || stage == "both";
    bool do_flow = stage == "flow" || stage == "both";

    if (do_lm) {
        auto examples = spedit::to_lm_examples(pairs, c.lm.vocab);
        if (c.lm_aug_copies > 0) {
            auto aug = spedit::augment_text_prefix(pairs, c.lm.vocab, c.lm_aug_copies, c.seed);
            examples.insert(examples.end(), aug.begin(), aug.end());
        }
        std::string ckpt = c.out_dir + "/lm.ckpt";
        int steps_per_epoch =
            (static_cast<int>(examples.size()) + c.lm_train.batch - 1) / c.lm_train.batch;
        spedit::EditorLM model(c.lm);
        spedit::TrainHyper hyper = c.lm_train;
        int prev_steps = 0;
        if (resume && fs::exists(ckpt)) {
            model = spedit::load_lm_checkpoint(ckpt);
            prev_steps = spedit::read_checkpoint_meta(ckpt).value("step", 0);
            int done_epochs = prev_steps / std::max(steps_per_epoch, 1);
            hyper.epochs = std::max(0, hyper.epochs - done_epochs);
        }
        auto res = spedit::train_lm(model, examples, hyper, c.seed);
        spedit::save_lm_checkpoint(ckpt, model, prev_steps + res.steps);
        spedit::write_train_log_csv(c.out_dir + "/lm_train_log.csv", res.log);
        std::cout << "lm: steps=" << prev_steps + res.steps
                  << " masked_accuracy=" << res.final_masked_accuracy << "\n";
    }
    if (do_flow) {
        spedit::FlowConfig fcfg = c.flow;
        auto examples = spedit::to_flow_examples(pairs, fcfg);
        std::string ckpt = c.out_dir + "/flow.ckpt";
        int steps_per_epoch =
            (static_cast<int>(examples.size()) + c.flow_train.batch - 1) / c.flow_train.batch;
        spedit::FlowModel model(fcfg);
        spedit::TrainHyper hyper = c.flow_train;
        int prev_steps = 0;
        if (resume && fs::exists(ckpt)) {
            model = spedit::load_flow_checkpoint(ckpt);
            prev_steps = spedit::read_checkpoint_meta(ckpt).value("step", 0);
            int done_epochs = prev_steps / std::max(steps_per_epoch, 1);
            hyper.epochs = std::max(0, hyper.epochs - done_epochs);
        }
        auto res = spedit::train_flow(model, examples, hyper, c.seed);
        spedit::save_flow_checkpoint(ckpt, model, prev_steps + res.steps);
        spedit::write_train_log_csv(c.out_dir + "/flow_train_log.csv", res.log);
        std::cout << "flow: steps=" << prev_steps + res.steps
                  << " final_epoch_loss=" << res.final_epoch_loss << "\n";
    }
    write_snapshot(c, c.out_dir);
    return kExitOk;
}

int cmd_edit(const RunConfig& c, const std::string& original_wav,
             const std::string& original_text, const std::string& target_text,
             const std::string& mode_str, const std::string& out_prefix) {
    spedit::EditRequest req;
    req.original_wav = original_wav;
    if (!original_text.empty()) req.original_text = original_text;
    req.target_text = target_text;
    req.mode =
        mode_str == "one_shot" ? spedit::InferenceMode::OneShot : spedit::InferenceMode::ZeroShot;
    req.strategy = c.decode;
    req.max_new = c.max_new;
    req.seed = c.seed;

    auto lm = spedit::load_lm_checkpoint(c.out_dir + "/lm.ckpt");
    auto flow = spedit::load_flow_checkpoint(c.out_dir + "/flow.ckpt");
    auto cb = spedit::load_codebook(c.out_dir + "/codebook.json");

    auto res = spedit::run_edit(req, lm, flow, cb, c.featurizer);

    fs::path out(out_prefix);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    spedit::save_mel(out_prefix + ".mel", res.edited_mel);
    json meta;
    meta["mode"] = mode_str;
    meta["seed"] = c.seed;
    meta["decoded_tokens"] = res.decoded_tokens.ids;
    meta["token_count"] = res.decoded_tokens.ids.size();
    meta["frame_count"] = res.edited_mel.frame_count();
    meta["saw_end"] = res.saw_end;
    std::ofstream mf(out_prefix + ".json");
    mf << meta.dump(2) << "\n";
    if (out.has_parent_path()) write_snapshot(c, out.parent_path().string());
    std::cout << "edit: " << res.decoded_tokens.ids.size() << " tokens, "
              << res.edited_mel.frame_count() << " frames -> " << out_prefix << ".mel\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& c, const std::string& pairs_path, bool replace,
                 const std::vector<std::string>& score_args, const std::string& report_path) {
    auto pairs = spedit::read_eval_pairs(pairs_path);
    spedit::EvalOptions opts;
    opts.replace = replace;
    opts.mel = c.featurizer.mel;
    for (const auto& a : score_args) {
        auto eq = a.find('=');
        auto colon = a.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos)
            throw spedit::ConfigError("score file spec must be name=gen_path:gt_path, got " + a);
        opts.score_files[a.substr(0, eq)] = {a.substr(eq + 1, colon - eq - 1),
                                             a.substr(colon + 1)};
    }
    std::string root = fs::path(pairs_path).parent_path().string();
    auto report = spedit::evaluate_pairs(pairs, root, opts);
    std::cout << report.to_table();
    if (!report_path.empty()) {
        fs::path rp(report_path);
        if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
        std::ofstream rf(report_path);
        if (!rf) throw spedit::IoError("cannot write " + report_path);
        rf << report.to_json() << "\n";
        if (rp.has_parent_path()) write_snapshot(c, rp.parent_path().string());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speech editing pipeline: dataset, training, editing, evaluation"};
    app.require_subcommand(1);


    std::string config_path;
    uint64_t seed_override = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* build = app.add_subcommand("build-dataset", "generate corpus and edit-pair manifest");

    auto* train = app.add_subcommand("train", "train pipeline stages");
    std::string stage = "both";
    bool resume = false;
    train->add_option("--stage", stage, "lm | flow | both")
        ->check(CLI::IsMember({"lm", "flow", "both"}));
    train->add_flag("--resume", resume, "continue from existing checkpoints");

    auto* edit = app.add_subcommand("edit", "edit one utterance to a target transcript");
    std::string original_wav, original_text, target_text, mode = "zero_shot",
                              out_prefix = "edit_out";
    edit->add_option("--original-wav", original_wav)->required();
    edit->add_option("--original-text", original_text);
    edit->add_option("--target-text", target_text)->required();
    edit->add_option("--mode", mode)->check(CLI::IsMember({"zero_shot", "one_shot"}));
    edit->add_option("--out", out_prefix, "output prefix (.mel and .json)");

    auto* evaluate = app.add_subcommand("evaluate", "score hypothesis/reference pairs");
    std::string pairs_path, report_path;
    bool replace = false;
    std::vector<std::string> score_args;
    evaluate->add_option("--pairs", pairs_path, "JSONL pair list")->required();
    evaluate->add_flag("--replace", replace, "restore unedited regions before scoring");
    evaluate->add_option("--scores", score_args, "external scores, name=gen_path:gt_path");
    evaluate->add_option("--out", report_path, "report JSON path");

    for (CLI::App* sc : {build, train, edit, evaluate}) sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        std::optional<uint64_t> seed;
        if (seed_given) seed = seed_override;
        RunConfig c = load_config(config_path, seed);
        if (*build) return cmd_build_dataset(c);
        if (*train) return cmd_train(c, stage, resume);
        if (*edit) {
            if (mode == "one_shot" && original_text.empty()) {
                std::cerr << "error: --mode one_shot requires --original-text\n";
                return kExitUsage;
            }
            if (!fs::exists(original_wav)) {
                std::cerr << "error: original wav not found: " << original_wav << "\n";
                return kExitUsage;
            }
            return cmd_edit(c, original_wav, original_text, target_text, mode, out_prefix);
        }
        if (*evaluate) {
            if (!fs::exists(pairs_path)) {
                std::cerr << "error: pairs file not found: " << pairs_path << "\n";
                return kExitUsage;
            }
            return cmd_evaluate(c, pairs_path, replace, score_args, report_path);
        }
    } catch (const spedit::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
