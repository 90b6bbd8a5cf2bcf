// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "ullava/adapters.hpp"
#include "ullava/data.hpp"
#include "ullava/image_io.hpp"
#include "ullava/model.hpp"
#include "ullava/salient.hpp"
#include "ullava/synthetic.hpp"

namespace ullava::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f << text;
}

std::uint64_t config_seed(const Config& c) { return static_cast<std::uint64_t>(c.get_int("seed", 0)); }

data::ClientSettings client_settings(const Config& c) {
    data::ClientSettings s;
    s.caption_url = c.get_string("clients.caption_url", s.caption_url);
    s.tag_url = c.get_string("clients.tag_url", s.tag_url);
    s.timeout = std::chrono::milliseconds(c.get_int("clients.timeout_ms", s.timeout.count()));
    s.attempts = static_cast<int>(c.get_int("clients.attempts", s.attempts));
    s.backoff = std::chrono::milliseconds(c.get_int("clients.backoff_ms", s.backoff.count()));
    s.apply_environment();
    return s;
}

bool has_model_keys(const Config& c) {
    for (const auto& [k, v] : c.values())
        if (k.rfind("model.", 0) == 0) return true;
    return false;
}

std::unique_ptr<model::Model> open_checkpoint(const Config& c, const fs::path& path) {
    if (has_model_keys(c)) return train::load_checkpoint(path, model::ModelConfig::from_config(c));
    return train::load_checkpoint(path);
}

std::string format_box(const NormalizedBox& b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f", b.x1, b.y1, b.x2, b.y2);
    return buf;
}

}  // namespace

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Io:
        case ErrorCode::ClientError:
        case ErrorCode::CorruptCheckpoint:
            return kExitRuntime;
        default:
            return kExitValidation;
    }
}

BuildDataResult cmd_build_data(const Config& config, const fs::path& out, bool mock_clients) {
    const std::uint64_t seed = config_seed(config);
    const model::ModelConfig mc = model::ModelConfig::from_config(config);
    fs::create_directories(out);
    BuildDataResult result;
    auto emit = [&](const std::string& task, const std::vector<ConversationSample>& samples) {
        const fs::path path = out / (task + ".jsonl");
        data::write_dataset(samples, path);
        result.files.push_back({task, path, samples.size()});
    };

    data::CorpusOptions co;
    co.count = config.get_size("data.count", 8);
    co.seed = seed;
    co.n_frames = mc.n_frames;
    co.scene.image_size = mc.image_size;
    co.scene.n_objects = config.get_size("data.n_objects", co.scene.n_objects);
    const std::vector<std::string> tasks =
        config.get_list("data.tasks", {"caption", "video_caption", "vqa", "res", "rec", "salient"});
    for (const auto& task : tasks) {
        if (task == "caption") {
            emit(task, data::make_caption_corpus(co, out));
        } else if (task == "video_caption") {
            emit(task, data::make_video_caption_corpus(co, out));
        } else if (task == "vqa") {
            emit(task, data::make_vqa_corpus(co, out));
        } else if (task == "res") {
            emit(task, data::make_res_corpus(co, out, config.get_bool("data.res_with_box", false)));
        } else if (task == "rec") {
            emit(task, data::make_rec_corpus(co, out));
        } else if (task != "salient") {
            throw Error(ErrorCode::Validation, "unknown data.tasks entry '" + task + "'");
        }
    }

    if (const auto src = config.find("data.refer_source")) emit("refer", data::adapt_refer(*src, seed));
    if (const auto src = config.find("data.caption_source")) emit("caption_adapted", data::adapt_caption(*src, seed));
    if (const auto src = config.find("data.semantic_source")) emit("semantic", data::adapt_semantic(*src, seed));

    const auto salient_source = config.find("data.salient_source");
    if (salient_source || std::find(tasks.begin(), tasks.end(), "salient") != tasks.end()) {
        std::vector<data::SalientRecord> records;
        if (salient_source) {
            records = data::load_salient_source(*salient_source);
        } else {
            data::CorpusOptions so = co;
            so.count = config.get_size("data.salient_count", co.count);
            records = data::make_salient_records(so, out);
        }
        std::unique_ptr<data::CaptionClient> captioner;
        std::unique_ptr<data::TagClient> tagger;
        const data::ClientSettings settings = client_settings(config);
        if (mock_clients) {
            captioner = std::make_unique<data::MockCaptionClient>();
            tagger = std::make_unique<data::MockTagClient>();
        } else {
            if (settings.caption_url.empty() || settings.tag_url.empty()) {
                throw Error(ErrorCode::Validation,
                            "salient build needs clients.caption_url and clients.tag_url (or --mock-clients)");
            }
            captioner = std::make_unique<data::HttpCaptionClient>(settings);
            tagger = std::make_unique<data::HttpTagClient>(settings);
        }
        data::SalientBuildOptions opts;
        opts.seed = seed;
        opts.retry = {settings.attempts, settings.backoff};
        opts.workers = config.get_size("data.workers", 1);
        auto built = data::build_salient15k(records, *captioner, *tagger, opts);
        emit("salient15k", built.samples);
        result.salient = built.report;
    }

    ordered_json report;
    report["seed"] = seed;
    report["files"] = ordered_json::array();
    for (const auto& f : result.files) {
        report["files"].push_back({{"task", f.task}, {"path", f.path.filename().string()}, {"count", f.count}});
    }
    if (result.salient) {
        ordered_json s;
        s["total"] = result.salient->total;
        s["emitted"] = result.salient->emitted;
        s["skipped"] = ordered_json::array();
        for (const auto& k : result.salient->skipped) s["skipped"].push_back({{"id", k.id}, {"reason", k.reason}});
        report["salient"] = s;
    }
    result.report = out / "build_report.json";
    write_text(result.report, report.dump(2) + "\n");
    if (result.salient && !result.salient->skipped.empty() && !config.get_bool("data.allow_skips", false)) {
        throw Error(ErrorCode::ClientError, std::to_string(result.salient->skipped.size()) +
                                                " salient record(s) exhausted the retry budget; first: " +
                                                result.salient->skipped.front().id + ": " +
                                                result.salient->skipped.front().reason);
    }
    return result;
}

std::vector<ConversationSample> load_split(const fs::path& path) {
    auto samples = data::load_dataset(path);
    for (auto& s : samples) {
        if (s.visual_ref) s.visual_ref->path = fs::absolute(data::resolve_visual_path(path, *s.visual_ref)).string();
    }
    return samples;
}

TrainResult cmd_train(const Config& config, const fs::path& out, const std::optional<fs::path>& init_checkpoint) {
    const auto stages = config.get_list("train.stages", {"1", "2"});
    std::set<std::string> wanted(stages.begin(), stages.end());
    for (const auto& s : wanted)
        if (s != "1" && s != "2") throw Error(ErrorCode::Validation, "train.stages entries must be 1 or 2, got '" + s + "'");
    if (wanted.empty()) throw Error(ErrorCode::Validation, "train.stages is empty");
    if (!wanted.count("1") && !init_checkpoint && config.get_bool("train.require_stage1", true)) {
        throw Error(ErrorCode::Validation, "stage II alone needs a stage I checkpoint (--checkpoint)");
    }

    train::Corpus c1, c2;
    if (wanted.count("1")) {
        const auto paths = config.get_list("train.stage1_data", {});
        if (paths.empty()) throw Error(ErrorCode::Validation, "train.stage1_data is not set");
        for (const auto& p : paths) {
            auto s = load_split(p);
            c1.samples.insert(c1.samples.end(), s.begin(), s.end());
        }
    }
    if (wanted.count("2")) {
        const auto paths = config.get_list("train.stage2_data", {});
        if (paths.empty()) throw Error(ErrorCode::Validation, "train.stage2_data is not set");
        for (const auto& p : paths) {
            auto s = load_split(p);
            c2.samples.insert(c2.samples.end(), s.begin(), s.end());
        }
    }

    std::unique_ptr<model::Model> model;
    if (init_checkpoint) {
        model = open_checkpoint(config, *init_checkpoint);
    } else {
        const model::ModelConfig mc = model::ModelConfig::from_config(config);
        std::vector<ConversationSample> all = c1.samples;
        all.insert(all.end(), c2.samples.begin(), c2.samples.end());
        model = std::make_unique<model::Model>(mc, model::build_vocabulary(all, mc));
    }

    train::TrainOptions options;
    options.loss.alpha1 = config.get_double("loss.alpha1", options.loss.alpha1);
    options.loss.alpha2 = config.get_double("loss.alpha2", options.loss.alpha2);
    options.loss.beta1 = config.get_double("loss.beta1", options.loss.beta1);
    options.loss.beta2 = config.get_double("loss.beta2", options.loss.beta2);
    options.loss.combine_branches = config.get_bool("loss.combine_branches", options.loss.combine_branches);
    options.loss.validate();

    TrainResult result;
    result.checkpoint = out / "checkpoint.bin";
    fs::create_directories(out);
    auto finish = [&](train::TrainReport report, const char* name) {
        train::save_checkpoint(*model, result.checkpoint);
        report.checkpoint_path = result.checkpoint.string();
        const fs::path rp = out / name;
        write_text(rp, report.to_json());
        result.report_files.push_back(rp);
        result.reports.push_back(std::move(report));
    };
    if (wanted.count("1")) {
        finish(train::train_stage1(*model, c1, train::StageConfig::from_config(config, train::Stage::I), options),
               "stage1_report.json");
    }
    if (wanted.count("2")) {
        finish(train::train_stage2(*model, c2, train::StageConfig::from_config(config, train::Stage::II), options),
               "stage2_report.json");
    }
    return result;
}

metrics::EvalReport cmd_eval(const Config& config, const fs::path& checkpoint, const std::vector<fs::path>& splits,
                             const fs::path& out) {
    if (splits.empty()) throw Error(ErrorCode::Validation, "no split given (--split)");
    const std::string mode = config.get_string("eval.mode", "generate");
    if (mode != "generate" && mode != "teacher" && mode != "oracle") {
        throw Error(ErrorCode::Validation, "eval.mode must be generate, teacher or oracle");
    }
    const std::size_t shards = std::max<std::size_t>(1, config.get_size("eval.shards", 1));
    const std::size_t max_new = config.get_size("eval.max_new_tokens", 32);
    std::unique_ptr<model::Model> model = open_checkpoint(config, checkpoint);

    metrics::EvalReport report;
    report.config_hash = config.hash();
    model::FeatureCache cache;
    for (const auto& path : splits) {
        const auto samples = load_split(path);
        if (samples.empty()) throw Error(ErrorCode::Validation, "split " + path.string() + " has no samples");
        metrics::SplitResult split;
        split.split = path.stem().string();
        split.samples = samples.size();
        std::vector<metrics::CIoUAccumulator> ciou(shards);
        std::vector<metrics::PrecAccumulator> prec(shards);
        bool any_mask = false, any_rec = false;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            const std::size_t shard = i * shards / samples.size();
            model::Prediction p;
            if (mode == "oracle") {
                p.masks = s.target_masks;
                p.boxes = s.target_boxes;
                if (!p.boxes.empty()) p.fused_box = metrics::fuse_rec_outputs(p.boxes.front(), std::nullopt);
                else if (!p.masks.empty()) p.fused_box = metrics::fuse_rec_outputs(std::nullopt, p.masks.front());
            } else {
                const model::VisualInput& visual = cache.get(*model, path, s);
                if (mode == "teacher") {
                    p = model::predict_teacher_forced(*model, s, visual);
                } else {
                    p = model::predict_generate(*model, visual, s.turns.front().text, max_new);
                }
            }
            if (s.task_kind == TaskKind::Rec) {
                any_rec = true;
                auto& acc = prec[shard];
                if (p.fused_box) acc.accumulate(*p.fused_box, s.target_boxes.front());
                else ++acc.total;
            } else if (needs_mask(s.task_kind)) {
                any_mask = true;
                for (std::size_t k = 0; k < s.target_masks.size(); ++k) {
                    const BinaryMask& target = s.target_masks[k];
                    const BinaryMask pred = k < p.masks.size() ? p.masks[k] : BinaryMask(target.height, target.width);
                    ciou[shard].accumulate(pred, target);
                }
            }
        }
        if (any_mask) {
            split.ciou = metrics::CIoUAccumulator{};
            for (const auto& a : ciou) split.ciou->merge(a);
        }
        if (any_rec) {
            split.prec = metrics::PrecAccumulator{};
            for (const auto& a : prec) split.prec->merge(a);
        }
        report.splits.push_back(std::move(split));
    }
    metrics::write_report(report, out / "eval_report.json");
    return report;
}

InferResult cmd_infer(const Config& config, const fs::path& checkpoint, const std::optional<fs::path>& visual_path,
                      bool video, const std::string& prompt, const fs::path& out) {
    std::unique_ptr<model::Model> model = open_checkpoint(config, checkpoint);
    model::VisualInput visual;
    std::string text = prompt;
    if (visual_path) {
        const VisualKind kind = video ? VisualKind::Video : VisualKind::Image;
        visual = model::load_visual(*model, *visual_path, kind);
        const std::string_view placeholder = video ? tokens::kVideoPlaceholder : tokens::kImagePlaceholder;
        if (text.find(placeholder) == std::string::npos) text = std::string(placeholder) + " " + text;
    }
    const model::Prediction p =
        model::predict_generate(*model, visual, text, config.get_size("infer.max_new_tokens", 32));
    InferResult r;
    r.text = p.text;
    if (!p.masks.empty()) fs::create_directories(out);
    for (std::size_t i = 0; i < p.masks.size(); ++i) {
        const data::RleMask rle = data::rle_encode(p.masks[i]);
        const fs::path json_path = out / ("mask_" + std::to_string(i) + ".json");
        const fs::path png_path = out / ("mask_" + std::to_string(i) + ".png");
        write_text(json_path, ordered_json{{"height", rle.height}, {"width", rle.width}, {"counts", rle.counts}}.dump() + "\n");
        io::write_png(p.masks[i], png_path);
        r.mask_files.push_back(json_path);
        r.mask_files.push_back(png_path);
    }
    r.box = p.fused_box;
    return r;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ullava: multimodal instruction tuning at desk scale"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out", checkpoint;
    std::vector<std::string> overrides, splits;
    std::optional<std::int64_t> seed;
    bool mock = false, video = false;
    std::string image, prompt;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        cmd->add_option("--set", overrides, "override key=value (repeatable)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "seed override");
    };
    auto* build = app.add_subcommand("build-data", "build dataset files");
    common(build);
    build->add_flag("--mock-clients", mock, "use deterministic captioner/tagger mocks");
    auto* trn = app.add_subcommand("train", "run training stages");
    common(trn);
    trn->add_option("--checkpoint", checkpoint, "initial checkpoint");
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    common(ev);
    ev->add_option("--checkpoint", checkpoint, "checkpoint")->required();
    ev->add_option("--split", splits, "dataset file (repeatable)");
    auto* inf = app.add_subcommand("infer", "answer one prompt");
    common(inf);
    inf->add_option("--checkpoint", checkpoint, "checkpoint")->required();
    inf->add_option("--image", image, "image (.png/.npy) or video (.npy with --video)");
    inf->add_flag("--video", video, "treat --image as a video");
    inf->add_option("--prompt", prompt, "user prompt")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        Config config = config_path.empty() ? Config{} : Config::load(config_path);
        for (const auto& o : overrides) config.apply_override(o);
        if (seed) config.set("seed", std::to_string(*seed));
        for (const auto& s : config.get_list("eval.splits", {})) splits.push_back(s);
        const fs::path outp = out_dir;

        if (build->parsed()) {
            const auto r = cmd_build_data(config, outp, mock);
            for (const auto& f : r.files) out << f.task << ": " << f.count << " samples -> " << f.path.string() << "\n";
            out << "report: " << r.report.string() << "\n";
        } else if (trn->parsed()) {
            const auto r = cmd_train(config, outp, checkpoint.empty() ? std::nullopt : std::optional<fs::path>(checkpoint));
            for (std::size_t i = 0; i < r.reports.size(); ++i) {
                const auto& h = r.reports[i].history;
                out << "stage " << (r.reports[i].stage == train::Stage::I ? "I" : "II") << ": " << h.size()
                    << " steps, final loss " << (h.empty() ? 0.0 : h.back().loss) << " -> "
                    << r.report_files[i].string() << "\n";
            }
            out << "checkpoint: " << r.checkpoint.string() << "\n";
        } else if (ev->parsed()) {
            std::vector<fs::path> paths(splits.begin(), splits.end());
            out << cmd_eval(config, checkpoint, paths, outp).to_json();
        } else if (inf->parsed()) {
            const auto r = cmd_infer(config, checkpoint, image.empty() ? std::nullopt : std::optional<fs::path>(image),
                                     video, prompt, outp);
            out << "answer: " << r.text << "\n";
            for (const auto& f : r.mask_files) out << "mask: " << f.string() << "\n";
            if (r.box) out << "box: " << format_box(*r.box) << "\n";
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace ullava::cli
