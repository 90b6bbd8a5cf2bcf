// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <random>
#include <set>

#include "ullava/error.hpp"

namespace ullava::train {

namespace {

const char* stage_prefix(Stage s) { return s == Stage::I ? "stage1." : "stage2."; }

/// Endless seeded shuffles of a fixed index set.
class ShuffledCycle {
public:
    ShuffledCycle(std::vector<std::size_t> items, std::uint64_t seed) : items_(std::move(items)), rng_(seed) {}

    std::size_t next() {
        if (pos_ == 0) {
            for (std::size_t i = items_.size() - 1; i > 0; --i) std::swap(items_[i], items_[rng_() % (i + 1)]);
        }
        const std::size_t out = items_[pos_];
        pos_ = (pos_ + 1) % items_.size();
        return out;
    }

private:
    std::vector<std::size_t> items_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0;
};

nlohmann::ordered_json breakdown_json(const losses::LossBreakdown& b) {
    nlohmann::ordered_json j;
    j["l_cgl"] = b.l_cgl;
    auto opt = [&](const char* k, const std::optional<double>& v) {
        if (v) j[k] = *v;
    };
    opt("l_bce", b.l_bce);
    opt("l_dice", b.l_dice);
    opt("l_pixel", b.l_pixel);
    opt("l_l1", b.l_l1);
    opt("l_giou", b.l_giou);
    opt("l_region", b.l_region);
    j["l_fgl"] = b.l_fgl;
    return j;
}

using BatchSource = std::function<std::vector<const ConversationSample*>()>;

TrainReport run(model::Model& model, const Corpus& corpus, const StageConfig& config, const TrainOptions& options,
                const BatchSource& next_batch) {
    const auto start = std::chrono::steady_clock::now();
    TrainReport report;
    report.stage = config.stage;
    report.seed = config.seed;
    AdamW optimizer(config.learning_rate, config.weight_decay);
    model::FeatureCache cache;
    for (std::size_t step = 0; step < config.max_steps; ++step) {
        StepRecord rec;
        rec.step = step + 1;
        model.store().zero_grad();
        rec.loss = accumulate_batch_gradients(model, next_batch(), cache, corpus.dataset_path, config, options.loss,
                                              &rec.samples);
        for (const auto& s : rec.samples) rec.l_cgl += s.breakdown.l_cgl;
        rec.l_cgl /= static_cast<double>(rec.samples.size());
        if (!std::isfinite(rec.loss)) throw Error(ErrorCode::Validation, "loss diverged at step " + std::to_string(rec.step));
        optimizer.step(model.store(), config.trainable_scopes);
        report.history.push_back(std::move(rec));
        if (options.on_step && !options.on_step(report.history.back())) break;
    }
    model.store().zero_grad();
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace

StageConfig StageConfig::defaults(Stage stage) {
    StageConfig c;
    c.stage = stage;
    if (stage == Stage::I) {
        c.learning_rate = 2e-3;
        c.token_limit = 1024;
        c.trainable_scopes = {"visual_projector"};
    } else {
        c.learning_rate = 2e-5;
        c.token_limit = 512;
        c.trainable_scopes = {"visual_projector", "lm", "pixel_head", "region_head"};
    }
    return c;
}

StageConfig StageConfig::from_config(const Config& cfg, Stage stage) {
    StageConfig c = defaults(stage);
    const std::string p = stage_prefix(stage);
    c.learning_rate = cfg.get_double(p + "learning_rate", c.learning_rate);
    c.weight_decay = cfg.get_double(p + "weight_decay", c.weight_decay);
    c.batch_size = cfg.get_size(p + "batch_size", c.batch_size);
    c.token_limit = cfg.get_size(p + "token_limit", c.token_limit);
    c.max_steps = cfg.get_size(p + "max_steps", c.max_steps);
    c.seed = static_cast<std::uint64_t>(cfg.get_int(p + "seed", cfg.get_int("seed", 0)));
    c.trainable_scopes = cfg.get_list(p + "trainable_scopes", c.trainable_scopes);
    c.validate();
    return c;
}

void StageConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error(ErrorCode::Validation, "learning_rate must be > 0");
    if (weight_decay < 0.0) throw Error(ErrorCode::Validation, "weight_decay must be >= 0");
    if (batch_size == 0) throw Error(ErrorCode::Validation, "batch_size must be >= 1");
    if (token_limit == 0) throw Error(ErrorCode::Validation, "token_limit must be >= 1");
}

void AdamW::step(ParameterStore& store, const std::vector<std::string>& scopes) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (auto& [name, var] : store.entries()) {
        if (!in_scope(name, scopes)) continue;
        Matrix& w = var.mutable_value();
        const Matrix& g = var.grad();
        auto& st = state_[name];
        if (st.m.empty()) {
            st.m.assign(w.size(), 0.0);
            st.v.assign(w.size(), 0.0);
        }
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g.data.empty() ? 0.0 : g.data[i];
            st.m[i] = b1_ * st.m[i] + (1.0 - b1_) * gi;
            st.v[i] = b2_ * st.v[i] + (1.0 - b2_) * gi * gi;
            const double mhat = st.m[i] / c1;
            const double vhat = st.v[i] / c2;
            w.data[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * w.data[i]);
        }
    }
}

std::string TrainReport::to_json() const {
    nlohmann::ordered_json j;
    j["stage"] = stage == Stage::I ? "I" : "II";
    j["seed"] = seed;
    j["steps"] = history.size();
    j["checkpoint"] = checkpoint_path;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["history"] = nlohmann::ordered_json::array();
    for (const auto& s : history) {
        nlohmann::ordered_json o;
        o["step"] = s.step;
        o["loss"] = s.loss;
        o["l_cgl"] = s.l_cgl;
        o["samples"] = nlohmann::ordered_json::array();
        for (const auto& r : s.samples) {
            nlohmann::ordered_json so;
            so["id"] = r.id;
            so["task"] = std::string(to_string(r.task));
            so["breakdown"] = breakdown_json(r.breakdown);
            o["samples"].push_back(so);
        }
        j["history"].push_back(o);
    }
    return j.dump(1) + "\n";
}

double accumulate_batch_gradients(model::Model& model, const std::vector<const ConversationSample*>& batch,
                                  model::FeatureCache& cache, const std::filesystem::path& dataset_path,
                                  const StageConfig& config, const losses::LossConfig& loss,
                                  std::vector<SampleRecord>* records) {
    if (batch.empty()) throw Error(ErrorCode::Validation, "empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    const bool fine = config.stage == Stage::II;
    double total = 0.0;
    for (const ConversationSample* s : batch) {
        const model::VisualInput& visual = cache.get(model, dataset_path, *s);
        const model::SampleForward f = model::forward_sample(model, *s, visual, loss, {config.token_limit}, fine);
        ag::backward(ag::scale(f.loss.total, inv));
        total += f.loss.total.item();
        if (records) records->push_back({s->id, s->task_kind, f.loss.breakdown});
    }
    return total * inv;
}

TrainReport train_stage1(model::Model& model, const Corpus& corpus, const StageConfig& config,
                         const TrainOptions& options) {
    config.validate();
    if (config.stage != Stage::I) throw Error(ErrorCode::Validation, "train_stage1 needs a stage I config");
    if (corpus.samples.empty()) throw Error(ErrorCode::BadCorpus, "stage I corpus is empty");
    for (const auto& s : corpus.samples) {
        if (s.task_kind != TaskKind::Captioning && s.task_kind != TaskKind::VideoCaption) {
            throw Error(ErrorCode::BadCorpus, "stage I takes captioning samples only; '" + s.id + "' is " +
                                                  std::string(to_string(s.task_kind)));
        }
    }
    std::vector<std::size_t> all(corpus.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    ShuffledCycle cycle(all, config.seed);
    return run(model, corpus, config, options, [&] {
        std::vector<const ConversationSample*> batch;
        for (std::size_t b = 0; b < config.batch_size; ++b) batch.push_back(&corpus.samples[cycle.next()]);
        return batch;
    });
}

TrainReport train_stage2(model::Model& model, const Corpus& corpus, const StageConfig& config,
                         const TrainOptions& options) {
    config.validate();
    if (config.stage != Stage::II) throw Error(ErrorCode::Validation, "train_stage2 needs a stage II config");
    if (corpus.samples.empty()) throw Error(ErrorCode::BadCorpus, "stage II corpus is empty");
    for (const auto& s : corpus.samples) validate_sample(s);
    std::map<TaskKind, std::vector<std::size_t>> by_kind;
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) by_kind[corpus.samples[i].task_kind].push_back(i);
    std::vector<ShuffledCycle> cycles;
    std::size_t k = 0;
    for (auto& [kind, idx] : by_kind) cycles.emplace_back(idx, config.seed ^ (0x9E37ULL * ++k));
    std::mt19937_64 kind_rng(config.seed);
    return run(model, corpus, config, options, [&] {
        std::vector<const ConversationSample*> batch;
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const std::size_t which = cycles.size() == 1 ? 0 : kind_rng() % cycles.size();
            batch.push_back(&corpus.samples[cycles[which].next()]);
        }
        return batch;
    });
}

}  // namespace ullava::train
