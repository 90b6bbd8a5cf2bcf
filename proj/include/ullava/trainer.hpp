// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage training: stage I aligns the visual projector on captioning data
// with the language-modeling loss only; stage II tunes the heads and the LM
// on mixed task kinds with the combined loss.

#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <map>
#include <string>
#include <vector>

#include "ullava/config.hpp"
#include "ullava/losses.hpp"
#include "ullava/model.hpp"

namespace ullava::train {

enum class Stage { I, II };

struct StageConfig {
    Stage stage = Stage::I;
    double learning_rate = 2e-3;
    double weight_decay = 0.0;
    std::size_t batch_size = 4;
    std::size_t token_limit = 1024;
    std::size_t max_steps = 100;
    std::uint64_t seed = 0;
    std::vector<std::string> trainable_scopes;

    /// Stage defaults: lr 2e-3 / 2e-5, token limit 1024 / 512.
    static StageConfig defaults(Stage stage);
    /// Reads `stage1.*` or `stage2.*` keys over the stage defaults.
    static StageConfig from_config(const Config& config, Stage stage);
    void validate() const;
};

class AdamW {
public:
    AdamW(double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

    /// Updates parameters inside `scopes` from their gradients; others are not touched.
    void step(ParameterStore& store, const std::vector<std::string>& scopes);
    std::size_t steps() const { return t_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    double lr_, wd_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    std::map<std::string, Moments> state_;
};

struct SampleRecord {
    std::string id;
    TaskKind task = TaskKind::Captioning;
    losses::LossBreakdown breakdown;
};

struct StepRecord {
    std::size_t step = 0;
    double loss = 0.0;   // batch mean of the total loss
    double l_cgl = 0.0;  // batch mean of the language-modeling loss
    std::vector<SampleRecord> samples;
};

struct TrainReport {
    Stage stage = Stage::I;
    std::uint64_t seed = 0;
    std::vector<StepRecord> history;
    std::string checkpoint_path;
    double wall_clock_seconds = 0.0;

    std::string to_json() const;
};

struct Corpus {
    std::filesystem::path dataset_path;  // base for relative visual paths
    std::vector<ConversationSample> samples;
};

struct TrainOptions {
    losses::LossConfig loss;
    /// Called after every step; returning false stops training early.
    std::function<bool(const StepRecord&)> on_step;
};

/// Throws BadCorpus when any sample is not (video) captioning.
TrainReport train_stage1(model::Model& model, const Corpus& corpus, const StageConfig& config,
                         const TrainOptions& options = {});
TrainReport train_stage2(model::Model& model, const Corpus& corpus, const StageConfig& config,
                         const TrainOptions& options = {});

/// Mean loss over one batch, accumulating gradients into the parameters.
double accumulate_batch_gradients(model::Model& model, const std::vector<const ConversationSample*>& batch,
                                  model::FeatureCache& cache, const std::filesystem::path& dataset_path,
                                  const StageConfig& config, const losses::LossConfig& loss,
                                  std::vector<SampleRecord>* records = nullptr);

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const model::Model& model, const std::filesystem::path& path);
/// Throws VersionMismatch on a format version change and CorruptCheckpoint on
/// truncated or altered files.
std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path);
/// As above, and throws VersionMismatch when the stored model config differs.
std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected);

}  // namespace ullava::train
