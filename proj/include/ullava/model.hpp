// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The full multimodal model: frozen encoder, visual projector, causal LM and
// the pixel/region heads, plus per-sample forward passes and predictions.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ullava/config.hpp"
#include "ullava/encoders.hpp"
#include "ullava/heads.hpp"
#include "ullava/lm_core.hpp"
#include "ullava/losses.hpp"
#include "ullava/params.hpp"
#include "ullava/tokens.hpp"
#include "ullava/types.hpp"

namespace ullava::model {

struct ModelConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 8;
    std::size_t n_frames = 2;
    std::size_t d_vis = 32;
    std::size_t d_lm = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t max_sequence_length = 128;
    std::size_t d_prompt = 32;
    std::size_t mask_channels = 8;
    std::size_t d_box = 32;
    std::uint64_t seed = 7;

    std::size_t grid() const { return image_size / patch_size; }
    std::size_t n_img_patches() const { return grid() * grid(); }

    /// Reads `model.*` keys; missing keys keep their defaults.
    static ModelConfig from_config(const Config& config);
    void to_config(Config& config) const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct VisualInput {
    std::optional<encoders::ImageFeature> image;
    std::optional<encoders::VideoFeature> video;

    std::optional<VisualKind> kind() const;
};

struct VisualEmbeds {
    std::optional<ag::Var> visual;
    std::optional<ag::Var> boundary;
};

class Model {
public:
    Model(ModelConfig config, tokens::Vocabulary vocab);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const { return config_; }
    const tokens::Vocabulary& vocab() const { return vocab_; }
    const encoders::ImageEncoder& encoder() const { return encoder_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const encoders::VisualProjector& projector() const { return projector_; }
    const lm::CausalLM& lm() const { return lm_; }
    const heads::PixelHead& pixel_head() const { return pixel_; }
    const heads::RegionHead& region_head() const { return region_; }

    VisualInput encode(const encoders::Image& image) const;
    VisualInput encode(const encoders::Video& video) const;
    VisualEmbeds embed(const VisualInput& input) const;

private:
    ModelConfig config_;
    tokens::Vocabulary vocab_;
    encoders::ImageEncoder encoder_;
    ParameterStore store_;
    std::mt19937_64 rng_;
    encoders::VisualProjector projector_;
    lm::CausalLM lm_;
    heads::PixelHead pixel_;
    heads::RegionHead region_;
};

/// Vocabulary over every word in the samples' turns (bracketed tokens excluded).
tokens::Vocabulary build_vocabulary(const std::vector<ConversationSample>& samples, const ModelConfig& config);

/// Loads and encodes visual inputs, caching by resolved path.
class FeatureCache {
public:
    const VisualInput& get(const Model& model, const std::filesystem::path& path, VisualKind kind);
    const VisualInput& get(const Model& model, const std::filesystem::path& dataset_path, const ConversationSample& sample);

private:
    std::map<std::string, VisualInput> cache_;
};

VisualInput load_visual(const Model& model, const std::filesystem::path& path, VisualKind kind);

struct SampleForward {
    tokens::TokenLayout layout;
    losses::FineGrainedLoss loss;
    std::vector<ag::Var> mask_logits;  // one per <SEG>
    std::vector<ag::Var> boxes;        // one per <LOC>
};

/// Teacher-forced forward over the rendered sample. With `fine_grained` false
/// only the language-modeling loss is computed.
SampleForward forward_sample(const Model& model, const ConversationSample& sample, const VisualInput& visual,
                             const losses::LossConfig& loss_config, tokens::RenderOptions render = {},
                             bool fine_grained = true);

struct Prediction {
    std::string text;  // assistant text
    std::vector<BinaryMask> masks;
    std::vector<NormalizedBox> boxes;
    std::optional<NormalizedBox> fused_box;
};

BinaryMask logits_to_mask(const Matrix& logits);

/// Masks and boxes read off the ground-truth layout.
Prediction predict_teacher_forced(const Model& model, const ConversationSample& sample, const VisualInput& visual);

/// Greedy generation from a single user turn, then heads on the generated layout.
Prediction predict_generate(const Model& model, const VisualInput& visual, const std::string& user_text,
                            std::size_t max_new_tokens = 32);

}  // namespace ullava::model
