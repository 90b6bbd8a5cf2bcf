// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Frozen toy visual encoders (a stand-in for a pretrained CLIP tower) and the
// trainable visual projector into the language-model embedding space.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ullava/autograd.hpp"
#include "ullava/params.hpp"

namespace ullava::encoders {

/// RGB image, row-major H×W×3, channel values in [0, 1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0.0f) {}

    float& at(std::size_t r, std::size_t c, std::size_t ch) { return rgb[(r * width + c) * 3 + ch]; }
    float at(std::size_t r, std::size_t c, std::size_t ch) const { return rgb[(r * width + c) * 3 + ch]; }

    bool operator==(const Image&) const = default;
};

/// Frames of equal size; frame count must equal the configured T.
using Video = std::vector<Image>;

struct ImageFeature {
    Matrix patch_embeddings;  // [n_img_patches × d_vis]
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
};

struct VideoFeature {
    Matrix spatial_embeddings;   // [n_img_patches × d_vis], temporal mean of patch features
    Matrix temporal_embeddings;  // [T × d_vis], per-frame mean over patches

    /// Spatial rows followed by temporal rows: [(n_img_patches + T) × d_vis].
    Matrix concatenated() const;
};

struct EncoderConfig {
    std::size_t patch_size = 8;
    std::size_t d_vis = 32;
    std::size_t n_img_patches = 16;
    std::size_t n_frames = 2;
    std::uint64_t seed = 7;
};

/// Linear patch embedding plus a fixed position code, both drawn once from
/// `seed` and never trained.
class ImageEncoder {
public:
    explicit ImageEncoder(EncoderConfig config);

    const EncoderConfig& config() const { return config_; }

    /// Throws BadShape when H or W is not a multiple of the patch size or the
    /// grid does not hold n_img_patches patches.
    ImageFeature encode_image(const Image& image) const;
    /// Throws BadShape when the frame count differs from n_frames.
    VideoFeature encode_video(const Video& frames) const;

private:
    EncoderConfig config_;
    Matrix patch_weight_;  // [patch_size² · 3 × d_vis]
    Matrix position_;      // [n_img_patches × d_vis]
};

/// Single linear layer d_vis -> d_lm, plus the two learned embeddings used for
/// the video begin/end tokens.
struct VisualProjector {
    ag::Var weight;        // [d_vis × d_lm]
    ag::Var bias;          // [1 × d_lm]
    ag::Var video_tokens;  // [2 × d_lm]

    /// Registers "visual_projector.{weight,bias,video_tokens}" in `store`.
    static VisualProjector create(ParameterStore& store, std::size_t d_vis, std::size_t d_lm, std::mt19937_64& rng);

    std::size_t input_dim() const { return weight.rows(); }
    std::size_t output_dim() const { return weight.cols(); }
};

/// Maps visual features to LM input embeddings; throws DimMismatch on d_vis mismatch.
ag::Var project_visual(const Matrix& features, const VisualProjector& proj);
ag::Var project_visual(const ImageFeature& feature, const VisualProjector& proj);
ag::Var project_visual(const VideoFeature& feature, const VisualProjector& proj);

}  // namespace ullava::encoders
