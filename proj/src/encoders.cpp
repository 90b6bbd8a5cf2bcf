// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/encoders.hpp"

#include <cmath>
#include <string>

#include "ullava/error.hpp"

namespace ullava::encoders {

Matrix VideoFeature::concatenated() const {
    Matrix out(spatial_embeddings.rows + temporal_embeddings.rows, spatial_embeddings.cols);
    std::copy(spatial_embeddings.data.begin(), spatial_embeddings.data.end(), out.data.begin());
    std::copy(temporal_embeddings.data.begin(), temporal_embeddings.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(spatial_embeddings.size()));
    return out;
}

ImageEncoder::ImageEncoder(EncoderConfig config) : config_(config) {
    if (config_.patch_size == 0 || config_.d_vis == 0 || config_.n_img_patches == 0) {
        throw Error(ErrorCode::BadShape, "encoder dimensions must be positive");
    }
    std::mt19937_64 rng(config_.seed);
    const std::size_t patch_dim = config_.patch_size * config_.patch_size * 3;
    patch_weight_ = random_normal(patch_dim, config_.d_vis, 1.0 / std::sqrt(static_cast<double>(patch_dim)), rng);
    position_ = random_normal(config_.n_img_patches, config_.d_vis, 0.5, rng);
}

ImageFeature ImageEncoder::encode_image(const Image& image) const {
    const std::size_t p = config_.patch_size;
    if (image.height == 0 || image.width == 0 || image.height % p != 0 || image.width % p != 0) {
        throw Error(ErrorCode::BadShape, std::to_string(image.height) + "x" + std::to_string(image.width) +
                                             " image is not divisible by patch size " + std::to_string(p));
    }
    if (image.rgb.size() != image.height * image.width * 3) throw Error(ErrorCode::BadShape, "image buffer size");
    ImageFeature f;
    f.grid_rows = image.height / p;
    f.grid_cols = image.width / p;
    if (f.grid_rows * f.grid_cols != config_.n_img_patches) {
        throw Error(ErrorCode::BadShape, "image grid yields " + std::to_string(f.grid_rows * f.grid_cols) +
                                             " patches, expected " + std::to_string(config_.n_img_patches));
    }
    Matrix patches(config_.n_img_patches, p * p * 3);
    for (std::size_t gr = 0; gr < f.grid_rows; ++gr) {
        for (std::size_t gc = 0; gc < f.grid_cols; ++gc) {
            auto row = patches.row(gr * f.grid_cols + gc);
            std::size_t k = 0;
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t c = 0; c < p; ++c)
                    for (std::size_t ch = 0; ch < 3; ++ch) row[k++] = image.at(gr * p + r, gc * p + c, ch) - 0.5;
        }
    }
    f.patch_embeddings = matmul(patches, patch_weight_);
    for (std::size_t i = 0; i < f.patch_embeddings.size(); ++i) f.patch_embeddings.data[i] += position_.data[i];
    return f;
}

VideoFeature ImageEncoder::encode_video(const Video& frames) const {
    if (frames.size() != config_.n_frames || frames.empty()) {
        throw Error(ErrorCode::BadShape, "video has " + std::to_string(frames.size()) + " frames, expected " +
                                             std::to_string(config_.n_frames));
    }
    VideoFeature v;
    v.spatial_embeddings = Matrix(config_.n_img_patches, config_.d_vis);
    v.temporal_embeddings = Matrix(frames.size(), config_.d_vis);
    const double inv_t = 1.0 / static_cast<double>(frames.size());
    const double inv_p = 1.0 / static_cast<double>(config_.n_img_patches);
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Matrix f = encode_image(frames[t]).patch_embeddings;
        for (std::size_t i = 0; i < f.rows; ++i) {
            for (std::size_t j = 0; j < f.cols; ++j) {
                v.spatial_embeddings(i, j) += f(i, j) * inv_t;
                v.temporal_embeddings(t, j) += f(i, j) * inv_p;
            }
        }
    }
    return v;
}

VisualProjector VisualProjector::create(ParameterStore& store, std::size_t d_vis, std::size_t d_lm,
                                        std::mt19937_64& rng) {
    VisualProjector p;
    p.weight = store.add("visual_projector.weight", random_normal(d_vis, d_lm, 1.0 / std::sqrt(static_cast<double>(d_vis)), rng));
    p.bias = store.add("visual_projector.bias", Matrix(1, d_lm));
    p.video_tokens = store.add("visual_projector.video_tokens", random_normal(2, d_lm, 1.0, rng));
    return p;
}

ag::Var project_visual(const Matrix& features, const VisualProjector& proj) {
    if (features.cols != proj.input_dim()) {
        throw Error(ErrorCode::DimMismatch, "visual features have width " + std::to_string(features.cols) +
                                                ", projector expects " + std::to_string(proj.input_dim()));
    }
    return ag::add_row(ag::matmul(ag::constant(features), proj.weight), proj.bias);
}

ag::Var project_visual(const ImageFeature& feature, const VisualProjector& proj) {
    return project_visual(feature.patch_embeddings, proj);
}

ag::Var project_visual(const VideoFeature& feature, const VisualProjector& proj) {
    return project_visual(feature.concatenated(), proj);
}

}  // namespace ullava::encoders
