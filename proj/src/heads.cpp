// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/heads.hpp"

#include <cmath>
#include <string>

#include "ullava/error.hpp"

namespace ullava::heads {

namespace {

Matrix init_weight(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return random_normal(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

void require_row_vector(const ag::Var& v, std::size_t width, const char* what) {
    if (v.rows() != 1 || v.cols() != width) {
        throw Error(ErrorCode::DimMismatch, std::string(what) + " must be 1x" + std::to_string(width) + ", got " +
                                                std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
    }
}

}  // namespace

Mlp Mlp::create(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& widths,
                std::mt19937_64& rng) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const std::string p = prefix + ".layers." + std::to_string(i);
        m.weights.push_back(store.add(p + ".weight", init_weight(widths[i], widths[i + 1], rng)));
        m.biases.push_back(store.add(p + ".bias", Matrix(1, widths[i + 1])));
    }
    return m;
}

ag::Var Mlp::operator()(const ag::Var& x) const {
    ag::Var h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        h = ag::add_row(ag::matmul(h, weights[i]), biases[i]);
        if (i + 1 < weights.size()) h = ag::gelu(h);
    }
    return h;
}

std::vector<std::size_t> Mlp::widths() const {
    std::vector<std::size_t> w;
    if (weights.empty()) return w;
    w.push_back(weights.front().rows());
    for (const auto& m : weights) w.push_back(m.cols());
    return w;
}

PixelHead::PixelHead(PixelHeadConfig config, ParameterStore& store, std::mt19937_64& rng) : config_(config) {
    const std::size_t dp = config_.d_prompt;
    const std::size_t p = config_.patch_size;
    const std::size_t c = config_.mask_channels;
    projector_ = Mlp::create(store, "pixel_head.projector", {config_.d_lm, config_.d_lm, dp}, rng);
    w_img_ = store.add("pixel_head.decoder.w_img", init_weight(config_.d_vis, dp, rng));
    w_prompt_ = store.add("pixel_head.decoder.w_prompt", init_weight(dp, dp, rng));
    b_img_ = store.add("pixel_head.decoder.b_img", Matrix(1, dp));
    w_up_ = store.add("pixel_head.decoder.w_up", init_weight(dp, p * p * c, rng));
    b_up_ = store.add("pixel_head.decoder.b_up", Matrix(1, p * p * c));
    w_hyper_ = store.add("pixel_head.decoder.w_hyper", init_weight(dp, c, rng));
    b_hyper_ = store.add("pixel_head.decoder.b_hyper", Matrix(1, c));
    b_out_ = store.add("pixel_head.decoder.b_out", Matrix(1, 1));

    const std::size_t w = config_.width();
    shuffle_.resize(config_.height() * w * c);
    for (std::size_t gr = 0; gr < config_.grid_rows; ++gr)
        for (std::size_t gc = 0; gc < config_.grid_cols; ++gc)
            for (std::size_t r = 0; r < p; ++r)
                for (std::size_t cc = 0; cc < p; ++cc)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const std::size_t pixel = (gr * p + r) * w + (gc * p + cc);
                        const std::size_t patch = gr * config_.grid_cols + gc;
                        shuffle_[pixel * c + ch] = patch * (p * p * c) + (r * p + cc) * c + ch;
                    }
}

ag::Var PixelHead::project(const ag::Var& seg_state) const {
    require_row_vector(seg_state, config_.d_lm, "seg state");
    return projector_(seg_state);
}

ag::Var PixelHead::predict_mask_logits(const ag::Var& seg_state, const encoders::ImageFeature& image) const {
    if (image.patch_embeddings.cols != config_.d_vis || image.grid_rows != config_.grid_rows ||
        image.grid_cols != config_.grid_cols) {
        throw Error(ErrorCode::DimMismatch, "image feature does not match the mask decoder's grid or width");
    }
    const ag::Var q = project(seg_state);
    const ag::Var modulation = ag::add(ag::matmul(q, w_prompt_), b_img_);
    const ag::Var e = ag::gelu(ag::add_row(ag::matmul(ag::constant(image.patch_embeddings), w_img_), modulation));
    const ag::Var blocks = ag::add_row(ag::matmul(e, w_up_), b_up_);
    const std::size_t hw = config_.height() * config_.width();
    const ag::Var pixels = ag::gather_flat(blocks, shuffle_, hw, config_.mask_channels);
    const ag::Var hyper = ag::add(ag::matmul(q, w_hyper_), b_hyper_);
    const ag::Var flat = ag::add_row(ag::matmul(pixels, ag::transpose(hyper)), b_out_);
    std::vector<std::size_t> identity(hw);
    for (std::size_t i = 0; i < hw; ++i) identity[i] = i;
    return ag::gather_flat(flat, identity, config_.height(), config_.width());
}

RegionHead::RegionHead(RegionHeadConfig config, ParameterStore& store, std::mt19937_64& rng) : config_(config) {
    if (config_.d_box < 2) throw Error(ErrorCode::Validation, "d_box must be at least 2");
    projector_ = Mlp::create(store, "region_head.projector", {config_.d_lm, config_.d_lm, config_.d_box}, rng);
    decoder_ = Mlp::create(store, "region_head.decoder", {config_.d_box, config_.d_box, config_.d_box / 2, 4}, rng);
}

ag::Var RegionHead::raw_box(const ag::Var& loc_state) const {
    require_row_vector(loc_state, config_.d_lm, "loc state");
    return decoder_(projector_(loc_state));
}

ag::Var RegionHead::predict_box_var(const ag::Var& loc_state) const {
    return squash_box(raw_box(loc_state));
}

NormalizedBox RegionHead::predict_box(const ag::Var& loc_state) const {
    return to_box(predict_box_var(loc_state));
}

ag::Var squash_box(const ag::Var& raw) {
    require_row_vector(raw, 4, "raw box");
    const ag::Var s = ag::sigmoid(raw);
    const ag::Var a = ag::gather_flat(s, {0, 1}, 1, 2);
    const ag::Var b = ag::gather_flat(s, {2, 3}, 1, 2);
    return ag::concat_cols({ag::minimum(a, b), ag::maximum(a, b)});
}

NormalizedBox to_box(const ag::Var& box) {
    require_row_vector(box, 4, "box");
    const auto& v = box.value().data;
    return {v[0], v[1], v[2], v[3]};
}

}  // namespace ullava::heads
