// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Task heads fed by <SEG>/<LOC> hidden states.
//
// Pixel path: two-layer projector d_lm -> d_lm -> d_prompt, then a promptable
// mask decoder standing in for SAM. The decoder adds a linear map of the prompt
// to every patch embedding, upsamples each patch to a patch_size² block of
// per-pixel embeddings, and takes the dot product with a hypernetwork vector
// computed from the prompt:
//
//   E      = gelu(F·W_img + 1·(q·W_q) + b_img)          [P × d_prompt]
//   U      = pixel_shuffle(E·W_up + b_up)                [H·W × c]
//   logits = U·(q·W_h + b_h)ᵀ + b_out                    [H × W]
//
// Region path: projector d_lm -> d_lm -> d_box, decoder d_box -> d_box ->
// d_box/2 -> 4, then sigmoid and per-axis sort into corner order.

#pragma once

#include <cstddef>
#include <random>

#include "ullava/autograd.hpp"
#include "ullava/encoders.hpp"
#include "ullava/params.hpp"
#include "ullava/types.hpp"

namespace ullava::heads {

struct PixelHeadConfig {
    std::size_t d_lm = 64;
    std::size_t d_vis = 32;
    std::size_t d_prompt = 32;
    std::size_t mask_channels = 8;
    std::size_t patch_size = 8;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 4;

    std::size_t height() const { return grid_rows * patch_size; }
    std::size_t width() const { return grid_cols * patch_size; }
};

/// GELU-activated MLP; biases per layer.
struct Mlp {
    std::vector<ag::Var> weights;
    std::vector<ag::Var> biases;

    static Mlp create(ParameterStore& store, const std::string& prefix, const std::vector<std::size_t>& widths,
                      std::mt19937_64& rng);
    /// Hidden layers use GELU; the last layer is linear.
    ag::Var operator()(const ag::Var& x) const;
    std::vector<std::size_t> widths() const;
};

class PixelHead {
public:
    /// Registers "pixel_head.projector.*" and "pixel_head.decoder.*".
    PixelHead(PixelHeadConfig config, ParameterStore& store, std::mt19937_64& rng);

    const PixelHeadConfig& config() const { return config_; }
    const Mlp& projector() const { return projector_; }

    /// Prompt embedding [1 × d_prompt] from a seg hidden state [1 × d_lm].
    ag::Var project(const ag::Var& seg_state) const;
    /// Mask logits [H × W]; throws DimMismatch on mismatched widths or grid.
    ag::Var predict_mask_logits(const ag::Var& seg_state, const encoders::ImageFeature& image) const;

private:
    PixelHeadConfig config_;
    Mlp projector_;
    ag::Var w_img_, w_prompt_, b_img_;
    ag::Var w_up_, b_up_;
    ag::Var w_hyper_, b_hyper_;
    ag::Var b_out_;
    std::vector<std::size_t> shuffle_;  // pixel-shuffle source indices
};

struct RegionHeadConfig {
    std::size_t d_lm = 64;
    std::size_t d_box = 32;
};

class RegionHead {
public:
    /// Registers "region_head.projector.*" and "region_head.decoder.*".
    RegionHead(RegionHeadConfig config, ParameterStore& store, std::mt19937_64& rng);

    const Mlp& projector() const { return projector_; }
    const Mlp& decoder() const { return decoder_; }

    /// Raw pre-sigmoid 4-vector [1 × 4].
    ag::Var raw_box(const ag::Var& loc_state) const;
    /// Corner box [1 × 4] as (x1, y1, x2, y2), differentiable almost everywhere.
    ag::Var predict_box_var(const ag::Var& loc_state) const;
    NormalizedBox predict_box(const ag::Var& loc_state) const;

private:
    RegionHeadConfig config_;
    Mlp projector_;
    Mlp decoder_;
};

/// sigmoid, then x1 = min(sx_a, sx_b), x2 = max(...), same for y.
ag::Var squash_box(const ag::Var& raw);
NormalizedBox to_box(const ag::Var& box);

}  // namespace ullava::heads
