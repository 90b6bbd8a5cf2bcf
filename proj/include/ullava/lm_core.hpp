// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Tiny pre-norm causal transformer. Visual embeddings replace the input
// embeddings at patch positions; the final-layer hidden states (after the
// closing layer norm, before the LM head) feed the task heads.

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ullava/autograd.hpp"
#include "ullava/params.hpp"
#include "ullava/tokens.hpp"

namespace ullava::lm {

struct LMConfig {
    std::size_t vocab_size = 0;
    std::size_t d_lm = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    /// Also the attention context window.
    std::size_t max_sequence_length = 128;

    void validate() const;
};

struct LMOutput {
    ag::Var logits;         // [L × vocab_size]
    ag::Var hidden_states;  // [L × d_lm]
};

class CausalLM {
public:
    /// Registers its parameters under "lm." in `store`.
    CausalLM(LMConfig config, ParameterStore& store, std::mt19937_64& rng);

    const LMConfig& config() const { return config_; }

    /// `visual_embeds` replaces the patch positions of the layout's visual span;
    /// `boundary_embeds` (2 rows), when given, replaces its begin/end tokens.
    LMOutput forward(const tokens::TokenLayout& layout, const std::optional<ag::Var>& visual_embeds = std::nullopt,
                     const std::optional<ag::Var>& boundary_embeds = std::nullopt) const;

private:
    struct Block {
        ag::Var ln1_gamma, ln1_beta;
        ag::Var wq, wk, wv, wo, bo;
        ag::Var ln2_gamma, ln2_beta;
        ag::Var w1, b1, w2, b2;
    };

    ag::Var attention(const Block& block, const ag::Var& x) const;

    LMConfig config_;
    ag::Var tok_embed_;
    ag::Var pos_embed_;
    std::vector<Block> blocks_;
    ag::Var lnf_gamma_, lnf_beta_;
    ag::Var head_;
};

/// Mean negative log-likelihood over loss-masked positions; throws EmptyLossMask.
ag::Var coarse_grained_loss(const LMOutput& output, const tokens::TokenLayout& layout);

struct TaskStates {
    ag::Var seg_states;  // [n_seg × d_lm]
    ag::Var loc_states;  // [n_loc × d_lm]
};

/// Gathers hidden states at <SEG>/<LOC> positions in sequence order.
TaskStates extract_task_states(const LMOutput& output, const tokens::TokenLayout& layout);

struct GenerateOptions {
    std::size_t max_new_tokens = 32;
};

/// Greedy decoding until [EOS] or the token budget. The returned layout is
/// re-indexed so generated <SEG>/<LOC> positions are recorded.
tokens::TokenLayout generate(const CausalLM& model, const tokens::TokenLayout& prompt, const tokens::Vocabulary& vocab,
                             GenerateOptions options, const std::optional<ag::Var>& visual_embeds = std::nullopt,
                             const std::optional<ag::Var>& boundary_embeds = std::nullopt);

}  // namespace ullava::lm
