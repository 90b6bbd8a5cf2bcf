// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/lm_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ullava/error.hpp"

namespace ullava::lm {

void LMConfig::validate() const {
    if (vocab_size == 0 || d_lm == 0 || n_layers == 0 || n_heads == 0 || max_sequence_length == 0) {
        throw Error(ErrorCode::Validation, "LM dimensions must be positive");
    }
    if (d_lm % n_heads != 0) throw Error(ErrorCode::Validation, "d_lm must be divisible by n_heads");
}

CausalLM::CausalLM(LMConfig config, ParameterStore& store, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    const std::size_t d = config_.d_lm;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    auto ones = [d] { return Matrix(1, d, 1.0); };
    tok_embed_ = store.add("lm.tok_embed", random_normal(config_.vocab_size, d, 1.0, rng));
    pos_embed_ = store.add("lm.pos_embed", random_normal(config_.max_sequence_length, d, 0.5, rng));
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        const std::string p = "lm.layers." + std::to_string(l) + ".";
        Block b;
        b.ln1_gamma = store.add(p + "ln1.gamma", ones());
        b.ln1_beta = store.add(p + "ln1.beta", Matrix(1, d));
        b.wq = store.add(p + "attn.wq", random_normal(d, d, s, rng));
        b.wk = store.add(p + "attn.wk", random_normal(d, d, s, rng));
        b.wv = store.add(p + "attn.wv", random_normal(d, d, s, rng));
        b.wo = store.add(p + "attn.wo", random_normal(d, d, s, rng));
        b.bo = store.add(p + "attn.bo", Matrix(1, d));
        b.ln2_gamma = store.add(p + "ln2.gamma", ones());
        b.ln2_beta = store.add(p + "ln2.beta", Matrix(1, d));
        b.w1 = store.add(p + "mlp.w1", random_normal(d, 4 * d, s, rng));
        b.b1 = store.add(p + "mlp.b1", Matrix(1, 4 * d));
        b.w2 = store.add(p + "mlp.w2", random_normal(4 * d, d, 0.5 * s, rng));
        b.b2 = store.add(p + "mlp.b2", Matrix(1, d));
        blocks_.push_back(std::move(b));
    }
    lnf_gamma_ = store.add("lm.ln_f.gamma", ones());
    lnf_beta_ = store.add("lm.ln_f.beta", Matrix(1, d));
    head_ = store.add("lm.head", random_normal(d, config_.vocab_size, s, rng));
}

ag::Var CausalLM::attention(const Block& block, const ag::Var& x) const {
    const std::size_t dh = config_.d_lm / config_.n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const ag::Var q = ag::matmul(x, block.wq);
    const ag::Var k = ag::matmul(x, block.wk);
    const ag::Var v = ag::matmul(x, block.wv);
    std::vector<ag::Var> heads;
    heads.reserve(config_.n_heads);
    for (std::size_t h = 0; h < config_.n_heads; ++h) {
        const ag::Var qh = ag::slice_cols(q, h * dh, dh);
        const ag::Var kh = ag::slice_cols(k, h * dh, dh);
        const ag::Var vh = ag::slice_cols(v, h * dh, dh);
        const ag::Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt);
        heads.push_back(ag::matmul(ag::causal_softmax(scores), vh));
    }
    const ag::Var merged = heads.size() == 1 ? heads.front() : ag::concat_cols(heads);
    return ag::add_row(ag::matmul(merged, block.wo), block.bo);
}

LMOutput CausalLM::forward(const tokens::TokenLayout& layout, const std::optional<ag::Var>& visual_embeds,
                           const std::optional<ag::Var>& boundary_embeds) const {
    const std::size_t n = layout.size();
    if (n == 0) throw Error(ErrorCode::DimMismatch, "empty token sequence");
    if (n > config_.max_sequence_length) {
        throw Error(ErrorCode::SequenceTooLong, std::to_string(n) + " tokens exceed max_sequence_length " +
                                                    std::to_string(config_.max_sequence_length));
    }
    for (auto id : layout.token_ids) {
        if (id >= config_.vocab_size) throw Error(ErrorCode::IndexOutOfRange, "token id " + std::to_string(id));
    }

    ag::Var tok = ag::gather_rows(tok_embed_, {layout.token_ids.begin(), layout.token_ids.end()});
    const auto patches = layout.patch_positions();
    if (visual_embeds) {
        if (!layout.visual_span || visual_embeds->rows() != patches.size() || visual_embeds->cols() != config_.d_lm) {
            throw Error(ErrorCode::DimMismatch, "visual embeddings (" + std::to_string(visual_embeds->rows()) +
                                                    " rows) do not match the layout's " +
                                                    std::to_string(patches.size()) + " patch positions");
        }
        tok = ag::scatter_rows(tok, patches, *visual_embeds);
    } else if (layout.visual_span) {
        throw Error(ErrorCode::DimMismatch, "layout has a visual span but no visual embeddings were given");
    }
    if (boundary_embeds) {
        if (!layout.visual_span || boundary_embeds->rows() != 2) {
            throw Error(ErrorCode::DimMismatch, "boundary embeddings need a visual span and 2 rows");
        }
        tok = ag::scatter_rows(tok, layout.boundary_positions(), *boundary_embeds);
    }
    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    ag::Var x = ag::add(tok, ag::gather_rows(pos_embed_, positions));

    for (const auto& b : blocks_) {
        x = ag::add(x, attention(b, ag::layer_norm(x, b.ln1_gamma, b.ln1_beta)));
        const ag::Var h = ag::layer_norm(x, b.ln2_gamma, b.ln2_beta);
        const ag::Var mlp = ag::add_row(ag::matmul(ag::gelu(ag::add_row(ag::matmul(h, b.w1), b.b1)), b.w2), b.b2);
        x = ag::add(x, mlp);
    }
    LMOutput out;
    out.hidden_states = ag::layer_norm(x, lnf_gamma_, lnf_beta_);
    out.logits = ag::matmul(out.hidden_states, head_);
    return out;
}

ag::Var coarse_grained_loss(const LMOutput& output, const tokens::TokenLayout& layout) {
    if (layout.loss_mask.size() != layout.size() || output.logits.rows() != layout.size()) {
        throw Error(ErrorCode::DimMismatch, "loss mask / logits do not match the layout length");
    }
    std::vector<std::size_t> rows;
    std::vector<std::size_t> targets;
    for (std::size_t i = 1; i < layout.size(); ++i) {
        if (!layout.loss_mask[i]) continue;
        rows.push_back(i - 1);
        targets.push_back(layout.token_ids[i]);
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyLossMask, "no loss-masked positions");
    return ag::cross_entropy(output.logits, rows, targets);
}

TaskStates extract_task_states(const LMOutput& output, const tokens::TokenLayout& layout) {
    const std::size_t n = output.hidden_states.rows();
    auto check = [n](const std::vector<std::size_t>& pos) {
        for (auto p : pos)
            if (p >= n) throw Error(ErrorCode::IndexOutOfRange, "task token position " + std::to_string(p));
    };
    check(layout.seg_positions);
    check(layout.loc_positions);
    return {ag::gather_rows(output.hidden_states, layout.seg_positions),
            ag::gather_rows(output.hidden_states, layout.loc_positions)};
}

tokens::TokenLayout generate(const CausalLM& model, const tokens::TokenLayout& prompt, const tokens::Vocabulary& vocab,
                             GenerateOptions options, const std::optional<ag::Var>& visual_embeds,
                             const std::optional<ag::Var>& boundary_embeds) {
    if (prompt.size() + options.max_new_tokens > model.config().max_sequence_length) {
        throw Error(ErrorCode::SequenceTooLong, "prompt of " + std::to_string(prompt.size()) + " tokens plus " +
                                                    std::to_string(options.max_new_tokens) +
                                                    " new tokens exceeds max_sequence_length");
    }
    ag::NoGradGuard no_grad;
    // Structural tokens never appear inside an answer.
    const auto& t = vocab.table();
    std::vector<bool> banned(model.config().vocab_size, false);
    for (auto id : {vocab.pad(), vocab.user(), vocab.assistant(), t.img_beg, t.img_patch, t.img_end, t.vid_beg,
                    t.vid_patch, t.vid_end}) {
        if (id < banned.size()) banned[id] = true;
    }
    tokens::TokenLayout out = prompt;
    for (std::size_t step = 0; step < options.max_new_tokens; ++step) {
        const LMOutput o = model.forward(out, visual_embeds, boundary_embeds);
        const auto last = o.logits.value().row(out.size() - 1);
        tokens::TokenId best = 0;
        double best_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < last.size(); ++j) {
            if (!banned[j] && last[j] > best_logit) {
                best_logit = last[j];
                best = static_cast<tokens::TokenId>(j);
            }
        }
        out.token_ids.push_back(best);
        if (best == vocab.eos()) break;
    }
    if (options.max_new_tokens > 0) tokens::index_layout(out, vocab);
    return out;
}

}  // namespace ullava::lm
