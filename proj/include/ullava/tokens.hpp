// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Special-token vocabulary and rendering of conversation samples into token
// sequences with recorded visual-patch, <SEG> and <LOC> positions.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ullava/types.hpp"

namespace ullava::tokens {

using TokenId = std::uint32_t;

/// Special-token strings in vocabulary order: image, video, tag, region, pixel.
inline constexpr std::array<std::string_view, 10> kSpecialTokens = {
    "<img_beg>", "<img_patch>", "</img_end>", "<vid_beg>", "<vid_patch>",
    "</vid_end>", "<tag>",      "</tag>",     "<LOC>",     "<SEG>",
};

/// Base tokens that structure a conversation; always the first ids.
inline constexpr std::array<std::string_view, 5> kScaffoldTokens = {
    "[PAD]", "[UNK]", "[EOS]", "[USER]", "[ASSISTANT]",
};

inline constexpr std::string_view kImagePlaceholder = "<image>";
inline constexpr std::string_view kVideoPlaceholder = "<video>";

struct SpecialTokenTable {
    TokenId img_beg = 0;
    TokenId img_patch = 0;
    TokenId img_end = 0;
    TokenId vid_beg = 0;
    TokenId vid_patch = 0;
    TokenId vid_end = 0;
    TokenId tag_open = 0;
    TokenId tag_close = 0;
    TokenId loc = 0;
    TokenId seg = 0;
    std::size_t n_img_patches = 256;
    std::size_t n_frames = 8;

    /// Specials appended after a base vocabulary of `base_size` tokens.
    static SpecialTokenTable appended_to(std::size_t base_size, std::size_t n_img_patches = 256,
                                         std::size_t n_frames = 8);

    std::size_t video_patch_count() const { return n_img_patches + n_frames; }
    std::array<TokenId, 10> ids() const;
    bool is_special(TokenId id) const;

    std::vector<TokenId> render_image_span() const;
    std::vector<TokenId> render_video_span() const;
};

/// Splits text into word, punctuation and <bracketed> tokens.
std::vector<std::string> split_words(std::string_view text);

/// Base tokens (scaffold + words) followed by the ten special tokens.
class Vocabulary {
public:
    /// Scaffold tokens, then the sorted unique `words`, then the specials.
    static Vocabulary build(const std::vector<std::string>& words, std::size_t n_img_patches = 256,
                            std::size_t n_frames = 8);
    /// Reads the one-token-per-line file written by save().
    static Vocabulary load(const std::filesystem::path& path, std::size_t n_img_patches = 256,
                           std::size_t n_frames = 8);
    static Vocabulary from_tokens(std::vector<std::string> tokens, std::size_t n_img_patches,
                                  std::size_t n_frames);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return tokens_.size(); }
    std::size_t base_size() const { return tokens_.size() - kSpecialTokens.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const SpecialTokenTable& table() const { return table_; }

    std::optional<TokenId> find(std::string_view token) const;
    const std::string& token(TokenId id) const;

    TokenId pad() const { return 0; }
    TokenId unk() const { return 1; }
    TokenId eos() const { return 2; }
    TokenId user() const { return 3; }
    TokenId assistant() const { return 4; }

    /// Word tokens map to their ids or [UNK]; bracketed tokens must be specials.
    std::vector<TokenId> encode(std::string_view text) const;
    /// Space-joined token strings.
    std::string decode(std::span<const TokenId> ids) const;

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && table_.ids() == o.table_.ids(); }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    SpecialTokenTable table_;
};

struct Span {
    std::size_t start = 0;
    std::size_t length = 0;

    bool operator==(const Span&) const = default;
};

/// Rendered token sequence. `visual_span` covers the whole visual block
/// (begin token, patches, end token). loss_mask[i] marks token i as a
/// next-token prediction target (predicted from position i - 1).
struct TokenLayout {
    std::vector<TokenId> token_ids;
    std::optional<Span> visual_span;
    std::optional<VisualKind> visual_kind;
    std::vector<std::size_t> seg_positions;
    std::vector<std::size_t> loc_positions;
    std::vector<bool> loss_mask;

    std::size_t size() const { return token_ids.size(); }
    /// Positions of the patch tokens inside the visual span.
    std::vector<std::size_t> patch_positions() const;
    /// Positions of the begin/end tokens of the visual span.
    std::vector<std::size_t> boundary_positions() const;

    bool operator==(const TokenLayout&) const = default;
};

struct RenderOptions {
    std::size_t token_limit = 512;
};

/// Renders visual span then turns as [USER] text / [ASSISTANT] text [EOS].
/// Modality placeholders in user text are consumed by the visual span.
TokenLayout render_sample(const ConversationSample& sample, const Vocabulary& vocab, RenderOptions options = {});

/// Renders a generation prompt: visual span, one user turn, then [ASSISTANT].
TokenLayout render_prompt(std::optional<VisualKind> visual, std::string_view user_text, const Vocabulary& vocab,
                          RenderOptions options = {});

/// Recomputes seg/loc positions and the assistant loss mask from token ids.
void index_layout(TokenLayout& layout, const Vocabulary& vocab);

/// Turns and modality recovered from a layout. The placeholder is put at the
/// front of the first user turn so that re-rendering reproduces the layout.
struct DecodedConversation {
    std::optional<VisualKind> visual_kind;
    std::vector<Turn> turns;
};
DecodedConversation decode_layout(const TokenLayout& layout, const Vocabulary& vocab);

}  // namespace ullava::tokens
