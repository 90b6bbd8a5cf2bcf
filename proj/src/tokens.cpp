// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/tokens.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "ullava/error.hpp"

namespace ullava::tokens {

namespace {

constexpr std::string_view kPunctuation = ".,?!;:\"()";

bool is_bracketed(std::string_view tok) {
    return tok.size() >= 2 && tok.front() == '<' && tok.back() == '>';
}

}  // namespace

SpecialTokenTable SpecialTokenTable::appended_to(std::size_t base_size, std::size_t n_img_patches,
                                                 std::size_t n_frames) {
    SpecialTokenTable t;
    auto id = [base_size](std::size_t k) { return static_cast<TokenId>(base_size + k); };
    t.img_beg = id(0);
    t.img_patch = id(1);
    t.img_end = id(2);
    t.vid_beg = id(3);
    t.vid_patch = id(4);
    t.vid_end = id(5);
    t.tag_open = id(6);
    t.tag_close = id(7);
    t.loc = id(8);
    t.seg = id(9);
    t.n_img_patches = n_img_patches;
    t.n_frames = n_frames;
    return t;
}

std::array<TokenId, 10> SpecialTokenTable::ids() const {
    return {img_beg, img_patch, img_end, vid_beg, vid_patch, vid_end, tag_open, tag_close, loc, seg};
}

bool SpecialTokenTable::is_special(TokenId id) const {
    const auto all = ids();
    return std::find(all.begin(), all.end(), id) != all.end();
}

std::vector<TokenId> SpecialTokenTable::render_image_span() const {
    std::vector<TokenId> out;
    out.reserve(n_img_patches + 2);
    out.push_back(img_beg);
    out.insert(out.end(), n_img_patches, img_patch);
    out.push_back(img_end);
    return out;
}

std::vector<TokenId> SpecialTokenTable::render_video_span() const {
    std::vector<TokenId> out;
    out.reserve(video_patch_count() + 2);
    out.push_back(vid_beg);
    out.insert(out.end(), video_patch_count(), vid_patch);
    out.push_back(vid_end);
    return out;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else if (ch == '<') {
            const auto close = text.find('>', i);
            const auto space = text.find_first_of(" \t\r\n<", i + 1);
            if (close != std::string_view::npos && (space == std::string_view::npos || close < space)) {
                flush();
                out.emplace_back(text.substr(i, close - i + 1));
                i = close;
            } else {
                word.push_back(ch);
            }
        } else if (kPunctuation.find(ch) != std::string_view::npos) {
            flush();
            out.emplace_back(1, ch);
        } else {
            word.push_back(ch);
        }
    }
    flush();
    return out;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, std::size_t n_img_patches, std::size_t n_frames) {
    if (tokens.size() < kScaffoldTokens.size() + kSpecialTokens.size()) {
        throw Error(ErrorCode::ParseError, "vocabulary too small");
    }
    for (std::size_t i = 0; i < kScaffoldTokens.size(); ++i) {
        if (tokens[i] != kScaffoldTokens[i]) throw Error(ErrorCode::ParseError, "vocabulary scaffold token " + std::to_string(i));
    }
    const std::size_t base = tokens.size() - kSpecialTokens.size();
    for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
        if (tokens[base + i] != kSpecialTokens[i]) {
            throw Error(ErrorCode::ParseError, "special tokens must close the vocabulary in fixed order");
        }
    }
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
            throw Error(ErrorCode::ParseError, "duplicate vocabulary token '" + v.tokens_[i] + "'");
        }
    }
    v.table_ = SpecialTokenTable::appended_to(base, n_img_patches, n_frames);
    return v;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& words, std::size_t n_img_patches, std::size_t n_frames) {
    std::set<std::string> reserved;
    for (auto s : kScaffoldTokens) reserved.emplace(s);
    for (auto s : kSpecialTokens) reserved.emplace(s);
    std::set<std::string> unique;
    for (const auto& w : words) {
        if (w.empty() || reserved.count(w) || is_bracketed(w)) continue;
        unique.insert(w);
    }
    std::vector<std::string> tokens(kScaffoldTokens.begin(), kScaffoldTokens.end());
    tokens.insert(tokens.end(), unique.begin(), unique.end());
    tokens.insert(tokens.end(), kSpecialTokens.begin(), kSpecialTokens.end());
    return from_tokens(std::move(tokens), n_img_patches, n_frames);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::size_t n_img_patches, std::size_t n_frames) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open vocabulary " + path.string());
    std::vector<std::string> tokens;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens), n_img_patches, n_frames);
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write vocabulary " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= tokens_.size()) throw Error(ErrorCode::IndexOutOfRange, "token id " + std::to_string(id));
    return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : split_words(text)) {
        if (is_bracketed(w)) {
            auto id = find(w);
            if (!id || !table_.is_special(*id)) throw Error(ErrorCode::UnknownPlaceholder, "unsubstituted placeholder " + w);
            out.push_back(*id);
        } else {
            out.push_back(find(w).value_or(unk()));
        }
    }
    return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(' ');
        out += token(ids[i]);
    }
    return out;
}

std::vector<std::size_t> TokenLayout::patch_positions() const {
    std::vector<std::size_t> out;
    if (!visual_span || visual_span->length < 2) return out;
    for (std::size_t i = visual_span->start + 1; i + 1 < visual_span->start + visual_span->length; ++i) out.push_back(i);
    return out;
}

std::vector<std::size_t> TokenLayout::boundary_positions() const {
    if (!visual_span) return {};
    return {visual_span->start, visual_span->start + visual_span->length - 1};
}

namespace {

// Appends the tokens of one turn's text; modality placeholders are counted
// and dropped, specials are checked against the turn's role.
void append_turn_text(std::string_view text, Role role, const Vocabulary& vocab, std::vector<TokenId>& out,
                      std::size_t& placeholders, std::optional<VisualKind>& placeholder_kind) {
    const auto& table = vocab.table();
    for (const auto& w : split_words(text)) {
        if (!is_bracketed(w)) {
            out.push_back(vocab.find(w).value_or(vocab.unk()));
            continue;
        }
        if (w == kImagePlaceholder || w == kVideoPlaceholder) {
            if (role != Role::User) throw Error(ErrorCode::InvalidSample, "modality placeholder in assistant turn");
            ++placeholders;
            placeholder_kind = w == kImagePlaceholder ? VisualKind::Image : VisualKind::Video;
            continue;
        }
        auto id = vocab.find(w);
        if (!id || !table.is_special(*id)) throw Error(ErrorCode::UnknownPlaceholder, "unsubstituted placeholder " + w);
        const bool task_token = *id == table.tag_open || *id == table.tag_close || *id == table.loc || *id == table.seg;
        if (!task_token) throw Error(ErrorCode::InvalidSample, "visual token " + w + " inside turn text");
        if (role != Role::Assistant) throw Error(ErrorCode::InvalidSample, w + " outside an assistant turn");
        out.push_back(*id);
    }
}

void begin_layout(TokenLayout& layout, std::optional<VisualKind> visual, const Vocabulary& vocab) {
    if (!visual) return;
    const auto span = *visual == VisualKind::Image ? vocab.table().render_image_span() : vocab.table().render_video_span();
    layout.visual_span = Span{layout.token_ids.size(), span.size()};
    layout.visual_kind = visual;
    layout.token_ids.insert(layout.token_ids.end(), span.begin(), span.end());
}

void check_placeholders(std::size_t placeholders, std::optional<VisualKind> placeholder_kind,
                        std::optional<VisualKind> visual) {
    if (placeholders > 1) throw Error(ErrorCode::InvalidSample, "more than one visual input in a sample");
    if (placeholders == 1 && (!visual || *visual != *placeholder_kind)) {
        throw Error(ErrorCode::InvalidSample, "modality placeholder without matching visual input");
    }
}

void check_limit(const TokenLayout& layout, std::size_t limit) {
    if (layout.token_ids.size() > limit) {
        throw Error(ErrorCode::TooLong, std::to_string(layout.token_ids.size()) + " tokens exceed limit " +
                                            std::to_string(limit));
    }
}

}  // namespace

void index_layout(TokenLayout& layout, const Vocabulary& vocab) {
    const auto& t = vocab.table();
    layout.seg_positions.clear();
    layout.loc_positions.clear();
    layout.loss_mask.assign(layout.token_ids.size(), false);
    layout.visual_span.reset();
    layout.visual_kind.reset();
    bool in_assistant = false;
    for (std::size_t i = 0; i < layout.token_ids.size(); ++i) {
        const TokenId id = layout.token_ids[i];
        if (id == t.img_beg || id == t.vid_beg) {
            const TokenId end = id == t.img_beg ? t.img_end : t.vid_end;
            std::size_t j = i + 1;
            while (j < layout.token_ids.size() && layout.token_ids[j] != end) ++j;
            if (j == layout.token_ids.size()) throw Error(ErrorCode::InvalidSample, "unterminated visual span");
            if (layout.visual_span) throw Error(ErrorCode::InvalidSample, "more than one visual span");
            layout.visual_span = Span{i, j - i + 1};
            layout.visual_kind = id == t.img_beg ? VisualKind::Image : VisualKind::Video;
            i = j;
            continue;
        }
        if (id == vocab.user()) {
            in_assistant = false;
            continue;
        }
        if (id == vocab.assistant()) {
            in_assistant = true;
            continue;
        }
        if (in_assistant) layout.loss_mask[i] = true;
        if (id == t.seg) layout.seg_positions.push_back(i);
        if (id == t.loc) layout.loc_positions.push_back(i);
        if (id == vocab.eos()) in_assistant = false;
    }
}

TokenLayout render_sample(const ConversationSample& sample, const Vocabulary& vocab, RenderOptions options) {
    if (sample.turns.empty()) throw Error(ErrorCode::InvalidSample, "sample has no turns");
    std::optional<VisualKind> visual;
    if (sample.visual_ref) visual = sample.visual_ref->kind;

    TokenLayout layout;
    begin_layout(layout, visual, vocab);
    std::size_t placeholders = 0;
    std::optional<VisualKind> placeholder_kind;
    for (const auto& turn : sample.turns) {
        layout.token_ids.push_back(turn.role == Role::User ? vocab.user() : vocab.assistant());
        append_turn_text(turn.text, turn.role, vocab, layout.token_ids, placeholders, placeholder_kind);
        if (turn.role == Role::Assistant) layout.token_ids.push_back(vocab.eos());
    }
    check_placeholders(placeholders, placeholder_kind, visual);
    check_limit(layout, options.token_limit);
    index_layout(layout, vocab);
    return layout;
}

TokenLayout render_prompt(std::optional<VisualKind> visual, std::string_view user_text, const Vocabulary& vocab,
                          RenderOptions options) {
    TokenLayout layout;
    begin_layout(layout, visual, vocab);
    std::size_t placeholders = 0;
    std::optional<VisualKind> placeholder_kind;
    layout.token_ids.push_back(vocab.user());
    append_turn_text(user_text, Role::User, vocab, layout.token_ids, placeholders, placeholder_kind);
    check_placeholders(placeholders, placeholder_kind, visual);
    layout.token_ids.push_back(vocab.assistant());
    check_limit(layout, options.token_limit);
    index_layout(layout, vocab);
    return layout;
}

DecodedConversation decode_layout(const TokenLayout& layout, const Vocabulary& vocab) {
    DecodedConversation out;
    out.visual_kind = layout.visual_kind;
    const std::size_t skip_end = layout.visual_span ? layout.visual_span->start + layout.visual_span->length : 0;
    std::vector<TokenId> current;
    std::optional<Role> role;
    auto flush = [&] {
        if (role) out.turns.push_back(Turn{*role, vocab.decode(current)});
        current.clear();
    };
    for (std::size_t i = skip_end; i < layout.token_ids.size(); ++i) {
        const TokenId id = layout.token_ids[i];
        if (id == vocab.user() || id == vocab.assistant()) {
            flush();
            role = id == vocab.user() ? Role::User : Role::Assistant;
        } else if (id == vocab.eos()) {
            flush();
            role.reset();
        } else {
            current.push_back(id);
        }
    }
    flush();
    if (out.visual_kind) {
        for (auto& turn : out.turns) {
            if (turn.role != Role::User) continue;
            const auto placeholder = *out.visual_kind == VisualKind::Image ? kImagePlaceholder : kVideoPlaceholder;
            turn.text = turn.text.empty() ? std::string(placeholder) : std::string(placeholder) + " " + turn.text;
            break;
        }
    }
    return out;
}

}  // namespace ullava::tokens
