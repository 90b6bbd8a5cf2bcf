// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>

#include "support/fixtures.hpp"
#include "ullava/error.hpp"
#include "ullava/tokens.hpp"

using namespace ullava;
using namespace ullava::tokens;

namespace {

Vocabulary small_vocab(std::size_t patches = 256, std::size_t frames = 8) {
    return Vocabulary::build({"Segment", "out", "the", "dog", ".", "Sure", ",", "a", "cat", "Describe", "video"},
                             patches, frames);
}

ConversationSample res_sample() {
    ConversationSample s;
    s.id = "r0";
    s.task_kind = TaskKind::Res;
    s.visual_ref = VisualRef{"x.npy", VisualKind::Image};
    s.turns = {{Role::User, "<image> Segment out the dog."}, {Role::Assistant, "Sure, <tag>dog</tag><SEG>."}};
    BinaryMask m(4, 4);
    m.set(1, 1, true);
    s.target_masks = {m};
    return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Validation;
}

}  // namespace

TEST(SplitWords, PunctuationAndBrackets) {
    EXPECT_EQ(split_words("Sure, <tag>red square</tag><SEG>."),
              (std::vector<std::string>{"Sure", ",", "<tag>", "red", "square", "</tag>", "<SEG>", "."}));
    EXPECT_EQ(split_words("  <image>What?"), (std::vector<std::string>{"<image>", "What", "?"}));
    EXPECT_TRUE(split_words("   ").empty());
}

TEST(Vocabulary, LayoutOfIds) {
    const Vocabulary v = small_vocab();
    for (std::size_t i = 0; i < kScaffoldTokens.size(); ++i) EXPECT_EQ(v.token(static_cast<TokenId>(i)), kScaffoldTokens[i]);
    for (std::size_t i = 0; i < kSpecialTokens.size(); ++i) {
        EXPECT_EQ(v.token(static_cast<TokenId>(v.base_size() + i)), kSpecialTokens[i]);
        EXPECT_EQ(v.table().ids()[i], v.base_size() + i);
    }
    const auto words = std::vector<std::string>(v.tokens().begin() + 5, v.tokens().begin() + v.base_size());
    EXPECT_TRUE(std::is_sorted(words.begin(), words.end()));
    EXPECT_EQ(*v.find("dog"), v.encode("dog").front());
    EXPECT_EQ(v.encode("zebra").front(), v.unk());
    EXPECT_THROW(v.encode("<nope>"), Error);
    EXPECT_THROW(v.token(static_cast<TokenId>(v.size())), Error);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
    support::TempDir dir("vocab");
    const Vocabulary v = small_vocab();
    v.save(dir / "vocab.txt");
    EXPECT_EQ(Vocabulary::load(dir / "vocab.txt"), v);
}

TEST(Vocabulary, RejectsMisorderedTokens) {
    auto tokens = small_vocab().tokens();
    std::swap(tokens[tokens.size() - 1], tokens[tokens.size() - 2]);
    EXPECT_THROW(Vocabulary::from_tokens(tokens, 256, 8), Error);
    auto scaffold = small_vocab().tokens();
    std::swap(scaffold[0], scaffold[1]);
    EXPECT_THROW(Vocabulary::from_tokens(scaffold, 256, 8), Error);
}

TEST(RenderSample, ImageSpanHas258Tokens) {
    const Vocabulary v = small_vocab();
    const TokenLayout l = render_sample(res_sample(), v);
    ASSERT_TRUE(l.visual_span);
    EXPECT_EQ(l.visual_span->start, 0u);
    EXPECT_EQ(l.visual_span->length, 258u);
    EXPECT_EQ(l.token_ids[0], v.table().img_beg);
    EXPECT_EQ(l.token_ids[257], v.table().img_end);
    EXPECT_EQ(l.patch_positions().size(), 256u);
    EXPECT_EQ(l.boundary_positions(), (std::vector<std::size_t>{0, 257}));
    EXPECT_EQ(std::count(l.token_ids.begin(), l.token_ids.end(), v.table().img_patch), 256);
}

TEST(RenderSample, VideoSpanHas2Plus256PlusT) {
    const Vocabulary v = small_vocab();
    ConversationSample s;
    s.id = "v0";
    s.task_kind = TaskKind::VideoCaption;
    s.visual_ref = VisualRef{"v.npy", VisualKind::Video};
    s.turns = {{Role::User, "<video> Describe the video."}, {Role::Assistant, "a cat."}};
    const TokenLayout l = render_sample(s, v);
    EXPECT_EQ(l.visual_span->length, 2u + 256u + 8u);
    EXPECT_EQ(l.patch_positions().size(), 264u);
    EXPECT_EQ(l.visual_kind, VisualKind::Video);
}

TEST(RenderSample, LossMaskAndTaskPositions) {
    const Vocabulary v = small_vocab(4, 2);
    const TokenLayout l = render_sample(res_sample(), v);
    const auto assistant = std::find(l.token_ids.begin(), l.token_ids.end(), v.assistant()) - l.token_ids.begin();
    for (std::size_t i = 0; i < l.size(); ++i) {
        EXPECT_EQ(l.loss_mask[i], static_cast<std::ptrdiff_t>(i) > assistant) << i;
    }
    EXPECT_EQ(l.token_ids.back(), v.eos());
    ASSERT_EQ(l.seg_positions.size(), 1u);
    EXPECT_EQ(l.token_ids[l.seg_positions[0]], v.table().seg);
    EXPECT_TRUE(l.loc_positions.empty());
}

TEST(RenderSample, Errors) {
    const Vocabulary v = small_vocab(4, 2);
    auto s = res_sample();
    s.turns[0].text = "<image> Segment out the <class>.";
    EXPECT_EQ(code_of([&] { render_sample(s, v); }), ErrorCode::UnknownPlaceholder);

    s = res_sample();
    s.turns[0].text = "<image> <SEG> the dog.";
    EXPECT_EQ(code_of([&] { render_sample(s, v); }), ErrorCode::InvalidSample);

    s = res_sample();
    s.visual_ref.reset();
    EXPECT_EQ(code_of([&] { render_sample(s, v); }), ErrorCode::InvalidSample);

    s = res_sample();
    s.turns[1].text = "Sure <img_patch> <tag>dog</tag><SEG>.";
    EXPECT_EQ(code_of([&] { render_sample(s, v); }), ErrorCode::InvalidSample);

    EXPECT_EQ(code_of([&] { render_sample(res_sample(), v, {10}); }), ErrorCode::TooLong);
}

TEST(RenderSample, DecodeRoundTrip) {
    const Vocabulary v = small_vocab(4, 2);
    const ConversationSample s = res_sample();
    const TokenLayout l = render_sample(s, v);
    const DecodedConversation d = decode_layout(l, v);
    EXPECT_EQ(d.visual_kind, VisualKind::Image);
    ConversationSample again = s;
    again.turns = d.turns;
    EXPECT_EQ(render_sample(again, v), l);
}

TEST(RenderPrompt, EndsWithAssistantMarker) {
    const Vocabulary v = small_vocab(4, 2);
    const TokenLayout p = render_prompt(VisualKind::Image, "<image> Segment out the dog.", v);
    EXPECT_EQ(p.token_ids.back(), v.assistant());
    EXPECT_EQ(p.visual_span->length, 6u);
    EXPECT_TRUE(std::none_of(p.loss_mask.begin(), p.loss_mask.end(), [](bool b) { return b; }));
    EXPECT_THROW(render_prompt(std::nullopt, "<image> Segment out the dog.", v), Error);
}

TEST(IndexLayout, RecomputesPositions) {
    const Vocabulary v = small_vocab(4, 2);
    TokenLayout l = render_sample(res_sample(), v);
    TokenLayout copy = l;
    copy.seg_positions.clear();
    copy.loss_mask.assign(copy.size(), false);
    copy.visual_span.reset();
    index_layout(copy, v);
    EXPECT_EQ(copy, l);
}
