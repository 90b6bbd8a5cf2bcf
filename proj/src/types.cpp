// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/types.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "ullava/error.hpp"

namespace ullava {

namespace {

constexpr std::array<std::pair<TaskKind, std::string_view>, 7> kTaskNames{{
    {TaskKind::Captioning, "captioning"},
    {TaskKind::Vqa, "vqa"},
    {TaskKind::Res, "res"},
    {TaskKind::SemanticSeg, "semantic_seg"},
    {TaskKind::Salient, "salient"},
    {TaskKind::Rec, "rec"},
    {TaskKind::VideoCaption, "video_caption"},
}};

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
    return n;
}

}  // namespace

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

bool NormalizedBox::valid() const {
    return 0.0 <= x1 && x1 <= x2 && x2 <= 1.0 && 0.0 <= y1 && y1 <= y2 && y2 <= 1.0;
}

std::string_view to_string(TaskKind kind) {
    for (const auto& [k, name] : kTaskNames)
        if (k == kind) return name;
    return "unknown";
}

TaskKind parse_task_kind(std::string_view text) {
    for (const auto& [k, name] : kTaskNames)
        if (name == text) return k;
    throw Error(ErrorCode::ParseError, "unknown task kind '" + std::string(text) + "'");
}

bool needs_mask(TaskKind kind) {
    return kind == TaskKind::Res || kind == TaskKind::SemanticSeg || kind == TaskKind::Salient;
}

std::size_t count_in_assistant_turns(const ConversationSample& sample, std::string_view token) {
    std::size_t n = 0;
    for (const auto& t : sample.turns)
        if (t.role == Role::Assistant) n += count_occurrences(t.text, token);
    return n;
}

void validate_sample(const ConversationSample& sample) {
    auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::InvalidSample, "sample '" + sample.id + "': " + why);
    };
    if (sample.turns.empty()) fail("no turns");
    for (const auto& t : sample.turns) {
        if (t.role == Role::User && (count_occurrences(t.text, "<SEG>") || count_occurrences(t.text, "<LOC>"))) {
            fail("<SEG>/<LOC> in a user turn");
        }
    }
    if (needs_mask(sample.task_kind) && sample.target_masks.empty()) fail("task requires a target mask");
    if (sample.task_kind == TaskKind::Rec && sample.target_boxes.empty()) fail("rec requires a target box");
    if (count_in_assistant_turns(sample, "<SEG>") != sample.target_masks.size()) {
        fail("<SEG> count does not match target masks");
    }
    if (count_in_assistant_turns(sample, "<LOC>") != sample.target_boxes.size()) {
        fail("<LOC> count does not match target boxes");
    }
    for (const auto& m : sample.target_masks) {
        if (m.height == 0 || m.width == 0 || m.pixels.size() != m.height * m.width) fail("malformed mask");
    }
    for (const auto& b : sample.target_boxes)
        if (!b.valid()) fail("invalid box");
    const bool video_task = sample.task_kind == TaskKind::VideoCaption;
    if (video_task && (!sample.visual_ref || sample.visual_ref->kind != VisualKind::Video)) {
        fail("video_caption requires a video reference");
    }
}

}  // namespace ullava
