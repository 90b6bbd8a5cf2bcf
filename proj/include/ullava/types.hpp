// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Domain types shared across modules: masks, boxes and conversation samples.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ullava {

/// H×W boolean mask, row-major. Pixel (r, c) covers [c/W, (c+1)/W] × [r/H, (r+1)/H]
/// in normalized image coordinates.
struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // 0 or 1

    BinaryMask() = default;
    BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0) {}

    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
    void set(std::size_t r, std::size_t c, bool v) { pixels[r * width + c] = v ? 1 : 0; }
    std::size_t count() const;
    bool same_shape(const BinaryMask& o) const { return height == o.height && width == o.width; }

    bool operator==(const BinaryMask&) const = default;
};

/// Box corners as fractions of image width/height; valid iff 0 <= x1 <= x2 <= 1
/// and 0 <= y1 <= y2 <= 1.
struct NormalizedBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    bool valid() const;
    double area() const { return (x2 - x1) * (y2 - y1); }

    bool operator==(const NormalizedBox&) const = default;
};

enum class TaskKind { Captioning, Vqa, Res, SemanticSeg, Salient, Rec, VideoCaption };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);
/// Tasks whose samples must carry at least one target mask.
bool needs_mask(TaskKind kind);

enum class VisualKind { Image, Video };

struct VisualRef {
    std::string path;
    VisualKind kind = VisualKind::Image;

    bool operator==(const VisualRef&) const = default;
};

enum class Role { User, Assistant };

struct Turn {
    Role role = Role::User;
    std::string text;

    bool operator==(const Turn&) const = default;
};

/// One multi-turn instruction sample. The i-th <SEG> in assistant text pairs
/// with target_masks[i] and the i-th <LOC> with target_boxes[i].
struct ConversationSample {
    std::string id;
    TaskKind task_kind = TaskKind::Vqa;
    std::optional<VisualRef> visual_ref;
    std::vector<Turn> turns;
    std::vector<BinaryMask> target_masks;
    std::vector<NormalizedBox> target_boxes;

    bool operator==(const ConversationSample&) const = default;
};

/// Counts of `token` (e.g. "<SEG>") across the sample's assistant turns.
std::size_t count_in_assistant_turns(const ConversationSample& sample, std::string_view token);

/// Throws Error(InvalidSample) when the task-kind/target/token-count invariants fail.
void validate_sample(const ConversationSample& sample);

}  // namespace ullava
