// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Mask codecs, mask->box conversion, instruction templates and the
// line-delimited dataset format.
//
// Dataset file layout (UTF-8, one JSON object per line):
//   line 1: {"format":"ullava-dataset","version":1}
//   line n: {"id":str, "task":str, "visual":{"path":str,"kind":"image"|"video"}|null,
//            "turns":[{"role":"user"|"assistant","text":str}, ...],
//            "masks":[{"height":int,"width":int,"counts":[int,...]}, ...],
//            "boxes":[[x1,y1,x2,y2], ...]}
// Visual paths are relative to the dataset file's directory unless absolute.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ullava/types.hpp"

namespace ullava::data {

/// Column-major run lengths starting with a (possibly empty) run of zeros.
struct RleMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> counts;

    bool operator==(const RleMask&) const = default;
};

RleMask rle_encode(const BinaryMask& mask);
/// Throws MalformedRle when counts do not sum to height·width.
BinaryMask rle_decode(const RleMask& rle);

/// Tight box over true pixels, pixel (r, c) spanning [c/W, (c+1)/W] × [r/H, (r+1)/H].
/// Throws EmptyMask.
NormalizedBox mask_to_bbox(const BinaryMask& mask);

/// Inclusive pixel bounds of the true pixels: rows [r0, r1], cols [c0, c1].
struct PixelBounds {
    std::size_t r0 = 0, c0 = 0, r1 = 0, c1 = 0;
};
PixelBounds mask_bounds(const BinaryMask& mask);

inline constexpr std::string_view kClassPlaceholder = "<class>";

class TemplatePool {
public:
    /// Throws Validation when a template lacks the modality placeholder its task requires.
    TemplatePool(TaskKind kind, std::vector<std::string> templates);

    TaskKind kind() const { return kind_; }
    const std::vector<std::string>& templates() const { return templates_; }
    bool uses_class() const;

private:
    TaskKind kind_;
    std::vector<std::string> templates_;
};

/// Built-in pools. Throws Validation for task kinds that take free-form questions (vqa).
TemplatePool default_pool(TaskKind kind);

/// Seeded uniform template choice with <class> substituted. Throws
/// UnknownPlaceholder if a placeholder other than <image>/<video> remains.
std::string instantiate_template(const TemplatePool& pool, const std::optional<std::string>& class_tag,
                                 std::uint64_t seed);

/// Derives a per-item seed from a base seed and an index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

inline constexpr int kDatasetVersion = 1;

/// Validates every sample, then writes the header and one record per line.
void write_dataset(const std::vector<ConversationSample>& samples, const std::filesystem::path& path);
/// Throws ParseError naming the offending line.
std::vector<ConversationSample> load_dataset(const std::filesystem::path& path);

std::string sample_to_json_line(const ConversationSample& sample);
ConversationSample sample_from_json_line(std::string_view line, std::size_t line_number);

/// Absolute path of a sample's visual input given the dataset file it came from.
std::filesystem::path resolve_visual_path(const std::filesystem::path& dataset_path, const VisualRef& ref);

}  // namespace ullava::data
