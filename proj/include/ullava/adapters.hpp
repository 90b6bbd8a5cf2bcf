// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Adapters from simple annotation files to conversation samples. Each
// annotation file is line-delimited JSON; relative paths inside it resolve
// against the file's directory and are stored absolute in the samples.
//
//   refer:    {"id", "image", "expression", "mask": png path}   -> res
//             {"id", "image", "expression", "box": [x1,y1,x2,y2]} -> rec
//   caption:  {"id", "image", "caption"}                          -> captioning
//   semantic: {"id", "image", "class", "mask": png path}          -> semantic_seg
//
// A salient source directory holds images/<stem>.{png,npy} and masks/<stem>.png.

#pragma once

#include <filesystem>
#include <vector>

#include "ullava/salient.hpp"
#include "ullava/types.hpp"

namespace ullava::data {

/// Non-black pixels of a mask PNG are foreground.
BinaryMask read_mask_png(const std::filesystem::path& path);

std::vector<ConversationSample> adapt_refer(const std::filesystem::path& annotations, std::uint64_t seed);
std::vector<ConversationSample> adapt_caption(const std::filesystem::path& annotations, std::uint64_t seed);
std::vector<ConversationSample> adapt_semantic(const std::filesystem::path& annotations, std::uint64_t seed);

/// Records sorted by stem. Throws Io naming the missing directory or mask.
std::vector<SalientRecord> load_salient_source(const std::filesystem::path& dir);

}  // namespace ullava::data
