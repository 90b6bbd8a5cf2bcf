// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale synthetic corpora: scenes of colored axis-aligned rectangles on
// a noisy background, rendered into captioning, video captioning, VQA, RES,
// REC and salient-segmentation samples. Images are written as NPY files under
// `<out_dir>/images/` and referenced relative to `out_dir`.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ullava/encoders.hpp"
#include "ullava/salient.hpp"
#include "ullava/types.hpp"

namespace ullava::data {

struct SceneObject {
    std::string color;
    std::string shape;  // "square", "bar" (wide) or "pillar" (tall)
    BinaryMask mask;
    NormalizedBox box;

    std::string name() const { return color + " " + shape; }
};

struct Scene {
    encoders::Image image;
    std::vector<SceneObject> objects;
};

struct SceneOptions {
    std::size_t image_size = 32;
    std::size_t n_objects = 2;
    std::size_t grid = 4;  // object edges snap to multiples of this
};

/// Non-overlapping objects with distinct colors; deterministic in `seed`.
Scene make_scene(std::uint64_t seed, const SceneOptions& options);

struct CorpusOptions {
    std::size_t count = 8;
    std::uint64_t seed = 0;
    SceneOptions scene;
    std::size_t n_frames = 2;  // video corpora
    std::string id_prefix;
};

std::vector<ConversationSample> make_caption_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir);
std::vector<ConversationSample> make_video_caption_corpus(const CorpusOptions& options,
                                                          const std::filesystem::path& out_dir);
std::vector<ConversationSample> make_vqa_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir);
/// RES samples; with `with_box` the answer also carries a <LOC> for the same object.
std::vector<ConversationSample> make_res_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir,
                                                bool with_box = false);
std::vector<ConversationSample> make_rec_corpus(const CorpusOptions& options, const std::filesystem::path& out_dir);
/// Single-object images with their masks, as input to build_salient15k.
std::vector<SalientRecord> make_salient_records(const CorpusOptions& options, const std::filesystem::path& out_dir);

}  // namespace ullava::data
