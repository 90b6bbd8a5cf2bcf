// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Segmentation and grounding metrics, and the REC box fusion rule.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ullava/types.hpp"

namespace ullava::metrics {

/// Cumulative IoU: total intersection pixels over total union pixels.
struct CIoUAccumulator {
    std::uint64_t total_intersection = 0;
    std::uint64_t total_union = 0;
    std::uint64_t samples = 0;

    /// Throws ShapeMismatch.
    void accumulate(const BinaryMask& pred, const BinaryMask& target);
    void merge(const CIoUAccumulator& other);
    /// 1.0 when nothing was ever predicted or targeted.
    double finalize() const;

    bool operator==(const CIoUAccumulator&) const = default;
};

/// Plain IoU of two masks, 1.0 when both are empty. Throws ShapeMismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

double box_iou(const NormalizedBox& a, const NormalizedBox& b);

/// A hit is a box IoU strictly above the threshold.
struct PrecAccumulator {
    double threshold = 0.5;
    std::uint64_t hits = 0;
    std::uint64_t total = 0;

    void accumulate(const NormalizedBox& pred, const NormalizedBox& target);
    void merge(const PrecAccumulator& other);
    /// Percentage in [0, 100]; 0 for an empty accumulator.
    double finalize() const;

    bool operator==(const PrecAccumulator&) const = default;
};

inline constexpr double kFusionGate = 0.5;

/// Box from the region head and/or the mask. With both present, the mean box
/// if they agree (IoU >= 0.5), otherwise the mask's box. Throws NoEvidence.
NormalizedBox fuse_rec_outputs(const std::optional<NormalizedBox>& loc_box, const std::optional<BinaryMask>& mask);

struct SplitResult {
    std::string split;
    std::uint64_t samples = 0;
    std::optional<CIoUAccumulator> ciou;
    std::optional<PrecAccumulator> prec;
};

struct EvalReport {
    std::string config_hash;
    std::vector<SplitResult> splits;

    std::string to_json() const;
};

void write_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace ullava::metrics
