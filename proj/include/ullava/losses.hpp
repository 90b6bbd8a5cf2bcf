// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Mask (BCE, Dice) and box (L1, GIoU) losses and their composition with the
// language-modeling loss:
//
//   l_fgl    = l_cgl + l_pixel   (mask target)
//            | l_cgl + l_region  (box target)
//            | l_cgl             (otherwise)
//   l_pixel  = alpha1 * l_bce + alpha2 * l_dice
//   l_region = beta1 * l_l1 + beta2 * l_giou
//
// Samples carrying both targets add both branches unless combine_branches is
// off, in which case the mask branch wins.

#pragma once

#include <optional>
#include <vector>

#include "ullava/autograd.hpp"
#include "ullava/types.hpp"

namespace ullava::losses {

struct LossConfig {
    double alpha1 = 2.0;
    double alpha2 = 0.5;
    double beta1 = 1.0;
    double beta2 = 1.0;
    double dice_epsilon = 1e-6;
    bool combine_branches = true;

    void validate() const;
};

/// Components that did not apply to a sample stay empty rather than zero.
struct LossBreakdown {
    double l_cgl = 0.0;
    std::optional<double> l_bce;
    std::optional<double> l_dice;
    std::optional<double> l_l1;
    std::optional<double> l_giou;
    std::optional<double> l_pixel;
    std::optional<double> l_region;
    double l_fgl = 0.0;
};

Matrix mask_to_matrix(const BinaryMask& mask);

/// Mean per-pixel BCE from logits [H × W]; throws ShapeMismatch.
ag::Var bce_loss(const ag::Var& logits, const BinaryMask& target);
/// 1 - (2·Σpt + eps) / (Σp + Σt + eps), p = sigmoid(logits); throws ShapeMismatch.
ag::Var dice_loss(const ag::Var& logits, const BinaryMask& target, double epsilon = 1e-6);
/// Mean absolute corner difference; `pred` is a [1 × 4] corner box.
ag::Var l1_box_loss(const ag::Var& pred, const NormalizedBox& target);
/// 1 - GIoU; `pred` is a [1 × 4] corner box.
ag::Var giou_loss(const ag::Var& pred, const NormalizedBox& target);

double l1_box_loss(const NormalizedBox& pred, const NormalizedBox& target);
double giou_loss(const NormalizedBox& pred, const NormalizedBox& target);

ag::Var box_var(const NormalizedBox& box);

struct MaskPair {
    ag::Var logits;
    BinaryMask target;
};

struct BoxPair {
    ag::Var box;
    NormalizedBox target;
};

struct FineGrainedLoss {
    ag::Var total;
    LossBreakdown breakdown;
};

/// Multiple pairs of one kind are averaged. With no pairs the total is `l_cgl` itself.
FineGrainedLoss fine_grained_loss(const ag::Var& l_cgl, const std::vector<MaskPair>& masks,
                                  const std::vector<BoxPair>& boxes, const LossConfig& config);

}  // namespace ullava::losses
