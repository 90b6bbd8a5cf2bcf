// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/losses.hpp"

#include <algorithm>
#include <string>

#include "ullava/error.hpp"

namespace ullava::losses {

namespace {

constexpr double kAreaFloor = 1e-12;

void require_mask_shape(const ag::Var& logits, const BinaryMask& target) {
    if (logits.rows() != target.height || logits.cols() != target.width) {
        throw Error(ErrorCode::ShapeMismatch, "logits " + std::to_string(logits.rows()) + "x" +
                                                  std::to_string(logits.cols()) + " vs mask " +
                                                  std::to_string(target.height) + "x" + std::to_string(target.width));
    }
}

ag::Var coord(const ag::Var& box, std::size_t i) { return ag::gather_flat(box, {i}, 1, 1); }

ag::Var mean_of(const std::vector<ag::Var>& terms) {
    ag::Var acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ag::add(acc, terms[i]);
    return terms.size() == 1 ? acc : ag::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

void LossConfig::validate() const {
    if (alpha1 < 0 || alpha2 < 0 || beta1 < 0 || beta2 < 0) throw Error(ErrorCode::Validation, "loss weights must be >= 0");
    if (!(dice_epsilon > 0)) throw Error(ErrorCode::Validation, "dice_epsilon must be > 0");
}

Matrix mask_to_matrix(const BinaryMask& mask) {
    Matrix m(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) m.data[i] = mask.pixels[i] ? 1.0 : 0.0;
    return m;
}

ag::Var box_var(const NormalizedBox& box) {
    return ag::constant(Matrix(1, 4, {box.x1, box.y1, box.x2, box.y2}));
}

ag::Var bce_loss(const ag::Var& logits, const BinaryMask& target) {
    require_mask_shape(logits, target);
    return ag::bce_with_logits(logits, mask_to_matrix(target));
}

ag::Var dice_loss(const ag::Var& logits, const BinaryMask& target, double epsilon) {
    require_mask_shape(logits, target);
    const ag::Var p = ag::sigmoid(logits);
    const ag::Var t = ag::constant(mask_to_matrix(target));
    const ag::Var numerator = ag::add_scalar(ag::scale(ag::sum(ag::mul(p, t)), 2.0), epsilon);
    const ag::Var denominator = ag::add_scalar(ag::sum(p), static_cast<double>(target.count()) + epsilon);
    return ag::add_scalar(ag::scale(ag::div(numerator, denominator), -1.0), 1.0);
}

ag::Var l1_box_loss(const ag::Var& pred, const NormalizedBox& target) {
    if (pred.rows() != 1 || pred.cols() != 4) throw Error(ErrorCode::ShapeMismatch, "box must be 1x4");
    return ag::mean(ag::abs(ag::sub(pred, box_var(target))));
}

ag::Var giou_loss(const ag::Var& pred, const NormalizedBox& target) {
    if (pred.rows() != 1 || pred.cols() != 4) throw Error(ErrorCode::ShapeMismatch, "box must be 1x4");
    const ag::Var t = box_var(target);
    const ag::Var px1 = coord(pred, 0), py1 = coord(pred, 1), px2 = coord(pred, 2), py2 = coord(pred, 3);
    const ag::Var tx1 = coord(t, 0), ty1 = coord(t, 1), tx2 = coord(t, 2), ty2 = coord(t, 3);
    const ag::Var floor = ag::constant(Matrix::scalar(kAreaFloor));

    const ag::Var iw = ag::relu(ag::sub(ag::minimum(px2, tx2), ag::maximum(px1, tx1)));
    const ag::Var ih = ag::relu(ag::sub(ag::minimum(py2, ty2), ag::maximum(py1, ty1)));
    const ag::Var inter = ag::mul(iw, ih);
    const ag::Var area_p = ag::mul(ag::sub(px2, px1), ag::sub(py2, py1));
    const ag::Var area_t = ag::mul(ag::sub(tx2, tx1), ag::sub(ty2, ty1));
    const ag::Var uni = ag::maximum(ag::sub(ag::add(area_p, area_t), inter), floor);
    const ag::Var iou = ag::div(inter, uni);
    const ag::Var cw = ag::sub(ag::maximum(px2, tx2), ag::minimum(px1, tx1));
    const ag::Var ch = ag::sub(ag::maximum(py2, ty2), ag::minimum(py1, ty1));
    const ag::Var area_c = ag::maximum(ag::mul(cw, ch), floor);
    const ag::Var giou = ag::sub(iou, ag::div(ag::sub(area_c, uni), area_c));
    return ag::add_scalar(ag::scale(giou, -1.0), 1.0);
}

double l1_box_loss(const NormalizedBox& pred, const NormalizedBox& target) {
    return l1_box_loss(box_var(pred), target).item();
}

double giou_loss(const NormalizedBox& pred, const NormalizedBox& target) {
    return giou_loss(box_var(pred), target).item();
}

FineGrainedLoss fine_grained_loss(const ag::Var& l_cgl, const std::vector<MaskPair>& masks,
                                  const std::vector<BoxPair>& boxes, const LossConfig& config) {
    config.validate();
    FineGrainedLoss out;
    out.breakdown.l_cgl = l_cgl.item();
    ag::Var total = l_cgl;

    if (!masks.empty()) {
        std::vector<ag::Var> bce, dice;
        for (const auto& m : masks) {
            bce.push_back(bce_loss(m.logits, m.target));
            dice.push_back(dice_loss(m.logits, m.target, config.dice_epsilon));
        }
        const ag::Var l_bce = mean_of(bce);
        const ag::Var l_dice = mean_of(dice);
        const ag::Var l_pixel = ag::add(ag::scale(l_bce, config.alpha1), ag::scale(l_dice, config.alpha2));
        out.breakdown.l_bce = l_bce.item();
        out.breakdown.l_dice = l_dice.item();
        out.breakdown.l_pixel = l_pixel.item();
        total = ag::add(total, l_pixel);
    }
    if (!boxes.empty() && (masks.empty() || config.combine_branches)) {
        std::vector<ag::Var> l1, giou;
        for (const auto& b : boxes) {
            l1.push_back(l1_box_loss(b.box, b.target));
            giou.push_back(giou_loss(b.box, b.target));
        }
        const ag::Var l_l1 = mean_of(l1);
        const ag::Var l_giou = mean_of(giou);
        const ag::Var l_region = ag::add(ag::scale(l_l1, config.beta1), ag::scale(l_giou, config.beta2));
        out.breakdown.l_l1 = l_l1.item();
        out.breakdown.l_giou = l_giou.item();
        out.breakdown.l_region = l_region.item();
        total = ag::add(total, l_region);
    }
    out.total = total;
    out.breakdown.l_fgl = total.item();
    return out;
}

}  // namespace ullava::losses
