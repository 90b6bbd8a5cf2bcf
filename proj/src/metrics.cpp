// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "ullava/data.hpp"
#include "ullava/error.hpp"

namespace ullava::metrics {

namespace {

void check_shapes(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::ShapeMismatch, std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                                                  std::to_string(b.height) + "x" + std::to_string(b.width));
    }
}

std::pair<std::uint64_t, std::uint64_t> overlap_counts(const BinaryMask& a, const BinaryMask& b) {
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const bool p = a.pixels[i] != 0, t = b.pixels[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    return {inter, uni};
}

}  // namespace

void CIoUAccumulator::accumulate(const BinaryMask& pred, const BinaryMask& target) {
    check_shapes(pred, target);
    const auto [inter, uni] = overlap_counts(pred, target);
    total_intersection += inter;
    total_union += uni;
    ++samples;
}

void CIoUAccumulator::merge(const CIoUAccumulator& other) {
    total_intersection += other.total_intersection;
    total_union += other.total_union;
    samples += other.samples;
}

double CIoUAccumulator::finalize() const {
    if (total_union == 0) return 1.0;
    return static_cast<double>(total_intersection) / static_cast<double>(total_union);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    check_shapes(a, b);
    const auto [inter, uni] = overlap_counts(a, b);
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const NormalizedBox& a, const NormalizedBox& b) {
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

void PrecAccumulator::accumulate(const NormalizedBox& pred, const NormalizedBox& target) {
    hits += box_iou(pred, target) > threshold;
    ++total;
}

void PrecAccumulator::merge(const PrecAccumulator& other) {
    if (other.threshold != threshold) throw Error(ErrorCode::Validation, "cannot merge accumulators with different thresholds");
    hits += other.hits;
    total += other.total;
}

double PrecAccumulator::finalize() const {
    if (total == 0) return 0.0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

NormalizedBox fuse_rec_outputs(const std::optional<NormalizedBox>& loc_box, const std::optional<BinaryMask>& mask) {
    if (!loc_box && !mask) throw Error(ErrorCode::NoEvidence, "neither a region box nor a mask is available");
    if (!mask) return *loc_box;
    const NormalizedBox mask_box = data::mask_to_bbox(*mask);
    if (!loc_box) return mask_box;
    if (box_iou(*loc_box, mask_box) < kFusionGate) return mask_box;
    return {(loc_box->x1 + mask_box.x1) / 2, (loc_box->y1 + mask_box.y1) / 2, (loc_box->x2 + mask_box.x2) / 2,
            (loc_box->y2 + mask_box.y2) / 2};
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["splits"] = nlohmann::ordered_json::array();
    for (const auto& s : splits) {
        nlohmann::ordered_json o;
        o["split"] = s.split;
        o["samples"] = s.samples;
        if (s.ciou) {
            o["ciou"] = s.ciou->finalize();
            o["total_intersection"] = s.ciou->total_intersection;
            o["total_union"] = s.ciou->total_union;
        }
        if (s.prec) {
            o["prec_threshold"] = s.prec->threshold;
            o["prec"] = s.prec->finalize();
            o["prec_hits"] = s.prec->hits;
            o["prec_total"] = s.prec->total;
        }
        j["splits"].push_back(o);
    }
    return j.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << report.to_json();
}

}  // namespace ullava::metrics
