// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/adapters.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "ullava/data.hpp"
#include "ullava/error.hpp"
#include "ullava/image_io.hpp"

namespace ullava::data {

namespace {

using nlohmann::json;

template <typename Fn>
std::vector<ConversationSample> read_annotations(const std::filesystem::path& path, Fn&& convert) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open annotations " + path.string());
    const auto base = path.parent_path();
    std::vector<ConversationSample> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            auto resolve = [&](const std::string& key) {
                std::filesystem::path p = j.at(key).get<std::string>();
                return p.is_absolute() ? p : std::filesystem::absolute(base / p);
            };
            ConversationSample s = convert(j, resolve, out.size());
            validate_sample(s);
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(n) + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Io) throw;
            throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

BinaryMask read_mask_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "mask not found: " + path.string());
    const encoders::Image img = io::read_png(path);
    BinaryMask m(img.height, img.width);
    for (std::size_t r = 0; r < img.height; ++r)
        for (std::size_t c = 0; c < img.width; ++c)
            m.set(r, c, img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2) > 0.0f);
    return m;
}

std::vector<ConversationSample> adapt_refer(const std::filesystem::path& annotations, std::uint64_t seed) {
    const TemplatePool res = default_pool(TaskKind::Res);
    const TemplatePool rec = default_pool(TaskKind::Rec);
    return read_annotations(annotations, [&](const json& j, auto&& resolve, std::size_t i) {
        ConversationSample s;
        s.id = j.at("id").get<std::string>();
        s.visual_ref = VisualRef{resolve("image").string(), VisualKind::Image};
        const auto expr = j.at("expression").get<std::string>();
        if (j.contains("mask")) {
            s.task_kind = TaskKind::Res;
            s.target_masks.push_back(read_mask_png(resolve("mask")));
            s.turns = {{Role::User, instantiate_template(res, expr, mix_seed(seed, i))},
                       {Role::Assistant, "Sure, <tag>" + expr + "</tag><SEG>."}};
        } else {
            const auto b = j.at("box").get<std::vector<double>>();
            if (b.size() != 4) throw Error(ErrorCode::ParseError, "box needs 4 coordinates");
            s.task_kind = TaskKind::Rec;
            s.target_boxes.push_back({b[0], b[1], b[2], b[3]});
            s.turns = {{Role::User, instantiate_template(rec, expr, mix_seed(seed, i))},
                       {Role::Assistant, "It is <tag>" + expr + "</tag><LOC>."}};
        }
        return s;
    });
}

std::vector<ConversationSample> adapt_caption(const std::filesystem::path& annotations, std::uint64_t seed) {
    const TemplatePool pool = default_pool(TaskKind::Captioning);
    return read_annotations(annotations, [&](const json& j, auto&& resolve, std::size_t i) {
        ConversationSample s;
        s.id = j.at("id").get<std::string>();
        s.task_kind = TaskKind::Captioning;
        s.visual_ref = VisualRef{resolve("image").string(), VisualKind::Image};
        s.turns = {{Role::User, instantiate_template(pool, std::nullopt, mix_seed(seed, i))},
                   {Role::Assistant, j.at("caption").get<std::string>()}};
        return s;
    });
}

std::vector<ConversationSample> adapt_semantic(const std::filesystem::path& annotations, std::uint64_t seed) {
    const TemplatePool pool = default_pool(TaskKind::SemanticSeg);
    return read_annotations(annotations, [&](const json& j, auto&& resolve, std::size_t i) {
        ConversationSample s;
        s.id = j.at("id").get<std::string>();
        s.task_kind = TaskKind::SemanticSeg;
        s.visual_ref = VisualRef{resolve("image").string(), VisualKind::Image};
        const auto cls = j.at("class").get<std::string>();
        s.target_masks.push_back(read_mask_png(resolve("mask")));
        s.turns = {{Role::User, instantiate_template(pool, cls, mix_seed(seed, i))},
                   {Role::Assistant, "Sure, <tag>" + cls + "</tag><SEG>."}};
        return s;
    });
}

std::vector<SalientRecord> load_salient_source(const std::filesystem::path& dir) {
    const auto images = dir / "images";
    const auto masks = dir / "masks";
    if (!std::filesystem::is_directory(images)) throw Error(ErrorCode::Io, "salient source missing directory " + images.string());
    if (!std::filesystem::is_directory(masks)) throw Error(ErrorCode::Io, "salient source missing directory " + masks.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(images)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".png" || ext == ".npy")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SalientRecord> out;
    for (const auto& f : files) {
        const auto mask_path = masks / (f.stem().string() + ".png");
        if (!std::filesystem::exists(mask_path)) throw Error(ErrorCode::Io, "no mask for " + f.string() + " at " + mask_path.string());
        SalientRecord r;
        r.id = f.stem().string();
        r.image_path = std::filesystem::absolute(f).string();
        r.image = io::read_image(f);
        r.mask = read_mask_png(mask_path);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ullava::data
