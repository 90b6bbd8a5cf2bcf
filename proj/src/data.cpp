// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/data.hpp"

#include <fstream>
#include <json.hpp>
#include <random>

#include "ullava/error.hpp"
#include "ullava/tokens.hpp"

namespace ullava::data {

using nlohmann::json;

RleMask rle_encode(const BinaryMask& mask) {
    RleMask rle{mask.height, mask.width, {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (std::size_t c = 0; c < mask.width; ++c) {
        for (std::size_t r = 0; r < mask.height; ++r) {
            const std::uint8_t v = mask.at(r, c) ? 1 : 0;
            if (v != current) {
                rle.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
    std::uint64_t total = 0;
    for (auto n : rle.counts) total += n;
    if (total != static_cast<std::uint64_t>(rle.height) * rle.width) {
        throw Error(ErrorCode::MalformedRle, "counts sum to " + std::to_string(total) + ", expected " +
                                                 std::to_string(rle.height * rle.width));
    }
    BinaryMask mask(rle.height, rle.width);
    std::size_t k = 0;
    std::uint8_t value = 0;
    for (auto n : rle.counts) {
        for (std::uint32_t i = 0; i < n; ++i, ++k) {
            if (value) mask.set(k % rle.height, k / rle.height, true);
        }
        value ^= 1;
    }
    return mask;
}

PixelBounds mask_bounds(const BinaryMask& mask) {
    PixelBounds b{mask.height, mask.width, 0, 0};
    bool any = false;
    for (std::size_t r = 0; r < mask.height; ++r) {
        for (std::size_t c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            any = true;
            b.r0 = std::min(b.r0, r);
            b.c0 = std::min(b.c0, c);
            b.r1 = std::max(b.r1, r);
            b.c1 = std::max(b.c1, c);
        }
    }
    if (!any) throw Error(ErrorCode::EmptyMask, "mask has no true pixels");
    return b;
}

NormalizedBox mask_to_bbox(const BinaryMask& mask) {
    const PixelBounds b = mask_bounds(mask);
    const double w = static_cast<double>(mask.width);
    const double h = static_cast<double>(mask.height);
    return {static_cast<double>(b.c0) / w, static_cast<double>(b.r0) / h, static_cast<double>(b.c1 + 1) / w,
            static_cast<double>(b.r1 + 1) / h};
}

TemplatePool::TemplatePool(TaskKind kind, std::vector<std::string> templates)
    : kind_(kind), templates_(std::move(templates)) {
    if (templates_.empty()) throw Error(ErrorCode::Validation, "empty template pool");
    const std::string_view required =
        kind == TaskKind::VideoCaption ? tokens::kVideoPlaceholder : tokens::kImagePlaceholder;
    for (const auto& t : templates_) {
        if (t.find(required) == std::string::npos) {
            throw Error(ErrorCode::Validation, "template '" + t + "' lacks " + std::string(required));
        }
    }
}

bool TemplatePool::uses_class() const {
    for (const auto& t : templates_)
        if (t.find(kClassPlaceholder) != std::string::npos) return true;
    return false;
}

TemplatePool default_pool(TaskKind kind) {
    switch (kind) {
        case TaskKind::Salient:
            return TemplatePool(kind, {
                                          "<image> What makes the image stand out?",
                                          "<image> What is salient one in this image?",
                                          "<image> Look at the image, segment the main object in the picture and explain.",
                                      });
        case TaskKind::VideoCaption:
            return TemplatePool(kind, {
                                          "<video> Describe the video concisely.",
                                          "<video> What's happening in this video?",
                                          "<video> Write a terse but informative summary of the VCR.",
                                      });
        case TaskKind::Res:
            return TemplatePool(kind, {
                                          "<image> Segment out the <class>.",
                                          "<image> Output the mask of the <class>.",
                                          "<image> Find the <class> in the picture.",
                                      });
        case TaskKind::SemanticSeg:
            return TemplatePool(kind, {
                                          "<image> Segment all the <class> in the image.",
                                          "<image> Output the mask of every <class>.",
                                      });
        case TaskKind::Rec:
            return TemplatePool(kind, {
                                          "<image> Where is the <class>?",
                                          "<image> Locate the <class> in the image.",
                                          "<image> Give the box of the <class>.",
                                      });
        case TaskKind::Captioning:
            return TemplatePool(kind, {
                                          "<image> Describe the image concisely.",
                                          "<image> What is in this picture?",
                                          "<image> Give a short caption for the image.",
                                      });
        case TaskKind::Vqa:
            break;
    }
    throw Error(ErrorCode::Validation, "no template pool for task " + std::string(to_string(kind)));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string instantiate_template(const TemplatePool& pool, const std::optional<std::string>& class_tag,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::string text = pool.templates()[rng() % pool.templates().size()];
    for (auto pos = text.find(kClassPlaceholder); pos != std::string::npos; pos = text.find(kClassPlaceholder, pos)) {
        if (!class_tag) throw Error(ErrorCode::UnknownPlaceholder, "template needs a class tag: " + text);
        text.replace(pos, kClassPlaceholder.size(), *class_tag);
        pos += class_tag->size();
    }
    for (const auto& w : tokens::split_words(text)) {
        if (w.size() >= 2 && w.front() == '<' && w.back() == '>' && w != tokens::kImagePlaceholder &&
            w != tokens::kVideoPlaceholder) {
            throw Error(ErrorCode::UnknownPlaceholder, "unsubstituted placeholder " + w + " in: " + text);
        }
    }
    return text;
}

namespace {

json mask_to_json(const BinaryMask& mask) {
    const RleMask rle = rle_encode(mask);
    return json{{"height", rle.height}, {"width", rle.width}, {"counts", rle.counts}};
}

std::string_view role_name(Role r) { return r == Role::User ? "user" : "assistant"; }

}  // namespace

std::string sample_to_json_line(const ConversationSample& sample) {
    json j;
    j["id"] = sample.id;
    j["task"] = std::string(to_string(sample.task_kind));
    if (sample.visual_ref) {
        j["visual"] = json{{"path", sample.visual_ref->path},
                           {"kind", sample.visual_ref->kind == VisualKind::Image ? "image" : "video"}};
    } else {
        j["visual"] = nullptr;
    }
    j["turns"] = json::array();
    for (const auto& t : sample.turns) j["turns"].push_back(json{{"role", role_name(t.role)}, {"text", t.text}});
    j["masks"] = json::array();
    for (const auto& m : sample.target_masks) j["masks"].push_back(mask_to_json(m));
    j["boxes"] = json::array();
    for (const auto& b : sample.target_boxes) j["boxes"].push_back(json::array({b.x1, b.y1, b.x2, b.y2}));
    return j.dump();
}

ConversationSample sample_from_json_line(std::string_view line, std::size_t line_number) {
    auto fail = [line_number](const std::string& why) -> Error {
        return Error(ErrorCode::ParseError, "line " + std::to_string(line_number) + ": " + why);
    };
    try {
        const json j = json::parse(line);
        ConversationSample s;
        s.id = j.at("id").get<std::string>();
        s.task_kind = parse_task_kind(j.at("task").get<std::string>());
        if (!j.at("visual").is_null()) {
            const auto& v = j.at("visual");
            const auto kind = v.at("kind").get<std::string>();
            if (kind != "image" && kind != "video") throw fail("unknown visual kind '" + kind + "'");
            s.visual_ref = VisualRef{v.at("path").get<std::string>(), kind == "image" ? VisualKind::Image : VisualKind::Video};
        }
        for (const auto& t : j.at("turns")) {
            const auto role = t.at("role").get<std::string>();
            if (role != "user" && role != "assistant") throw fail("unknown role '" + role + "'");
            s.turns.push_back(Turn{role == "user" ? Role::User : Role::Assistant, t.at("text").get<std::string>()});
        }
        for (const auto& m : j.at("masks")) {
            RleMask rle{m.at("height").get<std::size_t>(), m.at("width").get<std::size_t>(),
                        m.at("counts").get<std::vector<std::uint32_t>>()};
            s.target_masks.push_back(rle_decode(rle));
        }
        for (const auto& b : j.at("boxes")) {
            const auto v = b.get<std::vector<double>>();
            if (v.size() != 4) throw fail("box needs 4 coordinates");
            s.target_boxes.push_back({v[0], v[1], v[2], v[3]});
        }
        validate_sample(s);
        return s;
    } catch (const json::exception& e) {
        throw fail(e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError && std::string_view(e.what()).find("line ") != std::string_view::npos) throw;
        throw fail(e.what());
    }
}

void write_dataset(const std::vector<ConversationSample>& samples, const std::filesystem::path& path) {
    for (const auto& s : samples) validate_sample(s);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << json{{"format", "ullava-dataset"}, {"version", kDatasetVersion}}.dump() << '\n';
    for (const auto& s : samples) out << sample_to_json_line(s) << '\n';
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<ConversationSample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
    std::vector<ConversationSample> out;
    std::string line;
    std::size_t n = 0;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "line 1: missing header");
    ++n;
    try {
        const json header = json::parse(line);
        if (header.at("format") != "ullava-dataset") throw Error(ErrorCode::ParseError, "line 1: not a dataset file");
        if (header.at("version") != kDatasetVersion) {
            throw Error(ErrorCode::ParseError, "line 1: unsupported version " + header.at("version").dump());
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("line 1: ") + e.what());
    }
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        out.push_back(sample_from_json_line(line, n));
    }
    return out;
}

std::filesystem::path resolve_visual_path(const std::filesystem::path& dataset_path, const VisualRef& ref) {
    const std::filesystem::path p(ref.path);
    if (p.is_absolute()) return p;
    return dataset_path.parent_path() / p;
}

}  // namespace ullava::data
