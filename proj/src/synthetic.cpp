// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include "ullava/data.hpp"
#include "ullava/error.hpp"
#include "ullava/image_io.hpp"

namespace ullava::data {

namespace {

struct PaletteColor {
    const char* name;
    std::uint8_t r, g, b;
};

constexpr std::array<PaletteColor, 7> kColors{{
    {"red", 230, 25, 25},
    {"green", 25, 204, 25},
    {"blue", 25, 51, 230},
    {"yellow", 230, 230, 25},
    {"purple", 153, 25, 204},
    {"cyan", 25, 204, 230},
    {"orange", 242, 140, 25},
}};

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

float byte_value(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

std::string sample_id(const CorpusOptions& o, const char* task, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%05zu", task, i);
    return o.id_prefix + buf;
}

std::string image_rel_path(const std::string& id, const char* ext = ".npy") { return "images/" + id + ext; }

struct Rect {
    std::size_t r0, c0, h, w;
    bool overlaps(const Rect& o) const {
        return r0 < o.r0 + o.h && o.r0 < r0 + h && c0 < o.c0 + o.w && o.c0 < c0 + w;
    }
};

std::string shape_name(std::size_t h, std::size_t w) {
    if (w * 2 >= h * 3) return "bar";
    if (h * 2 >= w * 3) return "pillar";
    return "square";
}

void paint(encoders::Image& img, const Rect& r, const PaletteColor& c) {
    for (std::size_t y = r.r0; y < r.r0 + r.h; ++y)
        for (std::size_t x = r.c0; x < r.c0 + r.w; ++x) {
            img.at(y, x, 0) = byte_value(c.r);
            img.at(y, x, 1) = byte_value(c.g);
            img.at(y, x, 2) = byte_value(c.b);
        }
}

encoders::Image background(std::mt19937_64& rng, std::size_t size) {
    encoders::Image img(size, size);
    for (auto& v : img.rgb) v = byte_value(static_cast<std::uint8_t>(pick(rng, 20, 60)));
    return img;
}

SceneObject make_object(const Rect& r, const PaletteColor& c, std::size_t size) {
    SceneObject o;
    o.color = c.name;
    o.shape = shape_name(r.h, r.w);
    o.mask = BinaryMask(size, size);
    for (std::size_t y = r.r0; y < r.r0 + r.h; ++y)
        for (std::size_t x = r.c0; x < r.c0 + r.w; ++x) o.mask.set(y, x, true);
    o.box = mask_to_bbox(o.mask);
    return o;
}

Rect random_rect(std::mt19937_64& rng, const SceneOptions& opt) {
    const std::size_t cells = opt.image_size / opt.grid;
    const std::size_t max_side = std::max<std::size_t>(2, cells * 5 / 8);
    const std::size_t h = pick(rng, 2, max_side) * opt.grid;
    const std::size_t w = pick(rng, 2, max_side) * opt.grid;
    const std::size_t r0 = pick(rng, 0, (opt.image_size - h) / opt.grid) * opt.grid;
    const std::size_t c0 = pick(rng, 0, (opt.image_size - w) / opt.grid) * opt.grid;
    return {r0, c0, h, w};
}

std::string join_names(const std::vector<SceneObject>& objects) {
    std::vector<const SceneObject*> sorted;
    for (const auto& o : objects) sorted.push_back(&o);
    std::sort(sorted.begin(), sorted.end(), [](const SceneObject* a, const SceneObject* b) { return a->box.x1 < b->box.x1; });
    std::string out;
    for (std::size_t i = 0; i < sorted.size(); ++i) out += (i ? " and a " : "a ") + sorted[i]->name();
    return out;
}

}  // namespace

Scene make_scene(std::uint64_t seed, const SceneOptions& options) {
    if (options.grid == 0 || options.image_size % options.grid != 0 || options.image_size < 2 * options.grid) {
        throw Error(ErrorCode::Validation, "scene size must be a multiple of the grid");
    }
    if (options.n_objects > kColors.size()) throw Error(ErrorCode::Validation, "too many objects for the palette");
    std::mt19937_64 rng(seed);
    Scene scene;
    scene.image = background(rng, options.image_size);
    std::array<std::size_t, kColors.size()> order{};
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[pick(rng, 0, i)]);

    std::vector<Rect> placed;
    for (std::size_t k = 0; k < options.n_objects; ++k) {
        Rect r{};
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
            r = random_rect(rng, options);
            ok = std::none_of(placed.begin(), placed.end(), [&](const Rect& p) { return p.overlaps(r); });
        }
        if (!ok) throw Error(ErrorCode::Validation, "could not place scene objects without overlap");
        placed.push_back(r);
        paint(scene.image, r, kColors[order[k]]);
        scene.objects.push_back(make_object(r, kColors[order[k]], options.image_size));
    }
    return scene;
}

std::vector<ConversationSample> make_caption_corpus(const CorpusOptions& o, const std::filesystem::path& out_dir) {
    const TemplatePool pool = default_pool(TaskKind::Captioning);
    std::vector<ConversationSample> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        const Scene scene = make_scene(mix_seed(o.seed, i), o.scene);
        ConversationSample s;
        s.id = sample_id(o, "caption", i);
        s.task_kind = TaskKind::Captioning;
        s.visual_ref = VisualRef{image_rel_path(s.id), VisualKind::Image};
        io::write_npy_image(scene.image, out_dir / s.visual_ref->path);
        s.turns = {{Role::User, instantiate_template(pool, std::nullopt, mix_seed(o.seed ^ 0xC0FFEE, i))},
                   {Role::Assistant, join_names(scene.objects) + "."}};
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ConversationSample> make_video_caption_corpus(const CorpusOptions& o, const std::filesystem::path& out_dir) {
    const TemplatePool pool = default_pool(TaskKind::VideoCaption);
    SceneOptions single = o.scene;
    single.n_objects = 1;
    std::vector<ConversationSample> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        std::mt19937_64 rng(mix_seed(o.seed, i));
        const auto& color = kColors[pick(rng, 0, kColors.size() - 1)];
        const std::size_t size = single.image_size;
        const std::size_t side = 2 * single.grid;
        const bool right = rng() % 2 == 0;
        const std::size_t travel = (o.n_frames - 1) * single.grid;
        if (side + travel > size) throw Error(ErrorCode::Validation, "video too long for the image size");
        const std::size_t r0 = pick(rng, 0, (size - side) / single.grid) * single.grid;
        const std::size_t c_start = right ? 0 : size - side;
        encoders::Video video;
        for (std::size_t t = 0; t < o.n_frames; ++t) {
            encoders::Image frame = background(rng, size);
            const std::size_t c0 = right ? c_start + t * single.grid : c_start - t * single.grid;
            paint(frame, Rect{r0, c0, side, side}, color);
            video.push_back(std::move(frame));
        }
        ConversationSample s;
        s.id = sample_id(o, "video", i);
        s.task_kind = TaskKind::VideoCaption;
        s.visual_ref = VisualRef{image_rel_path(s.id), VisualKind::Video};
        io::write_npy_video(video, out_dir / s.visual_ref->path);
        s.turns = {{Role::User, instantiate_template(pool, std::nullopt, mix_seed(o.seed ^ 0xC0FFEE, i))},
                   {Role::Assistant, std::string("a ") + color.name + " square moves " + (right ? "right." : "left.")}};
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ConversationSample> make_vqa_corpus(const CorpusOptions& o, const std::filesystem::path& out_dir) {
    SceneOptions single = o.scene;
    single.n_objects = 1;
    std::vector<ConversationSample> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        const Scene scene = make_scene(mix_seed(o.seed, i), single);
        const SceneObject& obj = scene.objects.front();
        ConversationSample s;
        s.id = sample_id(o, "vqa", i);
        s.task_kind = TaskKind::Vqa;
        s.visual_ref = VisualRef{image_rel_path(s.id), VisualKind::Image};
        io::write_npy_image(scene.image, out_dir / s.visual_ref->path);
        const bool ask_color = i % 2 == 0;
        s.turns = {{Role::User, ask_color ? "<image> What color is the object?" : "<image> What shape is the object?"},
                   {Role::Assistant, "It is " + (ask_color ? obj.color : obj.shape) + "."}};
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ConversationSample> make_res_corpus(const CorpusOptions& o, const std::filesystem::path& out_dir,
                                                bool with_box) {
    const TemplatePool pool = default_pool(TaskKind::Res);
    std::vector<ConversationSample> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        const Scene scene = make_scene(mix_seed(o.seed, i), o.scene);
        const SceneObject& target = scene.objects[mix_seed(o.seed ^ 0xAB, i) % scene.objects.size()];
        ConversationSample s;
        s.id = sample_id(o, with_box ? "resbox" : "res", i);
        s.task_kind = TaskKind::Res;
        s.visual_ref = VisualRef{image_rel_path(s.id), VisualKind::Image};
        io::write_npy_image(scene.image, out_dir / s.visual_ref->path);
        std::string answer = "Sure, <tag>" + target.name() + "</tag><SEG>";
        if (with_box) answer += " at <tag>" + target.name() + "</tag><LOC>";
        s.turns = {{Role::User, instantiate_template(pool, target.name(), mix_seed(o.seed ^ 0xC0FFEE, i))},
                   {Role::Assistant, answer + "."}};
        s.target_masks.push_back(target.mask);
        if (with_box) s.target_boxes.push_back(target.box);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ConversationSample> make_rec_corpus(const CorpusOptions& o, const std::filesystem::path& out_dir) {
    const TemplatePool pool = default_pool(TaskKind::Rec);
    std::vector<ConversationSample> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        const Scene scene = make_scene(mix_seed(o.seed, i), o.scene);
        const SceneObject& target = scene.objects[mix_seed(o.seed ^ 0xAB, i) % scene.objects.size()];
        ConversationSample s;
        s.id = sample_id(o, "rec", i);
        s.task_kind = TaskKind::Rec;
        s.visual_ref = VisualRef{image_rel_path(s.id), VisualKind::Image};
        io::write_npy_image(scene.image, out_dir / s.visual_ref->path);
        s.turns = {{Role::User, instantiate_template(pool, target.name(), mix_seed(o.seed ^ 0xC0FFEE, i))},
                   {Role::Assistant, "It is <tag>" + target.name() + "</tag><LOC>."}};
        s.target_boxes.push_back(target.box);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SalientRecord> make_salient_records(const CorpusOptions& o, const std::filesystem::path& out_dir) {
    SceneOptions single = o.scene;
    single.n_objects = 1;
    std::vector<SalientRecord> out;
    for (std::size_t i = 0; i < o.count; ++i) {
        Scene scene = make_scene(mix_seed(o.seed, i), single);
        SalientRecord r;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%05zu", i);
        r.id = o.id_prefix + buf;
        r.image_path = image_rel_path("salient-" + r.id);
        io::write_npy_image(scene.image, out_dir / r.image_path);
        r.image = std::move(scene.image);
        r.mask = std::move(scene.objects.front().mask);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ullava::data
