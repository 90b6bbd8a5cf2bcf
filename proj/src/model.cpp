// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/model.hpp"

#include <algorithm>
#include <set>

#include "ullava/data.hpp"
#include "ullava/error.hpp"
#include "ullava/image_io.hpp"
#include "ullava/metrics.hpp"

namespace ullava::model {

namespace {

heads::PixelHeadConfig pixel_config(const ModelConfig& c) {
    return {c.d_lm, c.d_vis, c.d_prompt, c.mask_channels, c.patch_size, c.grid(), c.grid()};
}

encoders::EncoderConfig encoder_config(const ModelConfig& c) {
    return {c.patch_size, c.d_vis, c.n_img_patches(), c.n_frames, c.seed ^ 0x5EEDULL};
}

Prediction read_heads(const Model& model, const tokens::TokenLayout& layout, const VisualInput& visual) {
    ag::NoGradGuard guard;
    const VisualEmbeds e = model.embed(visual);
    const lm::LMOutput out = model.lm().forward(layout, e.visual, e.boundary);
    const lm::TaskStates states = lm::extract_task_states(out, layout);
    Prediction p;
    for (std::size_t i = 0; i < layout.seg_positions.size(); ++i) {
        if (!visual.image) throw Error(ErrorCode::Validation, "<SEG> needs an image input");
        const ag::Var logits = model.pixel_head().predict_mask_logits(ag::gather_rows(states.seg_states, {i}), *visual.image);
        p.masks.push_back(logits_to_mask(logits.value()));
    }
    for (std::size_t i = 0; i < layout.loc_positions.size(); ++i) {
        p.boxes.push_back(model.region_head().predict_box(ag::gather_rows(states.loc_states, {i})));
    }
    std::optional<NormalizedBox> loc;
    std::optional<BinaryMask> mask;
    if (!p.boxes.empty()) loc = p.boxes.front();
    if (!p.masks.empty() && p.masks.front().count() > 0) mask = p.masks.front();
    if (loc || mask) p.fused_box = metrics::fuse_rec_outputs(loc, mask);
    const auto decoded = tokens::decode_layout(layout, model.vocab());
    for (const auto& t : decoded.turns)
        if (t.role == Role::Assistant) p.text = t.text;
    return p;
}

}  // namespace

ModelConfig ModelConfig::from_config(const Config& c) {
    ModelConfig m;
    m.image_size = c.get_size("model.image_size", m.image_size);
    m.patch_size = c.get_size("model.patch_size", m.patch_size);
    m.n_frames = c.get_size("model.n_frames", m.n_frames);
    m.d_vis = c.get_size("model.d_vis", m.d_vis);
    m.d_lm = c.get_size("model.d_lm", m.d_lm);
    m.n_layers = c.get_size("model.n_layers", m.n_layers);
    m.n_heads = c.get_size("model.n_heads", m.n_heads);
    m.max_sequence_length = c.get_size("model.max_sequence_length", m.max_sequence_length);
    m.d_prompt = c.get_size("model.d_prompt", m.d_prompt);
    m.mask_channels = c.get_size("model.mask_channels", m.mask_channels);
    m.d_box = c.get_size("model.d_box", m.d_box);
    m.seed = static_cast<std::uint64_t>(c.get_int("model.seed", static_cast<std::int64_t>(m.seed)));
    m.validate();
    return m;
}

void ModelConfig::to_config(Config& c) const {
    c.set("model.image_size", std::to_string(image_size));
    c.set("model.patch_size", std::to_string(patch_size));
    c.set("model.n_frames", std::to_string(n_frames));
    c.set("model.d_vis", std::to_string(d_vis));
    c.set("model.d_lm", std::to_string(d_lm));
    c.set("model.n_layers", std::to_string(n_layers));
    c.set("model.n_heads", std::to_string(n_heads));
    c.set("model.max_sequence_length", std::to_string(max_sequence_length));
    c.set("model.d_prompt", std::to_string(d_prompt));
    c.set("model.mask_channels", std::to_string(mask_channels));
    c.set("model.d_box", std::to_string(d_box));
    c.set("model.seed", std::to_string(seed));
}

void ModelConfig::validate() const {
    if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
        throw Error(ErrorCode::Validation, "model.image_size must be a positive multiple of model.patch_size");
    }
    if (n_frames == 0 || d_vis == 0 || d_prompt == 0 || mask_channels == 0 || d_box < 2) {
        throw Error(ErrorCode::Validation, "model dimensions must be positive (d_box >= 2)");
    }
    lm::LMConfig{1, d_lm, n_layers, n_heads, max_sequence_length}.validate();
}

std::optional<VisualKind> VisualInput::kind() const {
    if (image) return VisualKind::Image;
    if (video) return VisualKind::Video;
    return std::nullopt;
}

Model::Model(ModelConfig config, tokens::Vocabulary vocab)
    : config_((config.validate(), config)),
      vocab_(std::move(vocab)),
      encoder_(encoder_config(config_)),
      rng_(config_.seed),
      projector_(encoders::VisualProjector::create(store_, config_.d_vis, config_.d_lm, rng_)),
      lm_(lm::LMConfig{vocab_.size(), config_.d_lm, config_.n_layers, config_.n_heads, config_.max_sequence_length},
          store_, rng_),
      pixel_(pixel_config(config_), store_, rng_),
      region_(heads::RegionHeadConfig{config_.d_lm, config_.d_box}, store_, rng_) {
    if (vocab_.table().n_img_patches != config_.n_img_patches() || vocab_.table().n_frames != config_.n_frames) {
        throw Error(ErrorCode::Validation, "vocabulary visual-span sizes do not match the model config");
    }
}

VisualInput Model::encode(const encoders::Image& image) const {
    VisualInput v;
    v.image = encoder_.encode_image(image);
    return v;
}

VisualInput Model::encode(const encoders::Video& video) const {
    VisualInput v;
    v.video = encoder_.encode_video(video);
    return v;
}

VisualEmbeds Model::embed(const VisualInput& input) const {
    VisualEmbeds e;
    if (input.image) {
        e.visual = encoders::project_visual(*input.image, projector_);
    } else if (input.video) {
        e.visual = encoders::project_visual(*input.video, projector_);
        e.boundary = projector_.video_tokens;
    }
    return e;
}

tokens::Vocabulary build_vocabulary(const std::vector<ConversationSample>& samples, const ModelConfig& config) {
    std::set<std::string> words;
    for (const auto& s : samples)
        for (const auto& t : s.turns)
            for (auto& w : tokens::split_words(t.text))
                if (!(w.size() >= 2 && w.front() == '<' && w.back() == '>')) words.insert(w);
    return tokens::Vocabulary::build({words.begin(), words.end()}, config.n_img_patches(), config.n_frames);
}

VisualInput load_visual(const Model& model, const std::filesystem::path& path, VisualKind kind) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "visual input not found: " + path.string());
    if (kind == VisualKind::Video) return model.encode(io::read_npy_video(path));
    return model.encode(io::read_image(path));
}

const VisualInput& FeatureCache::get(const Model& model, const std::filesystem::path& path, VisualKind kind) {
    const std::string key = path.string() + (kind == VisualKind::Video ? "#video" : "#image");
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, load_visual(model, path, kind)).first;
    return it->second;
}

const VisualInput& FeatureCache::get(const Model& model, const std::filesystem::path& dataset_path,
                                     const ConversationSample& sample) {
    static const VisualInput kNone;
    if (!sample.visual_ref) return kNone;
    return get(model, data::resolve_visual_path(dataset_path, *sample.visual_ref), sample.visual_ref->kind);
}

SampleForward forward_sample(const Model& model, const ConversationSample& sample, const VisualInput& visual,
                             const losses::LossConfig& loss_config, tokens::RenderOptions render, bool fine_grained) {
    const bool has_visual = visual.kind().has_value();
    if (sample.visual_ref.has_value() != has_visual || (has_visual && sample.visual_ref->kind != *visual.kind())) {
        throw Error(ErrorCode::InvalidSample, "sample '" + sample.id + "': visual input does not match its reference");
    }
    SampleForward f;
    f.layout = tokens::render_sample(sample, model.vocab(), render);
    const VisualEmbeds e = model.embed(visual);
    const lm::LMOutput out = model.lm().forward(f.layout, e.visual, e.boundary);
    const ag::Var l_cgl = lm::coarse_grained_loss(out, f.layout);
    if (!fine_grained) {
        f.loss = losses::fine_grained_loss(l_cgl, {}, {}, loss_config);
        return f;
    }
    const lm::TaskStates states = lm::extract_task_states(out, f.layout);
    std::vector<losses::MaskPair> masks;
    std::vector<losses::BoxPair> boxes;
    for (std::size_t i = 0; i < f.layout.seg_positions.size(); ++i) {
        if (!visual.image) throw Error(ErrorCode::InvalidSample, "sample '" + sample.id + "': mask targets need an image");
        f.mask_logits.push_back(
            model.pixel_head().predict_mask_logits(ag::gather_rows(states.seg_states, {i}), *visual.image));
        masks.push_back({f.mask_logits.back(), sample.target_masks.at(i)});
    }
    for (std::size_t i = 0; i < f.layout.loc_positions.size(); ++i) {
        f.boxes.push_back(model.region_head().predict_box_var(ag::gather_rows(states.loc_states, {i})));
        boxes.push_back({f.boxes.back(), sample.target_boxes.at(i)});
    }
    f.loss = losses::fine_grained_loss(l_cgl, masks, boxes, loss_config);
    return f;
}

BinaryMask logits_to_mask(const Matrix& logits) {
    BinaryMask m(logits.rows, logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r)
        for (std::size_t c = 0; c < logits.cols; ++c) m.set(r, c, logits(r, c) > 0.0);
    return m;
}

Prediction predict_teacher_forced(const Model& model, const ConversationSample& sample, const VisualInput& visual) {
    const tokens::TokenLayout layout =
        tokens::render_sample(sample, model.vocab(), {model.config().max_sequence_length});
    return read_heads(model, layout, visual);
}

Prediction predict_generate(const Model& model, const VisualInput& visual, const std::string& user_text,
                            std::size_t max_new_tokens) {
    const auto kind = visual.kind();
    const tokens::TokenLayout prompt =
        tokens::render_prompt(kind, user_text, model.vocab(), {model.config().max_sequence_length});
    const std::size_t budget =
        std::min(max_new_tokens, model.config().max_sequence_length - std::min(prompt.size(), model.config().max_sequence_length));
    tokens::TokenLayout generated;
    {
        ag::NoGradGuard guard;
        const VisualEmbeds e = model.embed(visual);
        generated = lm::generate(model.lm(), prompt, model.vocab(), {budget}, e.visual, e.boundary);
    }
    return read_heads(model, generated, visual);
}

}  // namespace ullava::model
