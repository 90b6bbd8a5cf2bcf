// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "support/fixtures.hpp"
#include "ullava/error.hpp"
#include "ullava/model.hpp"
#include "ullava/synthetic.hpp"

using namespace ullava;

namespace {

encoders::Image noise_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    encoders::Image img(h, w);
    for (auto& v : img.rgb) v = u(rng);
    return img;
}

ConversationSample res_sample() {
    ConversationSample s;
    s.id = "r0";
    s.task_kind = TaskKind::Res;
    s.visual_ref = VisualRef{"x.npy", VisualKind::Image};
    s.turns = {{Role::User, "<image> Segment out the red square."},
               {Role::Assistant, "Sure, <tag>red square</tag><SEG> at <tag>red square</tag><LOC>."}};
    BinaryMask m(32, 32);
    for (std::size_t r = 4; r < 12; ++r)
        for (std::size_t c = 8; c < 20; ++c) m.set(r, c, true);
    s.target_masks = {m};
    s.target_boxes = {{8.0 / 32, 4.0 / 32, 20.0 / 32, 12.0 / 32}};
    return s;
}

struct Fixture {
    model::ModelConfig config;
    std::unique_ptr<model::Model> model;
    model::VisualInput visual;
    ConversationSample sample = res_sample();

    Fixture() {
        model = std::make_unique<model::Model>(config, model::build_vocabulary({sample}, config));
        visual = model->encode(noise_image(32, 32, 3));
    }
};

double manual_cgl(const Matrix& logits, const tokens::TokenLayout& layout) {
    double total = 0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < layout.size(); ++i) {
        if (!layout.loss_mask[i]) continue;
        double mx = -1e300;
        for (std::size_t j = 0; j < logits.cols; ++j) mx = std::max(mx, logits(i - 1, j));
        double z = 0;
        for (std::size_t j = 0; j < logits.cols; ++j) z += std::exp(logits(i - 1, j) - mx);
        total += -(logits(i - 1, layout.token_ids[i]) - mx - std::log(z));
        ++n;
    }
    return total / static_cast<double>(n);
}

}  // namespace

TEST(Encoder, ImageFeatureShapeAndDeterminism) {
    encoders::ImageEncoder enc({8, 32, 16, 2, 7});
    const auto img = noise_image(32, 32, 1);
    const auto f = enc.encode_image(img);
    EXPECT_EQ(f.patch_embeddings.rows, 16u);
    EXPECT_EQ(f.patch_embeddings.cols, 32u);
    EXPECT_EQ(f.grid_rows, 4u);
    EXPECT_EQ(encoders::ImageEncoder({8, 32, 16, 2, 7}).encode_image(img).patch_embeddings, f.patch_embeddings);
    EXPECT_NE(encoders::ImageEncoder({8, 32, 16, 2, 8}).encode_image(img).patch_embeddings, f.patch_embeddings);
}

TEST(Encoder, BadShapes) {
    encoders::ImageEncoder enc({8, 32, 16, 2, 7});
    EXPECT_THROW(enc.encode_image(noise_image(30, 32, 1)), Error);
    EXPECT_THROW(enc.encode_image(noise_image(16, 16, 1)), Error);
    EXPECT_THROW(enc.encode_video({noise_image(32, 32, 1)}), Error);
}

TEST(Encoder, VideoFeatureIsSpatialThenTemporal) {
    encoders::ImageEncoder enc({8, 32, 16, 2, 7});
    const encoders::Video v{noise_image(32, 32, 1), noise_image(32, 32, 2)};
    const auto f = enc.encode_video(v);
    const auto a = enc.encode_image(v[0]).patch_embeddings, b = enc.encode_image(v[1]).patch_embeddings;
    ASSERT_EQ(f.temporal_embeddings.rows, 2u);
    for (std::size_t d = 0; d < 32; ++d) {
        double m0 = 0;
        for (std::size_t p = 0; p < 16; ++p) m0 += a(p, d);
        EXPECT_NEAR(f.temporal_embeddings(0, d), m0 / 16, 1e-12);
        EXPECT_NEAR(f.spatial_embeddings(3, d), (a(3, d) + b(3, d)) / 2, 1e-12);
    }
    EXPECT_EQ(f.concatenated().rows, 18u);
}

TEST(Projector, DimMismatch) {
    ParameterStore store;
    std::mt19937_64 rng(1);
    const auto proj = encoders::VisualProjector::create(store, 32, 64, rng);
    EXPECT_EQ(proj.output_dim(), 64u);
    EXPECT_TRUE(store.contains("visual_projector.video_tokens"));
    EXPECT_THROW(encoders::project_visual(Matrix(16, 31), proj), Error);
    EXPECT_EQ(encoders::project_visual(Matrix(16, 32), proj).rows(), 16u);
}

TEST(CausalLM, ShapesAndLossOracle) {
    Fixture fx;
    const auto layout = tokens::render_sample(fx.sample, fx.model->vocab());
    const auto e = fx.model->embed(fx.visual);
    const auto out = fx.model->lm().forward(layout, e.visual, e.boundary);
    EXPECT_EQ(out.logits.rows(), layout.size());
    EXPECT_EQ(out.logits.cols(), fx.model->vocab().size());
    EXPECT_EQ(out.hidden_states.cols(), 64u);
    EXPECT_NEAR(lm::coarse_grained_loss(out, layout).item(), manual_cgl(out.logits.value(), layout), 1e-12);
    const auto states = lm::extract_task_states(out, layout);
    ASSERT_EQ(states.seg_states.rows(), 1u);
    ASSERT_EQ(states.loc_states.rows(), 1u);
    for (std::size_t d = 0; d < 64; ++d) {
        EXPECT_EQ(states.seg_states.value()(0, d), out.hidden_states.value()(layout.seg_positions[0], d));
        EXPECT_EQ(states.loc_states.value()(0, d), out.hidden_states.value()(layout.loc_positions[0], d));
    }
}

TEST(CausalLM, IsCausal) {
    Fixture fx;
    auto layout = tokens::render_sample(fx.sample, fx.model->vocab());
    const auto e = fx.model->embed(fx.visual);
    const Matrix before = fx.model->lm().forward(layout, e.visual).logits.value();
    const std::size_t k = layout.size() - 3;
    layout.token_ids[k] = fx.model->vocab().unk();
    const Matrix after = fx.model->lm().forward(layout, e.visual).logits.value();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < before.cols; ++j) EXPECT_EQ(before(i, j), after(i, j));
    EXPECT_NE(before(k, 0), after(k, 0));
}

TEST(CausalLM, VisualEmbedsReachLaterPositions) {
    Fixture fx;
    const auto layout = tokens::render_sample(fx.sample, fx.model->vocab());
    const auto a = fx.model->lm().forward(layout, fx.model->embed(fx.visual).visual).logits.value();
    const auto other = fx.model->encode(noise_image(32, 32, 99));
    const auto b = fx.model->lm().forward(layout, fx.model->embed(other).visual).logits.value();
    EXPECT_EQ(a(0, 0), b(0, 0));  // begin token precedes every patch
    EXPECT_NE(a(layout.size() - 1, 0), b(layout.size() - 1, 0));
}

TEST(CausalLM, Errors) {
    Fixture fx;
    const auto layout = tokens::render_sample(fx.sample, fx.model->vocab());
    EXPECT_THROW(fx.model->lm().forward(layout), Error);
    EXPECT_THROW(fx.model->lm().forward(layout, ag::constant(Matrix(3, 64))), Error);
    auto long_layout = layout;
    long_layout.token_ids.resize(200, fx.model->vocab().unk());
    long_layout.loss_mask.resize(200, false);
    EXPECT_THROW(fx.model->lm().forward(long_layout, fx.model->embed(fx.visual).visual), Error);
    auto masked = layout;
    masked.loss_mask.assign(masked.size(), false);
    const auto out = fx.model->lm().forward(masked, fx.model->embed(fx.visual).visual);
    try {
        lm::coarse_grained_loss(out, masked);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyLossMask);
    }
    EXPECT_THROW((lm::LMConfig{10, 64, 2, 5, 128}.validate()), Error);
}

TEST(CausalLM, GenerateIsDeterministicAndAvoidsScaffold) {
    Fixture fx;
    const auto& v = fx.model->vocab();
    const auto prompt = tokens::render_prompt(VisualKind::Image, "<image> Segment out the red square.", v);
    const auto e = fx.model->embed(fx.visual);
    const auto a = lm::generate(fx.model->lm(), prompt, v, {12}, e.visual);
    const auto b = lm::generate(fx.model->lm(), prompt, v, {12}, e.visual);
    EXPECT_EQ(a, b);
    ASSERT_GT(a.size(), prompt.size());
    EXPECT_LE(a.size(), prompt.size() + 12);
    for (std::size_t i = prompt.size(); i < a.size(); ++i) {
        const auto id = a.token_ids[i];
        EXPECT_NE(id, v.pad());
        EXPECT_NE(id, v.user());
        EXPECT_NE(id, v.assistant());
        EXPECT_NE(id, v.table().img_patch);
        if (id == v.eos()) EXPECT_EQ(i + 1, a.size());
    }
    EXPECT_THROW(lm::generate(fx.model->lm(), prompt, v, {500}, e.visual), Error);
}

TEST(Heads, PixelHeadShapesAndErrors) {
    Fixture fx;
    const auto& head = fx.model->pixel_head();
    EXPECT_EQ(head.projector().widths(), (std::vector<std::size_t>{64, 64, 32}));
    std::mt19937_64 rng(2);
    const auto state = ag::constant(random_normal(1, 64, 1.0, rng));
    const auto logits = head.predict_mask_logits(state, *fx.visual.image);
    EXPECT_EQ(logits.rows(), 32u);
    EXPECT_EQ(logits.cols(), 32u);
    EXPECT_EQ(head.project(state).cols(), 32u);
    EXPECT_THROW(head.predict_mask_logits(ag::constant(Matrix(1, 63)), *fx.visual.image), Error);
    encoders::ImageFeature wrong = *fx.visual.image;
    wrong.grid_rows = 2;
    EXPECT_THROW(head.predict_mask_logits(state, wrong), Error);
}

TEST(Heads, ZeroDecoderGivesConstantMask) {
    model::ModelConfig mc;
    ConversationSample s = res_sample();
    model::Model m(mc, model::build_vocabulary({s}, mc));
    for (auto& [name, var] : m.store().entries())
        if (name.rfind("pixel_head.decoder.", 0) == 0 && name != "pixel_head.decoder.b_out")
            std::fill(var.mutable_value().data.begin(), var.mutable_value().data.end(), 0.0);
    m.store().get("pixel_head.decoder.b_out").mutable_value().data[0] = 0.25;
    const auto v = m.encode(noise_image(32, 32, 4));
    std::mt19937_64 rng(3);
    const auto logits = m.pixel_head().predict_mask_logits(ag::constant(random_normal(1, 64, 1.0, rng)), *v.image).value();
    for (double x : logits.data) EXPECT_DOUBLE_EQ(x, 0.25);
}

TEST(Heads, RegionBoxesAreValid) {
    Fixture fx;
    const auto& head = fx.model->region_head();
    EXPECT_EQ(head.projector().widths(), (std::vector<std::size_t>{64, 64, 32}));
    EXPECT_EQ(head.decoder().widths(), (std::vector<std::size_t>{32, 32, 16, 4}));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto b = head.predict_box(ag::constant(random_normal(1, 64, 3.0, rng)));
        EXPECT_TRUE(b.valid());
        EXPECT_LE(b.x1, b.x2);
        EXPECT_LE(b.y1, b.y2);
    }
    const auto sq = heads::to_box(heads::squash_box(ag::constant(Matrix(1, 4, {2.0, 1.0, -2.0, 0.0}))));
    EXPECT_NEAR(sq.x1, 1.0 / (1.0 + std::exp(2.0)), 1e-12);
    EXPECT_NEAR(sq.x2, 1.0 / (1.0 + std::exp(-2.0)), 1e-12);
    EXPECT_NEAR(sq.y1, 0.5, 1e-12);
    EXPECT_NEAR(sq.y2, 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(Model, ParameterNamespacesAndSize) {
    Fixture fx;
    std::set<std::string> roots;
    for (const auto& [name, v] : fx.model->store().entries()) roots.insert(name.substr(0, name.find('.')));
    EXPECT_EQ(roots, (std::set<std::string>{"visual_projector", "lm", "pixel_head", "region_head"}));
    EXPECT_LE(fx.model->store().parameter_count(), 1'000'000u);
}

TEST(Model, VocabularyMustMatchVisualSizes) {
    model::ModelConfig mc;
    EXPECT_THROW(model::Model(mc, tokens::Vocabulary::build({"a"}, 256, 8)), Error);
    mc.image_size = 30;
    EXPECT_THROW(mc.validate(), Error);
}

TEST(Model, ConfigRoundTrip) {
    model::ModelConfig mc;
    mc.d_lm = 32;
    mc.n_heads = 2;
    Config c;
    mc.to_config(c);
    EXPECT_EQ(model::ModelConfig::from_config(c), mc);
}

TEST(Model, ForwardSampleBranches) {
    Fixture fx;
    const auto f = model::forward_sample(*fx.model, fx.sample, fx.visual, {});
    EXPECT_TRUE(f.loss.breakdown.l_pixel.has_value());
    EXPECT_TRUE(f.loss.breakdown.l_region.has_value());
    EXPECT_EQ(f.mask_logits.size(), 1u);
    EXPECT_EQ(f.boxes.size(), 1u);
    const auto coarse = model::forward_sample(*fx.model, fx.sample, fx.visual, {}, {}, false);
    EXPECT_FALSE(coarse.loss.breakdown.l_pixel.has_value());
    EXPECT_EQ(coarse.loss.total.item(), coarse.loss.breakdown.l_cgl);
    EXPECT_THROW(model::forward_sample(*fx.model, fx.sample, model::VisualInput{}, {}), Error);
}
