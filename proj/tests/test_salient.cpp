// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "support/fixtures.hpp"
#include "ullava/data.hpp"
#include "ullava/error.hpp"
#include "ullava/image_io.hpp"
#include "ullava/salient.hpp"
#include "ullava/synthetic.hpp"

using namespace ullava;
using namespace ullava::data;

namespace {

class FlakyCaptioner final : public CaptionClient {
public:
    explicit FlakyCaptioner(int failures) : failures_(failures) {}
    std::string describe(const encoders::Image& crop) override {
        ++calls;
        if (calls <= failures_) throw Error(ErrorCode::ClientError, "unavailable");
        return inner_.describe(crop);
    }
    std::atomic<int> calls{0};

private:
    int failures_;
    MockCaptionClient inner_;
};

class CountingTagger final : public TagClient {
public:
    std::string parse_tag(const std::string& d) override {
        ++calls;
        return inner_.parse_tag(d);
    }
    std::atomic<int> calls{0};

private:
    MockTagClient inner_;
};

std::vector<SalientRecord> records(std::size_t n, const std::filesystem::path& dir) {
    CorpusOptions o;
    o.count = n;
    o.seed = 21;
    return make_salient_records(o, dir);
}

RetryPolicy fast() { return {3, std::chrono::milliseconds(0)}; }

class LocalServer {
public:
    LocalServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(MockClients, DescribeAndTag) {
    const Scene scene = make_scene(4, {32, 1, 4});
    const auto crop = extract_object(scene.image, scene.objects[0].mask);
    MockCaptionClient cap;
    const std::string d = cap.describe(crop);
    EXPECT_EQ(d.rfind("a photo of a " + scene.objects[0].color + " ", 0), 0u) << d;
    MockTagClient tag;
    EXPECT_EQ(tag.parse_tag("a red ball"), "ball");
    EXPECT_THROW(tag.parse_tag("   "), Error);
    EXPECT_THROW(cap.describe(encoders::Image(2, 2)), Error);
}

TEST(ExtractObject, BlacksOutsideMask) {
    encoders::Image img(4, 4);
    std::fill(img.rgb.begin(), img.rgb.end(), 0.5f);
    BinaryMask m(4, 4);
    m.set(1, 1, true);
    m.set(2, 2, true);
    const auto crop = extract_object(img, m);
    EXPECT_EQ(crop.height, 2u);
    EXPECT_EQ(crop.width, 2u);
    EXPECT_EQ(crop.at(0, 0, 0), 0.5f);
    EXPECT_EQ(crop.at(0, 1, 0), 0.0f);
    EXPECT_THROW(extract_object(img, BinaryMask(3, 3)), Error);
}

TEST(Retry, ExhaustsThenRethrows) {
    int calls = 0;
    EXPECT_THROW(with_retry(fast(),
                            [&]() -> std::string {
                                ++calls;
                                throw Error(ErrorCode::ClientError, "x");
                            }),
                 Error);
    EXPECT_EQ(calls, 3);
    calls = 0;
    EXPECT_EQ(with_retry(fast(),
                         [&]() -> std::string {
                             if (++calls < 3) throw Error(ErrorCode::ClientError, "x");
                             return "ok";
                         }),
              "ok");
    calls = 0;
    EXPECT_THROW(with_retry(fast(),
                            [&]() -> std::string {
                                ++calls;
                                throw Error(ErrorCode::Validation, "not retried");
                            }),
                 Error);
    EXPECT_EQ(calls, 1);
}

TEST(BuildSalient, MockSamplesCarryTagAndSeg) {
    support::TempDir dir("salient");
    const auto recs = records(10, dir.path());
    MockCaptionClient cap;
    MockTagClient tag;
    SalientBuildOptions opt;
    opt.retry = fast();
    const auto out = build_salient15k(recs, cap, tag, opt);
    ASSERT_EQ(out.samples.size(), 10u);
    EXPECT_EQ(out.report.emitted, 10u);
    EXPECT_TRUE(out.report.skipped.empty());
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto& s = out.samples[i];
        EXPECT_NO_THROW(validate_sample(s));
        EXPECT_EQ(s.task_kind, TaskKind::Salient);
        EXPECT_EQ(s.id, "salient15k-" + recs[i].id);
        EXPECT_EQ(s.target_masks.at(0), recs[i].mask);
        EXPECT_NE(s.turns[1].text.find("</tag><SEG>"), std::string::npos);
    }
}

TEST(BuildSalient, FailingCaptionerSkipsRecord) {
    support::TempDir dir("salient-fail");
    const auto recs = records(3, dir.path());
    FlakyCaptioner cap(3);  // first record burns all three attempts
    MockTagClient tag;
    SalientBuildOptions opt;
    opt.retry = fast();
    const auto out = build_salient15k(recs, cap, tag, opt);
    EXPECT_EQ(out.samples.size(), 2u);
    ASSERT_EQ(out.report.skipped.size(), 1u);
    EXPECT_EQ(out.report.skipped[0].id, recs[0].id);
    EXPECT_EQ(out.report.total, 3u);
}

TEST(BuildSalient, EmptyMaskFailsBeforeAnyCall) {
    support::TempDir dir("salient-empty");
    auto recs = records(3, dir.path());
    recs[2].mask = BinaryMask(recs[2].mask.height, recs[2].mask.width);
    FlakyCaptioner cap(0);
    CountingTagger tag;
    try {
        build_salient15k(recs, cap, tag, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
    }
    EXPECT_EQ(cap.calls, 0);
    EXPECT_EQ(tag.calls, 0);
}

TEST(BuildSalient, WorkersPreserveOrder) {
    support::TempDir dir("salient-workers");
    const auto recs = records(12, dir.path());
    MockCaptionClient cap;
    MockTagClient tag;
    SalientBuildOptions one, four;
    four.workers = 4;
    const auto a = build_salient15k(recs, cap, tag, one);
    const auto b = build_salient15k(recs, cap, tag, four);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(sample_to_json_line(a.samples[i]), sample_to_json_line(b.samples[i]));
}

TEST(HttpClients, RoundTripAgainstLocalServer) {
    LocalServer srv;
    std::atomic<int> caption_calls{0};
    srv.server().Post("/caption", [&](const httplib::Request& req, httplib::Response& res) {
        ++caption_calls;
        const bool png = req.body.size() > 8 && req.body.compare(1, 3, "PNG") == 0;
        res.set_content(nlohmann::json{{"caption", png ? "a photo of a green bottle" : "not png"}}.dump(),
                        "application/json");
    });
    srv.server().Post("/tag", [](const httplib::Request& req, httplib::Response& res) {
        const auto d = nlohmann::json::parse(req.body).at("description").get<std::string>();
        res.set_content(nlohmann::json{{"tag", d.substr(d.rfind(' ') + 1)}}.dump(), "application/json");
    });
    srv.server().Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    srv.server().Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nope\":1}", "application/json");
    });

    ClientSettings s;
    s.caption_url = srv.url("/caption");
    s.tag_url = srv.url("/tag");
    s.timeout = std::chrono::milliseconds(2000);
    HttpCaptionClient cap(s);
    HttpTagClient tag(s);
    const Scene scene = make_scene(3, {});
    EXPECT_EQ(cap.describe(scene.image), "a photo of a green bottle");
    EXPECT_EQ(tag.parse_tag("a photo of a green bottle"), "bottle");

    ClientSettings broken = s;
    broken.caption_url = srv.url("/broken");
    broken.tag_url = srv.url("/garbage");
    HttpCaptionClient bad_cap(broken);
    HttpTagClient bad_tag(broken);
    for (auto fn : std::vector<std::function<void()>>{[&] { bad_cap.describe(scene.image); },
                                                      [&] { bad_tag.parse_tag("x"); }}) {
        try {
            fn();
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ClientError);
        }
    }
    ClientSettings nowhere = s;
    nowhere.caption_url = "not a url";
    EXPECT_THROW(HttpCaptionClient(nowhere).describe(scene.image), Error);

    support::TempDir dir("salient-http");
    const auto recs = records(3, dir.path());
    SalientBuildOptions opt;
    opt.retry = fast();
    const auto out = build_salient15k(recs, cap, tag, opt);
    EXPECT_EQ(out.samples.size(), 3u);
    EXPECT_NE(out.samples[0].turns[1].text.find("<tag>bottle</tag>"), std::string::npos);
}

TEST(ClientSettings, EnvironmentOverrides) {
    setenv("ULLAVA_CAPTION_URL", "http://example.invalid/c", 1);
    setenv("ULLAVA_CLIENT_ATTEMPTS", "5", 1);
    setenv("ULLAVA_CLIENT_TIMEOUT_MS", "250", 1);
    ClientSettings s;
    s.apply_environment();
    EXPECT_EQ(s.caption_url, "http://example.invalid/c");
    EXPECT_EQ(s.attempts, 5);
    EXPECT_EQ(s.timeout.count(), 250);
    setenv("ULLAVA_CLIENT_ATTEMPTS", "many", 1);
    EXPECT_THROW(s.apply_environment(), Error);
    unsetenv("ULLAVA_CAPTION_URL");
    unsetenv("ULLAVA_CLIENT_ATTEMPTS");
    unsetenv("ULLAVA_CLIENT_TIMEOUT_MS");
}
