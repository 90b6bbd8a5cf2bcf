// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/salient.hpp"

#include <httplib.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <json.hpp>
#include <optional>
#include <thread>

#include "ullava/data.hpp"
#include "ullava/error.hpp"
#include "ullava/image_io.hpp"

namespace ullava::data {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (url.empty() || scheme == std::string::npos) throw Error(ErrorCode::ClientError, "invalid endpoint url '" + url + "'");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::string post(const ClientSettings& settings, const std::string& url, const std::string& body,
                 const std::string& content_type) {
    const Endpoint ep = split_url(url);
    httplib::Client client(ep.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(settings.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(settings.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(ep.path, body, content_type);
    if (!res) throw Error(ErrorCode::ClientError, "POST " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::ClientError, "POST " + url + " returned status " + std::to_string(res->status));
    return res->body;
}

std::string json_field(const std::string& body, const char* field, const std::string& url) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at(field).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ClientError, "malformed response from " + url + ": " + e.what());
    }
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::optional<long> env_long(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    try {
        return std::stol(v);
    } catch (const std::exception&) {
        throw Error(ErrorCode::Validation, std::string(name) + " is not an integer");
    }
}

struct NamedColor {
    const char* name;
    float r, g, b;
};

constexpr std::array<NamedColor, 8> kPalette{{
    {"red", 0.9f, 0.1f, 0.1f},
    {"green", 0.1f, 0.8f, 0.1f},
    {"blue", 0.1f, 0.2f, 0.9f},
    {"yellow", 0.9f, 0.9f, 0.1f},
    {"purple", 0.6f, 0.1f, 0.8f},
    {"cyan", 0.1f, 0.8f, 0.9f},
    {"orange", 0.95f, 0.55f, 0.1f},
    {"white", 0.95f, 0.95f, 0.95f},
}};

}  // namespace

void ClientSettings::apply_environment() {
    if (const char* v = std::getenv("ULLAVA_CAPTION_URL"); v && *v) caption_url = v;
    if (const char* v = std::getenv("ULLAVA_TAG_URL"); v && *v) tag_url = v;
    if (auto v = env_long("ULLAVA_CLIENT_TIMEOUT_MS")) timeout = std::chrono::milliseconds(*v);
    if (auto v = env_long("ULLAVA_CLIENT_ATTEMPTS")) attempts = static_cast<int>(*v);
    if (auto v = env_long("ULLAVA_CLIENT_BACKOFF_MS")) backoff = std::chrono::milliseconds(*v);
}

std::string HttpCaptionClient::describe(const encoders::Image& crop) {
    const auto png = io::encode_png(crop);
    const std::string body(png.begin(), png.end());
    return json_field(post(settings_, settings_.caption_url, body, "image/png"), "caption", settings_.caption_url);
}

std::string HttpTagClient::parse_tag(const std::string& description) {
    const std::string body = nlohmann::json{{"description", description}}.dump();
    return json_field(post(settings_, settings_.tag_url, body, "application/json"), "tag", settings_.tag_url);
}

std::string MockCaptionClient::describe(const encoders::Image& crop) {
    double r = 0, g = 0, b = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < crop.height * crop.width; ++i) {
        const float pr = crop.rgb[i * 3], pg = crop.rgb[i * 3 + 1], pb = crop.rgb[i * 3 + 2];
        if (pr + pg + pb == 0.0f) continue;  // blacked-out background
        r += pr;
        g += pg;
        b += pb;
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::ClientError, "mock captioner: empty crop");
    r /= static_cast<double>(n);
    g /= static_cast<double>(n);
    b /= static_cast<double>(n);
    const NamedColor* best = &kPalette[0];
    double best_d = 1e9;
    for (const auto& c : kPalette) {
        const double d = (r - c.r) * (r - c.r) + (g - c.g) * (g - c.g) + (b - c.b) * (b - c.b);
        if (d < best_d) {
            best_d = d;
            best = &c;
        }
    }
    const double aspect = static_cast<double>(crop.width) / static_cast<double>(crop.height);
    const char* noun = aspect > 1.5 ? "car" : (aspect < 1.0 / 1.5 ? "bottle" : "ball");
    return std::string("a photo of a ") + best->name + " " + noun;
}

std::string MockTagClient::parse_tag(const std::string& description) {
    const std::string d = trim(description);
    if (d.empty()) throw Error(ErrorCode::ClientError, "mock tagger: empty description");
    const auto space = d.find_last_of(' ');
    return space == std::string::npos ? d : d.substr(space + 1);
}

std::string with_retry(const RetryPolicy& policy, const std::function<std::string()>& fn) {
    const int attempts = std::max(1, policy.attempts);
    auto delay = policy.base_delay;
    for (int k = 1;; ++k) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ClientError || k >= attempts) throw;
        }
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        delay *= 2;
    }
}

encoders::Image extract_object(const encoders::Image& image, const BinaryMask& mask) {
    if (mask.height != image.height || mask.width != image.width) {
        throw Error(ErrorCode::ShapeMismatch, "mask and image sizes differ");
    }
    const PixelBounds b = mask_bounds(mask);
    encoders::Image out = io::crop(image, b.r0, b.c0, b.r1 - b.r0 + 1, b.c1 - b.c0 + 1);
    for (std::size_t r = 0; r < out.height; ++r)
        for (std::size_t c = 0; c < out.width; ++c)
            if (!mask.at(b.r0 + r, b.c0 + c))
                for (std::size_t ch = 0; ch < 3; ++ch) out.at(r, c, ch) = 0.0f;
    return out;
}

SalientBuildResult build_salient15k(const std::vector<SalientRecord>& records, CaptionClient& captioner,
                                    TagClient& tagger, const SalientBuildOptions& options) {
    for (const auto& rec : records) {
        if (rec.mask.count() == 0) throw Error(ErrorCode::EmptyMask, "record '" + rec.id + "' has an empty mask");
    }
    const TemplatePool pool = default_pool(TaskKind::Salient);

    struct Outcome {
        std::optional<ConversationSample> sample;
        std::string failure;
        std::exception_ptr error;
    };
    std::vector<Outcome> outcomes(records.size());

    auto process = [&](std::size_t i) {
        const SalientRecord& rec = records[i];
        Outcome& out = outcomes[i];
        try {
            const encoders::Image object = extract_object(rec.image, rec.mask);
            const std::string description = with_retry(options.retry, [&] { return captioner.describe(object); });
            const std::string tag = with_retry(options.retry, [&] {
                const std::string t = trim(tagger.parse_tag(description));
                if (t.empty() || t.find_first_of("<>\n") != std::string::npos) {
                    throw Error(ErrorCode::ClientError, "tagger returned an unusable tag '" + t + "'");
                }
                return t;
            });
            ConversationSample s;
            s.id = options.id_prefix + rec.id;
            s.task_kind = TaskKind::Salient;
            s.visual_ref = VisualRef{rec.image_path, VisualKind::Image};
            s.turns.push_back({Role::User, instantiate_template(pool, std::nullopt, mix_seed(options.seed, i))});
            s.turns.push_back({Role::Assistant, "It is <tag>" + tag + "</tag><SEG>."});
            s.target_masks.push_back(rec.mask);
            validate_sample(s);
            out.sample = std::move(s);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ClientError) {
                out.failure = e.what();
            } else {
                out.error = std::current_exception();
            }
        } catch (...) {
            out.error = std::current_exception();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, records.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < records.size(); ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool_threads;
        for (std::size_t w = 0; w < workers; ++w) {
            pool_threads.emplace_back([&] {
                for (std::size_t i = next++; i < records.size(); i = next++) process(i);
            });
        }
        for (auto& t : pool_threads) t.join();
    }

    SalientBuildResult result;
    result.report.total = records.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (outcomes[i].error) std::rethrow_exception(outcomes[i].error);
        if (outcomes[i].sample) {
            result.samples.push_back(std::move(*outcomes[i].sample));
        } else {
            result.report.skipped.push_back({records[i].id, outcomes[i].failure});
        }
    }
    result.report.emitted = result.samples.size();
    return result;
}

}  // namespace ullava::data
