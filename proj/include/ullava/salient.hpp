// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Salient-object instruction data: crop the object by its mask, ask a
// captioner to describe the crop, ask a tagger for the object tag, then fill a
// salient-segmentation template.
//
// HTTP clients:
//   POST {caption_url}   body: PNG bytes (Content-Type: image/png)
//                        200 -> {"caption": "<description>"}
//   POST {tag_url}       body: {"description": "<description>"} (application/json)
//                        200 -> {"tag": "<noun phrase>"}
// Any transport failure, non-200 status or malformed body is a ClientError.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ullava/encoders.hpp"
#include "ullava/types.hpp"

namespace ullava::data {

class CaptionClient {
public:
    virtual ~CaptionClient() = default;
    /// Free-text description of an object crop. Throws Error(ClientError).
    virtual std::string describe(const encoders::Image& crop) = 0;
};

class TagClient {
public:
    virtual ~TagClient() = default;
    /// Single noun-phrase object tag parsed from a description. Throws Error(ClientError).
    virtual std::string parse_tag(const std::string& description) = 0;
};

struct ClientSettings {
    std::string caption_url;
    std::string tag_url;
    std::chrono::milliseconds timeout{10000};
    int attempts = 3;
    std::chrono::milliseconds backoff{200};

    /// Overrides fields from ULLAVA_CAPTION_URL, ULLAVA_TAG_URL,
    /// ULLAVA_CLIENT_TIMEOUT_MS, ULLAVA_CLIENT_ATTEMPTS, ULLAVA_CLIENT_BACKOFF_MS.
    void apply_environment();
};

class HttpCaptionClient final : public CaptionClient {
public:
    explicit HttpCaptionClient(ClientSettings settings) : settings_(std::move(settings)) {}
    std::string describe(const encoders::Image& crop) override;

private:
    ClientSettings settings_;
};

class HttpTagClient final : public TagClient {
public:
    explicit HttpTagClient(ClientSettings settings) : settings_(std::move(settings)) {}
    std::string parse_tag(const std::string& description) override;

private:
    ClientSettings settings_;
};

/// Names the crop's dominant color and a shape word from its aspect ratio,
/// e.g. "a photo of a red ball". Deterministic and thread-safe.
class MockCaptionClient final : public CaptionClient {
public:
    std::string describe(const encoders::Image& crop) override;
};

/// Returns the description's last word; rejects empty descriptions.
class MockTagClient final : public TagClient {
public:
    std::string parse_tag(const std::string& description) override;
};

struct SalientRecord {
    std::string id;
    std::string image_path;  // stored in the emitted sample's visual_ref
    encoders::Image image;
    BinaryMask mask;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{200};  // doubles after each failed attempt
};

struct SalientBuildOptions {
    std::uint64_t seed = 0;
    RetryPolicy retry;
    std::size_t workers = 1;
    std::string id_prefix = "salient15k-";
};

struct SkippedRecord {
    std::string id;
    std::string reason;
};

struct SalientBuildReport {
    std::size_t total = 0;
    std::size_t emitted = 0;
    std::vector<SkippedRecord> skipped;
};

struct SalientBuildResult {
    std::vector<ConversationSample> samples;
    SalientBuildReport report;
};

/// Calls `fn` up to policy.attempts times, sleeping base_delay·2^k between
/// failures; rethrows the last ClientError.
std::string with_retry(const RetryPolicy& policy, const std::function<std::string()>& fn);

/// Output order follows input order regardless of `workers`. A record whose
/// client calls exhaust the retry budget is skipped and reported. Throws
/// EmptyMask before any client call if a record's mask is empty.
SalientBuildResult build_salient15k(const std::vector<SalientRecord>& records, CaptionClient& captioner,
                                    TagClient& tagger, const SalientBuildOptions& options);

/// Object crop fed to the captioner: the mask's tight box with pixels outside
/// the mask blacked out.
encoders::Image extract_object(const encoders::Image& image, const BinaryMask& mask);

}  // namespace ullava::data
