// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Raw array (NPY, uint8) and PNG readers/writers for images, videos and masks.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ullava/encoders.hpp"
#include "ullava/types.hpp"

namespace ullava::io {

/// uint8 array of shape (H, W, 3).
void write_npy_image(const encoders::Image& image, const std::filesystem::path& path);
/// uint8 array of shape (T, H, W, 3).
void write_npy_video(const encoders::Video& video, const std::filesystem::path& path);
/// Accepts (H, W, 3) or (H, W) uint8 arrays.
encoders::Image read_npy_image(const std::filesystem::path& path);
encoders::Video read_npy_video(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const encoders::Image& image);
std::vector<std::uint8_t> encode_png(const BinaryMask& mask);
void write_png(const encoders::Image& image, const std::filesystem::path& path);
void write_png(const BinaryMask& mask, const std::filesystem::path& path);
encoders::Image read_png(const std::filesystem::path& path);

/// Dispatches on extension: .npy or .png.
encoders::Image read_image(const std::filesystem::path& path);
void write_image(const encoders::Image& image, const std::filesystem::path& path);

encoders::Image crop(const encoders::Image& image, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w);

}  // namespace ullava::io
