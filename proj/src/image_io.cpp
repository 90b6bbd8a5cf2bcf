// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ullava/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ullava/error.hpp"

namespace ullava::io {

namespace {

std::uint8_t to_byte(float v) {
    const float clamped = std::min(1.0f, std::max(0.0f, v));
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<std::uint8_t>& bytes) {
    std::string dims;
    for (std::size_t i = 0; i < shape.size(); ++i) dims += (i ? ", " : "") + std::to_string(shape[i]);
    if (shape.size() == 1) dims += ",";
    std::string header = "{'descr': '|u1', 'fortran_order': False, 'shape': (" + dims + "), }";
    // magic(6) + version(2) + len(2) + header + '\n' padded to a multiple of 64
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
    out.write(len_bytes, 2);
    out << header;
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::vector<std::size_t> read_npy(const std::filesystem::path& path, std::vector<std::uint8_t>& bytes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) throw Error(ErrorCode::ParseError, path.string() + ": not an NPY file");
    std::size_t header_len = 0;
    if (magic[6] == 1) {
        unsigned char l[2];
        in.read(reinterpret_cast<char*>(l), 2);
        header_len = l[0] | (static_cast<std::size_t>(l[1]) << 8);
    } else {
        unsigned char l[4];
        in.read(reinterpret_cast<char*>(l), 4);
        header_len = l[0] | (static_cast<std::size_t>(l[1]) << 8) | (static_cast<std::size_t>(l[2]) << 16) |
                     (static_cast<std::size_t>(l[3]) << 24);
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw Error(ErrorCode::ParseError, path.string() + ": truncated NPY header");
    if (header.find("'|u1'") == std::string::npos && header.find("'u1'") == std::string::npos) {
        throw Error(ErrorCode::ParseError, path.string() + ": only uint8 arrays are supported");
    }
    if (header.find("'fortran_order': True") != std::string::npos) {
        throw Error(ErrorCode::ParseError, path.string() + ": fortran order not supported");
    }
    const auto open = header.find('(', header.find("'shape'"));
    const auto close = header.find(')', open);
    if (open == std::string::npos || close == std::string::npos) throw Error(ErrorCode::ParseError, path.string() + ": no shape");
    std::vector<std::size_t> shape;
    std::stringstream ss(header.substr(open + 1, close - open - 1));
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.find_first_not_of(" ") == std::string::npos) continue;
        shape.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    std::size_t total = 1;
    for (auto d : shape) total *= d;
    bytes.resize(total);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(total));
    if (static_cast<std::size_t>(in.gcount()) != total) throw Error(ErrorCode::ParseError, path.string() + ": truncated NPY data");
    return shape;
}

std::vector<std::uint8_t> image_bytes(const encoders::Image& image) {
    std::vector<std::uint8_t> bytes(image.rgb.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(image.rgb[i]);
    return bytes;
}

encoders::Image image_from_bytes(std::size_t h, std::size_t w, std::size_t channels, const std::uint8_t* data) {
    encoders::Image img(h, w);
    for (std::size_t i = 0; i < h * w; ++i)
        for (std::size_t ch = 0; ch < 3; ++ch) img.rgb[i * 3 + ch] = from_byte(data[i * channels + (channels == 1 ? 0 : ch)]);
    return img;
}

std::vector<std::uint8_t> png_to_memory(std::size_t h, std::size_t w, png_uint_32 format, const std::vector<std::uint8_t>& px) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("png sizing failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, std::string("png encoding failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace

void write_npy_image(const encoders::Image& image, const std::filesystem::path& path) {
    write_npy(path, {image.height, image.width, 3}, image_bytes(image));
}

void write_npy_video(const encoders::Video& video, const std::filesystem::path& path) {
    if (video.empty()) throw Error(ErrorCode::BadShape, "empty video");
    std::vector<std::uint8_t> bytes;
    for (const auto& f : video) {
        if (f.height != video.front().height || f.width != video.front().width) throw Error(ErrorCode::BadShape, "frame sizes differ");
        const auto b = image_bytes(f);
        bytes.insert(bytes.end(), b.begin(), b.end());
    }
    write_npy(path, {video.size(), video.front().height, video.front().width, 3}, bytes);
}

encoders::Image read_npy_image(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    const auto shape = read_npy(path, bytes);
    if (shape.size() == 2) return image_from_bytes(shape[0], shape[1], 1, bytes.data());
    if (shape.size() == 3 && shape[2] == 3) return image_from_bytes(shape[0], shape[1], 3, bytes.data());
    throw Error(ErrorCode::BadShape, path.string() + ": expected (H, W, 3) or (H, W) array");
}

encoders::Video read_npy_video(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    const auto shape = read_npy(path, bytes);
    if (shape.size() != 4 || shape[3] != 3) throw Error(ErrorCode::BadShape, path.string() + ": expected (T, H, W, 3) array");
    encoders::Video video;
    const std::size_t frame = shape[1] * shape[2] * 3;
    for (std::size_t t = 0; t < shape[0]; ++t) video.push_back(image_from_bytes(shape[1], shape[2], 3, bytes.data() + t * frame));
    return video;
}

std::vector<std::uint8_t> encode_png(const encoders::Image& image) {
    return png_to_memory(image.height, image.width, PNG_FORMAT_RGB, image_bytes(image));
}

std::vector<std::uint8_t> encode_png(const BinaryMask& mask) {
    std::vector<std::uint8_t> px(mask.pixels.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.pixels[i] ? 255 : 0;
    return png_to_memory(mask.height, mask.width, PNG_FORMAT_GRAY, px);
}

void write_png(const encoders::Image& image, const std::filesystem::path& path) { write_bytes(encode_png(image), path); }
void write_png(const BinaryMask& mask, const std::filesystem::path& path) { write_bytes(encode_png(mask), path); }

encoders::Image read_png(const std::filesystem::path& path) {
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw Error(ErrorCode::Io, "cannot read png " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
        png_image_free(&img);
        throw Error(ErrorCode::Io, "cannot decode png " + path.string() + ": " + img.message);
    }
    return image_from_bytes(img.height, img.width, 3, px.data());
}

encoders::Image read_image(const std::filesystem::path& path) {
    if (path.extension() == ".npy") return read_npy_image(path);
    if (path.extension() == ".png") return read_png(path);
    throw Error(ErrorCode::Validation, "unsupported image format: " + path.string());
}

void write_image(const encoders::Image& image, const std::filesystem::path& path) {
    if (path.extension() == ".npy") return write_npy_image(image, path);
    if (path.extension() == ".png") return write_png(image, path);
    throw Error(ErrorCode::Validation, "unsupported image format: " + path.string());
}

encoders::Image crop(const encoders::Image& image, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    if (r0 + h > image.height || c0 + w > image.width) throw Error(ErrorCode::BadShape, "crop outside image");
    encoders::Image out(h, w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch) out.at(r, c, ch) = image.at(r0 + r, c0 + c, ch);
    return out;
}

}  // namespace ullava::io
