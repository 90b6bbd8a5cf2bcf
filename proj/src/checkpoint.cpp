// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Layout (little-endian):
//   "ULLAVACK" | u32 version | u64 n | n bytes header JSON {model, config_hash, vocab}
//   | u64 tensor count | per tensor: u32 name length, name, u64 rows, u64 cols, f64 data
//   | u64 FNV-1a of all preceding bytes

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ullava/error.hpp"
#include "ullava/trainer.hpp"

namespace ullava::train {

namespace {

constexpr char kMagic[8] = {'U', 'L', 'L', 'A', 'V', 'A', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& data) : data_(data) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
    }
    const std::string& data_;
    std::size_t pos_ = 0;
};

Config model_config_kv(const model::ModelConfig& m) {
    Config c;
    m.to_config(c);
    return c;
}

}  // namespace

void save_checkpoint(const model::Model& model, const std::filesystem::path& path) {
    const Config kv = model_config_kv(model.config());
    nlohmann::ordered_json header;
    header["model"] = kv.values();
    header["config_hash"] = kv.hash();
    header["vocab"] = model.vocab().tokens();
    const std::string h = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, h.size());
    out += h;
    put<std::uint64_t>(out, model.store().entries().size());
    for (const auto& [name, var] : model.store().entries()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        const Matrix& v = var.value();
        put<std::uint64_t>(out, v.rows);
        put<std::uint64_t>(out, v.cols);
        out.append(reinterpret_cast<const char*>(v.data.data()), v.data.size() * sizeof(double));
    }
    put<std::uint64_t>(out, fnv1a(out.data(), out.size()));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string data = ss.str();

    Reader r(data);
    if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + " is not a checkpoint");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
        throw Error(ErrorCode::VersionMismatch, "checkpoint format version " + std::to_string(version) + ", expected " +
                                                    std::to_string(kCheckpointVersion));
    }
    if (data.size() < sizeof(std::uint64_t) + r.pos()) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint is truncated");
    const std::size_t body = data.size() - sizeof(std::uint64_t);
    std::uint64_t stored = 0;
    std::memcpy(&stored, data.data() + body, sizeof stored);
    if (stored != fnv1a(data.data(), body)) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint checksum mismatch");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.bytes(r.get<std::uint64_t>()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("bad checkpoint header: ") + e.what());
    }
    Config kv;
    for (const auto& [k, v] : header.at("model").items()) kv.set(k, v.get<std::string>());
    if (kv.hash() != header.at("config_hash").get<std::string>()) {
        throw Error(ErrorCode::CorruptCheckpoint, "checkpoint config hash mismatch");
    }
    const model::ModelConfig mc = model::ModelConfig::from_config(kv);
    auto vocab = tokens::Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>(), mc.n_img_patches(),
                                                 mc.n_frames);
    auto model = std::make_unique<model::Model>(mc, std::move(vocab));

    const auto count = r.get<std::uint64_t>();
    if (count != model->store().entries().size()) throw Error(ErrorCode::CorruptCheckpoint, "tensor count mismatch");
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = r.bytes(r.get<std::uint32_t>());
        const auto rows = r.get<std::uint64_t>();
        const auto cols = r.get<std::uint64_t>();
        if (!model->store().contains(name)) throw Error(ErrorCode::CorruptCheckpoint, "unknown tensor '" + name + "'");
        Matrix& w = model->store().get(name).mutable_value();
        if (w.rows != rows || w.cols != cols) throw Error(ErrorCode::CorruptCheckpoint, "shape mismatch for '" + name + "'");
        const std::string raw = r.bytes(rows * cols * sizeof(double));
        std::memcpy(w.data.data(), raw.data(), raw.size());
    }
    if (r.pos() != body) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes in checkpoint");
    return model;
}

std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected) {
    auto model = load_checkpoint(path);
    if (!(model->config() == expected)) {
        throw Error(ErrorCode::VersionMismatch, "checkpoint model config " + model_config_kv(model->config()).hash() +
                                                    " differs from the requested config " +
                                                    model_config_kv(expected).hash());
    }
    return model;
}

}  // namespace ullava::train
