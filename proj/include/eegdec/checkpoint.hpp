#pragma once
// Self-describing binary checkpoint: magic + version, a JSON header with the
// model config and vocabulary, then named parameter tensors with shapes and
// raw little-endian float64 payloads. Round-trips bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegdec/data.hpp"
#include "eegdec/model.hpp"

namespace eegdec {

constexpr char CHECKPOINT_MAGIC[8] = {'E', 'E', 'G', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t CHECKPOINT_VERSION = 1;

struct Checkpoint {
    ModelConfig config;
    Vocabulary vocab;
    ParamStore params;
};

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint64_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(CHECKPOINT_MAGIC, sizeof(CHECKPOINT_MAGIC));
    detail::write_pod(out, CHECKPOINT_VERSION);

    nlohmann::json header{{"config", model_config_to_json(cp.config)},
                          {"vocab", cp.vocab.id_to_token}};
    detail::write_string(out, header.dump());

    detail::write_pod<std::uint64_t>(out, cp.params.entries.size());
    for (const auto& [name, p] : cp.params.entries) {
        detail::write_string(out, name);
        detail::write_pod<std::uint8_t>(out, p.frozen ? 1 : 0);
        detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.ndim()));
        for (auto d : p.value.shape()) detail::write_pod<std::int64_t>(out, d);
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, CHECKPOINT_MAGIC, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const auto version = detail::read_pod<std::uint32_t>(in);
    if (version != CHECKPOINT_VERSION)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    Checkpoint cp;
    const auto header = nlohmann::json::parse(detail::read_string(in));
    cp.config = model_config_from_json(header.at("config"));
    cp.vocab.id_to_token = header.at("vocab").get<std::vector<std::string>>();
    cp.vocab.token_to_id.clear();
    for (std::int64_t i = 4; i < cp.vocab.size(); ++i)
        cp.vocab.token_to_id.emplace(cp.vocab.id_to_token[static_cast<std::size_t>(i)], i);

    const auto n_tensors = detail::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_tensors; ++i) {
        const auto name = detail::read_string(in);
        const auto frozen = detail::read_pod<std::uint8_t>(in);
        const auto ndim = detail::read_pod<std::uint32_t>(in);
        Shape shape(ndim);
        for (auto& d : shape) d = detail::read_pod<std::int64_t>(in);
        Tensor value(shape);
        in.read(reinterpret_cast<char*>(value.data()),
                static_cast<std::streamsize>(value.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
        cp.params.entries.emplace(name, Param{std::move(value), frozen != 0});
    }
    if (cp.config.vocab_size != cp.vocab.size())
        throw std::runtime_error("checkpoint config/vocab mismatch: config says " +
                                 std::to_string(cp.config.vocab_size) + " tokens, vocab has " +
                                 std::to_string(cp.vocab.size()));
    return cp;
}

// Stable byte serialization of a parameter subset; used for freeze checks.
inline std::string serialize_params(const ParamStore& store, const std::string& prefix) {
    std::ostringstream os;
    for (const auto& [name, p] : store.entries) {
        if (name.rfind(prefix, 0) != 0) continue;
        os << name << ':';
        os.write(reinterpret_cast<const char*>(p.value.data()),
                 static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    return os.str();
}

}  // namespace eegdec
