#pragma once

// Model checkpoint file, version 1. All integers and floats little-endian.
//
//   offset  size        field
//   0       8           magic "T2PCKPT\0"
//   8       4  (u32)    format version (1)
//   12      4  (u32)    config text length L
//   16      L           config text, "key = value\n" lines sorted by key (UTF-8)
//   16+L    4  (u32)    array count N
//   then N times:
//           4  (u32)    name length, followed by the name bytes
//           4  (u32)    rank R, followed by R dims as u64
//           8 * prod(dims)  values as IEEE-754 binary64
//
// Arrays appear in T2PModel::parameter_names() order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "t2p/config.hpp"
#include "t2p/errors.hpp"
#include "t2p/model.hpp"

namespace t2p {

inline constexpr std::array<char, 8> kCheckpointMagic{'T', '2', 'P', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& out, U v) {
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U)))
        throw FormatError(std::string("checkpoint truncated while reading ") + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

inline std::string get_bytes(std::istream& in, std::size_t n, const char* what) {
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
        throw FormatError(std::string("checkpoint truncated while reading ") + what);
    return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const T2PModel& model) {
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::put_le<std::uint32_t>(out, kCheckpointVersion);
    const std::string cfg = to_text(model.config().to_key_values());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    const auto& names = T2PModel::parameter_names();
    const auto& params = model.parameters();
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(names[i].size()));
        out.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params[i].rank()));
        for (auto d : params[i].shape()) detail::put_le<std::uint64_t>(out, d);
        for (double v : params[i].values()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
}

inline T2PModel read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
        throw FormatError("not a T2P checkpoint (bad magic)");
    const auto version = detail::get_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto cfg_len = detail::get_le<std::uint32_t>(in, "config length");
    std::istringstream cfg_text(detail::get_bytes(in, cfg_len, "config"));
    T2PConfig config;
    config.apply(parse_key_values(cfg_text));
    T2PModel model(config);

    const auto& names = T2PModel::parameter_names();
    auto& params = model.parameters();
    const auto count = detail::get_le<std::uint32_t>(in, "array count");
    if (count != params.size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " arrays, expected " +
                          std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto name_len = detail::get_le<std::uint32_t>(in, "array name length");
        const std::string name = detail::get_bytes(in, name_len, "array name");
        if (name != names[i]) throw FormatError("expected array '" + names[i] + "', found '" + name + "'");
        const auto rank = detail::get_le<std::uint32_t>(in, "rank");
        Shape shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(detail::get_le<std::uint64_t>(in, "dimension"));
        if (shape != params[i].shape())
            throw FormatError("array '" + name + "' has shape " + shape_string(shape) + ", config implies " +
                              shape_string(params[i].shape()));
        auto values = params[i].mutable_values();
        for (auto& v : values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(in, "values"));
    }
    return model;
}

inline void save_checkpoint(const T2PModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint '" + path + "'");
    write_checkpoint(out, model);
    if (!out) throw InputError("write failed for '" + path + "'");
}

inline T2PModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

}  // namespace t2p
