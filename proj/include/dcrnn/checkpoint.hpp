#pragma once

// Flat binary tensor container used for parameter checkpoints (magic "DCRN")
// and cached feature matrices (magic "FEAT").
//
// Layout, all integers little-endian:
//   magic          4 bytes
//   version        u32 (currently 1)
//   per record:    u32 name length, UTF-8 name bytes,
//                  u32 rank, u64 dims[rank],
//                  f64 values[prod(dims)] (IEEE-754)
// Records run to end of file. Round-trips are bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcrnn/tensor.hpp"

namespace dcrnn {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

inline constexpr std::uint32_t kContainerVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("container read failed (truncated file): " + path);
    return value;
}

}  // namespace detail

inline void save_container(const std::string& path, const char magic[4], const NamedTensors& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(magic, 4);
    detail::write_raw(out, kContainerVersion);
    for (const auto& [name, tensor] : records) {
        detail::write_raw(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_raw(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t d : tensor.shape()) detail::write_raw(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(tensor.data().data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("container write failed: " + path);
}

inline NamedTensors load_container(const std::string& path, const char expected_magic[4]) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, expected_magic, 4) != 0) {
        throw std::runtime_error("bad container magic in " + path + " (expected " +
                                 std::string(expected_magic, 4) + ")");
    }
    const auto version = detail::read_raw<std::uint32_t>(in, path);
    if (version != kContainerVersion) {
        throw std::runtime_error("unsupported container version " + std::to_string(version) + " in " + path);
    }

    NamedTensors records;
    while (true) {
        std::uint32_t name_len;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        if (in.eof()) break;
        if (!in) throw std::runtime_error("container read failed: " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = detail::read_raw<std::uint32_t>(in, path);
        Shape shape(rank);
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<std::size_t>(detail::read_raw<std::uint64_t>(in, path));
            count *= shape[i];
        }
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("container read failed (truncated record '" + name + "'): " + path);
        records.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
    }
    return records;
}

inline constexpr char kCheckpointMagic[4] = {'D', 'C', 'R', 'N'};
inline constexpr char kFeatureMagic[4] = {'F', 'E', 'A', 'T'};

}  // namespace dcrnn
