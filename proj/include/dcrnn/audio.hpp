#pragma once

// Mono audio clips and 16-bit PCM WAV (RIFF) I/O.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcrnn {

struct AudioClip {
    std::vector<double> samples;  // in [-1, 1]
    std::uint32_t sample_rate = 44100;

    double duration_seconds() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

inline void write_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    auto put_u32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u16 = [&out](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

    out.write("RIFF", 4);
    put_u32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(1);  // PCM
    put_u16(1);  // mono
    put_u32(clip.sample_rate);
    put_u32(clip.sample_rate * 2);
    put_u16(2);
    put_u16(16);
    out.write("data", 4);
    put_u32(data_bytes);
    for (double s : clip.samples) {
        double clamped = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
        auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
        out.write(reinterpret_cast<const char*>(&q), 2);
    }
    if (!out) throw std::runtime_error("WAV write failed: " + path);
}

inline AudioClip read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);

    char tag[4];
    auto read_tag = [&]() {
        in.read(tag, 4);
        if (!in) throw std::runtime_error("truncated WAV file: " + path);
    };
    auto read_u32 = [&]() {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) throw std::runtime_error("truncated WAV file: " + path);
        return v;
    };
    auto read_u16 = [&]() {
        std::uint16_t v;
        in.read(reinterpret_cast<char*>(&v), 2);
        if (!in) throw std::runtime_error("truncated WAV file: " + path);
        return v;
    };

    read_tag();
    if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
    read_u32();
    read_tag();
    if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

    AudioClip clip;
    bool have_fmt = false, have_data = false;
    while (!have_data) {
        in.read(tag, 4);
        if (in.eof()) break;
        if (!in) throw std::runtime_error("truncated WAV file: " + path);
        std::uint32_t chunk_size = read_u32();
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const std::uint16_t format = read_u16();
            const std::uint16_t channels = read_u16();
            clip.sample_rate = read_u32();
            read_u32();  // byte rate
            read_u16();  // block align
            const std::uint16_t bits = read_u16();
            if (format != 1 || channels != 1 || bits != 16) {
                throw std::runtime_error("unsupported WAV encoding in " + path + " (need 16-bit PCM mono)");
            }
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            if (!have_fmt) throw std::runtime_error("WAV data chunk before fmt chunk: " + path);
            const std::size_t n = chunk_size / 2;
            clip.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::int16_t q;
                in.read(reinterpret_cast<char*>(&q), 2);
                if (!in) throw std::runtime_error("truncated WAV data: " + path);
                clip.samples[i] = static_cast<double>(q) / 32768.0;
            }
            have_data = true;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    if (!have_data) throw std::runtime_error("WAV file has no data chunk: " + path);
    return clip;
}

}  // namespace dcrnn
