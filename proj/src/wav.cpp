#include "votetok/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace votetok {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

}  // namespace

Waveform load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_wav: cannot open " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw std::runtime_error("load_wav: not a RIFF file: " + path);
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw std::runtime_error("load_wav: not a WAVE file: " + path);

    bool have_fmt = false;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    std::vector<char> data;

    while (in.read(tag, 4)) {
        const uint32_t chunk_size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            sample_rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.ignore(chunk_size - 16);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(chunk_size);
            in.read(data.data(), chunk_size);
            if (!in) throw std::runtime_error("load_wav: truncated data chunk: " + path);
        } else {
            in.ignore(chunk_size + (chunk_size & 1));  // chunks are word-aligned
        }
    }

    if (!have_fmt) throw std::runtime_error("load_wav: missing fmt chunk: " + path);
    if (format != 1) throw std::runtime_error("load_wav: not PCM (fmt=" + std::to_string(format) + "): " + path);
    if (channels != 1)
        throw std::runtime_error("load_wav: expected mono, got " + std::to_string(channels) + " channels: " + path);
    if (bits != 16) throw std::runtime_error("load_wav: expected 16-bit PCM, got " + std::to_string(bits) + ": " + path);
    if (sample_rate == 0) throw std::runtime_error("load_wav: zero sample rate: " + path);

    Waveform w;
    w.sample_rate_hz = static_cast<int>(sample_rate);
    const size_t n = data.size() / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(static_cast<uint8_t>(data[2 * i]) |
                                               (static_cast<uint8_t>(data[2 * i + 1]) << 8));
        w.samples[i] = static_cast<double>(s) / 32768.0;
    }
    return w;
}

void save_wav(const Waveform& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_wav: cannot write " + path);

    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint32_t data_bytes = n * 2;
    const uint32_t sr = static_cast<uint32_t>(w.sample_rate_hz);

    out.write("RIFF", 4);
    write_u32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);   // PCM
    write_u16(out, 1);   // mono
    write_u32(out, sr);
    write_u32(out, sr * 2);
    write_u16(out, 2);   // block align
    write_u16(out, 16);  // bits
    out.write("data", 4);
    write_u32(out, data_bytes);

    for (uint32_t i = 0; i < n; ++i) {
        long q = std::lround(w.samples[i] * 32768.0);
        if (q > 32767) q = 32767;
        if (q < -32768) q = -32768;
        const int16_t s = static_cast<int16_t>(q);
        const char b[2] = {static_cast<char>(s & 0xff), static_cast<char>((s >> 8) & 0xff)};
        out.write(b, 2);
    }
    if (!out) throw std::runtime_error("save_wav: write failed: " + path);
}

}  // namespace votetok
