#include "ripple/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ripple/errors.hpp"

namespace ripple::wav {

namespace {

constexpr int kSampleRate = 16000;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0]) | (static_cast<std::uint16_t>(p[1]) << 8);
}
void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 24) & 0xff);
}
void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}

}  // namespace

dsp::Waveform read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError("wav: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataFormatError("wav: not a RIFF/WAVE file: " + path.string());

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) throw DataFormatError("wav: truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw DataFormatError("wav: fmt chunk too small");
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = len;
        }
        pos = body + len + (len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr) throw DataFormatError("wav: missing fmt or data chunk");
    if (format != 1) throw DataFormatError("wav: only uncompressed PCM is supported");
    if (channels != 1) throw DataFormatError("wav: only mono is supported");
    if (bits != 16) throw DataFormatError("wav: only 16-bit samples are supported");
    if (rate != kSampleRate)
        throw DataFormatError("wav: only 16000 Hz is supported, got " + std::to_string(rate));

    dsp::Waveform w;
    w.sample_rate = kSampleRate;
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const std::int16_t s = static_cast<std::int16_t>(read_u16(data + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32767.0;
    }
    return w;
}

void write(const std::filesystem::path& path, const dsp::Waveform& w) {
    if (w.sample_rate != kSampleRate)
        throw DataFormatError("wav: only 16000 Hz is supported for writing");

    const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    std::vector<unsigned char> b;
    b.reserve(44 + data_len);
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    put_u32(b, 36 + data_len);
    b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put_u32(b, 16);
    put_u16(b, 1);                    // PCM
    put_u16(b, 1);                    // mono
    put_u32(b, kSampleRate);
    put_u32(b, kSampleRate * 2);      // byte rate
    put_u16(b, 2);                    // block align
    put_u16(b, 16);                   // bits
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    put_u32(b, data_len);
    for (double v : w.samples) {
        const double c = std::clamp(v, -1.0, 1.0);
        const std::int16_t s = static_cast<std::int16_t>(std::lround(c * 32767.0));
        put_u16(b, static_cast<std::uint16_t>(s));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataFormatError("wav: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!out) throw DataFormatError("wav: write failed for " + path.string());
}

}  // namespace ripple::wav
