#include "wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace nca {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

std::uint16_t rd_u16(const unsigned char* p) {
    return std::uint16_t(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

void wr_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Utterance read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw DataError("read_wav: not a RIFF/WAVE file: " + path);
    }

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        std::uint32_t chunk_len = rd_u32(chunk + 4);
        if (pos + 8 + chunk_len > bytes.size()) throw DataError("read_wav: truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw DataError("read_wav: malformed fmt chunk");
            format = rd_u16(chunk + 8);
            channels = rd_u16(chunk + 10);
            rate = rd_u32(chunk + 12);
            bits = rd_u16(chunk + 22);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!data || rate == 0) throw DataError("read_wav: missing fmt or data chunk");
    if (channels != 1) throw DataError("read_wav: only mono supported");

    Utterance utt;
    utt.sample_rate = static_cast<int>(rate);
    if (format == 1 && bits == 16) {
        utt.samples.resize(data_len / 2);
        for (std::size_t i = 0; i < utt.samples.size(); ++i) {
            std::int16_t s = static_cast<std::int16_t>(rd_u16(data + 2 * i));
            utt.samples[i] = static_cast<real>(s) / real(32768);
        }
    } else if (format == 3 && bits == 32) {
        utt.samples.resize(data_len / 4);
        for (std::size_t i = 0; i < utt.samples.size(); ++i) {
            std::uint32_t u = rd_u32(data + 4 * i);
            float f;
            std::memcpy(&f, &u, 4);
            utt.samples[i] = static_cast<real>(f);
        }
    } else {
        throw DataError("read_wav: unsupported encoding (need PCM16 or float32)");
    }
    return utt;
}

void write_wav(const Utterance& utt, const std::string& path, WavEncoding encoding) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_wav: cannot open " + path);
    const std::size_t n = utt.samples.size();
    const std::uint16_t bytes_per = encoding == WavEncoding::Pcm16 ? 2 : 4;
    const std::uint32_t data_len = static_cast<std::uint32_t>(n * bytes_per);

    os.write("RIFF", 4);
    wr_u32(os, 36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    wr_u32(os, 16);
    wr_u16(os, encoding == WavEncoding::Pcm16 ? 1 : 3);
    wr_u16(os, 1);  // mono
    wr_u32(os, static_cast<std::uint32_t>(utt.sample_rate));
    wr_u32(os, static_cast<std::uint32_t>(utt.sample_rate) * bytes_per);
    wr_u16(os, bytes_per);
    wr_u16(os, bytes_per * 8);
    os.write("data", 4);
    wr_u32(os, data_len);

    if (encoding == WavEncoding::Pcm16) {
        for (real v : utt.samples) {
            real clamped = v < real(-1) ? real(-1) : (v > real(32767.0 / 32768.0)
                                                          ? real(32767.0 / 32768.0)
                                                          : v);
            auto s = static_cast<std::int16_t>(std::lround(clamped * real(32768)));
            wr_u16(os, static_cast<std::uint16_t>(s));
        }
    } else {
        for (real v : utt.samples) {
            float f = static_cast<float>(v);
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            wr_u32(os, u);
        }
    }
    if (!os) throw DataError("write_wav: write failed: " + path);
}

}  // namespace nca
