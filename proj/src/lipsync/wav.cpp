#include "eca/lipsync.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace eca::lipsync {

namespace {

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

constexpr std::uint16_t format_pcm = 1;
constexpr std::uint16_t format_float = 3;
constexpr std::uint16_t format_extensible = 0xFFFE;

}  // namespace

std::vector<double> decode_pcm(std::span<const std::uint8_t> bytes, SampleFormat format) {
    std::vector<double> out;
    if (format == SampleFormat::pcm16) {
        if (bytes.size() % 2 != 0)
            throw LipsyncError("pcm16 payload has an odd number of bytes");
        out.reserve(bytes.size() / 2);
        for (std::size_t i = 0; i < bytes.size(); i += 2)
            out.push_back(static_cast<std::int16_t>(le16(&bytes[i])) / 32768.0);
    } else {
        if (bytes.size() % 4 != 0)
            throw LipsyncError("float32 payload size is not a multiple of 4");
        out.reserve(bytes.size() / 4);
        for (std::size_t i = 0; i < bytes.size(); i += 4)
            out.push_back(static_cast<double>(std::bit_cast<float>(le32(&bytes[i]))));
    }
    return out;
}

WavData parse_wav(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw LipsyncError("not a RIFF/WAVE file");

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    std::span<const std::uint8_t> data;
    bool have_data = false;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* hdr = bytes.data() + pos;
        const std::uint32_t size = le32(hdr + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (avail < 16)
                throw LipsyncError("truncated fmt chunk");
            const std::uint8_t* f = bytes.data() + body;
            format = le16(f);
            channels = le16(f + 2);
            rate = le32(f + 4);
            bits = le16(f + 14);
            if (format == format_extensible) {
                if (avail < 26)
                    throw LipsyncError("truncated extensible fmt chunk");
                format = le16(f + 24);  // first two bytes of the sub-format GUID
            }
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = bytes.subspan(body, avail);
            have_data = true;
        }
        pos = body + size + (size & 1);
    }
    if (!have_fmt || !have_data)
        throw LipsyncError("WAVE file lacks fmt or data chunk");
    if (channels == 0)
        throw LipsyncError("WAVE file declares zero channels");

    SampleFormat sf;
    if (format == format_pcm && bits == 16)
        sf = SampleFormat::pcm16;
    else if (format == format_float && bits == 32)
        sf = SampleFormat::float32;
    else
        throw LipsyncError("unsupported WAVE encoding (format " + std::to_string(format) + ", " +
                           std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");

    const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
    const auto interleaved = decode_pcm(data.first(data.size() - data.size() % frame_bytes), sf);

    WavData wav;
    wav.sample_rate_hz = rate;
    wav.samples.resize(interleaved.size() / channels);
    for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        double acc = 0;
        for (std::size_t c = 0; c < channels; ++c)
            acc += interleaved[i * channels + c];
        wav.samples[i] = acc / channels;
    }
    return wav;
}

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LipsyncError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_wav(bytes);
    } catch (const LipsyncError& e) {
        throw LipsyncError(path + ": " + e.what());
    }
}

void write_wav(const std::string& path, std::span<const double> samples, std::uint32_t sample_rate_hz,
               SampleFormat format) {
    const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * (bits / 8));

    std::vector<std::uint8_t> out;
    put_tag(out, "RIFF");
    put32(out, 36 + data_size);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put32(out, 16);
    put16(out, format == SampleFormat::pcm16 ? format_pcm : format_float);
    put16(out, 1);
    put32(out, sample_rate_hz);
    put32(out, sample_rate_hz * (bits / 8));
    put16(out, static_cast<std::uint16_t>(bits / 8));
    put16(out, bits);
    put_tag(out, "data");
    put32(out, data_size);
    for (double s : samples) {
        const double x = std::clamp(s, -1.0, 1.0);
        if (format == SampleFormat::pcm16)
            put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(x * 32767.0))));
        else
            put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw LipsyncError("cannot write '" + path + "'");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace eca::lipsync
