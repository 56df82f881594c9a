#pragma once

#include "eca/expression.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eca::lipsync {

using expression::VisemeWeights;

class LipsyncError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Band {
    double low_hz;
    double high_hz;
};

struct LipsyncConfig {
    std::size_t frame_size = 1024;
    std::size_t hop = 512;
    double sample_rate_hz = 44100;
    double min_sample_rate_hz = 16000;
    std::array<Band, 4> bands{{{0, 500}, {500, 700}, {700, 3000}, {3000, 6000}}};
    double smoothing = 0.6;
    double db_floor = -60;
    double db_ceiling = -10;
    double silence_gate_db = -60;
    // Spectrum magnitude of a full-scale sine centred on a bin after the Hann
    // window and 1/N normalisation; this is the 0 dBFS reference.
    double full_scale_magnitude = 0.25;
};

LipsyncConfig parse_lipsync_config(std::string_view document);
LipsyncConfig load_lipsync_config(const std::string& path);

struct BandEnergies {
    std::array<double, 4> e{};

    friend bool operator==(const BandEnergies&, const BandEnergies&) = default;
};

/// Hann-windowed DFT magnitudes divided by the frame size; frame_size/2 + 1 bins.
std::vector<double> spectrum(std::span<const double> frame, const LipsyncConfig& config = {});

/// 20*log10(magnitude / full_scale_magnitude); -inf for zero.
double magnitude_to_dbfs(double magnitude, const LipsyncConfig& config = {});
double dbfs_to_magnitude(double dbfs, const LipsyncConfig& config = {});

BandEnergies band_energies(std::span<const double> magnitudes, double sample_rate_hz,
                           const LipsyncConfig& config = {});

VisemeWeights energies_to_visemes(const BandEnergies& e);

struct TimedVisemes {
    double t_ms = 0;
    VisemeWeights weights;

    friend bool operator==(const TimedVisemes&, const TimedVisemes&) = default;
};

/// Per-stream state: smoothed energies and samples waiting for a full frame.
class StreamState {
public:
    explicit StreamState(LipsyncConfig config = {});

    const LipsyncConfig& config() const noexcept { return config_; }
    const BandEnergies& previous() const noexcept { return previous_; }
    std::uint64_t frames_emitted() const noexcept { return frames_; }

    /// alpha * previous + (1 - alpha) * e, stored as the new previous.
    BandEnergies smooth(const BandEnergies& e, double alpha);
    BandEnergies smooth(const BandEnergies& e) { return smooth(e, config_.smoothing); }

    std::vector<TimedVisemes> process(std::span<const double> samples, double sample_rate_hz);
    std::vector<TimedVisemes> process(std::span<const double> samples) {
        return process(samples, config_.sample_rate_hz);
    }

private:
    LipsyncConfig config_;
    BandEnergies previous_;
    std::vector<double> buffer_;
    std::uint64_t frames_ = 0;
};

/// Number of records process() emits for a single buffer of n samples.
std::size_t expected_emissions(std::size_t n_samples, const LipsyncConfig& config = {});

/// Runs a whole buffer through a fresh stream.
std::vector<TimedVisemes> process_buffer(std::span<const double> samples, double sample_rate_hz,
                                         const LipsyncConfig& config = {});

/// `t_ms,kiss,lipsPressed,mouthOpen` with a header row and 6 decimals.
std::string to_csv(const std::vector<TimedVisemes>& rows);

// PCM decoding shared by the WAV reader and the HTTP endpoint.
enum class SampleFormat { pcm16, float32 };
std::vector<double> decode_pcm(std::span<const std::uint8_t> bytes, SampleFormat format);

struct WavData {
    double sample_rate_hz = 0;
    std::vector<double> samples;  // mono, downmixed
};

WavData read_wav(const std::string& path);
WavData parse_wav(std::span<const std::uint8_t> bytes);
void write_wav(const std::string& path, std::span<const double> samples, std::uint32_t sample_rate_hz,
               SampleFormat format = SampleFormat::pcm16);

}  // namespace eca::lipsync
