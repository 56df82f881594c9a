#include "eca/lipsync.hpp"

#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace eca::lipsync {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// FFTW planning is not thread-safe; plans are created once per size under a lock
/// and executed on caller-owned unaligned buffers.
fftw_plan r2c_plan(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, fftw_plan> plans;
    std::lock_guard lock(mutex);
    auto& plan = plans[n];
    if (!plan) {
        std::vector<double> in(n);
        std::vector<std::complex<double>> out(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan)
            throw LipsyncError("cannot plan a transform of size " + std::to_string(n));
    }
    return plan;
}

void check_config(const LipsyncConfig& c) {
    if (!is_power_of_two(c.frame_size))
        throw LipsyncError("frame_size must be a power of two");
    if (c.hop == 0 || c.hop > c.frame_size)
        throw LipsyncError("hop must be in [1, frame_size]");
    if (!(c.smoothing >= 0 && c.smoothing < 1))
        throw LipsyncError("smoothing must be in [0,1)");
    if (!(c.db_ceiling > c.db_floor))
        throw LipsyncError("db_ceiling must exceed db_floor");
    if (!(c.full_scale_magnitude > 0))
        throw LipsyncError("full_scale_magnitude must be positive");
    if (c.sample_rate_hz < c.min_sample_rate_hz)
        throw LipsyncError("sample rate below " + std::to_string(c.min_sample_rate_hz) + " Hz");
    for (const auto& b : c.bands) {
        if (!(b.high_hz > b.low_hz) || b.low_hz < 0)
            throw LipsyncError("invalid band edges");
    }
}

}  // namespace

LipsyncConfig parse_lipsync_config(std::string_view document) try {
    const auto doc = nlohmann::json::parse(document);
    LipsyncConfig c;
    c.frame_size = doc.value("frame_size", c.frame_size);
    c.hop = doc.value("hop", c.hop);
    c.sample_rate_hz = doc.value("sample_rate_hz", c.sample_rate_hz);
    c.min_sample_rate_hz = doc.value("min_sample_rate_hz", c.min_sample_rate_hz);
    c.smoothing = doc.value("smoothing", c.smoothing);
    c.db_floor = doc.value("db_floor", c.db_floor);
    c.db_ceiling = doc.value("db_ceiling", c.db_ceiling);
    c.silence_gate_db = doc.value("silence_gate_db", c.silence_gate_db);
    c.full_scale_magnitude = doc.value("full_scale_magnitude", c.full_scale_magnitude);
    if (auto it = doc.find("bands"); it != doc.end()) {
        if (!it->is_array() || it->size() != c.bands.size())
            throw LipsyncError("bands: expected 4 [low, high] pairs");
        for (std::size_t i = 0; i < c.bands.size(); ++i)
            c.bands[i] = {(*it)[i].at(0).get<double>(), (*it)[i].at(1).get<double>()};
    }
    check_config(c);
    return c;
} catch (const nlohmann::json::exception& e) {
    throw LipsyncError(std::string("lipsync config: ") + e.what());
}

LipsyncConfig load_lipsync_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw LipsyncError("cannot open lipsync config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_lipsync_config(buf.str());
}

std::vector<double> spectrum(std::span<const double> frame, const LipsyncConfig& config) {
    const std::size_t n = config.frame_size;
    if (frame.size() != n)
        throw LipsyncError("frame has " + std::to_string(frame.size()) + " samples, expected " + std::to_string(n));

    std::vector<double> in(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = 0.5 * (1 - std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
        in[i] = frame[i] * w;
    }
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(r2c_plan(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()));

    std::vector<double> mag(out.size());
    for (std::size_t k = 0; k < mag.size(); ++k)
        mag[k] = std::abs(out[k]) / static_cast<double>(n);
    return mag;
}

double magnitude_to_dbfs(double magnitude, const LipsyncConfig& config) {
    if (magnitude <= 0)
        return -std::numeric_limits<double>::infinity();
    return 20 * std::log10(magnitude / config.full_scale_magnitude);
}

double dbfs_to_magnitude(double dbfs, const LipsyncConfig& config) {
    return config.full_scale_magnitude * std::pow(10.0, dbfs / 20);
}

BandEnergies band_energies(std::span<const double> magnitudes, double sample_rate_hz, const LipsyncConfig& config) {
    if (magnitudes.size() < 2)
        throw LipsyncError("spectrum too short");
    const double frame_size = 2.0 * static_cast<double>(magnitudes.size() - 1);
    const double bin_hz = sample_rate_hz / frame_size;

    std::array<double, 4> db{};
    for (std::size_t b = 0; b < config.bands.size(); ++b) {
        const auto& band = config.bands[b];
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < magnitudes.size(); ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            if (f >= band.low_hz && f < band.high_hz) {
                sum += magnitudes[k];
                ++count;
            }
        }
        if (count == 0)
            throw LipsyncError("band [" + std::to_string(band.low_hz) + ", " + std::to_string(band.high_hz) +
                               ") Hz has no spectrum bins");
        db[b] = magnitude_to_dbfs(sum / static_cast<double>(count), config);
    }

    BandEnergies out;
    if (std::all_of(db.begin(), db.end(), [&](double d) { return d < config.silence_gate_db; }))
        return out;
    for (std::size_t b = 0; b < db.size(); ++b)
        out.e[b] = clamp01((db[b] - config.db_floor) / (config.db_ceiling - config.db_floor));
    return out;
}

VisemeWeights energies_to_visemes(const BandEnergies& energies) {
    const auto& e = energies.e;
    const double voiced = e[1] < 0.2 ? e[1] * 5 : 1.0;
    VisemeWeights v;
    v.kiss = clamp01((0.5 - e[2]) * 2 * voiced);
    v.lipsPressed = clamp01(3 * e[3]);
    v.mouthOpen = clamp01(0.8 * (e[1] - e[3]));
    return v;
}

StreamState::StreamState(LipsyncConfig config) : config_(config) { check_config(config_); }

BandEnergies StreamState::smooth(const BandEnergies& e, double alpha) {
    if (!(alpha >= 0 && alpha < 1))
        throw LipsyncError("smoothing alpha must be in [0,1)");
    for (std::size_t i = 0; i < e.e.size(); ++i)
        previous_.e[i] = alpha * previous_.e[i] + (1 - alpha) * e.e[i];
    return previous_;
}

std::vector<TimedVisemes> StreamState::process(std::span<const double> samples, double sample_rate_hz) {
    if (sample_rate_hz < config_.min_sample_rate_hz)
        throw LipsyncError("sample rate " + std::to_string(sample_rate_hz) + " Hz is below the minimum of " +
                           std::to_string(config_.min_sample_rate_hz) + " Hz");
    if (std::abs(sample_rate_hz - config_.sample_rate_hz) > 1e-9)
        throw LipsyncError("sample-rate mismatch: stream is " + std::to_string(config_.sample_rate_hz) +
                           " Hz, got " + std::to_string(sample_rate_hz) + " Hz");

    buffer_.insert(buffer_.end(), samples.begin(), samples.end());
    std::vector<TimedVisemes> out;
    const std::size_t n = config_.frame_size;
    std::size_t offset = 0;
    while (buffer_.size() - offset >= n) {
        const auto mags = spectrum(std::span<const double>(buffer_).subspan(offset, n), config_);
        const auto energies = smooth(band_energies(mags, config_.sample_rate_hz, config_));
        const double center = static_cast<double>(frames_ * config_.hop) + static_cast<double>(n) / 2;
        out.push_back({center * 1000.0 / config_.sample_rate_hz, energies_to_visemes(energies)});
        ++frames_;
        offset += config_.hop;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset));
    return out;
}

std::size_t expected_emissions(std::size_t n_samples, const LipsyncConfig& config) {
    if (n_samples < config.frame_size)
        return 0;
    return (n_samples - config.frame_size) / config.hop + 1;
}

std::vector<TimedVisemes> process_buffer(std::span<const double> samples, double sample_rate_hz,
                                         const LipsyncConfig& config) {
    LipsyncConfig c = config;
    c.sample_rate_hz = sample_rate_hz;
    if (sample_rate_hz < c.min_sample_rate_hz)
        throw LipsyncError("sample rate " + std::to_string(sample_rate_hz) + " Hz is below the minimum of " +
                           std::to_string(c.min_sample_rate_hz) + " Hz");
    StreamState state(c);
    return state.process(samples, sample_rate_hz);
}

std::string to_csv(const std::vector<TimedVisemes>& rows) {
    std::string out = "t_ms,kiss,lipsPressed,mouthOpen\n";
    char line[128];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f\n", r.t_ms, r.weights.kiss, r.weights.lipsPressed,
                      r.weights.mouthOpen);
        out += line;
    }
    return out;
}

}  // namespace eca::lipsync
