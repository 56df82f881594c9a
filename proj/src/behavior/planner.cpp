#include "eca/behavior.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <stdexcept>

namespace eca::behavior {

namespace {

// Uniform in [-half_width, half_width) from mt19937_64.
class Jitter {
public:
    explicit Jitter(std::uint64_t seed) : gen_(seed) {}

    double operator()(double half_width) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return (2 * u - 1) * half_width;
    }

private:
    std::mt19937_64 gen_;
};

bool overlaps(double a0, double a1, double b0, double b1) { return a0 < b1 && b0 < a1; }

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '\'' || c >= 0x80; }

void sort_events(BehaviorSchedule& schedule) {
    std::stable_sort(schedule.events.begin(), schedule.events.end(),
                     [](const BehaviorEvent& a, const BehaviorEvent& b) { return a.start_ms < b.start_ms; });
}

}  // namespace

std::string_view to_string(BehaviorKind kind) {
    switch (kind) {
    case BehaviorKind::head_nod: return "head_nod";
    case BehaviorKind::head_shake: return "head_shake";
    case BehaviorKind::gaze: return "gaze";
    }
    return "head_nod";
}

std::optional<BehaviorKind> behavior_kind_from_string(std::string_view name) {
    if (name == "head_nod")
        return BehaviorKind::head_nod;
    if (name == "head_shake")
        return BehaviorKind::head_shake;
    if (name == "gaze")
        return BehaviorKind::gaze;
    return std::nullopt;
}

std::vector<std::string> speech_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        std::string_view raw = text.substr(i, j - i);
        std::size_t b = 0;
        std::size_t e = raw.size();
        while (b < e && !is_word_char(static_cast<unsigned char>(raw[b])))
            ++b;
        while (e > b && !is_word_char(static_cast<unsigned char>(raw[e - 1])))
            --e;
        // quotes such as 'no' leave apostrophes at the edges
        while (b < e && raw[b] == '\'')
            ++b;
        while (e > b && raw[e - 1] == '\'')
            --e;
        if (b < e)
            words.emplace_back(raw.substr(b, e - b));
        i = j;
    }
    return words;
}

bool is_negation(std::string_view word) {
    std::string w(word);
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (w == "no" || w == "not")
        return true;
    return w.size() >= 3 && w.compare(w.size() - 3, 3, "n't") == 0;
}

std::vector<WordTiming> estimate_word_timings(std::string_view text, double unit_ms) {
    if (!(unit_ms > 0))
        throw std::invalid_argument("unit_ms must be positive");
    std::vector<WordTiming> out;
    std::size_t units = 0;
    for (auto& w : speech_words(text)) {
        const std::size_t n = utf8_length(w) + 1;
        WordTiming t;
        t.start_ms = static_cast<double>(units) * unit_ms;
        units += n;
        t.end_ms = static_cast<double>(units) * unit_ms;
        t.index = out.size();
        t.word = std::move(w);
        out.push_back(std::move(t));
    }
    return out;
}

double total_duration(const std::vector<WordTiming>& timings) {
    return timings.empty() ? 0.0 : timings.back().end_ms;
}

BehaviorSchedule plan_speaking(std::string_view text, const std::vector<WordTiming>& timings,
                               std::uint64_t seed, const PlannerConfig& config) {
    const auto words = speech_words(text);
    if (words.size() != timings.size())
        throw std::invalid_argument("word timings do not cover the reply text");

    BehaviorSchedule schedule;
    schedule.total_ms = total_duration(timings);
    if (timings.empty())
        return schedule;
    const double total = schedule.total_ms;

    std::vector<BehaviorEvent> shakes;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!is_negation(words[i]))
            continue;
        BehaviorEvent e;
        e.kind = BehaviorKind::head_shake;
        e.start_ms = std::max(0.0, timings[i].start_ms - config.shake_pad_ms);
        e.end_ms = std::min(total, timings[i].end_ms + config.shake_pad_ms);
        e.amplitude = config.shake_amplitude;
        shakes.push_back(e);
    }

    auto add_nod = [&](double start, double end, double amplitude) {
        if (!(end > start))
            return;
        for (const auto& s : shakes) {
            if (overlaps(start, end, s.start_ms, s.end_ms))
                return;
        }
        schedule.events.push_back({BehaviorKind::head_nod, start, end, amplitude, std::nullopt});
    };

    add_nod(0.0, std::min(config.initial_nod_ms, total), config.initial_nod_amplitude);

    Jitter jitter(seed);
    for (int k = 1;; ++k) {
        const double start = k * config.speaking_nod_period_ms + jitter(config.speaking_nod_jitter_ms);
        if (start >= total)
            break;
        add_nod(start, std::min(start + config.nod_duration_ms, total), config.speaking_nod_amplitude);
    }

    schedule.events.insert(schedule.events.end(), shakes.begin(), shakes.end());
    sort_events(schedule);
    return schedule;
}

BehaviorSchedule plan_listening(double duration_ms, std::uint64_t seed, const PlannerConfig& config) {
    if (duration_ms < 0)
        throw std::invalid_argument("duration_ms must be >= 0");
    BehaviorSchedule schedule;
    schedule.total_ms = duration_ms;
    Jitter jitter(seed);
    for (int k = 1;; ++k) {
        const double start = k * config.listening_nod_period_ms + jitter(config.listening_nod_jitter_ms);
        if (start >= duration_ms)
            break;
        const double end = std::min(start + config.nod_duration_ms, duration_ms);
        if (end > start)
            schedule.events.push_back(
                {BehaviorKind::head_nod, start, end, config.listening_nod_amplitude, std::nullopt});
    }
    return schedule;
}

GazeAngles face_to_gaze(const FaceObservation& obs, const CameraParams& cam) {
    const double cx = std::clamp(obs.cx, 0.0, 1.0);
    const double cy = std::clamp(obs.cy, 0.0, 1.0);
    return {std::atan((2 * cx - 1) * std::tan(cam.h_fov_rad / 2)),
            std::atan((1 - 2 * cy) * std::tan(cam.v_fov_rad / 2))};
}

GazeState smooth_gaze(const GazeState& state, const GazeAngles& target) {
    GazeState next = state;
    const double gain = 1 - state.alpha;
    next.yaw_rad += gain * (target.yaw_rad - state.yaw_rad);
    next.pitch_rad += gain * (target.pitch_rad - state.pitch_rad);
    return next;
}

}  // namespace eca::behavior
