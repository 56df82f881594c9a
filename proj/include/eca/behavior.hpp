#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eca::behavior {

struct WordTiming {
    std::string word;
    double start_ms = 0;
    double end_ms = 0;
    std::size_t index = 0;

    friend bool operator==(const WordTiming&, const WordTiming&) = default;
};

enum class BehaviorKind { head_nod, head_shake, gaze };

std::string_view to_string(BehaviorKind kind);
std::optional<BehaviorKind> behavior_kind_from_string(std::string_view name);

struct GazeAngles {
    double yaw_rad = 0;
    double pitch_rad = 0;

    friend bool operator==(const GazeAngles&, const GazeAngles&) = default;
};

struct BehaviorEvent {
    BehaviorKind kind = BehaviorKind::head_nod;
    double start_ms = 0;
    double end_ms = 0;
    double amplitude = 0;
    std::optional<GazeAngles> gaze_target;  // present iff kind == gaze

    friend bool operator==(const BehaviorEvent&, const BehaviorEvent&) = default;
};

struct BehaviorSchedule {
    std::vector<BehaviorEvent> events;  // sorted by start_ms
    double total_ms = 0;

    friend bool operator==(const BehaviorSchedule&, const BehaviorSchedule&) = default;
};

/// Planner constants. None of these come from measurements; they are the
/// tunable defaults.
struct PlannerConfig {
    double unit_ms = 55;

    double shake_pad_ms = 120;
    double shake_amplitude = 0.6;

    double initial_nod_ms = 300;
    double initial_nod_amplitude = 0.2;
    double speaking_nod_period_ms = 2000;
    double speaking_nod_jitter_ms = 500;
    double speaking_nod_amplitude = 0.15;

    double listening_nod_period_ms = 1500;
    double listening_nod_jitter_ms = 300;
    double listening_nod_amplitude = 0.12;

    double nod_duration_ms = 400;
};

/// Splits reply text into spoken words: whitespace separated, surrounding
/// punctuation stripped, apostrophes kept.
std::vector<std::string> speech_words(std::string_view text);

/// True for "no", "not" and any token ending in "n't" (case-insensitive).
bool is_negation(std::string_view word);

/// Each word gets (length + 1) units, laid out back to back from 0.
std::vector<WordTiming> estimate_word_timings(std::string_view text, double unit_ms = 55);

double total_duration(const std::vector<WordTiming>& timings);

BehaviorSchedule plan_speaking(std::string_view text, const std::vector<WordTiming>& timings,
                               std::uint64_t seed, const PlannerConfig& config = {});

BehaviorSchedule plan_listening(double duration_ms, std::uint64_t seed, const PlannerConfig& config = {});

struct FaceObservation {
    double cx = 0.5;
    double cy = 0.5;
    double w = 0.2;
};

struct CameraParams {
    double h_fov_rad = 1.0471975511965976;  // 60 degrees
    double v_fov_rad = 0.8203047484373349;  // 47 degrees
};

/// Pinhole mapping from a normalized face position to avatar gaze angles.
/// Positive yaw turns toward the right half of the image, positive pitch up.
GazeAngles face_to_gaze(const FaceObservation& obs, const CameraParams& cam = {});

struct GazeState {
    double yaw_rad = 0;
    double pitch_rad = 0;
    double alpha = 0.8;
};

GazeState smooth_gaze(const GazeState& state, const GazeAngles& target);

}  // namespace eca::behavior
