#pragma once

#include "eca/behavior.hpp"
#include "eca/eliza.hpp"
#include "eca/expression.hpp"
#include "eca/metrics.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eca::session {

enum class Phase { idle, listening, thinking, speaking };

std::string_view to_string(Phase phase);

namespace event {
struct SessionStart {};
struct ListenStart {};
struct InterimTranscript { std::string text; };
struct FinalTranscript { std::string text; };
struct TtsStart { double t_ms = 0; };
struct TtsWord { std::optional<std::size_t> word_index; double t_ms = 0; };
struct TtsEnd { double t_ms = 0; };
struct FaceUpdate { behavior::FaceObservation face; };
struct SessionQuit {};
}  // namespace event

using Event = std::variant<event::SessionStart, event::ListenStart, event::InterimTranscript,
                           event::FinalTranscript, event::TtsStart, event::TtsWord, event::TtsEnd,
                           event::FaceUpdate, event::SessionQuit>;

std::string_view event_name(const Event& e);

struct AgentTurn {
    std::uint64_t turn_id = 0;
    eliza::Reply reply;
    behavior::BehaviorSchedule schedule;
    expression::BlendShapeVector expression;
    std::vector<behavior::WordTiming> timings;
    TurnRecord record;
};

namespace emission {
struct Greeting { std::string text; };
struct AgentReply { AgentTurn turn; };
struct Gaze { double yaw = 0; double pitch = 0; };
struct SessionEnd { std::string text; };
}  // namespace emission

using Emission = std::variant<emission::Greeting, emission::AgentReply, emission::Gaze, emission::SessionEnd>;

struct EventError {
    enum class Code { illegal_transition, engine_error };
    Code code = Code::illegal_transition;
    std::string detail;
};

struct EventResult {
    Phase phase = Phase::idle;
    std::vector<Emission> emissions;
    std::optional<EventError> error;
};

struct SessionConfig {
    std::uint64_t seed = 0;
    expression::ValenceArousal va{0.3, 0.1};
    std::shared_ptr<const expression::PresetTable> presets;  // null: built-in defaults
    behavior::PlannerConfig planner;
    behavior::CameraParams camera;
    double gaze_alpha = 0.8;
};

/// One conversation: phase machine plus the turn pipeline. Not thread-safe;
/// callers serialize events per session.
class Session {
public:
    Session(std::shared_ptr<const eliza::ElizaScript> script, SessionConfig config = {},
            std::shared_ptr<MetricsSink> sink = nullptr);

    EventResult handle(const Event& event);

    /// Runs one full server-side turn. Requires phase() == thinking.
    AgentTurn run_turn(std::string_view text);

    Phase phase() const noexcept { return phase_; }
    void set_phase(Phase phase) noexcept { phase_ = phase; }

    const eliza::Engine& engine() const noexcept { return engine_; }
    const behavior::GazeState& gaze() const noexcept { return gaze_; }
    const SessionConfig& config() const noexcept { return config_; }
    std::uint64_t turn_counter() const noexcept { return turn_counter_; }
    const std::vector<TurnRecord>& records() const noexcept { return records_; }

    void record_client_metrics(std::optional<double> stt_ms, std::optional<double> tts_ms);

private:
    EventResult reject(const Event& event);

    eliza::Engine engine_;
    SessionConfig config_;
    std::shared_ptr<MetricsSink> sink_;
    Phase phase_ = Phase::idle;
    behavior::GazeState gaze_;
    std::uint64_t turn_counter_ = 0;
    std::vector<TurnRecord> records_;
};

struct BenchResult {
    MetricsSummary summary;
    std::vector<TurnRecord> records;
    std::vector<std::string> replies;
    double wall_ms = 0;
};

/// Runs n_turns turns on a fresh session, cycling through the corpus.
BenchResult bench(std::size_t n_turns, const std::vector<std::string>& corpus,
                  std::shared_ptr<const eliza::ElizaScript> script, std::uint64_t seed = 0);

std::string format_bench_table(const BenchResult& result);

std::vector<std::string> load_corpus(const std::string& path);

}  // namespace eca::session
