#include "eca/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace eca::session {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
    case Phase::idle: return "idle";
    case Phase::listening: return "listening";
    case Phase::thinking: return "thinking";
    case Phase::speaking: return "speaking";
    }
    return "idle";
}

std::string_view event_name(const Event& e) {
    return std::visit(overloaded{
                          [](const event::SessionStart&) { return std::string_view("session_start"); },
                          [](const event::ListenStart&) { return std::string_view("listen_start"); },
                          [](const event::InterimTranscript&) { return std::string_view("interim_transcript"); },
                          [](const event::FinalTranscript&) { return std::string_view("final_transcript"); },
                          [](const event::TtsStart&) { return std::string_view("tts_start"); },
                          [](const event::TtsWord&) { return std::string_view("tts_word"); },
                          [](const event::TtsEnd&) { return std::string_view("tts_end"); },
                          [](const event::FaceUpdate&) { return std::string_view("face_update"); },
                          [](const event::SessionQuit&) { return std::string_view("session_quit"); },
                      },
                      e);
}

Session::Session(std::shared_ptr<const eliza::ElizaScript> script, SessionConfig config,
                 std::shared_ptr<MetricsSink> sink)
    : engine_(std::move(script), config.seed), config_(std::move(config)), sink_(std::move(sink)) {
    if (!config_.presets)
        config_.presets = std::make_shared<const expression::PresetTable>(expression::default_presets());
    gaze_.alpha = config_.gaze_alpha;
}

EventResult Session::reject(const Event& event) {
    EventResult r;
    r.phase = phase_;
    r.error = EventError{EventError::Code::illegal_transition,
                         std::string(event_name(event)) + " is not allowed while " + std::string(to_string(phase_))};
    return r;
}

EventResult Session::handle(const Event& ev) {
    return std::visit(
        overloaded{
            [&](const event::SessionStart&) -> EventResult {
                if (phase_ != Phase::idle)
                    return reject(ev);
                engine_.reset();
                gaze_ = behavior::GazeState{0, 0, config_.gaze_alpha};
                return {phase_, {emission::Greeting{engine_.greeting()}}, std::nullopt};
            },
            [&](const event::ListenStart&) -> EventResult {
                if (phase_ != Phase::idle && phase_ != Phase::listening)
                    return reject(ev);
                phase_ = Phase::listening;
                return {phase_, {}, std::nullopt};
            },
            [&](const event::InterimTranscript&) -> EventResult {
                if (phase_ != Phase::listening)
                    return reject(ev);
                return {phase_, {}, std::nullopt};
            },
            [&](const event::FinalTranscript& e) -> EventResult {
                if (phase_ != Phase::listening)
                    return reject(ev);
                phase_ = Phase::thinking;
                AgentTurn turn;
                try {
                    turn = run_turn(e.text);
                } catch (const eliza::EngineError& err) {
                    phase_ = Phase::listening;
                    return {phase_, {}, EventError{EventError::Code::engine_error, err.what()}};
                }
                EventResult r;
                const bool ended = turn.reply.session_end;
                const std::string final_text = turn.reply.text;
                r.emissions.emplace_back(emission::AgentReply{std::move(turn)});
                if (ended) {
                    phase_ = Phase::idle;
                    r.emissions.emplace_back(emission::SessionEnd{final_text});
                } else {
                    phase_ = Phase::speaking;
                }
                r.phase = phase_;
                return r;
            },
            [&](const event::TtsStart&) -> EventResult {
                if (phase_ != Phase::speaking)
                    return reject(ev);
                return {phase_, {}, std::nullopt};
            },
            [&](const event::TtsWord&) -> EventResult {
                if (phase_ != Phase::speaking)
                    return reject(ev);
                return {phase_, {}, std::nullopt};
            },
            [&](const event::TtsEnd&) -> EventResult {
                if (phase_ != Phase::speaking)
                    return reject(ev);
                phase_ = Phase::listening;
                return {phase_, {}, std::nullopt};
            },
            [&](const event::FaceUpdate& e) -> EventResult {
                gaze_ = behavior::smooth_gaze(gaze_, behavior::face_to_gaze(e.face, config_.camera));
                return {phase_, {emission::Gaze{gaze_.yaw_rad, gaze_.pitch_rad}}, std::nullopt};
            },
            [&](const event::SessionQuit&) -> EventResult {
                phase_ = Phase::idle;
                return {phase_, {emission::SessionEnd{engine_.script().final_message}}, std::nullopt};
            },
        },
        ev);
}

AgentTurn Session::run_turn(std::string_view text) {
    if (phase_ != Phase::thinking)
        throw std::logic_error("run_turn requires the thinking phase");

    const auto turn_start = Clock::now();
    AgentTurn turn;
    turn.turn_id = ++turn_counter_;

    const auto ai_start = Clock::now();
    turn.reply = engine_.respond(text);
    turn.record.ai_ms = elapsed_ms(ai_start);

    const auto plan_start = Clock::now();
    turn.timings = behavior::estimate_word_timings(turn.reply.text, config_.planner.unit_ms);
    turn.schedule = behavior::plan_speaking(turn.reply.text, turn.timings,
                                            splitmix64(config_.seed ^ turn.turn_id), config_.planner);
    turn.expression = expression::map_expression(config_.va, *config_.presets);
    turn.record.plan_ms = elapsed_ms(plan_start);

    turn.record.turn_id = turn.turn_id;
    turn.record.reply_len = turn.reply.text.size();
    turn.record.total_server_ms = elapsed_ms(turn_start);

    records_.push_back(turn.record);
    if (sink_)
        sink_->add(turn.record);
    return turn;
}

void Session::record_client_metrics(std::optional<double> stt_ms, std::optional<double> tts_ms) {
    if (sink_)
        sink_->add_client(stt_ms, tts_ms);
}

BenchResult bench(std::size_t n_turns, const std::vector<std::string>& corpus,
                  std::shared_ptr<const eliza::ElizaScript> script, std::uint64_t seed) {
    if (n_turns == 0)
        throw std::invalid_argument("bench needs at least one turn");
    if (corpus.empty())
        throw std::invalid_argument("bench corpus is empty");

    const auto start = Clock::now();
    SessionConfig config;
    config.seed = seed;
    Session session(std::move(script), config);
    session.handle(event::SessionStart{});

    BenchResult result;
    for (std::size_t i = 0; i < n_turns; ++i) {
        session.set_phase(Phase::thinking);
        auto turn = session.run_turn(corpus[i % corpus.size()]);
        result.replies.push_back(turn.reply.text);
        result.records.push_back(turn.record);
        if (turn.reply.session_end) {
            session.set_phase(Phase::idle);
            session.handle(event::SessionStart{});
        }
    }
    result.summary = metrics_summary(result.records);
    result.wall_ms = elapsed_ms(start);
    return result;
}

std::string format_bench_table(const BenchResult& r) {
    auto row = [](const char* name, const MetricSummary& m) {
        char buf[160];
        if (m.sd_ms)
            std::snprintf(buf, sizeof buf, "%-32s %12.4f %12.4f\n", name, m.mean_ms, *m.sd_ms);
        else
            std::snprintf(buf, sizeof buf, "%-32s %12.4f %12s\n", name, m.mean_ms, "n/a");
        return std::string(buf);
    };
    std::string out;
    char head[160];
    std::snprintf(head, sizeof head, "%-32s %12s %12s\n", "component", "mean (ms)", "sd (ms)");
    out += head;
    out += std::string(58, '-') + "\n";
    out += row("ElizaAI (ai_ms)", r.summary.ai_ms);
    out += row("Planning (plan_ms)", r.summary.plan_ms);
    out += row("Total server (total_server_ms)", r.summary.total_server_ms);
    out += std::string(58, '-') + "\n";
    char tail[160];
    std::snprintf(tail, sizeof tail, "interactions: %zu   bench wall time: %.1f ms\n", r.summary.ai_ms.count, r.wall_ms);
    out += tail;
    return out;
}

std::vector<std::string> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open corpus '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        lines.push_back(line);
    }
    return lines;
}

}  // namespace eca::session
