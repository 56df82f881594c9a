#pragma once

#include "eca/expression.hpp"
#include "eca/lipsync.hpp"
#include "eca/session.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace eca::gateway {

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace msg {

// client -> server
struct UserUtterance {
    std::string text;
    bool final = false;
    friend bool operator==(const UserUtterance&, const UserUtterance&) = default;
};
struct ListenStart {
    friend bool operator==(const ListenStart&, const ListenStart&) = default;
};
struct Face {
    double cx = 0.5;
    double cy = 0.5;
    double w = 0.2;
    friend bool operator==(const Face&, const Face&) = default;
};
struct TtsEvent {
    enum class Kind { start, word, end };
    Kind kind = Kind::start;
    std::optional<std::uint64_t> word_index;
    double t_ms = 0;
    friend bool operator==(const TtsEvent&, const TtsEvent&) = default;
};
struct ClientMetrics {
    std::optional<double> stt_ms;
    std::optional<double> tts_ms;
    friend bool operator==(const ClientMetrics&, const ClientMetrics&) = default;
};
struct Quit {
    friend bool operator==(const Quit&, const Quit&) = default;
};

// server -> client
struct Greeting {
    std::string text;
    friend bool operator==(const Greeting&, const Greeting&) = default;
};
struct Behavior {
    std::string kind;
    double start_ms = 0;
    double end_ms = 0;
    double amplitude = 0;
    std::optional<double> yaw;
    std::optional<double> pitch;
    friend bool operator==(const Behavior&, const Behavior&) = default;
};
struct WordTiming {
    std::string word;
    double start_ms = 0;
    double end_ms = 0;
    friend bool operator==(const WordTiming&, const WordTiming&) = default;
};
struct AgentReply {
    std::uint64_t turn_id = 0;
    std::string text;
    std::vector<Behavior> behaviors;
    expression::BlendShapeVector expression;
    std::vector<WordTiming> word_timings;
    friend bool operator==(const AgentReply&, const AgentReply&) = default;
};
struct Gaze {
    double yaw = 0;
    double pitch = 0;
    friend bool operator==(const Gaze&, const Gaze&) = default;
};
struct Viseme {
    double t_ms = 0;
    double kiss = 0;
    double lipsPressed = 0;
    double mouthOpen = 0;
    friend bool operator==(const Viseme&, const Viseme&) = default;
};
struct SessionEnd {
    std::string text;
    friend bool operator==(const SessionEnd&, const SessionEnd&) = default;
};
struct Error {
    std::string code;
    std::string detail;
    friend bool operator==(const Error&, const Error&) = default;
};

}  // namespace msg

using Message = std::variant<msg::UserUtterance, msg::ListenStart, msg::Face, msg::TtsEvent, msg::ClientMetrics,
                             msg::Quit, msg::Greeting, msg::AgentReply, msg::Gaze, msg::Viseme, msg::SessionEnd,
                             msg::Error>;

bool is_client_message(const Message& m);
std::string_view type_of(const Message& m);

/// Strict schema check: exact field names, types and ranges. Throws ProtocolError.
Message from_json(const nlohmann::json& j);
nlohmann::json to_json(const Message& m);

Message decode(std::string_view frame);
std::string encode(const Message& m);

msg::AgentReply to_wire(const session::AgentTurn& turn);

/// One connection's session behind the wire protocol. Frames in, frames out.
class SessionHandler {
public:
    SessionHandler(std::shared_ptr<const eliza::ElizaScript> script, session::SessionConfig config,
                   std::shared_ptr<session::MetricsSink> sink = nullptr);

    /// Starts the session; returns the greeting frame(s).
    std::vector<std::string> open();

    /// Malformed frames yield exactly one `error` frame and leave the session untouched.
    std::vector<std::string> handle_frame(std::string_view frame);
    std::vector<Message> handle(const Message& message);

    const session::Session& session() const noexcept { return session_; }

private:
    std::vector<Message> translate(const session::EventResult& result);

    session::Session session_;
};

struct LipsyncRequest {
    lipsync::SampleFormat format = lipsync::SampleFormat::pcm16;
    double sample_rate_hz = 44100;
    std::vector<std::uint8_t> pcm;
};

std::optional<lipsync::SampleFormat> parse_sample_format(std::string_view name);

/// Parses the JSON form of the stateless request: {format, sample_rate, pcm_base64}.
LipsyncRequest parse_lipsync_json(std::string_view body);

/// {"rows":[{t_ms,kiss,lipsPressed,mouthOpen},...]}. Throws lipsync::LipsyncError.
nlohmann::json run_lipsync(const LipsyncRequest& request, const lipsync::LipsyncConfig& config);

std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

nlohmann::json schedule_to_json(const behavior::BehaviorSchedule& schedule);

}  // namespace eca::gateway
