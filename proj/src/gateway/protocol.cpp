#include "eca/protocol.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>

namespace eca::gateway {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Field access with an allow-list; anything else in the object is a schema violation.
class Fields {
public:
    Fields(const json& obj, std::string_view type, std::initializer_list<std::string_view> allowed)
        : obj_(obj), type_(type) {
        for (const auto& [key, value] : obj.items()) {
            if (key == "type")
                continue;
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                fail("unexpected field '" + key + "'");
        }
    }

    [[noreturn]] void fail(const std::string& why) const { throw ProtocolError(std::string(type_) + ": " + why); }

    bool has(const char* key) const { return obj_.contains(key); }

    const json& at(const char* key) const {
        auto it = obj_.find(key);
        if (it == obj_.end())
            fail(std::string("missing field '") + key + "'");
        return *it;
    }

    std::string str(const char* key) const {
        const auto& v = at(key);
        if (!v.is_string())
            fail(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    bool boolean(const char* key) const {
        const auto& v = at(key);
        if (!v.is_boolean())
            fail(std::string("field '") + key + "' must be a boolean");
        return v.get<bool>();
    }

    double number(const char* key, double lo = -HUGE_VAL, double hi = HUGE_VAL, bool open_lo = false) const {
        return number_of(at(key), key, lo, hi, open_lo);
    }

    std::optional<double> opt_number(const char* key, double lo = -HUGE_VAL, double hi = HUGE_VAL) const {
        if (!has(key))
            return std::nullopt;
        return number(key, lo, hi);
    }

    std::uint64_t uint(const char* key) const {
        const auto& v = at(key);
        if (v.is_number_unsigned())
            return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        fail(std::string("field '") + key + "' must be a non-negative integer");
    }

    double number_of(const json& v, const std::string& key, double lo, double hi, bool open_lo = false) const {
        if (!v.is_number())
            fail("field '" + key + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x) || x < lo || x > hi || (open_lo && x == lo))
            fail("field '" + key + "' out of range");
        return x;
    }

private:
    const json& obj_;
    std::string_view type_;
};

msg::Behavior behavior_from_json(const json& j, const Fields& parent) {
    if (!j.is_object())
        parent.fail("behaviors entries must be objects");
    Fields f(j, "behavior", {"kind", "start_ms", "end_ms", "amplitude", "yaw", "pitch"});
    msg::Behavior b;
    b.kind = f.str("kind");
    if (!behavior::behavior_kind_from_string(b.kind))
        f.fail("unknown kind '" + b.kind + "'");
    b.start_ms = f.number("start_ms", 0);
    b.end_ms = f.number("end_ms", 0);
    if (!(b.end_ms > b.start_ms))
        f.fail("end_ms must exceed start_ms");
    b.amplitude = f.number("amplitude", 0, 1);
    b.yaw = f.opt_number("yaw");
    b.pitch = f.opt_number("pitch");
    return b;
}

msg::WordTiming word_timing_from_json(const json& j, const Fields& parent) {
    if (!j.is_object())
        parent.fail("word_timings entries must be objects");
    Fields f(j, "word_timing", {"word", "start_ms", "end_ms"});
    return {f.str("word"), f.number("start_ms", 0), f.number("end_ms", 0)};
}

expression::BlendShapeVector expression_from_json(const json& j, const Fields& parent) {
    if (!j.is_object() || j.size() != expression::blend_shape_count)
        parent.fail("expression must be an object with the 8 blend shapes");
    expression::BlendShapeVector v;
    for (std::size_t i = 0; i < expression::blend_shape_count; ++i) {
        const std::string name(expression::blend_shape_names[i]);
        auto it = j.find(name);
        if (it == j.end())
            parent.fail("expression is missing '" + name + "'");
        v.weights[i] = parent.number_of(*it, name, 0, 1);
    }
    return v;
}

}  // namespace

bool is_client_message(const Message& m) { return m.index() <= 5; }

std::string_view type_of(const Message& m) {
    return std::visit(overloaded{
                          [](const msg::UserUtterance&) { return std::string_view("user_utterance"); },
                          [](const msg::ListenStart&) { return std::string_view("listen_start"); },
                          [](const msg::Face&) { return std::string_view("face"); },
                          [](const msg::TtsEvent&) { return std::string_view("tts_event"); },
                          [](const msg::ClientMetrics&) { return std::string_view("client_metrics"); },
                          [](const msg::Quit&) { return std::string_view("quit"); },
                          [](const msg::Greeting&) { return std::string_view("greeting"); },
                          [](const msg::AgentReply&) { return std::string_view("agent_reply"); },
                          [](const msg::Gaze&) { return std::string_view("gaze"); },
                          [](const msg::Viseme&) { return std::string_view("viseme"); },
                          [](const msg::SessionEnd&) { return std::string_view("session_end"); },
                          [](const msg::Error&) { return std::string_view("error"); },
                      },
                      m);
}

Message from_json(const json& j) {
    if (!j.is_object())
        throw ProtocolError("message must be a JSON object");
    auto t = j.find("type");
    if (t == j.end() || !t->is_string())
        throw ProtocolError("message needs a string 'type' field");
    const std::string type = t->get<std::string>();

    if (type == "user_utterance") {
        Fields f(j, type, {"text", "final"});
        return msg::UserUtterance{f.str("text"), f.boolean("final")};
    }
    if (type == "listen_start") {
        Fields f(j, type, {});
        return msg::ListenStart{};
    }
    if (type == "face") {
        Fields f(j, type, {"cx", "cy", "w"});
        return msg::Face{f.number("cx", 0, 1), f.number("cy", 0, 1), f.number("w", 0, 1, true)};
    }
    if (type == "tts_event") {
        Fields f(j, type, {"kind", "word_index", "t_ms"});
        msg::TtsEvent e;
        const auto kind = f.str("kind");
        if (kind == "start")
            e.kind = msg::TtsEvent::Kind::start;
        else if (kind == "word")
            e.kind = msg::TtsEvent::Kind::word;
        else if (kind == "end")
            e.kind = msg::TtsEvent::Kind::end;
        else
            f.fail("kind must be start, word or end");
        if (f.has("word_index"))
            e.word_index = f.uint("word_index");
        e.t_ms = f.number("t_ms", 0);
        return e;
    }
    if (type == "client_metrics") {
        Fields f(j, type, {"stt_ms", "tts_ms"});
        return msg::ClientMetrics{f.opt_number("stt_ms", 0), f.opt_number("tts_ms", 0)};
    }
    if (type == "quit") {
        Fields f(j, type, {});
        return msg::Quit{};
    }
    if (type == "greeting") {
        Fields f(j, type, {"text"});
        return msg::Greeting{f.str("text")};
    }
    if (type == "agent_reply") {
        Fields f(j, type, {"turn_id", "text", "behaviors", "expression", "word_timings"});
        msg::AgentReply r;
        r.turn_id = f.uint("turn_id");
        r.text = f.str("text");
        const auto& behaviors = f.at("behaviors");
        if (!behaviors.is_array())
            f.fail("behaviors must be an array");
        for (const auto& b : behaviors)
            r.behaviors.push_back(behavior_from_json(b, f));
        r.expression = expression_from_json(f.at("expression"), f);
        const auto& timings = f.at("word_timings");
        if (!timings.is_array())
            f.fail("word_timings must be an array");
        for (const auto& w : timings)
            r.word_timings.push_back(word_timing_from_json(w, f));
        return r;
    }
    if (type == "gaze") {
        Fields f(j, type, {"yaw", "pitch"});
        return msg::Gaze{f.number("yaw"), f.number("pitch")};
    }
    if (type == "viseme") {
        Fields f(j, type, {"t_ms", "kiss", "lipsPressed", "mouthOpen"});
        return msg::Viseme{f.number("t_ms", 0), f.number("kiss", 0, 1), f.number("lipsPressed", 0, 1),
                           f.number("mouthOpen", 0, 1)};
    }
    if (type == "session_end") {
        Fields f(j, type, {"text"});
        return msg::SessionEnd{f.str("text")};
    }
    if (type == "error") {
        Fields f(j, type, {"code", "detail"});
        return msg::Error{f.str("code"), f.str("detail")};
    }
    throw ProtocolError("unknown message type '" + type + "'");
}

json to_json(const Message& m) {
    json body = std::visit(
        overloaded{
            [](const msg::UserUtterance& u) { return json{{"text", u.text}, {"final", u.final}}; },
            [](const msg::ListenStart&) { return json::object(); },
            [](const msg::Face& f) { return json{{"cx", f.cx}, {"cy", f.cy}, {"w", f.w}}; },
            [](const msg::TtsEvent& e) {
                json j{{"kind", e.kind == msg::TtsEvent::Kind::start  ? "start"
                                : e.kind == msg::TtsEvent::Kind::word ? "word"
                                                                      : "end"},
                       {"t_ms", e.t_ms}};
                if (e.word_index)
                    j["word_index"] = *e.word_index;
                return j;
            },
            [](const msg::ClientMetrics& c) {
                json j = json::object();
                if (c.stt_ms)
                    j["stt_ms"] = *c.stt_ms;
                if (c.tts_ms)
                    j["tts_ms"] = *c.tts_ms;
                return j;
            },
            [](const msg::Quit&) { return json::object(); },
            [](const msg::Greeting& g) { return json{{"text", g.text}}; },
            [](const msg::AgentReply& r) {
                json behaviors = json::array();
                for (const auto& b : r.behaviors) {
                    json e{{"kind", b.kind}, {"start_ms", b.start_ms}, {"end_ms", b.end_ms}, {"amplitude", b.amplitude}};
                    if (b.yaw)
                        e["yaw"] = *b.yaw;
                    if (b.pitch)
                        e["pitch"] = *b.pitch;
                    behaviors.push_back(std::move(e));
                }
                json expr = json::object();
                for (std::size_t i = 0; i < expression::blend_shape_count; ++i)
                    expr[std::string(expression::blend_shape_names[i])] = r.expression.weights[i];
                json timings = json::array();
                for (const auto& w : r.word_timings)
                    timings.push_back({{"word", w.word}, {"start_ms", w.start_ms}, {"end_ms", w.end_ms}});
                return json{{"turn_id", r.turn_id},
                            {"text", r.text},
                            {"behaviors", behaviors},
                            {"expression", expr},
                            {"word_timings", timings}};
            },
            [](const msg::Gaze& g) { return json{{"yaw", g.yaw}, {"pitch", g.pitch}}; },
            [](const msg::Viseme& v) {
                return json{{"t_ms", v.t_ms}, {"kiss", v.kiss}, {"lipsPressed", v.lipsPressed}, {"mouthOpen", v.mouthOpen}};
            },
            [](const msg::SessionEnd& s) { return json{{"text", s.text}}; },
            [](const msg::Error& e) { return json{{"code", e.code}, {"detail", e.detail}}; },
        },
        m);
    body["type"] = type_of(m);
    return body;
}

Message decode(std::string_view frame) {
    json j;
    try {
        j = json::parse(frame);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("invalid JSON: ") + e.what());
    }
    return from_json(j);
}

std::string encode(const Message& m) {
    // replace invalid UTF-8 in reply text rather than throwing mid-session
    return to_json(m).dump(-1, ' ', false, json::error_handler_t::replace);
}

msg::AgentReply to_wire(const session::AgentTurn& turn) {
    msg::AgentReply r;
    r.turn_id = turn.turn_id;
    r.text = turn.reply.text;
    for (const auto& e : turn.schedule.events) {
        msg::Behavior b{std::string(behavior::to_string(e.kind)), e.start_ms, e.end_ms, e.amplitude, std::nullopt,
                        std::nullopt};
        if (e.gaze_target) {
            b.yaw = e.gaze_target->yaw_rad;
            b.pitch = e.gaze_target->pitch_rad;
        }
        r.behaviors.push_back(std::move(b));
    }
    r.expression = turn.expression;
    for (const auto& w : turn.timings)
        r.word_timings.push_back({w.word, w.start_ms, w.end_ms});
    return r;
}

SessionHandler::SessionHandler(std::shared_ptr<const eliza::ElizaScript> script, session::SessionConfig config,
                               std::shared_ptr<session::MetricsSink> sink)
    : session_(std::move(script), std::move(config), std::move(sink)) {}

std::vector<std::string> SessionHandler::open() {
    std::vector<std::string> out;
    for (const auto& m : translate(session_.handle(session::event::SessionStart{})))
        out.push_back(encode(m));
    return out;
}

std::vector<std::string> SessionHandler::handle_frame(std::string_view frame) {
    std::vector<Message> replies;
    try {
        replies = handle(decode(frame));
    } catch (const ProtocolError& e) {
        replies = {msg::Error{"bad_message", e.what()}};
    }
    std::vector<std::string> out;
    out.reserve(replies.size());
    for (const auto& m : replies)
        out.push_back(encode(m));
    return out;
}

std::vector<Message> SessionHandler::handle(const Message& message) {
    using namespace session::event;
    if (!is_client_message(message))
        throw ProtocolError("'" + std::string(type_of(message)) + "' is a server-to-client message");

    return std::visit(
        overloaded{
            [&](const msg::UserUtterance& u) -> std::vector<Message> {
                if (u.final)
                    return translate(session_.handle(FinalTranscript{u.text}));
                return translate(session_.handle(InterimTranscript{u.text}));
            },
            [&](const msg::ListenStart&) { return translate(session_.handle(ListenStart{})); },
            [&](const msg::Face& f) { return translate(session_.handle(FaceUpdate{{f.cx, f.cy, f.w}})); },
            [&](const msg::TtsEvent& e) -> std::vector<Message> {
                switch (e.kind) {
                case msg::TtsEvent::Kind::start: return translate(session_.handle(TtsStart{e.t_ms}));
                case msg::TtsEvent::Kind::word:
                    return translate(session_.handle(
                        TtsWord{e.word_index ? std::optional<std::size_t>(*e.word_index) : std::nullopt, e.t_ms}));
                case msg::TtsEvent::Kind::end: return translate(session_.handle(TtsEnd{e.t_ms}));
                }
                return {};
            },
            [&](const msg::ClientMetrics& c) -> std::vector<Message> {
                session_.record_client_metrics(c.stt_ms, c.tts_ms);
                return {};
            },
            [&](const msg::Quit&) { return translate(session_.handle(SessionQuit{})); },
            [](const auto&) -> std::vector<Message> { return {}; },
        },
        message);
}

std::vector<Message> SessionHandler::translate(const session::EventResult& result) {
    std::vector<Message> out;
    for (const auto& e : result.emissions) {
        std::visit(overloaded{
                       [&](const session::emission::Greeting& g) { out.emplace_back(msg::Greeting{g.text}); },
                       [&](const session::emission::AgentReply& r) { out.emplace_back(to_wire(r.turn)); },
                       [&](const session::emission::Gaze& g) { out.emplace_back(msg::Gaze{g.yaw, g.pitch}); },
                       [&](const session::emission::SessionEnd& s) { out.emplace_back(msg::SessionEnd{s.text}); },
                   },
                   e);
    }
    if (result.error) {
        const bool illegal = result.error->code == session::EventError::Code::illegal_transition;
        out.emplace_back(msg::Error{illegal ? "illegal_transition" : "engine_error", result.error->detail});
    }
    return out;
}

std::optional<lipsync::SampleFormat> parse_sample_format(std::string_view name) {
    if (name == "pcm16" || name == "s16le")
        return lipsync::SampleFormat::pcm16;
    if (name == "float32" || name == "f32le")
        return lipsync::SampleFormat::float32;
    return std::nullopt;
}

LipsyncRequest parse_lipsync_json(std::string_view body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ProtocolError("lipsync request must be a JSON object");
    Fields f(j, "lipsync", {"format", "sample_rate", "pcm_base64"});
    LipsyncRequest req;
    const auto fmt = f.str("format");
    auto parsed = parse_sample_format(fmt);
    if (!parsed)
        throw lipsync::LipsyncError("unsupported format '" + fmt + "'");
    req.format = *parsed;
    req.sample_rate_hz = f.number("sample_rate", 0, HUGE_VAL, true);
    req.pcm = base64_decode(f.str("pcm_base64"));
    return req;
}

json run_lipsync(const LipsyncRequest& request, const lipsync::LipsyncConfig& config) {
    const auto samples = lipsync::decode_pcm(request.pcm, request.format);
    const auto rows = lipsync::process_buffer(samples, request.sample_rate_hz, config);
    json out = json::array();
    for (const auto& r : rows) {
        out.push_back({{"t_ms", r.t_ms},
                       {"kiss", r.weights.kiss},
                       {"lipsPressed", r.weights.lipsPressed},
                       {"mouthOpen", r.weights.mouthOpen}});
    }
    return json{{"sample_rate", request.sample_rate_hz}, {"rows", out}};
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    namespace b64 = boost::beast::detail::base64;
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    std::size_t rest = read;
    while (rest < text.size() && text[rest] == '=')
        ++rest;
    if (rest != text.size())
        throw ProtocolError("pcm_base64 is not valid base64");
    out.resize(written);
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

json schedule_to_json(const behavior::BehaviorSchedule& schedule) {
    json events = json::array();
    for (const auto& e : schedule.events) {
        json j{{"kind", behavior::to_string(e.kind)}, {"start_ms", e.start_ms}, {"end_ms", e.end_ms}, {"amplitude", e.amplitude}};
        if (e.gaze_target) {
            j["yaw"] = e.gaze_target->yaw_rad;
            j["pitch"] = e.gaze_target->pitch_rad;
        }
        events.push_back(std::move(j));
    }
    return json{{"total_ms", schedule.total_ms}, {"behaviors", events}};
}

}  // namespace eca::gateway
