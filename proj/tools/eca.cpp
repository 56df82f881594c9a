#include "eca/behavior.hpp"
#include "eca/eliza.hpp"
#include "eca/lipsync.hpp"
#include "eca/server.hpp"
#include "eca/session.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#ifndef ECA_DEFAULT_SCRIPT
#define ECA_DEFAULT_SCRIPT "data/scripts/doctor.json"
#endif

namespace {

using namespace eca;

std::shared_ptr<const eliza::ElizaScript> open_script(const std::string& path) {
    return std::make_shared<const eliza::ElizaScript>(eliza::load_script(path));
}

/// Renders a schedule as compact inline tags, e.g. `[nod 0-300 0.20] [shake 410-890 0.60]`.
std::string annotate(const behavior::BehaviorSchedule& schedule) {
    std::string out;
    for (const auto& e : schedule.events) {
        const char* name = e.kind == behavior::BehaviorKind::head_nod     ? "nod"
                           : e.kind == behavior::BehaviorKind::head_shake ? "shake"
                                                                          : "gaze";
        char buf[96];
        std::snprintf(buf, sizeof buf, "[%s %.0f-%.0f %.2f]", name, e.start_ms, e.end_ms, e.amplitude);
        if (!out.empty())
            out += ' ';
        out += buf;
    }
    return out;
}

int run_repl(const std::string& script_path, std::uint64_t seed) {
    session::SessionConfig config;
    config.seed = seed;
    session::Session s(open_script(script_path), config);
    for (const auto& e : s.handle(session::event::SessionStart{}).emissions)
        if (auto* g = std::get_if<session::emission::Greeting>(&e))
            std::cout << g->text << '\n';

    std::string line;
    while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        s.handle(session::event::ListenStart{});
        const auto result = s.handle(session::event::FinalTranscript{line});
        if (result.error) {
            std::cerr << "error: " << result.error->detail << '\n';
            continue;
        }
        for (const auto& e : result.emissions) {
            if (auto* r = std::get_if<session::emission::AgentReply>(&e)) {
                std::cout << r->turn.reply.text << '\n';
                if (!r->turn.reply.session_end)
                    std::cout << "  " << annotate(r->turn.schedule) << '\n';
            }
        }
        if (s.phase() == session::Phase::idle)
            return 0;
        s.handle(session::event::TtsStart{});
        s.handle(session::event::TtsEnd{});
    }
    return 0;
}

int run_lipsync(const std::string& wav, const std::string& out, const std::string& config_path) {
    const auto config = config_path.empty() ? lipsync::LipsyncConfig{} : lipsync::load_lipsync_config(config_path);
    const auto audio = lipsync::read_wav(wav);
    const auto csv = lipsync::to_csv(lipsync::process_buffer(audio.samples, audio.sample_rate_hz, config));
    if (out.empty() || out == "-") {
        std::cout << csv;
        return 0;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f || !(f << csv)) {
        std::cerr << "error: cannot write '" << out << "'\n";
        return 1;
    }
    return 0;
}

int run_bench(std::size_t turns, const std::string& script_path, const std::string& corpus_path, std::uint64_t seed) {
    const auto script = open_script(script_path);
    const auto corpus = session::load_corpus(corpus_path);
    const auto result = session::bench(turns, corpus, script, seed);
    std::cout << session::format_bench_table(result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embodied conversational agent engine"};
    app.require_subcommand(1);

    std::string script_path = ECA_DEFAULT_SCRIPT;
    std::uint64_t seed = 0;

    auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket gateway");
    int port = 8080;
    std::string address = "0.0.0.0";
    std::string presets_path;
    std::string lipsync_config_path;
    std::string static_dir;
    std::string log_level = "info";
    unsigned threads = 1;
    serve->add_option("--port", port, "Listen port")->envname("ECA_PORT")->check(CLI::Range(1, 65535));
    serve->add_option("--address", address, "Listen address");
    serve->add_option("--script", script_path, "ELIZA script (JSON)")->envname("ECA_SCRIPT");
    serve->add_option("--presets", presets_path, "Expression presets (JSON)");
    serve->add_option("--lipsync-config", lipsync_config_path, "Lip-sync band configuration (JSON)");
    serve->add_option("--seed", seed, "Session seed");
    serve->add_option("--static", static_dir, "Directory served for non-API GET requests");
    serve->add_option("--threads", threads, "I/O threads")->check(CLI::Range(1u, 64u));
    serve->add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    auto* repl = app.add_subcommand("repl", "Converse on stdin/stdout");
    repl->add_option("--script", script_path, "ELIZA script (JSON)")->envname("ECA_SCRIPT");
    repl->add_option("--seed", seed, "Session seed");

    auto* lips = app.add_subcommand("lipsync", "Convert a WAV file to viseme CSV");
    std::string wav_path;
    std::string out_path;
    lips->add_option("--wav", wav_path, "Input WAV (PCM16 or float32)")->required();
    lips->add_option("--out", out_path, "Output CSV, '-' for stdout");
    lips->add_option("--config", lipsync_config_path, "Lip-sync band configuration (JSON)");

    auto* bench = app.add_subcommand("bench", "Time the server-side turn pipeline");
    std::size_t turns = 100;
    std::string corpus_path;
    bench->add_option("--turns", turns, "Number of turns")->check(CLI::PositiveNumber);
    bench->add_option("--script", script_path, "ELIZA script (JSON)")->envname("ECA_SCRIPT");
    bench->add_option("--corpus", corpus_path, "Utterances, one per line")->required();
    bench->add_option("--seed", seed, "Session seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*serve) {
            spdlog::set_level(spdlog::level::from_str(log_level));
            gateway::ServerConfig config;
            config.address = address;
            config.port = static_cast<std::uint16_t>(port);
            config.script = open_script(script_path);
            if (!presets_path.empty())
                config.presets =
                    std::make_shared<const expression::PresetTable>(expression::load_presets(presets_path));
            if (!lipsync_config_path.empty())
                config.lipsync = lipsync::load_lipsync_config(lipsync_config_path);
            config.seed = seed;
            if (!static_dir.empty())
                config.static_dir = static_dir;
            config.threads = threads;
            gateway::Server server(std::move(config));
            server.run();
            return 0;
        }
        if (*repl)
            return run_repl(script_path, seed);
        if (*lips)
            return run_lipsync(wav_path, out_path, lipsync_config_path);
        if (*bench)
            return run_bench(turns, script_path, corpus_path, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
