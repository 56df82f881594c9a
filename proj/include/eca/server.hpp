#pragma once

#include "eca/eliza.hpp"
#include "eca/expression.hpp"
#include "eca/lipsync.hpp"
#include "eca/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace eca::gateway {

struct ServerConfig {
    std::string address = "0.0.0.0";
    std::uint16_t port = 8080;  // 0 binds an ephemeral port
    std::shared_ptr<const eliza::ElizaScript> script;
    std::shared_ptr<const expression::PresetTable> presets;  // null: built-in defaults
    lipsync::LipsyncConfig lipsync;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> static_dir;
    unsigned threads = 1;
    std::size_t max_body_bytes = 32u << 20;
};

/// HTTP + WebSocket front end. Routes:
///   GET  /health, GET /metrics, GET /listening?duration_ms=&seed=
///   POST /lipsync (JSON with pcm_base64, or raw PCM with ?format=&sample_rate=)
///   GET  /session upgraded to a WebSocket, one conversation per connection
///   anything else under static_dir when configured
class Server {
public:
    /// Binds immediately; throws std::system_error when the address is unavailable.
    explicit Server(ServerConfig config);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    std::uint16_t port() const noexcept;

    /// Serves on the calling thread (plus config.threads - 1 workers) until stop().
    void run();

    /// Runs in background threads; returns immediately.
    void start();

    /// Stops accepting, closes open sessions once their current turn is written, then joins.
    void stop();

    std::shared_ptr<session::MetricsSink> metrics() const noexcept;

    struct Impl;

private:
    std::shared_ptr<Impl> impl_;
};

}  // namespace eca::gateway
