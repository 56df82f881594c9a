#pragma once

#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace eca::session {

struct TurnRecord {
    std::uint64_t turn_id = 0;
    double ai_ms = 0;           // ELIZA respond
    double plan_ms = 0;         // behaviour planning + expression mapping
    double total_server_ms = 0; // whole server-side turn
    std::size_t reply_len = 0;
};

struct MetricSummary {
    std::size_t count = 0;
    double mean_ms = 0;
    std::optional<double> sd_ms;  // sample sd (n-1); needs count >= 2
};

struct MetricsSummary {
    MetricSummary ai_ms;
    MetricSummary plan_ms;
    MetricSummary total_server_ms;
};

/// Single-pass (Welford) mean and sample standard deviation.
/// Throws std::invalid_argument on empty input.
MetricSummary summarize(std::span<const double> values);

MetricsSummary metrics_summary(std::span<const TurnRecord> records);

/// Thread-safe aggregation point shared by all sessions of a server.
class MetricsSink {
public:
    void add(const TurnRecord& record);
    void add_client(std::optional<double> stt_ms, std::optional<double> tts_ms);

    std::vector<TurnRecord> records() const;
    std::vector<double> client_stt_ms() const;
    std::vector<double> client_tts_ms() const;
    std::size_t count() const;

private:
    mutable std::mutex mutex_;
    std::vector<TurnRecord> records_;
    std::vector<double> stt_ms_;
    std::vector<double> tts_ms_;
};

}  // namespace eca::session
