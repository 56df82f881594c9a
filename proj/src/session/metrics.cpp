#include "eca/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace eca::session {

MetricSummary summarize(std::span<const double> values) {
    if (values.empty())
        throw std::invalid_argument("metrics summary of an empty sample");
    double mean = 0;
    double m2 = 0;
    std::size_t n = 0;
    for (double x : values) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    MetricSummary out;
    out.count = n;
    out.mean_ms = mean;
    if (n >= 2)
        out.sd_ms = std::sqrt(m2 / static_cast<double>(n - 1));
    return out;
}

MetricsSummary metrics_summary(std::span<const TurnRecord> records) {
    std::vector<double> ai;
    std::vector<double> plan;
    std::vector<double> total;
    for (const auto& r : records) {
        ai.push_back(r.ai_ms);
        plan.push_back(r.plan_ms);
        total.push_back(r.total_server_ms);
    }
    return {summarize(ai), summarize(plan), summarize(total)};
}

void MetricsSink::add(const TurnRecord& record) {
    std::lock_guard lock(mutex_);
    records_.push_back(record);
}

void MetricsSink::add_client(std::optional<double> stt_ms, std::optional<double> tts_ms) {
    std::lock_guard lock(mutex_);
    if (stt_ms)
        stt_ms_.push_back(*stt_ms);
    if (tts_ms)
        tts_ms_.push_back(*tts_ms);
}

std::vector<TurnRecord> MetricsSink::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<double> MetricsSink::client_stt_ms() const {
    std::lock_guard lock(mutex_);
    return stt_ms_;
}

std::vector<double> MetricsSink::client_tts_ms() const {
    std::lock_guard lock(mutex_);
    return tts_ms_;
}

std::size_t MetricsSink::count() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

}  // namespace eca::session
