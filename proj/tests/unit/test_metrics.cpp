#include "eca/metrics.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <random>
#include <thread>

using namespace eca::session;

TEST_SUITE("metrics") {

TEST_CASE("summary examples") {
    const std::vector<double> xs = {3, 4, 5};
    const auto s = summarize(xs);
    CHECK(s.count == 3);
    CHECK(s.mean_ms == doctest::Approx(4));
    REQUIRE(s.sd_ms);
    CHECK(*s.sd_ms == doctest::Approx(1));

    const std::vector<double> same(17, 2.5);
    const auto flat = summarize(same);
    CHECK(flat.mean_ms == doctest::Approx(2.5));
    REQUIRE(flat.sd_ms);
    CHECK(*flat.sd_ms == doctest::Approx(0).epsilon(1e-12));

    const std::vector<double> one = {7};
    const auto single = summarize(one);
    CHECK(single.count == 1);
    CHECK(single.mean_ms == 7);
    CHECK_FALSE(single.sd_ms);

    CHECK_THROWS_AS(summarize(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("summary agrees with a two-pass oracle") {
    std::mt19937_64 rng(31);
    std::lognormal_distribution<double> dist(0.0, 1.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(2 + rng() % 2000);
        const double offset = trial % 5 == 0 ? 1e6 : 0;
        for (auto& x : xs)
            x = offset + dist(rng);
        const auto got = summarize(xs);
        const auto [mean, sd] = oracle::mean_sd(xs);
        CHECK(oracle::relative_error(got.mean_ms, mean) <= 1e-9);
        REQUIRE(got.sd_ms);
        CHECK(oracle::relative_error(*got.sd_ms, sd) <= 1e-9);
    }
}

TEST_CASE("metrics_summary over turn records") {
    std::vector<TurnRecord> records;
    for (int i = 1; i <= 4; ++i)
        records.push_back({static_cast<std::uint64_t>(i), 0.1 * i, 0.2 * i, 0.5 * i, 10});
    const auto s = metrics_summary(records);
    CHECK(s.ai_ms.count == 4);
    CHECK(s.ai_ms.mean_ms == doctest::Approx(0.25));
    CHECK(s.plan_ms.mean_ms == doctest::Approx(0.5));
    CHECK(s.total_server_ms.mean_ms == doctest::Approx(1.25));
    const auto [m, sd] = oracle::mean_sd({0.5, 1.0, 1.5, 2.0});
    CHECK(*s.total_server_ms.sd_ms == doctest::Approx(sd));
}

TEST_CASE("MetricsSink is safe under concurrent writers") {
    MetricsSink sink;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 500; ++i) {
                sink.add({static_cast<std::uint64_t>(t * 1000 + i), 1.0, 2.0, 3.0, 5});
                sink.add_client(i % 2 ? std::optional<double>(10.0) : std::nullopt, 20.0);
            }
        });
    }
    for (auto& th : threads)
        th.join();
    CHECK(sink.count() == 4000);
    CHECK(sink.records().size() == 4000);
    CHECK(sink.client_stt_ms().size() == 2000);
    CHECK(sink.client_tts_ms().size() == 4000);
    const auto records = sink.records();
    const auto s = metrics_summary(records);
    CHECK(s.total_server_ms.mean_ms == doctest::Approx(3.0));
}

}  // TEST_SUITE
