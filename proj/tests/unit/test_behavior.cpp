#include "eca/behavior.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace eca::behavior;

namespace {

constexpr double deg = std::numbers::pi / 180;

std::size_t count_kind(const BehaviorSchedule& s, BehaviorKind k) {
    std::size_t n = 0;
    for (const auto& e : s.events)
        n += e.kind == k;
    return n;
}

void check_well_formed(const BehaviorSchedule& s) {
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const auto& e = s.events[i];
        CHECK(e.end_ms > e.start_ms);
        CHECK(e.start_ms >= 0);
        CHECK(e.end_ms <= s.total_ms);
        CHECK(e.amplitude >= 0);
        CHECK(e.amplitude <= 1);
        if (i > 0)
            CHECK(s.events[i - 1].start_ms <= e.start_ms);
    }
}

}  // namespace

TEST_SUITE("behavior") {

TEST_CASE("word timings") {
    const auto t = estimate_word_timings("I do not know", 55);
    REQUIRE(t.size() == 4);
    CHECK(t[2].word == "not");
    CHECK(t[2].start_ms == doctest::Approx(275));
    CHECK(t[2].end_ms == doctest::Approx(495));
    CHECK(total_duration(t) == doctest::Approx(770));

    CHECK(estimate_word_timings("", 55).empty());
    CHECK(total_duration(estimate_word_timings("", 55)) == 0);

    const auto no = estimate_word_timings("no", 55);
    REQUIRE(no.size() == 1);
    CHECK(no[0].start_ms == 0);
    CHECK(no[0].end_ms == doctest::Approx(165));

    CHECK_THROWS_AS(estimate_word_timings("x", 0), std::invalid_argument);
}

TEST_CASE("speech words strip punctuation but keep apostrophes") {
    CHECK(speech_words("Don't you think so?") == std::vector<std::string>{"Don't", "you", "think", "so"});
    CHECK(speech_words("  'no' , -- well...") == std::vector<std::string>{"no", "well"});
    CHECK(speech_words("").empty());
}

TEST_CASE("negation lexicon") {
    for (const char* w : {"no", "not", "No", "NOT", "don't", "can't", "Isn't", "won't"})
        CHECK_MESSAGE(is_negation(w), w);
    for (const char* w : {"nothing", "none", "never", "know", "note", "nt", "on", "snot", "dont"})
        CHECK_MESSAGE(!is_negation(w), w);
}

TEST_CASE("plan_speaking examples") {
    SUBCASE("I do not know") {
        const auto t = estimate_word_timings("I do not know", 55);
        const auto s = plan_speaking("I do not know", t, 1);
        REQUIRE(count_kind(s, BehaviorKind::head_shake) == 1);
        for (const auto& e : s.events) {
            if (e.kind == BehaviorKind::head_shake) {
                CHECK(e.start_ms == doctest::Approx(155));
                CHECK(e.end_ms == doctest::Approx(615));
                CHECK(e.amplitude == doctest::Approx(0.6));
            }
        }
        check_well_formed(s);
    }
    SUBCASE("Yes") {
        const auto s = plan_speaking("Yes", estimate_word_timings("Yes", 55), 1);
        CHECK(count_kind(s, BehaviorKind::head_shake) == 0);
        REQUIRE(count_kind(s, BehaviorKind::head_nod) == 1);
        CHECK(s.events[0].start_ms == 0);
        CHECK(s.events[0].end_ms == doctest::Approx(220));
        CHECK(s.events[0].amplitude == doctest::Approx(0.2));
    }
    SUBCASE("Don't you think so?") {
        const auto t = estimate_word_timings("Don't you think so?", 55);
        const auto s = plan_speaking("Don't you think so?", t, 1);
        REQUIRE(count_kind(s, BehaviorKind::head_shake) == 1);
        // the initial nod overlaps the shake and is dropped
        CHECK(count_kind(s, BehaviorKind::head_nod) == 0);
    }
    SUBCASE("empty reply") {
        const auto s = plan_speaking("", {}, 1);
        CHECK(s.events.empty());
        CHECK(s.total_ms == 0);
    }
    SUBCASE("mismatched timings") {
        CHECK_THROWS_AS(plan_speaking("one two", estimate_word_timings("one", 55), 1), std::invalid_argument);
    }
}

TEST_CASE("periodic speaking nods stay on the jittered grid") {
    std::string words;
    for (int i = 0; i < 60; ++i)
        words += "word ";
    const auto t = estimate_word_timings(words, 55);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = plan_speaking(words, t, seed);
        check_well_formed(s);
        std::size_t k = 0;
        for (const auto& e : s.events) {
            if (e.kind != BehaviorKind::head_nod)
                continue;
            if (k == 0) {
                CHECK(e.start_ms == 0);
            } else {
                CHECK(std::abs(e.start_ms - 2000.0 * static_cast<double>(k)) <= 500);
                CHECK(e.amplitude == doctest::Approx(0.15));
                if (e.end_ms < s.total_ms)
                    CHECK(e.end_ms - e.start_ms == doctest::Approx(400));
            }
            ++k;
        }
        CHECK(k >= static_cast<std::size_t>(1 + std::floor((s.total_ms - 500) / 2000)));
        CHECK(k <= static_cast<std::size_t>(1 + std::floor((s.total_ms + 500) / 2000)));
    }
}

TEST_CASE("nods never overlap shakes") {
    const std::string text = "No no no, I do not know and I won't say, not now, not ever, no.";
    const auto t = estimate_word_timings(text, 55);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = plan_speaking(text, t, seed);
        for (const auto& a : s.events)
            for (const auto& b : s.events)
                if (a.kind == BehaviorKind::head_nod && b.kind == BehaviorKind::head_shake)
                    CHECK_FALSE((a.start_ms < b.end_ms && b.start_ms < a.end_ms));
    }
}

TEST_CASE("negation property on a generated corpus") {
    for (const auto& g : oracle::negation_corpus(200, 99)) {
        CAPTURE(g.text);
        const auto t = estimate_word_timings(g.text, 55);
        REQUIRE(t.size() == g.words.size());
        const auto s = plan_speaking(g.text, t, 5);
        std::vector<const BehaviorEvent*> shakes;
        for (const auto& e : s.events)
            if (e.kind == BehaviorKind::head_shake)
                shakes.push_back(&e);
        std::size_t expected = 0;
        std::size_t si = 0;
        for (std::size_t i = 0; i < g.words.size(); ++i) {
            if (!g.negation[i])
                continue;
            ++expected;
            REQUIRE(si < shakes.size());
            CHECK(shakes[si]->start_ms < t[i].end_ms);
            CHECK(t[i].start_ms < shakes[si]->end_ms);
            ++si;
        }
        CHECK(shakes.size() == expected);
    }
}

TEST_CASE("plan_listening") {
    CHECK(plan_listening(0, 1).events.empty());
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto s = plan_listening(5000, seed);
        CHECK(s.events.size() >= 3);
        CHECK(s.events.size() <= 4);
        check_well_formed(s);
        for (const auto& e : s.events)
            CHECK(e.amplitude == doctest::Approx(0.12));
    }
    CHECK(plan_listening(5000, 17) == plan_listening(5000, 17));
    CHECK_FALSE(plan_listening(60000, 17) == plan_listening(60000, 18));
    CHECK_THROWS_AS(plan_listening(-1, 0), std::invalid_argument);
}

TEST_CASE("speaking determinism") {
    const std::string text = "Why do you not tell me more about your mother and your father and everyone else?";
    const auto t = estimate_word_timings(text, 55);
    CHECK(plan_speaking(text, t, 3) == plan_speaking(text, t, 3));
}

TEST_CASE("face_to_gaze examples") {
    const CameraParams cam;
    const auto c = face_to_gaze({0.5, 0.5, 0.2}, cam);
    CHECK(c.yaw_rad == 0.0);
    CHECK(c.pitch_rad == 0.0);
    CHECK(face_to_gaze({1.0, 0.5, 0.2}, cam).yaw_rad == doctest::Approx(30 * deg));
    CHECK(face_to_gaze({0.75, 0.5, 0.2}, cam).yaw_rad == doctest::Approx(std::atan(0.5 * std::tan(30 * deg))));
    CHECK(face_to_gaze({0.75, 0.5, 0.2}, cam).yaw_rad / deg == doctest::Approx(16.1).epsilon(0.001));
    CHECK(face_to_gaze({0.5, 0.0, 0.2}, cam).pitch_rad == doctest::Approx(23.5 * deg));
}

TEST_CASE("gaze monotonic and bounded on a grid") {
    const CameraParams cam;
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            const double cx = i / 20.0;
            const double cy = j / 20.0;
            const auto g = face_to_gaze({cx, cy, 0.2}, cam);
            CHECK(std::abs(g.yaw_rad) <= cam.h_fov_rad / 2 + 1e-12);
            CHECK(std::abs(g.pitch_rad) <= cam.v_fov_rad / 2 + 1e-12);
            if (i > 0)
                CHECK(g.yaw_rad > face_to_gaze({(i - 1) / 20.0, cy, 0.2}, cam).yaw_rad);
            if (j > 0)
                CHECK(g.pitch_rad < face_to_gaze({cx, (j - 1) / 20.0, 0.2}, cam).pitch_rad);
        }
    }
}

TEST_CASE("smooth_gaze") {
    GazeState g{0.3, -0.1, 0.8};
    const auto same = smooth_gaze(g, {0.3, -0.1});
    CHECK(same.yaw_rad == 0.3);
    CHECK(same.pitch_rad == -0.1);

    const auto step = smooth_gaze({0, 0, 0.8}, {1, 1});
    CHECK(step.yaw_rad == doctest::Approx(0.2));

    GazeState s{0, 0, 0.8};
    double prev = 1;
    for (int i = 0; i < 50; ++i) {
        s = smooth_gaze(s, {1, -1});
        const double err = std::abs(s.yaw_rad - 1);
        CHECK(err < prev);
        CHECK(s.yaw_rad <= 1);
        prev = err;
    }
    CHECK(prev < 1e-4);
}

}  // TEST_SUITE
