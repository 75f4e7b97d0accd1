/*
   Copyright 2026 The ODW Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "odw/error.hpp"
#include "odw/locator.hpp"
#include "odw/synthgen.hpp"

using namespace odw;
using namespace odw::locator;

namespace {

constexpr double kPi = std::numbers::pi;

StepLengthTable walking_table() {
    StepLengthTable t;
    t.set("s1", AuLabel::ShortStep, MoveState::Walking, 0.5);
    t.set("s1", AuLabel::NormalStep, MoveState::Walking, 0.7);
    t.set("s1", AuLabel::LongStep, MoveState::Walking, 0.9);
    t.set("s1", AuLabel::NormalStep, MoveState::Running, 1.0);
    return t;
}

// Model that ignores its input and always prefers one class.
seqnet::Params constant_model(Eigen::Index classes, int winner) {
    seqnet::Params p = seqnet::Params::zeros(2, 6, classes);
    p.readout_b[winner] = 4.0;
    return p;
}

windowing::Segment any_segment() {
    windowing::Segment s;
    s.end_idx = 8;
    s.samples = FeatureMatrix::Random(6, 8);
    return s;
}

synth::PathScript rectangle_script(std::int64_t long_side, std::int64_t short_side) {
    using synth::ScriptSegment;
    synth::PathScript script;
    script.segments.push_back({MoveState::Stop, AuLabel::Stop, 1000});
    for (int side = 0; side < 4; ++side) {
        script.segments.push_back(
            {MoveState::Walking, AuLabel::NormalStep, side % 2 == 0 ? long_side : short_side});
        script.segments.push_back({MoveState::Walking, AuLabel::LeftTurn, 1});
    }
    script.segments.push_back({MoveState::Stop, AuLabel::Stop, 1000});
    return script;
}

} // namespace

TEST_CASE("step length table") {
    StepLengthTable t = walking_table();
    CHECK(t.lookup("s1", AuLabel::NormalStep, MoveState::Walking) == 0.7);
    CHECK(t.contains("s1", AuLabel::LongStep, MoveState::Walking));
    CHECK_FALSE(t.contains("s2", AuLabel::LongStep, MoveState::Walking));
    CHECK_NOTHROW(t.validate());
    try {
        t.lookup("s1", AuLabel::ShortStep, MoveState::Running);
        FAIL("expected MissingTableEntry");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingTableEntry);
    }
    CHECK_THROWS_AS(t.set("s1", AuLabel::LeftTurn, MoveState::Walking, 1.0), Error);
    CHECK_THROWS_AS(t.set("s1", AuLabel::ShortStep, MoveState::Walking, 0.0), Error);
    t.set("s1", AuLabel::ShortStep, MoveState::Walking, 0.8);
    CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("step length table round trip") {
    const StepLengthTable t = synth::make_table(synth::default_subjects());
    std::ostringstream out;
    emit_table(out, t);
    CHECK(out.str().rfind("subject,step_type,move_state,length_m\n", 0) == 0);
    std::istringstream in(out.str());
    CHECK(ingest_table(in) == t);
    CHECK(t.subjects() == std::vector<std::string>{"s1", "s2"});
}

TEST_CASE("estimator updates") {
    const StepLengthTable t = walking_table();
    TrackState s;
    SUBCASE("normal step moves along the heading") {
        s.apply(AuLabel::NormalStep, MoveState::Walking, t, "s1");
        CHECK(s.position() == Eigen::Vector2d(0.7, 0.0));
        CHECK(s.k() == 1);
        CHECK(s.history().size() == 2);
    }
    SUBCASE("left then right restores the heading exactly") {
        s.apply(AuLabel::LeftTurn, MoveState::Walking, t, "s1");
        CHECK(s.heading() == doctest::Approx(kPi / 2));
        s.apply(AuLabel::RightTurn, MoveState::Walking, t, "s1");
        CHECK(s.heading() == 0.0);
        CHECK(s.position() == Eigen::Vector2d::Zero());
    }
    SUBCASE("four left turns are the identity") {
        for (int i = 0; i < 4; ++i) s.apply(AuLabel::LeftTurn, MoveState::Walking, t, "s1");
        CHECK(std::abs(pdr::wrap_angle(s.heading())) < 1e-12);
        CHECK(s.net_turns() == 4);
    }
    SUBCASE("abnormal, stop and stairs do not move") {
        s.apply(AuLabel::Abnormal, MoveState::Walking, t, "s1");
        s.apply(AuLabel::Stop, MoveState::Stop, t, "s1");
        s.apply(AuLabel::NormalStep, MoveState::UpStairs, t, "s1");
        s.apply(AuLabel::NormalStep, MoveState::Stop, t, "s1");
        CHECK(s.position() == Eigen::Vector2d::Zero());
        CHECK(s.k() == 4);
        CHECK(s.history().size() == 5);
    }
    SUBCASE("missing entries surface") {
        CHECK_THROWS_AS(s.apply(AuLabel::LongStep, MoveState::Running, t, "s1"), Error);
    }
    SUBCASE("functional form agrees") {
        const TrackState a = apply_au(TrackState{}, AuLabel::LongStep, MoveState::Walking, t, "s1");
        CHECK(a.position() == Eigen::Vector2d(0.9, 0.0));
    }
}

TEST_CASE("random walks: translation, path length, heading range") {
    const StepLengthTable t = walking_table();
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> pick(0, 6);
    for (int trial = 0; trial < 20; ++trial) {
        TrackConfig shifted;
        shifted.origin = Eigen::Vector2d(3.5, -12.25);
        TrackState a;
        TrackState b(shifted);
        double expected_length = 0;
        for (int i = 0; i < 50; ++i) {
            const auto au = static_cast<AuLabel>(pick(rng));
            a.apply(au, MoveState::Walking, t, "s1");
            b.apply(au, MoveState::Walking, t, "s1");
            if (is_step(au)) expected_length += t.lookup("s1", au, MoveState::Walking);
            CHECK(a.heading() > -kPi);
            CHECK(a.heading() <= kPi);
        }
        REQUIRE(a.history().size() == a.k() + 1);
        for (std::size_t i = 0; i < a.history().size(); ++i) {
            CHECK(((b.history()[i] - a.history()[i]) - shifted.origin).norm() < 1e-12);
        }
        CHECK(a.path_length() == expected_length);
    }
}

TEST_CASE("two-stage gating") {
    const auto seg = any_segment();
    const auto au_model = constant_model(7, static_cast<int>(AuLabel::NormalStep));
    SUBCASE("stop skips the AU model") {
        const auto v = two_stage_classify(seg, constant_model(5, static_cast<int>(MoveState::Stop)), au_model);
        CHECK(v.move() == MoveState::Stop);
        CHECK_FALSE(v.au_label().has_value());
        CHECK(v.au_evals == 0);
        CHECK(v.state_evals == 1);
    }
    SUBCASE("running consults the AU model") {
        const auto v = two_stage_classify(seg, constant_model(5, static_cast<int>(MoveState::Running)), au_model);
        CHECK(v.move() == MoveState::Running);
        CHECK(v.au_label() == AuLabel::NormalStep);
        CHECK(v.au_evals == 1);
    }
    SUBCASE("a cached AU verdict is reused") {
        const auto cached = seqnet::classify(au_model, seg.samples);
        const auto v = two_stage_classify(seg, constant_model(5, static_cast<int>(MoveState::Walking)), au_model, &cached);
        CHECK(v.au_label() == AuLabel::NormalStep);
        CHECK(v.au_evals == 0);
    }
}

TEST_CASE("pipeline on an empty stream") {
    Models models{constant_model(5, 0), constant_model(7, 0)};
    const auto r = run_pipeline(SmoothedStream{}, models, walking_table(), {});
    CHECK(r.trajectory.empty());
    CHECK(r.latency.segment_evals == 0);
    CHECK(r.latency.decisions == 0);
}

TEST_CASE("pipeline bookkeeping") {
    synth::PathScript script = rectangle_script(5, 3);
    const auto trace = synth::generate(script);
    const auto s = smooth(trace.samples, 5, 50.0);
    const auto table = synth::make_table(synth::default_subjects());
    Models models{constant_model(5, static_cast<int>(MoveState::Walking)),
                  constant_model(7, static_cast<int>(AuLabel::NormalStep))};
    for (windowing::Strategy strategy : windowing::kAllStrategies) {
        CAPTURE(windowing::name(strategy));
        PipelineOptions o;
        o.strategy.strategy = strategy;
        const auto r = run_pipeline(s, models, table, o);
        std::size_t valid = 0;
        std::size_t evals = 0;
        for (const auto& rec : r.records) {
            valid += rec.outcome.valid() ? 1 : 0;
            evals += rec.outcome.evals_used;
        }
        CHECK(r.track.k() == valid);
        CHECK(r.trajectory.size() == valid);
        CHECK(r.latency.decisions == r.records.size());
        CHECK(r.latency.segment_evals == evals);
        CHECK(r.latency.smoothing_delay_samples == 4);
        CHECK(r.latency.smoothing_delay_ms == doctest::Approx(80.0));
        // Every AU is a normal walking step here, so the path is k steps long.
        CHECK(r.track.path_length() == doctest::Approx(0.7 * static_cast<double>(valid)));
    }
}

TEST_CASE("ground-truth replay of a closed rectangle") {
    const auto trace = synth::generate(rectangle_script(6, 3));
    const auto table = synth::make_table(synth::default_subjects());
    const auto r = replay_labels(trace.labels, table, {});
    CHECK(r.track.position().norm() < 1e-9);
    CHECK(r.track.path_length() == doctest::Approx(18 * 0.7).epsilon(1e-15));
    CHECK(r.latency.segment_evals == 0);
    CHECK(r.track.k() == trace.labels.size());
}

TEST_CASE("label alignment to the smoothed stream") {
    const std::vector<LabelRow> raw{{0, 10, AuLabel::Stop, MoveState::Stop},
                                    {10, 30, AuLabel::NormalStep, MoveState::Walking},
                                    {30, 33, AuLabel::ShortStep, MoveState::Walking}};
    // Window 5 moves rows back by 2; the last row falls past the stream end.
    const auto a = align_labels(raw, 5, 27);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == LabelRow{0, 8, AuLabel::Stop, MoveState::Stop});
    CHECK(a[1] == LabelRow{8, 27, AuLabel::NormalStep, MoveState::Walking});
    CHECK(align_labels(raw, 1, 40) == raw);
}

TEST_CASE("trajectory round trip") {
    std::vector<TrajectoryRow> rows{
        {1, Eigen::Vector2d(0.1 + 0.2, -1e-17), 1.5707963267948966, AuLabel::LeftTurn, MoveState::Walking, 6},
        {2, Eigen::Vector2d(3.0, 4.0), -3.0, std::nullopt, MoveState::Stop, 1},
        {3, Eigen::Vector2d(3.0, 4.0), -3.0, std::nullopt, std::nullopt, 0}};
    std::ostringstream out;
    emit_trajectory(out, rows);
    CHECK(out.str().rfind("k,x_m,y_m,heading_rad,au_label,move_state,evals\n", 0) == 0);
    std::istringstream in(out.str());
    const auto back = ingest_trajectory(in);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].k == rows[i].k);
        CHECK(back[i].position == rows[i].position);
        CHECK(back[i].heading == rows[i].heading);
        CHECK(back[i].au == rows[i].au);
        CHECK(back[i].move == rows[i].move);
        CHECK(back[i].evals == rows[i].evals);
    }
}

TEST_CASE("model directory checks shapes") {
    const auto dir = std::filesystem::temp_directory_path() / "odw_test_models";
    std::filesystem::create_directories(dir);
    Models good{seqnet::init_params(3, 6, 5, 1), seqnet::init_params(3, 6, 7, 2)};
    save_models(dir, good);
    const Models back = load_models(dir);
    CHECK(back.state == good.state);
    CHECK(back.au == good.au);

    Models swapped{good.au, good.state};
    save_models(dir, swapped);
    try {
        load_models(dir);
        FAIL("expected DimMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimMismatch);
    }
    std::filesystem::remove_all(dir);
}
