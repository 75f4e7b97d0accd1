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

#include <atomic>
#include <sstream>
#include <stdexcept>

#include "odw/error.hpp"
#include "odw/experiment.hpp"

using namespace odw;
using namespace odw::experiment;

namespace {

struct Fixture {
    synth::Suite suite;
    std::vector<PreparedTrace> traces;
    TrainedModels trained;

    Fixture() : suite(synth::make_benchmark_suite(10, 17)) {
        traces = prepare_suite(suite, kDefaultSmoothN, kDefaultRateHz, 2);
        TrainOptions o = default_train_options();
        o.au.epochs = o.state.epochs = 12;
        trained = train_models(select(traces, synth::Split::Train), o);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

std::string bench_bytes(const BenchReport& r) {
    std::ostringstream out;
    emit_bench_csv(out, r, false);
    for (const auto& row : r.rows) {
        emit_confusion(out, row.au_cm);
        emit_confusion(out, row.state_cm);
    }
    emit_confusion(out, r.ground_truth.au);
    emit_confusion(out, r.ground_truth.state);
    return out.str();
}

} // namespace

TEST_CASE("parallel_for visits every index once") {
    for (std::size_t jobs : {1u, 3u, 16u}) {
        std::vector<std::atomic<int>> hits(50);
        parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
        for (const auto& h : hits) CHECK(h.load() == 1);
    }
    CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t i) {
                        if (i == 7) throw std::runtime_error("boom");
                    }),
                    std::runtime_error);
    parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("prepared traces line up with the smoothed stream") {
    const auto& f = fixture();
    for (std::size_t i = 0; i < f.traces.size(); ++i) {
        const auto& t = f.traces[i];
        CHECK(t.stream.size() + kDefaultSmoothN - 1 == f.suite.traces[i].trace.samples.size());
        REQUIRE_FALSE(t.labels.empty());
        CHECK(t.labels.back().end_idx <= t.stream.size());
        CHECK(t.labels.size() == t.raw_labels.size());
    }
    CHECK(select(f.traces, synth::Split::Train).size() == 7);
    CHECK(select(f.traces, synth::Split::Test).size() == 3);
}

TEST_CASE("window datasets") {
    const auto& f = fixture();
    const auto train = select(f.traces, synth::Split::Train);
    std::size_t rows = 0;
    for (const auto& t : train) rows += t.labels.size();
    DatasetOptions plain;
    plain.jitter = 0;
    const auto exact = build_windows(train, LabelFamily::ActionUnit, plain);
    CHECK(exact.size() == rows);
    CHECK(exact[0].samples.cols() == static_cast<Eigen::Index>(train[0].labels[0].length()));
    DatasetOptions twice;
    twice.jitter_copies = 2;
    const auto jittered = build_windows(train, LabelFamily::MoveState, twice);
    CHECK(jittered.size() == 3 * rows);
    CHECK(jittered[1].label == static_cast<int>(train[0].labels[0].move));
    CHECK(f.trained.au_windows == 2 * rows);
}

TEST_CASE("confusion matrices") {
    ConfusionMatrix cm(LabelFamily::MoveState);
    CHECK(cm.counts.rows() == 5);
    CHECK(cm.accuracy() == 0.0);
    cm.add(0, 0);
    cm.add(0, 1);
    cm.add(2, 2);
    cm.add(4, 4);
    CHECK(cm.total() == 4);
    CHECK(cm.accuracy() == 0.75);
    std::ostringstream out;
    emit_confusion(out, cm);
    CHECK(out.str().rfind("truth\\predicted,Walking,Running,Stop,DownStairs,UpStairs\nWalking,1,1,0,0,0\n", 0) == 0);
}

TEST_CASE("ground-truth evaluation rows sum to label counts") {
    const auto& f = fixture();
    const auto test = select(f.traces, synth::Split::Test);
    const auto gt = evaluate_ground_truth(test, f.trained.models, 2);
    Eigen::VectorXi au_counts = Eigen::VectorXi::Zero(kAuCount);
    Eigen::VectorXi state_counts = Eigen::VectorXi::Zero(kMoveStateCount);
    for (const auto& t : test) {
        for (const auto& r : t.labels) {
            au_counts[static_cast<int>(r.au)]++;
            state_counts[static_cast<int>(r.move)]++;
        }
    }
    CHECK(gt.au.counts.rowwise().sum() == au_counts);
    CHECK(gt.state.counts.rowwise().sum() == state_counts);
    CHECK(gt.au.accuracy() == doctest::Approx(static_cast<double>(gt.au.counts.trace()) / gt.au.total()));
}

TEST_CASE("trained models recognise walking normal steps") {
    const auto& f = fixture();
    std::size_t total = 0;
    std::size_t right = 0;
    for (const auto& t : select(f.traces, synth::Split::Test)) {
        for (const auto& r : t.labels) {
            if (r.au != AuLabel::NormalStep || r.move != MoveState::Walking) continue;
            const auto seg = windowing::make_segment(t.stream, r.start_idx, r.end_idx, windowing::Strategy::Sp);
            const auto v = locator::two_stage_classify(seg, f.trained.models.state, f.trained.models.au);
            ++total;
            right += v.move() == MoveState::Walking && v.au_label() == AuLabel::NormalStep ? 1 : 0;
        }
    }
    REQUIRE(total > 20);
    CHECK(static_cast<double>(right) >= 0.9 * static_cast<double>(total));
}

TEST_CASE("scoring matches each AU to its best-overlapping label") {
    std::vector<LabelRow> truth{{0, 10, AuLabel::Stop, MoveState::Stop},
                                {10, 20, AuLabel::LongStep, MoveState::Walking},
                                {20, 30, AuLabel::LeftTurn, MoveState::Walking}};
    locator::PipelineResult r;
    const auto add = [&](std::size_t s, std::size_t e, AuLabel au, MoveState move) {
        locator::AuRecord rec;
        windowing::Segment seg;
        seg.start_idx = s;
        seg.end_idx = e;
        rec.outcome.segment = seg;
        seqnet::ClassifierVerdict v;
        v.family = LabelFamily::ActionUnit;
        v.label = static_cast<int>(au);
        v.confidence = Eigen::VectorXd::Zero(7);
        rec.outcome.verdict = v;
        rec.move = move;
        r.records.push_back(rec);
    };
    add(0, 9, AuLabel::Stop, MoveState::Stop);
    add(12, 22, AuLabel::NormalStep, MoveState::Walking); // mostly the long step
    add(21, 30, AuLabel::LeftTurn, MoveState::Running);
    locator::AuRecord rejected;
    rejected.outcome.cursor = 5;
    rejected.outcome.next_cursor = 15;
    r.records.push_back(rejected);

    ConfusionMatrix au(LabelFamily::ActionUnit);
    ConfusionMatrix state(LabelFamily::MoveState);
    score_run(r, truth, au, state);
    CHECK(au.total() == 3);
    CHECK(au.counts(static_cast<int>(AuLabel::LongStep), static_cast<int>(AuLabel::NormalStep)) == 1);
    CHECK(au.accuracy() == doctest::Approx(2.0 / 3.0));
    CHECK(state.counts(static_cast<int>(MoveState::Walking), static_cast<int>(MoveState::Running)) == 1);
}

TEST_CASE("bench report: rows, receipts, determinism") {
    const auto& f = fixture();
    const auto test = select(f.traces, synth::Split::Test);
    BenchOptions o;
    o.jobs = 2;
    const BenchReport a = run_bench(test, f.trained.models, f.suite.table, o);
    REQUIRE(a.rows.size() == 4);
    CHECK(a.traces == test.size());
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.rows[i].strategy == windowing::kAllStrategies[i]);
    CHECK(a.rows[0].evals_per_au == 41.0);
    CHECK(a.rows[2].evals_per_au == 1.0);
    CHECK(a.rows[1].evals_per_au <= 6.0);
    CHECK(a.rows[3].evals_per_au >= 1.0);
    CHECK(a.rows[3].evals_per_au <= 6.0);

    o.jobs = 1;
    const BenchReport b = run_bench(test, f.trained.models, f.suite.table, o);
    CHECK(bench_bytes(a) == bench_bytes(b));

    std::ostringstream with_wall;
    emit_bench_csv(with_wall, a);
    CHECK(with_wall.str().rfind("strategy,evals_per_au,wall_ns_per_au,", 0) == 0);
    std::ostringstream table;
    emit_bench_table(table, a);
    CHECK(table.str().find("fusion") != std::string::npos);
}

TEST_CASE("endpoint error of a ground-truth replay is zero") {
    const auto& f = fixture();
    const auto& t = f.traces[0];
    const auto replay = locator::replay_labels(t.raw_labels, f.suite.table, [&] {
        locator::PipelineOptions o;
        o.subject = t.subject;
        return o;
    }());
    const auto outcome = run_trace(t, f.trained.models, f.suite.table, {});
    CHECK(outcome.truth_endpoint == replay.track.position());
    CHECK(outcome.endpoint_error == doctest::Approx((outcome.result.track.position() - replay.track.position()).norm()));
}

TEST_CASE("suite loads back from disk") {
    const auto dir = std::filesystem::temp_directory_path() / "odw_test_experiment_suite";
    std::filesystem::remove_all(dir);
    const auto& f = fixture();
    synth::write_suite(dir, f.suite);
    const auto loaded = load_suite(dir, kDefaultSmoothN, std::nullopt, 2);
    REQUIRE(loaded.size() == f.traces.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].name == f.traces[i].name);
        CHECK(loaded[i].subject == f.traces[i].subject);
        CHECK(loaded[i].labels == f.traces[i].labels);
        CHECK(loaded[i].stream.features() == f.traces[i].stream.features());
    }
    std::filesystem::remove_all(dir);
}
