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

#pragma once

// Training and benchmarking over a labeled synthetic suite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odw/imu.hpp"
#include "odw/locator.hpp"
#include "odw/seqnet.hpp"
#include "odw/synthgen.hpp"
#include "odw/windowing.hpp"

namespace odw::experiment {

/// Runs fn(i) for i in [0, n) on up to jobs threads. Exceptions are rethrown
/// on the calling thread (the one from the lowest index wins).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// A trace smoothed once, with its sidecar mapped onto the smoothed stream.
struct PreparedTrace {
    std::string name;
    std::string subject;
    synth::Split split = synth::Split::Train;
    SmoothedStream stream;
    std::vector<LabelRow> labels;     // smoothed indices
    std::vector<LabelRow> raw_labels; // as generated
};

PreparedTrace prepare(std::string name, std::string subject, synth::Split split,
                      std::span<const ImuSample> samples, std::vector<LabelRow> raw_labels,
                      std::size_t smooth_n, double rate_hz);

std::vector<PreparedTrace> prepare_suite(const synth::Suite& suite, std::size_t smooth_n,
                                         double rate_hz, std::size_t jobs);

/// Reads a suite written by synth::write_suite. The sampling rate is inferred
/// from each trace when rate_hz is unset.
std::vector<PreparedTrace> load_suite(const std::filesystem::path& dir, std::size_t smooth_n,
                                      std::optional<double> rate_hz, std::size_t jobs);

/// Traces of one split.
std::vector<PreparedTrace> select(std::span<const PreparedTrace> traces, synth::Split split);

struct DatasetOptions {
    /// Extra copies of every labeled window with both ends moved by up to
    /// this many samples.
    std::size_t jitter = 3;
    std::size_t jitter_copies = 1;
    std::uint64_t seed = 11;
};

std::vector<seqnet::LabeledWindow> build_windows(std::span<const PreparedTrace> traces,
                                                 LabelFamily family,
                                                 const DatasetOptions& options = {});

struct TrainOptions {
    seqnet::TrainHyper au;
    seqnet::TrainHyper state;
    DatasetOptions data;
    std::size_t jobs = 2;
};

/// Defaults tuned for the built-in suite.
TrainOptions default_train_options();

struct TrainedModels {
    locator::Models models;
    seqnet::TrainResult au_result;
    seqnet::TrainResult state_result;
    std::size_t au_windows = 0;
    std::size_t state_windows = 0;
};

TrainedModels train_models(std::span<const PreparedTrace> traces, const TrainOptions& options);

/// Rows are true labels, columns predictions.
struct ConfusionMatrix {
    LabelFamily family = LabelFamily::ActionUnit;
    Eigen::MatrixXi counts;

    explicit ConfusionMatrix(LabelFamily f = LabelFamily::ActionUnit);
    void add(int truth, int predicted);
    long total() const;
    double accuracy() const; // trace / total, 0 when empty
};

void emit_confusion(std::ostream& sink, const ConfusionMatrix& cm);

struct GroundTruthEvaluation {
    ConfusionMatrix au{LabelFamily::ActionUnit};
    ConfusionMatrix state{LabelFamily::MoveState};
};

/// Classifies every labeled window directly with the matching model.
GroundTruthEvaluation evaluate_ground_truth(std::span<const PreparedTrace> traces,
                                            const locator::Models& models, std::size_t jobs);

struct TraceOutcome {
    locator::PipelineResult result;
    Eigen::Vector2d truth_endpoint = Eigen::Vector2d::Zero();
    double endpoint_error = 0.0;
};

/// Pipeline over one prepared trace plus its ground-truth endpoint.
TraceOutcome run_trace(const PreparedTrace& trace, const locator::Models& models,
                       const locator::StepLengthTable& table,
                       const locator::PipelineOptions& options);

struct StrategyRow {
    windowing::Strategy strategy = windowing::Strategy::Fusion;
    std::size_t decisions = 0;
    std::size_t aus_detected = 0;
    std::size_t segment_evals = 0;
    double evals_per_au = 0.0;
    double wall_ns_per_au = 0.0;
    double au_accuracy = 0.0;
    double state_accuracy = 0.0;
    double endpoint_error_m = 0.0; // mean over traces
    ConfusionMatrix au_cm{LabelFamily::ActionUnit};
    ConfusionMatrix state_cm{LabelFamily::MoveState};
};

struct BenchOptions {
    windowing::StrategyConfig strategy; // the strategy field is overridden per row
    std::size_t stop_tail = 60;
    std::optional<double> tau;
    double tau_offset = pdr::kDefaultThresholdOffset;
    std::size_t jobs = 1;
};

struct BenchReport {
    std::vector<StrategyRow> rows;
    GroundTruthEvaluation ground_truth;
    std::size_t traces = 0;
};

/// Accuracy of one pipeline run: each valid AU is scored against the labeled
/// window it overlaps most.
void score_run(const locator::PipelineResult& result, std::span<const LabelRow> labels,
               ConfusionMatrix& au_cm, ConfusionMatrix& state_cm);

StrategyRow run_strategy(std::span<const PreparedTrace> traces, const locator::Models& models,
                         const locator::StepLengthTable& table, const BenchOptions& options,
                         windowing::Strategy strategy);

BenchReport run_bench(std::span<const PreparedTrace> traces, const locator::Models& models,
                      const locator::StepLengthTable& table, const BenchOptions& options);

/// CSV, one row per strategy. The wall-time column can be left out for
/// byte-level comparisons.
void emit_bench_csv(std::ostream& sink, const BenchReport& report, bool with_wall = true);
void emit_bench_table(std::ostream& sink, const BenchReport& report);

} // namespace odw::experiment
