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

#include "odw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "odw/csv.hpp"
#include "odw/error.hpp"
#include "odw/pdr.hpp"

namespace odw::experiment {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (std::thread& th : pool) {
        th.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

PreparedTrace prepare(std::string name, std::string subject, synth::Split split,
                      std::span<const ImuSample> samples, std::vector<LabelRow> raw_labels,
                      std::size_t smooth_n, double rate_hz) {
    PreparedTrace t;
    t.name = std::move(name);
    t.subject = std::move(subject);
    t.split = split;
    t.stream = smooth(samples, smooth_n, rate_hz);
    t.labels = locator::align_labels(raw_labels, smooth_n, t.stream.size());
    t.raw_labels = std::move(raw_labels);
    return t;
}

std::vector<PreparedTrace> prepare_suite(const synth::Suite& suite, std::size_t smooth_n,
                                         double rate_hz, std::size_t jobs) {
    std::vector<PreparedTrace> out(suite.traces.size());
    parallel_for(out.size(), jobs, [&](std::size_t i) {
        const synth::SuiteTrace& t = suite.traces[i];
        out[i] = prepare(t.name, t.script.subject.id, t.split, t.trace.samples, t.trace.labels,
                         smooth_n, rate_hz);
    });
    return out;
}

std::vector<PreparedTrace> load_suite(const std::filesystem::path& dir, std::size_t smooth_n,
                                      std::optional<double> rate_hz, std::size_t jobs) {
    const auto manifest = synth::read_manifest(dir / synth::kManifestFile);
    std::vector<PreparedTrace> out(manifest.size());
    parallel_for(out.size(), jobs, [&](std::size_t i) {
        const synth::ManifestRow& row = manifest[i];
        const auto samples = read_trace(dir / (row.name + ".csv"));
        auto labels = read_labels(dir / (row.name + ".labels.csv"));
        const double rate = rate_hz.value_or(infer_rate_hz(samples));
        out[i] = prepare(row.name, row.subject, row.split, samples, std::move(labels), smooth_n,
                         rate);
    });
    return out;
}

std::vector<PreparedTrace> select(std::span<const PreparedTrace> traces, synth::Split split) {
    std::vector<PreparedTrace> out;
    for (const PreparedTrace& t : traces) {
        if (t.split == split) {
            out.push_back(t);
        }
    }
    return out;
}

std::vector<seqnet::LabeledWindow> build_windows(std::span<const PreparedTrace> traces,
                                                 LabelFamily family,
                                                 const DatasetOptions& options) {
    std::vector<seqnet::LabeledWindow> out;
    std::mt19937_64 rng(options.seed);
    const auto jitter = static_cast<long>(options.jitter);
    std::uniform_int_distribution<long> shift(-jitter, jitter);
    for (const PreparedTrace& t : traces) {
        const auto n = static_cast<long>(t.stream.size());
        const FeatureMatrix& x = t.stream.features();
        for (const LabelRow& row : t.labels) {
            const int label = family == LabelFamily::ActionUnit ? static_cast<int>(row.au)
                                                                : static_cast<int>(row.move);
            const auto add = [&](long start, long end) {
                start = std::clamp(start, 0L, n - 1);
                end = std::clamp(end, start + 1, n);
                out.push_back(seqnet::LabeledWindow{x.middleCols(start, end - start), family, label});
            };
            const auto s = static_cast<long>(row.start_idx);
            const auto e = static_cast<long>(row.end_idx);
            add(s, e);
            for (std::size_t c = 0; c < options.jitter_copies && jitter > 0; ++c) {
                const long ds = shift(rng);
                const long de = shift(rng);
                add(s + ds, e + de);
            }
        }
    }
    return out;
}

TrainOptions default_train_options() {
    TrainOptions o;
    o.au.hidden = 16;
    o.au.epochs = 30;
    o.au.lr = 0.02;
    o.au.seed = 7;
    o.au.batch_size = 1;
    o.state = o.au;
    o.state.seed = 8;
    return o;
}

TrainedModels train_models(std::span<const PreparedTrace> traces, const TrainOptions& options) {
    TrainedModels out;
    const auto au_windows = build_windows(traces, LabelFamily::ActionUnit, options.data);
    DatasetOptions state_data = options.data;
    state_data.seed += 1;
    const auto state_windows = build_windows(traces, LabelFamily::MoveState, state_data);
    out.au_windows = au_windows.size();
    out.state_windows = state_windows.size();
    parallel_for(2, options.jobs, [&](std::size_t which) {
        if (which == 0) {
            out.au_result = seqnet::train(au_windows, options.au);
        } else {
            out.state_result = seqnet::train(state_windows, options.state);
        }
    });
    out.models.au = out.au_result.params;
    out.models.state = out.state_result.params;
    return out;
}

ConfusionMatrix::ConfusionMatrix(LabelFamily f)
    : family(f), counts(Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(class_count(f)),
                                              static_cast<Eigen::Index>(class_count(f)))) {}

void ConfusionMatrix::add(int truth, int predicted) { counts(truth, predicted) += 1; }

long ConfusionMatrix::total() const { return counts.sum(); }

double ConfusionMatrix::accuracy() const {
    const long n = total();
    return n == 0 ? 0.0 : static_cast<double>(counts.trace()) / static_cast<double>(n);
}

namespace {

std::string_view class_name(LabelFamily family, Eigen::Index i) {
    return family == LabelFamily::ActionUnit ? name(static_cast<AuLabel>(i))
                                             : name(static_cast<MoveState>(i));
}

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

} // namespace

void emit_confusion(std::ostream& sink, const ConfusionMatrix& cm) {
    sink << "truth\\predicted";
    for (Eigen::Index j = 0; j < cm.counts.cols(); ++j) {
        sink << ',' << class_name(cm.family, j);
    }
    sink << '\n';
    for (Eigen::Index i = 0; i < cm.counts.rows(); ++i) {
        sink << class_name(cm.family, i);
        for (Eigen::Index j = 0; j < cm.counts.cols(); ++j) {
            sink << ',' << cm.counts(i, j);
        }
        sink << '\n';
    }
}

GroundTruthEvaluation evaluate_ground_truth(std::span<const PreparedTrace> traces,
                                            const locator::Models& models, std::size_t jobs) {
    std::vector<GroundTruthEvaluation> parts(traces.size());
    parallel_for(traces.size(), jobs, [&](std::size_t i) {
        const PreparedTrace& t = traces[i];
        for (const LabelRow& row : t.labels) {
            const auto window = t.stream.features().middleCols(
                static_cast<Eigen::Index>(row.start_idx), static_cast<Eigen::Index>(row.length()));
            parts[i].au.add(static_cast<int>(row.au), seqnet::classify(models.au, window).label);
            parts[i].state.add(static_cast<int>(row.move),
                               seqnet::classify(models.state, window).label);
        }
    });
    GroundTruthEvaluation total;
    for (const GroundTruthEvaluation& p : parts) {
        total.au.counts += p.au.counts;
        total.state.counts += p.state.counts;
    }
    return total;
}

TraceOutcome run_trace(const PreparedTrace& trace, const locator::Models& models,
                       const locator::StepLengthTable& table,
                       const locator::PipelineOptions& options) {
    locator::PipelineOptions o = options;
    o.subject = trace.subject;
    TraceOutcome out;
    out.result = locator::run_pipeline(trace.stream, models, table, o);
    const auto truth = locator::replay_labels(trace.raw_labels, table, o);
    out.truth_endpoint = truth.track.position();
    out.endpoint_error = (out.result.track.position() - out.truth_endpoint).norm();
    return out;
}

void score_run(const locator::PipelineResult& result, std::span<const LabelRow> labels,
               ConfusionMatrix& au_cm, ConfusionMatrix& state_cm) {
    for (const locator::AuRecord& r : result.records) {
        if (!r.outcome.valid()) {
            continue;
        }
        const std::size_t s = r.start_idx();
        const std::size_t e = r.end_idx();
        const LabelRow* best = nullptr;
        std::size_t best_overlap = 0;
        for (const LabelRow& row : labels) {
            const std::size_t lo = std::max(s, row.start_idx);
            const std::size_t hi = std::min(e, row.end_idx);
            if (hi > lo && hi - lo > best_overlap) {
                best_overlap = hi - lo;
                best = &row;
            }
        }
        if (best == nullptr) {
            continue;
        }
        // The AU named by the segmentation verdict; gating only affects displacement.
        AuLabel au = r.au.value_or(AuLabel::Stop);
        if (r.outcome.verdict && r.outcome.verdict->family == LabelFamily::ActionUnit) {
            au = r.outcome.verdict->au();
        }
        au_cm.add(static_cast<int>(best->au), static_cast<int>(au));
        if (r.move) {
            state_cm.add(static_cast<int>(best->move), static_cast<int>(*r.move));
        }
    }
}

StrategyRow run_strategy(std::span<const PreparedTrace> traces, const locator::Models& models,
                         const locator::StepLengthTable& table, const BenchOptions& options,
                         windowing::Strategy strategy) {
    locator::PipelineOptions po;
    po.strategy = options.strategy;
    po.strategy.strategy = strategy;
    po.stop_tail = options.stop_tail;
    po.tau = options.tau;
    po.tau_offset = options.tau_offset;

    std::vector<TraceOutcome> outcomes(traces.size());
    parallel_for(traces.size(), options.jobs, [&](std::size_t i) {
        outcomes[i] = run_trace(traces[i], models, table, po);
    });

    StrategyRow row;
    row.strategy = strategy;
    std::chrono::nanoseconds wall{0};
    double error_sum = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const locator::LatencyReport& lat = outcomes[i].result.latency;
        row.decisions += lat.decisions;
        row.aus_detected += lat.aus;
        row.segment_evals += lat.segment_evals;
        wall += lat.wall;
        error_sum += outcomes[i].endpoint_error;
        score_run(outcomes[i].result, traces[i].labels, row.au_cm, row.state_cm);
    }
    if (row.decisions > 0) {
        row.evals_per_au =
            static_cast<double>(row.segment_evals) / static_cast<double>(row.decisions);
        row.wall_ns_per_au = static_cast<double>(wall.count()) / static_cast<double>(row.decisions);
    }
    row.au_accuracy = row.au_cm.accuracy();
    row.state_accuracy = row.state_cm.accuracy();
    row.endpoint_error_m = traces.empty() ? 0.0 : error_sum / static_cast<double>(traces.size());
    return row;
}

BenchReport run_bench(std::span<const PreparedTrace> traces, const locator::Models& models,
                      const locator::StepLengthTable& table, const BenchOptions& options) {
    BenchReport report;
    report.traces = traces.size();
    for (windowing::Strategy s : windowing::kAllStrategies) {
        report.rows.push_back(run_strategy(traces, models, table, options, s));
    }
    report.ground_truth = evaluate_ground_truth(traces, models, options.jobs);
    return report;
}

void emit_bench_csv(std::ostream& sink, const BenchReport& report, bool with_wall) {
    sink << "strategy,evals_per_au";
    if (with_wall) {
        sink << ",wall_ns_per_au";
    }
    sink << ",au_accuracy,state_accuracy,endpoint_error_m,aus_detected,decisions,total_evals\n";
    for (const StrategyRow& r : report.rows) {
        sink << windowing::name(r.strategy) << ',' << csv::format(r.evals_per_au);
        if (with_wall) {
            sink << ',' << csv::format(r.wall_ns_per_au);
        }
        sink << ',' << csv::format(r.au_accuracy) << ',' << csv::format(r.state_accuracy) << ','
             << csv::format(r.endpoint_error_m) << ',' << r.aus_detected << ',' << r.decisions
             << ',' << r.segment_evals << '\n';
    }
}

void emit_bench_table(std::ostream& sink, const BenchReport& report) {
    sink << "traces: " << report.traces << "\n";
    sink << "ground-truth segmentation: AU accuracy " << fixed(report.ground_truth.au.accuracy(), 4)
         << ", state accuracy " << fixed(report.ground_truth.state.accuracy(), 4) << "\n\n";
    sink << std::left << std::setw(14) << "strategy" << std::right << std::setw(10) << "evals/AU"
         << std::setw(14) << "wall-ns/AU" << std::setw(10) << "AU acc" << std::setw(10)
         << "state acc" << std::setw(12) << "endpoint m" << std::setw(8) << "AUs" << '\n';
    for (const StrategyRow& r : report.rows) {
        sink << std::left << std::setw(14) << windowing::name(r.strategy) << std::right
             << std::setw(10) << fixed(r.evals_per_au, 3) << std::setw(14)
             << fixed(r.wall_ns_per_au, 0) << std::setw(10) << fixed(r.au_accuracy, 4)
             << std::setw(10) << fixed(r.state_accuracy, 4) << std::setw(12)
             << fixed(r.endpoint_error_m, 3) << std::setw(8) << r.aus_detected << '\n';
    }
}

} // namespace odw::experiment
