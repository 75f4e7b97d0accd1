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

// odw: generate, train, run and benchmark from the command line.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "odw/csv.hpp"
#include "odw/error.hpp"
#include "odw/experiment.hpp"
#include "odw/imu.hpp"
#include "odw/locator.hpp"
#include "odw/pdr.hpp"
#include "odw/seqnet.hpp"
#include "odw/synthgen.hpp"
#include "odw/windowing.hpp"

namespace fs = std::filesystem;
using namespace odw;

namespace {

constexpr std::uint64_t kDefaultSeed = 2026;
constexpr std::size_t kDefaultTraces = 40;

// Exit codes by failure class.
constexpr int kExitFailure = 1;
constexpr int kExitMissingFile = 3;
constexpr int kExitDimMismatch = 4;

fs::path data_root() {
    if (const char* env = std::getenv("ODW_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data";
}

// Flags shared by the commands that segment streams.
struct StreamFlags {
    std::string strategy = "fusion";
    std::optional<double> tau;
    double tau1 = windowing::FusionThresholds{}.tau1;
    double tau2 = windowing::FusionThresholds{}.tau2;
    std::size_t token_len = windowing::TokenConfig{}.token_len;
    std::size_t max_tokens = windowing::TokenConfig{}.max_tokens;
    std::size_t k = windowing::TokenConfig{}.k;
    std::size_t smooth_n = kDefaultSmoothN;
    std::optional<double> rate_hz;
    std::size_t jobs = 1;

    void attach(CLI::App& app, bool with_strategy) {
        if (with_strategy) {
            app.add_option("--strategy", strategy, "conventional|nlp|sp|fusion")
                ->check(CLI::IsMember({"conventional", "nlp", "sp", "fusion"}));
        }
        app.add_option("--tau", tau, "absolute step threshold (default: trace mean + 1.2)");
        app.add_option("--tau1", tau1, "fusion acceptance threshold")->check(CLI::Range(0.0, 1.0));
        app.add_option("--tau2", tau2, "fusion neighbour threshold")->check(CLI::Range(0.0, 1.0));
        app.add_option("--token-len", token_len, "samples per token")->check(CLI::PositiveNumber);
        app.add_option("--max-tokens", max_tokens, "tokens tried by nlp")
            ->check(CLI::PositiveNumber);
        app.add_option("--k", k, "neighbour tokens tried by fusion")->check(CLI::PositiveNumber);
        app.add_option("--smooth-n", smooth_n, "moving-average width")->check(CLI::PositiveNumber);
        app.add_option("--rate-hz", rate_hz, "sampling rate (default: inferred)")
            ->check(CLI::PositiveNumber);
        app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    }

    windowing::StrategyConfig config() const {
        windowing::StrategyConfig c;
        c.strategy = *windowing::parse_strategy(strategy);
        c.tokens.token_len = token_len;
        c.tokens.max_tokens = max_tokens;
        c.tokens.k = k;
        c.thresholds.tau1 = tau1;
        c.thresholds.tau2 = tau2;
        c.tokens.validate();
        c.thresholds.validate();
        return c;
    }
};

std::string read_file(const fs::path& path) {
    std::ifstream in = csv::open_input(path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Writes text and reads it back to confirm the artifact landed intact.
void write_text(const fs::path& path, const std::string& text) {
    {
        std::ofstream out = csv::open_output(path);
        out << text;
        out.flush();
        if (!out) {
            throw Error(ErrorCode::Io, "cannot write " + path.string());
        }
    }
    if (read_file(path) != text) {
        throw Error(ErrorCode::Io, "read-back mismatch for " + path.string());
    }
}

template <typename Emit>
void write_with(const fs::path& path, Emit emit) {
    std::ostringstream s;
    emit(s);
    write_text(path, s.str());
}

fs::path default_table(const fs::path& trace) {
    return trace.parent_path() / synth::kTableFile;
}

fs::path default_labels(const fs::path& trace) {
    fs::path p = trace;
    p.replace_extension(".labels.csv");
    return p;
}

// ---- gen ----

struct GenFlags {
    fs::path out;
    std::size_t traces = kDefaultTraces;
    std::uint64_t seed = kDefaultSeed;
    double rate_hz = kDefaultRateHz;
    fs::path script;
    std::string subject = "s1";
    std::optional<double> noise;
};

int cmd_gen(const GenFlags& f) {
    const fs::path out = f.out.empty() ? data_root() : f.out;
    fs::create_directories(out);
    if (f.script.empty()) {
        const synth::Suite suite = synth::make_benchmark_suite(f.traces, f.seed, f.rate_hz);
        synth::write_suite(out, suite);
        const auto manifest = synth::read_manifest(out / synth::kManifestFile);
        for (const auto& row : manifest) {
            read_trace(out / (row.name + ".csv"));
            read_labels(out / (row.name + ".labels.csv"));
        }
        locator::read_table(out / synth::kTableFile);
        std::cout << "wrote " << manifest.size() << " traces to " << out.string() << "\n";
        return 0;
    }
    synth::PathScript script;
    script.segments = synth::read_script(f.script);
    script.seed = f.seed;
    const auto subjects = synth::default_subjects();
    const auto it = std::find_if(subjects.begin(), subjects.end(),
                                 [&](const auto& s) { return s.id == f.subject; });
    if (it == subjects.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown subject " + f.subject);
    }
    script.subject = *it;
    if (f.noise) {
        script.noise_std = *f.noise;
        script.gyro_noise_std = *f.noise;
    }
    const synth::GeneratedTrace trace = synth::generate(script, f.rate_hz);
    const std::string stem = f.script.stem().string();
    write_with(out / (stem + ".csv"), [&](std::ostream& s) { emit_csv(s, trace.samples); });
    write_with(out / (stem + ".labels.csv"),
               [&](std::ostream& s) { emit_labels(s, trace.labels); });
    locator::write_table(out / synth::kTableFile, synth::make_table(subjects));
    read_trace(out / (stem + ".csv"));
    read_labels(out / (stem + ".labels.csv"));
    locator::read_table(out / synth::kTableFile);
    std::cout << "wrote " << trace.samples.size() << " samples to " << (out / (stem + ".csv")).string()
              << "\n";
    return 0;
}

// ---- train ----

struct TrainFlags {
    fs::path data;
    fs::path out;
    std::uint64_t seed = kDefaultSeed;
    std::optional<std::size_t> epochs;
    std::optional<long> hidden;
    std::optional<double> lr;
    StreamFlags stream;
};

experiment::TrainOptions train_options(std::uint64_t seed, std::size_t jobs) {
    experiment::TrainOptions o = experiment::default_train_options();
    o.au.seed ^= seed;
    o.state.seed ^= seed;
    o.data.seed ^= seed;
    o.jobs = std::max<std::size_t>(jobs, 1);
    return o;
}

void write_training_log(const fs::path& path, const experiment::TrainedModels& trained) {
    write_with(path, [&](std::ostream& s) {
        s << "epoch,au_loss,state_loss\n";
        const auto& a = trained.au_result.loss_history;
        const auto& b = trained.state_result.loss_history;
        for (std::size_t e = 0; e < std::max(a.size(), b.size()); ++e) {
            s << e + 1 << ',' << (e < a.size() ? csv::format(a[e]) : "-") << ','
              << (e < b.size() ? csv::format(b[e]) : "-") << '\n';
        }
    });
}

int cmd_train(const TrainFlags& f) {
    const fs::path data = f.data.empty() ? data_root() : f.data;
    const fs::path out = f.out.empty() ? data / "models" : f.out;
    const auto traces = experiment::load_suite(data, f.stream.smooth_n, f.stream.rate_hz,
                                               f.stream.jobs);
    const auto train = experiment::select(traces, synth::Split::Train);
    experiment::TrainOptions o = train_options(f.seed, f.stream.jobs);
    if (f.epochs) {
        o.au.epochs = o.state.epochs = *f.epochs;
    }
    if (f.hidden) {
        o.au.hidden = o.state.hidden = *f.hidden;
    }
    if (f.lr) {
        o.au.lr = o.state.lr = *f.lr;
    }
    const experiment::TrainedModels trained = experiment::train_models(train, o);
    fs::create_directories(out);
    locator::save_models(out, trained.models);
    write_training_log(out / "training_log.csv", trained);
    const locator::Models back = locator::load_models(out);
    if (!(back.au == trained.models.au) || !(back.state == trained.models.state)) {
        throw Error(ErrorCode::CorruptFile, "model read-back mismatch in " + out.string());
    }
    std::cout << "trained on " << train.size() << " traces (" << trained.au_windows
              << " AU windows), final loss au " << csv::format(trained.au_result.final_loss)
              << " state " << csv::format(trained.state_result.final_loss) << ", wrote "
              << out.string() << "\n";
    return 0;
}

// ---- run ----

struct RunFlags {
    fs::path trace;
    fs::path labels;
    fs::path models;
    fs::path table;
    fs::path out;
    std::string subject = "s1";
    bool ground_truth = false;
    StreamFlags stream;
};

int cmd_run(const RunFlags& f) {
    const fs::path out = f.out.empty() ? fs::path("run") : f.out;
    const auto samples = read_trace(f.trace);
    const double rate = f.stream.rate_hz.value_or(infer_rate_hz(samples));
    const SmoothedStream stream = smooth(samples, f.stream.smooth_n, rate);
    const locator::StepLengthTable table =
        locator::read_table(f.table.empty() ? default_table(f.trace) : f.table);

    locator::PipelineOptions po;
    po.strategy = f.stream.config();
    po.subject = f.subject;
    po.tau = f.stream.tau;

    const fs::path labels_path = f.labels.empty() ? default_labels(f.trace) : f.labels;
    std::optional<std::vector<LabelRow>> labels;
    if (f.ground_truth || fs::exists(labels_path)) {
        labels = read_labels(labels_path);
    }

    locator::PipelineResult result;
    if (f.ground_truth) {
        result = locator::replay_labels(*labels, table, po);
    } else {
        const fs::path models_dir = f.models.empty() ? data_root() / "models" : f.models;
        result = locator::run_pipeline(stream, locator::load_models(models_dir), table, po);
    }

    fs::create_directories(out);
    locator::write_trajectory(out / "trajectory.csv", result.trajectory);
    {
        std::ifstream in = csv::open_input(out / "trajectory.csv");
        locator::ingest_trajectory(in);
    }
    std::vector<windowing::SegmentationOutcome> outcomes;
    for (const auto& r : result.records) {
        outcomes.push_back(r.outcome);
    }
    write_with(out / "segments.csv",
               [&](std::ostream& s) { windowing::emit_segmentation_trace(s, outcomes); });

    std::ostringstream summary;
    locator::emit_latency(summary, result.latency);
    const Eigen::Vector2d end = result.track.position();
    summary << "final_x_m," << csv::format(end.x()) << "\nfinal_y_m," << csv::format(end.y())
            << "\nclosure_error_m," << csv::format((end - po.track.origin).norm()) << '\n';
    if (labels) {
        const auto truth = locator::replay_labels(*labels, table, po);
        summary << "endpoint_error_m,"
                << csv::format((end - truth.track.position()).norm()) << '\n';
    }
    write_text(out / "latency.csv", summary.str());
    std::cout << summary.str();
    return 0;
}

// ---- bench ----

struct BenchFlags {
    fs::path data;
    fs::path models;
    fs::path out;
    std::uint64_t seed = kDefaultSeed;
    std::size_t traces = kDefaultTraces;
    bool all_traces = false;
    StreamFlags stream;
};

int cmd_bench(const BenchFlags& f) {
    const fs::path out = f.out.empty() ? fs::path("bench") : f.out;
    std::vector<experiment::PreparedTrace> traces;
    locator::StepLengthTable table;
    if (f.data.empty()) {
        const synth::Suite suite = synth::make_benchmark_suite(f.traces, f.seed);
        traces = experiment::prepare_suite(suite, f.stream.smooth_n,
                                           f.stream.rate_hz.value_or(kDefaultRateHz),
                                           f.stream.jobs);
        table = suite.table;
    } else {
        traces = experiment::load_suite(f.data, f.stream.smooth_n, f.stream.rate_hz,
                                        f.stream.jobs);
        table = locator::read_table(f.data / synth::kTableFile);
    }

    locator::Models models;
    fs::create_directories(out);
    if (f.models.empty()) {
        const auto trained = experiment::train_models(
            experiment::select(traces, synth::Split::Train), train_options(f.seed, f.stream.jobs));
        models = trained.models;
        locator::save_models(out / "models", models);
        write_training_log(out / "models" / "training_log.csv", trained);
    } else {
        models = locator::load_models(f.models);
    }

    const auto evaluated =
        f.all_traces ? traces : experiment::select(traces, synth::Split::Test);
    experiment::BenchOptions bo;
    bo.strategy = f.stream.config();
    bo.tau = f.stream.tau;
    bo.jobs = f.stream.jobs;
    const experiment::BenchReport report = experiment::run_bench(evaluated, models, table, bo);

    write_with(out / "bench.csv", [&](std::ostream& s) { experiment::emit_bench_csv(s, report); });
    write_with(out / "bench_counts.csv",
               [&](std::ostream& s) { experiment::emit_bench_csv(s, report, false); });
    write_with(out / "bench.txt", [&](std::ostream& s) { experiment::emit_bench_table(s, report); });
    write_with(out / "confusion_ground_truth_au.csv",
               [&](std::ostream& s) { experiment::emit_confusion(s, report.ground_truth.au); });
    write_with(out / "confusion_ground_truth_state.csv",
               [&](std::ostream& s) { experiment::emit_confusion(s, report.ground_truth.state); });
    for (const auto& row : report.rows) {
        const std::string stem = "confusion_" + std::string(windowing::name(row.strategy));
        write_with(out / (stem + "_au.csv"),
                   [&](std::ostream& s) { experiment::emit_confusion(s, row.au_cm); });
        write_with(out / (stem + "_state.csv"),
                   [&](std::ostream& s) { experiment::emit_confusion(s, row.state_cm); });
    }
    experiment::emit_bench_table(std::cout, report);
    return 0;
}

// ---- steps ----

struct StepsFlags {
    fs::path trace;
    fs::path out;
    StreamFlags stream;
};

int cmd_steps(const StepsFlags& f) {
    const auto samples = read_trace(f.trace);
    const double rate = f.stream.rate_hz.value_or(infer_rate_hz(samples));
    const SmoothedStream stream = smooth(samples, f.stream.smooth_n, rate);
    const Axis axis = pdr::select_step_axis(stream);
    const double tau = f.stream.tau.value_or(pdr::default_threshold(stream, axis));
    const auto steps = pdr::detect_steps(stream, axis, tau);
    std::vector<pdr::HeadingSolution> headings;
    headings.reserve(steps.size());
    for (const auto& s : steps) {
        headings.push_back(pdr::estimate_heading(stream[s.peak_idx]));
    }
    const fs::path out = f.out.empty() ? fs::path("steps") : f.out;
    fs::create_directories(out);
    write_with(out / "steps.csv",
               [&](std::ostream& s) { pdr::emit_step_dump(s, steps, headings); });
    std::cout << steps.size() << " steps on axis " << axis_name(axis) << ", tau "
              << csv::format(tau) << "\n";
    return 0;
}

int exit_code(const Error& e) {
    switch (e.code()) {
    case ErrorCode::Io:
        return kExitMissingFile;
    case ErrorCode::DimMismatch:
        return kExitDimMismatch;
    default:
        return kExitFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online dynamic windowing for inertial indoor localization"};
    app.require_subcommand(1);

    GenFlags gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic suite or one scripted trace");
    gen_cmd->add_option("--out", gen.out, "output directory (default: $ODW_DATA_DIR or ./data)");
    gen_cmd->add_option("--traces", gen.traces, "suite size")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--rate-hz", gen.rate_hz, "sampling rate")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--script", gen.script, "render this script instead of a suite")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--subject", gen.subject, "subject profile for --script");
    gen_cmd->add_option("--noise", gen.noise, "noise standard deviation for --script")
        ->check(CLI::NonNegativeNumber);

    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "train both classifiers on a suite");
    train_cmd->add_option("--data", train.data, "suite directory (default: $ODW_DATA_DIR)");
    train_cmd->add_option("--out", train.out, "model directory (default: <data>/models)");
    train_cmd->add_option("--seed", train.seed, "training seed");
    train_cmd->add_option("--epochs", train.epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--hidden", train.hidden)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
    train.stream.attach(*train_cmd, false);

    RunFlags run;
    auto* run_cmd = app.add_subcommand("run", "localize one trace");
    run_cmd->add_option("--trace", run.trace, "trace CSV")->required();
    run_cmd->add_option("--labels", run.labels, "label sidecar (default: <trace>.labels.csv)");
    run_cmd->add_option("--models", run.models, "model directory (default: $ODW_DATA_DIR/models)");
    run_cmd->add_option("--table", run.table, "step-length table (default: next to the trace)");
    run_cmd->add_option("--subject", run.subject, "subject id for step lengths");
    run_cmd->add_option("--out", run.out, "output directory (default: ./run)");
    run_cmd->add_flag("--ground-truth-labels", run.ground_truth,
                      "replay the sidecar instead of classifying");
    run.stream.attach(*run_cmd, true);

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "compare all four windowing strategies");
    bench_cmd->add_option("--data", bench.data, "suite directory (default: built-in suite)");
    bench_cmd->add_option("--models", bench.models, "model directory (default: train afresh)");
    bench_cmd->add_option("--out", bench.out, "output directory (default: ./bench)");
    bench_cmd->add_option("--seed", bench.seed, "suite and training seed");
    bench_cmd->add_option("--traces", bench.traces, "built-in suite size")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_flag("--all-traces", bench.all_traces, "evaluate both splits");
    bench.stream.attach(*bench_cmd, false);

    StepsFlags steps;
    auto* steps_cmd = app.add_subcommand("steps", "dump detected steps and headings");
    steps_cmd->add_option("--trace", steps.trace, "trace CSV")->required();
    steps_cmd->add_option("--out", steps.out, "output directory (default: ./steps)");
    steps.stream.attach(*steps_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "odw: bad flag: " << e.what() << "\n";
        return e.get_exit_code() == 0 ? kExitFailure : e.get_exit_code();
    }

    try {
        if (*gen_cmd) {
            return cmd_gen(gen);
        }
        if (*train_cmd) {
            return cmd_train(train);
        }
        if (*run_cmd) {
            return cmd_run(run);
        }
        if (*bench_cmd) {
            return cmd_bench(bench);
        }
        return cmd_steps(steps);
    } catch (const Error& e) {
        std::cerr << "odw: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "odw: " << e.what() << "\n";
        return kExitFailure;
    }
}
