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

#include "odw/locator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>

#include "odw/csv.hpp"
#include "odw/error.hpp"

namespace odw::locator {

namespace {

using clock = std::chrono::steady_clock;

constexpr std::string_view kTableHeader = "subject,step_type,move_state,length_m";
constexpr std::string_view kTrajectoryHeader = "k,x_m,y_m,heading_rad,au_label,move_state,evals";

std::string key_text(std::string_view subject, AuLabel step, MoveState move) {
    return std::string(subject) + "/" + std::string(name(step)) + "/" + std::string(name(move));
}

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(),
                       [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

} // namespace

void StepLengthTable::set(const std::string& subject, AuLabel step, MoveState move,
                          double length_m) {
    if (!is_step(step)) {
        throw Error(ErrorCode::InvalidArgument,
                    "step-length entries need a step label, got " + std::string(name(step)));
    }
    if (!(length_m > 0.0) || !std::isfinite(length_m)) {
        throw Error(ErrorCode::InvalidArgument, "step length must be positive and finite");
    }
    entries_[Key{subject, static_cast<int>(step), static_cast<int>(move)}] = length_m;
}

double StepLengthTable::lookup(std::string_view subject, AuLabel step, MoveState move) const {
    const auto it =
        entries_.find(Key{std::string(subject), static_cast<int>(step), static_cast<int>(move)});
    if (it == entries_.end()) {
        throw Error(ErrorCode::MissingTableEntry, "no step length for " + key_text(subject, step, move));
    }
    return it->second;
}

bool StepLengthTable::contains(std::string_view subject, AuLabel step, MoveState move) const {
    return entries_.count(Key{std::string(subject), static_cast<int>(step), static_cast<int>(move)}) > 0;
}

void StepLengthTable::validate() const {
    for (const std::string& subject : subjects()) {
        for (MoveState move : kAllMoveStates) {
            if (!contains(subject, AuLabel::ShortStep, move) ||
                !contains(subject, AuLabel::NormalStep, move) ||
                !contains(subject, AuLabel::LongStep, move)) {
                continue;
            }
            const double s = lookup(subject, AuLabel::ShortStep, move);
            const double n = lookup(subject, AuLabel::NormalStep, move);
            const double l = lookup(subject, AuLabel::LongStep, move);
            if (!(s < n && n < l)) {
                throw Error(ErrorCode::InvalidArgument,
                            "step lengths for " + subject + "/" + std::string(name(move)) +
                                " must satisfy short < normal < long");
            }
        }
    }
}

std::vector<std::string> StepLengthTable::subjects() const {
    std::set<std::string> names;
    for (const auto& [key, value] : entries_) {
        names.insert(std::get<0>(key));
    }
    return {names.begin(), names.end()};
}

StepLengthTable ingest_table(std::istream& source) {
    StepLengthTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto fields = csv::split(line);
        if (!fields.empty() && fields[0] == "subject") {
            continue;
        }
        if (fields.size() != 4) {
            throw SourceError(ErrorCode::ParseError, line_no, 0,
                              "expected 4 fields, found " + std::to_string(fields.size()));
        }
        const auto step = parse_au_label(fields[1]);
        if (!step || !is_step(*step)) {
            throw SourceError(ErrorCode::ParseError, line_no, 2,
                              "unknown step type '" + std::string(fields[1]) + "'");
        }
        const auto move = parse_move_state(fields[2]);
        if (!move) {
            throw SourceError(ErrorCode::ParseError, line_no, 3,
                              "unknown move state '" + std::string(fields[2]) + "'");
        }
        const double length = csv::parse_double(fields[3], line_no, 4);
        if (!(length > 0.0)) {
            throw SourceError(ErrorCode::ParseError, line_no, 4, "step length must be positive");
        }
        table.set(std::string(fields[0]), *step, *move, length);
    }
    table.validate();
    return table;
}

StepLengthTable read_table(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    return ingest_table(in);
}

void emit_table(std::ostream& sink, const StepLengthTable& table) {
    sink << kTableHeader << '\n';
    for (const auto& [key, length] : table.entries_) {
        const auto& [subject, step, move] = key;
        sink << subject << ',' << name(static_cast<AuLabel>(step)) << ','
             << name(static_cast<MoveState>(move)) << ',' << csv::format(length) << '\n';
    }
}

void write_table(const std::filesystem::path& path, const StepLengthTable& table) {
    auto out = csv::open_output(path);
    emit_table(out, table);
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    }
}

TrackState::TrackState(const TrackConfig& config)
    : config_(config), heading_(pdr::wrap_angle(config.initial_heading)) {
    history_.push_back(config.origin);
}

void TrackState::apply(AuLabel au, MoveState move, const StepLengthTable& table,
                       std::string_view subject) {
    Eigen::Vector2d next = position();
    if (is_step(au) && is_locomotion(move)) {
        const double length = table.lookup(subject, au, move);
        next += length * Eigen::Vector2d(std::cos(heading_), std::sin(heading_));
        path_length_ += length;
    } else if (au == AuLabel::LeftTurn) {
        ++net_turns_;
    } else if (au == AuLabel::RightTurn) {
        --net_turns_;
    }
    // Heading is rebuilt from the turn count so opposite turns cancel exactly.
    heading_ = pdr::wrap_angle(config_.initial_heading +
                               static_cast<double>(net_turns_) * config_.turn_angle);
    ++k_;
    history_.push_back(next);
}

TrackState apply_au(TrackState state, AuLabel au, MoveState move, const StepLengthTable& table,
                    std::string_view subject) {
    state.apply(au, move, table, subject);
    return state;
}

std::optional<AuLabel> TwoStageVerdict::au_label() const {
    if (!au) {
        return std::nullopt;
    }
    return au->au();
}

TwoStageVerdict two_stage_classify(const windowing::Segment& segment,
                                   const seqnet::Params& state_model,
                                   const seqnet::Params& au_model,
                                   const seqnet::ClassifierVerdict* cached_au) {
    TwoStageVerdict out;
    out.state = seqnet::classify(state_model, segment.samples);
    out.state_evals = out.state.evals;
    if (!is_locomotion(out.move())) {
        return out;
    }
    if (cached_au != nullptr && cached_au->family == LabelFamily::ActionUnit) {
        out.au = *cached_au;
    } else {
        out.au = seqnet::classify(au_model, segment.samples);
        out.au_evals = out.au->evals;
    }
    return out;
}

Models load_models(const std::filesystem::path& dir) {
    Models m;
    m.state = seqnet::load_params(dir / kStateModelFile);
    m.au = seqnet::load_params(dir / kAuModelFile);
    if (m.state.classes() != static_cast<Eigen::Index>(kMoveStateCount) ||
        m.au.classes() != static_cast<Eigen::Index>(kAuCount)) {
        throw Error(ErrorCode::DimMismatch, "model directory '" + dir.string() +
                                                "' holds models with unexpected class counts");
    }
    if (m.state.inputs() != 6 || m.au.inputs() != 6) {
        throw Error(ErrorCode::DimMismatch, "models must take 6 input channels");
    }
    return m;
}

void save_models(const std::filesystem::path& dir, const Models& models) {
    seqnet::save_params(dir / kStateModelFile, models.state);
    seqnet::save_params(dir / kAuModelFile, models.au);
}

std::size_t AuRecord::start_idx() const {
    return outcome.valid() ? outcome.segment->start_idx : outcome.cursor;
}

std::size_t AuRecord::end_idx() const {
    return outcome.valid() ? outcome.segment->end_idx : outcome.next_cursor;
}

double LatencyReport::evals_per_au() const noexcept {
    return decisions == 0 ? 0.0
                          : static_cast<double>(segment_evals) / static_cast<double>(decisions);
}

double LatencyReport::wall_ns_per_au() const noexcept {
    return decisions == 0 ? 0.0
                          : static_cast<double>(wall.count()) / static_cast<double>(decisions);
}

PipelineResult run_pipeline(const SmoothedStream& stream, const Models& models,
                            const StepLengthTable& table, const PipelineOptions& options) {
    PipelineResult result{{}, {}, {}, TrackState(options.track)};
    result.latency.smoothing_delay_samples = stream.emission_delay();
    result.latency.smoothing_delay_ms =
        static_cast<double>(stream.emission_delay()) * 1000.0 / stream.rate_hz();
    if (stream.empty()) {
        return result;
    }

    const Axis axis = pdr::select_step_axis(stream);
    const double tau = options.tau.value_or(pdr::default_threshold(stream, axis, options.tau_offset));
    const auto steps = pdr::detect_steps(stream, axis, tau, options.gate);
    windowing::StrategyConfig strategy = options.strategy;
    strategy.sp.gate = options.gate;
    const windowing::Segmenter segmenter(stream, steps, axis, strategy);
    const windowing::Classifier classifier = windowing::model_classifier(models.au);

    const std::size_t n = stream.size();
    const std::size_t tail = std::max(options.stop_tail, segmenter.min_tail());
    std::size_t cursor = 0;
    while (cursor < n && n - cursor >= tail) {
        const auto started = clock::now();
        AuRecord record;
        try {
            record.outcome = segmenter.next(cursor, classifier);
            if (record.outcome.valid()) {
                const TwoStageVerdict v =
                    two_stage_classify(*record.outcome.segment, models.state, models.au,
                                       record.outcome.verdict ? &*record.outcome.verdict : nullptr);
                record.move = v.move();
                record.au = v.au_label();
                record.state_evals = v.state_evals;
                result.latency.segment_evals += v.au_evals;
                result.track.apply(record.au.value_or(AuLabel::Stop), *record.move, table,
                                   options.subject);
            }
        } catch (const Error& e) {
            throw Error(e.code(), "cursor " + std::to_string(cursor) + ": " + e.what());
        }
        record.wall = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - started);

        result.latency.decisions += 1;
        result.latency.segment_evals += record.outcome.evals_used;
        result.latency.state_evals += record.state_evals;
        result.latency.wall += record.wall;
        if (record.outcome.valid()) {
            result.latency.aus += 1;
            result.trajectory.push_back(TrajectoryRow{
                result.track.k(), result.track.position(), result.track.heading(), record.au,
                record.move, record.outcome.evals_used + record.state_evals});
        }
        cursor = std::max(record.outcome.next_cursor, cursor + 1);
        result.records.push_back(std::move(record));
    }
    return result;
}

PipelineResult replay_labels(std::span<const LabelRow> labels, const StepLengthTable& table,
                             const PipelineOptions& options) {
    PipelineResult result{{}, {}, {}, TrackState(options.track)};
    for (const LabelRow& row : labels) {
        result.track.apply(row.au, row.move, table, options.subject);
        AuRecord record;
        record.outcome.strategy = options.strategy.strategy;
        record.outcome.cursor = row.start_idx;
        record.outcome.next_cursor = row.end_idx;
        record.move = row.move;
        record.au = row.au;
        result.records.push_back(std::move(record));
        result.trajectory.push_back(TrajectoryRow{result.track.k(), result.track.position(),
                                                  result.track.heading(), row.au, row.move, 0});
        result.latency.decisions += 1;
        result.latency.aus += 1;
    }
    return result;
}

std::vector<LabelRow> align_labels(std::span<const LabelRow> raw, std::size_t n,
                                   std::size_t stream_len) {
    const std::size_t shift = n == 0 ? 0 : (n - 1) / 2;
    std::vector<LabelRow> out;
    out.reserve(raw.size());
    for (LabelRow row : raw) {
        row.start_idx = row.start_idx >= shift ? row.start_idx - shift : 0;
        row.end_idx = std::min(row.end_idx >= shift ? row.end_idx - shift : 0, stream_len);
        if (row.end_idx > row.start_idx) {
            out.push_back(row);
        }
    }
    return out;
}

void emit_trajectory(std::ostream& sink, std::span<const TrajectoryRow> rows) {
    sink << kTrajectoryHeader << '\n';
    for (const TrajectoryRow& r : rows) {
        sink << r.k << ',' << csv::format(r.position.x()) << ',' << csv::format(r.position.y())
             << ',' << csv::format(r.heading) << ',' << (r.au ? name(*r.au) : "-") << ','
             << (r.move ? name(*r.move) : "-") << ',' << r.evals << '\n';
    }
}

void write_trajectory(const std::filesystem::path& path, std::span<const TrajectoryRow> rows) {
    auto out = csv::open_output(path);
    emit_trajectory(out, rows);
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    }
}

std::vector<TrajectoryRow> ingest_trajectory(std::istream& source) {
    std::vector<TrajectoryRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (blank(line)) {
            continue;
        }
        const auto f = csv::split(line);
        if (!f.empty() && f[0] == "k") {
            continue;
        }
        if (f.size() != 7) {
            throw SourceError(ErrorCode::ParseError, line_no, 0,
                              "expected 7 fields, found " + std::to_string(f.size()));
        }
        TrajectoryRow r;
        r.k = csv::parse_index(f[0], line_no, 1);
        r.position.x() = csv::parse_double(f[1], line_no, 2);
        r.position.y() = csv::parse_double(f[2], line_no, 3);
        r.heading = csv::parse_double(f[3], line_no, 4);
        if (f[4] != "-") {
            r.au = parse_au_label(f[4]);
            if (!r.au) {
                throw SourceError(ErrorCode::ParseError, line_no, 5, "unknown AU label");
            }
        }
        if (f[5] != "-") {
            r.move = parse_move_state(f[5]);
            if (!r.move) {
                throw SourceError(ErrorCode::ParseError, line_no, 6, "unknown move state");
            }
        }
        r.evals = csv::parse_index(f[6], line_no, 7);
        rows.push_back(r);
    }
    return rows;
}

void emit_latency(std::ostream& sink, const LatencyReport& report) {
    sink << "key,value\n";
    sink << "decisions," << report.decisions << '\n';
    sink << "aus," << report.aus << '\n';
    sink << "segment_evals," << report.segment_evals << '\n';
    sink << "state_evals," << report.state_evals << '\n';
    sink << "evals_per_au," << csv::format(report.evals_per_au()) << '\n';
    sink << "wall_ns," << report.wall.count() << '\n';
    sink << "wall_ns_per_au," << csv::format(report.wall_ns_per_au()) << '\n';
    sink << "smoothing_delay_samples," << report.smoothing_delay_samples << '\n';
    sink << "smoothing_delay_ms," << csv::format(report.smoothing_delay_ms) << '\n';
}

} // namespace odw::locator
