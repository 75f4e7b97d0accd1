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

#include "odw/imu.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <thread>

#include "odw/csv.hpp"
#include "odw/error.hpp"

namespace odw {

namespace {

constexpr std::string_view kTraceHeader = "t_ms,ax,ay,az,gx,gy,gz,mx,my,mz";
constexpr std::string_view kLabelHeader = "start_idx,end_idx,au_label,move_state";

void check_finite(std::span<const ImuSample> stream) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (!stream[i].is_finite()) {
            throw Error(ErrorCode::NonFinite, "sample " + std::to_string(i) + " has NaN/Inf");
        }
    }
}

bool is_blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

} // namespace

char axis_name(Axis axis) noexcept {
    switch (axis) {
    case Axis::X: return 'x';
    case Axis::Y: return 'y';
    case Axis::Z: return 'z';
    }
    return '?';
}

SmoothedStream::SmoothedStream(std::vector<ImuSample> samples, std::size_t window, double rate_hz)
    : samples_(std::move(samples)), window_(window), rate_hz_(rate_hz),
      features_(6, static_cast<Eigen::Index>(samples_.size())) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        features_.col(static_cast<Eigen::Index>(i)) = samples_[i].features();
    }
}

Eigen::VectorXd SmoothedStream::accel_axis(Axis axis) const {
    return features_.row(static_cast<Eigen::Index>(axis)).transpose();
}

SmoothedStream smooth(std::span<const ImuSample> stream, std::size_t n, double rate_hz) {
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
    }
    if (stream.size() < n) {
        throw Error(ErrorCode::EmptyStream, "stream of " + std::to_string(stream.size()) +
                                                " samples is shorter than window " +
                                                std::to_string(n));
    }
    check_finite(stream);

    const double scale = 1.0 / static_cast<double>(n);
    std::vector<ImuSample> out(stream.size() - n + 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        ImuSample s;
        s.t_ms = stream[i].t_ms;
        for (std::size_t k = 0; k < n; ++k) {
            s.accel += stream[i + k].accel;
            s.gyro += stream[i + k].gyro;
            s.mag += stream[i + k].mag;
        }
        if (n > 1) {
            s.accel *= scale;
            s.gyro *= scale;
            s.mag *= scale;
        }
        out[i] = s;
    }
    return SmoothedStream(std::move(out), n, rate_hz);
}

SmoothedStream smooth(std::span<const ImuSample> stream, std::size_t n) {
    const double rate = stream.size() >= 2 ? infer_rate_hz(stream) : kDefaultRateHz;
    return smooth(stream, n, rate);
}

OnlineSmoother::OnlineSmoother(std::size_t n) : n_(n) {
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "smoothing window must be >= 1");
    }
}

std::optional<ImuSample> OnlineSmoother::push(const ImuSample& sample) {
    if (!sample.is_finite()) {
        throw Error(ErrorCode::NonFinite, "sample at t=" + std::to_string(sample.t_ms));
    }
    buffer_.push_back(sample);
    if (buffer_.size() < n_) {
        return std::nullopt;
    }
    // Same summation order as smooth() so both paths agree bit for bit.
    ImuSample s;
    s.t_ms = buffer_.front().t_ms;
    for (const ImuSample& raw : buffer_) {
        s.accel += raw.accel;
        s.gyro += raw.gyro;
        s.mag += raw.mag;
    }
    if (n_ > 1) {
        const double scale = 1.0 / static_cast<double>(n_);
        s.accel *= scale;
        s.gyro *= scale;
        s.mag *= scale;
    }
    buffer_.pop_front();
    return s;
}

double infer_rate_hz(std::span<const ImuSample> samples) {
    if (samples.size() < 2) {
        throw Error(ErrorCode::EmptyStream, "need at least two samples to infer a rate");
    }
    std::vector<std::int64_t> deltas;
    deltas.reserve(samples.size() - 1);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        deltas.push_back(samples[i].t_ms - samples[i - 1].t_ms);
    }
    auto mid = deltas.begin() + static_cast<std::ptrdiff_t>(deltas.size() / 2);
    std::nth_element(deltas.begin(), mid, deltas.end());
    if (*mid <= 0) {
        throw Error(ErrorCode::TimestampOrder, "non-increasing timestamps");
    }
    return 1000.0 / static_cast<double>(*mid);
}

std::vector<ImuSample> ingest_csv(std::istream& source) {
    std::vector<ImuSample> samples;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(source, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            const auto fields = csv::split(line);
            if (!fields.empty() && fields[0] == "t_ms") {
                continue;
            }
            // No header: fall through and treat this line as data.
        }
        const auto fields = csv::split(line);
        if (fields.size() != 10) {
            throw SourceError(ErrorCode::ParseError, line_no, 0,
                              "expected 10 fields, found " + std::to_string(fields.size()));
        }
        ImuSample s;
        s.t_ms = csv::parse_int(fields[0], line_no, 1);
        for (int c = 0; c < 3; ++c) {
            s.accel[c] = csv::parse_double(fields[1 + c], line_no, 2 + c);
            s.gyro[c] = csv::parse_double(fields[4 + c], line_no, 5 + c);
            s.mag[c] = csv::parse_double(fields[7 + c], line_no, 8 + c);
        }
        if (!samples.empty() && s.t_ms <= samples.back().t_ms) {
            throw SourceError(ErrorCode::TimestampOrder, line_no, 1,
                              "timestamp " + std::to_string(s.t_ms) + " does not follow " +
                                  std::to_string(samples.back().t_ms));
        }
        samples.push_back(s);
    }
    return samples;
}

std::vector<ImuSample> read_trace(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    return ingest_csv(in);
}

void emit_csv(std::ostream& sink, std::span<const ImuSample> samples) {
    sink << kTraceHeader << '\n';
    for (const ImuSample& s : samples) {
        sink << s.t_ms;
        for (const auto* v : {&s.accel, &s.gyro, &s.mag}) {
            for (int c = 0; c < 3; ++c) {
                sink << ',' << csv::format((*v)[c]);
            }
        }
        sink << '\n';
    }
}

void write_trace(const std::filesystem::path& path, std::span<const ImuSample> samples) {
    auto out = csv::open_output(path);
    emit_csv(out, samples);
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    }
}

std::vector<LabelRow> ingest_labels(std::istream& source) {
    std::vector<LabelRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (is_blank(line)) {
            continue;
        }
        const auto fields = csv::split(line);
        if (line_no == 1 && !fields.empty() && fields[0] == "start_idx") {
            continue;
        }
        if (fields.size() != 4) {
            throw SourceError(ErrorCode::ParseError, line_no, 0,
                              "expected 4 fields, found " + std::to_string(fields.size()));
        }
        LabelRow row;
        row.start_idx = csv::parse_index(fields[0], line_no, 1);
        row.end_idx = csv::parse_index(fields[1], line_no, 2);
        if (row.end_idx <= row.start_idx) {
            throw SourceError(ErrorCode::ParseError, line_no, 2, "end_idx must exceed start_idx");
        }
        const auto au = parse_au_label(fields[2]);
        if (!au) {
            throw SourceError(ErrorCode::ParseError, line_no, 3,
                              "unknown AU label '" + std::string(fields[2]) + "'");
        }
        const auto move = parse_move_state(fields[3]);
        if (!move) {
            throw SourceError(ErrorCode::ParseError, line_no, 4,
                              "unknown move state '" + std::string(fields[3]) + "'");
        }
        row.au = *au;
        row.move = *move;
        rows.push_back(row);
    }
    return rows;
}

std::vector<LabelRow> read_labels(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    return ingest_labels(in);
}

void emit_labels(std::ostream& sink, std::span<const LabelRow> rows) {
    sink << kLabelHeader << '\n';
    for (const LabelRow& r : rows) {
        sink << r.start_idx << ',' << r.end_idx << ',' << name(r.au) << ',' << name(r.move)
             << '\n';
    }
}

void write_labels(const std::filesystem::path& path, std::span<const LabelRow> rows) {
    auto out = csv::open_output(path);
    emit_labels(out, rows);
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    }
}

ReplayStats replay(std::span<const ImuSample> samples, double speed, const ReplaySink& sink) {
    if (!(speed >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "replay speed must be >= 0");
    }
    using clock = std::chrono::steady_clock;
    ReplayStats stats;
    const auto start = clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (speed > 0.0 && i > 0) {
            // Absolute deadlines keep pacing error from accumulating.
            const double offset_ms =
                static_cast<double>(samples[i].t_ms - samples[0].t_ms) / speed;
            const auto deadline =
                start + std::chrono::duration_cast<clock::duration>(
                            std::chrono::duration<double, std::milli>(offset_ms));
            std::this_thread::sleep_until(deadline);
        }
        sink(samples[i], ReplayEvent{i, clock::now()});
        ++stats.emitted;
    }
    stats.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start);
    return stats;
}

} // namespace odw
