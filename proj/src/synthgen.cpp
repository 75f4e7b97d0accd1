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

#include "odw/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "odw/csv.hpp"
#include "odw/error.hpp"
#include "odw/pdr.hpp"

namespace odw::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Pulse layout on [0, 1): trough until kTroughEnd, then a positive lobe that
// peaks kPeakShare of the way through and falls back to zero at 1.
constexpr double kTroughEnd = 0.35;
constexpr double kPeakShare = 0.25;
constexpr double kPeakAt = kTroughEnd + kPeakShare * (1.0 - kTroughEnd);

/// Zero-mean vertical pulse with unit peak.
double pulse(double u) {
    if (u < kTroughEnd) {
        // Equal areas: the trough is deeper because it is shorter.
        const double depth = (1.0 - kTroughEnd) / kTroughEnd;
        return -depth * std::sin(kPi * u / kTroughEnd);
    }
    if (u < kPeakAt) {
        return std::sin(0.5 * kPi * (u - kTroughEnd) / (kPeakAt - kTroughEnd));
    }
    return std::cos(0.5 * kPi * (u - kPeakAt) / (1.0 - kPeakAt));
}

std::size_t step_index(AuLabel au) {
    switch (au) {
    case AuLabel::ShortStep: return 0;
    case AuLabel::NormalStep: return 1;
    case AuLabel::LongStep: return 2;
    default: return 1;
    }
}

std::size_t ms_to_samples(double ms, double rate_hz) {
    return static_cast<std::size_t>(std::llround(ms * rate_hz / 1000.0));
}

bool renderable(MoveState move, AuLabel au) {
    if (au == AuLabel::Stop || move == MoveState::Stop) {
        return au == AuLabel::Stop && move == MoveState::Stop;
    }
    if (is_turn(au) || au == AuLabel::Abnormal) {
        return move == MoveState::Walking;
    }
    return is_step(au);
}

std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Renderer {
  public:
    Renderer(const PathScript& script, double rate_hz)
        : script_(script), sig_(script.signature), rate_(rate_hz), rng_(script.seed),
          accel_noise_(0.0, 1.0), gyro_noise_(0.0, 1.0) {}

    GeneratedTrace run() {
        GeneratedTrace out;
        out.subject = script_.subject.id;
        for (const ScriptSegment& seg : script_.segments) {
            if (seg.au == AuLabel::Stop) {
                emit(out, seg, ms_to_samples(static_cast<double>(seg.quantity), rate_));
                continue;
            }
            for (std::int64_t r = 0; r < seg.quantity; ++r) {
                emit(out, seg, au_samples(script_, seg.move, seg.au, rate_));
            }
        }
        return out;
    }

  private:
    void emit(GeneratedTrace& out, const ScriptSegment& seg, std::size_t length) {
        const std::size_t start = out.samples.size();
        const double seconds = static_cast<double>(length) / rate_;
        const double turn_sign = seg.au == AuLabel::LeftTurn ? 1.0 : -1.0;
        const double heading_start = heading_;

        double amplitude = 0.0;
        if (is_step(seg.au)) {
            amplitude = sig_.amplitude[step_index(seg.au)];
            if (seg.move == MoveState::Running) {
                amplitude *= sig_.run_amplitude_scale;
            }
        } else if (is_turn(seg.au)) {
            amplitude = sig_.turn_amplitude;
        } else if (seg.au == AuLabel::Abnormal) {
            amplitude = sig_.abnormal_amplitude;
        }
        double sway = 0.0;
        if (seg.move == MoveState::Walking && seg.au != AuLabel::Abnormal) {
            sway = sig_.walk_sway;
        } else if (seg.move == MoveState::Running) {
            sway = sig_.run_sway;
        }
        double forward = 0.0;
        if (seg.move == MoveState::UpStairs) {
            forward = sig_.stair_forward;
        } else if (seg.move == MoveState::DownStairs) {
            forward = -sig_.stair_forward;
        }

        for (std::size_t j = 0; j < length; ++j) {
            const double u = static_cast<double>(j) / static_cast<double>(length);
            ImuSample s;
            s.t_ms = std::llround(static_cast<double>(start + j) * 1000.0 / rate_);
            s.accel = Eigen::Vector3d(forward * std::sin(kPi * u), sway * std::sin(2.0 * kPi * u),
                                      kGravity + amplitude * pulse(u));
            if (is_turn(seg.au)) {
                // Half-sine rate profile; its integral over the AU is the turn angle.
                s.gyro.z() = turn_sign * sig_.turn_angle * kPi / (2.0 * seconds) *
                             std::sin(kPi * u);
                heading_ = heading_start + turn_sign * sig_.turn_angle * 0.5 *
                                               (1.0 - std::cos(kPi * u));
            }
            for (int c = 0; c < 3; ++c) {
                s.accel[c] += script_.noise_std * accel_noise_(rng_);
            }
            for (int c = 0; c < 3; ++c) {
                s.gyro[c] += script_.gyro_noise_std * gyro_noise_(rng_);
            }
            if (seg.au == AuLabel::Abnormal) {
                s.accel.x() += sig_.abnormal_accel_std * accel_noise_(rng_);
                s.accel.y() += sig_.abnormal_accel_std * accel_noise_(rng_);
                s.gyro.x() += sig_.abnormal_gyro_std * gyro_noise_(rng_);
                s.gyro.y() += sig_.abnormal_gyro_std * gyro_noise_(rng_);
            }
            s.mag = Eigen::Vector3d(sig_.field_horizontal * std::cos(heading_),
                                    -sig_.field_horizontal * std::sin(heading_),
                                    sig_.field_vertical);
            out.samples.push_back(s);
        }
        if (is_turn(seg.au)) {
            heading_ = heading_start + turn_sign * sig_.turn_angle;
        }
        out.labels.push_back(LabelRow{start, start + length, seg.au, seg.move});
    }

    const PathScript& script_;
    const Signature& sig_;
    double rate_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> accel_noise_;
    std::normal_distribution<double> gyro_noise_;
    double heading_ = 0.0;
};

} // namespace

std::size_t au_samples(const PathScript& script, MoveState move, AuLabel au, double rate_hz) {
    const Signature& sig = script.signature;
    if (au == AuLabel::Stop) {
        return 0; // stops are sized by duration, not by kind
    }
    if (is_turn(au)) {
        return ms_to_samples(sig.turn_ms, rate_hz);
    }
    if (au == AuLabel::Abnormal) {
        return ms_to_samples(sig.abnormal_ms, rate_hz);
    }
    double ms = 1000.0 / script.subject.cadence_hz * sig.duration_scale[step_index(au)];
    if (move == MoveState::Running) {
        ms *= sig.run_duration_scale;
    } else if (move == MoveState::UpStairs || move == MoveState::DownStairs) {
        ms *= sig.stair_duration_scale;
    }
    return ms_to_samples(ms, rate_hz);
}

void PathScript::validate(double rate_hz) const {
    if (!(rate_hz > 0.0)) {
        throw Error(ErrorCode::InvalidScript, "sampling rate must be positive");
    }
    if (!(subject.cadence_hz > 0.0)) {
        throw Error(ErrorCode::InvalidScript, "cadence must be positive");
    }
    if (!(noise_std >= 0.0) || !(gyro_noise_std >= 0.0)) {
        throw Error(ErrorCode::InvalidScript, "noise levels must be non-negative");
    }
    const pdr::StepGate gate;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const ScriptSegment& seg = segments[i];
        const std::string where = "segment " + std::to_string(i + 1) + ": ";
        if (seg.quantity <= 0) {
            throw Error(ErrorCode::InvalidScript, where + "count or duration must be positive");
        }
        if (!renderable(seg.move, seg.au)) {
            throw Error(ErrorCode::InvalidScript, where + std::string(name(seg.au)) +
                                                      " cannot be rendered while " +
                                                      std::string(name(seg.move)));
        }
        if (seg.au == AuLabel::Stop) {
            if (ms_to_samples(static_cast<double>(seg.quantity), rate_hz) == 0) {
                throw Error(ErrorCode::InvalidScript, where + "stop shorter than one sample");
            }
            continue;
        }
        const double ms =
            static_cast<double>(au_samples(*this, seg.move, seg.au, rate_hz)) * 1000.0 / rate_hz;
        if (ms < static_cast<double>(gate.min_gap_ms) || ms > static_cast<double>(gate.max_gap_ms)) {
            throw Error(ErrorCode::InvalidScript,
                        where + "AU period of " + std::to_string(ms) +
                            " ms leaves the step timing gate");
        }
    }
}

std::vector<ScriptSegment> parse_script(std::istream& source) {
    std::vector<ScriptSegment> segments;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream words(line);
        std::string move_text, au_text, qty_text, extra;
        if (!(words >> move_text)) {
            continue;
        }
        if (!(words >> au_text >> qty_text) || (words >> extra)) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 0,
                              "expected '<move_state> <au_label> <count_or_ms>'");
        }
        const auto move = parse_move_state(move_text);
        if (!move) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 1,
                              "unknown move state '" + move_text + "'");
        }
        const auto au = parse_au_label(au_text);
        if (!au) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 2,
                              "unknown AU label '" + au_text + "'");
        }
        std::int64_t qty = 0;
        try {
            qty = csv::parse_int(qty_text, line_no, 3);
        } catch (const SourceError& e) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 3, e.what());
        }
        if (qty <= 0) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 3, "quantity must be positive");
        }
        if (!renderable(*move, *au)) {
            throw SourceError(ErrorCode::InvalidScript, line_no, 0,
                              au_text + " cannot be rendered while " + move_text);
        }
        segments.push_back(ScriptSegment{*move, *au, qty});
    }
    return segments;
}

std::vector<ScriptSegment> read_script(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    return parse_script(in);
}

void emit_script(std::ostream& sink, const std::vector<ScriptSegment>& segments) {
    for (const ScriptSegment& s : segments) {
        sink << name(s.move) << ' ' << name(s.au) << ' ' << s.quantity << '\n';
    }
}

GeneratedTrace generate(const PathScript& script, double rate_hz) {
    script.validate(rate_hz);
    return Renderer(script, rate_hz).run();
}

locator::StepLengthTable make_table(const std::vector<SubjectProfile>& subjects) {
    locator::StepLengthTable table;
    constexpr std::array<AuLabel, 3> steps{AuLabel::ShortStep, AuLabel::NormalStep,
                                           AuLabel::LongStep};
    for (const SubjectProfile& p : subjects) {
        for (std::size_t i = 0; i < 3; ++i) {
            table.set(p.id, steps[i], MoveState::Walking, p.walk_length[i]);
            table.set(p.id, steps[i], MoveState::Running, p.run_length[i]);
        }
    }
    table.validate();
    return table;
}

std::vector<SubjectProfile> default_subjects() {
    SubjectProfile a;
    a.id = "s1";
    a.cadence_hz = 3.0;
    a.walk_length = {0.5, 0.7, 0.9};
    a.run_length = {0.8, 1.0, 1.2};
    SubjectProfile b;
    b.id = "s2";
    b.cadence_hz = 2.9;
    b.walk_length = {0.55, 0.75, 0.95};
    b.run_length = {0.85, 1.05, 1.25};
    return {a, b};
}

PathScript benchmark_script(std::size_t path_template, const SubjectProfile& subject,
                            std::uint64_t seed) {
    static constexpr std::array<std::array<AuLabel, 4>, kPathTemplates> kTurns{{
        {AuLabel::LeftTurn, AuLabel::LeftTurn, AuLabel::RightTurn, AuLabel::LeftTurn},
        {AuLabel::RightTurn, AuLabel::RightTurn, AuLabel::LeftTurn, AuLabel::RightTurn},
        {AuLabel::LeftTurn, AuLabel::RightTurn, AuLabel::LeftTurn, AuLabel::RightTurn},
        {AuLabel::LeftTurn, AuLabel::LeftTurn, AuLabel::RightTurn, AuLabel::RightTurn},
    }};
    const auto& turns = kTurns[path_template % kPathTemplates];

    std::mt19937_64 rng(mix(seed));
    auto uniform = [&](std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
    };
    auto step_type = [&] {
        const auto r = uniform(0, 3);
        return r == 0 ? AuLabel::ShortStep : r == 3 ? AuLabel::LongStep : AuLabel::NormalStep;
    };

    PathScript script;
    script.subject = subject;
    script.seed = mix(seed ^ 0x5851f42d4c957f2dULL);
    auto& segs = script.segments;
    auto push = [&](MoveState m, AuLabel a, std::int64_t q) {
        // Adjacent identical steps are merged into one counted segment.
        if (!segs.empty() && segs.back().move == m && segs.back().au == a && a != AuLabel::Stop) {
            segs.back().quantity += q;
        } else {
            segs.push_back(ScriptSegment{m, a, q});
        }
    };
    auto leg = [&](MoveState m, std::int64_t steps, bool abnormal) {
        const std::int64_t odd_at = abnormal ? uniform(1, steps - 1) : -1;
        for (std::int64_t i = 0; i < steps; ++i) {
            if (i == odd_at) {
                push(MoveState::Walking, AuLabel::Abnormal, 1);
            }
            push(m, step_type(), 1);
        }
    };

    push(MoveState::Stop, AuLabel::Stop, uniform(1500, 2000));
    leg(MoveState::Walking, uniform(5, 8), false);
    push(MoveState::Walking, turns[0], 1);
    leg(MoveState::Walking, uniform(5, 8), true);
    push(MoveState::Stop, AuLabel::Stop, uniform(1000, 1600));
    leg(MoveState::Running, uniform(6, 9), false);
    push(MoveState::Walking, turns[1], 1);
    leg(MoveState::Walking, uniform(2, 4), false);
    push(MoveState::UpStairs, AuLabel::NormalStep, uniform(3, 5));
    leg(MoveState::Walking, uniform(4, 7), false);
    push(MoveState::Walking, turns[2], 1);
    leg(MoveState::Walking, uniform(2, 4), false);
    push(MoveState::DownStairs, AuLabel::NormalStep, uniform(3, 5));
    leg(MoveState::Walking, uniform(4, 7), true);
    push(MoveState::Walking, turns[3], 1);
    leg(MoveState::Walking, uniform(5, 8), false);
    push(MoveState::Stop, AuLabel::Stop, uniform(1500, 2000));
    return script;
}

Suite make_benchmark_suite(std::size_t n_traces, std::uint64_t seed, double rate_hz) {
    if (n_traces == 0) {
        throw Error(ErrorCode::InvalidArgument, "a suite needs at least one trace");
    }
    const auto subjects = default_subjects();
    Suite suite;
    suite.table = make_table(subjects);

    std::vector<std::size_t> order(n_traces);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix(seed));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = (n_traces * 7 + 9) / 10;
    std::vector<Split> split(n_traces, Split::Test);
    for (std::size_t i = 0; i < n_train; ++i) {
        split[order[i]] = Split::Train;
    }

    suite.traces.resize(n_traces);
    for (std::size_t i = 0; i < n_traces; ++i) {
        SuiteTrace& t = suite.traces[i];
        const SubjectProfile& subject = subjects[i % subjects.size()];
        t.path_template = i % kPathTemplates;
        t.split = split[i];
        std::ostringstream name;
        name << "trace_" << (i < 10 ? "00" : i < 100 ? "0" : "") << i;
        t.name = name.str();
        t.script = benchmark_script(t.path_template, subject, mix(seed + 0x632be59bd9b4e019ULL * (i + 1)));
        t.trace = generate(t.script, rate_hz);
    }
    return suite;
}

void write_suite(const std::filesystem::path& dir, const Suite& suite) {
    locator::write_table(dir / kTableFile, suite.table);
    auto manifest = csv::open_output(dir / kManifestFile);
    manifest << "name,subject,template,split\n";
    for (const SuiteTrace& t : suite.traces) {
        write_trace(dir / (t.name + ".csv"), t.trace.samples);
        write_labels(dir / (t.name + ".labels.csv"), t.trace.labels);
        auto script = csv::open_output(dir / (t.name + ".script"));
        emit_script(script, t.script.segments);
        manifest << t.name << ',' << t.script.subject.id << ',' << t.path_template << ','
                 << (t.split == Split::Train ? "train" : "test") << '\n';
    }
    if (!manifest) {
        throw Error(ErrorCode::Io, "failed writing manifest in '" + dir.string() + "'");
    }
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    std::vector<ManifestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = csv::split(line);
        if (line.empty() || f[0] == "name") {
            continue;
        }
        if (f.size() != 4) {
            throw SourceError(ErrorCode::ParseError, line_no, 0, "expected 4 fields");
        }
        ManifestRow r;
        r.name = std::string(f[0]);
        r.subject = std::string(f[1]);
        r.path_template = csv::parse_index(f[2], line_no, 3);
        if (f[3] == "train") {
            r.split = Split::Train;
        } else if (f[3] == "test") {
            r.split = Split::Test;
        } else {
            throw SourceError(ErrorCode::ParseError, line_no, 4, "split must be train or test");
        }
        rows.push_back(r);
    }
    return rows;
}

} // namespace odw::synth
