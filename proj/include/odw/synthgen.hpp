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

// Seeded synthetic inertial traces with exact ground-truth labels.
//
// Every bump-bearing AU (steps, turns, abnormal) carries one zero-mean pulse
// on the vertical axis: a short trough, then a skewed positive lobe whose
// falling edge reaches zero exactly at the AU boundary. Consecutive pulses
// therefore put a descending zero crossing near the middle of each pair of
// peaks. Turns add a gyro-z pulse whose area is the turn angle; abnormal AUs
// add a lateral broadband burst; stairs add a forward-axis bump.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "odw/imu.hpp"
#include "odw/labels.hpp"
#include "odw/locator.hpp"

namespace odw::synth {

inline constexpr double kGravity = 9.81; // m/s^2

/// Per-person gait parameters.
struct SubjectProfile {
    std::string id = "s1";
    /// Normal walking steps per second; one normal step lasts 1 / cadence.
    double cadence_hz = 3.0;
    /// Step lengths in meters, indexed short, normal, long.
    std::array<double, 3> walk_length{0.5, 0.7, 0.9};
    std::array<double, 3> run_length{0.8, 1.0, 1.2};
};

/// Waveform parameters shared by every subject.
struct Signature {
    std::array<double, 3> amplitude{1.5, 2.5, 3.5}; // short, normal, long; m/s^2 above gravity
    std::array<double, 3> duration_scale{0.8, 1.0, 1.1}; // times the normal step period
    double run_duration_scale = 0.75;
    double run_amplitude_scale = 1.25;
    double run_sway = 1.0;  // lateral m/s^2 while running
    double walk_sway = 0.3; // lateral m/s^2 while walking
    double stair_duration_scale = 1.1;
    double stair_forward = 1.5; // forward bump on stairs, signed by direction
    double turn_ms = 360.0;
    double turn_amplitude = 2.0;
    double turn_angle = 1.5707963267948966;
    double abnormal_ms = 360.0;
    double abnormal_amplitude = 2.0;
    double abnormal_accel_std = 2.0;
    double abnormal_gyro_std = 1.0;
    double field_horizontal = 20.0; // uT
    double field_vertical = -40.0;  // uT
};

/// One scripted stretch. For Stop the quantity is a duration in ms, for every
/// other AU it is a repetition count.
struct ScriptSegment {
    MoveState move = MoveState::Walking;
    AuLabel au = AuLabel::NormalStep;
    std::int64_t quantity = 1;

    bool operator==(const ScriptSegment&) const = default;
};

struct PathScript {
    std::vector<ScriptSegment> segments;
    SubjectProfile subject;
    std::uint64_t seed = 1;
    double noise_std = 0.3;       // accelerometer, m/s^2
    double gyro_noise_std = 0.05; // rad/s
    Signature signature;

    /// Throws InvalidScript for non-positive quantities, state/AU pairs the
    /// generator cannot render, or a cadence whose step periods leave the
    /// detector's timing gate.
    void validate(double rate_hz = kDefaultRateHz) const;
};

// Text form: one "<move_state> <au_label> <count_or_ms>" per line; blank lines
// and '#' comments are ignored.
std::vector<ScriptSegment> parse_script(std::istream& source);
std::vector<ScriptSegment> read_script(const std::filesystem::path& path);
void emit_script(std::ostream& sink, const std::vector<ScriptSegment>& segments);

struct GeneratedTrace {
    std::vector<ImuSample> samples;
    std::vector<LabelRow> labels; // raw-sample indices
    std::string subject;
};

/// Samples in one AU of the given kind for this profile.
std::size_t au_samples(const PathScript& script, MoveState move, AuLabel au, double rate_hz);

GeneratedTrace generate(const PathScript& script, double rate_hz = kDefaultRateHz);

/// Step-length entries for the given subjects.
locator::StepLengthTable make_table(const std::vector<SubjectProfile>& subjects);

/// The two built-in subjects.
std::vector<SubjectProfile> default_subjects();

enum class Split : int { Train = 0, Test = 1 };

struct SuiteTrace {
    std::string name;
    std::size_t path_template = 0;
    Split split = Split::Train;
    PathScript script;
    GeneratedTrace trace;
};

struct Suite {
    std::vector<SuiteTrace> traces;
    locator::StepLengthTable table;
};

inline constexpr std::size_t kPathTemplates = 4;

/// Every trace covers all AUs and movement states; 70 % of traces (rounded
/// up) go to the training split, chosen by a seeded shuffle.
Suite make_benchmark_suite(std::size_t n_traces, std::uint64_t seed,
                           double rate_hz = kDefaultRateHz);

/// The script make_benchmark_suite would use for one trace.
PathScript benchmark_script(std::size_t path_template, const SubjectProfile& subject,
                            std::uint64_t seed);

/// Writes trace CSVs, label sidecars, the step-length table and a manifest.
void write_suite(const std::filesystem::path& dir, const Suite& suite);

// Manifest CSV: name,subject,template,split
struct ManifestRow {
    std::string name;
    std::string subject;
    std::size_t path_template = 0;
    Split split = Split::Train;
};
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

inline constexpr std::string_view kManifestFile = "manifest.csv";
inline constexpr std::string_view kTableFile = "step_lengths.csv";

} // namespace odw::synth
