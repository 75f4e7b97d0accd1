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

// Classical pedestrian dead reckoning: peak-based step detection, tilt
// compensated magnetic heading and step-wise position integration. Serves as
// a baseline and as the peak source for signal-processing segmentation.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "odw/imu.hpp"

namespace odw::pdr {

inline constexpr double kDefaultThresholdOffset = 1.2; // m/s^2 above the trace mean

struct StepEvent {
    std::size_t peak_idx = 0;
    double magnitude = 0.0; // m/s^2, raw value on the step axis
    std::int64_t t_ms = 0;

    bool operator==(const StepEvent&) const = default;
};

/// Inter-step timing gate applied to threshold-crossing peaks.
struct StepGate {
    std::int64_t min_gap_ms = 120;
    std::int64_t max_gap_ms = 400;
    /// A peak arriving more than max_gap_ms after the previous step opens a
    /// new walking bout and is accepted like the first step of a trace. When
    /// false such peaks are rejected, so a long pause ends detection.
    bool bout_reset = true;
};

struct HeadingSolution {
    double pitch = 0.0; // rad, (-pi/2, pi/2)
    double roll = 0.0;  // rad, (-pi, pi]
    double yaw = 0.0;   // rad, (-pi, pi]
    double xh = 0.0;
    double yh = 0.0;
};

/// Accelerometer axis with the largest sample variance; ties go to x, then y.
Axis select_step_axis(const SmoothedStream& stream);

/// Trace mean on the axis plus offset.
double default_threshold(const SmoothedStream& stream, Axis axis,
                         double offset = kDefaultThresholdOffset);

std::vector<StepEvent> detect_steps(const SmoothedStream& stream, Axis axis, double tau,
                                    const StepGate& gate = {});

/// Pitch/roll from gravity, then tilt-compensated magnetic yaw.
HeadingSolution estimate_heading(const ImuSample& sample);

/// Positions after each step, starting at the origin (steps.size() + 1 points).
std::vector<Eigen::Vector2d> pdr_track(std::span<const StepEvent> steps,
                                       std::span<const HeadingSolution> headings,
                                       double step_len);

/// CSV dump: idx,t_ms,magnitude,yaw_rad
void emit_step_dump(std::ostream& sink, std::span<const StepEvent> steps,
                    std::span<const HeadingSolution> headings);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians) noexcept;

} // namespace odw::pdr
