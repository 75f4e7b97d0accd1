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

#include "odw/pdr.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "odw/csv.hpp"
#include "odw/error.hpp"

namespace odw::pdr {

double wrap_angle(double radians) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::remainder(radians, two_pi); // [-pi, pi]
    if (r <= -std::numbers::pi) {
        r += two_pi;
    }
    return r;
}

Axis select_step_axis(const SmoothedStream& stream) {
    if (stream.empty()) {
        throw Error(ErrorCode::EmptyStream, "cannot select a step axis on an empty stream");
    }
    Axis best = Axis::X;
    double best_var = -1.0;
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
        const auto row = stream.features().row(static_cast<Eigen::Index>(axis));
        const double var = (row.array() - row.mean()).square().mean();
        if (var > best_var) {
            best_var = var;
            best = axis;
        }
    }
    return best;
}

double default_threshold(const SmoothedStream& stream, Axis axis, double offset) {
    if (stream.empty()) {
        throw Error(ErrorCode::EmptyStream, "cannot derive a threshold from an empty stream");
    }
    return stream.features().row(static_cast<Eigen::Index>(axis)).mean() + offset;
}

std::vector<StepEvent> detect_steps(const SmoothedStream& stream, Axis axis, double tau,
                                    const StepGate& gate) {
    if (!(tau > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "step threshold must be positive");
    }
    const auto v = stream.features().row(static_cast<Eigen::Index>(axis));
    const std::size_t n = stream.size();

    std::vector<StepEvent> steps;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(v[i] > v[i - 1])) {
            continue;
        }
        // Walk across a flat top; it is a peak only if the signal then falls.
        std::size_t j = i + 1;
        while (j < n && v[j] == v[i]) {
            ++j;
        }
        if (j == n || v[j] > v[i]) {
            continue;
        }
        // Anything below tau is a local peak, not a step; equality counts as a step.
        if (v[i] < tau) {
            continue;
        }
        const std::int64_t t = stream[i].t_ms;
        if (!steps.empty()) {
            const std::int64_t gap = t - steps.back().t_ms;
            if (gap < gate.min_gap_ms) {
                continue;
            }
            if (gap > gate.max_gap_ms && !gate.bout_reset) {
                continue;
            }
        }
        steps.push_back(StepEvent{i, v[i], t});
    }
    return steps;
}

HeadingSolution estimate_heading(const ImuSample& sample) {
    const double ax = sample.accel.x();
    const double ay = sample.accel.y();
    const double az = sample.accel.z();
    if (ax == 0.0 && az == 0.0) {
        throw Error(ErrorCode::DegenerateAttitude, "roll undefined when A_x = A_z = 0");
    }
    HeadingSolution h;
    h.pitch = std::atan(ay / std::sqrt(ax * ax + az * az));
    h.roll = wrap_angle(std::atan2(-ax, az));

    const double mx = sample.mag.x();
    const double my = sample.mag.y();
    const double mz = sample.mag.z();
    const double sp = std::sin(h.pitch);
    const double cp = std::cos(h.pitch);
    const double sr = std::sin(h.roll);
    const double cr = std::cos(h.roll);
    h.xh = mx * cp + my * sp * sr + mz * sp * cr;
    h.yh = my * cr + mz * sr;
    if (h.xh == 0.0 && h.yh == 0.0) {
        throw Error(ErrorCode::DegenerateField, "horizontal field vanishes");
    }
    h.yaw = wrap_angle(std::atan2(-h.yh, h.xh));
    return h;
}

std::vector<Eigen::Vector2d> pdr_track(std::span<const StepEvent> steps,
                                       std::span<const HeadingSolution> headings,
                                       double step_len) {
    if (steps.size() != headings.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(steps.size()) + " steps vs " +
                                                   std::to_string(headings.size()) +
                                                   " headings");
    }
    if (!(step_len > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "step length must be positive");
    }
    std::vector<Eigen::Vector2d> positions;
    positions.reserve(steps.size() + 1);
    positions.emplace_back(Eigen::Vector2d::Zero());
    for (const HeadingSolution& h : headings) {
        positions.push_back(positions.back() +
                            step_len * Eigen::Vector2d(std::cos(h.yaw), std::sin(h.yaw)));
    }
    return positions;
}

void emit_step_dump(std::ostream& sink, std::span<const StepEvent> steps,
                    std::span<const HeadingSolution> headings) {
    if (steps.size() != headings.size()) {
        throw Error(ErrorCode::LengthMismatch, "step dump needs one heading per step");
    }
    sink << "idx,t_ms,magnitude,yaw_rad\n";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        sink << steps[i].peak_idx << ',' << steps[i].t_ms << ','
             << csv::format(steps[i].magnitude) << ',' << csv::format(headings[i].yaw) << '\n';
    }
}

} // namespace odw::pdr
