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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "odw/labels.hpp"

namespace odw {

using Vector6d = Eigen::Matrix<double, 6, 1>;
/// Column-per-sample feature block (accel xyz, gyro xyz).
using FeatureMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic>;

inline constexpr double kDefaultRateHz = 50.0;
inline constexpr std::size_t kDefaultSmoothN = 5;

enum class Axis : int { X = 0, Y = 1, Z = 2 };

char axis_name(Axis axis) noexcept;

/// One timestamped 9-axis inertial reading.
struct ImuSample {
    std::int64_t t_ms = 0;
    Eigen::Vector3d accel = Eigen::Vector3d::Zero(); // m/s^2
    Eigen::Vector3d gyro = Eigen::Vector3d::Zero();  // rad/s
    Eigen::Vector3d mag = Eigen::Vector3d::Zero();   // uT

    bool is_finite() const noexcept {
        return accel.allFinite() && gyro.allFinite() && mag.allFinite();
    }

    /// The classifier input vector: accel followed by gyro.
    Vector6d features() const noexcept {
        Vector6d f;
        f << accel, gyro;
        return f;
    }

    bool operator==(const ImuSample& other) const noexcept {
        return t_ms == other.t_ms && accel == other.accel && gyro == other.gyro &&
               mag == other.mag;
    }
};

/// Output of the forward moving-average filter. Sample i averages raw samples
/// i..i+N-1 and keeps the timestamp of raw sample i.
class SmoothedStream {
  public:
    SmoothedStream() = default;
    SmoothedStream(std::vector<ImuSample> samples, std::size_t window, double rate_hz);

    const std::vector<ImuSample>& samples() const noexcept { return samples_; }
    const ImuSample& operator[](std::size_t i) const { return samples_[i]; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    std::size_t window() const noexcept { return window_; }
    double rate_hz() const noexcept { return rate_hz_; }

    /// Samples a streaming consumer must wait before output i is available.
    std::size_t emission_delay() const noexcept { return window_ == 0 ? 0 : window_ - 1; }

    /// 6 x size() matrix of classifier inputs.
    const FeatureMatrix& features() const noexcept { return features_; }

    Eigen::VectorXd accel_axis(Axis axis) const;

  private:
    std::vector<ImuSample> samples_;
    std::size_t window_ = 1;
    double rate_hz_ = kDefaultRateHz;
    FeatureMatrix features_;
};

/// Forward moving average over all nine channels. Throws EmptyStream when the
/// input is shorter than n and NonFinite on NaN/Inf components.
SmoothedStream smooth(std::span<const ImuSample> stream, std::size_t n, double rate_hz);

/// As above with the sampling rate inferred from timestamps (50 Hz when fewer
/// than two samples are present).
SmoothedStream smooth(std::span<const ImuSample> stream, std::size_t n);

/// Incremental form of smooth(): each push returns the next smoothed sample
/// once n raw samples are buffered.
class OnlineSmoother {
  public:
    explicit OnlineSmoother(std::size_t n);
    std::optional<ImuSample> push(const ImuSample& sample);

  private:
    std::size_t n_;
    std::deque<ImuSample> buffer_;
};

/// Median inter-sample interval expressed as a frequency.
double infer_rate_hz(std::span<const ImuSample> samples);

// CSV trace I/O. Header: t_ms,ax,ay,az,gx,gy,gz,mx,my,mz
std::vector<ImuSample> ingest_csv(std::istream& source);
std::vector<ImuSample> read_trace(const std::filesystem::path& path);
void emit_csv(std::ostream& sink, std::span<const ImuSample> samples);
void write_trace(const std::filesystem::path& path, std::span<const ImuSample> samples);

/// One ground-truth row of a label sidecar: [start_idx, end_idx) carries the
/// given Action Unit performed in the given movement state.
struct LabelRow {
    std::size_t start_idx = 0;
    std::size_t end_idx = 0;
    AuLabel au = AuLabel::Stop;
    MoveState move = MoveState::Stop;

    std::size_t length() const noexcept { return end_idx - start_idx; }
    bool operator==(const LabelRow&) const = default;
};

// Sidecar header: start_idx,end_idx,au_label,move_state
std::vector<LabelRow> ingest_labels(std::istream& source);
std::vector<LabelRow> read_labels(const std::filesystem::path& path);
void emit_labels(std::ostream& sink, std::span<const LabelRow> rows);
void write_labels(const std::filesystem::path& path, std::span<const LabelRow> rows);

struct ReplayEvent {
    std::size_t index = 0;
    std::chrono::steady_clock::time_point emitted;
};

using ReplaySink = std::function<void(const ImuSample&, const ReplayEvent&)>;

struct ReplayStats {
    std::size_t emitted = 0;
    std::chrono::nanoseconds elapsed{0};
};

/// Emits samples in order, paced by their timestamps divided by speed.
/// speed == 0 emits everything immediately.
ReplayStats replay(std::span<const ImuSample> samples, double speed, const ReplaySink& sink);

} // namespace odw
