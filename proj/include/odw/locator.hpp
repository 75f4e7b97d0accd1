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

// Two-stage recognition and the moving-distance estimator.
//
// A movement-state model gates an Action Unit model; recognized step AUs
// advance the track by a per-subject step length, turns rotate it.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "odw/imu.hpp"
#include "odw/labels.hpp"
#include "odw/pdr.hpp"
#include "odw/seqnet.hpp"
#include "odw/windowing.hpp"

namespace odw::locator {

/// Mode step length per (subject, step AU, movement state), in meters.
class StepLengthTable {
  public:
    /// Throws InvalidArgument for a non-step label or a non-positive length.
    void set(const std::string& subject, AuLabel step, MoveState move, double length_m);
    /// Throws MissingTableEntry.
    double lookup(std::string_view subject, AuLabel step, MoveState move) const;
    bool contains(std::string_view subject, AuLabel step, MoveState move) const;

    /// Throws InvalidArgument unless short < normal < long wherever a
    /// (subject, state) pair has all three.
    void validate() const;

    std::vector<std::string> subjects() const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    bool operator==(const StepLengthTable&) const = default;

  private:
    using Key = std::tuple<std::string, int, int>;
    std::map<Key, double> entries_;

    friend void emit_table(std::ostream&, const StepLengthTable&);
};

// CSV: subject,step_type,move_state,length_m
StepLengthTable ingest_table(std::istream& source);
StepLengthTable read_table(const std::filesystem::path& path);
void emit_table(std::ostream& sink, const StepLengthTable& table);
void write_table(const std::filesystem::path& path, const StepLengthTable& table);

struct TrackConfig {
    double turn_angle = 1.5707963267948966; // rad, a quarter turn
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    double initial_heading = 0.0;
};

class TrackState {
  public:
    explicit TrackState(const TrackConfig& config = {});

    const Eigen::Vector2d& position() const noexcept { return history_.back(); }
    double heading() const noexcept { return heading_; }
    std::size_t k() const noexcept { return k_; }
    const std::vector<Eigen::Vector2d>& history() const noexcept { return history_; }
    /// Sum of the step lengths applied so far.
    double path_length() const noexcept { return path_length_; }
    long net_turns() const noexcept { return net_turns_; }
    const TrackConfig& config() const noexcept { return config_; }

    /// Advances one AU. Steps move the track only while walking or running.
    /// Throws MissingTableEntry when a needed step length is absent.
    void apply(AuLabel au, MoveState move, const StepLengthTable& table,
               std::string_view subject);

  private:
    TrackConfig config_;
    double heading_ = 0.0;
    long net_turns_ = 0;
    std::size_t k_ = 0;
    double path_length_ = 0.0;
    std::vector<Eigen::Vector2d> history_;
};

/// Functional form of TrackState::apply.
TrackState apply_au(TrackState state, AuLabel au, MoveState move, const StepLengthTable& table,
                    std::string_view subject);

/// True when a movement state can carry a displacing AU.
constexpr bool is_locomotion(MoveState move) noexcept {
    return move == MoveState::Walking || move == MoveState::Running;
}

struct TwoStageVerdict {
    seqnet::ClassifierVerdict state;
    std::optional<seqnet::ClassifierVerdict> au; // absent when gated out
    std::size_t state_evals = 0;
    std::size_t au_evals = 0; // zero when a cached verdict was reused

    MoveState move() const { return state.move_state(); }
    std::optional<AuLabel> au_label() const;
};

/// Movement state first; the AU model runs only while walking or running.
/// A verdict already computed for this exact segment by the AU model may be
/// passed in to avoid a second evaluation.
TwoStageVerdict two_stage_classify(const windowing::Segment& segment,
                                   const seqnet::Params& state_model,
                                   const seqnet::Params& au_model,
                                   const seqnet::ClassifierVerdict* cached_au = nullptr);

struct Models {
    seqnet::Params state; // movement-state classes
    seqnet::Params au;    // Action Unit classes
};

/// Files inside a model directory.
inline constexpr std::string_view kStateModelFile = "state.odw";
inline constexpr std::string_view kAuModelFile = "au.odw";

Models load_models(const std::filesystem::path& dir);
void save_models(const std::filesystem::path& dir, const Models& models);

struct PipelineOptions {
    windowing::StrategyConfig strategy;
    std::string subject = "s1";
    TrackConfig track;
    /// Stop once fewer samples than this remain (0 drains the stream).
    std::size_t stop_tail = 0;
    /// Absolute step threshold; trace mean plus tau_offset when unset.
    std::optional<double> tau;
    double tau_offset = pdr::kDefaultThresholdOffset;
    pdr::StepGate gate;
};

/// One processed AU (or one rejected window).
struct AuRecord {
    windowing::SegmentationOutcome outcome;
    std::optional<MoveState> move;
    std::optional<AuLabel> au;
    std::size_t state_evals = 0;
    std::chrono::nanoseconds wall{0};

    std::size_t start_idx() const;
    std::size_t end_idx() const;
};

struct TrajectoryRow {
    std::size_t k = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    double heading = 0.0;
    std::optional<AuLabel> au;
    std::optional<MoveState> move;
    std::size_t evals = 0;
};

struct LatencyReport {
    std::size_t decisions = 0;    // segmentation calls
    std::size_t aus = 0;          // decisions that produced a valid AU
    std::size_t segment_evals = 0;
    std::size_t state_evals = 0;
    std::chrono::nanoseconds wall{0};
    std::size_t smoothing_delay_samples = 0;
    double smoothing_delay_ms = 0.0;

    /// Segmentation evaluations per decision.
    double evals_per_au() const noexcept;
    double wall_ns_per_au() const noexcept;
};

struct PipelineResult {
    std::vector<TrajectoryRow> trajectory; // one row per AU, origin excluded
    std::vector<AuRecord> records;
    LatencyReport latency;
    TrackState track;
};

/// Runs segmentation, two-stage recognition and the estimator over a stream.
/// Module errors are rethrown with the cursor position prepended.
PipelineResult run_pipeline(const SmoothedStream& stream, const Models& models,
                            const StepLengthTable& table, const PipelineOptions& options);

/// Estimator-only replay: segments and labels come from a sidecar, no
/// classifier is consulted.
PipelineResult replay_labels(std::span<const LabelRow> labels, const StepLengthTable& table,
                             const PipelineOptions& options);

/// Sidecar rows in raw-sample indices mapped onto a stream smoothed with a
/// window of n: each row moves back by (n - 1) / 2 and is clipped to the
/// stream. Rows that vanish are dropped.
std::vector<LabelRow> align_labels(std::span<const LabelRow> raw, std::size_t n,
                                   std::size_t stream_len);

// CSV: k,x_m,y_m,heading_rad,au_label,move_state,evals
void emit_trajectory(std::ostream& sink, std::span<const TrajectoryRow> rows);
void write_trajectory(const std::filesystem::path& path, std::span<const TrajectoryRow> rows);
std::vector<TrajectoryRow> ingest_trajectory(std::istream& source);

/// key,value lines.
void emit_latency(std::ostream& sink, const LatencyReport& report);

} // namespace odw::locator
