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

// Online dynamic windows: strategies that cut a smoothed inertial stream into
// Action Unit candidates, one call per AU, starting at a caller-owned cursor.
//
//   conventional  every length in [20, 60] samples is classified, best wins
//   nlp           lengths are whole multiples of a token, best wins
//   sp            boundaries come from zero crossings between step peaks and
//                 cost no classifier evaluations
//   fusion        sp boundary first; if its confidence is below tau1, k+1
//                 token-shifted ends are tried and the best is kept if it
//                 reaches tau2, otherwise no valid AU is reported
//
// Every outcome carries the number of classifier evaluations it consumed.

#include <array>
#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "odw/imu.hpp"
#include "odw/pdr.hpp"
#include "odw/seqnet.hpp"

namespace odw::windowing {

using seqnet::ClassifierVerdict;

enum class Strategy : int { Conventional = 0, Nlp, Sp, Fusion };

inline constexpr std::array<Strategy, 4> kAllStrategies{Strategy::Conventional, Strategy::Nlp,
                                                        Strategy::Sp, Strategy::Fusion};

std::string_view name(Strategy strategy) noexcept;
std::optional<Strategy> parse_strategy(std::string_view text) noexcept;

/// Contiguous slice [start_idx, end_idx) of a smoothed stream.
struct Segment {
    std::size_t start_idx = 0;
    std::size_t end_idx = 0;
    FeatureMatrix samples; // 6 x length
    Strategy origin = Strategy::Sp;

    std::size_t length() const noexcept { return end_idx - start_idx; }
};

Segment make_segment(const SmoothedStream& stream, std::size_t start, std::size_t end,
                     Strategy origin);

/// Scores a segment. Each returned verdict reports its own evaluation cost.
using Classifier = std::function<ClassifierVerdict(const Segment&)>;

/// Adapts a trained model to the Classifier interface.
Classifier model_classifier(const seqnet::Params& params);

struct ConventionalConfig {
    std::size_t min_len = 20;
    std::size_t max_len = 60;
};

struct TokenConfig {
    std::size_t token_len = 10;
    std::size_t max_tokens = 6;
    std::size_t k = 4; // neighbour tokens tried by fusion

    void validate() const;
};

struct FusionThresholds {
    double tau1 = 0.80;
    double tau2 = 0.70;

    void validate() const;
};

struct SpConfig {
    /// Zero-crossing vicinity as a fraction of the step-axis standard deviation.
    double vicinity_scale = 0.05;
    /// Allowed distance of a crossing from the inter-peak midpoint, as a
    /// fraction of the inter-peak interval.
    double mid_fraction = 0.25;
    /// Furthest a boundary may lie beyond the cursor.
    std::size_t horizon = 60;
    /// Boundaries closer than this to the cursor are skipped.
    std::size_t min_len = 5;
    /// Level subtracted before looking for crossings; the step-axis mean when unset.
    std::optional<double> reference;
    /// Timing gate that decides whether two peaks are consecutive steps.
    pdr::StepGate gate;
};

/// Step-axis data prepared once per stream for boundary search.
struct SpContext {
    Axis axis = Axis::Z;
    Eigen::VectorXd centered; // step axis minus the reference level
    double vicinity = 0.0;
    std::vector<pdr::StepEvent> steps;
    std::vector<std::size_t> boundaries; // one per qualifying peak pair, increasing
    SpConfig config;
};

SpContext prepare_sp(const SmoothedStream& stream, std::span<const pdr::StepEvent> steps,
                     Axis axis, const SpConfig& config = {});

/// Boundary selected between two consecutive step peaks, if any sample
/// qualifies under the crossing rules.
std::optional<std::size_t> select_crossing(const Eigen::VectorXd& centered, double vicinity,
                                           std::size_t left_peak, std::size_t right_peak,
                                           double mid_fraction);

struct SegmentationOutcome {
    Strategy strategy = Strategy::Sp;
    std::size_t cursor = 0;      // where the search started
    std::size_t next_cursor = 0; // where the next search starts
    std::optional<Segment> segment; // empty means "no valid AU"
    std::optional<ClassifierVerdict> verdict;
    std::size_t evals_used = 0;
    std::chrono::nanoseconds wall{0};

    bool valid() const noexcept { return segment.has_value(); }
};

SegmentationOutcome conventional_dw(const SmoothedStream& stream, std::size_t cursor,
                                    const Classifier& classifier,
                                    const ConventionalConfig& config = {});

SegmentationOutcome nlp_dw(const SmoothedStream& stream, std::size_t cursor,
                           const Classifier& classifier, const TokenConfig& config = {});

/// Next boundary after the cursor. Consumes no classifier evaluations.
/// Throws NoBoundaryFound when nothing qualifies within the horizon.
Segment sp_dw(const SmoothedStream& stream, const SpContext& context, std::size_t cursor);

Segment sp_dw(const SmoothedStream& stream, std::size_t cursor,
              std::span<const pdr::StepEvent> steps, const SpConfig& config = {});

/// sp_dw followed by one classification. When no boundary is found the
/// segment runs to the horizon (or the end of the stream).
SegmentationOutcome sp_localize(const SmoothedStream& stream, const SpContext& context,
                                std::size_t cursor, const Classifier& classifier);

/// Classifies the k+1 candidates whose ends are the given end shifted by
/// whole tokens and returns the most confident one.
SegmentationOutcome neighbor_token_search(const SmoothedStream& stream, std::size_t cursor,
                                          std::size_t end, const Classifier& classifier,
                                          const TokenConfig& config);

SegmentationOutcome sp_nlp_fusion(const SmoothedStream& stream, const SpContext& context,
                                  std::size_t cursor, const Classifier& classifier,
                                  const TokenConfig& config = {},
                                  const FusionThresholds& thresholds = {});

struct StrategyConfig {
    Strategy strategy = Strategy::Fusion;
    ConventionalConfig conventional;
    TokenConfig tokens;
    FusionThresholds thresholds;
    SpConfig sp;
};

/// Binds one strategy to one stream.
class Segmenter {
  public:
    Segmenter(const SmoothedStream& stream, std::span<const pdr::StepEvent> steps, Axis axis,
              StrategyConfig config);

    /// Throws StreamExhausted when the tail is too short for the strategy.
    SegmentationOutcome next(std::size_t cursor, const Classifier& classifier) const;

    /// Shortest tail on which next() can still produce a window.
    std::size_t min_tail() const noexcept;
    /// Longest window any single call may inspect.
    std::size_t max_span() const noexcept;

    const StrategyConfig& config() const noexcept { return config_; }
    const SpContext& sp_context() const noexcept { return sp_; }

  private:
    const SmoothedStream* stream_;
    StrategyConfig config_;
    SpContext sp_;
};

/// CSV: start_idx,end_idx,strategy,evals,confidence,label
void emit_segmentation_trace(std::ostream& sink, std::span<const SegmentationOutcome> outcomes);

} // namespace odw::windowing
