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

#include "odw/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "odw/csv.hpp"
#include "odw/error.hpp"

namespace odw::windowing {

namespace {

using clock = std::chrono::steady_clock;

std::chrono::nanoseconds since(clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start);
}

std::string_view label_name(const ClassifierVerdict& v) {
    return v.family == LabelFamily::MoveState ? name(v.move_state()) : name(v.au());
}

bool opposite_signs(double a, double b) { return (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0); }

} // namespace

std::string_view name(Strategy strategy) noexcept {
    switch (strategy) {
    case Strategy::Conventional: return "conventional";
    case Strategy::Nlp: return "nlp";
    case Strategy::Sp: return "sp";
    case Strategy::Fusion: return "fusion";
    }
    return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) noexcept {
    for (Strategy s : kAllStrategies) {
        if (name(s) == text) {
            return s;
        }
    }
    return std::nullopt;
}

Segment make_segment(const SmoothedStream& stream, std::size_t start, std::size_t end,
                     Strategy origin) {
    if (start >= end || end > stream.size()) {
        throw Error(ErrorCode::InvalidArgument, "segment [" + std::to_string(start) + ", " +
                                                    std::to_string(end) + ") outside stream of " +
                                                    std::to_string(stream.size()));
    }
    Segment s;
    s.start_idx = start;
    s.end_idx = end;
    s.samples = stream.features().middleCols(static_cast<Eigen::Index>(start),
                                             static_cast<Eigen::Index>(end - start));
    s.origin = origin;
    return s;
}

Classifier model_classifier(const seqnet::Params& params) {
    return [&params](const Segment& segment) { return seqnet::classify(params, segment.samples); };
}

void TokenConfig::validate() const {
    if (token_len < 1 || max_tokens < 1) {
        throw Error(ErrorCode::InvalidArgument, "token_len and max_tokens must be >= 1");
    }
}

void FusionThresholds::validate() const {
    if (!(tau1 >= 0.0 && tau1 <= 1.0 && tau2 >= 0.0 && tau2 <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "fusion thresholds must lie in [0, 1]");
    }
}

std::optional<std::size_t> select_crossing(const Eigen::VectorXd& centered, double vicinity,
                                           std::size_t left_peak, std::size_t right_peak,
                                           double mid_fraction) {
    if (right_peak <= left_peak + 1) {
        return std::nullopt;
    }
    const auto n = static_cast<std::size_t>(centered.size());
    const double span = static_cast<double>(right_peak - left_peak);
    const std::size_t twice_mid = left_peak + right_peak;
    std::optional<std::size_t> best;
    std::size_t best_dist = 0;
    for (std::size_t j = left_peak + 1; j < right_peak; ++j) {
        const double v = centered[static_cast<Eigen::Index>(j)];
        // A sample is in the crossing vicinity when it lies inside the band or
        // is the sample nearer to zero across a sign change.
        bool in_vicinity = std::abs(v) <= vicinity;
        if (!in_vicinity && j > 0) {
            const double prev = centered[static_cast<Eigen::Index>(j - 1)];
            in_vicinity = opposite_signs(prev, v) && std::abs(v) <= std::abs(prev);
        }
        if (!in_vicinity && j + 1 < n) {
            const double next = centered[static_cast<Eigen::Index>(j + 1)];
            in_vicinity = opposite_signs(v, next) && std::abs(v) < std::abs(next);
        }
        if (!in_vicinity) {
            continue;
        }
        // Distances are kept in half-samples so ties compare exactly.
        const std::size_t dist = 2 * j > twice_mid ? 2 * j - twice_mid : twice_mid - 2 * j;
        if (static_cast<double>(dist) > 2.0 * mid_fraction * span) {
            continue;
        }
        if (!best || dist < best_dist) {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

SpContext prepare_sp(const SmoothedStream& stream, std::span<const pdr::StepEvent> steps,
                     Axis axis, const SpConfig& config) {
    SpContext ctx;
    ctx.axis = axis;
    ctx.config = config;
    ctx.steps.assign(steps.begin(), steps.end());
    if (stream.empty()) {
        return ctx;
    }
    const Eigen::VectorXd raw = stream.accel_axis(axis);
    const double reference = config.reference.value_or(raw.mean());
    ctx.centered = raw.array() - reference;
    const double mean = raw.mean();
    const double stdev = std::sqrt((raw.array() - mean).square().mean());
    ctx.vicinity = config.vicinity_scale * stdev;

    for (std::size_t p = 0; p + 1 < ctx.steps.size(); ++p) {
        const pdr::StepEvent& a = ctx.steps[p];
        const pdr::StepEvent& b = ctx.steps[p + 1];
        const std::int64_t gap = b.t_ms - a.t_ms;
        if (gap < config.gate.min_gap_ms || gap > config.gate.max_gap_ms) {
            continue; // not consecutive steps of one bout
        }
        if (auto j = select_crossing(ctx.centered, ctx.vicinity, a.peak_idx, b.peak_idx,
                                     config.mid_fraction)) {
            ctx.boundaries.push_back(*j);
        }
    }
    return ctx;
}

Segment sp_dw(const SmoothedStream& stream, const SpContext& context, std::size_t cursor) {
    if (cursor >= stream.size()) {
        throw Error(ErrorCode::StreamExhausted, "cursor at end of stream");
    }
    const std::size_t first = cursor + std::max<std::size_t>(context.config.min_len, 1);
    const auto it = std::lower_bound(context.boundaries.begin(), context.boundaries.end(), first);
    if (it == context.boundaries.end() || *it > cursor + context.config.horizon ||
        *it > stream.size()) {
        throw Error(ErrorCode::NoBoundaryFound,
                    "no zero-crossing boundary within " + std::to_string(context.config.horizon) +
                        " samples of " + std::to_string(cursor));
    }
    return make_segment(stream, cursor, *it, Strategy::Sp);
}

Segment sp_dw(const SmoothedStream& stream, std::size_t cursor,
              std::span<const pdr::StepEvent> steps, const SpConfig& config) {
    const SpContext ctx = prepare_sp(stream, steps, pdr::select_step_axis(stream), config);
    return sp_dw(stream, ctx, cursor);
}

SegmentationOutcome conventional_dw(const SmoothedStream& stream, std::size_t cursor,
                                    const Classifier& classifier,
                                    const ConventionalConfig& config) {
    const auto start = clock::now();
    if (cursor + config.min_len > stream.size()) {
        throw Error(ErrorCode::StreamExhausted, "tail shorter than the smallest window");
    }
    SegmentationOutcome out;
    out.strategy = Strategy::Conventional;
    out.cursor = cursor;
    for (std::size_t len = config.min_len; len <= config.max_len; ++len) {
        if (cursor + len > stream.size()) {
            break;
        }
        Segment seg = make_segment(stream, cursor, cursor + len, Strategy::Conventional);
        ClassifierVerdict v = classifier(seg);
        out.evals_used += v.evals;
        if (!out.verdict || v.top_confidence() > out.verdict->top_confidence()) {
            out.verdict = std::move(v);
            out.segment = std::move(seg);
        }
    }
    out.next_cursor = out.segment->end_idx;
    out.wall = since(start);
    return out;
}

SegmentationOutcome nlp_dw(const SmoothedStream& stream, std::size_t cursor,
                           const Classifier& classifier, const TokenConfig& config) {
    const auto start = clock::now();
    config.validate();
    if (cursor + config.token_len > stream.size()) {
        throw Error(ErrorCode::StreamExhausted, "tail shorter than one token");
    }
    SegmentationOutcome out;
    out.strategy = Strategy::Nlp;
    out.cursor = cursor;
    for (std::size_t t = 1; t <= config.max_tokens; ++t) {
        const std::size_t len = t * config.token_len;
        if (cursor + len > stream.size()) {
            break;
        }
        Segment seg = make_segment(stream, cursor, cursor + len, Strategy::Nlp);
        ClassifierVerdict v = classifier(seg);
        out.evals_used += v.evals;
        if (!out.verdict || v.top_confidence() > out.verdict->top_confidence()) {
            out.verdict = std::move(v);
            out.segment = std::move(seg);
        }
    }
    out.next_cursor = out.segment->end_idx;
    out.wall = since(start);
    return out;
}

SegmentationOutcome sp_localize(const SmoothedStream& stream, const SpContext& context,
                                std::size_t cursor, const Classifier& classifier) {
    const auto start = clock::now();
    if (cursor >= stream.size()) {
        throw Error(ErrorCode::StreamExhausted, "cursor at end of stream");
    }
    Segment seg;
    try {
        seg = sp_dw(stream, context, cursor);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoBoundaryFound) {
            throw;
        }
        const std::size_t end = std::min(stream.size(), cursor + context.config.horizon);
        seg = make_segment(stream, cursor, end, Strategy::Sp);
    }
    SegmentationOutcome out;
    out.strategy = Strategy::Sp;
    out.cursor = cursor;
    out.verdict = classifier(seg);
    out.evals_used = out.verdict->evals;
    out.next_cursor = seg.end_idx;
    out.segment = std::move(seg);
    out.wall = since(start);
    return out;
}

SegmentationOutcome neighbor_token_search(const SmoothedStream& stream, std::size_t cursor,
                                          std::size_t end, const Classifier& classifier,
                                          const TokenConfig& config) {
    config.validate();
    SegmentationOutcome out;
    out.strategy = Strategy::Fusion;
    out.cursor = cursor;
    const auto half = static_cast<std::ptrdiff_t>(config.k / 2);
    const auto last = static_cast<std::ptrdiff_t>(config.k) - half;
    const auto token = static_cast<std::ptrdiff_t>(config.token_len);
    for (std::ptrdiff_t s = -half; s <= last; ++s) {
        const std::ptrdiff_t e = static_cast<std::ptrdiff_t>(end) + s * token;
        if (e <= static_cast<std::ptrdiff_t>(cursor) ||
            e > static_cast<std::ptrdiff_t>(stream.size())) {
            continue;
        }
        Segment seg = make_segment(stream, cursor, static_cast<std::size_t>(e), Strategy::Fusion);
        ClassifierVerdict v = classifier(seg);
        out.evals_used += v.evals;
        if (!out.verdict || v.top_confidence() > out.verdict->top_confidence()) {
            out.verdict = std::move(v);
            out.segment = std::move(seg);
        }
    }
    out.next_cursor = out.segment ? out.segment->end_idx : cursor;
    return out;
}

SegmentationOutcome sp_nlp_fusion(const SmoothedStream& stream, const SpContext& context,
                                  std::size_t cursor, const Classifier& classifier,
                                  const TokenConfig& config,
                                  const FusionThresholds& thresholds) {
    const auto start = clock::now();
    config.validate();
    thresholds.validate();

    Segment seg;
    try {
        seg = sp_dw(stream, context, cursor);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoBoundaryFound) {
            throw;
        }
        SegmentationOutcome out = nlp_dw(stream, cursor, classifier, config);
        out.wall = since(start);
        return out;
    }
    seg.origin = Strategy::Fusion;

    SegmentationOutcome out;
    out.strategy = Strategy::Fusion;
    out.cursor = cursor;
    ClassifierVerdict first = classifier(seg);
    out.evals_used = first.evals;
    if (first.top_confidence() >= thresholds.tau1) {
        out.next_cursor = seg.end_idx;
        out.segment = std::move(seg);
        out.verdict = std::move(first);
        out.wall = since(start);
        return out;
    }

    SegmentationOutcome search =
        neighbor_token_search(stream, cursor, seg.end_idx, classifier, config);
    out.evals_used += search.evals_used;
    out.verdict = std::move(search.verdict);
    if (out.verdict && out.verdict->top_confidence() >= thresholds.tau2) {
        out.segment = std::move(search.segment);
        out.next_cursor = out.segment->end_idx;
    } else {
        // No valid AU: drop one token so the stream keeps moving.
        out.next_cursor = std::min(stream.size(), cursor + config.token_len);
    }
    out.wall = since(start);
    return out;
}

Segmenter::Segmenter(const SmoothedStream& stream, std::span<const pdr::StepEvent> steps,
                     Axis axis, StrategyConfig config)
    : stream_(&stream), config_(std::move(config)) {
    config_.tokens.validate();
    config_.thresholds.validate();
    if (config_.strategy == Strategy::Sp || config_.strategy == Strategy::Fusion) {
        sp_ = prepare_sp(stream, steps, axis, config_.sp);
    }
}

SegmentationOutcome Segmenter::next(std::size_t cursor, const Classifier& classifier) const {
    if (cursor + min_tail() > stream_->size()) {
        throw Error(ErrorCode::StreamExhausted, "tail shorter than " + std::to_string(min_tail()));
    }
    switch (config_.strategy) {
    case Strategy::Conventional: return conventional_dw(*stream_, cursor, classifier, config_.conventional);
    case Strategy::Nlp: return nlp_dw(*stream_, cursor, classifier, config_.tokens);
    case Strategy::Sp: return sp_localize(*stream_, sp_, cursor, classifier);
    case Strategy::Fusion:
        return sp_nlp_fusion(*stream_, sp_, cursor, classifier, config_.tokens, config_.thresholds);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown strategy");
}

std::size_t Segmenter::min_tail() const noexcept {
    switch (config_.strategy) {
    case Strategy::Conventional: return config_.conventional.min_len;
    case Strategy::Nlp:
    case Strategy::Fusion: return config_.tokens.token_len;
    case Strategy::Sp: return std::max<std::size_t>(config_.sp.min_len, 1);
    }
    return 1;
}

std::size_t Segmenter::max_span() const noexcept {
    const std::size_t nlp = config_.tokens.token_len * config_.tokens.max_tokens;
    switch (config_.strategy) {
    case Strategy::Conventional: return config_.conventional.max_len;
    case Strategy::Nlp: return nlp;
    case Strategy::Sp: return config_.sp.horizon;
    case Strategy::Fusion:
        return std::max(nlp, config_.sp.horizon +
                                 (config_.tokens.k - config_.tokens.k / 2) * config_.tokens.token_len);
    }
    return 0;
}

void emit_segmentation_trace(std::ostream& sink, std::span<const SegmentationOutcome> outcomes) {
    sink << "start_idx,end_idx,strategy,evals,confidence,label\n";
    for (const SegmentationOutcome& o : outcomes) {
        const std::size_t start = o.valid() ? o.segment->start_idx : o.cursor;
        const std::size_t end = o.valid() ? o.segment->end_idx : o.next_cursor;
        sink << start << ',' << end << ',' << name(o.strategy) << ',' << o.evals_used << ',';
        sink << (o.verdict ? csv::format(o.verdict->top_confidence()) : std::string()) << ',';
        sink << (o.valid() && o.verdict ? label_name(*o.verdict) : std::string_view("NoValidAu"))
             << '\n';
    }
}

} // namespace odw::windowing
