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

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace odw {

/// Action Unit categories recognised by the second-stage classifier.
enum class AuLabel : int {
    LongStep = 0,
    NormalStep,
    ShortStep,
    LeftTurn,
    RightTurn,
    Abnormal,
    Stop,
};

/// Movement states recognised by the first-stage classifier.
enum class MoveState : int {
    Walking = 0,
    Running,
    Stop,
    DownStairs,
    UpStairs,
};

enum class LabelFamily : int { MoveState = 0, ActionUnit = 1 };

inline constexpr std::size_t kAuCount = 7;
inline constexpr std::size_t kMoveStateCount = 5;

inline constexpr std::array<AuLabel, kAuCount> kAllAuLabels{
    AuLabel::LongStep,  AuLabel::NormalStep, AuLabel::ShortStep, AuLabel::LeftTurn,
    AuLabel::RightTurn, AuLabel::Abnormal,   AuLabel::Stop};

inline constexpr std::array<MoveState, kMoveStateCount> kAllMoveStates{
    MoveState::Walking, MoveState::Running, MoveState::Stop, MoveState::DownStairs,
    MoveState::UpStairs};

constexpr std::size_t class_count(LabelFamily family) noexcept {
    return family == LabelFamily::MoveState ? kMoveStateCount : kAuCount;
}

std::string_view name(AuLabel label) noexcept;
std::string_view name(MoveState state) noexcept;
std::string_view name(LabelFamily family) noexcept;

std::optional<AuLabel> parse_au_label(std::string_view text) noexcept;
std::optional<MoveState> parse_move_state(std::string_view text) noexcept;

/// Short/normal/long steps displace the track; everything else does not.
constexpr bool is_step(AuLabel label) noexcept {
    return label == AuLabel::LongStep || label == AuLabel::NormalStep ||
           label == AuLabel::ShortStep;
}

constexpr bool is_turn(AuLabel label) noexcept {
    return label == AuLabel::LeftTurn || label == AuLabel::RightTurn;
}

} // namespace odw
