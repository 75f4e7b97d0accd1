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

#include "odw/labels.hpp"

namespace odw {

std::string_view name(AuLabel label) noexcept {
    switch (label) {
    case AuLabel::LongStep: return "LongStep";
    case AuLabel::NormalStep: return "NormalStep";
    case AuLabel::ShortStep: return "ShortStep";
    case AuLabel::LeftTurn: return "LeftTurn";
    case AuLabel::RightTurn: return "RightTurn";
    case AuLabel::Abnormal: return "Abnormal";
    case AuLabel::Stop: return "Stop";
    }
    return "?";
}

std::string_view name(MoveState state) noexcept {
    switch (state) {
    case MoveState::Walking: return "Walking";
    case MoveState::Running: return "Running";
    case MoveState::Stop: return "Stop";
    case MoveState::DownStairs: return "DownStairs";
    case MoveState::UpStairs: return "UpStairs";
    }
    return "?";
}

std::string_view name(LabelFamily family) noexcept {
    return family == LabelFamily::MoveState ? "MoveState" : "ActionUnit";
}

std::optional<AuLabel> parse_au_label(std::string_view text) noexcept {
    for (AuLabel label : kAllAuLabels) {
        if (name(label) == text) {
            return label;
        }
    }
    // Abbreviations used in step-length tables and scripts.
    if (text == "LS") return AuLabel::LongStep;
    if (text == "NS") return AuLabel::NormalStep;
    if (text == "SS") return AuLabel::ShortStep;
    return std::nullopt;
}

std::optional<MoveState> parse_move_state(std::string_view text) noexcept {
    for (MoveState state : kAllMoveStates) {
        if (name(state) == text) {
            return state;
        }
    }
    return std::nullopt;
}

} // namespace odw
