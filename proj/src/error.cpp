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

#include "odw/error.hpp"

namespace odw {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TimestampOrder: return "TimestampOrder";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateAttitude: return "DegenerateAttitude";
    case ErrorCode::DegenerateField: return "DegenerateField";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MixedLabelFamilies: return "MixedLabelFamilies";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::StreamExhausted: return "StreamExhausted";
    case ErrorCode::NoBoundaryFound: return "NoBoundaryFound";
    case ErrorCode::MissingTableEntry: return "MissingTableEntry";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

} // namespace odw
