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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace odw {

enum class ErrorCode {
    EmptyStream,
    NonFinite,
    ParseError,
    TimestampOrder,
    InvalidArgument,
    LengthMismatch,
    DegenerateAttitude,
    DegenerateField,
    DimMismatch,
    EmptyWindow,
    EmptyDataset,
    MixedLabelFamilies,
    FormatVersionMismatch,
    CorruptFile,
    StreamExhausted,
    NoBoundaryFound,
    MissingTableEntry,
    InvalidScript,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as an Error carrying a code that
// callers can branch on.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

// Failure tied to a position in a text source (1-based line and column;
// column 0 when the whole line is at fault).
class SourceError : public Error {
  public:
    SourceError(ErrorCode code, std::size_t line, std::size_t column, const std::string& what)
        : Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": " + what),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace odw
