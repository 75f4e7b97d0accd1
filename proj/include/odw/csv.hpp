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

// Small helpers shared by the CSV readers and writers.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace odw::csv {

/// Splits one line on ','. A trailing '\r' is dropped.
std::vector<std::string_view> split(std::string_view line);

/// Shortest decimal text that parses back to exactly the same double.
std::string format(double value);

// Parsers throw SourceError(ParseError) naming the 1-based line and column.
double parse_double(std::string_view field, std::size_t line, std::size_t column);
std::int64_t parse_int(std::string_view field, std::size_t line, std::size_t column);
std::size_t parse_index(std::string_view field, std::size_t line, std::size_t column);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

} // namespace odw::csv
