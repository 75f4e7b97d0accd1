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

#include "odw/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "odw/error.hpp"

namespace odw::csv {

std::vector<std::string_view> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::string format(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw Error(ErrorCode::InvalidArgument, "cannot format value");
    }
    return std::string(buf.data(), end);
}

double parse_double(std::string_view field, std::size_t line, std::size_t column) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (first != last && *first == '+') {
        ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) {
        throw SourceError(ErrorCode::ParseError, line, column,
                          "expected a number, got '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) {
        throw SourceError(ErrorCode::ParseError, line, column, "non-finite value");
    }
    return value;
}

std::int64_t parse_int(std::string_view field, std::size_t line, std::size_t column) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw SourceError(ErrorCode::ParseError, line, column,
                          "expected an integer, got '" + std::string(field) + "'");
    }
    return value;
}

std::size_t parse_index(std::string_view field, std::size_t line, std::size_t column) {
    const std::int64_t value = parse_int(field, line, column);
    if (value < 0) {
        throw SourceError(ErrorCode::ParseError, line, column, "negative index");
    }
    return static_cast<std::size_t>(value);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
    }
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    }
    return out;
}

} // namespace odw::csv
