// Copyright 2026 The wavectl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace wavectl::csv {

/// Rows of a comma-separated file. Lines starting with '#' are collected as
/// comments; the first remaining line is the header.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws std::out_of_range.
  std::size_t column(std::string_view name) const;
};

std::vector<std::string> split(std::string_view line, char sep = ',');
Table read(const std::filesystem::path& path);

double to_double(const std::string& cell);
int to_int(const std::string& cell);

/// Opens `path` for writing, creating parent directories; throws on failure.
std::ofstream open_out(const std::filesystem::path& path);

}  // namespace wavectl::csv
