// Copyright 2026 The qtraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QTRAJ_IO_H
#define QTRAJ_IO_H

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "qtraj/sim.h"

namespace qtraj::io {

/// Writes `bytes` to `path` via a temporary file in the same directory and a rename.
void write_file_atomic(const std::filesystem::path &path, std::string_view bytes);
std::string read_file(const std::filesystem::path &path);

nlohmann::json read_json(const std::filesystem::path &path);
void write_json(const std::filesystem::path &path, const nlohmann::json &j);

/// Dataset on disk: `<stem>.json` sidecar, `<stem>.f64` (little-endian doubles,
/// row-major, one row per shot, real parts then imaginary parts) and
/// `<stem>.labels` (one byte per shot). `stem` may include a directory.
void write_dataset(const sim::Dataset &dataset, const std::filesystem::path &stem);

/// Accepts either the stem or the sidecar path.
sim::Dataset read_dataset(const std::filesystem::path &path);

}  // namespace qtraj::io

#endif
