// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace pedpipe::cli {

std::size_t edit_distance(const std::string& a, const std::string& b);

/// Closest candidate within a distance of max(2, |word| / 3), if any.
std::optional<std::string> closest_match(const std::string& word, const std::vector<std::string>& candidates);

}  // namespace pedpipe::cli
