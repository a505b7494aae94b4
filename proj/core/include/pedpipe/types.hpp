// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pedpipe {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;
/// Per-position inclusion flags (1 = include).
using Mask = std::vector<std::uint8_t>;

// Byte-level vocabulary: ids 0-255 are raw bytes, followed by three specials.
inline constexpr TokenId kPadToken = 256;
inline constexpr TokenId kBosToken = 257;
inline constexpr TokenId kEosToken = 258;
inline constexpr std::size_t kByteVocabSize = 259;

}  // namespace pedpipe
