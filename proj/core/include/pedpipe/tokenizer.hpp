// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>

#include "pedpipe/types.hpp"

namespace pedpipe {

/// One id per UTF-8 byte.
TokenSeq tokenize(std::string_view text);

struct DecodeResult {
  std::string text;
  bool replaced_invalid = false;  // some bytes were not valid UTF-8 and became U+FFFD
  bool dropped_specials = false;  // PAD/BOS/EOS or out-of-range ids were skipped
};

DecodeResult detokenize_checked(std::span<const TokenId> ids);
std::string detokenize(std::span<const TokenId> ids);

bool is_valid_utf8(std::string_view text);
/// Each byte that cannot start or continue a well-formed sequence becomes U+FFFD.
std::string sanitize_utf8(std::string_view text, bool* replaced = nullptr);

/// Decodes UTF-8 to code points, substituting U+FFFD for malformed bytes.
std::u32string utf8_codepoints(std::string_view text);
std::string encode_utf8(char32_t cp);

}  // namespace pedpipe
