/* Copyright 2026 The mbrkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mbrkit::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Returns nullopt on malformed
/// input (overlong forms, surrogates, truncated sequences, > U+10FFFF).
std::optional<std::u32string> try_decode(std::string_view bytes);

/// Throws an encoding error naming `line_number` (1-based) when non-zero.
std::u32string decode(std::string_view bytes, std::size_t line_number = 0);

std::string encode(std::u32string_view text);

bool is_valid(std::string_view bytes);

/// Number of scalar values. Assumes valid UTF-8.
std::size_t length(std::string_view bytes);

/// Whitespace as understood by Python's str.split(), which is what the
/// reference metric tooling uses.
bool is_space(char32_t c);

bool is_ascii_digit(char32_t c);

std::u32string strip_whitespace(std::u32string_view text);

std::u32string rstrip(std::u32string_view text);

std::vector<std::u32string_view> split_whitespace(std::u32string_view text);

bool has_line_break(std::string_view text);

}  // namespace mbrkit::utf8
