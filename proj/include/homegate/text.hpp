#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace homegate::text {

// 64-bit FNV-1a; the seed perturbs the offset basis so hashes for
// different purposes (embedding buckets, ids, fingerprints) stay in
// separate domains while remaining stable across platforms.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0);
std::string fnv1a64_hex(std::string_view bytes, std::uint64_t seed = 0);

// Unicode NFC normalization of UTF-8 input (ICU). Invalid sequences are
// replaced with U+FFFD.
std::string nfc(std::string_view utf8);

// Strips leading/trailing whitespace, including NBSP and the ideographic
// space the corpus mixes in.
std::string_view trim(std::string_view s);

// NFC + trim; the canonical form used wherever text is compared or hashed.
std::string canonical(std::string_view utf8);

// Decodes UTF-8 into code points; invalid bytes become U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view utf8);
void append_utf8(std::string& out, char32_t cp);

std::string lower_ascii(std::string_view s);

}  // namespace homegate::text
