#pragma once

// Small text helpers shared across modules: UTF-8 counting, normalization,
// number formatting, delimited-file reading and content hashing.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace auditcalib::text {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Number of Unicode scalar values. Invalid bytes count as one character each.
std::size_t utf8_length(std::string_view s);
// Longest prefix holding at most `max_chars` scalar values, cut on a boundary.
std::string_view utf8_prefix(std::string_view s, std::size_t max_chars);
// Longest prefix of at most `max_bytes` bytes that does not split a character.
std::string_view utf8_prefix_bytes(std::string_view s, std::size_t max_bytes);

// Lowercase, curly quotes to straight quotes, whitespace runs to one space,
// trimmed. Used for verbatim comparison and phrase matching.
std::string normalize_for_match(std::string_view s);

// Case-insensitive search for `phrase` on word boundaries (the characters
// around the match are not ASCII alphanumerics). Both inputs are expected to
// be lowercased already. Returns every match offset in ascending order.
std::vector<std::size_t> find_phrase(std::string_view haystack_lower, std::string_view phrase_lower);
bool contains_phrase(std::string_view haystack_lower, std::string_view phrase_lower);

// Lowercased alphanumeric tokens.
std::vector<std::string> tokenize_alnum(std::string_view s);

// Shortest decimal that carries 17 significant digits ("%.17g").
std::string format_g17(double value);
// Fixed 3-decimal rendering for human-facing tables.
std::string format_fixed3(double value);
// Strict full-string parse of a finite double; surrounding whitespace allowed.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_integer(std::string_view s);

// Natural ordering for checklist item codes: numeric prefix, then suffix
// ("1a" < "1b" < "2" < "3a" < "10").
bool item_code_less(std::string_view a, std::string_view b);

// RFC 4180 style reader: comma separated, double-quote quoting, "" escapes,
// embedded newlines inside quotes. Returns rows of fields; empty lines skipped.
std::vector<std::vector<std::string>> read_csv(std::istream& in);
// Quote a field for RFC 4180 output when needed.
std::string csv_quote(std::string_view field);

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

std::string read_file(const std::string& path);

}  // namespace auditcalib::text
