#include "auditcalib/text.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "auditcalib/error.hpp"

namespace auditcalib::text {

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_alnum(unsigned char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// Byte length of the UTF-8 sequence starting at s[i]; 1 for invalid bytes.
std::size_t utf8_seq_len(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c <= 0xF4) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC2 && c <= 0xDF) len = 2;
    else return 1;
    if (len == 3 && c > 0xEF) return 1;
    if (i + len > s.size()) return 1;
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
    }
    return len;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); i += utf8_seq_len(s, i)) ++n;
    return n;
}

std::string_view utf8_prefix(std::string_view s, std::size_t max_chars) {
    std::size_t i = 0, n = 0;
    while (i < s.size() && n < max_chars) {
        i += utf8_seq_len(s, i);
        ++n;
    }
    return s.substr(0, i);
}

std::string_view utf8_prefix_bytes(std::string_view s, std::size_t max_bytes) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto len = utf8_seq_len(s, i);
        if (i + len > max_bytes) break;
        i += len;
    }
    return s.substr(0, i);
}

std::string normalize_for_match(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    auto put = [&](char c) {
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    };
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (is_space(c)) {
            pending_space = true;
            ++i;
            continue;
        }
        if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
            pending_space = true;  // no-break space
            i += 2;
            continue;
        }
        if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
            const auto t = static_cast<unsigned char>(s[i + 2]);
            if (t == 0x98 || t == 0x99 || t == 0x9A || t == 0x9B) {
                put('\'');
                i += 3;
                continue;
            }
            if (t == 0x9C || t == 0x9D || t == 0x9E || t == 0x9F) {
                put('"');
                i += 3;
                continue;
            }
        }
        if (c == '`') {
            put('\'');
            ++i;
            continue;
        }
        put(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        ++i;
    }
    return out;
}

std::vector<std::size_t> find_phrase(std::string_view haystack, std::string_view phrase) {
    std::vector<std::size_t> hits;
    if (phrase.empty()) return hits;
    const bool word_start = is_alnum(static_cast<unsigned char>(phrase.front()));
    const bool word_end = is_alnum(static_cast<unsigned char>(phrase.back()));
    for (auto pos = haystack.find(phrase); pos != std::string_view::npos; pos = haystack.find(phrase, pos + 1)) {
        const auto end = pos + phrase.size();
        const bool left_ok = !word_start || pos == 0 || !is_alnum(static_cast<unsigned char>(haystack[pos - 1]));
        const bool right_ok =
            !word_end || end == haystack.size() || !is_alnum(static_cast<unsigned char>(haystack[end]));
        if (left_ok && right_ok) hits.push_back(pos);
    }
    return hits;
}

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
    return !find_phrase(haystack, phrase).empty();
}

std::vector<std::string> tokenize_alnum(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (const char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_alnum(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string format_g17(double value) {
    std::array<char, 64> buf{};
    const int n = std::snprintf(buf.data(), buf.size(), "%.17g", value);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

std::string format_fixed3(double value) {
    std::array<char, 64> buf{};
    const int n = std::snprintf(buf.data(), buf.size(), "%.3f", value);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

std::optional<double> parse_double(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_integer(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
}

bool item_code_less(std::string_view a, std::string_view b) {
    auto split = [](std::string_view s) {
        std::size_t i = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
        long long num = -1;
        if (i > 0) std::from_chars(s.data(), s.data() + i, num);
        return std::pair<long long, std::string_view>{num, s.substr(i)};
    };
    const auto [na, sa] = split(a);
    const auto [nb, sb] = split(b);
    const bool a_num = na >= 0, b_num = nb >= 0;
    if (a_num != b_num) return a_num;
    if (na != nb) return na < nb;
    if (sa != sb) return sa < sb;
    return a < b;
}

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string data = ss.str();
    if (data.rfind("\xEF\xBB\xBF", 0) == 0) data.erase(0, 3);

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;
    auto end_row = [&] {
        if (row_started) {
            row.push_back(std::move(field));
            rows.push_back(std::move(row));
        }
        field.clear();
        row.clear();
        row_started = false;
    };
    for (std::size_t i = 0; i < data.size(); ++i) {
        const char c = data[i];
        if (in_quotes) {
            if (c != '"') {
                field.push_back(c);
            } else if (i + 1 < data.size() && data[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else {
                in_quotes = false;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                break;
            default:
                field.push_back(c);
                row_started = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::format, "csv", "unterminated quoted field");
    end_row();
    return rows;
}

std::string csv_quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::io, "sha256", "digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, path, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace auditcalib::text
