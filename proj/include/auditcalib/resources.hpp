#pragma once

// Built-in configuration shipped under data/ and compiled into the library:
// prompt templates, the checklist item registry, lexicon, fallback
// exemplars, phrase tables and behavior thresholds.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace auditcalib::resources {

namespace detail {
struct Entry {
    const char* name;
    const char* content;
};
extern const Entry kEntries[];
extern const std::size_t kEntryCount;
}  // namespace detail

// Content of a shipped file by its path relative to data/. Throws ConfigError.
std::string_view get(std::string_view name);
std::vector<std::string_view> names();

}  // namespace auditcalib::resources
