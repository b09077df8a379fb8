#include "auditcalib/resources.hpp"

#include "auditcalib/error.hpp"

namespace auditcalib::resources {

std::string_view get(std::string_view name) {
    for (std::size_t i = 0; i < detail::kEntryCount; ++i) {
        if (name == detail::kEntries[i].name) return detail::kEntries[i].content;
    }
    throw Error(ErrorCode::config, std::string(name), "no such built-in resource");
}

std::vector<std::string_view> names() {
    std::vector<std::string_view> out;
    for (std::size_t i = 0; i < detail::kEntryCount; ++i) out.emplace_back(detail::kEntries[i].name);
    return out;
}

}  // namespace auditcalib::resources
