#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace auditcalib {

enum class ErrorCode {
    // validation
    range,
    missing_field,
    type_mismatch,
    duplicate_key,
    // ingest
    fetch,
    cache_miss,
    parse,
    empty_document,
    format,
    empty_annotations,
    unparseable_output,
    io,
    // harness
    missing_exemplars,
    unknown_item,
    empty_plan,
    adapter_timeout,
    adapter_failure,
    // scoring / stats
    weight,
    length_mismatch,
    constant_input,
    degenerate_input,
    // behavior / report
    unclassifiable_record,
    empty_input,
    insufficient_data,
    config,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as this type. `subject` names the
// offending field, item, model or path so callers can report it precisely.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string subject, const std::string& message);
    Error(ErrorCode code, std::string subject);

    ErrorCode code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

    // I/O-class failures (network, cache, filesystem) as opposed to bad data.
    bool is_io() const noexcept;

private:
    ErrorCode code_;
    std::string subject_;
};

}  // namespace auditcalib
