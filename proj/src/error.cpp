#include "auditcalib/error.hpp"

namespace auditcalib {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::range: return "RangeError";
        case ErrorCode::missing_field: return "MissingField";
        case ErrorCode::type_mismatch: return "TypeMismatch";
        case ErrorCode::duplicate_key: return "DuplicateKey";
        case ErrorCode::fetch: return "FetchError";
        case ErrorCode::cache_miss: return "CacheMiss";
        case ErrorCode::parse: return "ParseError";
        case ErrorCode::empty_document: return "EmptyDocument";
        case ErrorCode::format: return "FormatError";
        case ErrorCode::empty_annotations: return "EmptyAnnotations";
        case ErrorCode::unparseable_output: return "UnparseableOutput";
        case ErrorCode::io: return "IoError";
        case ErrorCode::missing_exemplars: return "MissingExemplars";
        case ErrorCode::unknown_item: return "UnknownItem";
        case ErrorCode::empty_plan: return "EmptyPlan";
        case ErrorCode::adapter_timeout: return "AdapterTimeout";
        case ErrorCode::adapter_failure: return "AdapterFailure";
        case ErrorCode::weight: return "WeightError";
        case ErrorCode::length_mismatch: return "LengthMismatch";
        case ErrorCode::constant_input: return "ConstantInput";
        case ErrorCode::degenerate_input: return "DegenerateInput";
        case ErrorCode::unclassifiable_record: return "UnclassifiableRecord";
        case ErrorCode::empty_input: return "EmptyInput";
        case ErrorCode::insufficient_data: return "InsufficientData";
        case ErrorCode::config: return "ConfigError";
    }
    return "Error";
}

namespace {

std::string compose(ErrorCode code, const std::string& subject, const std::string& message) {
    std::string out(to_string(code));
    if (!subject.empty()) out += "(" + subject + ")";
    if (!message.empty()) out += ": " + message;
    return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string subject, const std::string& message)
    : std::runtime_error(compose(code, subject, message)), code_(code), subject_(std::move(subject)) {}

Error::Error(ErrorCode code, std::string subject) : Error(code, std::move(subject), std::string{}) {}

bool Error::is_io() const noexcept {
    switch (code_) {
        case ErrorCode::fetch:
        case ErrorCode::cache_miss:
        case ErrorCode::io:
            return true;
        default:
            return false;
    }
}

}  // namespace auditcalib
