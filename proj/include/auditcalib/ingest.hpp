#pragma once

// Full-text retrieval with a local cache, article XML extraction, annotation
// loading, model-output recovery and record-table serialization.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <istream>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "auditcalib/core_model.hpp"

namespace auditcalib::ingest {

inline constexpr std::size_t kMaxDocumentChars = 10000;
inline constexpr std::string_view kSectionSeparator = "\n\n";

struct Document {
    std::string pmcid;
    std::string abstract;
    std::string body;
    // abstract + "\n\n" + body, cut to kMaxDocumentChars scalar values.
    std::string combined;

    bool operator==(const Document&) const = default;
};

Document make_document(std::string pmcid, std::string abstract, std::string body);

// --- retrieval ------------------------------------------------------------

struct FetchOptions {
    std::string base_url = "https://eutils.ncbi.nlm.nih.gov";
    std::string path = "/entrez/eutils/efetch.fcgi";
    bool offline = false;
    std::size_t max_in_flight = 3;
    std::chrono::milliseconds min_spacing{350};
    int max_attempts = 4;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{30};
};

// AUDITCALIB_CACHE when set, otherwise ".auditcalib-cache".
std::string default_cache_dir();

// Cache-first retrieval. Thread safe: concurrent calls share the in-flight
// limit and the request spacing. Cache entries are written once, atomically,
// and never replaced.
class Fetcher {
public:
    Fetcher(std::string cache_dir, FetchOptions options = {});

    // Throws CacheMiss (offline, absent) or FetchError.
    std::string fetch(const std::string& pmcid);
    // Fetches every id using up to max_in_flight threads. Failures are
    // returned per id rather than thrown.
    std::map<std::string, std::string> fetch_all(const std::vector<std::string>& pmcids,
                                                 std::map<std::string, std::string>* failures = nullptr);

    std::string cache_path(const std::string& pmcid) const;
    // Network requests issued so far, retries included.
    std::size_t network_requests() const noexcept { return requests_.load(); }

private:
    std::string download(const std::string& pmcid);
    void acquire_slot();
    void release_slot();

    std::string cache_dir_;
    FetchOptions options_;
    std::atomic<std::size_t> requests_{0};
    std::mutex mutex_;
    std::condition_variable slot_free_;
    std::size_t in_flight_ = 0;
    std::chrono::steady_clock::time_point next_start_{};
};

std::string fetch_document(const std::string& pmcid, const std::string& cache_dir, bool offline);

// --- extraction -----------------------------------------------------------

// Paragraphs under <abstract> and <body>, in document order. Figures, tables,
// captions and reference lists are skipped; whitespace inside a paragraph is
// collapsed and paragraphs are joined with "\n".
// Throws ParseError (malformed XML) or EmptyDocument.
Document extract_text(std::string_view raw_xml, const std::string& pmcid);

// --- annotations ----------------------------------------------------------

struct AnnotationSet {
    // One entry per (pmcid, item), ordered by pmcid then item code.
    std::vector<GroundTruthAnnotation> annotations;
    std::size_t rows = 0;
    std::size_t dropped_rows = 0;  // item "0" or blank sentence
    std::size_t unique_papers = 0;
    std::size_t unique_items = 0;
    std::size_t unique_pairs = 0;
};

// Columns pmcid, consort_item, sentence (header required, any order).
// Throws FormatError or EmptyAnnotations.
AnnotationSet load_annotations(std::istream& in, const std::string& source = "annotations");
AnnotationSet load_annotations(const std::string& path);

// --- model output ---------------------------------------------------------

// Recovers the single JSON object in raw model text (bare, fenced or
// surrounded by prose). Throws UnparseableOutput when none or several are
// found; validation errors come from validate_response.
nlohmann::json recover_object(std::string_view raw_text);
AuditResponse parse_model_output(std::string_view raw_text);

// --- record table ---------------------------------------------------------

// Comma-delimited, one record per line, canonical column order. Cells use
// backslash escapes (\\ \, \n \r, plus \| inside the sentence list, where
// \e stands for an empty sentence). Reals carry 17 significant digits.
std::string records_to_csv(const RecordTable& table);
// Single-row pieces of the same format, for append-only journals.
std::string records_csv_header();
std::string record_to_csv_line(const EvaluationRecord& record);
RecordTable records_from_csv(std::string_view content, const std::string& source = "records");

void write_records(const RecordTable& table, const std::string& path);
RecordTable read_records(const std::string& path);

// Atomic file replacement: write to a temporary sibling, then rename.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace auditcalib::ingest
