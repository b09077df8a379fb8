#pragma once

// Per-record evaluation: semantic F1 against expert sentences, the 0-2
// reasoning rubric and the weighted compliance score.

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auditcalib/core_model.hpp"
#include "auditcalib/ingest.hpp"

namespace auditcalib::scoring {

// Symmetric sentence similarity in [0, 1].
struct SimilarityBackend {
    std::string backend_id;
    std::function<double(std::string_view, std::string_view)> similarity;
};

// Jaccard overlap of lowercased alphanumeric token sets. Two token-free
// inputs score 1, one token-free input scores 0.
double lexical_similarity(std::string_view a, std::string_view b);
SimilarityBackend lexical_backend();

// Long-lived external scorer: receives "a<TAB>b" lines (tabs and newlines in
// sentences become spaces) and answers one number per line. Pairs are sent in
// a canonical order so the result is symmetric; identical sentences score 1
// without a round trip.
SimilarityBackend external_backend(const std::string& command,
                                   std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

inline constexpr double kDefaultThreshold = 0.8;

struct MatchedPair {
    std::size_t extracted = 0;
    std::size_t truth = 0;
    double similarity = 0.0;

    bool operator==(const MatchedPair&) const = default;
};

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<MatchedPair> matched_pairs;
};

// Greedy one-to-one matching over pairs with similarity >= threshold, taken
// in descending similarity (ties broken by sentence text, then index).
// Both sides empty gives (1, 1, 1). Throws RangeError unless 0 < threshold <= 1.
PrfResult semantic_f1(std::span<const std::string> extracted, std::span<const std::string> truth,
                      const SimilarityBackend& backend, double threshold = kDefaultThreshold);

// Item code -> key terms, with "*" as the fallback entry.
class ItemLexicon {
public:
    static ItemLexicon builtin();
    static ItemLexicon load(const std::string& path);
    static ItemLexicon parse(std::string_view csv, const std::string& source);

    bool has_entry(std::string_view item) const;
    // Lowercased terms for the item, else the fallback. Throws UnknownItem
    // when neither exists.
    const std::vector<std::string>& terms(std::string_view item) const;
    // True when the normalized text holds at least one term for the item.
    bool mentions(std::string_view item, std::string_view text) const;
    std::string hash() const;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> terms_;
};

// Lowercased phrases from a "#"-commented line list.
std::vector<std::string> parse_phrase_list(std::string_view content);
const std::vector<std::string>& default_not_found_phrases();

// +1 when the rationale agrees with the extraction (sentences present and no
// not-found marker, or none present and a marker), +1 when the reasoning
// holds a lexicon term for the item. Throws UnknownItem via the lexicon, and
// UnclassifiableRecord when the record has no response.
int reasoning_score(const EvaluationRecord& record, const ItemLexicon& lexicon,
                    std::span<const std::string> not_found_phrases = default_not_found_phrases());

struct ComplianceWeights {
    double confidence = 1.0 / 3.0;
    double strength = 1.0 / 3.0;
    double sentences = 1.0 / 3.0;
};

// Throws WeightError for negative weights or a sum away from 1 by more than 1e-9.
void validate_weights(const ComplianceWeights& w);
ComplianceWeights parse_weights(std::string_view spec);  // "w1,w2,w3"

double strength_value(EvidenceStrength s) noexcept;  // 1/3, 2/3, 1

// w1 * confidence/100 + w2 * strength + w3 * [sentences non-empty and all verbatim].
double compliance_score(const EvaluationRecord& record, const ingest::Document& document,
                        const ComplianceWeights& weights = {});

struct ScoringConfig {
    const ItemLexicon* lexicon = nullptr;
    std::vector<std::string> not_found_phrases = default_not_found_phrases();
    SimilarityBackend backend = lexical_backend();
    double threshold = kDefaultThreshold;
    ComplianceWeights weights;
};

struct ScoringSummary {
    std::size_t scored = 0;
    std::size_t skipped_status = 0;     // records that are not ok
    std::size_t missing_truth = 0;      // ok records without an annotation
};

// Fills f1 (and the gap), reasoning_score and compliance_score on every ok
// record that has a ground-truth annotation. Non-ok records are left unscored.
ScoringSummary score_records(RecordTable& table, std::span<const GroundTruthAnnotation> truth,
                             const std::function<ingest::Document(const std::string&)>& documents,
                             const ScoringConfig& config);

}  // namespace auditcalib::scoring
