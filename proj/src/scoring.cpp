#include "auditcalib/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "auditcalib/behavior.hpp"
#include "auditcalib/error.hpp"
#include "auditcalib/process.hpp"
#include "auditcalib/resources.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::scoring {

namespace {

std::set<std::string> token_set(std::string_view s) {
    auto tokens = text::tokenize_alnum(s);
    return {std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end())};
}

std::string single_line(std::string_view s) {
    std::string out(s);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    return out;
}

const AuditResponse& response_of(const EvaluationRecord& record) {
    if (!record.ok()) {
        throw Error(ErrorCode::unclassifiable_record, to_string(record.key),
                    "record status is " + std::string(to_string(record.status)));
    }
    return *record.response;
}

}  // namespace

double lexical_similarity(std::string_view a, std::string_view b) {
    const auto ta = token_set(a), tb = token_set(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : ta) common += tb.count(t);
    return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

SimilarityBackend lexical_backend() { return {"lexical-jaccard", lexical_similarity}; }

SimilarityBackend external_backend(const std::string& command, std::chrono::milliseconds timeout) {
    auto proc = std::make_shared<process::LineProcess>(command, timeout);
    auto fn = [proc, command](std::string_view a, std::string_view b) -> double {
        if (a == b && !text::trim(a).empty()) return 1.0;
        std::string x = single_line(a), y = single_line(b);
        if (y < x) std::swap(x, y);
        const std::string reply = proc->exchange(x + "\t" + y);
        const auto value = text::parse_double(reply);
        if (!value) throw Error(ErrorCode::type_mismatch, command, "similarity reply is not a number: " + reply);
        if (*value < 0.0 || *value > 1.0) throw Error(ErrorCode::range, command, "similarity outside [0, 1]: " + reply);
        return *value;
    };
    return {"external:" + command, fn};
}

PrfResult semantic_f1(std::span<const std::string> extracted, std::span<const std::string> truth,
                      const SimilarityBackend& backend, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::range, "threshold", "must lie in (0, 1], got " + text::format_g17(threshold));
    }
    PrfResult r;
    if (extracted.empty() && truth.empty()) {
        r.precision = r.recall = r.f1 = 1.0;
        return r;
    }
    if (extracted.empty() || truth.empty()) return r;

    std::vector<MatchedPair> candidates;
    for (std::size_t i = 0; i < extracted.size(); ++i) {
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double s = backend.similarity(extracted[i], truth[j]);
            if (s >= threshold) candidates.push_back({i, j, s});
        }
    }
    // Ties resolve on sentence text before position, so reordering the
    // inputs cannot change which texts get paired.
    std::sort(candidates.begin(), candidates.end(), [&](const MatchedPair& p, const MatchedPair& q) {
        if (p.similarity != q.similarity) return p.similarity > q.similarity;
        if (extracted[p.extracted] != extracted[q.extracted]) return extracted[p.extracted] < extracted[q.extracted];
        if (truth[p.truth] != truth[q.truth]) return truth[p.truth] < truth[q.truth];
        return std::tie(p.extracted, p.truth) < std::tie(q.extracted, q.truth);
    });
    std::vector<bool> used_e(extracted.size()), used_t(truth.size());
    for (const auto& c : candidates) {
        if (used_e[c.extracted] || used_t[c.truth]) continue;
        used_e[c.extracted] = used_t[c.truth] = true;
        r.matched_pairs.push_back(c);
    }
    const double m = static_cast<double>(r.matched_pairs.size());
    r.precision = m / static_cast<double>(extracted.size());
    r.recall = m / static_cast<double>(truth.size());
    r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

// --- lexicon ----------------------------------------------------------------

ItemLexicon ItemLexicon::parse(std::string_view csv, const std::string& source) {
    std::istringstream in{std::string(csv)};
    const auto rows = text::read_csv(in);
    if (rows.empty()) throw Error(ErrorCode::format, source, "missing header row");
    std::size_t c_item = rows[0].size(), c_term = rows[0].size();
    for (std::size_t i = 0; i < rows[0].size(); ++i) {
        const auto name = text::trim(rows[0][i]);
        if (name == "item_code") c_item = i;
        if (name == "term") c_term = i;
    }
    if (c_item == rows[0].size() || c_term == rows[0].size()) {
        throw Error(ErrorCode::format, source, "lexicon needs item_code and term columns");
    }
    ItemLexicon lex;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() <= std::max(c_item, c_term)) throw Error(ErrorCode::format, source, "short row");
        const auto term = text::normalize_for_match(rows[i][c_term]);
        if (term.empty()) continue;
        auto& terms = lex.terms_[text::trim(rows[i][c_item])];
        if (std::find(terms.begin(), terms.end(), term) == terms.end()) terms.push_back(term);
    }
    return lex;
}

ItemLexicon ItemLexicon::builtin() { return parse(resources::get("lexicon.csv"), "lexicon.csv"); }
ItemLexicon ItemLexicon::load(const std::string& path) { return parse(text::read_file(path), path); }

bool ItemLexicon::has_entry(std::string_view item) const { return terms_.find(item) != terms_.end(); }

const std::vector<std::string>& ItemLexicon::terms(std::string_view item) const {
    auto it = terms_.find(item);
    if (it == terms_.end()) it = terms_.find(std::string_view("*"));
    if (it == terms_.end()) throw Error(ErrorCode::unknown_item, std::string(item), "no lexicon entry and no fallback");
    return it->second;
}

bool ItemLexicon::mentions(std::string_view item, std::string_view text) const {
    const auto normalized = text::normalize_for_match(text);
    const auto& list = terms(item);
    return std::any_of(list.begin(), list.end(),
                       [&](const std::string& t) { return text::contains_phrase(normalized, t); });
}

std::string ItemLexicon::hash() const {
    std::string all;
    for (const auto& [item, terms] : terms_) {
        for (const auto& t : terms) all += item + "," + t + "\n";
    }
    return text::sha256_hex(all);
}

std::vector<std::string> parse_phrase_list(std::string_view content) {
    std::vector<std::string> out;
    std::istringstream in{std::string(content)};
    for (std::string line; std::getline(in, line);) {
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.push_back(text::normalize_for_match(t));
    }
    return out;
}

const std::vector<std::string>& default_not_found_phrases() {
    static const std::vector<std::string> phrases = parse_phrase_list(resources::get("not_found_phrases.txt"));
    return phrases;
}

int reasoning_score(const EvaluationRecord& record, const ItemLexicon& lexicon,
                    std::span<const std::string> not_found_phrases) {
    const auto& r = response_of(record);
    const auto reasoning = text::normalize_for_match(r.reasoning);
    const bool marker = std::any_of(not_found_phrases.begin(), not_found_phrases.end(),
                                    [&](const std::string& p) { return text::contains_phrase(reasoning, p); });
    const bool has_sentences = !r.extracted_sentences.empty();
    int score = has_sentences != marker ? 1 : 0;
    if (lexicon.mentions(record.key.consort_item, reasoning)) ++score;
    return score;
}

// --- compliance -------------------------------------------------------------

void validate_weights(const ComplianceWeights& w) {
    for (const double v : {w.confidence, w.strength, w.sentences}) {
        if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::weight, "weights", "weights must be non-negative");
    }
    const double sum = w.confidence + w.strength + w.sentences;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::weight, "weights", "weights sum to " + text::format_g17(sum) + ", expected 1");
    }
}

ComplianceWeights parse_weights(std::string_view spec) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = std::min(spec.find(',', start), spec.size());
        const auto v = text::parse_double(spec.substr(start, comma - start));
        if (!v) throw Error(ErrorCode::weight, "weights", "cannot parse '" + std::string(spec) + "'");
        values.push_back(*v);
        start = comma + 1;
    }
    if (values.size() != 3) throw Error(ErrorCode::weight, "weights", "expected three comma-separated values");
    ComplianceWeights w{values[0], values[1], values[2]};
    validate_weights(w);
    return w;
}

double strength_value(EvidenceStrength s) noexcept {
    switch (s) {
        case EvidenceStrength::weak: return 1.0 / 3.0;
        case EvidenceStrength::moderate: return 2.0 / 3.0;
        case EvidenceStrength::strong: return 1.0;
    }
    return 0.0;
}

double compliance_score(const EvaluationRecord& record, const ingest::Document& document,
                        const ComplianceWeights& weights) {
    validate_weights(weights);
    const auto& r = response_of(record);
    const bool valid = !r.extracted_sentences.empty() && behavior::all_verbatim(r.extracted_sentences, document);
    const double score = weights.confidence * (r.confidence / 100.0) +
                         weights.strength * strength_value(r.evidence_strength) +
                         weights.sentences * (valid ? 1.0 : 0.0);
    return std::clamp(score, 0.0, 1.0);
}

// --- batch ------------------------------------------------------------------

ScoringSummary score_records(RecordTable& table, std::span<const GroundTruthAnnotation> truth,
                             const std::function<ingest::Document(const std::string&)>& documents,
                             const ScoringConfig& config) {
    if (!config.lexicon) throw Error(ErrorCode::config, "lexicon", "scoring needs an item lexicon");
    validate_weights(config.weights);
    std::map<std::pair<std::string, std::string>, const GroundTruthAnnotation*> by_pair;
    for (const auto& a : truth) by_pair[{a.pmcid, a.consort_item}] = &a;
    std::map<std::string, ingest::Document> docs;

    ScoringSummary summary;
    for (auto& record : table.records()) {
        if (!record.ok()) {
            ++summary.skipped_status;
            continue;
        }
        const auto it = by_pair.find({record.key.pmcid, record.key.consort_item});
        if (it == by_pair.end()) {
            ++summary.missing_truth;
            continue;
        }
        auto doc = docs.find(record.key.pmcid);
        if (doc == docs.end()) doc = docs.emplace(record.key.pmcid, documents(record.key.pmcid)).first;

        const auto prf = semantic_f1(record.response->extracted_sentences, it->second->benchmark_sentences,
                                     config.backend, config.threshold);
        record.set_f1(prf.f1);
        record.reasoning_score = reasoning_score(record, *config.lexicon, config.not_found_phrases);
        record.compliance_score = compliance_score(record, doc->second, config.weights);
        ++summary.scored;
    }
    return summary;
}

}  // namespace auditcalib::scoring
