#pragma once

// Prompt rendering for the three strategies, run planning over
// (pair x model x strategy), and execution through a model adapter.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auditcalib/core_model.hpp"
#include "auditcalib/ingest.hpp"

namespace auditcalib::harness {

// Checklist item code -> short description. Ships with the CONSORT 2010 items
// plus the placeholder "0".
class ItemRegistry {
public:
    static ItemRegistry builtin();
    static ItemRegistry load(const std::string& path);
    static ItemRegistry parse(std::string_view csv, const std::string& source);

    bool contains(std::string_view code) const;
    // Throws UnknownItem.
    const std::string& description(std::string_view code) const;
    std::size_t size() const noexcept { return items_.size(); }

private:
    std::map<std::string, std::string, std::less<>> items_;
};

struct Exemplar {
    std::string item_code;  // "*" applies to any item
    std::string sentence;
    std::string judgment;

    bool operator==(const Exemplar&) const = default;
};

class ExemplarBank {
public:
    static ExemplarBank builtin();
    static ExemplarBank load(const std::string& path);
    static ExemplarBank parse(std::string_view csv, const std::string& source);

    // Exemplars written for `item`, or the "*" fallbacks when there are none.
    std::vector<Exemplar> for_item(std::string_view item) const;

private:
    std::vector<Exemplar> exemplars_;
};

struct PromptTemplate {
    PromptStrategy strategy = PromptStrategy::zero_shot_cot;
    std::string body;  // text with {item_code} {item_description} {document} {exemplars}
};

class TemplateSet {
public:
    static TemplateSet builtin();
    // Reads <dir>/<strategy>.txt and <dir>/output_contract.txt.
    static TemplateSet load_dir(const std::string& dir);

    const PromptTemplate& get(PromptStrategy s) const;
    const std::string& output_contract() const noexcept { return contract_; }
    // SHA-256 over every template and the contract, in a fixed order.
    std::string hash() const;

private:
    std::vector<PromptTemplate> templates_;
    std::string contract_;
};

inline constexpr std::string_view kTaskReferencePrefix = "Task reference: ";

// Template text with placeholders filled, then the output contract and a
// closing task-reference line "Task reference: <pmcid> | item <code> | <strategy>".
// Throws MissingExemplars (few_shot without exemplars) or UnknownItem.
std::string build_prompt(PromptStrategy strategy, const std::string& item, const ingest::Document& document,
                         std::span<const Exemplar> exemplars, const ItemRegistry& registry,
                         const TemplateSet& templates);
std::string build_prompt(PromptStrategy strategy, const std::string& item, const ingest::Document& document,
                         std::span<const Exemplar> exemplars = {});

// --- planning -------------------------------------------------------------

struct RunPlan {
    std::vector<RecordKey> entries;  // sorted by key
    std::map<std::string, std::size_t> by_model;
    std::map<std::string, std::size_t> by_strategy;
};

// Cross product of the distinct (pmcid, item) pairs, item "0" excluded, with
// the distinct models and strategies. Throws EmptyPlan.
RunPlan plan_runs(std::span<const GroundTruthAnnotation> annotations, std::span<const std::string> model_ids,
                  std::span<const PromptStrategy> strategies);

// --- adapters -------------------------------------------------------------

struct AdapterContract {
    std::string name;
    // (model_id, prompt) -> raw output text. May throw; any exception marks
    // the record fetch_error.
    std::function<std::string(const std::string&, const std::string&)> call;
    std::chrono::milliseconds timeout{120000};
};

// Deterministic stand-in for a model: every scalar is a pure function of
// (model_id, pmcid, item, strategy) and extracted sentences are verbatim
// slices of the prompt's article block.
std::string mock_adapter(const std::string& model_id, const std::string& prompt);
AdapterContract make_mock_adapter();

// Runs `command` through /bin/sh with the prompt on stdin and the model id in
// AUDITCALIB_MODEL_ID; stdout is the model output. Timeouts throw
// AdapterTimeout, non-zero exits AdapterFailure.
AdapterContract make_command_adapter(const std::string& command,
                                     std::chrono::milliseconds timeout = std::chrono::milliseconds(120000));

// --- execution ------------------------------------------------------------

using DocumentSource = std::function<ingest::Document(const std::string& pmcid)>;

struct ExecuteOptions {
    std::size_t workers = 1;
    // Completed records from an earlier invocation. Keys present with any
    // status other than fetch_error are carried over without a new call.
    const RecordTable* resume_from = nullptr;
    // Called once per new record, serialized.
    std::function<void(const EvaluationRecord&)> on_record;
    // Polled before each entry; when set, remaining entries are left undone.
    const std::atomic<bool>* stop = nullptr;
    const ItemRegistry* registry = nullptr;
    const TemplateSet* templates = nullptr;
    const ExemplarBank* exemplars = nullptr;
};

struct ExecuteResult {
    RecordTable table;  // sorted by key
    std::size_t adapter_calls = 0;
    std::size_t carried_over = 0;
    bool interrupted = false;
};

// Every entry yields one record. Adapter exceptions and unresolvable
// documents give fetch_error, unrecoverable output parse_error, schema
// violations validation_error. Throws ConfigError when the adapter or the
// document source is missing, UnknownItem / MissingExemplars for entries that
// cannot be rendered at all.
ExecuteResult execute(const RunPlan& plan, const AdapterContract& adapter, const DocumentSource& documents,
                      const ExecuteOptions& options = {});

// Offline-cache document source: fetch (never touching the network when
// offline) then extract.
DocumentSource cache_document_source(const std::string& cache_dir, bool offline = true);

}  // namespace auditcalib::harness
