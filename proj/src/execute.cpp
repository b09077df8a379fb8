#include <future>
#include <mutex>
#include <thread>

#include "auditcalib/error.hpp"
#include "auditcalib/harness.hpp"

namespace auditcalib::harness {

namespace {

RecordStatus status_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::unparseable_output: return RecordStatus::parse_error;
        case ErrorCode::range:
        case ErrorCode::missing_field:
        case ErrorCode::type_mismatch: return RecordStatus::validation_error;
        default: return RecordStatus::fetch_error;
    }
}

// Resolves each pmcid once; later callers share the outcome.
class DocumentCache {
public:
    explicit DocumentCache(const DocumentSource& source) : source_(source) {}

    std::shared_future<ingest::Document> get(const std::string& pmcid) {
        std::promise<ingest::Document> promise;
        {
            std::lock_guard lock(mutex_);
            const auto it = entries_.find(pmcid);
            if (it != entries_.end()) return it->second;
            entries_.emplace(pmcid, promise.get_future().share());
        }
        try {
            promise.set_value(source_(pmcid));
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
        std::lock_guard lock(mutex_);
        return entries_.at(pmcid);
    }

private:
    const DocumentSource& source_;
    std::mutex mutex_;
    std::map<std::string, std::shared_future<ingest::Document>> entries_;
};

}  // namespace

ExecuteResult execute(const RunPlan& plan, const AdapterContract& adapter, const DocumentSource& documents,
                      const ExecuteOptions& options) {
    if (!adapter.call) throw Error(ErrorCode::config, "adapter", "no adapter callable");
    if (!documents) throw Error(ErrorCode::config, "documents", "no document source");

    const ItemRegistry default_registry = options.registry ? ItemRegistry() : ItemRegistry::builtin();
    const TemplateSet default_templates = options.templates ? TemplateSet() : TemplateSet::builtin();
    const ExemplarBank default_exemplars = options.exemplars ? ExemplarBank() : ExemplarBank::builtin();
    const ItemRegistry& registry = options.registry ? *options.registry : default_registry;
    const TemplateSet& templates = options.templates ? *options.templates : default_templates;
    const ExemplarBank& exemplar_bank = options.exemplars ? *options.exemplars : default_exemplars;

    // Rendering problems are configuration errors; surface them before any call.
    for (const auto& key : plan.entries) {
        registry.description(key.consort_item);
        if (key.strategy == PromptStrategy::few_shot && exemplar_bank.for_item(key.consort_item).empty()) {
            throw Error(ErrorCode::missing_exemplars, key.consort_item, "no exemplar and no fallback");
        }
    }

    ExecuteResult result;
    std::vector<const RecordKey*> todo;
    for (const auto& key : plan.entries) {
        const EvaluationRecord* done = options.resume_from ? options.resume_from->find(key) : nullptr;
        if (done && done->status != RecordStatus::fetch_error) {
            result.table.insert(*done);
            ++result.carried_over;
        } else {
            todo.push_back(&key);
        }
    }

    DocumentCache cache(documents);
    std::mutex sink_mutex;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> calls{0};
    std::atomic<bool> interrupted{false};

    auto run_entry = [&](const RecordKey& key) {
        EvaluationRecord rec;
        rec.key = key;
        try {
            const ingest::Document doc = cache.get(key.pmcid).get();
            std::vector<Exemplar> exemplars;
            if (key.strategy == PromptStrategy::few_shot) exemplars = exemplar_bank.for_item(key.consort_item);
            const std::string prompt = build_prompt(key.strategy, key.consort_item, doc, exemplars, registry, templates);
            ++calls;
            const std::string raw = adapter.call(key.model_id, prompt);
            rec.response = ingest::parse_model_output(raw);
            rec.status = RecordStatus::ok;
        } catch (const Error& e) {
            rec.response.reset();
            rec.status = status_for(e);
        } catch (const std::exception&) {
            rec.response.reset();
            rec.status = RecordStatus::fetch_error;
        }
        std::lock_guard lock(sink_mutex);
        if (options.on_record) options.on_record(rec);
        result.table.insert(std::move(rec));
    };

    auto worker = [&] {
        for (;;) {
            if (options.stop && options.stop->load()) {
                interrupted = true;
                return;
            }
            const std::size_t i = next++;
            if (i >= todo.size()) return;
            run_entry(*todo[i]);
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, todo.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    result.adapter_calls = calls.load();
    result.interrupted = interrupted.load() && result.table.size() < plan.entries.size();
    result.table.sort_by_key();
    return result;
}

DocumentSource cache_document_source(const std::string& cache_dir, bool offline) {
    return [cache_dir, offline](const std::string& pmcid) {
        return ingest::extract_text(ingest::fetch_document(pmcid, cache_dir, offline), pmcid);
    };
}

}  // namespace auditcalib::harness
