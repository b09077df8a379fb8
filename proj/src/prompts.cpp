#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/harness.hpp"
#include "auditcalib/resources.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::harness {

namespace {

std::vector<std::vector<std::string>> csv_rows(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    return text::read_csv(in);
}

std::size_t column(const std::vector<std::string>& header, std::string_view name, const std::string& source) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (text::trim(header[i]) == name) return i;
    }
    throw Error(ErrorCode::format, std::string(name), "column missing in " + source);
}

// Single left-to-right pass so substituted text is never re-expanded.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close != std::string_view::npos) {
                const auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string format_exemplars(std::span<const Exemplar> exemplars) {
    std::string out;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        if (i) out += "\n\n";
        out += "Example " + std::to_string(i + 1) + "\nSentence: \"" + exemplars[i].sentence +
               "\"\nJudgment: " + exemplars[i].judgment;
    }
    return out;
}

}  // namespace

// --- registry ---------------------------------------------------------------

ItemRegistry ItemRegistry::parse(std::string_view csv, const std::string& source) {
    const auto rows = csv_rows(csv);
    if (rows.empty()) throw Error(ErrorCode::format, source, "missing header row");
    const auto c_code = column(rows[0], "item_code", source), c_desc = column(rows[0], "description", source);
    ItemRegistry r;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() <= std::max(c_code, c_desc)) throw Error(ErrorCode::format, source, "short row");
        r.items_[text::trim(rows[i][c_code])] = text::trim(rows[i][c_desc]);
    }
    return r;
}

ItemRegistry ItemRegistry::builtin() { return parse(resources::get("consort_items.csv"), "consort_items.csv"); }
ItemRegistry ItemRegistry::load(const std::string& path) { return parse(text::read_file(path), path); }

bool ItemRegistry::contains(std::string_view code) const { return items_.find(code) != items_.end(); }

const std::string& ItemRegistry::description(std::string_view code) const {
    const auto it = items_.find(code);
    if (it == items_.end()) throw Error(ErrorCode::unknown_item, std::string(code), "not in the item registry");
    return it->second;
}

// --- exemplars --------------------------------------------------------------

ExemplarBank ExemplarBank::parse(std::string_view csv, const std::string& source) {
    const auto rows = csv_rows(csv);
    if (rows.empty()) throw Error(ErrorCode::format, source, "missing header row");
    const auto c_item = column(rows[0], "item_code", source), c_sentence = column(rows[0], "sentence", source),
               c_judgment = column(rows[0], "judgment", source);
    ExemplarBank bank;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() <= std::max({c_item, c_sentence, c_judgment})) {
            throw Error(ErrorCode::format, source, "short row");
        }
        bank.exemplars_.push_back({text::trim(row[c_item]), row[c_sentence], row[c_judgment]});
    }
    return bank;
}

ExemplarBank ExemplarBank::builtin() { return parse(resources::get("exemplars.csv"), "exemplars.csv"); }
ExemplarBank ExemplarBank::load(const std::string& path) { return parse(text::read_file(path), path); }

std::vector<Exemplar> ExemplarBank::for_item(std::string_view item) const {
    std::vector<Exemplar> specific, generic;
    for (const auto& e : exemplars_) {
        if (e.item_code == item) specific.push_back(e);
        else if (e.item_code == "*") generic.push_back(e);
    }
    return specific.empty() ? generic : specific;
}

// --- templates --------------------------------------------------------------

TemplateSet TemplateSet::builtin() {
    TemplateSet t;
    for (const auto s : kAllStrategies) {
        t.templates_.push_back(PromptTemplate{s, std::string(resources::get("templates/" + std::string(to_string(s)) + ".txt"))});
    }
    t.contract_ = resources::get("templates/output_contract.txt");
    return t;
}

TemplateSet TemplateSet::load_dir(const std::string& dir) {
    const std::filesystem::path base(dir);
    TemplateSet t;
    for (const auto s : kAllStrategies) {
        t.templates_.push_back(PromptTemplate{s, text::read_file((base / (std::string(to_string(s)) + ".txt")).string())});
    }
    t.contract_ = text::read_file((base / "output_contract.txt").string());
    return t;
}

const PromptTemplate& TemplateSet::get(PromptStrategy s) const {
    for (const auto& t : templates_) {
        if (t.strategy == s) return t;
    }
    throw Error(ErrorCode::config, std::string(to_string(s)), "no template for strategy");
}

std::string TemplateSet::hash() const {
    std::string all;
    for (const auto& t : templates_) {
        all += to_string(t.strategy);
        all.push_back('\0');
        all += t.body;
        all.push_back('\0');
    }
    all += contract_;
    return text::sha256_hex(all);
}

// --- prompts ----------------------------------------------------------------

std::string build_prompt(PromptStrategy strategy, const std::string& item, const ingest::Document& document,
                         std::span<const Exemplar> exemplars, const ItemRegistry& registry,
                         const TemplateSet& templates) {
    const std::string& description = registry.description(item);
    if (strategy == PromptStrategy::few_shot && exemplars.empty()) {
        throw Error(ErrorCode::missing_exemplars, item, "few_shot prompts need at least one exemplar");
    }
    const std::map<std::string, std::string, std::less<>> values{
        {"item_code", item},
        {"item_description", description},
        {"document", "=== ARTICLE " + document.pmcid + " ===\n" + document.combined + "\n=== END ARTICLE ==="},
        {"exemplars", strategy == PromptStrategy::few_shot ? format_exemplars(exemplars) : std::string()},
    };
    std::string prompt = fill(templates.get(strategy).body, values);
    while (!prompt.empty() && prompt.back() == '\n') prompt.pop_back();
    prompt += "\n\n";
    prompt += templates.output_contract();
    if (prompt.back() != '\n') prompt.push_back('\n');
    prompt += "\n";
    prompt += kTaskReferencePrefix;
    prompt += document.pmcid + " | item " + item + " | " + std::string(to_string(strategy)) + "\n";
    return prompt;
}

std::string build_prompt(PromptStrategy strategy, const std::string& item, const ingest::Document& document,
                         std::span<const Exemplar> exemplars) {
    static const ItemRegistry registry = ItemRegistry::builtin();
    static const TemplateSet templates = TemplateSet::builtin();
    return build_prompt(strategy, item, document, exemplars, registry, templates);
}

// --- planning ---------------------------------------------------------------

RunPlan plan_runs(std::span<const GroundTruthAnnotation> annotations, std::span<const std::string> model_ids,
                  std::span<const PromptStrategy> strategies) {
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& a : annotations) {
        if (a.consort_item != "0") pairs.emplace(a.pmcid, a.consort_item);
    }
    const std::set<std::string> models(model_ids.begin(), model_ids.end());
    const std::set<PromptStrategy> chosen(strategies.begin(), strategies.end());
    if (pairs.empty() || models.empty() || chosen.empty()) {
        throw Error(ErrorCode::empty_plan, "plan",
                    std::to_string(pairs.size()) + " pairs, " + std::to_string(models.size()) + " models, " +
                        std::to_string(chosen.size()) + " strategies");
    }
    RunPlan plan;
    for (const auto& [pmcid, item] : pairs) {
        for (const auto& model : models) {
            for (const auto s : chosen) {
                plan.entries.push_back({pmcid, item, model, s});
                ++plan.by_model[model];
                ++plan.by_strategy[std::string(to_string(s))];
            }
        }
    }
    std::sort(plan.entries.begin(), plan.entries.end());
    return plan;
}

}  // namespace auditcalib::harness
