#include <algorithm>
#include <cmath>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/report.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::report {

namespace {

std::size_t strategy_rank(std::string_view name) {
    for (std::size_t i = 0; i < kAllStrategies.size(); ++i) {
        if (to_string(kAllStrategies[i]) == name) return i;
    }
    return kAllStrategies.size();
}

std::string key_value(const RecordKey& k, GroupKey g) {
    switch (g) {
        case GroupKey::model_id: return k.model_id;
        case GroupKey::prompt_strategy: return std::string(to_string(k.strategy));
        case GroupKey::consort_item: return k.consort_item;
    }
    return {};
}

// Orders group tuples: model by text, strategy canonically, items naturally.
bool tuple_less(const std::vector<std::pair<GroupKey, std::string>>& a,
                const std::vector<std::pair<GroupKey, std::string>>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& [g, x] = a[i];
        const auto& y = b[i].second;
        if (x == y) continue;
        switch (g) {
            case GroupKey::model_id: return x < y;
            case GroupKey::prompt_strategy: return strategy_rank(x) < strategy_rank(y);
            case GroupKey::consort_item: return text::item_code_less(x, y);
        }
    }
    return false;
}

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = v.size();
    if (v.empty()) return m;
    m.mean = stats::mean(v);
    if (v.size() >= 2) m.sd = std::sqrt(stats::sample_variance(v));
    return m;
}

struct Columns {
    std::vector<double> confidence, uncertainty, keyword, alternatives, f1, reasoning, compliance;
};

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '\n' || c == '\r' || c == '\t'; }, ' ');
    return out;
}

}  // namespace

std::string_view to_string(GroupKey k) noexcept {
    switch (k) {
        case GroupKey::model_id: return "model_id";
        case GroupKey::prompt_strategy: return "prompt_strategy";
        case GroupKey::consort_item: return "consort_item";
    }
    return "unknown";
}

const std::string& GroupSummary::value(GroupKey k) const {
    for (const auto& [g, v] : key) {
        if (g == k) return v;
    }
    throw Error(ErrorCode::config, std::string(to_string(k)), "not a grouping key of this summary");
}

Aggregation aggregate(const RecordTable& records, std::span<const GroupKey> keys, const LabelMap* labels) {
    if (records.empty()) throw Error(ErrorCode::empty_input, "records", "nothing to aggregate");
    using Tuple = std::vector<std::pair<GroupKey, std::string>>;
    std::vector<std::pair<Tuple, const EvaluationRecord*>> keyed;
    for (const auto& rec : records.records()) {
        Tuple t;
        for (const auto g : keys) t.emplace_back(g, key_value(rec.key, g));
        keyed.emplace_back(std::move(t), &rec);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& x, const auto& y) {
        if (tuple_less(x.first, y.first)) return true;
        if (tuple_less(y.first, x.first)) return false;
        return x.second->key < y.second->key;
    });

    Aggregation out;
    for (std::size_t i = 0; i < keyed.size();) {
        std::size_t j = i;
        GroupSummary g;
        g.key = keyed[i].first;
        Columns c;
        while (j < keyed.size() && keyed[j].first == keyed[i].first) {
            const auto& rec = *keyed[j].second;
            ++j;
            if (!rec.ok()) {
                ++g.excluded;
                continue;
            }
            const auto& r = *rec.response;
            c.confidence.push_back(r.confidence);
            c.uncertainty.push_back(r.uncertainty);
            c.keyword.push_back(r.keyword_reliance);
            c.alternatives.push_back(r.alternative_interpretations);
            if (rec.f1) c.f1.push_back(*rec.f1);
            if (rec.reasoning_score) c.reasoning.push_back(*rec.reasoning_score);
            if (rec.compliance_score) c.compliance.push_back(*rec.compliance_score);
            if (labels) {
                const auto it = labels->find(rec.key);
                if (it != labels->end()) {
                    ++g.label_counts[it->second];
                    ++g.classified;
                }
            }
        }
        i = j;
        out.excluded_total += g.excluded;
        g.n = c.confidence.size();
        if (g.n == 0) continue;
        g.confidence = moments(c.confidence);
        g.uncertainty = moments(c.uncertainty);
        g.keyword_reliance = moments(c.keyword);
        g.alternative_interpretations = moments(c.alternatives);
        g.f1 = moments(c.f1);
        g.reasoning_score = moments(c.reasoning);
        g.compliance_score = moments(c.compliance);
        out.groups.push_back(std::move(g));
    }
    return out;
}

std::string render_behavior_table(const RecordTable& records, const LabelMap* labels) {
    constexpr std::size_t kExampleChars = 160;
    const GroupKey keys[] = {GroupKey::model_id, GroupKey::prompt_strategy};
    const auto agg = aggregate(records, keys, labels);

    std::ostringstream out;
    out << "Model\tPrompt\tn\tDominant Pattern\tResponse Example\tConfidence\tUncertainty\tKeyword Reliance\t"
           "Alt. Interpretations\n";
    auto fmt = [](const Moments& m) { return m.mean ? text::format_fixed3(*m.mean) : std::string("unavailable"); };
    for (const auto& g : agg.groups) {
        const auto& model = g.value(GroupKey::model_id);
        const auto strategy = parse_strategy(g.value(GroupKey::prompt_strategy));

        std::optional<behavior::BehaviorLabel> dominant;
        std::size_t best = 0;
        for (const auto l : behavior::kAllLabels) {
            const auto it = g.label_counts.find(l);
            if (it != g.label_counts.end() && it->second > best) best = it->second, dominant = l;
        }
        // Lowest-key ok record showing the dominant label.
        const EvaluationRecord* pick = nullptr;
        for (const auto& rec : records.records()) {
            if (!rec.ok() || rec.key.model_id != model || rec.key.strategy != strategy) continue;
            if (dominant) {
                const auto it = labels->find(rec.key);
                if (it == labels->end() || it->second != *dominant) continue;
            }
            if (!pick || rec.key < pick->key) pick = &rec;
        }
        std::string example = pick ? one_line(pick->response->reasoning) : std::string();
        if (text::utf8_length(example) > kExampleChars) {
            example = std::string(text::utf8_prefix(example, kExampleChars)) + "...";
        }
        out << model << '\t' << to_string(strategy) << '\t' << g.n << '\t'
            << (dominant ? std::string(behavior::to_string(*dominant)) : std::string("unclassified")) << '\t'
            << example << '\t' << fmt(g.confidence) << '\t' << fmt(g.uncertainty) << '\t'
            << fmt(g.keyword_reliance) << '\t' << fmt(g.alternative_interpretations) << '\n';
    }
    if (agg.excluded_total) out << "\nExcluded records (status other than ok): " << agg.excluded_total << '\n';
    return out.str();
}

}  // namespace auditcalib::report
