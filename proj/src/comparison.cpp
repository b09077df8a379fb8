#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/report.hpp"
#include "auditcalib/text.hpp"

using nlohmann::json;

namespace auditcalib::report {

namespace {

double sd_of(std::span<const double> v) { return v.size() >= 2 ? std::sqrt(stats::sample_variance(v)) : 0.0; }

std::vector<double> gaps_of(const ModelSample& s) {
    std::vector<double> g(s.f1.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = calibration::normalize_confidence(s.confidence[i]) - s.f1[i];
    return g;
}

ModelSide side_for(const RecordTable& records, const std::string& model, const ComparisonConfig& config) {
    ModelSide side;
    side.sample = model_sample(records, model);
    const auto& s = side.sample;
    if (s.f1.size() < config.min_records) {
        throw Error(ErrorCode::insufficient_data, model,
                    std::to_string(s.f1.size()) + " usable records, " + std::to_string(config.min_records) +
                        " required");
    }
    side.calibration = calibration::build_report(s.confidence, s.f1, config.nbins, config.edge_policy);
    side.confidence_mean = stats::mean(s.confidence);
    side.confidence_sd = sd_of(s.confidence);
    side.f1_mean = stats::mean(s.f1);
    side.f1_sd = sd_of(s.f1);
    const auto conf_norm = calibration::normalize_confidences(s.confidence);
    try {
        side.correlation = stats::correlate(conf_norm, s.f1, config.kendall);
    } catch (const Error& e) {
        side.correlation_unavailable = e.what();
    }
    side.concordance = stats::concordance_rate(s.confidence, s.f1, config.tie_policy);
    side.percentile = stats::percentile_gap(s.confidence, s.f1);
    return side;
}

ModelTest welch(std::span<const double> a, std::span<const double> b) {
    ModelTest t;
    try {
        t.result = stats::welch_t(a, b);
    } catch (const Error& e) {
        t.unavailable = e.what();
    }
    return t;
}

std::string strength_word(double r) {
    const double a = std::abs(r);
    if (a < 0.1) return "negligible";
    if (a < 0.3) return "weak";
    if (a < 0.5) return "moderate";
    return "strong";
}

std::string test_interpretation(const ModelTest& t) {
    if (!t.result) return "Test unavailable";
    if (t.result->p_value < 0.05) {
        return "Significant difference" +
               (t.result->effect ? " (" + stats::to_string(*t.result->effect) + " effect)" : std::string());
    }
    return "No significant difference";
}

ComparisonRow test_row(std::string metric, double a, double sd_a, double b, double sd_b, const ModelTest& t) {
    ComparisonRow row;
    row.metric = std::move(metric);
    row.value_a = a;
    row.value_b = b;
    row.sd_a = sd_a;
    row.sd_b = sd_b;
    if (t.result) {
        row.statistic = t.result->statistic;
        row.p_value = t.result->p_value;
    } else {
        row.unavailable = "inter-model test: " + t.unavailable;
    }
    row.interpretation = test_interpretation(t);
    return row;
}

ComparisonRow correlation_row(std::string metric, const ModelSide& a, const ModelSide& b, bool spearman) {
    ComparisonRow row;
    row.metric = std::move(metric);
    auto fill = [&](const ModelSide& s, std::optional<double>& value, std::optional<double>& p) {
        if (!s.correlation) {
            row.unavailable += (row.unavailable.empty() ? "" : "; ") + s.sample.model_id + ": " + s.correlation_unavailable;
            return;
        }
        value = spearman ? s.correlation->spearman_rho : s.correlation->kendall_tau;
        p = spearman ? s.correlation->p_spearman : s.correlation->p_kendall;
    };
    fill(a, row.value_a, row.p_a);
    fill(b, row.value_b, row.p_b);
    if (row.value_a && row.value_b) {
        row.interpretation = strength_word(*row.value_a) + " / " + strength_word(*row.value_b) +
                             (spearman ? " monotone association" : " rank consistency");
    }
    return row;
}

std::string p_text(double p) { return p < 0.001 ? "< 0.001" : text::format_fixed3(p); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json side_json(const ModelSide& s) {
    json j{{"model_id", s.sample.model_id},
           {"n", s.sample.f1.size()},
           {"excluded", s.sample.excluded},
           {"confidence_mean", s.confidence_mean},
           {"confidence_sd", s.confidence_sd},
           {"f1_mean", s.f1_mean},
           {"f1_sd", s.f1_sd},
           {"calibration", calibration::to_json(s.calibration)},
           {"concordance", stats::to_json(s.concordance)},
           {"percentile", stats::to_json(s.percentile)}};
    j["correlation"] = s.correlation ? stats::to_json(*s.correlation) : json(nullptr);
    if (!s.correlation) j["correlation_unavailable"] = s.correlation_unavailable;
    return j;
}

json test_json(const ModelTest& t) {
    if (t.result) return stats::to_json(*t.result);
    return {{"unavailable", t.unavailable}};
}

}  // namespace

ModelSample model_sample(const RecordTable& records, const std::string& model, std::optional<PromptStrategy> strategy) {
    std::vector<const EvaluationRecord*> picked;
    ModelSample s;
    s.model_id = model;
    for (const auto& rec : records.records()) {
        if (rec.key.model_id != model || (strategy && rec.key.strategy != *strategy)) continue;
        if (!rec.ok() || !rec.f1) {
            ++s.excluded;
            continue;
        }
        picked.push_back(&rec);
    }
    std::sort(picked.begin(), picked.end(), [](const auto* x, const auto* y) { return x->key < y->key; });
    for (const auto* rec : picked) {
        s.keys.push_back(rec->key);
        s.confidence.push_back(rec->response->confidence);
        s.f1.push_back(*rec->f1);
    }
    return s;
}

std::pair<std::string, std::string> comparison_models(const RecordTable& records,
                                                      const std::vector<std::string>& requested) {
    if (!requested.empty()) {
        if (requested.size() != 2 || requested[0] == requested[1]) {
            throw Error(ErrorCode::config, "models", "exactly two distinct model ids are compared");
        }
        return {requested[0], requested[1]};
    }
    std::set<std::string> models;
    for (const auto& r : records.records()) models.insert(r.key.model_id);
    if (models.size() > 2) throw Error(ErrorCode::config, "models", "more than two models present; choose two");
    if (models.empty()) throw Error(ErrorCode::insufficient_data, "model_a", "0 usable records");
    if (models.size() == 1) throw Error(ErrorCode::insufficient_data, "model_b", "0 usable records");
    return {*models.begin(), *models.rbegin()};
}

ComparisonReport build_comparison(const RecordTable& records, const std::string& model_a, const std::string& model_b,
                                  const ComparisonConfig& config) {
    ComparisonReport r;
    r.config = config;
    r.a = side_for(records, model_a, config);
    r.b = side_for(records, model_b, config);

    const auto gaps_a = gaps_of(r.a.sample), gaps_b = gaps_of(r.b.sample);
    r.confidence_test = welch(r.a.sample.confidence, r.b.sample.confidence);
    r.f1_test = welch(r.a.sample.f1, r.b.sample.f1);
    r.gap_test = welch(gaps_a, gaps_b);

    r.rows.push_back(test_row(std::string(kComparisonMetrics[0]), r.a.confidence_mean, r.a.confidence_sd,
                              r.b.confidence_mean, r.b.confidence_sd, r.confidence_test));
    r.rows.push_back(
        test_row(std::string(kComparisonMetrics[1]), r.a.f1_mean, r.a.f1_sd, r.b.f1_mean, r.b.f1_sd, r.f1_test));
    r.rows.push_back(test_row(std::string(kComparisonMetrics[2]), r.a.calibration.mean_gap,
                              r.a.calibration.gap_sd.value_or(0.0), r.b.calibration.mean_gap,
                              r.b.calibration.gap_sd.value_or(0.0), r.gap_test));

    ComparisonRow ece;
    ece.metric = kComparisonMetrics[3];
    ece.value_a = r.a.calibration.ece;
    ece.value_b = r.b.calibration.ece;
    const bool above_a = *ece.value_a > config.ece_reference, above_b = *ece.value_b > config.ece_reference;
    const std::string ref = text::format_fixed3(config.ece_reference);
    ece.interpretation = above_a && above_b ? "Both models above the " + ref + " reference line"
                         : above_a          ? r.a.sample.model_id + " above the " + ref + " reference line"
                         : above_b          ? r.b.sample.model_id + " above the " + ref + " reference line"
                                            : "Both models at or below the " + ref + " reference line";
    r.rows.push_back(ece);

    r.rows.push_back(correlation_row(std::string(kComparisonMetrics[4]), r.a, r.b, true));
    r.rows.push_back(correlation_row(std::string(kComparisonMetrics[5]), r.a, r.b, false));

    ComparisonRow conc;
    conc.metric = kComparisonMetrics[6];
    conc.value_a = r.a.concordance.rate;
    conc.value_b = r.b.concordance.rate;
    conc.interpretation = "Share of concordant confidence-performance pairs";
    r.rows.push_back(conc);

    ComparisonRow pct;
    pct.metric = kComparisonMetrics[7];
    pct.value_a = r.a.percentile.gap_sd;
    pct.value_b = r.b.percentile.gap_sd;
    pct.percent = true;
    pct.interpretation = "Spread of percentile rank gaps";
    r.rows.push_back(pct);

    r.annotations.emplace_back(kEceReferenceNote);
    r.annotations.push_back("Records with a status other than ok, or without an F1 score, are excluded: " +
                            r.a.sample.model_id + " " + std::to_string(r.a.sample.excluded) + ", " +
                            r.b.sample.model_id + " " + std::to_string(r.b.sample.excluded) + ".");
    return r;
}

json to_json(const ComparisonReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"metric", row.metric},
                        {"value_a", opt(row.value_a)},
                        {"value_b", opt(row.value_b)},
                        {"sd_a", opt(row.sd_a)},
                        {"sd_b", opt(row.sd_b)},
                        {"statistic", opt(row.statistic)},
                        {"p_value", opt(row.p_value)},
                        {"p_a", opt(row.p_a)},
                        {"p_b", opt(row.p_b)},
                        {"percent", row.percent},
                        {"interpretation", row.interpretation},
                        {"unavailable", row.unavailable}});
    }
    return {{"config",
             {{"nbins", r.config.nbins},
              {"edge_policy", calibration::to_string(r.config.edge_policy)},
              {"tie_policy", stats::to_string(r.config.tie_policy)},
              {"kendall", r.config.kendall == stats::KendallVariant::tau_b ? "tau_b" : "tau_a"},
              {"min_records", r.config.min_records},
              {"ece_reference", r.config.ece_reference}}},
            {"model_a", side_json(r.a)},
            {"model_b", side_json(r.b)},
            {"tests",
             {{"confidence", test_json(r.confidence_test)},
              {"f1", test_json(r.f1_test)},
              {"calibration_gap", test_json(r.gap_test)}}},
            {"rows", rows},
            {"annotations", r.annotations}};
}

std::string render_comparison_table(const ComparisonReport& r) {
    std::ostringstream out;
    out << "Metric\t" << r.a.sample.model_id << '\t' << r.b.sample.model_id
        << "\tStatistical Test\tp-value\tInterpretation\n";
    for (const auto& row : r.rows) {
        auto value = [&](const std::optional<double>& v, const std::optional<double>& sd) {
            if (!v) return std::string("unavailable");
            std::string s = text::format_fixed3(*v) + (row.percent ? "%" : "");
            if (sd) s += " \xC2\xB1 " + text::format_fixed3(*sd);
            return s;
        };
        std::string test = "n/a", p = "n/a";
        if (row.statistic) test = "t = " + text::format_fixed3(*row.statistic);
        if (row.p_value) p = p_text(*row.p_value);
        if (row.p_a || row.p_b) {
            p = (row.p_a ? p_text(*row.p_a) : std::string("unavailable")) + " / " +
                (row.p_b ? p_text(*row.p_b) : std::string("unavailable"));
        }
        if (!row.unavailable.empty() && !row.statistic && (row.metric == kComparisonMetrics[0] ||
                                                           row.metric == kComparisonMetrics[1] ||
                                                           row.metric == kComparisonMetrics[2])) {
            test = p = "unavailable";
        }
        out << row.metric << '\t' << value(row.value_a, row.sd_a) << '\t' << value(row.value_b, row.sd_b) << '\t'
            << test << '\t' << p << '\t' << row.interpretation << '\n';
    }
    out << '\n';
    for (const auto& a : r.annotations) out << "Note: " << a << '\n';
    for (const auto& row : r.rows) {
        if (!row.unavailable.empty()) out << "Unavailable (" << row.metric << "): " << row.unavailable << '\n';
    }
    out << "Settings: nbins=" << r.config.nbins << " edge_policy=" << calibration::to_string(r.config.edge_policy)
        << " tie_policy=" << stats::to_string(r.config.tie_policy)
        << " kendall=" << (r.config.kendall == stats::KendallVariant::tau_b ? "tau_b" : "tau_a") << " n="
        << r.a.sample.f1.size() << "/" << r.b.sample.f1.size() << '\n';
    return out.str();
}

}  // namespace auditcalib::report
