#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/report.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::report {

namespace {

// Delimited series builder: header plus rows, 17 significant digits.
class Series {
public:
    Series(std::string name, std::initializer_list<std::string_view> columns) : name_(std::move(name)) {
        std::size_t i = 0;
        for (const auto c : columns) body_ += (i++ ? "," : "") + std::string(c);
        body_ += '\n';
    }

    Series& cell(std::string_view s) {
        sep();
        body_ += text::csv_quote(s);
        return *this;
    }
    Series& num(double v) {
        sep();
        body_ += text::format_g17(v);
        return *this;
    }
    Series& num(const std::optional<double>& v) {
        sep();
        if (v) body_ += text::format_g17(*v);
        return *this;
    }
    Series& count(std::size_t n) {
        sep();
        body_ += std::to_string(n);
        return *this;
    }
    void end() {
        body_ += '\n';
        ++rows_;
        fresh_ = true;
    }

    ManifestEntry write(const std::filesystem::path& dir) const {
        ingest::write_file_atomic((dir / name_).string(), body_);
        return {name_, rows_, text::sha256_hex(body_)};
    }

private:
    void sep() {
        if (!fresh_) body_ += ',';
        fresh_ = false;
    }

    std::string name_;
    std::string body_;
    std::size_t rows_ = 0;
    bool fresh_ = true;
};

struct Stratum {
    std::size_t n = 0;
    std::optional<double> mean, sd;
};

Stratum summarize(const std::vector<double>& v) {
    Stratum s;
    s.n = v.size();
    if (!v.empty()) s.mean = stats::mean(v);
    if (v.size() >= 2) s.sd = std::sqrt(stats::sample_variance(v));
    return s;
}

std::vector<std::string> natural_items(const RecordTable& records) {
    std::set<std::string> items;
    for (const auto& r : records.records()) {
        if (r.ok()) items.insert(r.key.consort_item);
    }
    std::vector<std::string> out(items.begin(), items.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return text::item_code_less(a, b); });
    return out;
}

std::vector<std::string> ok_models(const RecordTable& records) {
    std::set<std::string> models;
    for (const auto& r : records.records()) {
        if (r.ok()) models.insert(r.key.model_id);
    }
    return {models.begin(), models.end()};
}

// "ok" or "unavailable: <reason>".
template <class F>
std::string attempt(F&& f) {
    try {
        f();
        return "ok";
    } catch (const Error& e) {
        return std::string("unavailable: ") + e.what();
    }
}

}  // namespace

std::vector<ManifestEntry> emit_figure_data(const RecordTable& records, const ComparisonReport& comparison,
                                            const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, out_dir, ec.message());

    const auto items = natural_items(records);
    const auto models = ok_models(records);
    const std::vector<const ModelSide*> sides{&comparison.a, &comparison.b};
    const auto& cfg = comparison.config;
    std::vector<ManifestEntry> manifest;

    // Item-level means across ok records.
    auto item_series = [&](Series& s, auto selects, auto value) {
        for (const auto& group : selects) {
            for (const auto& item : items) {
                std::vector<double> v;
                for (const auto& r : records.records()) {
                    if (r.ok() && r.key.consort_item == item && group.second(r)) v.push_back(value(*r.response));
                }
                if (v.empty()) continue;
                const auto st = summarize(v);
                s.cell(group.first).cell(item).count(st.n).num(st.mean).num(st.sd);
                s.end();
            }
        }
    };

    {
        Series s("item_confidence_by_model.csv", {"model_id", "consort_item", "n", "mean_confidence", "sd_confidence"});
        std::vector<std::pair<std::string, std::function<bool(const EvaluationRecord&)>>> groups;
        for (const auto& m : models) groups.emplace_back(m, [m](const EvaluationRecord& r) { return r.key.model_id == m; });
        item_series(s, groups, [](const AuditResponse& r) { return r.confidence; });
        manifest.push_back(s.write(dir));
    }
    {
        Series s("item_uncertainty_by_prompt.csv",
                 {"prompt_strategy", "consort_item", "n", "mean_uncertainty", "sd_uncertainty"});
        std::vector<std::pair<std::string, std::function<bool(const EvaluationRecord&)>>> groups;
        for (const auto st : kAllStrategies) {
            groups.emplace_back(std::string(to_string(st)), [st](const EvaluationRecord& r) { return r.key.strategy == st; });
        }
        item_series(s, groups, [](const AuditResponse& r) { return r.uncertainty; });
        manifest.push_back(s.write(dir));
    }
    {
        Series s("confidence_f1_scatter.csv",
                 {"model_id", "pmcid", "consort_item", "prompt_strategy", "confidence_norm", "f1", "gap"});
        for (const auto* side : sides) {
            const auto& sm = side->sample;
            for (std::size_t i = 0; i < sm.keys.size(); ++i) {
                const double c = calibration::normalize_confidence(sm.confidence[i]);
                s.cell(sm.model_id).cell(sm.keys[i].pmcid).cell(sm.keys[i].consort_item)
                    .cell(to_string(sm.keys[i].strategy)).num(c).num(sm.f1[i]).num(c - sm.f1[i]);
                s.end();
            }
        }
        manifest.push_back(s.write(dir));
    }
    {
        Series s("reliability.csv",
                 {"model_id", "bin", "lo", "hi", "center", "count", "mean_conf", "mean_perf", "status"});
        for (const auto* side : sides) {
            const auto& bins = side->calibration.bins;
            for (std::size_t b = 0; b < bins.size(); ++b) {
                s.cell(side->sample.model_id).count(b).num(bins[b].lo).num(bins[b].hi)
                    .num((bins[b].lo + bins[b].hi) / 2).count(bins[b].count).num(bins[b].mean_conf)
                    .num(bins[b].mean_perf).cell(bins[b].count ? "ok" : "unavailable: empty bin");
                s.end();
            }
        }
        manifest.push_back(s.write(dir));
    }
    {
        Series s("correlation.csv", {"model_id", "method", "coefficient", "p_value", "status"});
        for (const auto* side : sides) {
            const auto& c = side->correlation;
            const std::string status = c ? "ok" : "unavailable: " + side->correlation_unavailable;
            const std::tuple<const char*, std::optional<double>, std::optional<double>> methods[] = {
                {"pearson", c ? std::optional(c->pearson_r) : std::nullopt, c ? std::optional(c->p_pearson) : std::nullopt},
                {"spearman", c ? std::optional(c->spearman_rho) : std::nullopt, c ? std::optional(c->p_spearman) : std::nullopt},
                {"kendall", c ? std::optional(c->kendall_tau) : std::nullopt, c ? std::optional(c->p_kendall) : std::nullopt},
            };
            for (const auto& [name, coef, p] : methods) {
                s.cell(side->sample.model_id).cell(name).num(coef).num(p).cell(status);
                s.end();
            }
        }
        manifest.push_back(s.write(dir));
    }
    {
        Series s("gap_by_prompt.csv", {"model_id", "prompt_strategy", "pmcid", "consort_item", "gap"});
        for (const auto* side : sides) {
            for (const auto st : kAllStrategies) {
                const auto sm = model_sample(records, side->sample.model_id, st);
                for (std::size_t i = 0; i < sm.keys.size(); ++i) {
                    s.cell(sm.model_id).cell(to_string(st)).cell(sm.keys[i].pmcid).cell(sm.keys[i].consort_item)
                        .num(calibration::normalize_confidence(sm.confidence[i]) - sm.f1[i]);
                    s.end();
                }
            }
        }
        manifest.push_back(s.write(dir));
    }
    {
        Series ece("ece_by_prompt.csv", {"model_id", "prompt_strategy", "n", "ece", "status"});
        Series rce("rce_by_prompt.csv", {"model_id", "prompt_strategy", "n", "rce", "status"});
        Series rho("spearman_by_prompt.csv", {"model_id", "prompt_strategy", "n", "spearman_rho", "p_value", "status"});
        for (const auto* side : sides) {
            for (const auto st : kAllStrategies) {
                const auto sm = model_sample(records, side->sample.model_id, st);
                const auto conf_norm = calibration::normalize_confidences(sm.confidence);
                std::optional<double> e, r, rh, p;
                auto need_data = [&] {
                    if (sm.f1.empty()) throw Error(ErrorCode::insufficient_data, sm.model_id, "no usable records");
                };
                const auto e_status = attempt([&] {
                    need_data();
                    e = calibration::ece(conf_norm, sm.f1, cfg.nbins, cfg.edge_policy).value;
                });
                const auto r_status = attempt([&] {
                    need_data();
                    r = calibration::rce(sm.confidence, sm.f1, cfg.nbins, cfg.edge_policy).value;
                });
                const auto rho_status = attempt([&] {
                    const auto c = stats::spearman(conf_norm, sm.f1);
                    rh = c.coefficient;
                    p = c.p_value;
                });
                ece.cell(sm.model_id).cell(to_string(st)).count(sm.f1.size()).num(e).cell(e_status);
                ece.end();
                rce.cell(sm.model_id).cell(to_string(st)).count(sm.f1.size()).num(r).cell(r_status);
                rce.end();
                rho.cell(sm.model_id).cell(to_string(st)).count(sm.f1.size()).num(rh).num(p).cell(rho_status);
                rho.end();
            }
        }
        manifest.push_back(ece.write(dir));
        manifest.push_back(rce.write(dir));
        manifest.push_back(rho.write(dir));
    }

    std::string listing = "file,rows,sha256\n";
    for (const auto& m : manifest) listing += m.file + "," + std::to_string(m.rows) + "," + m.sha256 + "\n";
    ingest::write_file_atomic((dir / "manifest.csv").string(), listing);
    return manifest;
}

std::string labels_to_csv(const LabelMap& labels) {
    std::string out = "pmcid,consort_item,model_id,prompt_strategy,label\n";
    for (const auto& [key, label] : labels) {
        out += text::csv_quote(key.pmcid) + "," + text::csv_quote(key.consort_item) + "," +
               text::csv_quote(key.model_id) + "," + std::string(to_string(key.strategy)) + "," +
               std::string(behavior::to_string(label)) + "\n";
    }
    return out;
}

LabelMap labels_from_csv(std::string_view content, const std::string& source) {
    std::istringstream in{std::string(content)};
    const auto rows = text::read_csv(in);
    if (rows.empty() || rows[0] != std::vector<std::string>{"pmcid", "consort_item", "model_id", "prompt_strategy", "label"}) {
        throw Error(ErrorCode::format, source, "not a behavior label file");
    }
    LabelMap out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 5) throw Error(ErrorCode::format, source, "row " + std::to_string(i + 1) + " needs 5 cells");
        std::optional<behavior::BehaviorLabel> label;
        for (const auto l : behavior::kAllLabels) {
            if (behavior::to_string(l) == r[4]) label = l;
        }
        if (!label) throw Error(ErrorCode::format, source, "unknown label '" + r[4] + "'");
        out[RecordKey{r[0], r[1], r[2], parse_strategy(r[3])}] = *label;
    }
    return out;
}

}  // namespace auditcalib::report
