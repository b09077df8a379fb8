#pragma once

// Aggregation into the behavioral-pattern and calibration-comparison table
// shapes, figure-ready data series, and the command-line front end.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auditcalib/behavior.hpp"
#include "auditcalib/calibration.hpp"
#include "auditcalib/core_model.hpp"
#include "auditcalib/stats.hpp"
#include "json.hpp"

namespace auditcalib::report {

enum class GroupKey { model_id, prompt_strategy, consort_item };
std::string_view to_string(GroupKey k) noexcept;

using LabelMap = std::map<RecordKey, behavior::BehaviorLabel>;

struct Moments {
    std::size_t n = 0;
    std::optional<double> mean;
    std::optional<double> sd;  // sample sd, n >= 2
};

struct GroupSummary {
    std::vector<std::pair<GroupKey, std::string>> key;
    std::size_t n = 0;         // ok records
    std::size_t excluded = 0;  // records in the group with another status
    Moments confidence, uncertainty, keyword_reliance, alternative_interpretations;
    Moments f1, reasoning_score, compliance_score;  // over records that carry the score
    std::map<behavior::BehaviorLabel, std::size_t> label_counts;
    std::size_t classified = 0;

    const std::string& value(GroupKey k) const;
};

struct Aggregation {
    std::vector<GroupSummary> groups;
    std::size_t excluded_total = 0;
};

// One summary per key tuple holding at least one ok record, ordered by model
// id, strategy (canonical order) and natural item order. Throws EmptyInput.
Aggregation aggregate(const RecordTable& records, std::span<const GroupKey> keys, const LabelMap* labels = nullptr);

struct ComparisonConfig {
    std::size_t nbins = calibration::kDefaultBins;
    calibration::EdgePolicy edge_policy = calibration::EdgePolicy::inclusive_last;
    stats::TiePolicy tie_policy = stats::TiePolicy::exclude_from_numerator;
    stats::KendallVariant kendall = stats::KendallVariant::tau_b;
    std::size_t min_records = 3;
    double ece_reference = 0.15;
};

// Confidence and F1 of the usable records of one model, in key order.
struct ModelSample {
    std::string model_id;
    std::vector<RecordKey> keys;
    std::vector<double> confidence;  // 0-100
    std::vector<double> f1;
    std::size_t excluded = 0;        // non-ok or unscored
};

// Ok records of `model` that carry an f1 score.
ModelSample model_sample(const RecordTable& records, const std::string& model,
                         std::optional<PromptStrategy> strategy = std::nullopt);

struct ModelSide {
    ModelSample sample;
    calibration::CalibrationReport calibration;
    double confidence_mean = 0.0, confidence_sd = 0.0;
    double f1_mean = 0.0, f1_sd = 0.0;
    std::optional<stats::CorrelationResult> correlation;
    std::string correlation_unavailable;
    stats::ConcordanceResult concordance;
    stats::PercentileReport percentile;
};

struct ModelTest {
    std::optional<stats::TestResult> result;
    std::string unavailable;
};

// One row of the calibration comparison layout. Unset numbers are either not
// applicable to the row (test and p columns of single-value rows) or listed
// in `unavailable`.
struct ComparisonRow {
    std::string metric;
    std::optional<double> value_a, value_b;
    std::optional<double> sd_a, sd_b;
    std::optional<double> statistic;
    std::optional<double> p_value;
    std::optional<double> p_a, p_b;  // per-model significance of correlation rows
    bool percent = false;
    std::string interpretation;
    std::string unavailable;
};

inline constexpr std::array<std::string_view, 8> kComparisonMetrics{
    "Mean Confidence (%)",         "Mean F1 Score",  "Calibration Gap",   "Expected Calibration Error",
    "Spearman's rho",              "Kendall's tau",  "Concordance Rate",  "Percentile Gap (std)"};

struct ComparisonReport {
    ComparisonConfig config;
    ModelSide a, b;
    ModelTest confidence_test, f1_test, gap_test;
    std::vector<ComparisonRow> rows;
    std::vector<std::string> annotations;
};

inline constexpr std::string_view kEceReferenceNote =
    "ECE reference line 0.15 is a heuristic from general machine-learning calibration literature; "
    "no official clinical threshold is established for medical AI.";

// Throws InsufficientData naming the model and its usable record count.
ComparisonReport build_comparison(const RecordTable& records, const std::string& model_a, const std::string& model_b,
                                  const ComparisonConfig& config = {});

// The two model ids to compare: `requested` when given, else the two
// distinct ids in the table. Throws InsufficientData or ConfigError.
std::pair<std::string, std::string> comparison_models(const RecordTable& records,
                                                      const std::vector<std::string>& requested);

nlohmann::json to_json(const ComparisonReport& report);
// Human table, 3 decimals, tab separated.
std::string render_comparison_table(const ComparisonReport& report);
// Model x prompt behavioral profile with a dominant-pattern example.
std::string render_behavior_table(const RecordTable& records, const LabelMap* labels = nullptr);

struct ManifestEntry {
    std::string file;
    std::size_t rows = 0;
    std::string sha256;
};

// Writes the nine figure series into out_dir plus manifest.csv. Throws IoError.
std::vector<ManifestEntry> emit_figure_data(const RecordTable& records, const ComparisonReport& comparison,
                                            const std::string& out_dir);

// Sidecar files from behavior analysis.
std::string labels_to_csv(const LabelMap& labels);
LabelMap labels_from_csv(std::string_view content, const std::string& source);

// Entry point of the command-line tool. Returns the process exit code:
// 0 ok, 1 usage, 2 data, 3 I/O.
int cli_main(int argc, char** argv);

}  // namespace auditcalib::report
