#pragma once

// Confidence calibration metrics: 10-bin ECE on raw performance, the
// min-max-normalized relative calibration error (RCE), per-record gaps and
// reliability-diagram series.
//
// Binning follows numpy semantics: edges are linspace(0, 1, nbins + 1), i.e.
// edge[i] = i * (1 / nbins) with the last edge pinned to 1.0, and membership
// is tested as edge[i] <= v < edge[i + 1]. Under EdgePolicy::strict_paper a
// normalized confidence of exactly 1.0 falls in no bin (it still counts in
// the denominator of every weight). EdgePolicy::inclusive_last closes the
// final bin instead.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace auditcalib::calibration {

enum class EdgePolicy { strict_paper, inclusive_last };

std::string to_string(EdgePolicy p);
EdgePolicy parse_edge_policy(const std::string& name);

inline constexpr std::size_t kDefaultBins = 10;

struct BinStat {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::optional<double> mean_conf;  // set only when count > 0
    std::optional<double> mean_perf;
    double weight = 0.0;  // count / total sample count

    bool operator==(const BinStat&) const = default;
};

struct BinnedError {
    double value = 0.0;
    std::vector<BinStat> bins;
};

// confidence / 100. Throws RangeError outside [0, 100].
double normalize_confidence(double confidence);
std::vector<double> normalize_confidences(std::span<const double> confidence);

struct MinMaxResult {
    std::vector<double> values;
    bool degenerate = false;  // max == min; every value mapped to 0.5
};

MinMaxResult min_max_normalize(std::span<const double> perf);

std::vector<double> bin_edges(std::size_t nbins);
// Bin holding `v` under the given policy, or nullopt when it falls outside.
std::optional<std::size_t> bin_index(double v, std::span<const double> edges, EdgePolicy policy);

// Weighted mean |mean_conf - mean_perf| over occupied bins, perf used as is.
BinnedError ece(std::span<const double> conf_norm, std::span<const double> perf,
                std::size_t nbins = kDefaultBins, EdgePolicy policy = EdgePolicy::inclusive_last);

struct RceResult {
    double value = 0.0;
    std::vector<BinStat> bins;  // mean_perf holds min-max-normalized performance
    bool degenerate = false;
};

// `confidence` on the 0-100 scale; perf is min-max normalized internally.
RceResult rce(std::span<const double> confidence, std::span<const double> perf,
              std::size_t nbins = kDefaultBins, EdgePolicy policy = EdgePolicy::inclusive_last);

struct GapStats {
    std::vector<double> gaps;
    double mean = 0.0;
    std::optional<double> sd;  // sample (n - 1) standard deviation, n >= 2
};

GapStats calibration_gaps(std::span<const double> conf_norm, std::span<const double> perf);

struct ReliabilityPoint {
    double bin_center = 0.0;
    double mean_conf = 0.0;
    double mean_perf = 0.0;
    std::size_t count = 0;

    bool operator==(const ReliabilityPoint&) const = default;
};

// Occupied bins only; the diagonal is implied by bin_center.
std::vector<ReliabilityPoint> reliability_curve(std::span<const double> conf_norm, std::span<const double> perf,
                                                std::size_t nbins = kDefaultBins,
                                                EdgePolicy policy = EdgePolicy::inclusive_last);

struct CalibrationReport {
    std::size_t n = 0;
    std::size_t nbins = kDefaultBins;
    EdgePolicy edge_policy = EdgePolicy::inclusive_last;
    double ece = 0.0;
    double rce = 0.0;
    double mean_conf = 0.0;  // normalized
    double mean_perf = 0.0;
    double mean_gap = 0.0;
    std::optional<double> gap_sd;
    std::vector<BinStat> bins;      // ECE decomposition (raw performance)
    std::vector<BinStat> rce_bins;  // RCE decomposition (normalized performance)
    bool degenerate_perf = false;
};

// Full report from 0-100 confidences and [0, 1] performance values.
CalibrationReport build_report(std::span<const double> confidence, std::span<const double> perf,
                               std::size_t nbins = kDefaultBins, EdgePolicy policy = EdgePolicy::inclusive_last);

nlohmann::json to_json(const CalibrationReport& report);
// Flattened bin table: kind,bin,lo,hi,count,mean_conf,mean_perf,weight
std::string to_rows(const CalibrationReport& report);

}  // namespace auditcalib::calibration
