#pragma once

// Correlation, rank-agreement, hypothesis tests and effect sizes used to
// compare confidence against measured performance and models against each
// other.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace auditcalib::stats {

// --- distributions -------------------------------------------------------

// I_x(a, b) by continued fraction (modified Lentz).
double regularized_incomplete_beta(double a, double b, double x);
// Two-sided p value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);
double normal_two_sided_p(double z);

// --- descriptive ---------------------------------------------------------

// Order-independent mean and sample variance (values are summed in sorted
// order, so any permutation of the input gives bit-identical results).
double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);

// 1-based ranks; tied values receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> v);

// --- correlation ---------------------------------------------------------

struct Correlation {
    double coefficient = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

enum class KendallVariant { tau_b, tau_a };

// Throws LengthMismatch (n < 3 or unequal) or ConstantInput.
Correlation pearson(std::span<const double> x, std::span<const double> y);
// Pearson on average ranks; p from the t transform with n - 2 df.
Correlation spearman(std::span<const double> x, std::span<const double> y);
// Tie-corrected tau-b by default; p from the normal approximation with tie
// corrections. Throws DegenerateInput when every pair is tied in x or y.
Correlation kendall_tau(std::span<const double> x, std::span<const double> y,
                        KendallVariant variant = KendallVariant::tau_b);

struct CorrelationResult {
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
    double kendall_tau = 0.0;
    double p_pearson = 1.0;
    double p_spearman = 1.0;
    double p_kendall = 1.0;
    std::size_t n = 0;
};

CorrelationResult correlate(std::span<const double> x, std::span<const double> y,
                            KendallVariant variant = KendallVariant::tau_b);

// Pair classification over all n(n-1)/2 unordered pairs, computed in
// O(n log n) by sorting and counting inversions.
struct PairCounts {
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t tied_x = 0;     // pairs with equal x
    std::int64_t tied_y = 0;     // pairs with equal y
    std::int64_t tied_both = 0;  // pairs equal in both
    std::int64_t total = 0;

    // Pairs tied in x or in y.
    std::int64_t tied() const noexcept { return tied_x + tied_y - tied_both; }
};

PairCounts pair_counts(std::span<const double> x, std::span<const double> y);

// --- concordance and percentiles ----------------------------------------

enum class TiePolicy { exclude_from_numerator, drop_pairs };

std::string to_string(TiePolicy p);
TiePolicy parse_tie_policy(const std::string& name);

struct ConcordanceResult {
    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    std::int64_t tied = 0;
    std::int64_t total_pairs = 0;
    double rate = 0.0;
    TiePolicy tie_policy = TiePolicy::exclude_from_numerator;
};

ConcordanceResult concordance_rate(std::span<const double> confidence, std::span<const double> perf,
                                   TiePolicy policy = TiePolicy::exclude_from_numerator);

struct PercentileReport {
    std::vector<double> conf_percentiles;
    std::vector<double> perf_percentiles;
    std::vector<double> gaps;  // percentage points
    double mean_gap = 0.0;
    double gap_sd = 0.0;
};

// percentile = (rank - 0.5) / n * 100 per side; gaps are formed from the rank
// difference directly so the mean is exactly zero.
PercentileReport percentile_gap(std::span<const double> confidence, std::span<const double> perf);

// --- tests ---------------------------------------------------------------

enum class EffectLabel { negligible, small, medium, large };

std::string to_string(EffectLabel e);
EffectLabel effect_label(double d);

struct TestResult {
    std::string kind;  // "welch_t", "student_t", "wilcoxon_rank_sum"
    double statistic = 0.0;
    std::optional<double> df;
    double p_value = 1.0;
    std::optional<double> cohen_d;
    std::optional<EffectLabel> effect;
    bool exact = false;  // wilcoxon: exact enumeration branch used
};

// Pooled-sd Cohen's d, (mean_a - mean_b) / s_pooled. Unset when s_pooled = 0.
std::optional<double> cohen_d(std::span<const double> a, std::span<const double> b);

// Welch unequal-variance t test. Throws DegenerateInput when either sample
// has fewer than 2 values or both variances are zero.
TestResult welch_t(std::span<const double> a, std::span<const double> b);
// Pooled-variance Student t test, df = n_a + n_b - 2.
TestResult student_t(std::span<const double> a, std::span<const double> b);

enum class WilcoxonMethod { automatic, exact, normal };

// Rank-sum W of sample a. Automatic uses exact enumeration when
// n_a + n_b <= 12 and there are no ties, otherwise the normal approximation
// with tie and continuity corrections.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                             WilcoxonMethod method = WilcoxonMethod::automatic);

// --- serialization -------------------------------------------------------

nlohmann::json to_json(const CorrelationResult& r);
nlohmann::json to_json(const ConcordanceResult& r);
nlohmann::json to_json(const PercentileReport& r, bool include_series = false);
nlohmann::json to_json(const TestResult& r);

}  // namespace auditcalib::stats
