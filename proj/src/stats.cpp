#include "auditcalib/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "auditcalib/error.hpp"

namespace auditcalib::stats {

// --- distributions -------------------------------------------------------

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 10000;

// Continued fraction for I_x(a, b), valid for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::range, "incomplete_beta", "shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) throw Error(ErrorCode::range, "df", "degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    const double x = df / (df + t * t);
    return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

double normal_two_sided_p(double z) { return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0); }

// --- descriptive ---------------------------------------------------------

namespace {

std::vector<double> sorted_copy(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return s;
}

void require_same_length(std::span<const double> x, std::span<const double> y, std::size_t min_n,
                         const char* what) {
    if (x.size() != y.size()) {
        throw Error(ErrorCode::length_mismatch, what, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    if (x.size() < min_n) {
        throw Error(ErrorCode::length_mismatch, what, "need at least " + std::to_string(min_n) + " values");
    }
}

// Sizes of runs of equal values in a sorted sequence.
std::vector<std::int64_t> tie_groups(const std::vector<double>& sorted) {
    std::vector<std::int64_t> groups;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        groups.push_back(static_cast<std::int64_t>(j - i));
        i = j;
    }
    return groups;
}

std::int64_t pairs_within(const std::vector<std::int64_t>& groups) {
    std::int64_t s = 0;
    for (const auto t : groups) s += t * (t - 1) / 2;
    return s;
}

}  // namespace

double mean(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorCode::empty_input, "mean");
    const auto s = sorted_copy(v);
    double sum = 0.0;
    for (const double x : s) sum += x;
    return sum / static_cast<double>(s.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) throw Error(ErrorCode::degenerate_input, "variance", "need at least 2 values");
    const auto s = sorted_copy(v);
    double sum = 0.0;
    for (const double x : s) sum += x;
    const double m = sum / static_cast<double>(s.size());
    double ss = 0.0;
    for (const double x : s) ss += (x - m) * (x - m);
    return ss / static_cast<double>(s.size() - 1);
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        // ranks i+1 .. j share their mean
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

// --- correlation ---------------------------------------------------------

namespace {

double pearson_coefficient(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::constant_input, "correlation");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_p(double r, std::size_t n) {
    if (std::abs(r) >= 1.0) return 0.0;
    const double df = static_cast<double>(n) - 2.0;
    const double t = r * std::sqrt(df / (1.0 - r * r));
    return student_t_two_sided_p(t, df);
}

bool is_constant(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Merge sort counting pairs i < j with v[i] > v[j].
std::int64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::int64_t inversions = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    inversions += static_cast<std::int64_t>(mid - i);
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
        }
        v.swap(buf);
    }
    return inversions;
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 3, "pearson");
    const double r = pearson_coefficient(x, y);
    return {r, correlation_p(r, x.size()), x.size()};
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 3, "spearman");
    if (is_constant(x) || is_constant(y)) throw Error(ErrorCode::constant_input, "spearman");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double rho = pearson_coefficient(rx, ry);
    return {rho, correlation_p(rho, x.size()), x.size()};
}

PairCounts pair_counts(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 0, "pair_counts");
    const std::size_t n = x.size();
    PairCounts c;
    c.total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - (n > 0 ? 1 : 0)) / 2;
    if (n < 2) return c;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[order[i]];
        ys[i] = y[order[i]];
    }
    c.tied_x = pairs_within(tie_groups(xs));
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        c.tied_both += t * (t - 1) / 2;
        i = j;
    }
    c.discordant = count_inversions(ys);  // ys is sorted afterwards
    c.tied_y = pairs_within(tie_groups(ys));
    c.concordant = c.total - c.tied() - c.discordant;
    return c;
}

Correlation kendall_tau(std::span<const double> x, std::span<const double> y, KendallVariant variant) {
    require_same_length(x, y, 3, "kendall_tau");
    const auto c = pair_counts(x, y);
    if (c.tied_x == c.total || c.tied_y == c.total) throw Error(ErrorCode::degenerate_input, "kendall_tau");

    const auto s = static_cast<double>(c.concordant - c.discordant);
    const auto n0 = static_cast<double>(c.total);
    double tau = 0.0;
    if (variant == KendallVariant::tau_b) {
        tau = s / std::sqrt((n0 - static_cast<double>(c.tied_x)) * (n0 - static_cast<double>(c.tied_y)));
    } else {
        tau = s / n0;
    }
    tau = std::clamp(tau, -1.0, 1.0);

    // Variance of S under independence with tie corrections.
    const auto n = static_cast<double>(x.size());
    const auto gx = tie_groups(sorted_copy(x));
    const auto gy = tie_groups(sorted_copy(y));
    auto sum_of = [](const std::vector<std::int64_t>& g, auto f) {
        double acc = 0.0;
        for (const auto t : g) acc += f(static_cast<double>(t));
        return acc;
    };
    const double v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    const double vt = sum_of(gx, [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
    const double vu = sum_of(gy, [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); });
    const double v1 = sum_of(gx, [](double t) { return t * (t - 1.0); }) *
                      sum_of(gy, [](double t) { return t * (t - 1.0); }) / (2.0 * n * (n - 1.0));
    const double v2 = sum_of(gx, [](double t) { return t * (t - 1.0) * (t - 2.0); }) *
                      sum_of(gy, [](double t) { return t * (t - 1.0) * (t - 2.0); }) /
                      (9.0 * n * (n - 1.0) * (n - 2.0));
    const double var_s = (v0 - vt - vu) / 18.0 + v1 + v2;
    const double p = var_s > 0.0 ? normal_two_sided_p(s / std::sqrt(var_s)) : 1.0;
    return {tau, p, x.size()};
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y, KendallVariant variant) {
    const auto p = pearson(x, y);
    const auto s = spearman(x, y);
    const auto k = kendall_tau(x, y, variant);
    return {p.coefficient, s.coefficient, k.coefficient, p.p_value, s.p_value, k.p_value, x.size()};
}

// --- concordance and percentiles ----------------------------------------

std::string to_string(TiePolicy p) {
    return p == TiePolicy::drop_pairs ? "drop_pairs" : "exclude_from_numerator";
}

TiePolicy parse_tie_policy(const std::string& name) {
    if (name == "exclude_from_numerator") return TiePolicy::exclude_from_numerator;
    if (name == "drop_pairs") return TiePolicy::drop_pairs;
    throw Error(ErrorCode::config, "tie_policy", "unknown policy '" + name + "'");
}

ConcordanceResult concordance_rate(std::span<const double> confidence, std::span<const double> perf,
                                   TiePolicy policy) {
    require_same_length(confidence, perf, 2, "concordance_rate");
    const auto c = pair_counts(confidence, perf);
    ConcordanceResult r;
    r.concordant = c.concordant;
    r.discordant = c.discordant;
    r.tied = c.tied();
    r.total_pairs = c.total;
    r.tie_policy = policy;
    const std::int64_t denom = policy == TiePolicy::drop_pairs ? r.total_pairs - r.tied : r.total_pairs;
    r.rate = denom > 0 ? static_cast<double>(r.concordant) / static_cast<double>(denom) : 0.0;
    return r;
}

PercentileReport percentile_gap(std::span<const double> confidence, std::span<const double> perf) {
    require_same_length(confidence, perf, 2, "percentile_gap");
    const auto rc = average_ranks(confidence);
    const auto rp = average_ranks(perf);
    const auto n = static_cast<double>(confidence.size());
    PercentileReport r;
    double diff_sum = 0.0;  // half-integers: summed exactly
    for (std::size_t i = 0; i < rc.size(); ++i) {
        r.conf_percentiles.push_back((rc[i] - 0.5) / n * 100.0);
        r.perf_percentiles.push_back((rp[i] - 0.5) / n * 100.0);
        const double d = rc[i] - rp[i];
        diff_sum += d;
        r.gaps.push_back(d / n * 100.0);
    }
    r.mean_gap = diff_sum / n / n * 100.0;
    double ss = 0.0;
    for (const double g : r.gaps) ss += (g - r.mean_gap) * (g - r.mean_gap);
    r.gap_sd = std::sqrt(ss / (n - 1.0));
    return r;
}

// --- tests ---------------------------------------------------------------

std::string to_string(EffectLabel e) {
    switch (e) {
        case EffectLabel::negligible: return "negligible";
        case EffectLabel::small: return "small";
        case EffectLabel::medium: return "medium";
        case EffectLabel::large: return "large";
    }
    return "negligible";
}

EffectLabel effect_label(double d) {
    const double m = std::abs(d);
    if (m < 0.2) return EffectLabel::negligible;
    if (m < 0.5) return EffectLabel::small;
    if (m < 0.8) return EffectLabel::medium;
    return EffectLabel::large;
}

namespace {

struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(std::span<const double> v, const char* what) {
    if (v.size() < 2) throw Error(ErrorCode::degenerate_input, what, "each sample needs at least 2 values");
    return {static_cast<double>(v.size()), stats::mean(v), sample_variance(v)};
}

double pooled_variance(const Moments& a, const Moments& b) {
    return ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / (a.n + b.n - 2.0);
}

void attach_effect(TestResult& r, std::span<const double> a, std::span<const double> b) {
    r.cohen_d = cohen_d(a, b);
    if (r.cohen_d) r.effect = effect_label(*r.cohen_d);
}

}  // namespace

std::optional<double> cohen_d(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) return std::nullopt;
    const auto ma = moments(a, "cohen_d");
    const auto mb = moments(b, "cohen_d");
    const double sp = std::sqrt(pooled_variance(ma, mb));
    if (sp == 0.0) return std::nullopt;
    return (ma.mean - mb.mean) / sp;
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
    const auto ma = moments(a, "welch_t");
    const auto mb = moments(b, "welch_t");
    const double va = ma.var / ma.n, vb = mb.var / mb.n;
    const double se2 = va + vb;
    if (se2 == 0.0) throw Error(ErrorCode::degenerate_input, "welch_t", "both samples have zero variance");
    TestResult r;
    r.kind = "welch_t";
    r.statistic = (ma.mean - mb.mean) / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    r.p_value = student_t_two_sided_p(r.statistic, *r.df);
    attach_effect(r, a, b);
    return r;
}

TestResult student_t(std::span<const double> a, std::span<const double> b) {
    const auto ma = moments(a, "student_t");
    const auto mb = moments(b, "student_t");
    const double sp2 = pooled_variance(ma, mb);
    if (sp2 == 0.0) throw Error(ErrorCode::degenerate_input, "student_t", "both samples have zero variance");
    TestResult r;
    r.kind = "student_t";
    r.statistic = (ma.mean - mb.mean) / std::sqrt(sp2 * (1.0 / ma.n + 1.0 / mb.n));
    r.df = ma.n + mb.n - 2.0;
    r.p_value = student_t_two_sided_p(r.statistic, *r.df);
    attach_effect(r, a, b);
    return r;
}

namespace {

// Two-sided exact p for W = sum of n1 ranks drawn from {1..N} without ties.
double exact_rank_sum_p(std::size_t n1, std::size_t N, double w) {
    const std::size_t max_sum = N * (N + 1) / 2;
    // ways[k][s]: subsets of size k with rank sum s
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t rank = 1; rank <= N; ++rank) {
        for (std::size_t k = std::min(n1, rank); k >= 1; --k) {
            for (std::size_t s = max_sum; s >= rank; --s) ways[k][s] += ways[k - 1][s - rank];
        }
    }
    double total = 0.0, le = 0.0, ge = 0.0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
        const double c = ways[n1][s];
        total += c;
        if (static_cast<double>(s) <= w) le += c;
        if (static_cast<double>(s) >= w) ge += c;
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

}  // namespace

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::empty_input, "wilcoxon_rank_sum");
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = average_ranks(pooled);
    const std::size_t n1 = a.size(), n2 = b.size(), N = n1 + n2;
    double w = 0.0;
    for (std::size_t i = 0; i < n1; ++i) w += ranks[i];

    const auto groups = tie_groups(sorted_copy(pooled));
    const bool has_ties = std::any_of(groups.begin(), groups.end(), [](std::int64_t t) { return t > 1; });

    TestResult r;
    r.kind = "wilcoxon_rank_sum";
    r.statistic = w;
    bool use_exact = method == WilcoxonMethod::exact;
    if (method == WilcoxonMethod::automatic) use_exact = N <= 12 && !has_ties;
    if (use_exact && has_ties) throw Error(ErrorCode::degenerate_input, "wilcoxon_rank_sum", "exact branch needs untied data");

    if (use_exact) {
        r.exact = true;
        r.p_value = exact_rank_sum_p(n1, N, w);
    } else {
        const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dN = static_cast<double>(N);
        const double mu = dn1 * (dN + 1.0) / 2.0;
        double tie_term = 0.0;
        for (const auto t : groups) {
            const auto dt = static_cast<double>(t);
            tie_term += dt * dt * dt - dt;
        }
        const double var = dn1 * dn2 / 12.0 * ((dN + 1.0) - (N > 1 ? tie_term / (dN * (dN - 1.0)) : 0.0));
        if (var <= 0.0) {
            r.p_value = 1.0;
        } else {
            const double z = std::max(0.0, std::abs(w - mu) - 0.5) / std::sqrt(var);
            r.p_value = normal_two_sided_p(z);
        }
    }
    if (n1 >= 2 && n2 >= 2) attach_effect(r, a, b);
    return r;
}

// --- serialization -------------------------------------------------------

nlohmann::json to_json(const CorrelationResult& r) {
    return {{"stats_kind", "correlation"}, {"pearson_r", r.pearson_r},   {"spearman_rho", r.spearman_rho},
            {"kendall_tau", r.kendall_tau}, {"p_pearson", r.p_pearson},  {"p_spearman", r.p_spearman},
            {"p_kendall", r.p_kendall},     {"n", r.n}};
}

nlohmann::json to_json(const ConcordanceResult& r) {
    return {{"stats_kind", "concordance"}, {"concordant", r.concordant}, {"discordant", r.discordant},
            {"tied", r.tied},              {"total_pairs", r.total_pairs}, {"rate", r.rate},
            {"tie_policy", to_string(r.tie_policy)}};
}

nlohmann::json to_json(const PercentileReport& r, bool include_series) {
    nlohmann::json j = {{"stats_kind", "percentile_gap"}, {"mean_gap", r.mean_gap}, {"gap_sd", r.gap_sd},
                        {"n", r.gaps.size()}};
    if (include_series) j["gaps"] = r.gaps;
    return j;
}

nlohmann::json to_json(const TestResult& r) {
    nlohmann::json j = {{"stats_kind", r.kind}, {"statistic", r.statistic}, {"p_value", r.p_value}};
    j["df"] = r.df ? nlohmann::json(*r.df) : nlohmann::json(nullptr);
    j["cohen_d"] = r.cohen_d ? nlohmann::json(*r.cohen_d) : nlohmann::json(nullptr);
    j["effect_label"] = r.effect ? nlohmann::json(to_string(*r.effect)) : nlohmann::json(nullptr);
    if (r.kind == "wilcoxon_rank_sum") j["exact"] = r.exact;
    return j;
}

}  // namespace auditcalib::stats
