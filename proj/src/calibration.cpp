#include "auditcalib/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "auditcalib/error.hpp"
#include "auditcalib/text.hpp"

namespace auditcalib::calibration {

std::string to_string(EdgePolicy p) {
    return p == EdgePolicy::strict_paper ? "strict_paper" : "inclusive_last";
}

EdgePolicy parse_edge_policy(const std::string& name) {
    if (name == "strict_paper") return EdgePolicy::strict_paper;
    if (name == "inclusive_last") return EdgePolicy::inclusive_last;
    throw Error(ErrorCode::config, "edge_policy", "unknown policy '" + name + "'");
}

double normalize_confidence(double confidence) {
    if (!(confidence >= 0.0 && confidence <= 100.0)) {
        throw Error(ErrorCode::range, "confidence", text::format_g17(confidence) + " outside [0, 100]");
    }
    return confidence / 100.0;
}

std::vector<double> normalize_confidences(std::span<const double> confidence) {
    std::vector<double> out;
    out.reserve(confidence.size());
    for (const double c : confidence) out.push_back(normalize_confidence(c));
    return out;
}

MinMaxResult min_max_normalize(std::span<const double> perf) {
    MinMaxResult r;
    if (perf.empty()) return r;
    const auto [lo_it, hi_it] = std::minmax_element(perf.begin(), perf.end());
    const double lo = *lo_it, hi = *hi_it;
    r.values.reserve(perf.size());
    if (hi == lo) {
        r.degenerate = true;
        r.values.assign(perf.size(), 0.5);
        return r;
    }
    const double range = hi - lo;
    for (const double p : perf) r.values.push_back((p - lo) / range);
    return r;
}

std::vector<double> bin_edges(std::size_t nbins) {
    if (nbins == 0) throw Error(ErrorCode::config, "nbins", "must be positive");
    std::vector<double> edges(nbins + 1);
    const double step = 1.0 / static_cast<double>(nbins);
    for (std::size_t i = 0; i < nbins; ++i) edges[i] = static_cast<double>(i) * step;
    edges[nbins] = 1.0;
    return edges;
}

std::optional<std::size_t> bin_index(double v, std::span<const double> edges, EdgePolicy policy) {
    const std::size_t nbins = edges.size() - 1;
    if (!(v >= edges.front() && v <= edges.back())) return std::nullopt;
    std::size_t k = std::min(nbins - 1, static_cast<std::size_t>(v * static_cast<double>(nbins)));
    while (k > 0 && v < edges[k]) --k;
    while (k + 1 < nbins && v >= edges[k + 1]) ++k;
    if (v >= edges[k] && v < edges[k + 1]) return k;
    if (policy == EdgePolicy::inclusive_last && k == nbins - 1 && v == edges[nbins]) return k;
    return std::nullopt;
}

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::length_mismatch, "calibration",
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.empty()) throw Error(ErrorCode::length_mismatch, "calibration", "empty input");
}

// Per-bin accumulation in record order, then the weighted sum of absolute
// mean differences accumulated bin by bin in ascending order.
BinnedError binned_error(std::span<const double> conf_norm, std::span<const double> perf, std::size_t nbins,
                         EdgePolicy policy) {
    const auto edges = bin_edges(nbins);
    std::vector<double> conf_sum(nbins, 0.0), perf_sum(nbins, 0.0);
    std::vector<std::size_t> count(nbins, 0);
    for (std::size_t i = 0; i < conf_norm.size(); ++i) {
        if (const auto b = bin_index(conf_norm[i], edges, policy)) {
            conf_sum[*b] += conf_norm[i];
            perf_sum[*b] += perf[i];
            ++count[*b];
        }
    }
    BinnedError out;
    out.bins.resize(nbins);
    const auto n = static_cast<double>(conf_norm.size());
    for (std::size_t b = 0; b < nbins; ++b) {
        BinStat& s = out.bins[b];
        s.lo = edges[b];
        s.hi = edges[b + 1];
        s.count = count[b];
        s.weight = static_cast<double>(count[b]) / n;
        if (count[b] == 0) continue;
        const auto c = static_cast<double>(count[b]);
        s.mean_conf = conf_sum[b] / c;
        s.mean_perf = perf_sum[b] / c;
        out.value += std::abs(*s.mean_conf - *s.mean_perf) * s.weight;
    }
    return out;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

BinnedError ece(std::span<const double> conf_norm, std::span<const double> perf, std::size_t nbins,
                EdgePolicy policy) {
    check_lengths(conf_norm, perf);
    return binned_error(conf_norm, perf, nbins, policy);
}

RceResult rce(std::span<const double> confidence, std::span<const double> perf, std::size_t nbins,
              EdgePolicy policy) {
    check_lengths(confidence, perf);
    const auto perf_norm = min_max_normalize(perf);
    std::vector<double> conf_norm;
    conf_norm.reserve(confidence.size());
    for (const double c : confidence) conf_norm.push_back(c / 100.0);
    auto binned = binned_error(conf_norm, perf_norm.values, nbins, policy);
    return RceResult{binned.value, std::move(binned.bins), perf_norm.degenerate};
}

GapStats calibration_gaps(std::span<const double> conf_norm, std::span<const double> perf) {
    check_lengths(conf_norm, perf);
    GapStats g;
    g.gaps.reserve(conf_norm.size());
    for (std::size_t i = 0; i < conf_norm.size(); ++i) g.gaps.push_back(conf_norm[i] - perf[i]);
    g.mean = mean_of(g.gaps);
    if (g.gaps.size() >= 2) {
        double ss = 0.0;
        for (const double x : g.gaps) ss += (x - g.mean) * (x - g.mean);
        g.sd = std::sqrt(ss / static_cast<double>(g.gaps.size() - 1));
    }
    return g;
}

std::vector<ReliabilityPoint> reliability_curve(std::span<const double> conf_norm, std::span<const double> perf,
                                                std::size_t nbins, EdgePolicy policy) {
    check_lengths(conf_norm, perf);
    const auto binned = binned_error(conf_norm, perf, nbins, policy);
    std::vector<ReliabilityPoint> out;
    for (const auto& b : binned.bins) {
        if (b.count == 0) continue;
        out.push_back({(b.lo + b.hi) / 2.0, *b.mean_conf, *b.mean_perf, b.count});
    }
    return out;
}

CalibrationReport build_report(std::span<const double> confidence, std::span<const double> perf, std::size_t nbins,
                               EdgePolicy policy) {
    check_lengths(confidence, perf);
    const auto conf_norm = normalize_confidences(confidence);
    CalibrationReport r;
    r.n = confidence.size();
    r.nbins = nbins;
    r.edge_policy = policy;
    auto e = ece(conf_norm, perf, nbins, policy);
    r.ece = e.value;
    r.bins = std::move(e.bins);
    auto rc = rce(confidence, perf, nbins, policy);
    r.rce = rc.value;
    r.rce_bins = std::move(rc.bins);
    r.degenerate_perf = rc.degenerate;
    const auto gaps = calibration_gaps(conf_norm, perf);
    r.mean_gap = gaps.mean;
    r.gap_sd = gaps.sd;
    r.mean_conf = mean_of(conf_norm);
    r.mean_perf = mean_of(perf);
    return r;
}

namespace {

nlohmann::json bins_json(const std::vector<BinStat>& bins) {
    auto arr = nlohmann::json::array();
    for (const auto& b : bins) {
        nlohmann::json j;
        j["lo"] = b.lo;
        j["hi"] = b.hi;
        j["count"] = b.count;
        j["mean_conf"] = b.mean_conf ? nlohmann::json(*b.mean_conf) : nlohmann::json(nullptr);
        j["mean_perf"] = b.mean_perf ? nlohmann::json(*b.mean_perf) : nlohmann::json(nullptr);
        j["weight"] = b.weight;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

nlohmann::json to_json(const CalibrationReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["nbins"] = r.nbins;
    j["edge_policy"] = to_string(r.edge_policy);
    j["ece"] = r.ece;
    j["rce"] = r.rce;
    j["mean_conf"] = r.mean_conf;
    j["mean_perf"] = r.mean_perf;
    j["mean_gap"] = r.mean_gap;
    j["gap_sd"] = r.gap_sd ? nlohmann::json(*r.gap_sd) : nlohmann::json(nullptr);
    j["degenerate_perf"] = r.degenerate_perf;
    j["bins"] = bins_json(r.bins);
    j["rce_bins"] = bins_json(r.rce_bins);
    return j;
}

std::string to_rows(const CalibrationReport& r) {
    std::ostringstream out;
    out << "kind,bin,lo,hi,count,mean_conf,mean_perf,weight\n";
    auto emit = [&](const char* kind, const std::vector<BinStat>& bins) {
        for (std::size_t i = 0; i < bins.size(); ++i) {
            const auto& b = bins[i];
            out << kind << ',' << i << ',' << text::format_g17(b.lo) << ',' << text::format_g17(b.hi) << ','
                << b.count << ',' << (b.mean_conf ? text::format_g17(*b.mean_conf) : "") << ','
                << (b.mean_perf ? text::format_g17(*b.mean_perf) : "") << ',' << text::format_g17(b.weight) << '\n';
        }
    };
    emit("ece", r.bins);
    emit("rce", r.rce_bins);
    return out.str();
}

}  // namespace auditcalib::calibration
