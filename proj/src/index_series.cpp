#include "recon/index_series.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"
#include "recon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace recon {

namespace {

struct Holding {
    std::span<const SecurityBar> bars;  // within [start, end)
    std::size_t cursor = 0;
    std::optional<Date> delisted;
    double value = 0.0;
};

}  // namespace

SeriesResult index_daily_returns(const MembershipTimeline& timeline, const BarTable& bars,
                                 const TradingCalendar& cal, Tier tier) {
    using std::chrono::days;
    SeriesResult out;
    for (const auto& snap : timeline.snapshots) {
        if (snap.effective_end <= snap.effective_start) continue;
        const Date last_day = snap.effective_end - days{1};
        std::vector<Holding> holdings;
        for (const auto& m : snap.members) {
            if (!m.tiers.has(tier)) continue;
            for (const auto& h : m.securities) {
                Holding hold;
                hold.delisted = h.delisted;
                hold.value = m.security_weight(h, tier);
                // Drift from the rank day up to the start of the effective span.
                for (const auto& b : bars.history(h.permno, snap.rank_day + days{1},
                                                  snap.effective_start - days{1})) {
                    if (h.delisted && b.date > *h.delisted) break;
                    if (b.ret) hold.value *= 1.0 + *b.ret;
                }
                hold.bars = bars.history(h.permno, snap.effective_start, last_day);
                holdings.push_back(hold);
            }
        }
        for (Date d : cal.trading_days(snap.effective_start, last_day)) {
            double num = 0.0, den = 0.0;
            bool any = false;
            for (auto& h : holdings) {
                while (h.cursor < h.bars.size() && h.bars[h.cursor].date < d) ++h.cursor;
                if (h.cursor >= h.bars.size() || h.bars[h.cursor].date != d) continue;
                if (h.delisted && d > *h.delisted) continue;
                const auto& ret = h.bars[h.cursor].ret;
                if (!ret) continue;
                num += h.value * *ret;
                den += h.value;
                any = true;
            }
            if (!any || !(den > 0.0)) {
                out.warnings.push_back(snap.label() + ": no " + to_string(tier) +
                                       " member reports a return on " + format_date(d));
                continue;
            }
            out.series.push_back(d, num / den);
            for (auto& h : holdings) {
                if (h.cursor < h.bars.size() && h.bars[h.cursor].date == d &&
                    !(h.delisted && d > *h.delisted) && h.bars[h.cursor].ret) {
                    h.value *= 1.0 + *h.bars[h.cursor].ret;
                }
            }
        }
    }
    return out;
}

ReturnSeries t3m_gross_returns(const ReturnSeries& series, std::size_t window) {
    ReturnSeries out;
    if (window == 0 || series.size() < window) return out;
    for (std::size_t end = window; end <= series.size(); ++end) {
        double g = 1.0;
        for (std::size_t i = end - window; i < end; ++i) g *= 1.0 + series.values[i];
        out.push_back(series.dates[end - 1], g);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> align(const ReturnSeries& a,
                                                          const ReturnSeries& b) {
    std::vector<double> xa, xb;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a.dates[i] < b.dates[j]) {
            ++i;
        } else if (b.dates[j] < a.dates[i]) {
            ++j;
        } else {
            xa.push_back(a.values[i++]);
            xb.push_back(b.values[j++]);
        }
    }
    return {std::move(xa), std::move(xb)};
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = stats::mean(a), mb = stats::mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
    const double mu = stats::mean(x);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        den += (x[t] - mu) * (x[t] - mu);
        if (t + lag < x.size()) num += (x[t] - mu) * (x[t + lag] - mu);
    }
    return den > 0.0 ? num / den : 0.0;
}

CorrelationReport cross_correlation_report(const ReturnSeries& a, const ReturnSeries& b,
                                           std::size_t max_lag) {
    auto [xa, xb] = align(a, b);
    if (xa.size() < kMinCorrelationSample) {
        throw DataError("cross-correlation needs at least " +
                        std::to_string(kMinCorrelationSample) + " common dates, got " +
                        std::to_string(xa.size()));
    }
    CorrelationReport r;
    r.n = xa.size();
    r.sig_limit = significance_limit(r.n);
    r.lag0_corr = pearson(xa, xb);
    for (std::size_t k = 1; k <= max_lag && k < r.n; ++k) {
        const double ra = autocorrelation(xa, k);
        const double rb = autocorrelation(xb, k);
        if (std::abs(ra) > r.sig_limit) r.autocorr_a.push_back({k, ra});
        if (std::abs(rb) > r.sig_limit) r.autocorr_b.push_back({k, rb});
    }
    return r;
}

DistributionReport distribution_report(const ReturnSeries& a, const ReturnSeries& b,
                                       std::size_t n_bins) {
    if (n_bins == 0) throw UsageError("histogram needs at least one bin");
    auto [xa, xb] = align(a, b);
    DistributionReport r;
    if (xa.empty()) return r;
    double lo = std::min(*std::min_element(xa.begin(), xa.end()),
                         *std::min_element(xb.begin(), xb.end()));
    const double hi = std::max(*std::max_element(xa.begin(), xa.end()),
                               *std::max_element(xb.begin(), xb.end()));
    double width = (hi - lo) / static_cast<double>(n_bins);
    if (!(width > 0.0)) {
        width = 1.0;
        lo -= 0.5 * static_cast<double>(n_bins);
    }
    const auto histogram = [&](const std::vector<double>& x) {
        Histogram h{lo, width, std::vector<double>(n_bins, 0.0)};
        for (double v : x) {
            auto bin = static_cast<std::size_t>(std::max(0.0, std::floor((v - lo) / width)));
            h.density[std::min(bin, n_bins - 1)] += 1.0;
        }
        for (auto& d : h.density) d /= static_cast<double>(x.size()) * width;
        return h;
    };
    r.a = histogram(xa);
    r.b = histogram(xb);

    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    r.qq.reserve(xa.size());
    for (std::size_t k = 1; k <= xa.size(); ++k) {
        const auto h = static_cast<double>(k);
        r.qq.emplace_back(stats::quantile_at_position(xa, h), stats::quantile_at_position(xb, h));
    }
    return r;
}

void write_series(const ReturnSeries& series, std::ostream& out) {
    out << "date,value\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << format_date(series.dates[i]) << ',' << csv::format_double(series.values[i]) << '\n';
    }
}

ReturnSeries read_series(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty() || lines.front() != "date,value") {
        throw DataError(path + ": expected header 'date,value'");
    }
    ReturnSeries s;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split_line(lines[i]);
        const auto v = f.size() == 2 ? csv::parse_double(f[1]) : std::nullopt;
        if (!v) throw DataError(path + " line " + std::to_string(i + 1) + ": malformed row");
        const Date d = parse_date(f[0]);
        if (!s.empty() && d <= s.dates.back()) {
            throw DataError(path + " line " + std::to_string(i + 1) + ": dates not increasing");
        }
        s.push_back(d, *v);
    }
    return s;
}

}  // namespace recon
