#pragma once

#include "recon/date.hpp"
#include "recon/market_data.hpp"
#include "recon/reconstitution.hpp"
#include "recon/trading_calendar.hpp"

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace recon {

struct ReturnSeries {
    std::vector<Date> dates;     // strictly increasing
    std::vector<double> values;  // daily net returns (or gross values for T3M output)

    std::size_t size() const { return dates.size(); }
    bool empty() const { return dates.empty(); }
    void push_back(Date d, double v) {
        dates.push_back(d);
        values.push_back(v);
    }
};

struct SeriesResult {
    ReturnSeries series;
    std::vector<std::string> warnings;
};

// Daily buy-and-hold index return of one tier. Each snapshot's holdings start
// from its rank-day weights and drift with member returns from the rank day;
// on each trading day of the snapshot's effective span the return is the
// holding-weighted mean over members reporting a return that day. Delisted
// securities drop out after their last bar. Days where no member reports are
// skipped with a warning.
SeriesResult index_daily_returns(const MembershipTimeline& timeline, const BarTable& bars,
                                 const TradingCalendar& cal, Tier tier);

inline constexpr std::size_t kDefaultT3mWindow = 63;

// Trailing gross return: value at t2 is the product of (1 + r_t) over the
// `window` observations ending at t2. Empty when the series is shorter.
ReturnSeries t3m_gross_returns(const ReturnSeries& series, std::size_t window = kDefaultT3mWindow);

// Values of a and b on their common dates.
std::pair<std::vector<double>, std::vector<double>> align(const ReturnSeries& a,
                                                          const ReturnSeries& b);

inline double significance_limit(std::size_t n) { return 1.96 / std::sqrt(static_cast<double>(n)); }

struct AutocorrFlag {
    std::size_t lag = 0;
    double rho = 0.0;
};

struct CorrelationReport {
    double lag0_corr = 0.0;
    std::size_t n = 0;
    double sig_limit = 0.0;
    std::vector<AutocorrFlag> autocorr_a;  // lags where |rho| exceeds sig_limit
    std::vector<AutocorrFlag> autocorr_b;
};

inline constexpr std::size_t kMinCorrelationSample = 30;
inline constexpr std::size_t kDefaultMaxLag = 20;

double pearson(std::span<const double> a, std::span<const double> b);
double autocorrelation(std::span<const double> x, std::size_t lag);

// Throws DataError when fewer than 30 common dates exist.
CorrelationReport cross_correlation_report(const ReturnSeries& a, const ReturnSeries& b,
                                           std::size_t max_lag = kDefaultMaxLag);

struct Histogram {
    double lo = 0.0;
    double bin_width = 0.0;
    std::vector<double> density;  // integrates to 1
};

struct DistributionReport {
    Histogram a;
    Histogram b;  // same binning as a
    std::vector<std::pair<double, double>> qq;  // (quantile of a, quantile of b) at k/(n+1)
};

DistributionReport distribution_report(const ReturnSeries& a, const ReturnSeries& b,
                                       std::size_t n_bins);

// CSV `date,value`.
void write_series(const ReturnSeries& series, std::ostream& out);
ReturnSeries read_series(const std::string& path);

}  // namespace recon
