#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace recon::stats {

double mean(std::span<const double> x);
// Denominator n - 1.
double sample_variance(std::span<const double> x);

// Empirical quantile with plotting positions k/(n+1) and linear
// interpolation between order statistics, clamped to [x_(1), x_(n)].
// `sorted` must be ascending and nonempty.
double empirical_quantile(std::span<const double> sorted, double p);
// Same rule addressed by 1-based position h = p * (n + 1).
double quantile_at_position(std::span<const double> sorted, double h);

// Two-sample statistic for unequal variances and unequal sizes.
struct WelchStat {
    double t_obs = 0.0;
    std::size_t n = 0;  // size of z
    std::size_t m = 0;  // size of y
    double mean_z = 0.0;
    double mean_y = 0.0;
    double var_z = 0.0;
    double var_y = 0.0;
};

// Throws UsageError when either sample has fewer than 2 observations and
// DataError when both sample variances are zero.
WelchStat welch_t(std::span<const double> z, std::span<const double> y);

struct BootstrapResult {
    double t_obs = 0.0;
    std::vector<double> boot_ts;  // one statistic per repetition, in repetition order
    double p_two_tailed = 1.0;
    double mean_t = 0.0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    std::size_t redraws = 0;  // resamples redrawn because both halves had zero variance
};

inline constexpr std::size_t kDefaultBootstrapReps = 10000;

// Pools z and y, draws N resamples of size n + m with replacement, splits each
// into z* (first n) and y* (last m) and evaluates the statistic. The p-value
// is 1 - #{|t*| <= |t_obs|} / N. Repetition k draws from its own stream
// derived from (seed, k), so the result does not depend on `threads`.
// Each sample is sorted before pooling, making the result independent of the
// order in which observations are supplied.
BootstrapResult bootstrap_test(std::span<const double> z, std::span<const double> y,
                               std::size_t N = kDefaultBootstrapReps, std::uint64_t seed = 0,
                               unsigned threads = 0);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile interval: the alpha/2 and 1 - alpha/2 empirical quantiles.
ConfidenceInterval percentile_ci(std::span<const double> boot_ts, double alpha);

struct MultipleTestingAdjustment {
    std::vector<double> raw_p;
    std::vector<double> adjusted_p;  // same order as raw_p
    std::vector<bool> rejected;      // step-up rejection set, same order as raw_p
    double alpha = 0.05;
    std::size_t k = 0;  // number of rejections
    std::size_t m = 0;
    double alpha_prime = 0.0;  // (k / m) * alpha
};

// Benjamini-Hochberg step-up adjustment. Throws UsageError for p outside [0, 1].
MultipleTestingAdjustment bh_adjust(std::span<const double> raw_p, double alpha);

struct AdjustedCi {
    ConfidenceInterval ci;
    double alpha = 0.0;     // level the interval was built at
    bool adjusted = false;  // true for BH discoveries (built at alpha_prime)
};

// Discoveries get a 1 - alpha' interval with alpha' = (k / m) alpha; the rest
// keep the unadjusted 1 - alpha interval, flagged as not adjusted.
std::vector<AdjustedCi> fcr_adjusted_cis(const std::vector<std::vector<double>>& boot_ts,
                                         std::span<const double> raw_p, double alpha);

// One hypothesis of a test family.
struct TestCase {
    std::string label;
    std::vector<double> z;
    std::vector<double> y;
};

struct TestReport {
    std::string label;
    std::string family;
    std::size_t n = 0;
    std::size_t m = 0;
    bool skipped = false;  // too few observations or degenerate; excluded from the family
    std::string note;
    double t_obs = 0.0;
    double p_raw = 1.0;
    double p_bh = 1.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool ci_adjusted = false;
    double mean_t = 0.0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
    std::size_t redraws = 0;
};

// Bootstrap test per case (case i seeded from (seed, i)), then BH and FCR
// adjustment over the cases that could be tested.
std::vector<TestReport> run_test_family(const std::string& family,
                                        const std::vector<TestCase>& cases, std::size_t N,
                                        std::uint64_t seed, double alpha);

// SplitMix64 output function; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace recon::stats
