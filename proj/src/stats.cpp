#include "recon/stats.hpp"

#include "recon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace recon::stats {

double mean(std::span<const double> x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(x.size() - 1);
}

double quantile_at_position(std::span<const double> sorted, double h) {
    const std::size_t n = sorted.size();
    if (h <= 1.0) return sorted.front();
    if (h >= static_cast<double>(n)) return sorted.back();
    const double nearest = std::round(h);
    if (std::abs(h - nearest) < 1e-9 * std::max(1.0, nearest)) {
        return sorted[static_cast<std::size_t>(nearest) - 1];
    }
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    return sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1]);
}

double empirical_quantile(std::span<const double> sorted, double p) {
    return quantile_at_position(sorted, p * static_cast<double>(sorted.size() + 1));
}

WelchStat welch_t(std::span<const double> z, std::span<const double> y) {
    if (z.size() < 2 || y.size() < 2) {
        throw UsageError("two-sample statistic needs at least 2 observations per sample");
    }
    WelchStat s;
    s.n = z.size();
    s.m = y.size();
    s.mean_z = mean(z);
    s.mean_y = mean(y);
    s.var_z = sample_variance(z);
    s.var_y = sample_variance(y);
    if (s.var_z == 0.0 && s.var_y == 0.0) {
        throw DataError("degenerate samples: both variances are zero");
    }
    s.t_obs = (s.mean_z - s.mean_y) /
              std::sqrt(s.var_z / static_cast<double>(s.n) + s.var_y / static_cast<double>(s.m));
    return s;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

// SplitMix64 stream; one per bootstrap repetition.
class StreamEngine {
public:
    using result_type = std::uint64_t;
    explicit StreamEngine(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

constexpr std::size_t kMaxRedraws = 10000;

// Returns the statistic for one repetition and the number of redraws it needed.
std::pair<double, std::size_t> one_repetition(std::span<const double> pooled, std::size_t n,
                                              std::uint64_t stream_seed) {
    StreamEngine engine(stream_seed);
    std::uniform_int_distribution<std::size_t> pick(0, pooled.size() - 1);
    const std::size_t m = pooled.size() - n;
    for (std::size_t attempt = 0; attempt <= kMaxRedraws; ++attempt) {
        double sz = 0.0, szz = 0.0, sy = 0.0, syy = 0.0;
        // Two passes keep the variance numerically identical to sample_variance.
        thread_local std::vector<double> draw;
        draw.resize(pooled.size());
        for (auto& v : draw) v = pooled[pick(engine)];
        for (std::size_t i = 0; i < n; ++i) sz += draw[i];
        for (std::size_t i = n; i < draw.size(); ++i) sy += draw[i];
        const double mz = sz / static_cast<double>(n);
        const double my = sy / static_cast<double>(m);
        for (std::size_t i = 0; i < n; ++i) szz += (draw[i] - mz) * (draw[i] - mz);
        for (std::size_t i = n; i < draw.size(); ++i) syy += (draw[i] - my) * (draw[i] - my);
        const double vz = szz / static_cast<double>(n - 1);
        const double vy = syy / static_cast<double>(m - 1);
        const double se2 = vz / static_cast<double>(n) + vy / static_cast<double>(m);
        if (se2 > 0.0) return {(mz - my) / std::sqrt(se2), attempt};
    }
    throw DataError("bootstrap resamples remain degenerate after repeated redraws");
}

}  // namespace

BootstrapResult bootstrap_test(std::span<const double> z, std::span<const double> y,
                               std::size_t N, std::uint64_t seed, unsigned threads) {
    if (N < 1) throw UsageError("bootstrap needs at least one repetition");
    std::vector<double> zs(z.begin(), z.end());
    std::vector<double> ys(y.begin(), y.end());
    std::sort(zs.begin(), zs.end());
    std::sort(ys.begin(), ys.end());
    const WelchStat obs = welch_t(zs, ys);

    std::vector<double> pooled = zs;
    pooled.insert(pooled.end(), ys.begin(), ys.end());

    BootstrapResult r;
    r.t_obs = obs.t_obs;
    r.N = N;
    r.seed = seed;
    r.boot_ts.resize(N);
    std::vector<std::size_t> redraws(N, 0);

    const auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            auto [t, extra] = one_repetition(pooled, zs.size(), mix_seed(seed, k));
            r.boot_ts[k] = t;
            redraws[k] = extra;
        }
    };

    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, (N + 255) / 256));
    if (workers <= 1) {
        run_range(0, N);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (N + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(N, begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const double bound = std::abs(r.t_obs);
    std::size_t inside = 0;
    double sum = 0.0;
    for (double t : r.boot_ts) {
        if (std::abs(t) <= bound) ++inside;
        sum += t;
    }
    r.p_two_tailed = 1.0 - static_cast<double>(inside) / static_cast<double>(N);
    r.mean_t = sum / static_cast<double>(N);
    r.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
    return r;
}

ConfidenceInterval percentile_ci(std::span<const double> boot_ts, double alpha) {
    if (boot_ts.empty()) throw UsageError("percentile interval of an empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
    std::vector<double> sorted(boot_ts.begin(), boot_ts.end());
    std::sort(sorted.begin(), sorted.end());
    return {empirical_quantile(sorted, alpha / 2.0), empirical_quantile(sorted, 1.0 - alpha / 2.0)};
}

MultipleTestingAdjustment bh_adjust(std::span<const double> raw_p, double alpha) {
    MultipleTestingAdjustment out;
    out.raw_p.assign(raw_p.begin(), raw_p.end());
    out.alpha = alpha;
    out.m = raw_p.size();
    for (double p : raw_p) {
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError("p-values must lie in [0, 1]");
    }
    out.adjusted_p.assign(out.m, 1.0);
    out.rejected.assign(out.m, false);
    if (out.m == 0) return out;

    std::vector<std::size_t> order(out.m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return raw_p[a] < raw_p[b]; });

    const auto m = static_cast<double>(out.m);
    for (std::size_t i = 0; i < out.m; ++i) {
        const auto rank = static_cast<double>(i + 1);
        if (raw_p[order[i]] <= rank * alpha / m) out.k = i + 1;
    }
    double running = 1.0;
    for (std::size_t i = out.m; i-- > 0;) {
        running = std::min(running, raw_p[order[i]] * (m / static_cast<double>(i + 1)));
        out.adjusted_p[order[i]] = std::min(running, 1.0);
    }
    for (std::size_t i = 0; i < out.k; ++i) out.rejected[order[i]] = true;
    out.alpha_prime = (static_cast<double>(out.k) / m) * alpha;
    return out;
}

std::vector<AdjustedCi> fcr_adjusted_cis(const std::vector<std::vector<double>>& boot_ts,
                                         std::span<const double> raw_p, double alpha) {
    if (boot_ts.size() != raw_p.size()) {
        throw UsageError("bootstrap distributions and p-values differ in length");
    }
    const auto bh = bh_adjust(raw_p, alpha);
    std::vector<AdjustedCi> out;
    out.reserve(raw_p.size());
    for (std::size_t i = 0; i < raw_p.size(); ++i) {
        if (bh.rejected[i]) {
            out.push_back({percentile_ci(boot_ts[i], bh.alpha_prime), bh.alpha_prime, true});
        } else {
            out.push_back({percentile_ci(boot_ts[i], alpha), alpha, false});
        }
    }
    return out;
}

std::vector<TestReport> run_test_family(const std::string& family,
                                        const std::vector<TestCase>& cases, std::size_t N,
                                        std::uint64_t seed, double alpha) {
    std::vector<TestReport> reports;
    std::vector<std::size_t> tested;
    std::vector<std::vector<double>> dists;
    std::vector<double> raw;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        TestReport r;
        r.label = c.label;
        r.family = family;
        r.n = c.z.size();
        r.m = c.y.size();
        r.N = N;
        r.seed = mix_seed(seed, i);
        if (r.n < 2 || r.m < 2) {
            r.skipped = true;
            r.note = "fewer than 2 observations in a group";
        } else {
            try {
                auto b = bootstrap_test(c.z, c.y, N, r.seed);
                r.t_obs = b.t_obs;
                r.p_raw = b.p_two_tailed;
                r.mean_t = b.mean_t;
                r.redraws = b.redraws;
                tested.push_back(i);
                raw.push_back(b.p_two_tailed);
                dists.push_back(std::move(b.boot_ts));
            } catch (const DataError& e) {
                r.skipped = true;
                r.note = e.what();
            }
        }
        reports.push_back(std::move(r));
    }
    if (!tested.empty()) {
        const auto bh = bh_adjust(raw, alpha);
        const auto cis = fcr_adjusted_cis(dists, raw, alpha);
        for (std::size_t j = 0; j < tested.size(); ++j) {
            auto& r = reports[tested[j]];
            r.p_bh = bh.adjusted_p[j];
            r.ci_lo = cis[j].ci.lo;
            r.ci_hi = cis[j].ci.hi;
            r.ci_adjusted = cis[j].adjusted;
        }
    }
    return reports;
}

}  // namespace recon::stats
