#include "recon/error.hpp"
#include "recon/index_series.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace recon;
using std::chrono::days;

namespace {

Date d(const char* s) { return parse_date(s); }

struct Fixture {
    TradingCalendar cal{{make_date(2019, 1, 1), make_date(2019, 12, 31)}, {}};
    std::vector<SecurityBar> rows;

    void daily(int permno, Date from, Date to, std::optional<double> ret) {
        for (Date t : cal.trading_days(from, to)) {
            SecurityBar b;
            b.permno = Permno{permno};
            b.permco = Permco{permno};
            b.date = t;
            b.prc = 10.0;
            b.shrout = 1000;
            b.ret = ret;
            rows.push_back(b);
        }
    }
};

Member member(int permco, double cap, double w, std::optional<Date> delisted = {}) {
    Member m;
    m.permco = Permco{permco};
    m.tiers = {Tier::T1, Tier::T3, Tier::TE};
    m.cap = cap;
    m.securities.push_back({Permno{permco}, cap, delisted});
    m.delisted = delisted;
    m.weight[index_of(Tier::T1)] = w;
    m.weight[index_of(Tier::T3)] = w;
    m.weight[index_of(Tier::TE)] = w;
    return m;
}

MembershipSnapshot snapshot(Date rank, Date start, Date end, std::vector<Member> members) {
    MembershipSnapshot s;
    s.cycle_year = 2019;
    s.rank_day = rank;
    s.effective_start = start;
    s.effective_end = end;
    s.members = std::move(members);
    return s;
}

ReturnSeries series_of(std::vector<double> v, Date start = make_date(2019, 1, 1)) {
    ReturnSeries s;
    for (std::size_t i = 0; i < v.size(); ++i) s.push_back(start + days{static_cast<int>(i)}, v[i]);
    return s;
}

}  // namespace

TEST_CASE("single member index tracks its return") {
    Fixture f;
    f.daily(1, d("2019-05-01"), d("2019-08-30"), 0.004);
    BarTable bars(f.rows);
    MembershipTimeline t;
    t.snapshots.push_back(
        snapshot(d("2019-05-31"), d("2019-06-28"), d("2019-08-01"), {member(1, 1e6, 1.0)}));
    auto r = index_daily_returns(t, bars, f.cal, Tier::T3);
    CHECK(r.warnings.empty());
    REQUIRE(r.series.size() == f.cal.trading_days(d("2019-06-28"), d("2019-07-31")).size());
    CHECK(r.series.dates.front() == d("2019-06-28"));
    CHECK(r.series.dates.back() == d("2019-07-31"));
    for (double v : r.series.values) CHECK(v == doctest::Approx(0.004).epsilon(1e-14));
}

TEST_CASE("equal weights average member returns") {
    Fixture f;
    f.daily(1, d("2019-06-28"), d("2019-06-28"), 0.01);
    f.daily(2, d("2019-06-28"), d("2019-06-28"), 0.03);
    MembershipTimeline t;
    t.snapshots.push_back(snapshot(d("2019-06-27"), d("2019-06-28"), d("2019-06-29"),
                                   {member(1, 1e6, 0.5), member(2, 1e6, 0.5)}));
    auto r = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T3);
    REQUIRE(r.series.size() == 1);
    CHECK(r.series.values[0] == doctest::Approx(0.02).epsilon(1e-14));

    SUBCASE("tiers a member does not belong to produce no series") {
        auto t2 = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T2);
        CHECK(t2.series.empty());
        CHECK(t2.warnings.size() == 1);
    }
}

TEST_CASE("holdings drift between rank and rebalance and during the span") {
    Fixture f;
    // Member 1 doubles on the day after the rank day, then both earn returns.
    f.daily(1, d("2019-06-03"), d("2019-06-03"), 1.0);
    f.daily(2, d("2019-06-03"), d("2019-06-03"), 0.0);
    f.daily(1, d("2019-06-04"), d("2019-06-05"), 0.1);
    f.daily(2, d("2019-06-04"), d("2019-06-05"), 0.0);
    MembershipTimeline t;
    t.snapshots.push_back(snapshot(d("2019-05-31"), d("2019-06-04"), d("2019-06-06"),
                                   {member(1, 1e6, 0.5), member(2, 1e6, 0.5)}));
    auto r = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T3);
    REQUIRE(r.series.size() == 2);
    // Holdings 1.0 and 0.5 at the start of the span.
    CHECK(r.series.values[0] == doctest::Approx(0.1 * 2.0 / 3.0).epsilon(1e-13));
    // After the first day: 1.1 and 0.5.
    CHECK(r.series.values[1] == doctest::Approx(0.1 * 1.1 / 1.6).epsilon(1e-13));
}

TEST_CASE("missing returns renormalize over reporting members") {
    Fixture f;
    f.daily(1, d("2019-06-28"), d("2019-06-28"), 0.01);
    f.daily(2, d("2019-06-28"), d("2019-06-28"), std::nullopt);
    f.daily(3, d("2019-06-28"), d("2019-06-28"), 0.04);
    MembershipTimeline t;
    t.snapshots.push_back(snapshot(d("2019-06-27"), d("2019-06-28"), d("2019-06-29"),
                                   {member(1, 1e6, 0.25), member(2, 1e6, 0.5),
                                    member(3, 1e6, 0.25)}));
    auto r = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T3);
    REQUIRE(r.series.size() == 1);
    CHECK(r.series.values[0] == doctest::Approx(0.025).epsilon(1e-14));
}

TEST_CASE("delisted members drop out after their last bar") {
    Fixture f;
    f.daily(1, d("2019-07-01"), d("2019-07-10"), 0.01);
    f.daily(2, d("2019-07-01"), d("2019-07-03"), 0.05);
    // A stray later bar for the delisted security is ignored.
    f.daily(2, d("2019-07-09"), d("2019-07-09"), 0.5);
    MembershipTimeline t;
    t.snapshots.push_back(snapshot(d("2019-06-28"), d("2019-07-01"), d("2019-07-11"),
                                   {member(1, 1e6, 0.5), member(2, 1e6, 0.5, d("2019-07-03"))}));
    auto r = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T3);
    REQUIRE(r.series.size() == 8);
    CHECK(r.series.values[0] == doctest::Approx(0.03));
    for (std::size_t i = 3; i < r.series.size(); ++i) {
        CHECK(r.series.values[i] == doctest::Approx(0.01).epsilon(1e-14));
    }
}

TEST_CASE("days without any reporting member are skipped with a warning") {
    Fixture f;
    f.daily(1, d("2019-07-01"), d("2019-07-01"), 0.01);
    f.daily(1, d("2019-07-03"), d("2019-07-03"), 0.02);
    MembershipTimeline t;
    t.snapshots.push_back(
        snapshot(d("2019-06-28"), d("2019-07-01"), d("2019-07-04"), {member(1, 1e6, 1.0)}));
    auto r = index_daily_returns(t, BarTable(f.rows), f.cal, Tier::T3);
    CHECK(r.series.size() == 2);
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("2019-07-02") != std::string::npos);
}

TEST_CASE("trailing gross returns") {
    auto s = series_of(std::vector<double>(10, 0.01));
    auto g = t3m_gross_returns(s, 3);
    REQUIRE(g.size() == 8);
    CHECK(g.dates.front() == s.dates[2]);
    for (double v : g.values) CHECK(v == doctest::Approx(1.030301).epsilon(1e-14));

    auto zeros = t3m_gross_returns(series_of(std::vector<double>(70, 0.0)));
    REQUIRE(zeros.size() == 8);
    for (double v : zeros.values) CHECK(v == 1.0);

    auto wipe = t3m_gross_returns(series_of({0.1, -1.0, 0.2, 0.3}), 2);
    CHECK(wipe.values[0] == 0.0);
    CHECK(wipe.values[1] == 0.0);
    CHECK(wipe.values[2] == doctest::Approx(1.56));

    CHECK(t3m_gross_returns(series_of({0.1, 0.2}), 3).empty());
    CHECK(t3m_gross_returns(series_of({}), 63).empty());

    SUBCASE("log of the gross return is the sum of log returns") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        std::vector<double> v(200);
        for (auto& x : v) x = u(rng);
        auto out = t3m_gross_returns(series_of(v), 63);
        REQUIRE(out.size() == 138);
        for (std::size_t i = 0; i < out.size(); ++i) {
            double sum = 0.0;
            for (std::size_t j = i; j < i + 63; ++j) sum += std::log1p(v[j]);
            CHECK(std::log(out.values[i]) == doctest::Approx(sum).epsilon(1e-11));
            CHECK(out.values[i] > 0.0);
        }
    }
}

TEST_CASE("series alignment") {
    ReturnSeries a, b;
    a.push_back(d("2019-01-02"), 1);
    a.push_back(d("2019-01-03"), 2);
    a.push_back(d("2019-01-07"), 3);
    b.push_back(d("2019-01-03"), 20);
    b.push_back(d("2019-01-04"), 30);
    b.push_back(d("2019-01-07"), 40);
    auto [x, y] = align(a, b);
    CHECK(x == std::vector<double>{2, 3});
    CHECK(y == std::vector<double>{20, 40});
}

TEST_CASE("correlation report") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    std::vector<double> va(300), vb(300);
    for (std::size_t i = 0; i < 300; ++i) {
        va[i] = n01(rng) * 0.01;
        vb[i] = 0.5 * va[i] + n01(rng) * 0.01;
    }
    auto a = series_of(va), b = series_of(vb);

    auto self = cross_correlation_report(a, a);
    CHECK(self.lag0_corr == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(self.n == 300);
    CHECK(self.sig_limit == doctest::Approx(1.96 / std::sqrt(300.0)).epsilon(1e-15));

    auto ab = cross_correlation_report(a, b);
    auto ba = cross_correlation_report(b, a);
    CHECK(ab.lag0_corr == doctest::Approx(ba.lag0_corr).epsilon(1e-14));
    CHECK(ab.lag0_corr > 0.2);
    CHECK(ab.lag0_corr <= 1.0);
    CHECK(std::abs(cross_correlation_report(a, series_of([&] {
              auto neg = va;
              for (auto& x : neg) x = -x;
              return neg;
          }())).lag0_corr + 1.0) < 1e-12);
    for (const auto& f : ab.autocorr_a) {
        CHECK(std::abs(f.rho) > ab.sig_limit);
        CHECK(f.lag >= 1);
        CHECK(f.lag <= kDefaultMaxLag);
    }

    SUBCASE("strong persistence is flagged") {
        std::vector<double> ar(300);
        ar[0] = 0.0;
        for (std::size_t i = 1; i < 300; ++i) ar[i] = 0.9 * ar[i - 1] + n01(rng);
        auto rep = cross_correlation_report(series_of(ar), b, 5);
        REQUIRE(!rep.autocorr_a.empty());
        CHECK(rep.autocorr_a.front().lag == 1);
        CHECK(rep.autocorr_a.front().rho > 0.7);
    }

    auto shortish = series_of(std::vector<double>(29, 0.01));
    CHECK_THROWS_AS(cross_correlation_report(shortish, shortish), DataError);

    CHECK(significance_limit(3780) == doctest::Approx(1.96 / std::sqrt(3780.0)).epsilon(1e-15));
    CHECK(std::round(significance_limit(3780) * 100.0) / 100.0 == doctest::Approx(0.03));
}

TEST_CASE("distribution report") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n01;
    std::vector<double> v(500);
    for (auto& x : v) x = n01(rng) * 0.01;
    auto a = series_of(v);

    auto self = distribution_report(a, a, 50);
    REQUIRE(self.a.density.size() == 50);
    double mass = 0.0;
    for (double x : self.a.density) mass += x * self.a.bin_width;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(self.b.density == self.a.density);
    CHECK(self.qq.size() == 500);
    for (auto [qa, qb] : self.qq) CHECK(qa == qb);

    auto shifted_v = v;
    for (auto& x : shifted_v) x += 0.01;
    auto shifted = distribution_report(a, series_of(shifted_v), 40);
    double mb = 0.0;
    for (double x : shifted.b.density) mb += x * shifted.b.bin_width;
    CHECK(mb == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(shifted.a.lo == shifted.b.lo);
    for (auto [qa, qb] : shifted.qq) CHECK(qb - qa == doctest::Approx(0.01).epsilon(1e-9));

    auto flat = distribution_report(series_of({0.0, 0.0, 0.0}), series_of({0.0, 0.0, 0.0}), 4);
    double fm = 0.0;
    for (double x : flat.a.density) fm += x * flat.a.bin_width;
    CHECK(fm == doctest::Approx(1.0));

    CHECK_THROWS_AS(distribution_report(a, a, 0), UsageError);
}

TEST_CASE("series round trip") {
    auto s = series_of({0.1, -0.25, 1e-17, 0.333333333333333});
    auto path = std::filesystem::temp_directory_path() / "recon_series_rt.csv";
    {
        std::ofstream out(path);
        write_series(s, out);
    }
    auto back = read_series(path.string());
    CHECK(back.dates == s.dates);
    CHECK(back.values == s.values);

    {
        std::ofstream out(path);
        out << "date,value\n2019-01-02,0.1\n2019-01-02,0.2\n";
    }
    CHECK_THROWS_AS(read_series(path.string()), DataError);
    {
        std::ofstream out(path);
        out << "day,ret\n";
    }
    CHECK_THROWS_AS(read_series(path.string()), DataError);
    std::filesystem::remove(path);
}
