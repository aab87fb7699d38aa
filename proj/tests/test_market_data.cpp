#include "recon/csv.hpp"
#include "recon/error.hpp"
#include "recon/market_data.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

using namespace recon;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

BarLoad parse(const std::string& body) {
    const auto lines = lines_of(std::string(kBarHeader) + "\n" + body);
    return parse_daily_bars(lines);
}

SecurityBar bar(int permno, int permco, const char* date, double prc, double shrout = 100,
                std::optional<double> ret = std::nullopt, double cfacpr = 1.0) {
    SecurityBar b;
    b.permno = Permno{permno};
    b.permco = Permco{permco};
    b.date = parse_date(date);
    b.prc = prc;
    b.shrout = shrout;
    b.ret = ret;
    b.cfacpr = cfacpr;
    return b;
}

SecurityMeta meta(int permno, int permco, const char* begdat, int hshrcd = 11, bool us = true) {
    return {Permno{permno}, Permco{permco}, parse_date(begdat), hshrcd, "Co " + std::to_string(permco), us};
}

}  // namespace

TEST_CASE("three well-formed rows load without rejects") {
    auto load = parse(
        "10001,20001,2019-05-30,10.5,1000,0.01,1\n"
        "10001,20001,2019-05-31,10.6,1000,,1\n"
        "10002,20002,2019-05-31,20,500,-0.02,2\n");
    CHECK(load.table.size() == 3);
    CHECK(load.report.rejected.empty());
    CHECK(load.report.rows_read == 3);
    CHECK(load.report.rows_kept == 3);
    const auto* b = load.table.find(Permno{10001}, parse_date("2019-05-31"));
    REQUIRE(b);
    CHECK_FALSE(b->ret.has_value());
    CHECK(*b->prc == 10.6);
}

TEST_CASE("cfacpr = 0 row is rejected and reported") {
    auto load = parse(
        "10001,20001,2019-05-30,10.5,1000,0.01,0\n"
        "10001,20001,2019-05-31,10.6,1000,,1\n");
    CHECK(load.table.size() == 1);
    REQUIRE(load.report.rejected.size() == 1);
    CHECK(load.report.rejected[0].line == 2);
    CHECK(load.report.rejected[0].reason.find("cfacpr") != std::string::npos);
}

TEST_CASE("negative prc is a midpoint with the absolute price") {
    auto load = parse("10001,20001,2019-05-31,-12.5,1000,,1\n");
    const auto& b = load.table.rows().front();
    CHECK(*b.prc == 12.5);
    CHECK(b.midpoint);
}

TEST_CASE("malformed rows are rejected, bad header and duplicates throw") {
    auto load = parse(
        "10001,20001,2019-13-31,1,1,,1\n"
        "x,20001,2019-05-31,1,1,,1\n"
        "10001,20001,2019-05-31,1,-5,,1\n"
        "10001,20001,2019-05-31,1\n");
    CHECK(load.table.empty());
    CHECK(load.report.rejected.size() == 4);

    CHECK_THROWS_AS(parse_daily_bars(lines_of("permno,date\n1,2019-01-01")), DataError);
    try {
        parse(
            "10001,20001,2019-05-31,1,1,,1\n"
            "10001,20001,2019-05-31,2,1,,1\n");
        FAIL("expected a duplicate-key error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("10001 2019-05-31") != std::string::npos);
    }
    CHECK_THROWS_AS(load_daily_bars("/nonexistent/bars.csv"), DataError);
}

TEST_CASE("zero shrout rows are kept") {
    auto load = parse("10001,20001,2019-05-31,10,0,0.01,1\n");
    CHECK(load.table.size() == 1);
}

TEST_CASE("date range filters rows and counts them") {
    const auto lines = lines_of(std::string(kBarHeader) +
                                "\n10001,1,2019-01-02,1,1,,1\n10001,1,2019-06-03,1,1,,1\n");
    auto load = parse_daily_bars(lines, DateRange{parse_date("2019-06-01"), parse_date("2019-12-31")});
    CHECK(load.table.size() == 1);
    CHECK(load.report.rows_out_of_range == 1);
}

TEST_CASE("meta: grouping, share codes and empty file") {
    const auto m = parse_security_meta(lines_of(std::string(kMetaHeader) +
                                                "\n1,7,2000-01-03,11,Alpha,1\n"
                                                "2,7,2001-01-03,73,\"Alpha, Class B\",1\n"));
    CHECK(m.size() == 2);
    CHECK(m.company_count() == 1);
    CHECK(m.securities_of(Permco{7}).size() == 2);
    REQUIRE(m.find(Permno{2}));
    CHECK(m.find(Permno{2})->company_name == "Alpha, Class B");
    CHECK_FALSE(m.find(Permno{2})->is_common_stock());
    CHECK(m.non_common() == std::vector<Permno>{Permno{2}});

    const auto empty = parse_security_meta(lines_of(kMetaHeader));
    CHECK(empty.empty());

    CHECK_THROWS_AS(parse_security_meta(lines_of(std::string(kMetaHeader) +
                                                 "\n1,7,2000-01-03,11,A,1\n1,8,2000-01-03,11,B,1\n")),
                    DataError);
    CHECK_THROWS_AS(parse_security_meta(lines_of(std::string(kMetaHeader) +
                                                 "\n1,7,2000-01-03,11,A,2\n")),
                    DataError);
}

TEST_CASE("adjusted price") {
    CHECK(adjusted_price(bar(1, 1, "2019-01-02", 10, 1, {}, 1)) == 10.0);
    CHECK(adjusted_price(bar(1, 1, "2019-01-02", 10, 1, {}, 2)) == 5.0);
    auto mid = parse("1,1,2019-01-02,-8,1,,4\n");
    CHECK(adjusted_price(mid.table.rows().front()) == 2.0);
    auto zero = bar(1, 1, "2019-01-02", 10, 1, {}, 1);
    zero.cfacpr = 0.0;
    CHECK_THROWS_AS(adjusted_price(zero), std::domain_error);
}

TEST_CASE("adjusted price is scale consistent") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 100.0);
    for (int i = 0; i < 200; ++i) {
        const double prc = u(rng), cf = u(rng), k = u(rng);
        const double a = adjusted_price(bar(1, 1, "2019-01-02", prc, 1, {}, cf));
        const double b = adjusted_price(bar(1, 1, "2019-01-02", prc * k, 1, {}, cf * k));
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("bar table lookups and slices") {
    BarTable t({bar(2, 1, "2019-01-04", 3), bar(1, 1, "2019-01-03", 2), bar(1, 1, "2019-01-02", 1),
                bar(1, 1, "2019-01-07", 4)});
    const auto h = t.history(Permno{1});
    REQUIRE(h.size() == 3);
    CHECK(std::is_sorted(h.begin(), h.end(),
                         [](const SecurityBar& a, const SecurityBar& b) { return a.date < b.date; }));
    CHECK(t.history(Permno{1}, parse_date("2019-01-03"), parse_date("2019-01-06")).size() == 1);
    CHECK(t.find(Permno{2}, parse_date("2019-01-04")) != nullptr);
    CHECK(t.find(Permno{2}, parse_date("2019-01-03")) == nullptr);
    CHECK(t.last_on_or_before(Permno{1}, parse_date("2019-01-06"))->date == parse_date("2019-01-03"));
    CHECK(t.last_on_or_before(Permno{1}, parse_date("2019-01-01")) == nullptr);
    CHECK(t.on(parse_date("2019-01-02")).size() == 1);
    CHECK(*t.first_date() == parse_date("2019-01-02"));
    CHECK(*t.last_date() == parse_date("2019-01-07"));
}

TEST_CASE("write then reload is identical") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    std::vector<SecurityBar> rows;
    for (int p = 1; p <= 20; ++p) {
        Date d = parse_date("2019-01-02");
        for (int k = 0; k < 30; ++k, d += std::chrono::days{1}) {
            auto b = bar(p, 100 + p % 7, "2019-01-02", std::abs(u(rng)) + 0.01, std::round(std::abs(u(rng)) * 100));
            b.date = d;
            b.midpoint = k % 9 == 0;
            if (k % 5) b.ret = u(rng) / 1000.0;
            if (k % 13 == 0) b.prc.reset(), b.midpoint = false;
            b.cfacpr = k < 15 ? 1.0 : 1.0 / 3.0;
            rows.push_back(b);
        }
    }
    const BarTable table(rows);
    std::ostringstream out;
    write_daily_bars(table, out);
    const auto back = parse_daily_bars(lines_of(out.str()));
    CHECK(back.report.rejected.empty());
    CHECK(back.table == table);

    std::vector<SecurityMeta> ms{meta(1, 101, "2019-01-02"), meta(2, 102, "2019-01-02", 73, false)};
    ms[1].company_name = "Comma, \"Quoted\" Co";
    const MetaTable mt(ms);
    std::ostringstream mout;
    write_security_meta(mt, mout);
    CHECK(parse_security_meta(lines_of(mout.str())) == mt);
}

TEST_CASE("ingestion is order independent") {
    std::vector<std::string> body;
    for (int p = 1; p <= 5; ++p) {
        for (int d = 2; d <= 9; ++d) {
            body.push_back(std::to_string(p) + ",9,2019-01-0" + std::to_string(d) + "," +
                           std::to_string(p + d) + ",10,0.01,1");
        }
    }
    auto with_header = [](std::vector<std::string> b) {
        b.insert(b.begin(), kBarHeader);
        return b;
    };
    const auto a = parse_daily_bars(with_header(body));
    std::mt19937_64 rng(3);
    std::shuffle(body.begin(), body.end(), rng);
    const auto b = parse_daily_bars(with_header(body));
    CHECK(a.table == b.table);
}

TEST_CASE("validation report") {
    const MetaTable m({meta(1, 1, "2019-01-02"), meta(2, 2, "2019-01-03")});
    SUBCASE("consistent universe") {
        BarTable t({bar(1, 1, "2019-01-02", 1), bar(1, 1, "2019-01-03", 1), bar(2, 2, "2019-01-03", 1)});
        CHECK(validate_universe(t, m).empty());
    }
    SUBCASE("bar before begdat") {
        BarTable t({bar(2, 2, "2019-01-02", 1)});
        const auto r = validate_universe(t, m);
        CHECK(r.begdat_violations.size() == 1);
        CHECK(r.orphans.empty());
    }
    SUBCASE("orphan") {
        BarTable t({bar(1, 1, "2019-01-02", 1), bar(3, 3, "2019-01-02", 1)});
        const auto r = validate_universe(t, m);
        CHECK(r.orphans == std::vector<Permno>{Permno{3}});
    }
    SUBCASE("gap and missing price") {
        auto missing = bar(1, 1, "2019-01-30", 1);
        missing.prc.reset();
        BarTable t({bar(1, 1, "2019-01-02", 1), missing});
        const auto r = validate_universe(t, m);
        REQUIRE(r.gaps.size() == 1);
        CHECK(r.gaps[0].calendar_days == 28);
        CHECK(r.missing_prices.size() == 1);
    }
}

TEST_CASE("csv helpers") {
    CHECK(csv::split_line("a,\"b,c\",\"d\"\"e\",") == std::vector<std::string>{"a", "b,c", "d\"e", ""});
    CHECK(csv::format_double(0.1) == "0.1");
    CHECK(csv::format_fixed(-0.04, 1) == "0.0");
    CHECK_FALSE(csv::parse_double("1.5x").has_value());
    CHECK(*csv::parse_int("-12") == -12);
}
