#include "equivalence.hpp"

#include "recon/error.hpp"
#include "recon/impact.hpp"
#include "recon/oracle.hpp"
#include "recon/synth.hpp"

#include <doctest.h>

#include <map>
#include <json.hpp>
#include <set>
#include <sstream>

using namespace recon;

namespace {

synth::UniverseConfig small(std::uint64_t seed) {
    synth::UniverseConfig c;
    c.n_companies = 60;
    c.first_year = 2004;
    c.last_year = 2006;
    c.seed = seed;
    return c;
}

IndexParams scaled(std::size_t n) {
    IndexParams p;
    p.n_tier1 = n / 10;
    p.n_tier3 = 3 * n / 10;
    p.n_tierE = 4 * n / 10;
    return p;
}

TradingCalendar calendar_for(const synth::UniverseConfig& c) {
    return build_trading_calendar(std::nullopt, synth::universe_range(c));
}

}  // namespace

TEST_CASE("generator is deterministic per seed") {
    auto c = small(3);
    auto cal = calendar_for(c);
    auto a = synth::generate_universe(c, cal);
    auto b = synth::generate_universe(c, cal);
    CHECK(a.bars == b.bars);
    CHECK(a.meta == b.meta);
    CHECK(a.script.to_json() == b.script.to_json());
    auto other = synth::generate_universe(small(4), cal);
    CHECK_FALSE(other.bars == a.bars);
}

TEST_CASE("generated universe is internally consistent") {
    for (std::uint64_t seed : {1, 2, 3}) {
        auto c = small(seed);
        auto cal = calendar_for(c);
        auto u = synth::generate_universe(c, cal);
        const auto range = synth::universe_range(c);

        std::map<Permno, std::set<Date>> halted;
        for (const auto& h : u.script.halts) {
            auto days = cal.trading_days(h.first, range.end);
            for (int k = 0; k < h.days && k < static_cast<int>(days.size()); ++k) {
                halted[h.permno].insert(days[k]);
            }
        }
        std::size_t expected = 0;
        for (const auto& m : u.meta.rows()) {
            auto hist = u.bars.history(m.permno);
            REQUIRE(!hist.empty());
            CHECK(hist.front().date == m.begdat);
            CHECK(hist.front().permco == m.permco);
            CHECK_FALSE(hist.front().ret.has_value());
            expected += cal.trading_days(m.begdat, hist.back().date).size() -
                        halted[m.permno].size();
            for (const auto& b : hist) {
                CHECK(cal.is_trading_day(b.date));
                CHECK(range.contains(b.date));
                CHECK(b.shrout > 0.0);
                CHECK(b.cfacpr > 0.0);
            }
        }
        CHECK(u.bars.size() == expected);
        CHECK(u.meta.company_count() >= c.n_companies);

        for (const auto& ipo : u.script.ipos) {
            const auto* m = u.meta.find(ipo.permno);
            REQUIRE(m);
            CHECK(m->begdat == ipo.first_bar);
        }
        for (const auto& dl : u.script.delistings) {
            CHECK(u.bars.history(dl.permno).back().date == dl.last_bar);
        }

        // Every annual rank day has at least one eligible company.
        for (int y = c.first_year; y <= c.last_year; ++y) {
            const Date rank = annual_rank_day(y, cal);
            auto caps = company_caps(u.bars, u.meta, rank);
            CHECK_FALSE(eligibility_filter(caps.companies, u.meta, IndexParams{}).empty());
        }
        auto js = nlohmann::json::parse(u.script.to_json());
        CHECK(js["ipos"].size() == u.script.ipos.size());
    }
}

TEST_CASE("no IPOs without an IPO rate") {
    auto c = small(5);
    c.ipo_rate = 0.0;
    auto cal = calendar_for(c);
    auto u = synth::generate_universe(c, cal);
    CHECK(u.script.ipos.empty());
    const Date start = cal.next_or_same(synth::universe_range(c).start);
    for (const auto& m : u.meta.rows()) CHECK(m.begdat == start);
}

TEST_CASE("invalid generator settings are rejected") {
    auto c = small(1);
    c.delist_rate = 1.5;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = small(1);
    c.n_companies = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("oracle membership on hand-built days") {
    TradingCalendar cal{{make_date(2019, 1, 1), make_date(2019, 12, 31)}, {}};
    const Date rank = make_date(2019, 5, 31);
    std::vector<SecurityBar> rows;
    std::vector<SecurityMeta> metas;
    auto add = [&](int permno, int permco, double prc, double shrout) {
        rows.push_back({Permno{permno}, Permco{permco}, rank, prc, false, shrout, 0.0, 1.0});
        metas.push_back({Permno{permno}, Permco{permco}, rank, 11, "x", true});
    };

    SUBCASE("nothing eligible") {
        add(1, 1, 0.5, 1e6);
        auto m = oracle::oracle_membership(BarTable(rows), MetaTable(metas), rank, IndexParams{});
        CHECK(m.empty());
    }
    SUBCASE("identical caps rank by permco") {
        IndexParams p;
        p.n_tier1 = 1;
        p.n_tier3 = 2;
        p.n_tierE = 3;
        add(13, 3, 10, 1e7);
        add(11, 1, 10, 1e7);
        add(12, 2, 10, 1e7);
        auto m = oracle::oracle_membership(BarTable(rows), MetaTable(metas), rank, p);
        REQUIRE(m.size() == 3);
        CHECK(m.at(Permco{1}).tiers == (1 | 4 | 8));
        CHECK(m.at(Permco{2}).tiers == (2 | 4 | 8));
        CHECK(m.at(Permco{3}).tiers == 8);
        CHECK(m.at(Permco{1}).weight[0] == 1.0);
        CHECK(m.at(Permco{2}).weight[2] == doctest::Approx(0.5));
    }
}

TEST_CASE("oracle membership agrees with the ranking module") {
    for (std::uint64_t seed : {11, 12, 13, 14}) {
        auto c = small(seed);
        auto cal = calendar_for(c);
        auto u = synth::generate_universe(c, cal);
        const auto params = scaled(c.n_companies);
        for (int y = c.first_year; y <= c.last_year; ++y) {
            const Date rank = annual_rank_day(y, cal);
            auto caps = company_caps(u.bars, u.meta, rank);
            auto snap = compute_weights(
                snapshot_skeleton(rank_and_assign(eligibility_filter(caps.companies, u.meta, params), params)));
            auto ref = oracle::oracle_membership(u.bars, u.meta, rank, params);
            REQUIRE(snap.members.size() == ref.size());
            for (const auto& m : snap.members) {
                const auto& r = ref.at(m.permco);
                CHECK(testing::tier_bits(m.tiers) == r.tiers);
                for (std::size_t k = 0; k < 4; ++k) {
                    CHECK(std::abs(m.weight[k] - r.weight[k]) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("oracle timeline agrees with the reconstitution module") {
    for (std::uint64_t seed : {21, 22, 23}) {
        auto c = small(seed);
        c.halt_rate = 0.2;  // exercise the delisting gap rule
        auto cal = calendar_for(c);
        auto u = synth::generate_universe(c, cal);
        const auto params = scaled(c.n_companies);
        auto t = membership_timeline(c.first_year, c.last_year, u.bars, u.meta, params, cal);
        auto days = cal.trading_days(cal.range().start, cal.range().end);
        auto o = oracle::oracle_timeline(c.first_year, c.last_year, u.bars, u.meta, params, days);
        auto diffs = testing::compare_timelines(t, o);
        std::string joined;
        for (const auto& s : diffs) joined += s + "\n";
        INFO("seed " << seed << "\n" << joined);
        CHECK(diffs.empty());
        CHECK(t.snapshots.size() == 4 * 3);
    }
}

TEST_CASE("oracle impact means agree with the impact module") {
    for (std::uint64_t seed : {31, 32}) {
        auto c = small(seed);
        auto cal = calendar_for(c);
        auto u = synth::generate_universe(c, cal);
        const auto params = scaled(c.n_companies);
        auto t = membership_timeline(c.first_year, c.last_year, u.bars, u.meta, params, cal);
        auto days = cal.trading_days(cal.range().start, cal.range().end);
        auto o = oracle::oracle_timeline(c.first_year, c.last_year, u.bars, u.meta, params, days);
        for (int y = c.first_year + 1; y <= c.last_year; ++y) {
            auto table = annual_impact_table(t, u.bars, cal, y);
            auto ref = oracle::oracle_impact_means(o, u.bars, days, y);
            INFO("seed " << seed << " year " << y);
            CHECK(table.additions.n == ref.additions.n);
            CHECK(table.deletions.n == ref.deletions.n);
            auto same = [](double a, double b) {
                return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= 1e-12;
            };
            CHECK(same(table.additions.mean_temp, ref.additions.mean_temp));
            CHECK(same(table.additions.mean_perm, ref.additions.mean_perm));
            CHECK(same(table.additions.se_perm, ref.additions.se_perm));
            CHECK(same(table.deletions.mean_temp, ref.deletions.mean_temp));
            CHECK(same(table.deletions.mean_perm, ref.deletions.mean_perm));
            CHECK(same(table.deletions.se_temp, ref.deletions.se_temp));
        }
    }
}
