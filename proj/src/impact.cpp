#include "recon/impact.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace recon {

const char* to_string(GroupTag g) {
    switch (g) {
        case GroupTag::AnnualAddition: return "annual_addition";
        case GroupTag::AnnualDeletion: return "annual_deletion";
        case GroupTag::QuarterlyAdditionRetained: return "quarterly_addition_retained";
        case GroupTag::NewAddition: return "new_addition";
        case GroupTag::Incumbent: return "incumbent";
        case GroupTag::QuarterlyAddition: return "quarterly_addition";
    }
    return "?";
}

const char* to_string(ImpactMeasure m) {
    return m == ImpactMeasure::Permanent ? "permanent" : "temporary";
}

ImpactSample impact_sample(double p0, double p1, double p2) {
    if (!(p0 > 0.0 && p1 > 0.0 && p2 > 0.0)) {
        throw std::domain_error("impact prices must be positive");
    }
    ImpactSample s;
    s.p0 = p0;
    s.p1 = p1;
    s.p2 = p2;
    s.r_temp = std::log(p1) - std::log(p2);
    s.r_perm = std::log(p2) - std::log(p0);
    return s;
}

std::optional<SnappedPrice> snap_price(const BarTable& bars, const TradingCalendar& cal,
                                       Permno permno, Date target, std::string* why) {
    const auto fail = [&](std::string reason) -> std::optional<SnappedPrice> {
        if (why) *why = std::move(reason);
        return std::nullopt;
    };
    if (!cal.contains(target)) return fail("target " + format_date(target) + " outside calendar");
    auto history = bars.history(permno);
    auto it = std::upper_bound(history.begin(), history.end(), target,
                               [](Date d, const SecurityBar& b) { return d < b.date; });
    while (it != history.begin()) {
        --it;
        if (cal.trading_days_between(it->date, target) > kMaxSnapTradingDays) break;
        if (it->prc) return SnappedPrice{it->date, adjusted_price(*it)};
    }
    return fail("no price within " + std::to_string(kMaxSnapTradingDays) +
                " trading days before " + format_date(target));
}

SampleSet measure_impact(const BarTable& bars, const TradingCalendar& cal,
                         std::span<const Permno> permnos, Date anchor, GroupTag group) {
    SampleSet out;
    const std::array<Date, 3> targets{anchor, add_months(anchor, 1), add_months(anchor, 2)};
    for (Permno p : permnos) {
        std::array<SnappedPrice, 3> prices{};
        std::string why;
        bool ok = true;
        for (std::size_t i = 0; i < 3 && ok; ++i) {
            auto snapped = snap_price(bars, cal, p, targets[i], &why);
            if (snapped) prices[i] = *snapped;
            ok = snapped.has_value();
        }
        if (!ok) {
            out.dropped.push_back({p, anchor, why});
            continue;
        }
        ImpactSample s = impact_sample(prices[0].price, prices[1].price, prices[2].price);
        s.permno = p;
        s.event_date = anchor;
        s.d0 = prices[0].date;
        s.d1 = prices[1].date;
        s.d2 = prices[2].date;
        s.group = group;
        out.samples.push_back(s);
    }
    return out;
}

ImpactRow summarize(int year, const std::string& group, std::span<const ImpactSample> samples) {
    ImpactRow row;
    row.year = year;
    row.group = group;
    row.n = samples.size();
    const auto temp = values_of(samples, ImpactMeasure::Temporary);
    const auto perm = values_of(samples, ImpactMeasure::Permanent);
    const auto se = [](const std::vector<double>& x) {
        return std::sqrt(stats::sample_variance(x) / static_cast<double>(x.size()));
    };
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean_temp = row.n ? 100.0 * stats::mean(temp) : nan;
    row.mean_perm = row.n ? 100.0 * stats::mean(perm) : nan;
    row.se_temp = row.n > 1 ? 100.0 * se(temp) : nan;
    row.se_perm = row.n > 1 ? 100.0 * se(perm) : nan;
    return row;
}

std::vector<double> values_of(std::span<const ImpactSample> samples, ImpactMeasure measure) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(measure == ImpactMeasure::Permanent ? s.r_perm : s.r_temp);
    }
    return out;
}

namespace {

std::string annual_label(int year) { return std::to_string(year) + "-annual"; }

std::set<Permco> changed(const MembershipTimeline& t, const std::string& event, ChangeAction a) {
    std::set<Permco> out;
    for (const auto& c : t.changes) {
        if (c.event == event && c.action == a) out.insert(c.permco);
    }
    return out;
}

// Securities held by the given companies in a snapshot, skipping those
// delisted before `on`.
std::vector<Permno> securities_of(const MembershipSnapshot& snap, const std::set<Permco>& companies,
                                  Date on) {
    std::vector<Permno> out;
    for (Permco c : companies) {
        const Member* m = snap.find(c);
        if (!m) continue;
        for (const auto& h : m->securities) {
            if (!(h.delisted && *h.delisted < on)) out.push_back(h.permno);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

const MembershipSnapshot* previous_snapshot(const MembershipTimeline& t,
                                            const MembershipSnapshot* snap) {
    for (std::size_t i = 1; i < t.snapshots.size(); ++i) {
        if (&t.snapshots[i] == snap) return &t.snapshots[i - 1];
    }
    return nullptr;
}

// Companies added into T3 at the quarterly events of a cycle.
std::set<Permco> quarterly_adds(const MembershipTimeline& t, int cycle_year, bool t3_only) {
    std::set<Permco> out;
    for (QuarterLabel q : {QuarterLabel::Q3, QuarterLabel::Q4, QuarterLabel::Q1}) {
        const MembershipSnapshot* s = t.quarterly(cycle_year, q);
        if (!s) continue;
        for (const auto& m : s->members) {
            if (m.quarterly_addition && (!t3_only || m.tiers.has(Tier::T3))) out.insert(m.permco);
        }
    }
    return out;
}

}  // namespace

std::vector<Permno> annual_additions(const MembershipTimeline& timeline, int year) {
    const MembershipSnapshot* snap = timeline.annual(year);
    if (!snap) return {};
    auto adds = changed(timeline, annual_label(year), ChangeAction::Add);
    for (Permco c : quarterly_adds(timeline, year - 1, false)) adds.erase(c);
    return securities_of(*snap, adds, snap->rank_day);
}

std::vector<Permno> annual_deletions(const MembershipTimeline& timeline, int year) {
    const MembershipSnapshot* snap = timeline.annual(year);
    const MembershipSnapshot* prev = snap ? previous_snapshot(timeline, snap) : nullptr;
    if (!prev) return {};
    const auto dels = changed(timeline, annual_label(year), ChangeAction::Delete);
    return securities_of(*prev, dels, snap->rank_day);
}

ImpactTable annual_impact_table(const MembershipTimeline& timeline, const BarTable& bars,
                                const TradingCalendar& cal, int year) {
    ImpactTable table;
    if (const MembershipSnapshot* snap = timeline.annual(year)) {
        const auto adds = annual_additions(timeline, year);
        const auto dels = annual_deletions(timeline, year);
        table.addition_samples =
            measure_impact(bars, cal, adds, snap->rank_day, GroupTag::AnnualAddition);
        table.deletion_samples =
            measure_impact(bars, cal, dels, snap->rank_day, GroupTag::AnnualDeletion);
    }
    table.additions = summarize(year, "additions", table.addition_samples.samples);
    table.deletions = summarize(year, "deletions", table.deletion_samples.samples);
    return table;
}

GroupPair annual_groups(const MembershipTimeline& timeline, int year) {
    GroupPair out;
    const MembershipSnapshot* snap = timeline.annual(year);
    if (!snap) return out;
    std::set<Permco> retained;
    for (Permco c : quarterly_adds(timeline, year - 1, true)) {
        const Member* m = snap->find(c);
        if (m && m->tiers.has(Tier::T3) && m->active_on(snap->effective_start)) retained.insert(c);
    }
    out.first = securities_of(*snap, retained, snap->effective_start);
    out.second = annual_additions(timeline, year);
    return out;
}

GroupPair quarterly_groups(const MembershipTimeline& timeline, int cycle_year, QuarterLabel q) {
    GroupPair out;
    const MembershipSnapshot* snap = timeline.quarterly(cycle_year, q);
    if (!snap) return out;
    std::set<Permco> added, incumbents;
    for (const auto& m : snap->members) {
        if (m.quarterly_addition && m.tiers.has(Tier::T3)) added.insert(m.permco);
    }
    const MembershipSnapshot* now = timeline.annual(cycle_year);
    const MembershipSnapshot* before = timeline.annual(cycle_year - 1);
    if (now && before) {
        for (const auto& m : snap->members) {
            if (m.quarterly_addition || !m.tiers.has(Tier::T3) || !m.active_on(snap->rank_day))
                continue;
            const Member* a = now->find(m.permco);
            const Member* b = before->find(m.permco);
            if (a && b && a->tiers == b->tiers) incumbents.insert(m.permco);
        }
    }
    out.first = securities_of(*snap, added, snap->rank_day);
    out.second = securities_of(*snap, incumbents, snap->rank_day);
    return out;
}

CrowdingSamples annual_crowding_samples(const MembershipTimeline& timeline, const BarTable& bars,
                                        const TradingCalendar& cal, int year) {
    CrowdingSamples out;
    out.label = std::to_string(year);
    const MembershipSnapshot* snap = timeline.annual(year);
    if (!snap) return out;
    const auto groups = annual_groups(timeline, year);
    out.z = measure_impact(bars, cal, groups.first, snap->rank_day,
                           GroupTag::QuarterlyAdditionRetained);
    out.y = measure_impact(bars, cal, groups.second, snap->rank_day, GroupTag::NewAddition);
    return out;
}

CrowdingSamples quarterly_crowding_samples(const MembershipTimeline& timeline,
                                           const BarTable& bars, const TradingCalendar& cal,
                                           int cycle_year, QuarterLabel q) {
    CrowdingSamples out;
    out.label = std::to_string(cycle_year) + "-" + to_string(q);
    const MembershipSnapshot* snap = timeline.quarterly(cycle_year, q);
    if (!snap) return out;
    const auto groups = quarterly_groups(timeline, cycle_year, q);
    out.z = measure_impact(bars, cal, groups.first, snap->rank_day, GroupTag::QuarterlyAddition);
    out.y = measure_impact(bars, cal, groups.second, snap->rank_day, GroupTag::Incumbent);
    return out;
}

stats::TestCase crowding_case(const CrowdingSamples& s, ImpactMeasure measure) {
    return {s.label, values_of(s.z.samples, measure), values_of(s.y.samples, measure)};
}

void write_impact_rows(std::span<const ImpactRow> rows, std::ostream& out) {
    out << "year,group,mean_temp,se_temp,mean_perm,se_perm,n\n";
    for (const auto& r : rows) {
        out << r.year << ',' << r.group << ',' << csv::format_double(r.mean_temp) << ','
            << csv::format_double(r.se_temp) << ',' << csv::format_double(r.mean_perm) << ','
            << csv::format_double(r.se_perm) << ',' << r.n << '\n';
    }
}

namespace {

std::string cell(double mean, double se) {
    if (std::isnan(mean)) return "-";
    return csv::format_fixed(mean, 1) + " (" + (std::isnan(se) ? "-" : csv::format_fixed(se, 1)) +
           ")";
}

}  // namespace

void write_impact_table(std::span<const ImpactTable> tables, std::ostream& out) {
    out << "year,additions_r_temp,additions_r_perm,additions_n,"
           "deletions_r_temp,deletions_r_perm,deletions_n\n";
    for (const auto& t : tables) {
        const auto& a = t.additions;
        const auto& d = t.deletions;
        out << a.year << ',' << cell(a.mean_temp, a.se_temp) << ','
            << cell(a.mean_perm, a.se_perm) << ',' << a.n << ',' << cell(d.mean_temp, d.se_temp)
            << ',' << cell(d.mean_perm, d.se_perm) << ',' << d.n << '\n';
    }
}

void write_group_roster(const std::string& event, std::span<const Permno> permnos, GroupTag tag,
                        std::ostream& out) {
    for (Permno p : permnos) out << event << ',' << id(p) << ',' << to_string(tag) << '\n';
}

}  // namespace recon
