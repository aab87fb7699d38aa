#include "recon/reconstitution.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

namespace recon {

const char* to_string(Tier t) {
    switch (t) {
        case Tier::T1: return "T1";
        case Tier::T2: return "T2";
        case Tier::T3: return "T3";
        case Tier::TE: return "TE";
    }
    return "?";
}

std::optional<Tier> parse_tier(std::string_view s) {
    for (Tier t : kAllTiers) {
        if (s == to_string(t)) return t;
    }
    return std::nullopt;
}

std::string TierSet::to_string() const {
    std::string out;
    for (Tier t : kAllTiers) {
        if (!has(t)) continue;
        if (!out.empty()) out.push_back('|');
        out += recon::to_string(t);
    }
    return out;
}

void IndexParams::validate() const {
    if (!(n_tier1 < n_tier3 && n_tier3 <= n_tierE)) {
        throw UsageError("index sizes must satisfy n_tier1 < n_tier3 <= n_tierE");
    }
    if (!(min_cap > 0.0) || !(min_price > 0.0)) {
        throw UsageError("min_cap and min_price must be positive");
    }
}

const Constituent& CompanyCap::largest() const {
    const Constituent* best = &constituents.front();
    for (const auto& c : constituents) {
        if (c.cap() > best->cap()) best = &c;
    }
    return *best;
}

namespace {

void add_bar(std::map<Permco, CompanyCap>& companies, std::vector<CapSkip>& skipped,
             const SecurityBar& bar, const MetaTable& meta) {
    const SecurityMeta* m = meta.find(bar.permno);
    if (!m) {
        skipped.push_back({bar.permno, "no security meta"});
    } else if (!m->is_common_stock()) {
        skipped.push_back({bar.permno, "share code " + std::to_string(m->hshrcd)});
    } else if (!bar.prc) {
        skipped.push_back({bar.permno, "missing price"});
    } else if (!(bar.shrout > 0.0)) {
        skipped.push_back({bar.permno, "zero shares outstanding"});
    } else {
        auto& company = companies[bar.permco];
        company.permco = bar.permco;
        Constituent c{bar.permno, *bar.prc, bar.shares(), adjusted_price(bar)};
        company.cap += c.cap();
        company.constituents.push_back(c);
    }
}

CapsResult flatten(std::map<Permco, CompanyCap> companies, std::vector<CapSkip> skipped) {
    CapsResult out;
    out.skipped = std::move(skipped);
    out.companies.reserve(companies.size());
    for (auto& [permco, company] : companies) {
        std::sort(company.constituents.begin(), company.constituents.end(),
                  [](const Constituent& a, const Constituent& b) { return a.permno < b.permno; });
        out.companies.push_back(std::move(company));
    }
    return out;
}

std::optional<std::string> eligibility_failure(const CompanyCap& company, const MetaTable& meta,
                                               const IndexParams& params) {
    const Constituent& lead = company.largest();
    const SecurityMeta* m = meta.find(lead.permno);
    if (!m || !m->us_domiciled) return "not US-domiciled";
    if (!(lead.adjusted_price > params.min_price)) return "adjusted price not above minimum";
    if (company.cap < params.min_cap) return "cap below minimum";
    return std::nullopt;
}

}  // namespace

CapsResult company_caps(const BarTable& bars, const MetaTable& meta, Date day) {
    std::map<Permco, CompanyCap> companies;
    std::vector<CapSkip> skipped;
    for (const SecurityBar* bar : bars.on(day)) add_bar(companies, skipped, *bar, meta);
    return flatten(std::move(companies), std::move(skipped));
}

CapsResult company_caps_of(const BarTable& bars, const MetaTable& meta, Date day,
                           std::span<const Permno> permnos) {
    std::map<Permco, CompanyCap> companies;
    std::vector<CapSkip> skipped;
    for (Permno p : permnos) {
        if (const SecurityBar* bar = bars.find(p, day)) {
            add_bar(companies, skipped, *bar, meta);
        } else {
            skipped.push_back({p, "no bar on rank day"});
        }
    }
    return flatten(std::move(companies), std::move(skipped));
}

std::vector<CompanyCap> eligibility_filter(std::span<const CompanyCap> caps, const MetaTable& meta,
                                           const IndexParams& params) {
    std::vector<CompanyCap> out;
    for (const auto& c : caps) {
        if (!c.constituents.empty() && !eligibility_failure(c, meta, params)) out.push_back(c);
    }
    return out;
}

TierSet Breakpoints::tiers_for(double cap) const {
    if (tier1_floor > 0.0 && cap >= tier1_floor) return {Tier::T1, Tier::T3, Tier::TE};
    if (tier2_floor > 0.0 && cap >= tier2_floor) return {Tier::T2, Tier::T3, Tier::TE};
    if (tierE_floor > 0.0 && cap >= tierE_floor) return {Tier::TE};
    return {};
}

Ranking rank_and_assign(std::vector<CompanyCap> eligible, const IndexParams& params) {
    if (eligible.empty()) throw DataError("no eligible companies to rank");
    std::sort(eligible.begin(), eligible.end(), [](const CompanyCap& a, const CompanyCap& b) {
        return a.cap != b.cap ? a.cap > b.cap : a.permco < b.permco;
    });
    const std::size_t n = eligible.size();
    const std::size_t kept = std::min(n, params.n_tierE);

    Ranking out;
    const auto cap_at = [&](std::size_t i) { return eligible[i].cap; };
    auto& bp = out.breakpoints;
    bp.tier1_floor = cap_at(std::min(n, params.n_tier1) - 1);
    bp.tier3_floor = cap_at(std::min(n, params.n_tier3) - 1);
    if (n > params.n_tier1) {
        bp.tier2_ceiling = cap_at(params.n_tier1);
        bp.tier2_floor = bp.tier3_floor;
    }
    bp.tierE_floor = cap_at(kept - 1);

    out.companies.reserve(kept);
    for (std::size_t i = 0; i < kept; ++i) {
        TierSet tiers{Tier::TE};
        if (i < params.n_tier1) tiers.add(Tier::T1);
        else if (i < params.n_tier3) tiers.add(Tier::T2);
        if (i < params.n_tier3) tiers.add(Tier::T3);
        out.companies.push_back({std::move(eligible[i]), i + 1, tiers});
    }
    return out;
}

const char* to_string(EventOrigin o) {
    switch (o) {
        case EventOrigin::Annual: return "annual";
        case EventOrigin::Q3: return "Q3";
        case EventOrigin::Q4: return "Q4";
        case EventOrigin::Q1: return "Q1";
    }
    return "?";
}

std::string MembershipSnapshot::label() const {
    return std::to_string(cycle_year) + "-" + to_string(origin);
}

const Member* MembershipSnapshot::find(Permco c) const {
    auto it = std::lower_bound(members.begin(), members.end(), c,
                               [](const Member& m, Permco p) { return m.permco < p; });
    return it != members.end() && it->permco == c ? &*it : nullptr;
}

std::size_t MembershipSnapshot::tier_size(Tier t) const {
    return static_cast<std::size_t>(
        std::count_if(members.begin(), members.end(), [t](const Member& m) { return m.tiers.has(t); }));
}

std::size_t MembershipSnapshot::roster_size(Date d) const {
    return static_cast<std::size_t>(
        std::count_if(members.begin(), members.end(), [d](const Member& m) { return m.active_on(d); }));
}

MembershipSnapshot snapshot_skeleton(const Ranking& ranking) {
    MembershipSnapshot snap;
    snap.breakpoints = ranking.breakpoints;
    snap.members.reserve(ranking.companies.size());
    for (const auto& rc : ranking.companies) {
        Member m;
        m.permco = rc.company.permco;
        m.tiers = rc.tiers;
        m.cap = rc.company.cap;
        for (const auto& c : rc.company.constituents) m.securities.push_back({c.permno, c.cap(), {}});
        snap.members.push_back(std::move(m));
    }
    std::sort(snap.members.begin(), snap.members.end(),
              [](const Member& a, const Member& b) { return a.permco < b.permco; });
    return snap;
}

MembershipSnapshot compute_weights(MembershipSnapshot skeleton) {
    std::array<double, 4> totals{};
    for (const auto& m : skeleton.members) {
        for (Tier t : kAllTiers) {
            if (m.tiers.has(t)) totals[index_of(t)] += m.cap;
        }
    }
    for (auto& m : skeleton.members) {
        for (Tier t : kAllTiers) {
            m.weight[index_of(t)] = m.tiers.has(t) ? m.cap / totals[index_of(t)] : 0.0;
        }
    }
    return skeleton;
}

QuarterlyAdditions quarterly_ipo_additions(const QuarterEvent& quarter,
                                           const MembershipSnapshot& current,
                                           const Breakpoints& annual_breakpoints,
                                           const BarTable& bars, const MetaTable& meta,
                                           const IndexParams& params) {
    QuarterlyAdditions out;
    const Date window_start = add_months(quarter.rank, -3);  // exclusive

    std::vector<Permno> candidates;
    for (const auto& m : meta.rows()) {
        if (!(m.begdat > window_start && m.begdat <= quarter.rank)) continue;
        if (!m.is_common_stock()) {
            out.log.push_back({m.permno, m.permco, "not common stock"});
            continue;
        }
        const Member* existing = current.find(m.permco);
        if (existing && existing->active_on(quarter.rank)) {
            out.log.push_back({m.permno, m.permco, "company already in index"});
            continue;
        }
        candidates.push_back(m.permno);
    }

    auto caps = company_caps_of(bars, meta, quarter.rank, candidates);
    for (const auto& s : caps.skipped) {
        const SecurityMeta* m = meta.find(s.permno);
        out.log.push_back({s.permno, m ? m->permco : Permco{}, s.reason});
    }
    for (auto& company : caps.companies) {
        const Permno lead = company.largest().permno;
        if (auto why = eligibility_failure(company, meta, params)) {
            out.log.push_back({lead, company.permco, *why});
            continue;
        }
        const TierSet tiers = annual_breakpoints.tiers_for(company.cap);
        if (tiers.empty()) {
            out.log.push_back({lead, company.permco, "cap below annual breakpoints"});
            continue;
        }
        Member m;
        m.permco = company.permco;
        m.tiers = tiers;
        m.cap = company.cap;
        m.quarterly_addition = true;
        for (const auto& c : company.constituents) m.securities.push_back({c.permno, c.cap(), {}});
        out.log.push_back({lead, company.permco, "added " + tiers.to_string()});
        out.additions.push_back(std::move(m));
    }
    return out;
}

namespace {

std::optional<Date> detect_delisting(std::span<const SecurityBar> history,
                                     const TradingCalendar& cal, Date from, Date end) {
    using std::chrono::days;
    auto it = std::upper_bound(history.begin(), history.end(), from,
                               [](Date d, const SecurityBar& b) { return d < b.date; });
    std::optional<Date> prev;
    if (it != history.begin()) {
        prev = (it - 1)->date;
    } else if (it != history.end() && it->date < end) {
        prev = it->date;
        ++it;
    } else {
        return from;
    }
    // Trading days strictly between a and b.
    const auto silent = [&](Date a, Date b) { return cal.trading_days_between(a, b - days{1}); };
    for (; it != history.end() && it->date < end; ++it) {
        if (silent(*prev, it->date) > kDelistGapTradingDays) return prev;
        prev = it->date;
    }
    if (silent(*prev, end) > kDelistGapTradingDays) return prev;
    return std::nullopt;
}

}  // namespace

DelistResult apply_delistings(MembershipSnapshot snapshot, const BarTable& bars,
                              const TradingCalendar& cal, Date from, Date end) {
    DelistResult out;
    for (auto& m : snapshot.members) {
        bool all = !m.securities.empty();
        Date last{};
        Permno last_permno{};
        for (auto& h : m.securities) {
            h.delisted = detect_delisting(bars.history(h.permno), cal, from, end);
            if (!h.delisted) {
                all = false;
            } else if (*h.delisted >= last) {
                last = *h.delisted;
                last_permno = h.permno;
            }
        }
        if (all) {
            m.delisted = last;
            out.log.push_back({m.permco, last_permno, last});
        }
    }
    if (!snapshot.members.empty() && out.log.size() == snapshot.members.size()) {
        out.warnings.push_back(snapshot.label() + ": every member delisted, roster is empty");
    }
    out.snapshot = std::move(snapshot);
    return out;
}

const char* to_string(ChangeAction a) {
    switch (a) {
        case ChangeAction::Add: return "add";
        case ChangeAction::Delete: return "delete";
        case ChangeAction::Delist: return "delist";
        case ChangeAction::QuarterlyAdd: return "quarterly_add";
    }
    return "?";
}

const MembershipSnapshot* MembershipTimeline::annual(int cycle_year) const {
    for (const auto& s : snapshots) {
        if (s.cycle_year == cycle_year && s.origin == EventOrigin::Annual) return &s;
    }
    return nullptr;
}

const MembershipSnapshot* MembershipTimeline::quarterly(int cycle_year, QuarterLabel q) const {
    const EventOrigin want = q == QuarterLabel::Q3   ? EventOrigin::Q3
                             : q == QuarterLabel::Q4 ? EventOrigin::Q4
                                                     : EventOrigin::Q1;
    for (const auto& s : snapshots) {
        if (s.cycle_year == cycle_year && s.origin == want) return &s;
    }
    return nullptr;
}

namespace {

struct Event {
    EventOrigin origin;
    int cycle_year;
    Date rank;
    Date rebalance;
    std::optional<QuarterEvent> quarter;
};

EventOrigin origin_of(QuarterLabel q) {
    switch (q) {
        case QuarterLabel::Q3: return EventOrigin::Q3;
        case QuarterLabel::Q4: return EventOrigin::Q4;
        case QuarterLabel::Q1: return EventOrigin::Q1;
    }
    return EventOrigin::Q3;
}

std::set<Permco> active_t3(const MembershipSnapshot& snap, Date on) {
    std::set<Permco> out;
    for (const auto& m : snap.members) {
        if (m.tiers.has(Tier::T3) && m.active_on(on)) out.insert(m.permco);
    }
    return out;
}

// Latest bar on or before `day` with a price and positive shares.
const SecurityBar* last_valid_bar(const BarTable& bars, Permno p, Date day) {
    auto history = bars.history(p);
    auto it = std::upper_bound(history.begin(), history.end(), day,
                               [](Date d, const SecurityBar& b) { return d < b.date; });
    while (it != history.begin()) {
        --it;
        if (it->prc && it->shrout > 0.0) return &*it;
    }
    return nullptr;
}

MembershipSnapshot build_quarterly(const Event& ev, const MembershipSnapshot& base,
                                   const Breakpoints& bp, const BarTable& bars,
                                   const MetaTable& meta, const IndexParams& params,
                                   MembershipTimeline& timeline) {
    MembershipSnapshot snap;
    snap.breakpoints = bp;
    for (const auto& old : base.members) {
        if (!old.active_on(ev.rank)) continue;
        Member m;
        m.permco = old.permco;
        m.tiers = old.tiers;
        for (const auto& h : old.securities) {
            if (h.delisted && *h.delisted < ev.rank) continue;
            const SecurityBar* bar = last_valid_bar(bars, h.permno, ev.rank);
            if (!bar) continue;
            const double cap = *bar->prc * bar->shares();
            m.securities.push_back({h.permno, cap, {}});
            m.cap += cap;
        }
        if (m.securities.empty()) {
            timeline.log.push_back(base.label() + " -> " + std::string(to_string(ev.origin)) +
                                   ": permco " + std::to_string(id(old.permco)) +
                                   " has no price on or before the rank day, dropped");
            continue;
        }
        snap.members.push_back(std::move(m));
    }

    auto adds = quarterly_ipo_additions(*ev.quarter, base, bp, bars, meta, params);
    const std::string label = std::to_string(ev.cycle_year) + "-" + to_string(ev.origin);
    for (const auto& d : adds.log) {
        timeline.log.push_back(label + ": ipo permno " + std::to_string(id(d.permno)) + " permco " +
                               std::to_string(id(d.permco)) + ": " + d.outcome);
    }
    for (auto& m : adds.additions) {
        timeline.changes.push_back({label, ev.rebalance, m.permco, ChangeAction::QuarterlyAdd});
        snap.members.push_back(std::move(m));
    }
    std::sort(snap.members.begin(), snap.members.end(),
              [](const Member& a, const Member& b) { return a.permco < b.permco; });
    return compute_weights(std::move(snap));
}

}  // namespace

MembershipTimeline membership_timeline(int first_year, int last_year, const BarTable& bars,
                                       const MetaTable& meta, const IndexParams& params,
                                       const TradingCalendar& cal) {
    using std::chrono::days;
    params.validate();
    if (first_year > last_year) throw UsageError("first year after last year");

    std::vector<Event> events;
    for (int y = first_year; y <= last_year; ++y) {
        const auto cycle = resolve_cycle(y, cal);
        events.push_back({EventOrigin::Annual, y, cycle.annual_rank, cycle.annual_rebalance, {}});
        for (const auto& q : cycle.quarters) {
            events.push_back({origin_of(q.label), y, q.rank, q.rebalance, q});
        }
    }

    const Date need_from = events.front().rank;
    const Date need_to = events.back().rebalance;
    const auto have_from = bars.first_date();
    const auto have_to = bars.last_date();
    if (!have_from || *have_from > need_from || *have_to < need_to) {
        std::string msg = "insufficient data coverage: run needs bars from " +
                          format_date(need_from) + " to " + format_date(need_to);
        if (!have_from) {
            msg += ", table is empty";
        } else {
            msg += ", bars span " + format_date(*have_from) + " to " + format_date(*have_to);
            if (*have_from > need_from)
                msg += "; missing " + format_date(need_from) + " to " +
                       format_date(*have_from - days{1});
            if (*have_to < need_to)
                msg += "; missing " + format_date(*have_to + days{1}) + " to " + format_date(need_to);
        }
        throw DataError(msg);
    }

    Date run_end = cal.range().end + days{1};
    try {
        run_end = annual_rebalance_day(last_year + 1, cal);
    } catch (const UsageError&) {
    }
    run_end = std::min(run_end, *have_to + days{1});

    MembershipTimeline timeline;
    Breakpoints annual_bp;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& ev = events[i];
        const std::string label = std::to_string(ev.cycle_year) + "-" + to_string(ev.origin);
        MembershipSnapshot snap;
        if (ev.origin == EventOrigin::Annual) {
            const auto caps = company_caps(bars, meta, ev.rank);
            if (!caps.skipped.empty()) {
                timeline.log.push_back(label + ": " + std::to_string(caps.skipped.size()) +
                                       " securities skipped on rank day " + format_date(ev.rank));
            }
            auto eligible = eligibility_filter(caps.companies, meta, params);
            Ranking ranking;
            try {
                ranking = rank_and_assign(std::move(eligible), params);
            } catch (const DataError& e) {
                throw DataError(label + ": " + e.what());
            }
            snap = compute_weights(snapshot_skeleton(ranking));
            annual_bp = snap.breakpoints;
            if (!timeline.snapshots.empty()) {
                const auto before = active_t3(timeline.snapshots.back(), ev.rank);
                const auto after = active_t3(snap, ev.rank);
                for (Permco c : after) {
                    if (!before.contains(c))
                        timeline.changes.push_back({label, ev.rebalance, c, ChangeAction::Add});
                }
                for (Permco c : before) {
                    if (!after.contains(c))
                        timeline.changes.push_back({label, ev.rebalance, c, ChangeAction::Delete});
                }
            }
        } else {
            snap = build_quarterly(ev, timeline.snapshots.back(), annual_bp, bars, meta, params,
                                   timeline);
        }
        snap.origin = ev.origin;
        snap.cycle_year = ev.cycle_year;
        snap.rank_day = ev.rank;
        snap.effective_start = ev.rebalance;
        snap.effective_end = i + 1 < events.size() ? events[i + 1].rebalance : run_end;

        const Date span_end = snap.effective_end;
        auto delisted = apply_delistings(std::move(snap), bars, cal, ev.rank, span_end);
        for (const auto& d : delisted.log) {
            timeline.changes.push_back({label, d.date, d.permco, ChangeAction::Delist});
        }
        for (auto& w : delisted.warnings) timeline.log.push_back(std::move(w));
        timeline.snapshots.push_back(std::move(delisted.snapshot));
    }
    return timeline;
}

void write_snapshots(const MembershipTimeline& timeline, std::ostream& out) {
    out << "date,permco,permno,tier,weight,cap\n";
    for (const auto& s : timeline.snapshots) {
        const std::string date = format_date(s.effective_start);
        for (const auto& m : s.members) {
            for (Tier t : kAllTiers) {
                if (!m.tiers.has(t)) continue;
                for (const auto& h : m.securities) {
                    out << date << ',' << id(m.permco) << ',' << id(h.permno) << ','
                        << to_string(t) << ',' << csv::format_double(m.security_weight(h, t))
                        << ',' << csv::format_double(h.cap) << '\n';
                }
            }
        }
    }
}

void write_changes(const MembershipTimeline& timeline, std::ostream& out) {
    out << "event,date,permco,action\n";
    for (const auto& c : timeline.changes) {
        out << c.event << ',' << format_date(c.date) << ',' << id(c.permco) << ','
            << to_string(c.action) << '\n';
    }
}

}  // namespace recon
