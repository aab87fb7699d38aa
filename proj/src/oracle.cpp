#include "recon/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace recon::oracle {

namespace {

using namespace std::chrono;

constexpr std::uint8_t kT1 = 1, kT2 = 2, kT3 = 4, kTE = 8;

Date shift_months(Date d, int n) {
    const year_month_day ymd{d};
    const year_month ym = year_month{ymd.year(), ymd.month()} + months{n};
    const unsigned last = static_cast<unsigned>(year_month_day_last{ym.year(), month_day_last{ym.month()}}.day());
    const unsigned day = std::min(static_cast<unsigned>(ymd.day()), last);
    return sys_days{ym.year() / ym.month() / std::chrono::day{day}};
}

Date on_or_before(std::span<const Date> days, Date d) {
    auto it = std::upper_bound(days.begin(), days.end(), d);
    if (it == days.begin()) throw std::out_of_range("no trading day");
    return *(it - 1);
}

Date on_or_after(std::span<const Date> days, Date d) {
    auto it = std::lower_bound(days.begin(), days.end(), d);
    if (it == days.end()) throw std::out_of_range("no trading day");
    return *it;
}

Date third_friday(int y, unsigned m) {
    for (unsigned d = 15; d <= 21; ++d) {
        const Date x = sys_days{year{y} / month{m} / day{d}};
        if (weekday{x} == Friday) return x;
    }
    return {};
}

Date last_friday_of_june(int y) {
    for (unsigned d = 30; d >= 24; --d) {
        const Date x = sys_days{year{y} / June / day{d}};
        if (weekday{x} == Friday) return x;
    }
    return {};
}

// Trading days t with a < t <= b.
int count_between(std::span<const Date> days, Date a, Date b) {
    int n = 0;
    for (Date t : days) n += (t > a && t <= b);
    return n;
}

struct Event {
    std::string label;
    bool annual = true;
    int year = 0;
    Date rank{};
    Date rebalance{};
};

bool common(const SecurityMeta* m) { return m && (m->hshrcd == 10 || m->hshrcd == 11); }

struct Inputs {
    const BarTable& bars;
    const IndexParams& params;
    std::span<const Date> days;
    std::map<Permno, const SecurityMeta*> meta;
    std::map<Permno, std::vector<const SecurityBar*>> by_security;
    std::map<Permno, std::vector<Date>> bar_dates;

    Inputs(const BarTable& b, const MetaTable& m, const IndexParams& p, std::span<const Date> d)
        : bars(b), params(p), days(d) {
        for (const auto& row : m.rows()) meta[row.permno] = &row;
        for (const auto& row : b.rows()) by_security[row.permno].push_back(&row);
        for (auto& [p, v] : by_security) {
            std::sort(v.begin(), v.end(),
                      [](const SecurityBar* x, const SecurityBar* y) { return x->date < y->date; });
            for (const SecurityBar* r : v) bar_dates[p].push_back(r->date);
        }
    }

    const SecurityMeta* find(Permno p) const {
        auto it = meta.find(p);
        return it == meta.end() ? nullptr : it->second;
    }
};

struct Piece {
    Permno permno{};
    double cap = 0.0;
    double adjusted = 0.0;
};

struct Candidate {
    Permco permco{};
    double cap = 0.0;
    std::vector<Piece> pieces;
};

bool eligible(const Candidate& c, const Inputs& in) {
    const Piece* lead = nullptr;
    for (const auto& p : c.pieces) {
        if (!lead || p.cap > lead->cap || (p.cap == lead->cap && p.permno < lead->permno)) lead = &p;
    }
    const SecurityMeta* m = in.find(lead->permno);
    return m && m->us_domiciled && lead->adjusted > in.params.min_price &&
           c.cap >= in.params.min_cap;
}

std::vector<Candidate> group(const std::vector<const SecurityBar*>& rows, const Inputs& in) {
    std::map<Permco, std::vector<Piece>> by_company;
    for (const SecurityBar* r : rows) {
        if (!common(in.find(r->permno)) || !r->prc || !(r->shrout > 0.0)) continue;
        by_company[r->permco].push_back({r->permno, *r->prc * r->shrout * 1000.0, *r->prc / r->cfacpr});
    }
    std::vector<Candidate> out;
    for (auto& [permco, pieces] : by_company) {
        std::sort(pieces.begin(), pieces.end(),
                  [](const Piece& a, const Piece& b) { return a.permno < b.permno; });
        Candidate c{permco, 0.0, pieces};
        for (const auto& p : pieces) c.cap += p.cap;
        if (eligible(c, in)) out.push_back(std::move(c));
    }
    return out;
}

OracleMember member_of(const Candidate& c, std::uint8_t tiers) {
    OracleMember m;
    m.permco = c.permco;
    m.tiers = tiers;
    m.cap = c.cap;
    for (const auto& p : c.pieces) m.securities.push_back({p.permno, p.cap, {}});
    return m;
}

void reweight(std::map<Permco, OracleMember>& members) {
    for (int t = 0; t < 4; ++t) {
        double total = 0.0;
        for (const auto& [c, m] : members) {
            if (m.tiers & (1u << t)) total += m.cap;
        }
        for (auto& [c, m] : members) m.weight[t] = (m.tiers & (1u << t)) ? m.cap / total : 0.0;
    }
}

struct AnnualFloors {
    double t1 = 0.0;
    double t3 = 0.0;
    bool has_t2 = false;
    double te = 0.0;
};

std::map<Permco, OracleMember> annual(const Inputs& in, Date rank, AnnualFloors* floors) {
    std::vector<const SecurityBar*> rows;
    for (const auto& r : in.bars.rows()) {
        if (r.date == rank) rows.push_back(&r);
    }
    auto list = group(rows, in);
    std::sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) {
        if (a.cap > b.cap) return true;
        if (a.cap < b.cap) return false;
        return a.permco < b.permco;
    });
    std::map<Permco, OracleMember> out;
    if (list.empty()) return out;
    const std::size_t n = list.size();
    const auto& p = in.params;
    for (std::size_t r = 0; r < n && r < p.n_tierE; ++r) {
        std::uint8_t tiers = kTE;
        if (r < p.n_tier1) tiers |= kT1 | kT3;
        else if (r < p.n_tier3) tiers |= kT2 | kT3;
        out[list[r].permco] = member_of(list[r], tiers);
    }
    if (floors) {
        floors->t1 = list[std::min(n, p.n_tier1) - 1].cap;
        floors->t3 = list[std::min(n, p.n_tier3) - 1].cap;
        floors->has_t2 = n > p.n_tier1;
        floors->te = list[std::min(n, p.n_tierE) - 1].cap;
    }
    reweight(out);
    return out;
}

std::map<Permco, OracleMember> quarterly(const Inputs& in, const OracleSnapshot& prev, Date rank,
                                         const AnnualFloors& floors) {
    std::map<Permco, OracleMember> out;
    for (const auto& [permco, old] : prev.members) {
        if (old.delisted && *old.delisted < rank) continue;
        OracleMember m;
        m.permco = permco;
        m.tiers = old.tiers;
        for (const auto& s : old.securities) {
            if (s.delisted && *s.delisted < rank) continue;
            const SecurityBar* best = nullptr;
            auto it = in.by_security.find(s.permno);
            if (it == in.by_security.end()) continue;
            for (const SecurityBar* r : it->second) {
                if (r->date <= rank && r->prc && r->shrout > 0.0) best = r;
            }
            if (!best) continue;
            const double cap = *best->prc * best->shrout * 1000.0;
            m.securities.push_back({s.permno, cap, {}});
            m.cap += cap;
        }
        if (!m.securities.empty()) out[permco] = std::move(m);
    }

    const Date after = shift_months(rank, -3);
    std::vector<const SecurityBar*> rows;
    for (const auto& [permno, meta] : in.meta) {
        if (!(meta->begdat > after && meta->begdat <= rank) || !common(meta)) continue;
        auto existing = prev.members.find(meta->permco);
        if (existing != prev.members.end() &&
            (!existing->second.delisted || *existing->second.delisted >= rank))
            continue;
        auto it = in.by_security.find(permno);
        if (it == in.by_security.end()) continue;
        for (const SecurityBar* r : it->second) {
            if (r->date == rank) rows.push_back(r);
        }
    }
    for (const auto& c : group(rows, in)) {
        std::uint8_t tiers = 0;
        if (c.cap >= floors.t1) tiers = kT1 | kT3 | kTE;
        else if (floors.has_t2 && c.cap >= floors.t3) tiers = kT2 | kT3 | kTE;
        else if (c.cap >= floors.te) tiers = kTE;
        if (!tiers) continue;
        OracleMember m = member_of(c, tiers);
        m.quarterly_addition = true;
        out[c.permco] = std::move(m);
    }
    reweight(out);
    return out;
}

// Walks trading days after the last bar on or before `from`; more than five
// silent days in a row before `end` means the security stopped at its last bar.
std::optional<Date> stopped_at(const Inputs& in, Permno permno, Date from, Date end) {
    static const std::vector<Date> none;
    auto found = in.bar_dates.find(permno);
    const std::vector<Date>& dates = found == in.bar_dates.end() ? none : found->second;
    std::optional<Date> last;
    for (Date d : dates) {
        if (d <= from) last = d;
    }
    if (!last) {
        for (Date d : dates) {
            if (d > from && d < end) {
                last = d;
                break;
            }
        }
    }
    if (!last) return from;
    int silent = 0;
    for (auto t = std::upper_bound(in.days.begin(), in.days.end(), *last);
         t != in.days.end() && *t < end; ++t) {
        if (std::binary_search(dates.begin(), dates.end(), *t)) {
            last = *t;
            silent = 0;
        } else if (++silent > 5) {
            return last;
        }
    }
    return std::nullopt;
}

}  // namespace

std::map<Permco, OracleMember> oracle_membership(const BarTable& bars, const MetaTable& meta,
                                                 Date rank_day, const IndexParams& params) {
    const Inputs in(bars, meta, params, {});
    return annual(in, rank_day, nullptr);
}

OracleTimeline oracle_timeline(int first_year, int last_year, const BarTable& bars,
                               const MetaTable& meta, const IndexParams& params,
                               std::span<const Date> trading_days) {
    const Inputs in(bars, meta, params, trading_days);
    const auto days = trading_days;

    std::vector<Event> events;
    for (int y = first_year; y <= last_year; ++y) {
        const std::string ys = std::to_string(y);
        events.push_back({ys + "-annual", true, y, on_or_before(days, sys_days{year{y} / May / 31}),
                          on_or_after(days, last_friday_of_june(y))});
        if (y < 2004) continue;
        const std::pair<const char*, Date> quarters[] = {{"Q3", third_friday(y, 9)},
                                                         {"Q4", third_friday(y, 12)},
                                                         {"Q1", third_friday(y + 1, 3)}};
        for (const auto& [name, friday] : quarters) {
            events.push_back({ys + "-" + name, false, y, on_or_before(days, friday - std::chrono::days{35}),
                              on_or_after(days, friday)});
        }
    }

    Date last_bar{};
    for (const auto& r : bars.rows()) last_bar = std::max(last_bar, r.date);
    Date final_end = days.back() + std::chrono::days{1};
    try {
        final_end = on_or_after(days, last_friday_of_june(last_year + 1));
    } catch (const std::out_of_range&) {
    }
    final_end = std::min(final_end, last_bar + std::chrono::days{1});

    OracleTimeline out;
    AnnualFloors floors;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Event& ev = events[i];
        OracleSnapshot snap;
        snap.label = ev.label;
        snap.rank_day = ev.rank;
        snap.effective_start = ev.rebalance;
        snap.effective_end = i + 1 < events.size() ? events[i + 1].rebalance : final_end;
        if (ev.annual) {
            snap.members = annual(in, ev.rank, &floors);
            if (!out.snapshots.empty()) {
                const auto& prev = out.snapshots.back().members;
                for (const auto& [c, m] : snap.members) {
                    if (!(m.tiers & kT3)) continue;
                    auto it = prev.find(c);
                    const bool was = it != prev.end() && (it->second.tiers & kT3) &&
                                     (!it->second.delisted || *it->second.delisted >= ev.rank);
                    if (!was) out.changes.push_back({ev.label, ev.rebalance, c, "add"});
                }
                for (const auto& [c, m] : prev) {
                    if (!(m.tiers & kT3) || (m.delisted && *m.delisted < ev.rank)) continue;
                    auto it = snap.members.find(c);
                    if (it == snap.members.end() || !(it->second.tiers & kT3))
                        out.changes.push_back({ev.label, ev.rebalance, c, "delete"});
                }
            }
        } else {
            snap.members = quarterly(in, out.snapshots.back(), ev.rank, floors);
            for (const auto& [c, m] : snap.members) {
                if (m.quarterly_addition)
                    out.changes.push_back({ev.label, ev.rebalance, c, "quarterly_add"});
            }
        }
        for (auto& [c, m] : snap.members) {
            bool all = true;
            Date latest{};
            for (auto& s : m.securities) {
                s.delisted = stopped_at(in, s.permno, ev.rank, snap.effective_end);
                if (s.delisted) latest = std::max(latest, *s.delisted);
                else all = false;
            }
            if (all && !m.securities.empty()) {
                m.delisted = latest;
                out.changes.push_back({ev.label, latest, c, "delist"});
            }
        }
        out.snapshots.push_back(std::move(snap));
    }
    return out;
}

namespace {

OracleImpact summarize(const Inputs& in, const std::vector<Permno>& permnos, Date anchor) {
    std::vector<double> temp, perm;
    for (Permno p : permnos) {
        double price[3] = {0.0, 0.0, 0.0};
        bool ok = true;
        const Date targets[3] = {anchor, shift_months(anchor, 1), shift_months(anchor, 2)};
        for (int k = 0; k < 3 && ok; ++k) {
            const SecurityBar* best = nullptr;
            if (auto it = in.by_security.find(p); it != in.by_security.end()) {
                for (const SecurityBar* r : it->second) {
                    if (r->date <= targets[k] && r->prc) best = r;
                }
            }
            ok = best && count_between(in.days, best->date, targets[k]) <= 5;
            if (ok) price[k] = *best->prc / best->cfacpr;
        }
        if (!ok) continue;
        temp.push_back(std::log(price[1]) - std::log(price[2]));
        perm.push_back(std::log(price[2]) - std::log(price[0]));
    }
    OracleImpact out;
    out.n = temp.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto describe = [&](const std::vector<double>& x, double& mean, double& se) {
        mean = nan;
        se = nan;
        if (x.empty()) return;
        double sum = 0.0;
        for (double v : x) sum += v;
        const double mu = sum / static_cast<double>(x.size());
        mean = 100.0 * mu;
        if (x.size() < 2) return;
        double ss = 0.0;
        for (double v : x) ss += (v - mu) * (v - mu);
        se = 100.0 * std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    };
    describe(temp, out.mean_temp, out.se_temp);
    describe(perm, out.mean_perm, out.se_perm);
    return out;
}

}  // namespace

OracleImpactMeans oracle_impact_means(const OracleTimeline& timeline, const BarTable& bars,
                                      std::span<const Date> trading_days, int year) {
    const MetaTable no_meta;
    const IndexParams params;
    const Inputs in(bars, no_meta, params, trading_days);
    OracleImpactMeans out;
    out.year = year;
    const std::string label = std::to_string(year) + "-annual";
    std::size_t idx = timeline.snapshots.size();
    for (std::size_t i = 0; i < timeline.snapshots.size(); ++i) {
        if (timeline.snapshots[i].label == label) idx = i;
    }
    if (idx == timeline.snapshots.size()) {
        out.additions = summarize(in, {}, Date{});
        out.deletions = out.additions;
        return out;
    }
    const OracleSnapshot& snap = timeline.snapshots[idx];

    std::set<Permco> quarterly_added;
    const std::string prev_cycle = std::to_string(year - 1) + "-";
    for (const auto& c : timeline.changes) {
        if (c.action == "quarterly_add" && c.event.rfind(prev_cycle, 0) == 0) quarterly_added.insert(c.permco);
    }
    std::set<Permco> adds, dels;
    for (const auto& c : timeline.changes) {
        if (c.event != label) continue;
        if (c.action == "add" && !quarterly_added.contains(c.permco)) adds.insert(c.permco);
        if (c.action == "delete") dels.insert(c.permco);
    }
    const auto securities = [&](const OracleSnapshot& s, const std::set<Permco>& companies) {
        std::vector<Permno> v;
        for (Permco c : companies) {
            auto it = s.members.find(c);
            if (it == s.members.end()) continue;
            for (const auto& sec : it->second.securities) {
                if (!(sec.delisted && *sec.delisted < snap.rank_day)) v.push_back(sec.permno);
            }
        }
        std::sort(v.begin(), v.end());
        return v;
    };
    out.additions = summarize(in, securities(snap, adds), snap.rank_day);
    if (idx > 0) out.deletions = summarize(in, securities(timeline.snapshots[idx - 1], dels), snap.rank_day);
    else out.deletions = summarize(in, {}, snap.rank_day);
    return out;
}

}  // namespace recon::oracle
