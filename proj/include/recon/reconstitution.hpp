#pragma once

#include "recon/date.hpp"
#include "recon/market_data.hpp"
#include "recon/trading_calendar.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recon {

// T1, T2, T3 and TE are the 1000, 2000, 3000 and 3000E analogues.
enum class Tier : std::uint8_t { T1 = 0, T2 = 1, T3 = 2, TE = 3 };
inline constexpr std::array<Tier, 4> kAllTiers{Tier::T1, Tier::T2, Tier::T3, Tier::TE};

const char* to_string(Tier t);
std::optional<Tier> parse_tier(std::string_view s);
constexpr std::size_t index_of(Tier t) { return static_cast<std::size_t>(t); }

class TierSet {
public:
    constexpr TierSet() = default;
    constexpr TierSet(std::initializer_list<Tier> tiers) {
        for (Tier t : tiers) add(t);
    }
    constexpr void add(Tier t) { bits_ |= static_cast<std::uint8_t>(1u << index_of(t)); }
    constexpr bool has(Tier t) const { return (bits_ >> index_of(t)) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    std::string to_string() const;  // e.g. "T1|T3|TE"

    friend constexpr bool operator==(TierSet, TierSet) = default;

private:
    std::uint8_t bits_ = 0;
};

struct IndexParams {
    std::size_t n_tier1 = 1000;
    std::size_t n_tier3 = 3000;
    std::size_t n_tierE = 4000;
    double min_cap = 30'000'000.0;
    double min_price = 1.0;

    // Throws UsageError unless n_tier1 < n_tier3 <= n_tierE and both floors are positive.
    void validate() const;
};

// A security contributing to its company's capitalization on one day.
struct Constituent {
    Permno permno{};
    double price = 0.0;  // |prc|, unadjusted
    double shares = 0.0; // raw units
    double adjusted_price = 0.0;

    double cap() const { return price * shares; }
};

struct CompanyCap {
    Permco permco{};
    double cap = 0.0;
    std::vector<Constituent> constituents;  // ascending permno

    // Largest-cap constituent; lower permno wins ties.
    const Constituent& largest() const;
};

struct CapSkip {
    Permno permno{};
    std::string reason;
};

struct CapsResult {
    std::vector<CompanyCap> companies;  // ascending permco
    std::vector<CapSkip> skipped;
};

// Sums price x shares per permco over common-stock securities with a bar on
// `day`. Securities with a missing price, zero shares or no meta are skipped.
CapsResult company_caps(const BarTable& bars, const MetaTable& meta, Date day);
// Same, restricted to the given securities.
CapsResult company_caps_of(const BarTable& bars, const MetaTable& meta, Date day,
                           std::span<const Permno> permnos);

// Keeps companies whose largest constituent has adjusted price > min_price,
// whose cap >= min_cap and whose largest constituent is US-domiciled.
std::vector<CompanyCap> eligibility_filter(std::span<const CompanyCap> caps, const MetaTable& meta,
                                           const IndexParams& params);

// Caps of the lowest-ranked company in each tier on the annual rank day; T2's
// ceiling is its highest-ranked company. Zero for an empty tier.
struct Breakpoints {
    double tier1_floor = 0.0;
    double tier3_floor = 0.0;
    double tier2_ceiling = 0.0;
    double tier2_floor = 0.0;
    double tierE_floor = 0.0;

    // Tiers a new company of the given cap joins: T1 from tier1_floor up,
    // otherwise T2 from tier2_floor up; T3 likewise; TE from tierE_floor up.
    TierSet tiers_for(double cap) const;
};

struct RankedCompany {
    CompanyCap company;
    std::size_t rank = 0;  // 1-based
    TierSet tiers;
};

struct Ranking {
    std::vector<RankedCompany> companies;  // rank order
    Breakpoints breakpoints;
};

// Sorts by descending cap (ascending permco breaks ties) and assigns tiers.
// Throws DataError on an empty eligible set.
Ranking rank_and_assign(std::vector<CompanyCap> eligible, const IndexParams& params);

struct SecurityHolding {
    Permno permno{};
    double cap = 0.0;
    std::optional<Date> delisted;  // last bar date when the security stopped trading
};

struct Member {
    Permco permco{};
    TierSet tiers;
    double cap = 0.0;
    std::vector<SecurityHolding> securities;  // ascending permno
    std::array<double, 4> weight{};           // per tier, 0 when not a member
    bool quarterly_addition = false;          // joined at this snapshot's quarterly event
    std::optional<Date> delisted;             // set once every security has delisted

    bool active_on(Date d) const { return !delisted || *delisted >= d; }
    double security_weight(const SecurityHolding& h, Tier t) const {
        return weight[index_of(t)] * h.cap / cap;
    }
};

enum class EventOrigin { Annual, Q3, Q4, Q1 };
const char* to_string(EventOrigin o);

struct MembershipSnapshot {
    EventOrigin origin = EventOrigin::Annual;
    int cycle_year = 0;
    Date rank_day{};
    Date effective_start{};  // inclusive
    Date effective_end{};    // exclusive
    std::vector<Member> members;  // ascending permco
    Breakpoints breakpoints;      // from the latest annual ranking

    std::string label() const;  // e.g. "2019-annual", "2019-Q3"
    const Member* find(Permco c) const;
    std::size_t tier_size(Tier t) const;
    // Members not delisted before d.
    std::size_t roster_size(Date d) const;
};

// Members of every tier of the ranking with weights left at zero.
MembershipSnapshot snapshot_skeleton(const Ranking& ranking);

// Weight of each member in tier T is cap / (sum of caps in T).
MembershipSnapshot compute_weights(MembershipSnapshot skeleton);

struct IpoDecision {
    Permno permno{};
    Permco permco{};
    std::string outcome;
};

struct QuarterlyAdditions {
    std::vector<Member> additions;
    std::vector<IpoDecision> log;
};

// Candidates are common-stock securities whose first trading date lies in
// (rank - 3 months, rank] and whose company is not in `current`. Each
// candidate company must pass eligibility on the quarterly rank day and is
// slotted into tiers by the annual breakpoints.
QuarterlyAdditions quarterly_ipo_additions(const QuarterEvent& quarter,
                                           const MembershipSnapshot& current,
                                           const Breakpoints& annual_breakpoints,
                                           const BarTable& bars, const MetaTable& meta,
                                           const IndexParams& params);

struct DelistEvent {
    Permco permco{};
    Permno permno{};
    Date date{};  // last bar date
};

struct DelistResult {
    MembershipSnapshot snapshot;
    std::vector<DelistEvent> log;  // one entry per delisted company
    std::vector<std::string> warnings;
};

inline constexpr int kDelistGapTradingDays = 5;

// A security is delisted at its last bar once more than five consecutive
// trading days pass without a bar, scanning bars in [from, end). Delisted
// members stay in the snapshot with their delisting date and are never replaced.
DelistResult apply_delistings(MembershipSnapshot snapshot, const BarTable& bars,
                              const TradingCalendar& cal, Date from, Date end);

enum class ChangeAction { Add, Delete, Delist, QuarterlyAdd };
const char* to_string(ChangeAction a);

struct ChangeRecord {
    std::string event;
    Date date{};
    Permco permco{};
    ChangeAction action{};
};

struct MembershipTimeline {
    std::vector<MembershipSnapshot> snapshots;  // contiguous, ascending
    std::vector<ChangeRecord> changes;
    std::vector<std::string> log;

    const MembershipSnapshot* annual(int cycle_year) const;
    const MembershipSnapshot* quarterly(int cycle_year, QuarterLabel q) const;
};

// One annual snapshot per cycle plus Q3/Q4/Q1 snapshots from 2004 on. Add
// and delete records compare T3 membership with the previous roster (none for
// the first cycle). Throws DataError when the bars do not span every rank day.
MembershipTimeline membership_timeline(int first_year, int last_year, const BarTable& bars,
                                       const MetaTable& meta, const IndexParams& params,
                                       const TradingCalendar& cal);

// CSV `date,permco,permno,tier,weight,cap`, one row per security and tier.
void write_snapshots(const MembershipTimeline& timeline, std::ostream& out);
// CSV `event,date,permco,action`.
void write_changes(const MembershipTimeline& timeline, std::ostream& out);

}  // namespace recon
