#pragma once

// Brute-force reference implementations used by the equivalence tests. They
// read raw rows only and recompute every rule from scratch.

#include "recon/date.hpp"
#include "recon/market_data.hpp"
#include "recon/reconstitution.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recon::oracle {

// Tier bits: 1 = T1, 2 = T2, 4 = T3, 8 = TE.
struct OracleSecurity {
    Permno permno{};
    double cap = 0.0;
    std::optional<Date> delisted;
};

struct OracleMember {
    Permco permco{};
    std::uint8_t tiers = 0;
    double cap = 0.0;
    std::array<double, 4> weight{};
    bool quarterly_addition = false;
    std::optional<Date> delisted;
    std::vector<OracleSecurity> securities;
};

struct OracleSnapshot {
    std::string label;
    Date rank_day{};
    Date effective_start{};
    Date effective_end{};
    std::map<Permco, OracleMember> members;
};

struct OracleChange {
    std::string event;
    Date date{};
    Permco permco{};
    std::string action;

    friend auto operator<=>(const OracleChange&, const OracleChange&) = default;
};

struct OracleTimeline {
    std::vector<OracleSnapshot> snapshots;
    std::vector<OracleChange> changes;
};

// Annual tier assignment and weights on one rank day. Empty when nothing is eligible.
std::map<Permco, OracleMember> oracle_membership(const BarTable& bars, const MetaTable& meta,
                                                 Date rank_day, const IndexParams& params);

// Full event sequence with quarterly additions and delistings.
OracleTimeline oracle_timeline(int first_year, int last_year, const BarTable& bars,
                               const MetaTable& meta, const IndexParams& params,
                               std::span<const Date> trading_days);

struct OracleImpact {
    double mean_temp = 0.0;
    double se_temp = 0.0;
    double mean_perm = 0.0;
    double se_perm = 0.0;
    std::size_t n = 0;
};

struct OracleImpactMeans {
    int year = 0;
    OracleImpact additions;
    OracleImpact deletions;
};

// Means and standard errors in percent of the annual addition and deletion groups.
OracleImpactMeans oracle_impact_means(const OracleTimeline& timeline, const BarTable& bars,
                                      std::span<const Date> trading_days, int year);

}  // namespace recon::oracle
