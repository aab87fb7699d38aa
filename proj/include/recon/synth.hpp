#pragma once

#include "recon/date.hpp"
#include "recon/market_data.hpp"
#include "recon/trading_calendar.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace recon::synth {

struct UniverseConfig {
    std::size_t n_companies = 300;
    double multi_class_fraction = 0.1;
    int first_year = 2005;  // first cycle year
    int last_year = 2009;   // last cycle year
    double ipo_rate = 0.3;    // per quarter, as IPO count / (n_companies / 10)
    double delist_rate = 0.05;
    double drift = 0.05;      // annual log drift
    double volatility = 0.3;  // annual
    double split_rate = 0.05;         // per security per year
    double halt_rate = 0.02;          // short trading halts per security per year
    double missing_price_rate = 0.0005;
    double midpoint_rate = 0.002;
    double non_common_fraction = 0.05;
    double foreign_fraction = 0.05;
    double penny_fraction = 0.03;
    std::uint64_t seed = 1;

    // Throws UsageError when a rate is outside [0, 1] or the sizes are invalid.
    void validate() const;
};

// Bars run from January 1 of the first cycle year through June 30 after the last one.
DateRange universe_range(const UniverseConfig& config);

struct ScriptedIpo {
    Permno permno{};
    Permco permco{};
    Date first_bar{};
    bool new_company = true;
    // Quarterly event whose candidate window contains first_bar, e.g. "2006-Q4".
    std::optional<std::string> window;
};

struct ScriptedDelisting {
    Permno permno{};
    Permco permco{};
    Date last_bar{};
};

struct ScriptedSplit {
    Permno permno{};
    Date date{};
    double ratio = 2.0;
};

struct ScriptedHalt {
    Permno permno{};
    Date first{};  // first missing trading day
    int days = 0;
};

struct EventScript {
    std::uint64_t seed = 0;      // seed of the accepted attempt
    int attempts = 1;
    std::vector<ScriptedIpo> ipos;
    std::vector<ScriptedDelisting> delistings;
    std::vector<ScriptedSplit> splits;
    std::vector<ScriptedHalt> halts;

    std::string to_json() const;
};

struct Universe {
    BarTable bars;
    MetaTable meta;
    EventScript script;
};

// Deterministic per config. Regenerates with a derived seed until at least
// one company is eligible on every annual rank day.
Universe generate_universe(const UniverseConfig& config, const TradingCalendar& cal);

}  // namespace recon::synth
