#pragma once

#include "recon/date.hpp"
#include "recon/market_data.hpp"

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace recon {

// US trading days over a fixed date range. Weekends are never trading days.
class TradingCalendar {
public:
    // Holidays outside the range are dropped. Throws UsageError on an empty range.
    TradingCalendar(DateRange range, const std::set<Date>& holidays);

    const DateRange& range() const { return range_; }
    const std::set<Date>& holidays() const { return holidays_; }
    bool contains(Date d) const { return range_.contains(d); }

    bool is_trading_day(Date d) const;

    // Nearest trading day at or before / at or after d. Throws UsageError if the
    // search leaves the calendar range.
    Date previous_or_same(Date d) const;
    Date next_or_same(Date d) const;

    // Trading days within [from, to], ascending.
    std::span<const Date> trading_days(Date from, Date to) const;
    // Number of trading days t with a < t <= b (0 when b <= a).
    int trading_days_between(Date a, Date b) const;

private:
    DateRange range_;
    std::set<Date> holidays_;
    std::vector<Date> days_;
};

// New Year, MLK (from 1998), Presidents, Good Friday, Memorial, Independence,
// Labor, Thanksgiving and Christmas, with weekend observance shifts.
std::set<Date> default_us_holidays(int first_year, int last_year);

// One ISO date per line; '#' starts a comment. Throws DataError on bad lines.
std::set<Date> parse_holiday_lines(std::span<const std::string> lines);

// Uses the holiday file when given, otherwise the built-in US list.
TradingCalendar build_trading_calendar(const std::optional<std::string>& holiday_file,
                                       DateRange range);

inline constexpr int kFirstQuarterlyCycle = 2004;

enum class QuarterLabel { Q3, Q4, Q1 };
const char* to_string(QuarterLabel q);

struct QuarterEvent {
    QuarterLabel label{};
    Date rank{};
    Date rebalance{};
};

struct RebalanceCalendar {
    int cycle_year = 0;
    Date annual_rank{};
    Date annual_rebalance{};
    std::vector<QuarterEvent> quarters;  // Q3, Q4, Q1; empty before 2004
};

// May 31, moved back to the preceding trading day if needed.
Date annual_rank_day(int year, const TradingCalendar& cal);
// Last Friday of June, moved forward to the following trading day if needed.
Date annual_rebalance_day(int year, const TradingCalendar& cal);
// Third Fridays of September and December of cycle_year and March of
// cycle_year + 1; each rank day is 35 calendar days earlier. Rank days shift
// backward and rebalance days forward onto trading days.
std::array<QuarterEvent, 3> quarterly_schedule(int cycle_year, const TradingCalendar& cal);
RebalanceCalendar resolve_cycle(int cycle_year, const TradingCalendar& cal);

}  // namespace recon
