#include "recon/trading_calendar.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"

#include <algorithm>

namespace recon {

using namespace std::chrono;

TradingCalendar::TradingCalendar(DateRange range, const std::set<Date>& holidays)
    : range_(range) {
    if (range.end < range.start) throw UsageError("trading calendar range is empty");
    for (Date h : holidays) {
        if (range.contains(h)) holidays_.insert(h);
    }
    for (Date d = range.start; d <= range.end; d += days{1}) {
        if (!is_weekend(d) && !holidays_.contains(d)) days_.push_back(d);
    }
}

bool TradingCalendar::is_trading_day(Date d) const {
    return std::binary_search(days_.begin(), days_.end(), d);
}

Date TradingCalendar::previous_or_same(Date d) const {
    auto it = std::upper_bound(days_.begin(), days_.end(), d);
    if (!contains(d) || it == days_.begin()) {
        throw UsageError("no trading day on or before " + format_date(d) + " in calendar range");
    }
    return *(it - 1);
}

Date TradingCalendar::next_or_same(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (!contains(d) || it == days_.end()) {
        throw UsageError("no trading day on or after " + format_date(d) + " in calendar range");
    }
    return *it;
}

std::span<const Date> TradingCalendar::trading_days(Date from, Date to) const {
    auto lo = std::lower_bound(days_.begin(), days_.end(), from);
    auto hi = std::upper_bound(lo, days_.end(), to);
    return std::span<const Date>(days_).subspan(static_cast<std::size_t>(lo - days_.begin()),
                                                static_cast<std::size_t>(hi - lo));
}

int TradingCalendar::trading_days_between(Date a, Date b) const {
    if (b <= a) return 0;
    return static_cast<int>(trading_days(a + days{1}, b).size());
}

namespace {

Date easter_sunday(int y) {
    // Anonymous Gregorian algorithm.
    const int a = y % 19, b = y / 100, c = y % 100, d = b / 4, e = b % 4;
    const int f = (b + 8) / 25, g = (b - f + 1) / 3;
    const int h = (19 * a + b - d - g + 15) % 30;
    const int i = c / 4, k = c % 4;
    const int l = (32 + 2 * e + 2 * i - h - k) % 7;
    const int m = (a + 11 * h + 22 * l) / 451;
    const int month = (h + l - 7 * m + 114) / 31;
    const int day = (h + l - 7 * m + 114) % 31 + 1;
    return make_date(y, static_cast<unsigned>(month), static_cast<unsigned>(day));
}

Date nth_weekday(int y, unsigned m, weekday wd, unsigned n) {
    return sys_days{year{y} / month{m} / wd[n]};
}

Date last_weekday(int y, unsigned m, weekday wd) {
    return sys_days{year{y} / month{m} / wd[last]};
}

// Saturday holidays move to Friday, Sunday holidays to Monday.
Date observed(Date d) {
    const weekday wd{d};
    if (wd == Saturday) return d - days{1};
    if (wd == Sunday) return d + days{1};
    return d;
}

}  // namespace

std::set<Date> default_us_holidays(int first_year, int last_year) {
    std::set<Date> out;
    for (int y = first_year; y <= last_year; ++y) {
        // A Saturday New Year is not observed on the preceding Friday.
        const Date ny = make_date(y, 1, 1);
        if (weekday{ny} != Saturday) out.insert(observed(ny));
        if (y >= 1998) out.insert(nth_weekday(y, 1, Monday, 3));
        out.insert(nth_weekday(y, 2, Monday, 3));
        out.insert(easter_sunday(y) - days{2});
        out.insert(last_weekday(y, 5, Monday));
        out.insert(observed(make_date(y, 7, 4)));
        out.insert(nth_weekday(y, 9, Monday, 1));
        out.insert(nth_weekday(y, 11, Thursday, 4));
        out.insert(observed(make_date(y, 12, 25)));
    }
    return out;
}

std::set<Date> parse_holiday_lines(std::span<const std::string> lines) {
    std::set<Date> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        line = line.substr(first, line.find_last_not_of(" \t") - first + 1);
        try {
            out.insert(parse_date(line));
        } catch (const DataError& e) {
            throw DataError("holiday file line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

TradingCalendar build_trading_calendar(const std::optional<std::string>& holiday_file,
                                       DateRange range) {
    if (range.end < range.start) throw UsageError("trading calendar range is empty");
    if (holiday_file) {
        const auto lines = csv::read_lines(*holiday_file);
        return TradingCalendar(range, parse_holiday_lines(lines));
    }
    return TradingCalendar(range, default_us_holidays(year_of(range.start), year_of(range.end)));
}

const char* to_string(QuarterLabel q) {
    switch (q) {
        case QuarterLabel::Q3: return "Q3";
        case QuarterLabel::Q4: return "Q4";
        case QuarterLabel::Q1: return "Q1";
    }
    return "?";
}

namespace {

void require_in_range(Date d, const TradingCalendar& cal, int year) {
    if (!cal.contains(d)) {
        throw UsageError("year " + std::to_string(year) + " is outside the trading calendar range " +
                         format_date(cal.range().start) + ".." + format_date(cal.range().end));
    }
}

QuarterEvent quarter_event(QuarterLabel label, int y, unsigned m, const TradingCalendar& cal) {
    const Date third_friday = nth_weekday(y, m, Friday, 3);
    const Date rank = third_friday - days{35};
    require_in_range(rank, cal, y);
    require_in_range(third_friday, cal, y);
    return {label, cal.previous_or_same(rank), cal.next_or_same(third_friday)};
}

}  // namespace

Date annual_rank_day(int year, const TradingCalendar& cal) {
    const Date may31 = make_date(year, 5, 31);
    require_in_range(may31, cal, year);
    return cal.previous_or_same(may31);
}

Date annual_rebalance_day(int year, const TradingCalendar& cal) {
    const Date last_friday = last_weekday(year, 6, Friday);
    require_in_range(last_friday, cal, year);
    return cal.next_or_same(last_friday);
}

std::array<QuarterEvent, 3> quarterly_schedule(int cycle_year, const TradingCalendar& cal) {
    if (cycle_year < kFirstQuarterlyCycle) {
        throw UsageError("quarterly additions not active before the " +
                         std::to_string(kFirstQuarterlyCycle) + " cycle (got " +
                         std::to_string(cycle_year) + ")");
    }
    return {quarter_event(QuarterLabel::Q3, cycle_year, 9, cal),
            quarter_event(QuarterLabel::Q4, cycle_year, 12, cal),
            quarter_event(QuarterLabel::Q1, cycle_year + 1, 3, cal)};
}

RebalanceCalendar resolve_cycle(int cycle_year, const TradingCalendar& cal) {
    RebalanceCalendar out;
    out.cycle_year = cycle_year;
    out.annual_rank = annual_rank_day(cycle_year, cal);
    out.annual_rebalance = annual_rebalance_day(cycle_year, cal);
    if (cycle_year >= kFirstQuarterlyCycle) {
        const auto q = quarterly_schedule(cycle_year, cal);
        out.quarters.assign(q.begin(), q.end());
    }
    return out;
}

}  // namespace recon
