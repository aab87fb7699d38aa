#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace recon {

using Date = std::chrono::sys_days;

// Strict YYYY-MM-DD. Throws DataError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

inline int year_of(Date d) {
    return static_cast<int>(std::chrono::year_month_day{d}.year());
}

inline Date make_date(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

// Calendar-month offset; the day is clamped to the end of the target month
// (e.g. 2019-03-31 + 1 month = 2019-04-30).
Date add_months(Date d, int months);

inline bool is_weekend(Date d) {
    const std::chrono::weekday wd{d};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

}  // namespace recon
