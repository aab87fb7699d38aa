#pragma once

#include "recon/date.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recon {

// CRSP permanent identifiers. Distinct enum types so a security id can never
// be passed where a company id is expected.
enum class Permno : std::int32_t {};
enum class Permco : std::int32_t {};

constexpr std::int32_t id(Permno p) { return static_cast<std::int32_t>(p); }
constexpr std::int32_t id(Permco c) { return static_cast<std::int32_t>(c); }

// One security-day observation from the daily stock file.
struct SecurityBar {
    Permno permno{};
    Permco permco{};
    Date date{};
    std::optional<double> prc;  // |close|; absent when the source field is empty or 0
    bool midpoint = false;      // source price was negative (bid/ask midpoint)
    double shrout = 0.0;        // shares outstanding, thousands
    std::optional<double> ret;  // daily net return; absent is never 0
    double cfacpr = 1.0;        // cumulative price adjustment factor, > 0

    double shares() const { return shrout * 1000.0; }

    friend bool operator==(const SecurityBar&, const SecurityBar&) = default;
};

// |prc| / cfacpr. Throws std::domain_error when cfacpr <= 0 or the price is absent.
double adjusted_price(const SecurityBar& bar);

struct DateRange {
    Date start;  // inclusive
    Date end;    // inclusive
    bool contains(Date d) const { return d >= start && d <= end; }
};

// Immutable table of bars keyed by (permno, date). Rows are kept sorted by
// permno then date, so every per-security slice is in ascending date order.
class BarTable {
public:
    BarTable() = default;
    // Throws DataError naming the first duplicated (permno, date) key.
    explicit BarTable(std::vector<SecurityBar> rows);

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    std::span<const SecurityBar> rows() const { return rows_; }
    std::span<const SecurityBar> history(Permno p) const;
    // Bars of p dated within [from, to].
    std::span<const SecurityBar> history(Permno p, Date from, Date to) const;

    const SecurityBar* find(Permno p, Date d) const;
    // Latest bar of p dated on or before d, if any.
    const SecurityBar* last_on_or_before(Permno p, Date d) const;

    // All bars dated exactly d, ascending permno.
    std::vector<const SecurityBar*> on(Date d) const;

    std::vector<Permno> permnos() const;
    std::optional<Date> first_date() const;
    std::optional<Date> last_date() const;

    friend bool operator==(const BarTable& a, const BarTable& b) { return a.rows_ == b.rows_; }

private:
    struct Span {
        std::size_t begin;
        std::size_t end;
    };
    std::vector<SecurityBar> rows_;
    std::map<Permno, Span> by_permno_;
    std::map<Date, std::vector<std::size_t>> by_date_;
};

struct RejectedRow {
    std::size_t line = 0;  // 1-based line number in the source file
    std::string reason;
    std::string text;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_out_of_range = 0;
    std::vector<RejectedRow> rejected;
};

struct BarLoad {
    BarTable table;
    LoadReport report;
};

inline constexpr const char* kBarHeader = "permno,permco,date,prc,shrout,ret,cfacpr";
inline constexpr const char* kMetaHeader = "permno,permco,begdat,hshrcd,company_name,domicile_flag";

// Reads the daily bar CSV. Unparseable rows and rows violating the bar
// invariants are rejected and reported; a missing file, a wrong header or a
// duplicated key throws DataError.
BarLoad load_daily_bars(const std::string& path, std::optional<DateRange> range = std::nullopt);
BarLoad parse_daily_bars(std::span<const std::string> lines,
                         std::optional<DateRange> range = std::nullopt);
void write_daily_bars(const BarTable& table, std::ostream& out);
void write_daily_bars(const BarTable& table, const std::string& path);

struct SecurityMeta {
    Permno permno{};
    Permco permco{};
    Date begdat{};  // first trading date
    int hshrcd = 0;
    std::string company_name;
    bool us_domiciled = true;

    // Common stock share codes are 10 and 11.
    bool is_common_stock() const { return hshrcd == 10 || hshrcd == 11; }

    friend bool operator==(const SecurityMeta&, const SecurityMeta&) = default;
};

class MetaTable {
public:
    MetaTable() = default;
    // Throws DataError on a duplicated permno.
    explicit MetaTable(std::vector<SecurityMeta> rows);

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    std::span<const SecurityMeta> rows() const { return rows_; }

    const SecurityMeta* find(Permno p) const;
    std::vector<Permno> securities_of(Permco c) const;
    std::size_t company_count() const { return by_permco_.size(); }
    // Entries whose share code is not common stock.
    std::vector<Permno> non_common() const;

    friend bool operator==(const MetaTable& a, const MetaTable& b) { return a.rows_ == b.rows_; }

private:
    std::vector<SecurityMeta> rows_;  // ascending permno
    std::map<Permno, std::size_t> by_permno_;
    std::map<Permco, std::vector<Permno>> by_permco_;
};

MetaTable load_security_meta(const std::string& path);
MetaTable parse_security_meta(std::span<const std::string> lines);
void write_security_meta(const MetaTable& table, std::ostream& out);
void write_security_meta(const MetaTable& table, const std::string& path);

struct BegdatViolation {
    Permno permno{};
    Date begdat{};
    Date first_bar{};
};

struct BarGap {
    Permno permno{};
    Date from{};  // last bar before the gap
    Date to{};    // first bar after the gap
    int calendar_days = 0;
};

struct MissingPrice {
    Permno permno{};
    Date date{};
};

struct ValidationOptions {
    int max_gap_days = 7;  // calendar days between consecutive bars
};

struct ValidationReport {
    std::vector<Permno> orphans;  // bars without meta
    std::vector<BegdatViolation> begdat_violations;
    std::vector<BarGap> gaps;
    std::vector<MissingPrice> missing_prices;

    bool empty() const {
        return orphans.empty() && begdat_violations.empty() && gaps.empty() &&
               missing_prices.empty();
    }
};

ValidationReport validate_universe(const BarTable& bars, const MetaTable& meta,
                                   const ValidationOptions& options = {});

}  // namespace recon
