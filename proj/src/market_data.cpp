#include "recon/market_data.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace recon {

double adjusted_price(const SecurityBar& bar) {
    if (!(bar.cfacpr > 0.0)) throw std::domain_error("cfacpr must be positive");
    if (!bar.prc) throw std::domain_error("price is missing");
    return *bar.prc / bar.cfacpr;
}

// ---------------------------------------------------------------------------
// BarTable

BarTable::BarTable(std::vector<SecurityBar> rows) : rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end(), [](const SecurityBar& a, const SecurityBar& b) {
        return a.permno != b.permno ? a.permno < b.permno : a.date < b.date;
    });
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (i > 0 && rows_[i - 1].permno == r.permno && rows_[i - 1].date == r.date) {
            throw DataError("duplicate (permno, date) key: " + std::to_string(id(r.permno)) +
                            " " + format_date(r.date));
        }
        auto [it, inserted] = by_permno_.try_emplace(r.permno, Span{i, i + 1});
        if (!inserted) it->second.end = i + 1;
        by_date_[r.date].push_back(i);
    }
}

std::span<const SecurityBar> BarTable::history(Permno p) const {
    auto it = by_permno_.find(p);
    if (it == by_permno_.end()) return {};
    return std::span<const SecurityBar>(rows_).subspan(it->second.begin,
                                                       it->second.end - it->second.begin);
}

std::span<const SecurityBar> BarTable::history(Permno p, Date from, Date to) const {
    auto all = history(p);
    auto lo = std::lower_bound(all.begin(), all.end(), from,
                               [](const SecurityBar& b, Date d) { return b.date < d; });
    auto hi = std::upper_bound(lo, all.end(), to,
                               [](Date d, const SecurityBar& b) { return d < b.date; });
    return all.subspan(static_cast<std::size_t>(lo - all.begin()),
                       static_cast<std::size_t>(hi - lo));
}

const SecurityBar* BarTable::find(Permno p, Date d) const {
    auto slice = history(p, d, d);
    return slice.empty() ? nullptr : &slice.front();
}

const SecurityBar* BarTable::last_on_or_before(Permno p, Date d) const {
    auto all = history(p);
    auto hi = std::upper_bound(all.begin(), all.end(), d,
                               [](Date x, const SecurityBar& b) { return x < b.date; });
    if (hi == all.begin()) return nullptr;
    return &*(hi - 1);
}

std::vector<const SecurityBar*> BarTable::on(Date d) const {
    std::vector<const SecurityBar*> out;
    auto it = by_date_.find(d);
    if (it == by_date_.end()) return out;
    out.reserve(it->second.size());
    for (std::size_t i : it->second) out.push_back(&rows_[i]);
    return out;
}

std::vector<Permno> BarTable::permnos() const {
    std::vector<Permno> out;
    out.reserve(by_permno_.size());
    for (const auto& [p, span] : by_permno_) out.push_back(p);
    return out;
}

std::optional<Date> BarTable::first_date() const {
    if (by_date_.empty()) return std::nullopt;
    return by_date_.begin()->first;
}

std::optional<Date> BarTable::last_date() const {
    if (by_date_.empty()) return std::nullopt;
    return by_date_.rbegin()->first;
}

// ---------------------------------------------------------------------------
// Bar CSV

namespace {

std::optional<std::string> parse_bar(const std::vector<std::string>& f, SecurityBar& bar) {
    if (f.size() != 7) return "expected 7 fields, got " + std::to_string(f.size());
    auto permno = csv::parse_int(f[0]);
    auto permco = csv::parse_int(f[1]);
    if (!permno || !permco) return std::string("unparseable permno/permco");
    bar.permno = Permno{static_cast<std::int32_t>(*permno)};
    bar.permco = Permco{static_cast<std::int32_t>(*permco)};
    try {
        bar.date = parse_date(f[2]);
    } catch (const DataError& e) {
        return std::string(e.what());
    }
    if (!f[3].empty()) {
        auto prc = csv::parse_double(f[3]);
        if (!prc) return std::string("unparseable prc");
        if (*prc < 0.0) {
            bar.prc = -*prc;
            bar.midpoint = true;
        } else if (*prc > 0.0) {
            bar.prc = *prc;
        }
    }
    auto shrout = csv::parse_double(f[4]);
    if (!shrout) return std::string("missing or unparseable shrout");
    if (*shrout < 0.0) return std::string("negative shrout");
    bar.shrout = *shrout;
    if (!f[5].empty()) {
        auto ret = csv::parse_double(f[5]);
        if (!ret) return std::string("unparseable ret");
        bar.ret = *ret;
    }
    auto cfacpr = csv::parse_double(f[6]);
    if (!cfacpr) return std::string("missing or unparseable cfacpr");
    if (!(*cfacpr > 0.0)) return std::string("cfacpr must be positive");
    bar.cfacpr = *cfacpr;
    return std::nullopt;
}

void check_header(std::span<const std::string> lines, const char* expected,
                  const std::string& what) {
    if (lines.empty()) throw DataError(what + ": empty file, missing header");
    if (lines.front() != expected) {
        throw DataError(what + ": malformed header '" + lines.front() + "', expected '" +
                        expected + "'");
    }
}

}  // namespace

BarLoad parse_daily_bars(std::span<const std::string> lines, std::optional<DateRange> range) {
    check_header(lines, kBarHeader, "daily bars");
    BarLoad result;
    std::vector<SecurityBar> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        ++result.report.rows_read;
        SecurityBar bar;
        if (auto err = parse_bar(csv::split_line(lines[i]), bar)) {
            result.report.rejected.push_back({i + 1, *err, lines[i]});
            continue;
        }
        if (range && !range->contains(bar.date)) {
            ++result.report.rows_out_of_range;
            continue;
        }
        rows.push_back(bar);
    }
    result.report.rows_kept = rows.size();
    result.table = BarTable(std::move(rows));
    return result;
}

BarLoad load_daily_bars(const std::string& path, std::optional<DateRange> range) {
    const auto lines = csv::read_lines(path);
    return parse_daily_bars(lines, range);
}

void write_daily_bars(const BarTable& table, std::ostream& out) {
    out << kBarHeader << '\n';
    for (const auto& b : table.rows()) {
        out << id(b.permno) << ',' << id(b.permco) << ',' << format_date(b.date) << ',';
        if (b.prc) out << csv::format_double(b.midpoint ? -*b.prc : *b.prc);
        out << ',' << csv::format_double(b.shrout) << ',';
        if (b.ret) out << csv::format_double(*b.ret);
        out << ',' << csv::format_double(b.cfacpr) << '\n';
    }
}

void write_daily_bars(const BarTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    write_daily_bars(table, out);
}

// ---------------------------------------------------------------------------
// Meta

MetaTable::MetaTable(std::vector<SecurityMeta> rows) : rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end(),
              [](const SecurityMeta& a, const SecurityMeta& b) { return a.permno < b.permno; });
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (!by_permno_.emplace(rows_[i].permno, i).second) {
            throw DataError("duplicate permno in security meta: " +
                            std::to_string(id(rows_[i].permno)));
        }
        by_permco_[rows_[i].permco].push_back(rows_[i].permno);
    }
}

const SecurityMeta* MetaTable::find(Permno p) const {
    auto it = by_permno_.find(p);
    return it == by_permno_.end() ? nullptr : &rows_[it->second];
}

std::vector<Permno> MetaTable::securities_of(Permco c) const {
    auto it = by_permco_.find(c);
    return it == by_permco_.end() ? std::vector<Permno>{} : it->second;
}

std::vector<Permno> MetaTable::non_common() const {
    std::vector<Permno> out;
    for (const auto& m : rows_) {
        if (!m.is_common_stock()) out.push_back(m.permno);
    }
    return out;
}

MetaTable parse_security_meta(std::span<const std::string> lines) {
    check_header(lines, kMetaHeader, "security meta");
    std::vector<SecurityMeta> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split_line(lines[i]);
        const std::string where = "security meta line " + std::to_string(i + 1);
        if (f.size() != 6) throw DataError(where + ": expected 6 fields");
        auto permno = csv::parse_int(f[0]);
        auto permco = csv::parse_int(f[1]);
        auto hshrcd = csv::parse_int(f[3]);
        if (!permno || !permco || !hshrcd) throw DataError(where + ": unparseable id or hshrcd");
        if (f[5] != "0" && f[5] != "1") throw DataError(where + ": domicile_flag must be 0 or 1");
        SecurityMeta m;
        m.permno = Permno{static_cast<std::int32_t>(*permno)};
        m.permco = Permco{static_cast<std::int32_t>(*permco)};
        try {
            m.begdat = parse_date(f[2]);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        m.hshrcd = static_cast<int>(*hshrcd);
        m.company_name = f[4];
        m.us_domiciled = f[5] == "1";
        rows.push_back(std::move(m));
    }
    return MetaTable(std::move(rows));
}

MetaTable load_security_meta(const std::string& path) {
    const auto lines = csv::read_lines(path);
    return parse_security_meta(lines);
}

void write_security_meta(const MetaTable& table, std::ostream& out) {
    out << kMetaHeader << '\n';
    for (const auto& m : table.rows()) {
        out << id(m.permno) << ',' << id(m.permco) << ',' << format_date(m.begdat) << ','
            << m.hshrcd << ',' << csv::quote(m.company_name) << ',' << (m.us_domiciled ? 1 : 0)
            << '\n';
    }
}

void write_security_meta(const MetaTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    write_security_meta(table, out);
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_universe(const BarTable& bars, const MetaTable& meta,
                                   const ValidationOptions& options) {
    ValidationReport report;
    for (Permno p : bars.permnos()) {
        const auto history = bars.history(p);
        const SecurityMeta* m = meta.find(p);
        if (!m) {
            report.orphans.push_back(p);
        } else if (history.front().date < m->begdat) {
            report.begdat_violations.push_back({p, m->begdat, history.front().date});
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            if (!history[i].prc) report.missing_prices.push_back({p, history[i].date});
            if (i == 0) continue;
            const int days = static_cast<int>((history[i].date - history[i - 1].date).count());
            if (days > options.max_gap_days) {
                report.gaps.push_back({p, history[i - 1].date, history[i].date, days});
            }
        }
    }
    return report;
}

}  // namespace recon
