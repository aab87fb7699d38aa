#include "recon/cli.hpp"

#include "recon/csv.hpp"
#include "recon/error.hpp"
#include "recon/impact.hpp"
#include "recon/index_series.hpp"
#include "recon/market_data.hpp"
#include "recon/stats.hpp"
#include "recon/trading_calendar.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace recon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
    if (first_year > last_year) throw UsageError("config: first_year after last_year");
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("config: alpha must lie in (0, 1)");
    if (boot_n == 0) throw UsageError("config: boot_n must be positive");
    params.validate();
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T number(const std::string& key, const std::string& value) {
    const auto v = csv::parse_double(value);
    if (!v) throw UsageError("config: " + key + " expects a number, got '" + value + "'");
    if constexpr (std::is_integral_v<T>) {
        if (*v < 0.0 && std::is_unsigned_v<T>)
            throw UsageError("config: " + key + " must not be negative");
        if (*v != static_cast<double>(static_cast<long long>(*v)))
            throw UsageError("config: " + key + " expects an integer, got '" + value + "'");
    }
    return static_cast<T>(*v);
}

}  // namespace

RunConfig parse_config(std::span<const std::string> lines, const fs::path& base) {
    RunConfig c;
    const auto path = [&](const std::string& v) {
        fs::path p(v);
        return p.is_absolute() ? p : base / p;
    };
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto& s = c.synth;
    const std::map<std::string, Setter> setters{
        {"bars", [&](auto&, auto& v) { c.bars = path(v); }},
        {"meta", [&](auto&, auto& v) { c.meta = path(v); }},
        {"holidays", [&](auto&, auto& v) { c.holidays = path(v); }},
        {"reference", [&](auto&, auto& v) { c.reference = path(v); }},
        {"out", [&](auto&, auto& v) { c.out = path(v); }},
        {"first_year", [&](auto& k, auto& v) { c.first_year = number<int>(k, v); }},
        {"last_year", [&](auto& k, auto& v) { c.last_year = number<int>(k, v); }},
        {"n_tier1", [&](auto& k, auto& v) { c.params.n_tier1 = number<std::size_t>(k, v); }},
        {"n_tier3", [&](auto& k, auto& v) { c.params.n_tier3 = number<std::size_t>(k, v); }},
        {"n_tierE", [&](auto& k, auto& v) { c.params.n_tierE = number<std::size_t>(k, v); }},
        {"min_cap", [&](auto& k, auto& v) { c.params.min_cap = number<double>(k, v); }},
        {"min_price", [&](auto& k, auto& v) { c.params.min_price = number<double>(k, v); }},
        {"tier",
         [&](auto& k, auto& v) {
             auto t = parse_tier(v);
             if (!t) throw UsageError("config: " + k + " must be T1, T2, T3 or TE");
             c.tier = *t;
         }},
        {"t3m_window", [&](auto& k, auto& v) { c.t3m_window = number<std::size_t>(k, v); }},
        {"max_lag", [&](auto& k, auto& v) { c.max_lag = number<std::size_t>(k, v); }},
        {"bins", [&](auto& k, auto& v) { c.bins = number<std::size_t>(k, v); }},
        {"boot_n", [&](auto& k, auto& v) { c.boot_n = number<std::size_t>(k, v); }},
        {"seed", [&](auto& k, auto& v) { c.seed = number<std::uint64_t>(k, v); }},
        {"alpha", [&](auto& k, auto& v) { c.alpha = number<double>(k, v); }},
        {"synth.n_companies", [&](auto& k, auto& v) { s.n_companies = number<std::size_t>(k, v); }},
        {"synth.multi_class_fraction",
         [&](auto& k, auto& v) { s.multi_class_fraction = number<double>(k, v); }},
        {"synth.ipo_rate", [&](auto& k, auto& v) { s.ipo_rate = number<double>(k, v); }},
        {"synth.delist_rate", [&](auto& k, auto& v) { s.delist_rate = number<double>(k, v); }},
        {"synth.drift", [&](auto& k, auto& v) { s.drift = number<double>(k, v); }},
        {"synth.volatility", [&](auto& k, auto& v) { s.volatility = number<double>(k, v); }},
        {"synth.split_rate", [&](auto& k, auto& v) { s.split_rate = number<double>(k, v); }},
        {"synth.halt_rate", [&](auto& k, auto& v) { s.halt_rate = number<double>(k, v); }},
        {"synth.missing_price_rate",
         [&](auto& k, auto& v) { s.missing_price_rate = number<double>(k, v); }},
        {"synth.midpoint_rate", [&](auto& k, auto& v) { s.midpoint_rate = number<double>(k, v); }},
        {"synth.non_common_fraction",
         [&](auto& k, auto& v) { s.non_common_fraction = number<double>(k, v); }},
        {"synth.foreign_fraction",
         [&](auto& k, auto& v) { s.foreign_fraction = number<double>(k, v); }},
        {"synth.penny_fraction", [&](auto& k, auto& v) { s.penny_fraction = number<double>(k, v); }},
    };
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(i + 1) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw UsageError("config line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
        }
        it->second(key, value);
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path.string());
    const auto lines = csv::read_lines(path.string());
    return parse_config(lines, path.parent_path());
}

namespace {

// Decisions and warnings collected during a run; always written to run.log.
class RunLog {
public:
    void add(std::string line) { lines_.push_back(std::move(line)); }
    void add_all(const std::vector<std::string>& lines) {
        lines_.insert(lines_.end(), lines.begin(), lines.end());
    }
    void write(const fs::path& path) const {
        std::ofstream f(path, std::ios::binary);
        for (const auto& l : lines_) f << l << '\n';
    }

private:
    std::vector<std::string> lines_;
};

// Rethrows module errors with the stage name in front.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const UsageError& e) {
        throw UsageError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const std::domain_error& e) {
        throw DataError(name + ": " + e.what());
    }
}

void require_file(const fs::path& p, const std::string& key) {
    if (p.empty()) throw UsageError("config: " + key + " is not set");
    if (!fs::exists(p)) throw UsageError("config: " + key + " file not found: " + p.string());
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw UsageError("cannot write " + p.string());
    return f;
}

void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Data {
    TradingCalendar cal;
    BarTable bars;
    MetaTable meta;
    LoadReport report;
};

DateRange run_range(const RunConfig& c) {
    return {make_date(c.first_year, 1, 1), make_date(c.last_year + 1, 12, 31)};
}

TradingCalendar calendar_of(const RunConfig& c) {
    std::optional<std::string> file;
    if (c.holidays) {
        require_file(*c.holidays, "holidays");
        file = c.holidays->string();
    }
    return stage("trading-calendar", [&] { return build_trading_calendar(file, run_range(c)); });
}

Data load_data(const RunConfig& c, RunLog& log, bool restrict_range = true) {
    require_file(c.bars, "bars");
    require_file(c.meta, "meta");
    auto cal = calendar_of(c);
    auto load = stage("market-data", [&] {
        return load_daily_bars(c.bars.string(),
                               restrict_range ? std::optional(run_range(c)) : std::nullopt);
    });
    auto meta = stage("market-data", [&] { return load_security_meta(c.meta.string()); });
    log.add("bars: " + std::to_string(load.report.rows_read) + " rows read, " +
            std::to_string(load.report.rows_kept) + " kept, " +
            std::to_string(load.report.rows_out_of_range) + " out of range, " +
            std::to_string(load.report.rejected.size()) + " rejected");
    for (const auto& r : load.report.rejected) {
        log.add("rejected line " + std::to_string(r.line) + ": " + r.reason);
    }
    return {std::move(cal), std::move(load.table), std::move(meta), std::move(load.report)};
}

MembershipTimeline timeline_of(const RunConfig& c, const Data& d, RunLog& log) {
    auto t = stage("reconstitution", [&] {
        return membership_timeline(c.first_year, c.last_year, d.bars, d.meta, c.params, d.cal);
    });
    log.add_all(t.log);
    return t;
}

// Subcommands.

int cmd_ingest(const RunConfig& c, RunLog& log) {
    const Data d = load_data(c, log);
    json j;
    j["bars"] = {{"rows_read", d.report.rows_read},
                 {"rows_kept", d.report.rows_kept},
                 {"rows_out_of_range", d.report.rows_out_of_range},
                 {"rows_rejected", d.report.rejected.size()},
                 {"securities", d.bars.permnos().size()}};
    j["meta"] = {{"securities", d.meta.size()},
                 {"companies", d.meta.company_count()},
                 {"non_common", d.meta.non_common().size()}};
    write_json(c.out / "ingest.json", j);
    auto rej = open_out(c.out / "rejected.csv");
    rej << "line,reason,text\n";
    for (const auto& r : d.report.rejected) {
        rej << r.line << ',' << csv::quote(r.reason) << ',' << csv::quote(r.text) << '\n';
    }
    return 0;
}

int cmd_validate(const RunConfig& c, RunLog& log) {
    const Data d = load_data(c, log);
    const auto v = stage("market-data", [&] { return validate_universe(d.bars, d.meta); });
    json j;
    j["orphans"] = json::array();
    for (Permno p : v.orphans) j["orphans"].push_back(id(p));
    j["begdat_violations"] = json::array();
    for (const auto& b : v.begdat_violations) {
        j["begdat_violations"].push_back({{"permno", id(b.permno)},
                                          {"begdat", format_date(b.begdat)},
                                          {"first_bar", format_date(b.first_bar)}});
    }
    j["gaps"] = json::array();
    for (const auto& g : v.gaps) {
        j["gaps"].push_back({{"permno", id(g.permno)},
                             {"from", format_date(g.from)},
                             {"to", format_date(g.to)},
                             {"calendar_days", g.calendar_days}});
    }
    j["missing_prices"] = json::array();
    for (const auto& m : v.missing_prices) {
        j["missing_prices"].push_back({{"permno", id(m.permno)}, {"date", format_date(m.date)}});
    }
    j["clean"] = v.empty();
    write_json(c.out / "validation.json", j);
    log.add(std::string("validation: ") + (v.empty() ? "clean" : "issues found"));
    return 0;
}

int cmd_calendar(const RunConfig& c, int year, std::ostream& out, RunLog& log) {
    RunConfig local = c;
    local.first_year = year;
    local.last_year = year;
    const auto cal = calendar_of(local);
    const auto cycle = stage("trading-calendar", [&] { return resolve_cycle(year, cal); });
    std::ostringstream text;
    text << "event,rank_day,rebalance_day\n";
    text << year << "-annual," << format_date(cycle.annual_rank) << ','
         << format_date(cycle.annual_rebalance) << '\n';
    for (const auto& q : cycle.quarters) {
        text << year << '-' << to_string(q.label) << ',' << format_date(q.rank) << ','
             << format_date(q.rebalance) << '\n';
    }
    if (cycle.quarters.empty()) log.add("cycle " + std::to_string(year) + ": no quarterly events");
    out << text.str();
    open_out(c.out / ("calendar_" + std::to_string(year) + ".csv")) << text.str();
    return 0;
}

int cmd_reconstitute(const RunConfig& c, RunLog& log) {
    const Data d = load_data(c, log);
    const auto t = timeline_of(c, d, log);
    auto snapshots = open_out(c.out / "snapshots.csv");
    write_snapshots(t, snapshots);
    auto changes = open_out(c.out / "changes.csv");
    write_changes(t, changes);
    json events = json::array();
    for (const auto& s : t.snapshots) {
        json sizes;
        for (Tier tier : kAllTiers) sizes[to_string(tier)] = s.tier_size(tier);
        events.push_back({{"event", s.label()},
                          {"rank_day", format_date(s.rank_day)},
                          {"effective_start", format_date(s.effective_start)},
                          {"effective_end", format_date(s.effective_end)},
                          {"members", s.members.size()},
                          {"tier_sizes", sizes},
                          {"active_at_end",
                           s.roster_size(s.effective_end - std::chrono::days{1})}});
    }
    std::map<std::string, std::size_t> actions;
    for (const auto& ch : t.changes) ++actions[to_string(ch.action)];
    write_json(c.out / "reconstitution.json", {{"events", events}, {"changes", actions}});
    return 0;
}

ReturnSeries index_returns(const RunConfig& c, const Data& d, const MembershipTimeline& t,
                           RunLog& log) {
    auto r = stage("index-series", [&] { return index_daily_returns(t, d.bars, d.cal, c.tier); });
    log.add_all(r.warnings);
    return r.series;
}

int cmd_returns(const RunConfig& c, RunLog& log) {
    const Data d = load_data(c, log);
    const auto t = timeline_of(c, d, log);
    const auto series = index_returns(c, d, t, log);
    const std::string tier = to_string(c.tier);
    auto daily = open_out(c.out / ("returns_" + tier + ".csv"));
    write_series(series, daily);
    auto gross = open_out(c.out / ("t3m_" + tier + ".csv"));
    write_series(t3m_gross_returns(series, c.t3m_window), gross);
    return 0;
}

json correlation_json(const CorrelationReport& r) {
    const auto flags = [](const std::vector<AutocorrFlag>& v) {
        json a = json::array();
        for (const auto& f : v) a.push_back({{"lag", f.lag}, {"rho", f.rho}});
        return a;
    };
    return {{"lag0_corr", number_or_null(r.lag0_corr)},
            {"n", r.n},
            {"sig_limit", r.sig_limit},
            {"autocorr_flags_a", flags(r.autocorr_a)},
            {"autocorr_flags_b", flags(r.autocorr_b)}};
}

int cmd_compare(const RunConfig& c, RunLog& log) {
    if (!c.reference) throw UsageError("config: reference is not set");
    require_file(*c.reference, "reference");
    const Data d = load_data(c, log);
    const auto t = timeline_of(c, d, log);
    const auto ours = index_returns(c, d, t, log);
    const auto ref = stage("index-series", [&] { return read_series(c.reference->string()); });
    json j;
    j["daily"] = correlation_json(
        stage("index-series", [&] { return cross_correlation_report(ours, ref, c.max_lag); }));
    const auto g_ours = t3m_gross_returns(ours, c.t3m_window);
    const auto g_ref = t3m_gross_returns(ref, c.t3m_window);
    j["t3m"] = correlation_json(
        stage("index-series", [&] { return cross_correlation_report(g_ours, g_ref, c.max_lag); }));
    const auto dist = distribution_report(ours, ref, c.bins);
    const auto hist = [](const Histogram& h) {
        return json{{"lo", h.lo}, {"bin_width", h.bin_width}, {"density", h.density}};
    };
    json qq = json::array();
    for (const auto& [a, b] : dist.qq) qq.push_back({a, b});
    j["distribution"] = {{"a", hist(dist.a)}, {"b", hist(dist.b)}, {"qq", qq}};
    write_json(c.out / "compare.json", j);
    return 0;
}

void log_samples(const SampleSet& set, RunLog& log) {
    for (const auto& drop : set.dropped) {
        log.add("dropped sample permno " + std::to_string(id(drop.permno)) + " event " +
                format_date(drop.event_date) + ": " + drop.reason);
    }
    for (const auto& s : set.samples) {
        const Date targets[3] = {s.event_date, add_months(s.event_date, 1),
                                 add_months(s.event_date, 2)};
        const Date got[3] = {s.d0, s.d1, s.d2};
        for (int k = 0; k < 3; ++k) {
            if (got[k] != targets[k]) {
                log.add("snapped permno " + std::to_string(id(s.permno)) + " " +
                        format_date(targets[k]) + " -> " + format_date(got[k]));
            }
        }
    }
}

void write_samples(const std::string& event, const SampleSet& set, std::ostream& out) {
    for (const auto& s : set.samples) {
        out << event << ',' << id(s.permno) << ',' << to_string(s.group) << ','
            << format_date(s.d0) << ',' << format_date(s.d1) << ',' << format_date(s.d2) << ','
            << csv::format_double(s.p0) << ',' << csv::format_double(s.p1) << ','
            << csv::format_double(s.p2) << ',' << csv::format_double(s.r_temp) << ','
            << csv::format_double(s.r_perm) << '\n';
    }
}

std::vector<Permno> permnos_of(const SampleSet& set) {
    std::vector<Permno> v;
    for (const auto& s : set.samples) v.push_back(s.permno);
    return v;
}

json crowding_json(const CrowdingSamples& s, const std::string& kind) {
    return {{"label", s.label},
            {"kind", kind},
            {"z_perm", values_of(s.z.samples, ImpactMeasure::Permanent)},
            {"y_perm", values_of(s.y.samples, ImpactMeasure::Permanent)},
            {"z_temp", values_of(s.z.samples, ImpactMeasure::Temporary)},
            {"y_temp", values_of(s.y.samples, ImpactMeasure::Temporary)}};
}

int cmd_impact(const RunConfig& c, std::optional<int> only_year, RunLog& log) {
    const Data d = load_data(c, log);
    const auto t = timeline_of(c, d, log);
    std::vector<int> years;
    if (only_year) {
        if (*only_year < c.first_year || *only_year > c.last_year) {
            throw UsageError("--year outside the configured year range");
        }
        years.push_back(*only_year);
    } else {
        for (int y = c.first_year; y <= c.last_year; ++y) years.push_back(y);
    }

    std::vector<ImpactTable> tables;
    std::vector<ImpactRow> rows;
    auto groups = open_out(c.out / "groups.csv");
    auto samples = open_out(c.out / "impact_samples.csv");
    groups << "event,permno,group_tag\n";
    samples << "event,permno,group_tag,d0,d1,d2,p0,p1,p2,r_temp,r_perm\n";
    json cases = json::array();
    const auto emit = [&](const std::string& event, const SampleSet& set, GroupTag tag) {
        log_samples(set, log);
        write_group_roster(event, permnos_of(set), tag, groups);
        write_samples(event, set, samples);
    };
    for (int y : years) {
        const std::string event = std::to_string(y) + "-annual";
        auto table = stage("impact-analysis", [&] { return annual_impact_table(t, d.bars, d.cal, y); });
        emit(event, table.addition_samples, GroupTag::AnnualAddition);
        emit(event, table.deletion_samples, GroupTag::AnnualDeletion);
        rows.push_back(table.additions);
        rows.push_back(table.deletions);
        tables.push_back(std::move(table));

        if (t.quarterly(y - 1, QuarterLabel::Q3)) {
            const auto s = stage("impact-analysis",
                                 [&] { return annual_crowding_samples(t, d.bars, d.cal, y); });
            emit(event, s.z, GroupTag::QuarterlyAdditionRetained);
            emit(event, s.y, GroupTag::NewAddition);
            cases.push_back(crowding_json(s, "annual"));
        }
        for (QuarterLabel q : {QuarterLabel::Q3, QuarterLabel::Q4, QuarterLabel::Q1}) {
            if (!t.quarterly(y, q)) continue;
            const auto s = stage("impact-analysis", [&] {
                return quarterly_crowding_samples(t, d.bars, d.cal, y, q);
            });
            emit(s.label, s.z, GroupTag::QuarterlyAddition);
            emit(s.label, s.y, GroupTag::Incumbent);
            cases.push_back(crowding_json(s, "quarterly"));
        }
    }
    auto table_out = open_out(c.out / "impact_table.csv");
    write_impact_table(tables, table_out);
    auto rows_out = open_out(c.out / "impact_rows.csv");
    write_impact_rows(rows, rows_out);
    write_json(c.out / "crowding_samples.json", {{"cases", cases}});
    return 0;
}

json report_json(const stats::TestReport& r) {
    return {{"label", r.label},
            {"family", r.family},
            {"n", r.n},
            {"m", r.m},
            {"skipped", r.skipped},
            {"note", r.note},
            {"t_obs", number_or_null(r.t_obs)},
            {"p_raw", number_or_null(r.p_raw)},
            {"p_bh", number_or_null(r.p_bh)},
            {"ci_lo", number_or_null(r.ci_lo)},
            {"ci_hi", number_or_null(r.ci_hi)},
            {"ci_adjusted", r.ci_adjusted},
            {"mean_t", number_or_null(r.mean_t)},
            {"N", r.N},
            {"seed", r.seed},
            {"redraws", r.redraws}};
}

int cmd_test(const RunConfig& c, const std::string& family, std::optional<fs::path> samples_path,
             RunLog& log) {
    const fs::path path = samples_path.value_or(c.out / "crowding_samples.json");
    if (!fs::exists(path)) {
        throw UsageError("crowding samples not found: " + path.string() + " (run impact first)");
    }
    json input;
    try {
        std::ifstream f(path);
        input = json::parse(f);
    } catch (const json::exception& e) {
        throw DataError("stats: cannot read " + path.string() + ": " + e.what());
    }
    std::vector<std::string> families;
    if (family == "all") families = {"permanent", "temporary"};
    else families = {family};
    for (const auto& fam : families) {
        const std::string suffix = fam == "permanent" ? "perm" : "temp";
        std::vector<stats::TestCase> cases;
        try {
            for (const auto& jc : input.at("cases")) {
                cases.push_back({jc.at("label").get<std::string>(),
                                 jc.at("z_" + suffix).get<std::vector<double>>(),
                                 jc.at("y_" + suffix).get<std::vector<double>>()});
            }
        } catch (const json::exception& e) {
            throw DataError("stats: malformed crowding samples: " + std::string(e.what()));
        }
        const auto reports =
            stage("stats", [&] { return stats::run_test_family(fam, cases, c.boot_n, c.seed, c.alpha); });
        json arr = json::array();
        auto table = open_out(c.out / ("pvalues_" + fam + ".csv"));
        table << "label,n,m,t_obs,p_raw,p_bh\n";
        for (const auto& r : reports) {
            arr.push_back(report_json(r));
            if (r.skipped) {
                log.add(fam + " " + r.label + ": skipped, " + r.note);
                table << r.label << ',' << r.n << ',' << r.m << ",,,\n";
                continue;
            }
            if (r.redraws) {
                log.add(fam + " " + r.label + ": " + std::to_string(r.redraws) +
                        " zero-variance resamples redrawn");
            }
            table << r.label << ',' << r.n << ',' << r.m << ',' << csv::format_fixed(r.t_obs, 3)
                  << ',' << csv::format_fixed(r.p_raw, 4) << ',' << csv::format_fixed(r.p_bh, 4)
                  << '\n';
        }
        write_json(c.out / ("test_" + fam + ".json"), arr);
    }
    return 0;
}

int cmd_synth(const RunConfig& c, RunLog& log) {
    synth::UniverseConfig u = c.synth;
    u.first_year = c.first_year;
    u.last_year = c.last_year;
    u.seed = c.seed;
    const auto range = synth::universe_range(u);
    const TradingCalendar cal =
        stage("trading-calendar", [&] { return build_trading_calendar(std::nullopt, range); });
    const auto universe = stage("synth", [&] { return synth::generate_universe(u, cal); });
    write_daily_bars(universe.bars, (c.out / "bars.csv").string());
    write_security_meta(universe.meta, (c.out / "meta.csv").string());
    open_out(c.out / "script.json") << universe.script.to_json() << '\n';
    log.add("synth: " + std::to_string(universe.bars.size()) + " bars, " +
            std::to_string(universe.meta.size()) + " securities, " +
            std::to_string(universe.script.attempts) + " attempt(s)");
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Index reconstitution, price impact and crowding tests"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    std::size_t boot_n = 0;
    std::string out_dir;
    std::string tier;
    std::string reference;
    int year = 0;
    std::string family = "all";
    std::string samples;

    std::vector<CLI::App*> subs;
    const auto sub = [&](const char* name, const char* help) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("-c,--config", config_path, "Config file (key = value)");
        s->add_option("--out", out_dir, "Output directory");
        subs.push_back(s);
        return s;
    };
    auto* ingest = sub("ingest", "Load bars and meta, report row counts");
    auto* validate = sub("validate", "Check bars against meta");
    auto* calendar = sub("calendar", "Print the rank and rebalance days of one cycle");
    auto* yopt = calendar->add_option("--year", year, "Cycle year")->required();
    (void)yopt;
    auto* reconstitute = sub("reconstitute", "Build membership snapshots and the change log");
    auto* returns = sub("returns", "Daily and trailing gross index returns");
    auto* compare = sub("compare", "Correlate index returns with a reference series");
    compare->add_option("--reference", reference, "Reference series CSV (date,value)");
    auto* impact = sub("impact", "Price impact tables and crowding samples");
    auto* impact_year = impact->add_option("--year", year, "Single cycle year");
    auto* test = sub("test", "Bootstrap crowding tests with BH and FCR adjustment");
    test->add_option("--family", family, "permanent, temporary or all")
        ->check(CLI::IsMember({"permanent", "temporary", "all"}));
    test->add_option("--samples", samples, "Crowding samples JSON written by impact");
    auto* synth_cmd = sub("synth", "Generate a synthetic universe");
    for (CLI::App* s : {returns, compare}) s->add_option("--tier", tier, "T1, T2, T3 or TE");
    std::vector<CLI::Option*> seed_opts, alpha_opts, boot_opts;
    for (CLI::App* s : subs) {
        seed_opts.push_back(s->add_option("--seed", seed, "Random seed"));
        alpha_opts.push_back(s->add_option("--alpha", alpha, "Significance level"));
        boot_opts.push_back(s->add_option("--boot-n", boot_n, "Bootstrap repetitions"));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    const auto given = [](const std::vector<CLI::Option*>& opts) {
        for (auto* o : opts) {
            if (o->count()) return true;
        }
        return false;
    };

    RunLog log;
    fs::path log_dir = out_dir.empty() ? fs::path("out") : fs::path(out_dir);
    CLI::App* chosen = app.get_subcommands().front();
    log.add("recon " + chosen->get_name());
    int status = 0;
    try {
        RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!out_dir.empty()) c.out = out_dir;
        log_dir = c.out;
        if (given(seed_opts)) c.seed = seed;
        if (given(alpha_opts)) c.alpha = alpha;
        if (given(boot_opts)) c.boot_n = boot_n;
        if (!reference.empty()) c.reference = reference;
        if (!tier.empty()) {
            auto t = parse_tier(tier);
            if (!t) throw UsageError("--tier must be T1, T2, T3 or TE");
            c.tier = *t;
        }
        c.validate();
        std::error_code ec;
        fs::create_directories(c.out, ec);
        if (ec) throw UsageError("cannot create output directory " + c.out.string());

        if (config_path.empty() && chosen != calendar && chosen != synth_cmd) {
            throw UsageError(chosen->get_name() + " needs --config");
        }
        if (chosen == ingest) status = cmd_ingest(c, log);
        else if (chosen == validate) status = cmd_validate(c, log);
        else if (chosen == calendar) status = cmd_calendar(c, year, out, log);
        else if (chosen == reconstitute) status = cmd_reconstitute(c, log);
        else if (chosen == returns) status = cmd_returns(c, log);
        else if (chosen == compare) status = cmd_compare(c, log);
        else if (chosen == impact)
            status = cmd_impact(c, impact_year->count() ? std::optional(year) : std::nullopt, log);
        else if (chosen == test)
            status = cmd_test(c, family, samples.empty() ? std::nullopt : std::optional<fs::path>(samples), log);
        else if (chosen == synth_cmd) status = cmd_synth(c, log);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        log.add(std::string("error: ") + e.what());
        status = 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        log.add(std::string("error: ") + e.what());
        status = 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        log.add(std::string("error: ") + e.what());
        status = 2;
    }
    log.add("exit " + std::to_string(status));
    std::error_code ec;
    fs::create_directories(log_dir, ec);
    if (!ec) log.write(log_dir / "run.log");
    return status;
}

}  // namespace recon::cli
