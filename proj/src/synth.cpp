#include "recon/synth.hpp"

#include "recon/error.hpp"
#include "recon/reconstitution.hpp"
#include "recon/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace recon::synth {

void UniverseConfig::validate() const {
    if (n_companies < 1) throw UsageError("n_companies must be at least 1");
    if (first_year > last_year) throw UsageError("first_year after last_year");
    const double rates[] = {multi_class_fraction, ipo_rate,         delist_rate,
                            split_rate,           halt_rate,        missing_price_rate,
                            midpoint_rate,        non_common_fraction, foreign_fraction,
                            penny_fraction};
    for (double r : rates) {
        if (!(r >= 0.0 && r <= 1.0)) throw UsageError("synthetic rates must lie in [0, 1]");
    }
    if (!(volatility >= 0.0)) throw UsageError("volatility must be non-negative");
}

DateRange universe_range(const UniverseConfig& config) {
    return {make_date(config.first_year, 1, 1), make_date(config.last_year + 1, 6, 30)};
}

namespace {

using Rng = std::mt19937_64;

struct Security {
    Permno permno{};
    Permco permco{};
    std::size_t company = 0;
    int hshrcd = 11;
    double shrout = 0.0;  // thousands, before splits
    double rel = 1.0;     // price relative to the company price
    std::size_t first = 0;
    std::size_t last = 0;  // inclusive day index
    std::set<std::size_t> halted;
    std::map<std::size_t, double> splits;
};

struct Company {
    Permco permco{};
    bool us = true;
    double log_price = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    std::vector<std::size_t> securities;
};

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return p > 0.0 && std::bernoulli_distribution(p)(rng); }

class Generator {
public:
    Generator(const UniverseConfig& cfg, const TradingCalendar& cal, std::uint64_t seed)
        : cfg_(cfg), rng_(seed) {
        const auto r = universe_range(cfg);
        const auto span = cal.trading_days(r.start, r.end);
        days_.assign(span.begin(), span.end());
        if (days_.size() < 2) throw UsageError("calendar has no trading days in universe range");
        for (int y = std::max(cfg.first_year, kFirstQuarterlyCycle); y <= cfg.last_year; ++y) {
            for (const auto& q : quarterly_schedule(y, cal)) {
                windows_.push_back({add_months(q.rank, -3), q.rank,
                                    std::to_string(y) + "-" + to_string(q.label)});
            }
        }
    }

    Universe run() {
        for (std::size_t i = 0; i < cfg_.n_companies; ++i) new_company(0);
        script_ipos();
        script_delistings();
        script_events();
        return emit();
    }

private:
    struct Window {
        Date after;  // exclusive
        Date upto;   // inclusive
        std::string label;
    };

    std::size_t new_company(std::size_t first) {
        Company c;
        c.permco = Permco{next_permco_++};
        c.us = !chance(rng_, cfg_.foreign_fraction);
        const double price = chance(rng_, cfg_.penny_fraction)
                                 ? uniform(rng_, 0.3, 0.9)
                                 : std::exp(std::normal_distribution<double>(std::log(25.0), 0.8)(rng_));
        c.log_price = std::log(price);
        c.mu = std::normal_distribution<double>(cfg_.drift, 0.05)(rng_) / 252.0;
        c.sigma = cfg_.volatility * uniform(rng_, 0.5, 1.5) / std::sqrt(252.0);
        companies_.push_back(c);
        const std::size_t idx = companies_.size() - 1;
        const double cap = draw_cap();
        add_security(idx, first, cap / price, 1.0, chance(rng_, cfg_.non_common_fraction) ? 73 : 11);
        if (chance(rng_, cfg_.multi_class_fraction)) {
            add_security(idx, first, cap / price * uniform(rng_, 0.2, 1.0), uniform(rng_, 0.5, 1.5),
                         chance(rng_, cfg_.non_common_fraction) ? 12 : 10);
        }
        return idx;
    }

    double draw_cap() {
        return std::exp(std::normal_distribution<double>(std::log(3e8), 1.6)(rng_));
    }

    std::size_t add_security(std::size_t company, std::size_t first, double shares, double rel,
                             int hshrcd) {
        Security s;
        s.permno = Permno{next_permno_++};
        s.permco = companies_[company].permco;
        s.company = company;
        s.hshrcd = hshrcd;
        s.shrout = std::max(1.0, std::round(shares / 1000.0));
        s.rel = rel;
        s.first = first;
        s.last = days_.size() - 1;
        securities_.push_back(std::move(s));
        companies_[company].securities.push_back(securities_.size() - 1);
        return securities_.size() - 1;
    }

    std::optional<std::string> window_of(Date d) const {
        for (const auto& w : windows_) {
            if (d > w.after && d <= w.upto) return w.label;
        }
        return std::nullopt;
    }

    void script_ipos() {
        const double mean = cfg_.ipo_rate * static_cast<double>(cfg_.n_companies) / 10.0;
        if (!(mean > 0.0)) return;
        std::poisson_distribution<int> count(mean);
        std::size_t begin = 1;
        while (begin < days_.size()) {
            const auto ym = std::chrono::year_month_day{days_[begin]};
            const unsigned quarter = (static_cast<unsigned>(ym.month()) - 1) / 3;
            std::size_t end = begin;
            while (end < days_.size()) {
                const auto e = std::chrono::year_month_day{days_[end]};
                if (e.year() != ym.year() || (static_cast<unsigned>(e.month()) - 1) / 3 != quarter)
                    break;
                ++end;
            }
            const int n = count(rng_);
            for (int i = 0; i < n; ++i) {
                const auto day = std::uniform_int_distribution<std::size_t>(begin, end - 1)(rng_);
                ScriptedIpo ipo;
                ipo.first_bar = days_[day];
                ipo.window = window_of(ipo.first_bar);
                if (chance(rng_, 0.15)) {
                    const auto host = std::uniform_int_distribution<std::size_t>(
                        0, companies_.size() - 1)(rng_);
                    const Security& lead = securities_[companies_[host].securities.front()];
                    const auto s = add_security(host, day, lead.shrout * 1000.0 * uniform(rng_, 0.1, 0.5),
                                                uniform(rng_, 0.5, 1.5), 11);
                    ipo.new_company = false;
                    ipo.permno = securities_[s].permno;
                } else {
                    const auto c = new_company(day);
                    ipo.permno = securities_[companies_[c].securities.front()].permno;
                }
                ipo.permco = securities_[securities_.size() - 1].permco;
                script_.ipos.push_back(ipo);
            }
            begin = end;
        }
    }

    void script_delistings() {
        if (!(cfg_.delist_rate > 0.0)) return;
        for (auto& c : companies_) {
            std::size_t first = 0;
            for (auto s : c.securities) first = std::max(first, securities_[s].first);
            for (int y = year_of(days_.front()); y <= year_of(days_.back()); ++y) {
                if (!chance(rng_, cfg_.delist_rate)) continue;
                std::vector<std::size_t> candidates;
                for (std::size_t d = first + 1; d + 1 < days_.size(); ++d) {
                    if (year_of(days_[d]) == y) candidates.push_back(d);
                }
                if (candidates.empty()) continue;
                const auto last = candidates[std::uniform_int_distribution<std::size_t>(
                    0, candidates.size() - 1)(rng_)];
                for (auto s : c.securities) securities_[s].last = last;
                break;
            }
        }
        for (const auto& s : securities_) {
            if (s.last + 1 < days_.size()) {
                script_.delistings.push_back({s.permno, s.permco, days_[s.last]});
            }
        }
    }

    void script_events() {
        const double years = static_cast<double>(days_.size()) / 252.0;
        for (auto& s : securities_) {
            const int halts = std::poisson_distribution<int>(cfg_.halt_rate * years)(rng_);
            for (int i = 0; i < halts; ++i) {
                if (s.last < s.first + 20) break;
                const auto start =
                    std::uniform_int_distribution<std::size_t>(s.first + 1, s.last - 10)(rng_);
                const int len = chance(rng_, 0.1) ? static_cast<int>(uniform(rng_, 6, 9))
                                                  : static_cast<int>(uniform(rng_, 1, 5));
                int dropped = 0;
                for (int k = 0; k < len; ++k) dropped += s.halted.insert(start + k).second;
                if (dropped) script_.halts.push_back({s.permno, days_[start], len});
            }
            const int splits = std::poisson_distribution<int>(cfg_.split_rate * years)(rng_);
            for (int i = 0; i < splits; ++i) {
                if (s.last <= s.first + 1) break;
                const auto day =
                    std::uniform_int_distribution<std::size_t>(s.first + 1, s.last)(rng_);
                const double ratio = chance(rng_, 0.2) ? 0.5 : (chance(rng_, 0.5) ? 2.0 : 3.0);
                if (s.splits.emplace(day, ratio).second) {
                    script_.splits.push_back({s.permno, days_[day], ratio});
                }
            }
        }
    }

    Universe emit() {
        std::vector<SecurityBar> bars;
        std::vector<double> cfac(securities_.size(), 1.0);
        std::vector<double> shrout(securities_.size());
        std::vector<std::optional<double>> last_adj(securities_.size());
        for (std::size_t i = 0; i < securities_.size(); ++i) shrout[i] = securities_[i].shrout;

        for (std::size_t d = 0; d < days_.size(); ++d) {
            if (d > 0) {
                for (auto& c : companies_) {
                    c.log_price += c.mu + c.sigma * std::normal_distribution<double>()(rng_);
                }
            }
            for (std::size_t i = 0; i < securities_.size(); ++i) {
                const Security& s = securities_[i];
                if (d < s.first || d > s.last) continue;
                if (auto it = s.splits.find(d); it != s.splits.end()) {
                    cfac[i] /= it->second;
                    shrout[i] = std::round(shrout[i] * it->second);
                }
                if (s.halted.contains(d)) continue;
                const double adj = std::exp(companies_[s.company].log_price) * s.rel;
                SecurityBar bar;
                bar.permno = s.permno;
                bar.permco = s.permco;
                bar.date = days_[d];
                bar.shrout = shrout[i];
                bar.cfacpr = cfac[i];
                if (!chance(rng_, cfg_.missing_price_rate)) {
                    // Four decimals, like the source file.
                    bar.prc = std::max(0.0001, std::round(adj * cfac[i] * 1e4) / 1e4);
                    bar.midpoint = chance(rng_, cfg_.midpoint_rate);
                    const double rounded = *bar.prc / cfac[i];
                    if (last_adj[i]) bar.ret = rounded / *last_adj[i] - 1.0;
                    last_adj[i] = rounded;
                }
                bars.push_back(bar);
            }
        }

        std::vector<SecurityMeta> meta;
        for (const auto& s : securities_) {
            SecurityMeta m;
            m.permno = s.permno;
            m.permco = s.permco;
            m.begdat = days_[s.first];
            m.hshrcd = s.hshrcd;
            m.company_name = "Synthetic " + std::to_string(id(s.permco)) +
                             (s.hshrcd == 11 ? " Inc" : ", Class B");
            m.us_domiciled = companies_[s.company].us;
            meta.push_back(std::move(m));
        }
        std::sort(script_.ipos.begin(), script_.ipos.end(),
                  [](const ScriptedIpo& a, const ScriptedIpo& b) { return a.permno < b.permno; });
        return {BarTable(std::move(bars)), MetaTable(std::move(meta)), script_};
    }

    const UniverseConfig& cfg_;
    Rng rng_;
    std::vector<Date> days_;
    std::vector<Window> windows_;
    std::vector<Company> companies_;
    std::vector<Security> securities_;
    EventScript script_;
    std::int32_t next_permno_ = 10001;
    std::int32_t next_permco_ = 20001;
};

bool every_rank_day_eligible(const Universe& u, const UniverseConfig& cfg,
                             const TradingCalendar& cal) {
    const IndexParams params;
    for (int y = cfg.first_year; y <= cfg.last_year; ++y) {
        const auto caps = company_caps(u.bars, u.meta, annual_rank_day(y, cal));
        if (eligibility_filter(caps.companies, u.meta, params).empty()) return false;
    }
    return true;
}

}  // namespace

Universe generate_universe(const UniverseConfig& config, const TradingCalendar& cal) {
    config.validate();
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const std::uint64_t seed =
            attempt == 0 ? config.seed : stats::mix_seed(config.seed, static_cast<std::uint64_t>(attempt));
        Universe u = Generator(config, cal, seed).run();
        if (every_rank_day_eligible(u, config, cal)) {
            u.script.seed = seed;
            u.script.attempts = attempt + 1;
            return u;
        }
    }
    throw UsageError("could not generate a universe with an eligible company on every rank day");
}

std::string EventScript::to_json() const {
    using nlohmann::json;
    json j;
    j["seed"] = seed;
    j["attempts"] = attempts;
    j["ipos"] = json::array();
    for (const auto& i : ipos) {
        j["ipos"].push_back({{"permno", id(i.permno)},
                             {"permco", id(i.permco)},
                             {"first_bar", format_date(i.first_bar)},
                             {"new_company", i.new_company},
                             {"window", i.window ? json(*i.window) : json(nullptr)}});
    }
    j["delistings"] = json::array();
    for (const auto& d : delistings) {
        j["delistings"].push_back(
            {{"permno", id(d.permno)}, {"permco", id(d.permco)}, {"last_bar", format_date(d.last_bar)}});
    }
    j["splits"] = json::array();
    for (const auto& s : splits) {
        j["splits"].push_back(
            {{"permno", id(s.permno)}, {"date", format_date(s.date)}, {"ratio", s.ratio}});
    }
    j["halts"] = json::array();
    for (const auto& h : halts) {
        j["halts"].push_back(
            {{"permno", id(h.permno)}, {"first", format_date(h.first)}, {"days", h.days}});
    }
    return j.dump(2);
}

}  // namespace recon::synth
