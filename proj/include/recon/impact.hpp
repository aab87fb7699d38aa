#pragma once

#include "recon/date.hpp"
#include "recon/market_data.hpp"
#include "recon/reconstitution.hpp"
#include "recon/stats.hpp"
#include "recon/trading_calendar.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recon {

enum class GroupTag {
    AnnualAddition,
    AnnualDeletion,
    QuarterlyAdditionRetained,
    NewAddition,
    Incumbent,
    QuarterlyAddition,
};
const char* to_string(GroupTag g);

// Log-return pair for one security around one event. p0, p1 and p2 are the
// adjusted prices at the anchor day, one month and two months later.
struct ImpactSample {
    Permno permno{};
    Date event_date{};
    Date d0{}, d1{}, d2{};
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    double r_temp = 0.0;  // ln p1 - ln p2
    double r_perm = 0.0;  // ln p2 - ln p0
    GroupTag group = GroupTag::AnnualAddition;
};

// Throws std::domain_error unless all three prices are positive.
ImpactSample impact_sample(double p0, double p1, double p2);

inline constexpr int kMaxSnapTradingDays = 5;

struct SnappedPrice {
    Date date{};
    double price = 0.0;  // adjusted
};

// Adjusted price of `permno` on the latest trading day at or before `target`
// with a priced bar, at most five trading days back. `why` receives the
// reason when nothing qualifies.
std::optional<SnappedPrice> snap_price(const BarTable& bars, const TradingCalendar& cal,
                                       Permno permno, Date target, std::string* why = nullptr);

struct DroppedSample {
    Permno permno{};
    Date event_date{};
    std::string reason;
};

struct SampleSet {
    std::vector<ImpactSample> samples;
    std::vector<DroppedSample> dropped;
};

// Samples anchored at `anchor` with windows at +1 and +2 calendar months.
SampleSet measure_impact(const BarTable& bars, const TradingCalendar& cal,
                         std::span<const Permno> permnos, Date anchor, GroupTag group);

// Mean and standard error, in percent.
struct ImpactRow {
    int year = 0;
    std::string group;  // "additions" or "deletions"
    double mean_temp = 0.0;
    double se_temp = 0.0;
    double mean_perm = 0.0;
    double se_perm = 0.0;
    std::size_t n = 0;
};

ImpactRow summarize(int year, const std::string& group, std::span<const ImpactSample> samples);

struct ImpactTable {
    ImpactRow additions;
    ImpactRow deletions;
    SampleSet addition_samples;
    SampleSet deletion_samples;
};

// Securities of companies entering T3 at the annual reconstitution of `year`
// (excluding the previous cycle's quarterly additions) and of companies
// leaving it, measured from the annual rank day.
std::vector<Permno> annual_additions(const MembershipTimeline& timeline, int year);
std::vector<Permno> annual_deletions(const MembershipTimeline& timeline, int year);
ImpactTable annual_impact_table(const MembershipTimeline& timeline, const BarTable& bars,
                                const TradingCalendar& cal, int year);

struct GroupPair {
    std::vector<Permno> first;
    std::vector<Permno> second;
};

// first: quarterly additions of cycle year - 1 still in T3 after the annual
// reconstitution of `year`; second: the other annual additions of `year`.
GroupPair annual_groups(const MembershipTimeline& timeline, int year);

// first: the quarter's T3 additions; second: T3 members whose tier set is the
// same at the two most recent annual reconstitutions.
GroupPair quarterly_groups(const MembershipTimeline& timeline, int cycle_year, QuarterLabel q);

enum class ImpactMeasure { Permanent, Temporary };
const char* to_string(ImpactMeasure m);

std::vector<double> values_of(std::span<const ImpactSample> samples, ImpactMeasure measure);

// z and y samples of one crowding comparison.
struct CrowdingSamples {
    std::string label;
    SampleSet z;
    SampleSet y;
};

CrowdingSamples annual_crowding_samples(const MembershipTimeline& timeline, const BarTable& bars,
                                        const TradingCalendar& cal, int year);
CrowdingSamples quarterly_crowding_samples(const MembershipTimeline& timeline,
                                           const BarTable& bars, const TradingCalendar& cal,
                                           int cycle_year, QuarterLabel q);

stats::TestCase crowding_case(const CrowdingSamples& s, ImpactMeasure measure);

// CSV `year,group,mean_temp,se_temp,mean_perm,se_perm,n`.
void write_impact_rows(std::span<const ImpactRow> rows, std::ostream& out);
// Table layout: percentages to one decimal, standard error in parentheses.
void write_impact_table(std::span<const ImpactTable> tables, std::ostream& out);
// Rows of the CSV `event,permno,group_tag` (header not included).
void write_group_roster(const std::string& event, std::span<const Permno> permnos, GroupTag tag,
                        std::ostream& out);

}  // namespace recon
