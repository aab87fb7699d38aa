#pragma once

#include "recon/reconstitution.hpp"
#include "recon/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace recon::cli {

struct RunConfig {
    std::filesystem::path bars;
    std::filesystem::path meta;
    std::optional<std::filesystem::path> holidays;
    std::optional<std::filesystem::path> reference;  // daily return series for `compare`
    std::filesystem::path out = "out";
    int first_year = 2005;
    int last_year = 2009;
    IndexParams params;
    Tier tier = Tier::T3;
    std::size_t t3m_window = 63;
    std::size_t max_lag = 20;
    std::size_t bins = 50;
    std::size_t boot_n = 10000;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    synth::UniverseConfig synth;

    // Throws UsageError on an invalid year range, alpha or index sizes.
    void validate() const;
};

// `key = value` lines; '#' starts a comment. Relative paths are resolved
// against `base`. Throws UsageError on unknown keys or bad values.
RunConfig parse_config(std::span<const std::string> lines, const std::filesystem::path& base);
RunConfig load_config(const std::filesystem::path& path);

// Runs one subcommand. Returns 0 on success, 1 on a usage error and 2 on a
// data error; messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace recon::cli
