#pragma once

#include "geostyle/baselines.hpp"
#include "geostyle/events.hpp"
#include "geostyle/trend.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace geostyle {

/// Every tunable constant of the pipeline in one place. Defaults are the
/// reference values; a key=value config file (GEOTREND_CONFIG or --config)
/// overrides them, and command-line flags override the file.
struct RunConfig {
    EventConfig events;
    FitOptions fit;
    BaselineOptions baseline;
    std::int64_t min_total = 1;
    std::uint64_t seed = 17;
    unsigned threads = 0; // 0 = hardware concurrency
    std::string kernels = "auto";

    /// Applies one key=value pair; throws ParseError for unknown keys or
    /// unparsable values.
    void set(const std::string& key, const std::string& value);

    /// Ordered key=value view of the effective configuration.
    std::map<std::string, std::string> to_map() const;
};

/// Parses a config file of '#' comments and key=value lines.
RunConfig load_config_file(const std::string& path, RunConfig base = {});

} // namespace geostyle
