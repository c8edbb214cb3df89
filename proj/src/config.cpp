#include "geostyle/config.hpp"

#include "geostyle/error.hpp"

#include <fstream>
#include <sstream>

namespace geostyle {

namespace {

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: bad integer value for " + key + ": '" + value + "'");
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "alpha") events.alpha = to_double(key, value);
    else if (key == "c") events.c = to_double(key, value);
    else if (key == "b") events.b = to_double(key, value);
    else if (key == "delta_max") events.delta_max = to_int(key, value);
    else if (key == "d_max") events.d_max = to_int(key, value);
    else if (key == "year_weeks") events.year_weeks = to_int(key, value);
    else if (key == "max_outliers_exact")
        events.max_outliers_exact = static_cast<std::size_t>(to_int(key, value));
    else if (key == "min_weeks") fit.min_weeks = static_cast<std::size_t>(to_int(key, value));
    else if (key == "gtol") fit.solver.gtol = to_double(key, value);
    else if (key == "xtol") fit.solver.xtol = to_double(key, value);
    else if (key == "max_iter") fit.solver.max_iter = static_cast<int>(to_int(key, value));
    else if (key == "omega_max") fit.bounds.omega_hi = to_double(key, value);
    else if (key == "omega_min") fit.bounds.omega_lo = to_double(key, value);
    else if (key == "k_max") fit.bounds.k_hi = to_double(key, value);
    else if (key == "max_lag") baseline.max_lag = static_cast<int>(to_int(key, value));
    else if (key == "holdout_fraction") baseline.holdout_fraction = to_double(key, value);
    else if (key == "min_total") min_total = to_int(key, value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "threads") threads = static_cast<unsigned>(to_int(key, value));
    else if (key == "kernels") kernels = value;
    else throw ParseError("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["alpha"] = format_double(events.alpha);
    m["c"] = format_double(events.c);
    m["b"] = format_double(events.b);
    m["delta_max"] = std::to_string(events.delta_max);
    m["d_max"] = std::to_string(events.d_max);
    m["year_weeks"] = std::to_string(events.year_weeks);
    m["max_outliers_exact"] = std::to_string(events.max_outliers_exact);
    m["min_weeks"] = std::to_string(fit.min_weeks);
    m["gtol"] = format_double(fit.solver.gtol);
    m["xtol"] = format_double(fit.solver.xtol);
    m["max_iter"] = std::to_string(fit.solver.max_iter);
    m["omega_max"] = format_double(fit.bounds.omega_hi);
    m["omega_min"] = format_double(fit.bounds.omega_lo);
    m["k_max"] = format_double(fit.bounds.k_hi);
    m["max_lag"] = std::to_string(baseline.max_lag);
    m["holdout_fraction"] = format_double(baseline.holdout_fraction);
    m["min_total"] = std::to_string(min_total);
    m["seed"] = std::to_string(seed);
    m["threads"] = std::to_string(threads);
    m["kernels"] = kernels;
    return m;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        // trim
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

} // namespace geostyle
