#pragma once

// Metric rows keyed by experiment condition, written as CSV and JSON.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace arfp {

struct MetricRow {
    std::string condition;
    std::string metric;
    double value = 0.0;
    std::string units;
    std::uint64_t seed = 0;
    std::string config_hash;
};

class MetricsReport {
public:
    MetricsReport(std::string experiment, std::string config_hash, int image_size);

    void add(const std::string& condition, const std::string& metric, double value, const std::string& units,
             std::uint64_t seed);
    // Value of the first row with this condition and metric; throws if absent.
    double value(const std::string& condition, const std::string& metric) const;
    bool has(const std::string& condition, const std::string& metric) const;

    const std::vector<MetricRow>& rows() const { return rows_; }
    nlohmann::json header() const;
    nlohmann::json to_json() const;
    // Header lines start with '#'. Infinite values are written as "inf".
    std::string to_csv() const;
    // Writes <dir>/<stem>.csv and <dir>/<stem>.json.
    void write(const std::string& dir, const std::string& stem) const;
    void append(const MetricsReport& other);

private:
    std::string experiment_, config_hash_;
    int image_size_;
    std::vector<MetricRow> rows_;
};

std::string artifact_version();

}  // namespace arfp
