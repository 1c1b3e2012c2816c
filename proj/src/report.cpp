#include "arfp/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <Eigen/Core>
#include <opencv2/core/version.hpp>

#include "arfp/errors.hpp"

namespace arfp {

std::string artifact_version() { return "0.1.0"; }

MetricsReport::MetricsReport(std::string experiment, std::string config_hash, int image_size)
    : experiment_(std::move(experiment)), config_hash_(std::move(config_hash)), image_size_(image_size) {}

void MetricsReport::add(const std::string& condition, const std::string& metric, double value,
                        const std::string& units, std::uint64_t seed) {
    rows_.push_back({condition, metric, value, units, seed, config_hash_});
}

bool MetricsReport::has(const std::string& condition, const std::string& metric) const {
    for (const MetricRow& r : rows_)
        if (r.condition == condition && r.metric == metric) return true;
    return false;
}

double MetricsReport::value(const std::string& condition, const std::string& metric) const {
    for (const MetricRow& r : rows_)
        if (r.condition == condition && r.metric == metric) return r.value;
    throw std::out_of_range("report has no row " + condition + "/" + metric);
}

nlohmann::json MetricsReport::header() const {
    return {{"experiment", experiment_},
            {"config_hash", config_hash_},
            {"image_size", image_size_},
            {"pixel_domain", "model inputs in [-1,1]; PSNR and SSIM computed in [0,1]"},
            {"versions",
             {{"artifact", artifact_version()},
              {"compiler", __VERSION__},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"opencv", CV_VERSION}}}};
}

namespace {

std::string number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const MetricRow& r : rows_) {
        nlohmann::json v = std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json(number(r.value));
        rows.push_back({{"condition", r.condition},
                        {"metric", r.metric},
                        {"value", v},
                        {"units", r.units},
                        {"seed", r.seed},
                        {"config_hash", r.config_hash}});
    }
    return {{"header", header()}, {"rows", rows}};
}

std::string MetricsReport::to_csv() const {
    std::string out;
    const nlohmann::json h = header();
    for (const auto& [k, v] : h.items()) out += "# " + k + ": " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    out += "condition,metric,value,units,seed,config_hash\n";
    for (const MetricRow& r : rows_)
        out += r.condition + "," + r.metric + "," + number(r.value) + "," + r.units + "," + std::to_string(r.seed) + "," +
               r.config_hash + "\n";
    return out;
}

void MetricsReport::write(const std::string& dir, const std::string& stem) const {
    std::filesystem::create_directories(dir);
    const std::string csv = dir + "/" + stem + ".csv", js = dir + "/" + stem + ".json";
    std::ofstream c(csv);
    if (!c) throw IoError("cannot write report", csv);
    c << to_csv();
    std::ofstream j(js);
    if (!j) throw IoError("cannot write report", js);
    j << to_json().dump(2) << "\n";
}

void MetricsReport::append(const MetricsReport& other) {
    rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

}  // namespace arfp
