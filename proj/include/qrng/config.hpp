#pragma once

#include "qrng/error.hpp"
#include "qrng/sim.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qrng {

struct CalibrationConfig {
    std::vector<double> powers;  ///< W at the interferometer, one sweep point each
    std::size_t samples_per_point = 1'000'000;
    std::size_t fringe_points = 17;
    std::size_t fringe_samples = 100'000;
    /// Laser power of the classical-regime reference used by the attenuation method.
    double attenuation_source_power = 0.1;
    bool weighted_fit = false;

    bool operator==(const CalibrationConfig&) const = default;
};

struct EntropyConfig {
    double security_eps = 0x1p-50;
    std::optional<double> min_entropy_override;

    bool operator==(const EntropyConfig&) const = default;
};

struct ExtractorConfig {
    std::size_t n_in = 4096;
    std::optional<std::size_t> n_out; ///< defaults to floor(extraction_ratio * n_in)
    std::uint64_t seed = 0;

    bool operator==(const ExtractorConfig&) const = default;
};

struct StatsConfig {
    std::size_t n_sequences = 100;
    std::size_t seq_len_bits = 100'000;
    std::size_t max_lag = 100;
    std::size_t psd_segment = 1024;

    bool operator==(const StatsConfig&) const = default;
};

struct StabilityConfig {
    double phase_drift_rate = 0.0;           ///< rad/s
    double power_drift_amplitude = 0.0;      ///< relative, sinusoidal
    double power_drift_period = 600.0;       ///< s
    std::optional<double> recalibration_period = 120.0; ///< s; absent disables the recalibrated run
    double total_time = 3600.0;
    double report_interval = 60.0;
    std::size_t fringe_points = 17;

    DriftScenario scenario(bool with_recalibration) const;
    bool operator==(const StabilityConfig&) const = default;
};

/// Everything a CLI command needs. All randomness flows from run.seed and extractor.seed.
struct Config {
    SimulationRun run;
    CalibrationConfig calibration;
    EntropyConfig entropy;
    ExtractorConfig extractor;
    StatsConfig stats;
    std::optional<StabilityConfig> stability;

    void validate() const;
};

/// Parse or validation failure, with the 1-based line of the offending node when known.
class ConfigError : public DomainError {
  public:
    ConfigError(const std::string& message, int line);
    int line() const { return line_; }

  private:
    int line_;
};

Config parse_config(const std::string& yaml_text);
Config load_config(const std::filesystem::path& path);

/// Canonical YAML form: fixed key order, shortest round-trip number formatting.
std::string to_yaml(const Config& config);

bool operator==(const SimulationRun& a, const SimulationRun& b);

} // namespace qrng
