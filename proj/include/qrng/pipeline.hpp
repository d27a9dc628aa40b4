#pragma once

#include "qrng/calib.hpp"
#include "qrng/config.hpp"
#include "qrng/extract.hpp"
#include "qrng/stats.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace qrng {

/// Exit statuses shared by the command functions and the CLI.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitStatistical = 2 };

/// Uniformity floor applied to every test's p-value histogram.
inline constexpr double kUniformityFloor = 1e-4;

struct QcnrRow {
    double power = 0.0;                ///< W at the interferometer
    double variance = 0.0;             ///< V^2, direct
    double variance_attenuated = 0.0;  ///< V^2, same power reached by attenuating a strong beam
    double qcnr_fit = 0.0;
    double qcnr_attenuation = 0.0;
};

struct CalibrationResult {
    std::vector<FringePoint> fringe;
    double quadrature_phi2 = 0.0;
    std::vector<PowerSweepPoint> sweep;
    VarianceFit fit;
    OptimalPower optimum;
    std::vector<QcnrRow> qcnr;
};

/// Fringe scan at the configured power, then a direct and an attenuated
/// acquisition at every sweep power with the bias held at the located quadrature.
CalibrationResult run_calibration(const Config& config);

/// Variance expected from a run: conversion gain times the detected power squared
/// times the phase-difference variance, scaled by the bias, plus the electronic floor.
double expected_variance(const SimulationRun& run);

struct PipelineResult {
    CalibrationResult calibration;
    double operating_power = 0.0;
    EntropyReport entropy;
    SampleBlock raw;
    std::size_t n_out = 0;
    BitStream bits;
    std::size_t nist_sequences = 0;
    std::vector<TestReport> nist;
    std::vector<double> acf_raw;
    std::vector<double> acf_bits;
    std::vector<PsdPoint> psd;
    double generation_rate_bps = 0.0;
    bool statistical_pass = false;
};

/// calibrate -> entropy estimate -> acquisition -> Toeplitz extraction -> tests.
PipelineResult run_pipeline(const Config& config, std::size_t n_output_bits);

int cmd_simulate(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_calibrate(const Config& config, const std::filesystem::path& out, std::ostream& log);
int cmd_pipeline(const Config& config, std::size_t n_output_bits, const std::filesystem::path& out, std::ostream& log);
int cmd_stability(const Config& config, const std::filesystem::path& out, std::ostream& log);

} // namespace qrng
