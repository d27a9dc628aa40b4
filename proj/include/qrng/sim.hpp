#pragma once

#include "qrng/calib.hpp"
#include "qrng/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace qrng {

/// One acquisition: laser -> unbalanced interferometer -> photodiode/TIA -> ADC.
struct SimulationRun {
    LaserNoiseModel model;
    SignalChainConfig chain;
    double duration = 2e-3;    ///< s of acquired signal (warm-up excluded)
    int oversample_factor = 8; ///< internal steps per output sample, >= 4
    std::uint64_t seed = 0;

    /// Fraction of the emitted power reaching the interferometer. Phase noise is set by
    /// the emitted power; the signal amplitude by the transmitted power.
    double optical_transmission = 1.0;

    /// Fixed ADC reference sigma in volts. When absent it is measured on a pilot run.
    std::optional<double> adc_sigma_v;

    void validate() const;
    double interferometer_power() const { return model.power_p * optical_transmission; }
    double internal_step() const;
    std::size_t delay_steps() const;
    std::size_t sample_count() const;
};

struct SimulationOutput {
    SampleBlock block;
    double sigma_configured = 0.0; ///< V, ADC full scale is +/- adc_range_sigmas times this
    double analog_variance = 0.0;  ///< V^2, before quantization
    std::size_t saturated = 0;     ///< samples clipped by the ADC
};

/// Pilot length used to set the ADC range when none is given.
inline constexpr std::size_t kPilotSamples = 100'000;

SimulationOutput simulate_detailed(const SimulationRun& run);
SampleBlock simulate(const SimulationRun& run);

/// Variance gain of the single-pole TIA model for a white input (L = 1) or for a
/// moving sum of L white increments, normalized to the input variance.
double tia_variance_gain(double alpha, std::size_t delay_steps);

/// One independently seeded sub-run per phase value. The applied phase adds to the
/// chain's own bias; quadrature sits at phi2 = pi/2 for an unbiased chain.
std::vector<FringePoint> simulate_fringe_scan(const SimulationRun& run, std::span<const double> phi2_values);

/// Evenly spaced phases covering [centre - pi/2, centre + pi/2].
std::vector<double> fringe_grid(double centre, std::size_t points);

struct DriftScenario {
    double phase_drift_rate = 0.0; ///< rad/s added to the interferometer bias
    /// Relative power multiplier as a function of time; empty means constant.
    std::function<double(double)> power_drift;
    std::optional<double> recalibration_period; ///< s

    void validate() const;
    double power_factor(double t) const { return power_drift ? power_drift(t) : 1.0; }
};

struct StabilitySettings {
    std::size_t fringe_points = 17;
    double fringe_duration_fraction = 0.25; ///< fringe sub-run length relative to run.duration
};

struct StabilityPoint {
    double time = 0.0;
    double variance = 0.0;     ///< V^2
    double applied_phi2 = 0.0; ///< rad
    double min_entropy = 0.0;  ///< bits/sample
    bool recalibrated = false; ///< a recalibration happened since the previous point
};

/// Slow-drift time series. Each report point is a sub-run of run.duration at the
/// bias and power in force at that time; recalibration re-centres the bias with a
/// fringe scan. The ADC range stays at the value measured at t = 0.
std::vector<StabilityPoint> simulate_stability(const SimulationRun& run, const DriftScenario& scenario,
                                               double total_time, double report_interval,
                                               const StabilitySettings& settings = {});

} // namespace qrng
