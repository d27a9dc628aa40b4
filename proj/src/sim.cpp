#include "qrng/sim.hpp"

#include "qrng/entropy.hpp"
#include "qrng/error.hpp"
#include "qrng/parallel.hpp"
#include "qrng/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qrng {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct AnalogTrace {
    std::vector<double> volts; // decimated, DC removed
    double variance = 0.0;
};

/// Steps 1-6 of the chain: phase diffusion, delay-line difference, photocurrent,
/// electronic noise, TIA low-pass, decimation. Returns DC-free voltages.
AnalogTrace run_analog(const SimulationRun& run, std::size_t n_samples, std::uint64_t seed) {
    const auto& chain = run.chain;
    const double dt = run.internal_step();
    const std::size_t delay = run.delay_steps();
    const auto osf = static_cast<std::size_t>(run.oversample_factor);

    const double alpha = std::exp(-kTwoPi * chain.tia_cutoff_hz * dt);
    const double one_minus_alpha = 1.0 - alpha;
    const double white_gain = tia_variance_gain(alpha, 1);
    const double signal_gain = tia_variance_gain(alpha, delay);

    const double p_emit = run.model.power_p;
    const double p_det = run.interferometer_power();
    const bool optical = p_emit > 0.0 && p_det > 0.0;
    // Per-step phase increment chosen so that the delay-line difference has exactly
    // the variance (q/P + c) * Td over the configured delay.
    const double phase_var_td = optical ? phase_difference_variance(run.model, chain.delay_td) : 0.0;
    const double step_sd = std::sqrt(phase_var_td / static_cast<double>(delay));
    const double amplitude = optical ? std::sqrt(chain.conversion_gain_a / signal_gain) * p_det : 0.0;
    const double noise_sd = std::sqrt(chain.electronic_noise_f / white_gain);
    const bool phase_active = optical && step_sd > 0.0;
    const bool noise_active = noise_sd > 0.0;

    GaussianSource phase_noise(derive_seed(seed, 0));
    GaussianSource electronic(derive_seed(seed, 1));

    // Ring buffer holding theta over the last `delay` steps.
    std::vector<double> history(delay, 0.0);
    std::size_t head = 0;
    double theta = 0.0;
    double filtered = 0.0;
    const double bias = chain.quadrature_offset;

    auto step = [&]() {
        double current = 0.0;
        if (optical) {
            if (phase_active) theta += step_sd * phase_noise();
            const double delta = theta - history[head];
            history[head] = theta;
            head = (head + 1 == delay) ? 0 : head + 1;
            current = amplitude * std::sin(delta + bias);
        }
        if (noise_active) current += noise_sd * electronic();
        filtered = alpha * filtered + one_minus_alpha * current;
    };

    // Fill the delay line, then let the filter forget its zero initial state.
    const auto settle = static_cast<std::size_t>(std::ceil(20.0 / std::max(one_minus_alpha, 1e-12)));
    for (std::size_t i = 0; i < delay + settle; ++i) step();

    AnalogTrace trace;
    trace.volts.resize(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t k = 0; k < osf; ++k) step();
        trace.volts[s] = filtered;
    }

    if (!chain.rf_tones.empty()) {
        for (std::size_t s = 0; s < n_samples; ++s) {
            const double t = static_cast<double>(s) / chain.sample_rate_hz;
            for (const auto& tone : chain.rf_tones) trace.volts[s] += tone.amplitude_v * std::sin(kTwoPi * tone.frequency_hz * t);
        }
    }

    // Ideal DC removal over the block.
    double mean = 0.0;
    for (double v : trace.volts) mean += v;
    mean /= static_cast<double>(std::max<std::size_t>(n_samples, 1));
    double acc = 0.0;
    for (double& v : trace.volts) {
        v -= mean;
        acc += v * v;
    }
    trace.variance = n_samples > 0 ? acc / static_cast<double>(n_samples) : 0.0;
    return trace;
}

} // namespace

void SimulationRun::validate() const {
    model.validate();
    chain.validate();
    if (!(optical_transmission > 0.0) || optical_transmission > 1.0) {
        throw DomainError("simulation: optical transmission must be in (0, 1]");
    }
    if (oversample_factor < 4) throw DomainError("simulation: oversample_factor must be >= 4");
    if (!(internal_step() < chain.delay_td)) {
        throw DomainError("simulation: internal step must be shorter than the interferometer delay");
    }
    if (!(duration >= chain.delay_td) || sample_count() == 0) {
        throw DomainError("simulation: duration too short to fill the delay buffer");
    }
    if (adc_sigma_v && !(*adc_sigma_v > 0.0)) throw DomainError("sigma_configured must be positive");
}

double SimulationRun::internal_step() const {
    return 1.0 / (chain.sample_rate_hz * static_cast<double>(oversample_factor));
}

std::size_t SimulationRun::delay_steps() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(chain.delay_td / internal_step())));
}

std::size_t SimulationRun::sample_count() const {
    return static_cast<std::size_t>(std::floor(duration * chain.sample_rate_hz + 1e-9));
}

double tia_variance_gain(double alpha, std::size_t delay_steps) {
    // y_k = alpha y_{k-1} + (1 - alpha) x_k. For x a moving sum of L white
    // increments the input autocovariance is (L - |m|) per unit increment variance.
    const auto l = static_cast<double>(delay_steps);
    double corr = l;
    double a_pow = 1.0;
    for (std::size_t m = 1; m < delay_steps; ++m) {
        a_pow *= alpha;
        corr += 2.0 * a_pow * (l - static_cast<double>(m));
    }
    return (1.0 - alpha) / (1.0 + alpha) * corr / l;
}

SimulationOutput simulate_detailed(const SimulationRun& run) {
    run.validate();
    const auto n = run.sample_count();

    SimulationOutput out;
    if (run.adc_sigma_v) {
        out.sigma_configured = *run.adc_sigma_v;
    } else {
        const auto pilot = run_analog(run, kPilotSamples, derive_seed(run.seed, 1));
        out.sigma_configured = std::sqrt(pilot.variance);
    }
    if (!(out.sigma_configured > 0.0)) throw ComputeError("sigma_configured must be positive");

    const auto trace = run_analog(run, n, derive_seed(run.seed, 0));
    out.analog_variance = trace.variance;

    auto& block = out.block;
    block.adc_bits = run.chain.adc_bits;
    block.sample_rate_hz = run.chain.sample_rate_hz;
    block.adc_scale = 2.0 * run.chain.adc_range_sigmas * out.sigma_configured / std::ldexp(1.0, run.chain.adc_bits);
    block.origin = SampleOrigin::simulated;
    block.rng_seed = run.seed;
    block.samples.resize(n);

    const double lo = block.min_code();
    const double hi = block.max_code();
    const double inv_scale = 1.0 / block.adc_scale;
    for (std::size_t i = 0; i < n; ++i) {
        const double code = std::floor(trace.volts[i] * inv_scale);
        if (code < lo || code > hi) ++out.saturated;
        block.samples[i] = static_cast<std::int16_t>(std::clamp(code, lo, hi));
    }
    return out;
}

SampleBlock simulate(const SimulationRun& run) { return simulate_detailed(run).block; }

std::vector<FringePoint> simulate_fringe_scan(const SimulationRun& run, std::span<const double> phi2_values) {
    if (phi2_values.size() < 8) throw DomainError("fringe scan: need at least 8 phase points");
    run.validate();
    std::vector<FringePoint> fringe(phi2_values.size());
    parallel_for(phi2_values.size(), [&](std::size_t i) {
        SimulationRun sub = run;
        sub.chain.quadrature_offset = run.chain.quadrature_offset + phi2_values[i] - std::numbers::pi / 2.0;
        sub.seed = derive_seed(run.seed, 1000 + i);
        const auto block = simulate(sub);
        fringe[i] = {phi2_values[i], sample_variance_v2(block), block.samples.size()};
    });
    return fringe;
}

std::vector<double> fringe_grid(double centre, std::size_t points) {
    if (points < 2) throw DomainError("fringe grid: need at least two points");
    std::vector<double> grid(points);
    const double step = std::numbers::pi / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) grid[i] = centre - std::numbers::pi / 2.0 + step * static_cast<double>(i);
    return grid;
}

void DriftScenario::validate() const {
    if (!std::isfinite(phase_drift_rate)) throw DomainError("drift scenario: phase drift rate must be finite");
    if (recalibration_period && !(*recalibration_period > 0.0)) {
        throw DomainError("drift scenario: recalibration period must be positive");
    }
}

std::vector<StabilityPoint> simulate_stability(const SimulationRun& run, const DriftScenario& scenario,
                                               double total_time, double report_interval,
                                               const StabilitySettings& settings) {
    run.validate();
    scenario.validate();
    if (!(report_interval > 0.0) || !(total_time >= 10.0 * report_interval)) {
        throw DomainError("stability: total_time must cover at least 10 report intervals");
    }

    const VarianceFit truth = implied_fit(run.model, run.chain);
    const double quadrature = std::numbers::pi / 2.0;
    double applied_phi2 = quadrature;
    double next_recal = scenario.recalibration_period.value_or(0.0);
    bool recal_pending = false;

    SimulationRun base = run;
    std::optional<double> reference_sigma = run.adc_sigma_v;

    auto configure = [&](double t, std::uint64_t stream) {
        SimulationRun sub = base;
        sub.model.power_p = run.model.power_p * scenario.power_factor(t);
        sub.chain.quadrature_offset = run.chain.quadrature_offset + applied_phi2 - quadrature + scenario.phase_drift_rate * t;
        sub.adc_sigma_v = reference_sigma;
        sub.seed = derive_seed(run.seed, stream);
        return sub;
    };

    const auto n_reports = static_cast<std::size_t>(std::floor(total_time / report_interval + 1e-9)) + 1;
    std::vector<StabilityPoint> series;
    series.reserve(n_reports);
    std::uint64_t stream = 0;
    for (std::size_t r = 0; r < n_reports; ++r) {
        const double t = static_cast<double>(r) * report_interval;

        while (scenario.recalibration_period && next_recal <= t) {
            SimulationRun scan = configure(next_recal, 1'000'000 + stream++);
            scan.duration = std::max(run.duration * settings.fringe_duration_fraction, scan.chain.delay_td);
            // The scan varies the applied phase around its current value.
            scan.chain.quadrature_offset -= applied_phi2 - quadrature;
            const auto grid = fringe_grid(applied_phi2, settings.fringe_points);
            const auto fringe = simulate_fringe_scan(scan, grid);
            applied_phi2 = find_quadrature(fringe);
            next_recal += *scenario.recalibration_period;
            recal_pending = true;
        }

        const auto sub = configure(t, stream++);
        const auto out = simulate_detailed(sub);
        if (!reference_sigma) reference_sigma = out.sigma_configured;
        const double half = run.chain.adc_range_sigmas * *reference_sigma;
        const VoltageRange range{-half, half};

        StabilityPoint point;
        point.time = t;
        point.variance = sample_variance_v2(out.block);
        point.applied_phi2 = applied_phi2;
        point.recalibrated = recal_pending;
        recal_pending = false;

        // Quantum share of the phase-noise variance at the current power.
        const double p = sub.interferometer_power();
        const double phase_part = std::max(point.variance - truth.f, 0.0);
        const double denom = truth.ac * p + truth.aq;
        const double sigma_q_sq = denom > 0.0 ? phase_part * truth.aq / denom : 0.0;
        point.min_entropy = sigma_q_sq > 0.0 ? min_entropy_gaussian(std::sqrt(sigma_q_sq), range, run.chain.adc_bits) : 0.0;
        series.push_back(point);
    }
    return series;
}

} // namespace qrng
