#include "qrng/pipeline.hpp"

#include "qrng/entropy.hpp"
#include "qrng/error.hpp"
#include "qrng/io.hpp"
#include "qrng/parallel.hpp"
#include "qrng/rng.hpp"
#include "qrng/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

namespace qrng {

namespace {

using nlohmann::json;

std::filesystem::path with_suffix(const std::filesystem::path& out, const char* suffix) {
    return std::filesystem::path(out.string() + suffix);
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError(IoErrorKind::sink_failure, "cannot open " + path.string() + " for writing");
    return f;
}

double duration_for(std::size_t samples, double rate) { return (static_cast<double>(samples) + 0.5) / rate; }

json fit_json(const VarianceFit& fit) {
    return {{"ac", fit.ac}, {"aq", fit.aq}, {"f", fit.f}, {"r_squared", fit.r_squared}};
}

json entropy_json(const EntropyReport& e) {
    return {{"qcnr", e.qcnr},
            {"sigma_sq_total", e.sigma_sq_total},
            {"sigma_sq_quantum", e.sigma_sq_quantum},
            {"min_entropy_bits", e.min_entropy_bits},
            {"samples_bits", e.samples_bits},
            {"extraction_ratio", e.extraction_ratio}};
}

json calibration_json(const CalibrationResult& cal) {
    json rows = json::array();
    for (const auto& r : cal.qcnr) {
        rows.push_back({{"power", r.power},
                        {"variance", r.variance},
                        {"variance_attenuated", r.variance_attenuated},
                        {"qcnr_fit", r.qcnr_fit},
                        {"qcnr_attenuation", r.qcnr_attenuation}});
    }
    return {{"fit", fit_json(cal.fit)},
            {"quadrature_phi2", cal.quadrature_phi2},
            {"optimal_power", cal.optimum.power},
            {"optimal_qcnr", cal.optimum.qcnr},
            {"sweep", rows}};
}

void write_qcnr_csv(std::ostream& out, const CalibrationResult& cal) {
    out << "power_w,variance_v2,variance_attenuated_v2,qcnr_fit,qcnr_attenuation\n";
    out.precision(10);
    for (const auto& r : cal.qcnr) {
        out << r.power << ',' << r.variance << ',' << r.variance_attenuated << ',' << r.qcnr_fit << ','
            << r.qcnr_attenuation << '\n';
    }
}

void write_fringe_csv(std::ostream& out, const std::vector<FringePoint>& fringe) {
    out << "phi2_rad,variance_v2,n_samples\n";
    out.precision(10);
    for (const auto& p : fringe) out << p.phi2 << ',' << p.variance << ',' << p.n_samples << '\n';
}

// Bias the chain to the phase found by the fringe scan.
SimulationRun at_phase(const SimulationRun& run, double phi2) {
    SimulationRun biased = run;
    biased.chain.quadrature_offset = run.chain.quadrature_offset + phi2 - std::numbers::pi / 2.0;
    return biased;
}

} // namespace

CalibrationResult run_calibration(const Config& config) {
    config.validate();
    const auto& cal_cfg = config.calibration;
    if (cal_cfg.powers.empty()) throw DomainError("calibration: powers list is empty");
    const double rate = config.run.chain.sample_rate_hz;

    CalibrationResult cal;

    SimulationRun scan = config.run;
    scan.seed = derive_seed(config.run.seed, 10);
    scan.duration = duration_for(cal_cfg.fringe_samples, rate);
    scan.optical_transmission = 1.0;
    scan.adc_sigma_v.reset();
    const auto grid = fringe_grid(std::numbers::pi / 2.0, cal_cfg.fringe_points);
    cal.fringe = simulate_fringe_scan(scan, grid);
    cal.quadrature_phi2 = find_quadrature(cal.fringe);

    std::vector<double> powers = cal_cfg.powers;
    std::sort(powers.begin(), powers.end());

    SimulationRun base = at_phase(config.run, cal.quadrature_phi2);
    base.duration = duration_for(cal_cfg.samples_per_point, rate);
    base.adc_sigma_v.reset();

    const std::uint64_t direct_root = derive_seed(config.run.seed, 11);
    const std::uint64_t atten_root = derive_seed(config.run.seed, 12);
    std::vector<PowerSweepPoint> direct(powers.size());
    std::vector<PowerSweepPoint> attenuated(powers.size());
    parallel_for(2 * powers.size(), [&](std::size_t job) {
        const std::size_t i = job / 2;
        SimulationRun sub = base;
        if (job % 2 == 0) {
            sub.model.power_p = powers[i];
            sub.optical_transmission = 1.0;
            sub.seed = derive_seed(direct_root, i);
        } else {
            // Classical-dominated source, attenuated down to the same detected power.
            sub.model.power_p = std::max(cal_cfg.attenuation_source_power, powers[i]);
            sub.optical_transmission = powers[i] / sub.model.power_p;
            sub.seed = derive_seed(atten_root, i);
        }
        const auto block = simulate(sub);
        auto& point = (job % 2 == 0 ? direct : attenuated)[i];
        point = {sub.interferometer_power(), sample_variance_v2(block), block.samples.size()};
    });

    cal.sweep = direct;
    cal.fit = fit_variance_vs_power(cal.sweep, FitOptions{cal_cfg.weighted_fit});
    cal.optimum = qcnr_optimal_power(cal.fit);
    for (std::size_t i = 0; i < powers.size(); ++i) {
        QcnrRow row;
        row.power = direct[i].power;
        row.variance = direct[i].variance;
        row.variance_attenuated = attenuated[i].variance;
        row.qcnr_fit = qcnr_from_fit(cal.fit, row.power);
        row.qcnr_attenuation = qcnr_attenuation(direct[i], attenuated[i]);
        cal.qcnr.push_back(row);
    }
    return cal;
}

double expected_variance(const SimulationRun& run) {
    const auto& chain = run.chain;
    const double p_det = run.interferometer_power();
    if (run.model.power_p == 0.0 || p_det == 0.0) return chain.electronic_noise_f;
    // Gaussian phase difference of variance v through sin(. + offset).
    const double v = phase_difference_variance(run.model, chain.delay_td);
    const double o = chain.quadrature_offset;
    const double s = std::sin(o);
    const double shape = 0.5 * (1.0 - std::cos(2.0 * o) * std::exp(-2.0 * v)) - s * s * std::exp(-v);
    return chain.conversion_gain_a * p_det * p_det * shape + chain.electronic_noise_f;
}

PipelineResult run_pipeline(const Config& config, std::size_t n_output_bits) {
    if (n_output_bits == 0) throw DomainError("pipeline: n_output_bits must be positive");
    PipelineResult res;
    res.calibration = run_calibration(config);
    const auto& chain = config.run.chain;

    // Entropy estimate on a pilot acquisition at the operating point.
    SimulationRun op = at_phase(config.run, res.calibration.quadrature_phi2);
    op.seed = derive_seed(config.run.seed, 20);
    res.operating_power = op.interferometer_power();
    const auto pilot = simulate_detailed(op);
    const double half = chain.adc_range_sigmas * pilot.sigma_configured;

    EntropyInputs inputs;
    inputs.sigma_sq_total = sample_variance_v2(pilot.block);
    inputs.qcnr = qcnr_from_fit(res.calibration.fit, res.operating_power);
    inputs.adc_range = {-half, half};
    inputs.n_bits = chain.adc_bits;
    inputs.security_eps = config.entropy.security_eps;
    inputs.n_in = config.extractor.n_in;
    inputs.min_entropy_override = config.entropy.min_entropy_override;
    res.entropy = make_entropy_report(inputs);
    res.generation_rate_bps = generation_rate(res.entropy.min_entropy_bits, chain.sample_rate_hz);

    const std::size_t n_in = config.extractor.n_in;
    res.n_out = config.extractor.n_out.value_or(
        static_cast<std::size_t>(std::floor(res.entropy.extraction_ratio * static_cast<double>(n_in))));
    if (res.n_out == 0) throw ComputeError("extraction exceeds entropy budget");
    const auto seed = ToeplitzSeed::generate(n_in, res.n_out, config.extractor.seed);

    // Main acquisition, sized for the requested output and digitized with the pilot's range.
    const std::size_t blocks = (n_output_bits + res.n_out - 1) / res.n_out;
    const auto adc_bits = static_cast<std::size_t>(chain.adc_bits);
    const std::size_t samples = (blocks * n_in + adc_bits - 1) / adc_bits;
    op.seed = derive_seed(config.run.seed, 21);
    op.duration = duration_for(samples, chain.sample_rate_hz);
    op.adc_sigma_v = pilot.sigma_configured;
    res.raw = simulate(op);

    auto extracted = extract_stream(res.raw, res.entropy, seed);
    if (extracted.size() < n_output_bits) throw ComputeError("pipeline: insufficient duration for requested output");
    res.bits = BitStream(std::vector<std::uint8_t>(extracted.bytes().begin(),
                                                   extracted.bytes().begin() + static_cast<std::ptrdiff_t>((n_output_bits + 7) / 8)),
                         n_output_bits);
    res.bits.provenance = extracted.provenance;

    const auto& st = config.stats;
    res.nist_sequences = std::min(st.n_sequences, n_output_bits / st.seq_len_bits);
    if (res.nist_sequences == 0) throw DomainError("pipeline: output too short for one test sequence");
    res.nist = nist_subset(res.bits, res.nist_sequences, st.seq_len_bits);

    const auto raw = to_double(res.raw.samples);
    res.acf_raw = autocorrelation(raw, st.max_lag);
    res.acf_bits = autocorrelation(to_double(res.bits), st.max_lag);
    std::vector<double> volts(raw.size());
    std::transform(raw.begin(), raw.end(), volts.begin(), [&](double c) { return c * res.raw.adc_scale; });
    res.psd = psd_welch(volts, res.raw.sample_rate_hz, st.psd_segment);

    const double threshold = pass_rate_threshold(res.nist_sequences);
    res.statistical_pass = std::all_of(res.nist.begin(), res.nist.end(), [&](const TestReport& r) {
        return r.pass_rate >= threshold && r.uniformity_pvalue >= kUniformityFloor;
    });
    return res;
}

int cmd_simulate(const Config& config, const std::filesystem::path& out, std::ostream& log) {
    const auto sim = simulate_detailed(config.run);
    {
        auto f = open_out(out, true);
        write_samples(sim.block, f);
    }
    const double variance = sample_variance_v2(sim.block);
    const double predicted = expected_variance(config.run);
    log << "samples: " << sim.block.samples.size() << '\n'
        << "variance_v2: " << variance << '\n'
        << "predicted_variance_v2: " << predicted << '\n'
        << "relative_error: " << (variance - predicted) / predicted << '\n'
        << "saturation_fraction: "
        << static_cast<double>(sim.saturated) / static_cast<double>(sim.block.samples.size()) << '\n';
    return kExitOk;
}

int cmd_calibrate(const Config& config, const std::filesystem::path& out, std::ostream& log) {
    const auto cal = run_calibration(config);
    {
        auto f = open_out(out);
        f << calibration_json(cal).dump(2) << '\n';
    }
    {
        auto f = open_out(with_suffix(out, ".qcnr.csv"));
        write_qcnr_csv(f, cal);
    }
    {
        auto f = open_out(with_suffix(out, ".sweep.csv"));
        write_sweep_csv(f, cal.sweep);
    }
    {
        auto f = open_out(with_suffix(out, ".fringe.csv"));
        write_fringe_csv(f, cal.fringe);
    }
    log << "quadrature_phi2: " << cal.quadrature_phi2 << '\n'
        << "AC: " << cal.fit.ac << "\nAQ: " << cal.fit.aq << "\nF: " << cal.fit.f << '\n'
        << "r_squared: " << cal.fit.r_squared << '\n'
        << "optimal_power_w: " << cal.optimum.power << "\noptimal_qcnr: " << cal.optimum.qcnr << '\n';
    return kExitOk;
}

int cmd_pipeline(const Config& config, std::size_t n_output_bits, const std::filesystem::path& out, std::ostream& log) {
    const auto res = run_pipeline(config, n_output_bits);
    {
        auto f = open_out(out, true);
        write_bits(res.bits, f);
    }

    const double threshold = pass_rate_threshold(res.nist_sequences);
    json tests = json::array();
    for (const auto& r : res.nist) {
        tests.push_back({{"test", r.test_name},
                         {"pass_rate", r.pass_rate},
                         {"uniformity_p", r.uniformity_pvalue},
                         {"pass", r.pass_rate >= threshold && r.uniformity_pvalue >= kUniformityFloor}});
    }
    double max_abs_bits = 0.0;
    for (std::size_t k = 1; k < res.acf_bits.size(); ++k) max_abs_bits = std::max(max_abs_bits, std::abs(res.acf_bits[k]));
    const json report = {
        {"seed", config.run.seed},
        {"calibration", calibration_json(res.calibration)},
        {"operating_power_w", res.operating_power},
        {"entropy", entropy_json(res.entropy)},
        {"generation_rate_bps", res.generation_rate_bps},
        {"extractor",
         {{"n_in", config.extractor.n_in},
          {"n_out", res.n_out},
          {"output_bits", res.bits.size()},
          {"seed_hash", res.bits.provenance.seed_hash},
          {"source_hash", res.bits.provenance.source_hash}}},
        {"nist", {{"n_sequences", res.nist_sequences}, {"pass_rate_threshold", threshold}, {"tests", tests}}},
        {"autocorrelation",
         {{"raw_lag1", res.acf_raw.at(1)},
          {"bits_lag1", res.acf_bits.at(1)},
          {"bits_max_abs", max_abs_bits},
          {"bits_bound", 4.0 / std::sqrt(static_cast<double>(res.bits.size()))}}},
        {"statistical_pass", res.statistical_pass},
    };
    {
        auto f = open_out(with_suffix(out, ".report.json"));
        f << report.dump(2) << '\n';
    }
    {
        auto f = open_out(with_suffix(out, ".nist.csv"));
        write_reports_csv(f, res.nist);
    }
    {
        auto f = open_out(with_suffix(out, ".acf_raw.csv"));
        write_autocorrelation_csv(f, res.acf_raw);
    }
    {
        auto f = open_out(with_suffix(out, ".acf_bits.csv"));
        write_autocorrelation_csv(f, res.acf_bits);
    }
    {
        auto f = open_out(with_suffix(out, ".psd.csv"));
        write_psd_csv(f, res.psd);
    }

    log << "min_entropy_bits: " << res.entropy.min_entropy_bits << '\n'
        << "extraction_ratio: " << res.entropy.extraction_ratio << " (n_out " << res.n_out << " of " << config.extractor.n_in << ")\n"
        << "output_bits: " << res.bits.size() << '\n'
        << "raw_lag1: " << res.acf_raw.at(1) << "\nbits_lag1: " << res.acf_bits.at(1) << '\n';
    for (const auto& r : res.nist) {
        log << r.test_name << ": pass_rate " << r.pass_rate << ", uniformity_p " << r.uniformity_pvalue << '\n';
    }
    log << (res.statistical_pass ? "all tests pass\n" : "statistical failure\n");
    return res.statistical_pass ? kExitOk : kExitStatistical;
}

int cmd_stability(const Config& config, const std::filesystem::path& out, std::ostream& log) {
    config.validate();
    if (!config.stability) throw DomainError("stability: config has no 'stability' section");
    const auto& st = *config.stability;
    StabilitySettings settings;
    settings.fringe_points = st.fringe_points;

    auto f = open_out(out);
    f << "run,time_s,variance_v2,applied_phi2,min_entropy_bits,recalibrated\n";
    f.precision(10);
    auto emit = [&](const char* name, bool recal) {
        const auto series = simulate_stability(config.run, st.scenario(recal), st.total_time, st.report_interval, settings);
        double h_lo = series.front().min_entropy;
        double h_hi = h_lo;
        for (const auto& p : series) {
            f << name << ',' << p.time << ',' << p.variance << ',' << p.applied_phi2 << ',' << p.min_entropy << ','
              << (p.recalibrated ? 1 : 0) << '\n';
            h_lo = std::min(h_lo, p.min_entropy);
            h_hi = std::max(h_hi, p.min_entropy);
        }
        log << name << ": min_entropy range " << h_hi - h_lo << " bits over " << series.size() << " points\n";
    };
    emit("no_recalibration", false);
    if (st.recalibration_period) emit("recalibration", true);
    if (!f) throw IoError(IoErrorKind::sink_failure, "write failed");
    return kExitOk;
}

} // namespace qrng
