#include "qrng/entropy.hpp"

#include "qrng/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qrng {

double quantum_variance(double sigma_sq, double qcnr) {
    if (!(sigma_sq >= 0.0)) throw DomainError("quantum variance: sigma^2 must be nonnegative");
    if (!(qcnr > 0.0)) throw DomainError("quantum variance: QCNR must be positive");
    return sigma_sq / (1.0 + 1.0 / qcnr);
}

std::vector<double> gaussian_bin_probabilities(double sigma_q, VoltageRange range, int n_bits) {
    if (!(sigma_q > 0.0)) throw DomainError("min-entropy: sigma_q must be positive");
    if (!(range.v_max > range.v_min)) throw DomainError("min-entropy: empty voltage range");
    if (n_bits < 1 || n_bits > 16) throw DomainError("min-entropy: n_bits must be in [1, 16]");

    const std::size_t bins = std::size_t{1} << n_bits;
    const double width = (range.v_max - range.v_min) / static_cast<double>(bins);
    const double inv = 1.0 / (sigma_q * std::numbers::sqrt2);
    // Upper-tail mass Q(x) = P[X > x]; erfc keeps relative precision out in the tails.
    auto upper = [inv](double x) { return 0.5 * std::erfc(x * inv); };

    std::vector<double> probs(bins);
    double lower_tail = 1.0; // Q(-inf)
    for (std::size_t k = 0; k < bins; ++k) {
        const double hi_edge = range.v_min + width * static_cast<double>(k + 1);
        const double next = (k + 1 == bins) ? 0.0 : upper(hi_edge);
        probs[k] = lower_tail - next;
        lower_tail = next;
    }
    return probs;
}

double min_entropy_gaussian(double sigma_q, VoltageRange range, int n_bits) {
    const auto probs = gaussian_bin_probabilities(sigma_q, range, n_bits);
    const double pmax = *std::max_element(probs.begin(), probs.end());
    return std::max(0.0, -std::log2(pmax));
}

double extraction_ratio(double h_min, int sample_bits, double security_eps, std::size_t n_in) {
    if (sample_bits < 1) throw DomainError("extraction ratio: sample_bits must be positive");
    if (!(h_min > 0.0) || h_min > sample_bits) throw DomainError("extraction ratio: need 0 < h_min <= sample_bits");
    if (!(security_eps > 0.0) || !(security_eps < 1.0)) throw DomainError("extraction ratio: need 0 < eps < 1");
    if (n_in == 0) throw DomainError("extraction ratio: empty input block");

    const double ratio = h_min / sample_bits - 2.0 * std::log2(1.0 / security_eps) / static_cast<double>(n_in);
    if (!(ratio > 0.0)) throw ComputeError("block too small for requested security");
    return std::min(ratio, 1.0);
}

double generation_rate(double h_min, double sample_rate_hz) {
    if (!(h_min >= 0.0) || !(sample_rate_hz >= 0.0)) throw DomainError("generation rate: inputs must be nonnegative");
    return h_min * sample_rate_hz;
}

EntropyReport make_entropy_report(const EntropyInputs& in) {
    EntropyReport report;
    report.qcnr = in.qcnr;
    report.sigma_sq_total = in.sigma_sq_total;
    report.sigma_sq_quantum = quantum_variance(in.sigma_sq_total, in.qcnr);
    report.samples_bits = in.n_bits;
    report.min_entropy_bits = in.min_entropy_override
        ? *in.min_entropy_override
        : min_entropy_gaussian(std::sqrt(report.sigma_sq_quantum), in.adc_range, in.n_bits);
    report.extraction_ratio = extraction_ratio(report.min_entropy_bits, in.n_bits, in.security_eps, in.n_in);
    report.validate();
    return report;
}

} // namespace qrng
