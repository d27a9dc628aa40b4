#pragma once

#include "qrng/model.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace qrng {

/// sigma^2 / (1 + 1/QCNR): the share of the voltage variance due to quantum phase noise.
double quantum_variance(double sigma_sq, double qcnr);

struct VoltageRange {
    double v_min = 0.0;
    double v_max = 0.0;
};

/// Probability of each of the 2^n_bits equal-width bins over the range for a
/// zero-mean Gaussian of standard deviation sigma_q. The first and last bins also
/// take the tails beyond the range, as a saturating ADC would.
std::vector<double> gaussian_bin_probabilities(double sigma_q, VoltageRange range, int n_bits);

/// -log2 of the largest bin probability, in bits per sample.
double min_entropy_gaussian(double sigma_q, VoltageRange range, int n_bits);

/// Output bits per input bit allowed by the leftover hash lemma for n_in-bit blocks:
/// h_min / sample_bits - 2 log2(1/eps) / n_in.
double extraction_ratio(double h_min, int sample_bits, double security_eps, std::size_t n_in);

/// h_min * sample_rate, in bits/s.
double generation_rate(double h_min, double sample_rate_hz);

struct EntropyInputs {
    double sigma_sq_total = 0.0; ///< V^2 at the operating point
    double qcnr = 0.0;
    VoltageRange adc_range;      ///< digitizer full scale
    int n_bits = 8;
    double security_eps = 0x1p-50;
    std::size_t n_in = 4096;
    /// Replaces the computed min-entropy in the extraction budget when set.
    std::optional<double> min_entropy_override;
};

EntropyReport make_entropy_report(const EntropyInputs& in);

} // namespace qrng
