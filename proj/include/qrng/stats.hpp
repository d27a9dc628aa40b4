#pragma once

#include "qrng/model.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qrng {

/// Biased normalized autocorrelation r(0..max_lag); r(0) = 1.
std::vector<double> autocorrelation(std::span<const double> samples, std::size_t max_lag);

std::vector<double> to_double(std::span<const std::int16_t> samples);
std::vector<double> to_double(const BitStream& bits);

struct PsdPoint {
    double frequency_hz = 0.0;
    double density = 0.0; ///< units^2 / Hz, one-sided
};

/// Welch estimate: Hann window, 50% overlap, per-segment mean removal.
std::vector<PsdPoint> psd_welch(std::span<const double> samples, double sample_rate_hz, std::size_t segment_len);

/// Individual SP800-22 statistics. Input is one bit per element (0 or 1).
namespace nist {

double frequency(std::span<const std::uint8_t> bits);
double block_frequency(std::span<const std::uint8_t> bits, std::size_t block_len = 128);
double runs(std::span<const std::uint8_t> bits);
double longest_run_of_ones(std::span<const std::uint8_t> bits);
/// {forward, backward}
std::array<double, 2> cumulative_sums(std::span<const std::uint8_t> bits);
double spectral(std::span<const std::uint8_t> bits);
/// {del psi^2, del^2 psi^2}
std::array<double, 2> serial(std::span<const std::uint8_t> bits, int block_len);
double approximate_entropy(std::span<const std::uint8_t> bits, int block_len);

/// Upper regularized incomplete gamma Q(a, x).
double igamc(double a, double x);

} // namespace nist

inline constexpr double kSignificance = 0.01;

struct TestReport {
    std::string test_name;
    std::vector<double> per_sequence_pvalues;
    double pass_rate = 0.0;          ///< fraction of p-values >= 0.01
    double uniformity_pvalue = 0.0;  ///< 10-bin chi-squared on the p-values
};

/// Chi-squared uniformity of p-values over 10 equal bins of [0, 1].
double uniformity_pvalue(std::span<const double> pvalues);

/// Lower edge of the 3-sigma binomial band around the expected pass rate 0.99.
double pass_rate_threshold(std::size_t n_sequences);

/// Runs Frequency, Block Frequency, Cumulative Sums (both directions), Runs,
/// Longest Run, Spectral, Serial (both statistics) and Approximate Entropy on
/// n_sequences disjoint sequences taken from the start of the stream.
std::vector<TestReport> nist_subset(const BitStream& bits, std::size_t n_sequences, std::size_t seq_len_bits,
                                    unsigned workers = 0);

void write_reports_csv(std::ostream& out, std::span<const TestReport> reports);
void write_psd_csv(std::ostream& out, std::span<const PsdPoint> psd);
void write_autocorrelation_csv(std::ostream& out, std::span<const double> r);

} // namespace qrng
