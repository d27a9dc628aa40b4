#include "qrng/entropy.hpp"
#include "qrng/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace qrng;

namespace {

double gauss_pdf(double x, double s) { return std::exp(-0.5 * x * x / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi)); }

double trapezoid(double a, double b, double s, int steps) {
    const double h = (b - a) / steps;
    double acc = 0.5 * (gauss_pdf(a, s) + gauss_pdf(b, s));
    for (int i = 1; i < steps; ++i) acc += gauss_pdf(a + i * h, s);
    return acc * h;
}

// Bin masses by direct numerical integration of the density; the edge bins
// collect the tails out to 15 sigma.
std::vector<double> oracle_bins(double s, VoltageRange r, int n_bits) {
    const int bins = 1 << n_bits;
    const double w = (r.v_max - r.v_min) / bins;
    std::vector<double> out(bins);
    for (int k = 0; k < bins; ++k) out[k] = trapezoid(r.v_min + k * w, r.v_min + (k + 1) * w, s, 4000);
    out.front() += trapezoid(std::min(r.v_min, -15 * s), r.v_min, s, 400000);
    out.back() += trapezoid(r.v_max, std::max(r.v_max, 15 * s), s, 400000);
    return out;
}

} // namespace

TEST(QuantumVariance, ShareOfTotal) {
    EXPECT_DOUBLE_EQ(quantum_variance(1.0, 3.0), 0.75);
    EXPECT_DOUBLE_EQ(quantum_variance(2.0, 1.0), 1.0);
    EXPECT_THROW(quantum_variance(1.0, 0.0), DomainError);
}

TEST(BinProbabilities, MatchTrapezoidOracle) {
    const double sigma_q = std::sqrt(quantum_variance(1.0, 3.38));
    const VoltageRange r{-5.0, 5.0};
    const auto probs = gaussian_bin_probabilities(sigma_q, r, 8);
    const auto oracle = oracle_bins(sigma_q, r, 8);
    ASSERT_EQ(probs.size(), 256U);
    for (std::size_t k = 0; k < probs.size(); ++k) EXPECT_NEAR(probs[k], oracle[k], 1e-9) << k;
    EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-14);
}

TEST(BinProbabilities, SaturatedEdgesAndAsymmetricRange) {
    const VoltageRange r{-0.5, 2.0};
    const auto probs = gaussian_bin_probabilities(1.0, r, 4);
    const auto oracle = oracle_bins(1.0, r, 4);
    for (std::size_t k = 0; k < probs.size(); ++k) EXPECT_NEAR(probs[k], oracle[k], 1e-9) << k;
    EXPECT_NEAR(probs.front(), 0.5 * std::erfc(-(-0.5 + 2.5 / 16) / std::numbers::sqrt2), 1e-15);
}

TEST(MinEntropy, ReferenceOperatingPoint) {
    const double sigma_q = std::sqrt(quantum_variance(1.0, 3.38));
    const double h = min_entropy_gaussian(sigma_q, {-5.0, 5.0}, 8);
    EXPECT_GE(h, 5.5);
    EXPECT_LE(h, 5.9);
    // Independent value: the central bin of width 10/256 at the mode.
    const double w = 10.0 / 256.0;
    const double central = std::erf(w / (sigma_q * std::numbers::sqrt2));
    EXPECT_NEAR(h, -std::log2(0.5 * central), 1e-12);
}

TEST(MinEntropy, ScaleInvariant) {
    const double a = min_entropy_gaussian(0.7, {-4.0, 4.0}, 8);
    const double b = min_entropy_gaussian(0.7e-3, {-4.0e-3, 4.0e-3}, 8);
    EXPECT_NEAR(a, b, 1e-12);
}

TEST(MinEntropy, NarrowSignalLimits) {
    // Zero is a bin edge of a symmetric range, so a vanishing signal splits
    // evenly between two codes.
    EXPECT_NEAR(min_entropy_gaussian(1e-9, {-1.0, 1.0}, 8), 1.0, 1e-9);
    EXPECT_NEAR(min_entropy_gaussian(1e-9, {-1.0, 1.1}, 8), 0.0, 1e-9);
}

TEST(MinEntropy, NeverExceedsBitDepth) {
    for (double s : {0.1, 0.5, 1.0, 3.0, 10.0}) {
        const double h = min_entropy_gaussian(s, {-1.0, 1.0}, 6);
        EXPECT_GE(h, 0.0);
        EXPECT_LE(h, 6.0);
    }
}

TEST(MinEntropy, Validation) {
    EXPECT_THROW(min_entropy_gaussian(0.0, {-1, 1}, 8), DomainError);
    EXPECT_THROW(min_entropy_gaussian(1.0, {1, 1}, 8), DomainError);
    EXPECT_THROW(min_entropy_gaussian(1.0, {-1, 1}, 0), DomainError);
}

TEST(ExtractionRatio, LeftoverHashBudget) {
    EXPECT_DOUBLE_EQ(extraction_ratio(5.6, 8, 0x1p-50, 4096), 0.7 - 100.0 / 4096.0);
    try {
        extraction_ratio(1.0, 8, 0x1p-50, 512);
        FAIL();
    } catch (const ComputeError& e) {
        EXPECT_NE(std::string(e.what()).find("block too small for requested security"), std::string::npos);
    }
    EXPECT_THROW(extraction_ratio(9.0, 8, 0.1, 4096), DomainError);
    EXPECT_THROW(extraction_ratio(5.0, 8, 1.0, 4096), DomainError);
}

TEST(GenerationRate, ExactProduct) {
    EXPECT_EQ(generation_rate(5.6, 500e6), 2.8e9);
    EXPECT_THROW(generation_rate(-1.0, 1.0), DomainError);
}

TEST(EntropyReport, Assembled) {
    EntropyInputs in;
    in.sigma_sq_total = 4e-6;
    in.qcnr = 3.38;
    const double s = std::sqrt(4e-6);
    in.adc_range = {-5 * s, 5 * s};
    const auto r = make_entropy_report(in);
    EXPECT_DOUBLE_EQ(r.sigma_sq_quantum, quantum_variance(4e-6, 3.38));
    EXPECT_NEAR(r.min_entropy_bits, min_entropy_gaussian(std::sqrt(r.sigma_sq_quantum), in.adc_range, 8), 1e-15);
    EXPECT_DOUBLE_EQ(r.extraction_ratio, extraction_ratio(r.min_entropy_bits, 8, in.security_eps, 4096));

    in.min_entropy_override = 5.6;
    const auto o = make_entropy_report(in);
    EXPECT_EQ(o.min_entropy_bits, 5.6);
    EXPECT_DOUBLE_EQ(o.extraction_ratio, 0.7 - 100.0 / 4096.0);
}
