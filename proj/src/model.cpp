#include "qrng/model.hpp"

#include "qrng/error.hpp"

#include <cmath>
#include <numeric>

namespace qrng {

void LaserNoiseModel::validate() const {
    if (!(quantum_diffusion_q >= 0.0) || !(classical_diffusion_c >= 0.0) || !(power_p >= 0.0)) {
        throw DomainError("laser model: diffusion rates and power must be nonnegative");
    }
}

void SignalChainConfig::validate() const {
    if (!(delay_td > 0.0)) throw DomainError("chain: delay_td must be positive");
    if (adc_bits < 1 || adc_bits > 16) throw DomainError("chain: adc_bits must be in [1, 16]");
    if (!(adc_range_sigmas > 0.0)) throw DomainError("chain: adc_range_sigmas must be positive");
    if (!(tia_cutoff_hz > 0.0)) throw DomainError("chain: tia_cutoff_hz must be positive");
    if (!(sample_rate_hz > 0.0)) throw DomainError("chain: sample_rate_hz must be positive");
    if (!(electronic_noise_f >= 0.0)) throw DomainError("chain: electronic_noise_f must be nonnegative");
    if (!(conversion_gain_a >= 0.0)) throw DomainError("chain: conversion_gain_a must be nonnegative");
    if (!std::isfinite(quadrature_offset)) throw DomainError("chain: quadrature_offset must be finite");
    for (const auto& tone : rf_tones) {
        if (!(tone.frequency_hz >= 0.0) || !std::isfinite(tone.amplitude_v)) {
            throw DomainError("chain: rf tone needs nonnegative frequency and finite amplitude");
        }
    }
}

void EntropyReport::validate() const {
    if (sigma_sq_quantum > sigma_sq_total * (1.0 + 1e-12)) {
        throw DomainError("entropy report: quantum variance exceeds total variance");
    }
    if (min_entropy_bits < 0.0 || min_entropy_bits > samples_bits) {
        throw DomainError("entropy report: min-entropy outside [0, sample bits]");
    }
    if (!(extraction_ratio > 0.0) || extraction_ratio > min_entropy_bits / samples_bits + 1e-12) {
        throw DomainError("entropy report: extraction ratio outside (0, h_min / sample bits]");
    }
}

void SampleBlock::validate() const {
    if (adc_bits < 1 || adc_bits > 16) throw DomainError("sample block: adc_bits must be in [1, 16]");
    if (!(adc_scale > 0.0)) throw DomainError("sample block: adc_scale must be positive");
    const auto lo = min_code();
    const auto hi = max_code();
    for (auto s : samples) {
        if (s < lo || s > hi) throw DomainError("sample block: sample not representable in adc_bits");
    }
}

double sample_variance_v2(const SampleBlock& block) {
    const auto n = block.samples.size();
    if (n < 2) throw DomainError("sample variance needs at least two samples");
    double mean = 0.0;
    for (auto s : block.samples) mean += s;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (auto s : block.samples) {
        const double d = s - mean;
        acc += d * d;
    }
    return acc / static_cast<double>(n) * block.adc_scale * block.adc_scale;
}

BitStream::BitStream(std::vector<std::uint8_t> bytes, std::size_t count)
    : bytes_(std::move(bytes)), count_(count) {
    if (count_ > bytes_.size() * 8) throw DomainError("bit stream: count exceeds storage");
    bytes_.resize((count_ + 7) / 8);
    if (count_ % 8 != 0) bytes_.back() &= static_cast<std::uint8_t>((1U << (count_ % 8)) - 1);
}

void BitStream::push_back(bool bit) {
    if (count_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(1U << (count_ % 8));
    ++count_;
}

void BitStream::append(const BitStream& other) {
    if (count_ % 8 == 0) {
        bytes_.insert(bytes_.end(), other.bytes_.begin(), other.bytes_.end());
        count_ += other.count_;
        return;
    }
    for (std::size_t i = 0; i < other.size(); ++i) push_back(other[i]);
}

std::vector<std::uint8_t> BitStream::unpack(std::size_t first, std::size_t n) const {
    if (first + n > count_) throw DomainError("bit stream: unpack range out of bounds");
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (*this)[first + i];
    return out;
}

double phase_difference_variance(const LaserNoiseModel& model, double td) {
    model.validate();
    if (!(td > 0.0)) throw DomainError("phase difference variance: delay must be positive");
    if (model.power_p == 0.0) throw DomainError("quantum term undefined at P=0");
    return model.quantum_diffusion_q * td / model.power_p + model.classical_diffusion_c * td;
}

double predicted_variance(const VarianceFit& fit, double power) {
    if (!(power >= 0.0)) throw DomainError("predicted variance: power must be nonnegative");
    return (fit.ac * power + fit.aq) * power + fit.f;
}

VarianceFit implied_fit(const LaserNoiseModel& model, const SignalChainConfig& chain) {
    return {chain.conversion_gain_a * model.classical_diffusion_c * chain.delay_td,
            chain.conversion_gain_a * model.quantum_diffusion_q * chain.delay_td,
            chain.electronic_noise_f, 1.0};
}

LaserNoiseModel laser_from_coefficients(double ac, double aq, const SignalChainConfig& chain) {
    if (!(chain.conversion_gain_a > 0.0) || !(chain.delay_td > 0.0)) {
        throw DomainError("laser_from_coefficients: conversion gain and delay must be positive");
    }
    const double scale = chain.conversion_gain_a * chain.delay_td;
    return {aq / scale, ac / scale, 0.0};
}

} // namespace qrng
