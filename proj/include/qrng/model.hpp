#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qrng {

/// Phase noise of the laser source. Both terms are phase diffusion rates, so the
/// variance of the phase difference accumulated over a delay Td is
/// (quantum_diffusion_q * Td) / power_p + classical_diffusion_c * Td.
struct LaserNoiseModel {
    double quantum_diffusion_q = 0.0;   ///< rad^2 * W / s
    double classical_diffusion_c = 0.0; ///< rad^2 / s
    double power_p = 0.0;               ///< W, emitted optical power

    void validate() const;
    bool operator==(const LaserNoiseModel&) const = default;
};

/// Fixed-frequency interference added at the detector output (e.g. FM broadcast pickup).
struct RfTone {
    double frequency_hz = 0.0;
    double amplitude_v = 0.0;
    bool operator==(const RfTone&) const = default;
};

/// Interferometer, detector and digitizer parameters.
struct SignalChainConfig {
    double delay_td = 540e-12;       ///< s, arm delay of the unbalanced interferometer
    double quadrature_offset = 0.0;  ///< rad, deviation from the quadrature bias point
    double conversion_gain_a = 1e6;  ///< V^2 / (W * rad)^2, measured variance per unit P^2 <dtheta^2>
    double electronic_noise_f = 0.0; ///< V^2, post-filter electronic noise variance
    double tia_cutoff_hz = 500e6;
    int adc_bits = 8;
    double adc_range_sigmas = 5.0;
    double sample_rate_hz = 500e6;
    std::vector<RfTone> rf_tones;

    void validate() const;
    bool operator==(const SignalChainConfig&) const = default;
};

/// Coefficients of sigma^2(P) = ac P^2 + aq P + f.
struct VarianceFit {
    double ac = 0.0; ///< V^2 / W^2
    double aq = 0.0; ///< V^2 / W
    double f = 0.0;  ///< V^2
    double r_squared = 1.0;
};

struct EntropyReport {
    double qcnr = 0.0;
    double sigma_sq_total = 0.0;   ///< V^2
    double sigma_sq_quantum = 0.0; ///< V^2
    double min_entropy_bits = 0.0; ///< per sample
    int samples_bits = 8;
    double extraction_ratio = 0.0;

    void validate() const;
};

enum class SampleOrigin : std::uint8_t { simulated = 0, imported = 1 };

/// Quantized ADC codes. Code k represents the voltage interval
/// [k * adc_scale, (k + 1) * adc_scale).
struct SampleBlock {
    std::vector<std::int16_t> samples;
    int adc_bits = 8;
    double sample_rate_hz = 0.0;
    double adc_scale = 1.0; ///< V per code
    SampleOrigin origin = SampleOrigin::simulated;
    std::optional<std::uint64_t> rng_seed;

    void validate() const;
    std::int32_t min_code() const { return -(std::int32_t{1} << (adc_bits - 1)); }
    std::int32_t max_code() const { return (std::int32_t{1} << (adc_bits - 1)) - 1; }
    bool operator==(const SampleBlock&) const = default;
};

/// Sample variance of a block in volts^2 (population normalization).
double sample_variance_v2(const SampleBlock& block);

struct BitProvenance {
    std::string source_hash;
    std::string seed_hash;
    double extraction_ratio = 0.0;
    bool operator==(const BitProvenance&) const = default;
};

/// Packed bit sequence, least-significant bit first within each byte.
class BitStream {
  public:
    BitStream() = default;
    BitStream(std::vector<std::uint8_t> bytes, std::size_t count);

    void push_back(bool bit);
    void append(const BitStream& other);
    bool operator[](std::size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1U; }

    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    void reserve(std::size_t bits) { bytes_.reserve((bits + 7) / 8); }

    /// Bits [first, first + n) as 0/1 values.
    std::vector<std::uint8_t> unpack(std::size_t first, std::size_t n) const;

    BitProvenance provenance;

    bool operator==(const BitStream&) const = default;

  private:
    std::vector<std::uint8_t> bytes_;
    std::size_t count_ = 0;
};

/// Variance of theta(t) - theta(t - td): (q td)/P + c td.
double phase_difference_variance(const LaserNoiseModel& model, double td);

/// ac P^2 + aq P + f.
double predicted_variance(const VarianceFit& fit, double power);

/// The (AC, AQ, F) a simulated chain should reproduce, given its configuration.
VarianceFit implied_fit(const LaserNoiseModel& model, const SignalChainConfig& chain);

/// Inverse of implied_fit: diffusion rates that reproduce the requested AC and AQ
/// for the chain's conversion gain and delay. Power is left at zero.
LaserNoiseModel laser_from_coefficients(double ac, double aq, const SignalChainConfig& chain);

} // namespace qrng
