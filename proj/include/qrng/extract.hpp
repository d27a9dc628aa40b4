#pragma once

#include "qrng/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qrng {

/// Seed of an n_out x n_in Toeplitz matrix over GF(2).
///
/// Entry (i, j) is bit (n_out - 1 - i + j) of the seed: the first row is seed bits
/// [n_out - 1, n_in + n_out - 1) left to right and the first column is seed bits
/// [0, n_out) read bottom to top, so both share bit n_out - 1 at the corner.
class ToeplitzSeed {
  public:
    ToeplitzSeed(BitStream bits, std::size_t n_in, std::size_t n_out, std::uint64_t seed_rng);

    /// Seed bits drawn from xoshiro256++ seeded with seed_rng.
    static ToeplitzSeed generate(std::size_t n_in, std::size_t n_out, std::uint64_t seed_rng);

    std::size_t n_in() const { return n_in_; }
    std::size_t n_out() const { return n_out_; }
    std::uint64_t seed_rng() const { return seed_rng_; }
    const BitStream& bits() const { return bits_; }
    bool entry(std::size_t row, std::size_t col) const { return bits_[n_out_ - 1 - row + col]; }

    /// Hex SHA-256 of the packed seed bits.
    std::string hash() const;

  private:
    friend class ToeplitzHasher;
    BitStream bits_;
    std::size_t n_in_;
    std::size_t n_out_;
    std::uint64_t seed_rng_;
};

/// Word-parallel Toeplitz multiplier. Precomputes the seed at all 64 bit shifts so
/// every matrix row is an aligned word window; one output bit is the parity of
/// the AND of that window with the input block.
class ToeplitzHasher {
  public:
    explicit ToeplitzHasher(const ToeplitzSeed& seed);

    std::size_t n_in() const { return n_in_; }
    std::size_t n_out() const { return n_out_; }
    std::size_t input_words() const { return in_words_; }

    /// Hash one block given as little-endian 64-bit words, bit b of the block in
    /// word b / 64 at position b % 64. Bits past n_in must be zero.
    void hash_words(std::span<const std::uint64_t> block, BitStream& out) const;

  private:
    std::size_t n_in_;
    std::size_t n_out_;
    std::size_t in_words_;
    std::size_t seed_words_;
    std::vector<std::uint64_t> shifted_; // 64 copies, each seed_words_ long
};

/// y = T x over GF(2) for one n_in-bit block.
BitStream toeplitz_hash(const ToeplitzSeed& seed, const BitStream& block);

/// Serializes samples as adc_bits-wide two's-complement, least-significant bit first.
BitStream serialize_samples(const SampleBlock& samples);

/// Hex SHA-256 over the sample codes (little-endian int16) and the ADC width.
std::string sample_block_hash(const SampleBlock& samples);

/// Hashes every complete n_in-bit block of the serialized samples and concatenates
/// the outputs in input order. The trailing partial block is dropped.
BitStream extract_stream(const SampleBlock& samples, const EntropyReport& report, const ToeplitzSeed& seed,
                         unsigned workers = 0);

} // namespace qrng
