#include "qrng/extract.hpp"

#include "qrng/error.hpp"
#include "qrng/parallel.hpp"
#include "qrng/rng.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

namespace qrng {

namespace {

std::string sha256_hex(std::span<const std::uint8_t> data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw ComputeError("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

/// Reads n bits starting at bit `first` of an LSB-first byte array into words.
void load_bits(std::span<const std::uint8_t> bytes, std::size_t first, std::size_t n, std::span<std::uint64_t> words) {
    std::fill(words.begin(), words.end(), 0);
    const std::size_t shift = first & 7;
    const std::size_t byte0 = first >> 3;
    const std::size_t n_bytes = (n + 7) / 8;
    for (std::size_t k = 0; k < n_bytes; ++k) {
        const std::size_t idx = byte0 + k;
        unsigned value = bytes[idx] >> shift;
        if (shift != 0 && idx + 1 < bytes.size()) value |= static_cast<unsigned>(bytes[idx + 1]) << (8 - shift);
        words[k / 8] |= static_cast<std::uint64_t>(value & 0xFFU) << (8 * (k % 8));
    }
    if (n % 64 != 0) words[(n - 1) / 64] &= (std::uint64_t{1} << (n % 64)) - 1;
}

} // namespace

ToeplitzSeed::ToeplitzSeed(BitStream bits, std::size_t n_in, std::size_t n_out, std::uint64_t seed_rng)
    : bits_(std::move(bits)), n_in_(n_in), n_out_(n_out), seed_rng_(seed_rng) {
    if (n_in_ == 0 || n_out_ == 0) throw DomainError("toeplitz seed: block sizes must be positive");
    if (n_out_ > n_in_) throw DomainError("toeplitz seed: n_out must not exceed n_in");
    if (bits_.size() != n_in_ + n_out_ - 1) throw DomainError("toeplitz seed: need exactly n_in + n_out - 1 bits");
}

ToeplitzSeed ToeplitzSeed::generate(std::size_t n_in, std::size_t n_out, std::uint64_t seed_rng) {
    const std::size_t count = n_in + n_out - 1;
    Xoshiro256pp rng(seed_rng);
    std::vector<std::uint8_t> bytes((count + 7) / 8);
    for (std::size_t i = 0; i < bytes.size(); i += 8) {
        const std::uint64_t w = rng();
        for (std::size_t k = 0; k < 8 && i + k < bytes.size(); ++k) bytes[i + k] = static_cast<std::uint8_t>(w >> (8 * k));
    }
    return ToeplitzSeed(BitStream(std::move(bytes), count), n_in, n_out, seed_rng);
}

std::string ToeplitzSeed::hash() const { return sha256_hex(bits_.bytes()); }

ToeplitzHasher::ToeplitzHasher(const ToeplitzSeed& seed)
    : n_in_(seed.n_in()), n_out_(seed.n_out()), in_words_((seed.n_in() + 63) / 64),
      seed_words_((seed.n_out() - 1) / 64 + (seed.n_in() + 63) / 64 + 1) {
    std::vector<std::uint64_t> base(seed_words_ + 1, 0);
    load_bits(seed.bits().bytes(), 0, seed.bits().size(), std::span(base).first((seed.bits().size() + 63) / 64));
    shifted_.resize(64 * seed_words_);
    for (std::size_t b = 0; b < 64; ++b) {
        auto* row = &shifted_[b * seed_words_];
        for (std::size_t w = 0; w < seed_words_; ++w) {
            row[w] = b == 0 ? base[w] : (base[w] >> b) | (base[w + 1] << (64 - b));
        }
    }
}

void ToeplitzHasher::hash_words(std::span<const std::uint64_t> block, BitStream& out) const {
    if (block.size() != in_words_) throw DomainError("toeplitz: block word count mismatch");
    for (std::size_t i = 0; i < n_out_; ++i) {
        const std::size_t offset = n_out_ - 1 - i;
        const std::uint64_t* window = &shifted_[(offset & 63) * seed_words_ + (offset >> 6)];
        std::uint64_t acc = 0;
        for (std::size_t k = 0; k < in_words_; ++k) acc ^= window[k] & block[k];
        out.push_back(std::popcount(acc) & 1);
    }
}

BitStream toeplitz_hash(const ToeplitzSeed& seed, const BitStream& block) {
    if (block.size() != seed.n_in()) throw DomainError("toeplitz: input block length must equal n_in");
    const ToeplitzHasher hasher(seed);
    std::vector<std::uint64_t> words(hasher.input_words());
    load_bits(block.bytes(), 0, block.size(), words);
    BitStream out;
    out.reserve(seed.n_out());
    hasher.hash_words(words, out);
    return out;
}

BitStream serialize_samples(const SampleBlock& samples) {
    BitStream bits;
    bits.reserve(samples.samples.size() * static_cast<std::size_t>(samples.adc_bits));
    for (const std::int16_t s : samples.samples) {
        const auto raw = static_cast<std::uint16_t>(s);
        for (int b = 0; b < samples.adc_bits; ++b) bits.push_back((raw >> b) & 1U);
    }
    return bits;
}

std::string sample_block_hash(const SampleBlock& samples) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(2 * samples.samples.size() + 1);
    bytes.push_back(static_cast<std::uint8_t>(samples.adc_bits));
    for (const std::int16_t s : samples.samples) {
        const auto raw = static_cast<std::uint16_t>(s);
        bytes.push_back(static_cast<std::uint8_t>(raw & 0xFF));
        bytes.push_back(static_cast<std::uint8_t>(raw >> 8));
    }
    return sha256_hex(bytes);
}

BitStream extract_stream(const SampleBlock& samples, const EntropyReport& report, const ToeplitzSeed& seed,
                         unsigned workers) {
    if (samples.adc_bits != report.samples_bits) throw DomainError("extract: sample width does not match entropy report");
    const double ratio = static_cast<double>(seed.n_out()) / static_cast<double>(seed.n_in());
    if (ratio > report.extraction_ratio + 1e-12) throw ComputeError("extraction exceeds entropy budget");

    const BitStream raw = serialize_samples(samples);
    const std::size_t n_blocks = raw.size() / seed.n_in();
    const ToeplitzHasher hasher(seed);

    std::vector<BitStream> outputs(n_blocks);
    parallel_for(n_blocks, [&](std::size_t b) {
        std::vector<std::uint64_t> words(hasher.input_words());
        load_bits(raw.bytes(), b * seed.n_in(), seed.n_in(), words);
        outputs[b].reserve(seed.n_out());
        hasher.hash_words(words, outputs[b]);
    }, workers);

    BitStream result;
    result.reserve(n_blocks * seed.n_out());
    for (const auto& out : outputs) result.append(out);
    result.provenance = {sample_block_hash(samples), seed.hash(), report.extraction_ratio};
    return result;
}

} // namespace qrng
