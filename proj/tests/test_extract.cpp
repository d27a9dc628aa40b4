#include "qrng/error.hpp"
#include "qrng/extract.hpp"
#include "qrng/rng.hpp"

#include <gtest/gtest.h>

using namespace qrng;

namespace {

BitStream from_string(const std::string& s) {
    BitStream b;
    for (char c : s) b.push_back(c == '1');
    return b;
}

BitStream random_bits(Xoshiro256pp& rng, std::size_t n) {
    BitStream b;
    for (std::size_t i = 0; i < n; ++i) b.push_back(rng() >> 63);
    return b;
}

// y_i = XOR_j T[i][j] x_j with T[i][j] = s[n_out - 1 - i + j], written out in full.
BitStream matrix_oracle(const BitStream& s, const BitStream& x, std::size_t n_out) {
    const std::size_t n_in = x.size();
    std::vector<std::vector<int>> t(n_out, std::vector<int>(n_in));
    for (std::size_t i = 0; i < n_out; ++i)
        for (std::size_t j = 0; j < n_in; ++j) t[i][j] = s[n_out - 1 - i + j];
    BitStream y;
    for (std::size_t i = 0; i < n_out; ++i) {
        int acc = 0;
        for (std::size_t j = 0; j < n_in; ++j) acc ^= t[i][j] & static_cast<int>(x[j]);
        y.push_back(acc);
    }
    return y;
}

BitStream xor_bits(const BitStream& a, const BitStream& b) {
    BitStream out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] != b[i]);
    return out;
}

} // namespace

TEST(Toeplitz, HandWorkedExample) {
    const ToeplitzSeed seed(from_string("101011"), 4, 3, 0);
    // Rows: 1011, 0101, 1010.
    EXPECT_TRUE(seed.entry(0, 0));
    EXPECT_FALSE(seed.entry(0, 1));
    EXPECT_FALSE(seed.entry(1, 0));
    EXPECT_TRUE(seed.entry(2, 0));
    EXPECT_EQ(toeplitz_hash(seed, from_string("1100")), from_string("111"));
}

TEST(Toeplitz, ConstantDiagonals) {
    const auto seed = ToeplitzSeed::generate(70, 33, 9);
    for (std::size_t i = 1; i < 33; ++i)
        for (std::size_t j = 1; j < 70; ++j) ASSERT_EQ(seed.entry(i, j), seed.entry(i - 1, j - 1));
}

TEST(Toeplitz, MatchesExplicitMatrix) {
    Xoshiro256pp rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n_in = 1 + rng() % 200;
        const std::size_t n_out = 1 + rng() % n_in;
        const auto seed = ToeplitzSeed::generate(n_in, n_out, rng());
        const auto x = random_bits(rng, n_in);
        ASSERT_EQ(toeplitz_hash(seed, x), matrix_oracle(seed.bits(), x, n_out)) << n_in << 'x' << n_out;
    }
}

TEST(Toeplitz, ProductionSizeMatchesOracle) {
    Xoshiro256pp rng(8);
    const auto seed = ToeplitzSeed::generate(4096, 2867, 99);
    const auto x = random_bits(rng, 4096);
    EXPECT_EQ(toeplitz_hash(seed, x), matrix_oracle(seed.bits(), x, 2867));
}

TEST(Toeplitz, LinearOverGf2) {
    Xoshiro256pp rng(17);
    const auto seed = ToeplitzSeed::generate(300, 200, 1);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_bits(rng, 300);
        const auto b = random_bits(rng, 300);
        ASSERT_EQ(toeplitz_hash(seed, xor_bits(a, b)), xor_bits(toeplitz_hash(seed, a), toeplitz_hash(seed, b)));
    }
    EXPECT_EQ(toeplitz_hash(seed, BitStream(std::vector<std::uint8_t>(38, 0), 300)), BitStream(std::vector<std::uint8_t>(25, 0), 200));
}

TEST(Toeplitz, SeedValidation) {
    EXPECT_THROW(ToeplitzSeed(from_string("10101"), 4, 3, 0), DomainError);
    EXPECT_THROW(ToeplitzSeed(from_string("1010111"), 3, 5, 0), DomainError);
    const ToeplitzSeed seed(from_string("101011"), 4, 3, 0);
    EXPECT_THROW(toeplitz_hash(seed, from_string("110")), DomainError);
}

TEST(Toeplitz, SeedGenerationDeterministic) {
    const auto a = ToeplitzSeed::generate(4096, 2000, 5);
    const auto b = ToeplitzSeed::generate(4096, 2000, 5);
    EXPECT_EQ(a.bits(), b.bits());
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 64U);
    EXPECT_NE(a.hash(), ToeplitzSeed::generate(4096, 2000, 6).hash());
}

TEST(Serialize, TwosComplementLsbFirst) {
    SampleBlock block;
    block.adc_bits = 3;
    block.samples = {-1, 2, -4};
    EXPECT_EQ(serialize_samples(block), from_string("111" "010" "001"));
}

TEST(SampleHash, KnownDigestOfEmptyBlock) {
    SampleBlock block;
    block.adc_bits = 8;
    // SHA-256 of the single byte 0x08.
    EXPECT_EQ(sample_block_hash(block), "beead77994cf573341ec17b58bbf7eb34d2711c993c1d976b128b3188dc1829a");
}

namespace {

SampleBlock random_block(std::size_t n, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    SampleBlock block;
    block.samples.resize(n);
    for (auto& s : block.samples) s = static_cast<std::int16_t>(static_cast<int>(rng() % 256) - 128);
    return block;
}

EntropyReport report_with_ratio(double ratio) {
    EntropyReport r;
    r.qcnr = 3.0;
    r.sigma_sq_total = 1.0;
    r.sigma_sq_quantum = 0.75;
    r.min_entropy_bits = 6.0;
    r.samples_bits = 8;
    r.extraction_ratio = ratio;
    return r;
}

} // namespace

TEST(ExtractStream, BlocksInOrderPartialDropped) {
    const auto block = random_block(1100, 3); // 8800 bits: two 4096-bit blocks
    const auto seed = ToeplitzSeed::generate(4096, 2048, 4);
    const auto out = extract_stream(block, report_with_ratio(0.7), seed);
    ASSERT_EQ(out.size(), 4096U);

    const auto raw = serialize_samples(block);
    for (std::size_t b = 0; b < 2; ++b) {
        BitStream in;
        for (std::size_t i = 0; i < 4096; ++i) in.push_back(raw[b * 4096 + i]);
        const auto expected = toeplitz_hash(seed, in);
        for (std::size_t i = 0; i < 2048; ++i) ASSERT_EQ(out[b * 2048 + i], expected[i]);
    }
    EXPECT_EQ(out.provenance.source_hash, sample_block_hash(block));
    EXPECT_EQ(out.provenance.seed_hash, seed.hash());
    EXPECT_EQ(out.provenance.extraction_ratio, 0.7);
}

TEST(ExtractStream, UnalignedBlockSize) {
    const auto block = random_block(500, 5);
    const auto seed = ToeplitzSeed::generate(1000, 333, 6); // 4 blocks starting at bits 0, 1000, 2000, 3000
    const auto out = extract_stream(block, report_with_ratio(0.5), seed);
    const auto raw = serialize_samples(block);
    ASSERT_EQ(out.size(), 4U * 333U);
    BitStream in;
    for (std::size_t i = 0; i < 1000; ++i) in.push_back(raw[3000 + i]);
    const auto expected = toeplitz_hash(seed, in);
    for (std::size_t i = 0; i < 333; ++i) ASSERT_EQ(out[3 * 333 + i], expected[i]);
}

TEST(ExtractStream, WorkerCountDoesNotChangeOutput) {
    const auto block = random_block(20000, 7);
    const auto seed = ToeplitzSeed::generate(4096, 2800, 8);
    EXPECT_EQ(extract_stream(block, report_with_ratio(0.7), seed, 1), extract_stream(block, report_with_ratio(0.7), seed, 4));
}

TEST(ExtractStream, EnforcesBudget) {
    const auto block = random_block(1000, 9);
    const auto seed = ToeplitzSeed::generate(4096, 3000, 10);
    try {
        extract_stream(block, report_with_ratio(0.7), seed);
        FAIL();
    } catch (const ComputeError& e) {
        EXPECT_NE(std::string(e.what()).find("extraction exceeds entropy budget"), std::string::npos);
    }
    auto mismatched = report_with_ratio(0.75);
    mismatched.samples_bits = 12;
    EXPECT_THROW(extract_stream(block, mismatched, seed), DomainError);
}
