#include "qrng/io.hpp"
#include "qrng/rng.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace qrng;

namespace {

SampleBlock random_block(std::size_t n, int bits, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    SampleBlock b;
    b.adc_bits = bits;
    b.adc_scale = 3.90625e-5;
    b.sample_rate_hz = 5e8;
    b.rng_seed = seed;
    b.samples.resize(n);
    const std::uint64_t span = std::uint64_t{1} << bits;
    for (auto& s : b.samples) s = static_cast<std::int16_t>(static_cast<std::int64_t>(rng() % span) - static_cast<std::int64_t>(span / 2));
    return b;
}

std::string to_bytes(const SampleBlock& b) {
    std::ostringstream o;
    write_samples(b, o);
    return o.str();
}

IoErrorKind kind_of(const std::string& bytes) {
    std::istringstream in(bytes);
    try {
        read_samples(in);
    } catch (const IoError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error";
    return IoErrorKind::sink_failure;
}

} // namespace

TEST(Samples, RoundTripAllWidths) {
    for (int bits : {1, 4, 8, 12, 16}) {
        const auto block = random_block(1000, bits, static_cast<std::uint64_t>(bits));
        const auto bytes = to_bytes(block);
        std::istringstream in(bytes);
        const auto back = read_samples(in);
        EXPECT_EQ(back, block) << bits;
        EXPECT_EQ(to_bytes(back), bytes);
    }
}

TEST(Samples, ImportedOriginWithoutSeed) {
    auto block = random_block(10, 8, 1);
    block.origin = SampleOrigin::imported;
    block.rng_seed.reset();
    std::istringstream in(to_bytes(block));
    EXPECT_EQ(read_samples(in), block);
}

TEST(Samples, HeaderLayout) {
    const auto bytes = to_bytes(random_block(3, 8, 2));
    EXPECT_EQ(bytes.substr(0, 4), "QRNG");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(bytes[6], 0); // samples
    std::istringstream in(bytes);
    const auto h = read_header(in);
    EXPECT_EQ(h.metadata.at("count"), "3");
    EXPECT_EQ(h.metadata.at("adc_bits"), "8");
    EXPECT_EQ(h.metadata.at("adc_scale"), "3.90625e-05");
    EXPECT_EQ(h.payload_length, 3U);
    const std::size_t meta_len = static_cast<unsigned char>(bytes[8]) | static_cast<unsigned char>(bytes[9]) << 8;
    EXPECT_EQ(bytes.size(), 20U + meta_len + 3U);
}

TEST(Samples, NegativeCodesMaskedToWidth) {
    SampleBlock b;
    b.adc_bits = 12;
    b.samples = {-1, -2048, 2047};
    const auto bytes = to_bytes(b);
    const auto payload = bytes.substr(bytes.size() - 6);
    EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0xFF);
    EXPECT_EQ(static_cast<unsigned char>(payload[1]), 0x0F);
    EXPECT_EQ(static_cast<unsigned char>(payload[3]), 0x08);
}

TEST(Samples, Errors) {
    const auto good = to_bytes(random_block(16, 8, 3));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(kind_of(bad_magic), IoErrorKind::bad_magic);
    auto bad_version = good;
    bad_version[4] = 2;
    EXPECT_EQ(kind_of(bad_version), IoErrorKind::bad_version);
    EXPECT_EQ(kind_of(good.substr(0, good.size() - 1)), IoErrorKind::truncated);
    EXPECT_EQ(kind_of(good.substr(0, 10)), IoErrorKind::truncated);
    EXPECT_EQ(kind_of(""), IoErrorKind::truncated);

    std::ostringstream bits_file;
    write_bits(BitStream({0x01}, 3), bits_file);
    EXPECT_EQ(kind_of(bits_file.str()), IoErrorKind::wrong_kind);
}

TEST(Samples, RejectsMismatchedCount) {
    auto bytes = to_bytes(random_block(4, 8, 4));
    const auto pos = bytes.find("count=4");
    bytes[pos + 6] = '5';
    EXPECT_EQ(kind_of(bytes), IoErrorKind::malformed);
}

TEST(Bits, RoundTripWithProvenance) {
    Xoshiro256pp rng(5);
    for (std::size_t n : {0U, 1U, 7U, 8U, 1001U}) {
        BitStream bits;
        for (std::size_t i = 0; i < n; ++i) bits.push_back(rng() & 1);
        bits.provenance = {"abc", "def", 0.703125};
        std::ostringstream out;
        write_bits(bits, out);
        std::istringstream in(out.str());
        const auto back = read_bits(in);
        EXPECT_EQ(back, bits) << n;
        std::ostringstream again;
        write_bits(back, again);
        EXPECT_EQ(again.str(), out.str());
    }
}

TEST(Bits, RejectsNonzeroPadding) {
    std::ostringstream out;
    write_bits(BitStream({0x05}, 3), out);
    auto bytes = out.str();
    bytes.back() = static_cast<char>(0x0D);
    std::istringstream in(bytes);
    try {
        read_bits(in);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_EQ(e.kind(), IoErrorKind::malformed);
    }
}

TEST(Report, RoundTrip) {
    const std::string json = R"({"qcnr": 3.38, "min_entropy_bits": 5.8})";
    std::ostringstream out;
    write_report(json, out);
    std::istringstream in(out.str());
    EXPECT_EQ(read_report(in), json);
}

TEST(Ascii, Export) {
    std::ostringstream out;
    export_bits_ascii(BitStream({0x05}, 3), out);
    EXPECT_EQ(out.str(), "101");
    std::ostringstream lines;
    export_bits_ascii(BitStream({0x0F}, 6), lines, 4);
    EXPECT_EQ(lines.str(), "1111\n00");
}

TEST(Sink, FailureReported) {
    std::ostringstream out;
    out.setstate(std::ios::badbit);
    try {
        write_samples(random_block(4, 8, 6), out);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_EQ(e.kind(), IoErrorKind::sink_failure);
    }
}
