#include "qrng/io.hpp"

#include "qrng/error.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace qrng {

namespace {

constexpr std::array<char, 4> kMagic = {'Q', 'R', 'N', 'G'};
constexpr std::uint64_t kMaxMetadata = 1U << 20;

template<typename T>
void put_le(std::string& buf, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template<typename T>
T get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> raw{};
    if (!in.read(reinterpret_cast<char*>(raw.data()), raw.size())) {
        throw IoError(IoErrorKind::truncated, std::string("truncated: ") + what);
    }
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
    return static_cast<T>(v);
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), res.ptr};
}

double parse_double(const std::string& s, const char* key) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError(IoErrorKind::malformed, std::string("malformed metadata value for ") + key);
    }
    return v;
}

std::uint64_t parse_u64(const std::string& s, const char* key) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw IoError(IoErrorKind::malformed, std::string("malformed metadata value for ") + key);
    }
    return v;
}

const std::string& require(const FileHeader& h, const char* key) {
    const auto it = h.metadata.find(key);
    if (it == h.metadata.end()) throw IoError(IoErrorKind::malformed, std::string("missing metadata key ") + key);
    return it->second;
}

std::size_t write_container(std::ostream& out, PayloadKind kind, const std::map<std::string, std::string>& metadata,
                            const std::string& payload) {
    std::string meta;
    for (const auto& [k, v] : metadata) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw DomainError("metadata keys may not contain '=' or newlines");
        }
        meta += k;
        meta += '=';
        meta += v;
        meta += '\n';
    }
    std::string head(kMagic.begin(), kMagic.end());
    put_le<std::uint16_t>(head, kFormatVersion);
    put_le<std::uint8_t>(head, static_cast<std::uint8_t>(kind));
    put_le<std::uint8_t>(head, 0);
    put_le<std::uint32_t>(head, static_cast<std::uint32_t>(meta.size()));
    head += meta;
    put_le<std::uint64_t>(head, payload.size());

    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw IoError(IoErrorKind::sink_failure, "write failed");
    return head.size() + payload.size();
}

std::string read_payload(std::istream& in, const FileHeader& h) {
    std::string payload(h.payload_length, '\0');
    if (h.payload_length > 0 && !in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
        throw IoError(IoErrorKind::truncated, "truncated payload");
    }
    return payload;
}

void expect_kind(const FileHeader& h, PayloadKind kind) {
    if (h.payload_kind != kind) throw IoError(IoErrorKind::wrong_kind, "unexpected payload kind");
}

} // namespace

FileHeader read_header(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size())) throw IoError(IoErrorKind::truncated, "truncated: magic");
    if (magic != kMagic) throw IoError(IoErrorKind::bad_magic, "bad magic");

    FileHeader h;
    h.version = get_le<std::uint16_t>(in, "version");
    if (h.version != kFormatVersion) throw IoError(IoErrorKind::bad_version, "unsupported version " + std::to_string(h.version));
    const auto kind = get_le<std::uint8_t>(in, "payload kind");
    if (kind > static_cast<std::uint8_t>(PayloadKind::report)) throw IoError(IoErrorKind::malformed, "unknown payload kind");
    h.payload_kind = static_cast<PayloadKind>(kind);
    get_le<std::uint8_t>(in, "reserved");

    const auto meta_len = get_le<std::uint32_t>(in, "metadata length");
    if (meta_len > kMaxMetadata) throw IoError(IoErrorKind::malformed, "metadata block too large");
    std::string meta(meta_len, '\0');
    if (meta_len > 0 && !in.read(meta.data(), meta_len)) throw IoError(IoErrorKind::truncated, "truncated: metadata");
    std::istringstream lines(meta);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError(IoErrorKind::malformed, "metadata line without '='");
        h.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }
    h.payload_length = get_le<std::uint64_t>(in, "payload length");
    return h;
}

std::size_t write_samples(const SampleBlock& block, std::ostream& out) {
    block.validate();
    const std::size_t width = static_cast<std::size_t>(block.adc_bits + 7) / 8;
    std::string payload;
    payload.reserve(block.samples.size() * width);
    const auto mask = static_cast<std::uint16_t>((std::uint32_t{1} << block.adc_bits) - 1);
    for (const std::int16_t s : block.samples) {
        const auto raw = static_cast<std::uint16_t>(static_cast<std::uint16_t>(s) & mask);
        for (std::size_t b = 0; b < width; ++b) payload.push_back(static_cast<char>((raw >> (8 * b)) & 0xFF));
    }
    std::map<std::string, std::string> meta{
        {"adc_bits", std::to_string(block.adc_bits)},
        {"adc_scale", format_double(block.adc_scale)},
        {"count", std::to_string(block.samples.size())},
        {"origin", block.origin == SampleOrigin::simulated ? "simulated" : "imported"},
        {"sample_rate_hz", format_double(block.sample_rate_hz)},
    };
    if (block.rng_seed) meta["rng_seed"] = std::to_string(*block.rng_seed);
    return write_container(out, PayloadKind::samples, meta, payload);
}

SampleBlock read_samples(std::istream& in) {
    const auto h = read_header(in);
    expect_kind(h, PayloadKind::samples);

    SampleBlock block;
    block.adc_bits = static_cast<int>(parse_u64(require(h, "adc_bits"), "adc_bits"));
    if (block.adc_bits < 1 || block.adc_bits > 16) throw IoError(IoErrorKind::malformed, "adc_bits out of range");
    block.adc_scale = parse_double(require(h, "adc_scale"), "adc_scale");
    block.sample_rate_hz = parse_double(require(h, "sample_rate_hz"), "sample_rate_hz");
    const auto& origin = require(h, "origin");
    if (origin == "simulated") {
        block.origin = SampleOrigin::simulated;
    } else if (origin == "imported") {
        block.origin = SampleOrigin::imported;
    } else {
        throw IoError(IoErrorKind::malformed, "unknown origin " + origin);
    }
    if (const auto it = h.metadata.find("rng_seed"); it != h.metadata.end()) block.rng_seed = parse_u64(it->second, "rng_seed");

    const std::size_t width = static_cast<std::size_t>(block.adc_bits + 7) / 8;
    const auto count = parse_u64(require(h, "count"), "count");
    if (count * width != h.payload_length) throw IoError(IoErrorKind::malformed, "payload length does not match sample count");

    const auto payload = read_payload(in, h);
    block.samples.resize(count);
    const int sign_shift = 16 - block.adc_bits;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint16_t raw = 0;
        for (std::size_t b = 0; b < width; ++b) raw |= static_cast<std::uint16_t>(static_cast<unsigned char>(payload[i * width + b]) << (8 * b));
        // Sign-extend from adc_bits.
        block.samples[i] = static_cast<std::int16_t>(static_cast<std::int16_t>(raw << sign_shift) >> sign_shift);
    }
    try {
        block.validate();
    } catch (const DomainError& e) {
        throw IoError(IoErrorKind::malformed, e.what());
    }
    return block;
}

std::size_t write_bits(const BitStream& bits, std::ostream& out) {
    const auto& bytes = bits.bytes();
    const std::string payload(bytes.begin(), bytes.end());
    std::map<std::string, std::string> meta{
        {"count", std::to_string(bits.size())},
        {"extraction_ratio", format_double(bits.provenance.extraction_ratio)},
        {"seed_hash", bits.provenance.seed_hash},
        {"source_hash", bits.provenance.source_hash},
    };
    return write_container(out, PayloadKind::bits, meta, payload);
}

BitStream read_bits(std::istream& in) {
    const auto h = read_header(in);
    expect_kind(h, PayloadKind::bits);
    const auto count = parse_u64(require(h, "count"), "count");
    if ((count + 7) / 8 != h.payload_length) throw IoError(IoErrorKind::malformed, "payload length does not match bit count");
    const auto payload = read_payload(in, h);
    if (count % 8 != 0 && (static_cast<unsigned char>(payload.back()) >> (count % 8)) != 0) {
        throw IoError(IoErrorKind::malformed, "nonzero pad bits");
    }
    BitStream bits(std::vector<std::uint8_t>(payload.begin(), payload.end()), count);
    bits.provenance.source_hash = require(h, "source_hash");
    bits.provenance.seed_hash = require(h, "seed_hash");
    bits.provenance.extraction_ratio = parse_double(require(h, "extraction_ratio"), "extraction_ratio");
    return bits;
}

std::size_t write_report(const std::string& json, std::ostream& out) {
    return write_container(out, PayloadKind::report, {{"content_type", "application/json"}}, json);
}

std::string read_report(std::istream& in) {
    const auto h = read_header(in);
    expect_kind(h, PayloadKind::report);
    return read_payload(in, h);
}

void export_bits_ascii(const BitStream& bits, std::ostream& out, std::size_t bits_per_line) {
    std::string line;
    line.reserve(bits_per_line > 0 ? bits_per_line + 1 : 4096);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        line.push_back(bits[i] ? '1' : '0');
        if (bits_per_line > 0 && (i + 1) % bits_per_line == 0) line.push_back('\n');
        if (line.size() >= 4096) {
            out << line;
            line.clear();
        }
    }
    out << line;
    if (!out) throw IoError(IoErrorKind::sink_failure, "write failed");
}

} // namespace qrng
