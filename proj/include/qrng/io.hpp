#pragma once

#include "qrng/model.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>

namespace qrng {

// Container layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "QRNG"
//   4       2     version (currently 1)
//   6       1     payload kind (0 samples, 1 bits, 2 report)
//   7       1     reserved, zero
//   8       4     metadata length M
//   12      M     metadata, "key=value\n" lines sorted by key, UTF-8
//   12+M    8     payload length L
//   20+M    L     payload
//
// Sample payload: each code in ceil(adc_bits / 8) bytes, two's complement.
// Bit payload: packed bits, least-significant bit first within each byte.
// Report payload: UTF-8 JSON text.

inline constexpr std::uint16_t kFormatVersion = 1;

enum class PayloadKind : std::uint8_t { samples = 0, bits = 1, report = 2 };

enum class IoErrorKind { bad_magic, bad_version, truncated, malformed, wrong_kind, sink_failure };

class IoError : public std::runtime_error {
  public:
    IoError(IoErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

  private:
    IoErrorKind kind_;
};

struct FileHeader {
    std::uint16_t version = kFormatVersion;
    PayloadKind payload_kind = PayloadKind::samples;
    std::map<std::string, std::string> metadata;
    std::uint64_t payload_length = 0;
};

/// Reads and checks the header, leaving the stream at the start of the payload.
FileHeader read_header(std::istream& in);

std::size_t write_samples(const SampleBlock& block, std::ostream& out);
SampleBlock read_samples(std::istream& in);

std::size_t write_bits(const BitStream& bits, std::ostream& out);
BitStream read_bits(std::istream& in);

std::size_t write_report(const std::string& json, std::ostream& out);
std::string read_report(std::istream& in);

/// Bits as ASCII '0'/'1', as read by the reference SP800-22 tools. A newline is
/// written after every bits_per_line bits when bits_per_line > 0.
void export_bits_ascii(const BitStream& bits, std::ostream& out, std::size_t bits_per_line = 0);

} // namespace qrng
