#include "qrng/stats.hpp"

#include "qrng/error.hpp"
#include "qrng/parallel.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>

namespace qrng {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

/// Real-to-complex DFT of length n; returns the n/2 + 1 non-redundant bins.
class RealFft {
  public:
    explicit RealFft(std::size_t n)
        : n_(n), in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
          out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
        std::lock_guard lock(fftw_planner_mutex());
        plan_.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE));
    }

    std::span<double> input() { return {in_.get(), n_}; }

    /// Squared magnitudes of bins [0, n/2].
    std::vector<double> power() {
        fftw_execute(plan_.get());
        std::vector<double> p(n_ / 2 + 1);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = out_.get()[k][0] * out_.get()[k][0] + out_.get()[k][1] * out_.get()[k][1];
        return p;
    }

  private:
    std::size_t n_;
    std::unique_ptr<double, FftwFree> in_;
    std::unique_ptr<fftw_complex, FftwFree> out_;
    std::unique_ptr<fftw_plan_s, PlanDestroy> plan_;
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void require_bits(std::span<const std::uint8_t> bits, std::size_t min_len, const char* test) {
    if (bits.size() < min_len) throw DomainError(std::string(test) + ": sequence too short");
}

/// Counts of the 2^m overlapping m-bit patterns, wrapping around the end.
std::vector<std::uint64_t> cyclic_pattern_counts(std::span<const std::uint8_t> bits, int m) {
    const std::size_t n = bits.size();
    std::vector<std::uint64_t> counts(std::size_t{1} << m, 0);
    const std::uint32_t mask = (std::uint32_t{1} << m) - 1;
    std::uint32_t window = 0;
    for (int k = 0; k < m - 1; ++k) window = (window << 1) | bits[static_cast<std::size_t>(k) % n];
    for (std::size_t i = 0; i < n; ++i) {
        window = ((window << 1) | bits[(i + static_cast<std::size_t>(m) - 1) % n]) & mask;
        ++counts[window];
    }
    return counts;
}

double pattern_square_sum(std::span<const std::uint8_t> bits, int m) {
    if (m <= 0) return 0.0;
    double acc = 0.0;
    for (auto c : cyclic_pattern_counts(bits, m)) acc += static_cast<double>(c) * static_cast<double>(c);
    return acc;
}

/// Sum over patterns of C log C, C being the cyclic pattern frequency.
double phi_statistic(std::span<const std::uint8_t> bits, int m) {
    if (m <= 0) return 0.0;
    const auto n = static_cast<double>(bits.size());
    double acc = 0.0;
    for (auto c : cyclic_pattern_counts(bits, m)) {
        if (c == 0) continue;
        const double freq = static_cast<double>(c) / n;
        acc += freq * std::log(freq);
    }
    return acc;
}

double cusum_pvalue(long long n, long long z) {
    if (z == 0) return 1.0;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    double sum1 = 0.0;
    for (long long k = (-n / z + 1) / 4; k <= (n / z - 1) / 4; ++k) {
        sum1 += normal_cdf(static_cast<double>((4 * k + 1) * z) / sqrt_n);
        sum1 -= normal_cdf(static_cast<double>((4 * k - 1) * z) / sqrt_n);
    }
    double sum2 = 0.0;
    for (long long k = (-n / z - 3) / 4; k <= (n / z - 1) / 4; ++k) {
        sum2 += normal_cdf(static_cast<double>((4 * k + 3) * z) / sqrt_n);
        sum2 -= normal_cdf(static_cast<double>((4 * k + 1) * z) / sqrt_n);
    }
    return std::clamp(1.0 - sum1 + sum2, 0.0, 1.0);
}

} // namespace

std::vector<double> autocorrelation(std::span<const double> samples, std::size_t max_lag) {
    const std::size_t n = samples.size();
    if (n < 10 * std::max<std::size_t>(max_lag, 1)) throw DomainError("autocorrelation: need at least 10 * max_lag samples");
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    std::vector<double> centred(n);
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        centred[i] = samples[i] - mean;
        denom += centred[i] * centred[i];
    }
    if (!(denom > 0.0)) throw ComputeError("autocorrelation: zero variance");

    std::vector<double> r(max_lag + 1);
    r[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) acc += centred[i] * centred[i + k];
        r[k] = acc / denom;
    }
    return r;
}

std::vector<double> to_double(std::span<const std::int16_t> samples) { return {samples.begin(), samples.end()}; }

std::vector<double> to_double(const BitStream& bits) {
    std::vector<double> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? 1.0 : 0.0;
    return out;
}

std::vector<PsdPoint> psd_welch(std::span<const double> samples, double sample_rate_hz, std::size_t segment_len) {
    if (segment_len < 2 || !std::has_single_bit(segment_len)) throw DomainError("psd: segment length must be a power of two");
    if (!(sample_rate_hz > 0.0)) throw DomainError("psd: sample rate must be positive");
    if (samples.size() < 2 * segment_len) throw DomainError("psd: segment longer than half the data");

    std::vector<double> window(segment_len);
    double window_power = 0.0;
    for (std::size_t i = 0; i < segment_len; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment_len)));
        window_power += window[i] * window[i];
    }

    RealFft fft(segment_len);
    const std::size_t hop = segment_len / 2;
    std::vector<double> acc(segment_len / 2 + 1, 0.0);
    std::size_t segments = 0;
    for (std::size_t start = 0; start + segment_len <= samples.size(); start += hop) {
        const auto seg = samples.subspan(start, segment_len);
        double mean = 0.0;
        for (double x : seg) mean += x;
        mean /= static_cast<double>(segment_len);
        auto in = fft.input();
        for (std::size_t i = 0; i < segment_len; ++i) in[i] = (seg[i] - mean) * window[i];
        const auto p = fft.power();
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += p[k];
        ++segments;
    }

    std::vector<PsdPoint> psd(acc.size());
    const double norm = 1.0 / (sample_rate_hz * window_power * static_cast<double>(segments));
    for (std::size_t k = 0; k < acc.size(); ++k) {
        const bool edge = k == 0 || k == segment_len / 2;
        psd[k].frequency_hz = sample_rate_hz * static_cast<double>(k) / static_cast<double>(segment_len);
        psd[k].density = acc[k] * norm * (edge ? 1.0 : 2.0);
    }
    return psd;
}

namespace nist {

double igamc(double a, double x) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(a, x);
}

double frequency(std::span<const std::uint8_t> bits) {
    require_bits(bits, 1, "frequency");
    long long sum = 0;
    for (auto b : bits) sum += b ? 1 : -1;
    const double s_obs = static_cast<double>(std::llabs(sum)) / std::sqrt(static_cast<double>(bits.size()));
    return std::erfc(s_obs / std::numbers::sqrt2);
}

double block_frequency(std::span<const std::uint8_t> bits, std::size_t block_len) {
    if (block_len == 0) throw DomainError("block frequency: block length must be positive");
    const std::size_t blocks = bits.size() / block_len;
    if (blocks == 0) throw DomainError("block frequency: sequence shorter than one block");
    double chi2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < block_len; ++j) ones += bits[b * block_len + j];
        const double pi = static_cast<double>(ones) / static_cast<double>(block_len) - 0.5;
        chi2 += pi * pi;
    }
    chi2 *= 4.0 * static_cast<double>(block_len);
    return igamc(static_cast<double>(blocks) / 2.0, chi2 / 2.0);
}

double runs(std::span<const std::uint8_t> bits) {
    require_bits(bits, 2, "runs");
    const auto n = static_cast<double>(bits.size());
    std::size_t ones = 0;
    for (auto b : bits) ones += b;
    const double pi = static_cast<double>(ones) / n;
    if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(n)) return 0.0;
    std::size_t v = 1;
    for (std::size_t k = 0; k + 1 < bits.size(); ++k) v += bits[k] != bits[k + 1];
    const double num = std::abs(static_cast<double>(v) - 2.0 * n * pi * (1.0 - pi));
    const double den = 2.0 * std::sqrt(2.0 * n) * pi * (1.0 - pi);
    return std::erfc(num / den);
}

double longest_run_of_ones(std::span<const std::uint8_t> bits) {
    const std::size_t n = bits.size();
    require_bits(bits, 128, "longest run");
    std::size_t m;
    int v_lo;
    std::vector<double> pi;
    if (n < 6272) {
        m = 8;
        v_lo = 1;
        pi = {0.21484375, 0.3671875, 0.23046875, 0.1875};
    } else if (n < 750000) {
        m = 128;
        v_lo = 4;
        pi = {0.1174035788, 0.242955959, 0.249363483, 0.17517706, 0.102701071, 0.112398847};
    } else {
        m = 10000;
        v_lo = 10;
        pi = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
    }
    const std::size_t k_cat = pi.size() - 1;
    const std::size_t blocks = n / m;
    std::vector<double> counts(pi.size(), 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
        int run = 0, longest = 0;
        for (std::size_t j = 0; j < m; ++j) {
            run = bits[b * m + j] ? run + 1 : 0;
            longest = std::max(longest, run);
        }
        const int cat = std::clamp(longest - v_lo, 0, static_cast<int>(k_cat));
        counts[static_cast<std::size_t>(cat)] += 1.0;
    }
    double chi2 = 0.0;
    const auto nb = static_cast<double>(blocks);
    for (std::size_t i = 0; i < pi.size(); ++i) chi2 += (counts[i] - nb * pi[i]) * (counts[i] - nb * pi[i]) / (nb * pi[i]);
    return igamc(static_cast<double>(k_cat) / 2.0, chi2 / 2.0);
}

std::array<double, 2> cumulative_sums(std::span<const std::uint8_t> bits) {
    require_bits(bits, 1, "cumulative sums");
    const auto n = static_cast<long long>(bits.size());
    long long s = 0, z_fwd = 0;
    for (auto b : bits) {
        s += b ? 1 : -1;
        z_fwd = std::max(z_fwd, std::llabs(s));
    }
    s = 0;
    long long z_bwd = 0;
    for (auto it = bits.rbegin(); it != bits.rend(); ++it) {
        s += *it ? 1 : -1;
        z_bwd = std::max(z_bwd, std::llabs(s));
    }
    return {cusum_pvalue(n, z_fwd), cusum_pvalue(n, z_bwd)};
}

double spectral(std::span<const std::uint8_t> bits) {
    require_bits(bits, 2, "spectral");
    const std::size_t n = bits.size();
    RealFft fft(n);
    auto in = fft.input();
    for (std::size_t i = 0; i < n; ++i) in[i] = bits[i] ? 1.0 : -1.0;
    const auto p = fft.power();
    const auto nd = static_cast<double>(n);
    const double threshold_sq = std::log(1.0 / 0.05) * nd; // T^2
    std::size_t below = 0;
    for (std::size_t k = 0; k < n / 2; ++k) below += p[k] < threshold_sq;
    const double expected = 0.95 * nd / 2.0;
    const double d = (static_cast<double>(below) - expected) / std::sqrt(nd * 0.95 * 0.05 / 4.0);
    return std::erfc(std::abs(d) / std::numbers::sqrt2);
}

std::array<double, 2> serial(std::span<const std::uint8_t> bits, int block_len) {
    if (block_len < 2 || block_len > 24) throw DomainError("serial: block length must be in [2, 24]");
    require_bits(bits, static_cast<std::size_t>(block_len), "serial");
    const auto n = static_cast<double>(bits.size());
    auto psi = [&](int m) { return m <= 0 ? 0.0 : std::ldexp(pattern_square_sum(bits, m), m) / n - n; };
    const double psi_m = psi(block_len);
    const double psi_m1 = psi(block_len - 1);
    const double psi_m2 = psi(block_len - 2);
    const double del1 = psi_m - psi_m1;
    const double del2 = psi_m - 2.0 * psi_m1 + psi_m2;
    return {igamc(std::ldexp(1.0, block_len - 2), del1 / 2.0), igamc(std::ldexp(1.0, block_len - 3), del2 / 2.0)};
}

double approximate_entropy(std::span<const std::uint8_t> bits, int block_len) {
    if (block_len < 1 || block_len > 24) throw DomainError("approximate entropy: block length must be in [1, 24]");
    require_bits(bits, static_cast<std::size_t>(block_len) + 1, "approximate entropy");
    const auto n = static_cast<double>(bits.size());
    const double ap_en = phi_statistic(bits, block_len) - phi_statistic(bits, block_len + 1);
    const double chi2 = 2.0 * n * (std::log(2.0) - ap_en);
    return igamc(std::ldexp(1.0, block_len - 1), chi2 / 2.0);
}

} // namespace nist

double uniformity_pvalue(std::span<const double> pvalues) {
    if (pvalues.empty()) throw DomainError("uniformity: no p-values");
    std::array<double, 10> bins{};
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("uniformity: p-value outside [0, 1]");
        bins[std::min<std::size_t>(static_cast<std::size_t>(p * 10.0), 9)] += 1.0;
    }
    const double expected = static_cast<double>(pvalues.size()) / 10.0;
    double chi2 = 0.0;
    for (double c : bins) chi2 += (c - expected) * (c - expected) / expected;
    return nist::igamc(4.5, chi2 / 2.0);
}

double pass_rate_threshold(std::size_t n_sequences) {
    if (n_sequences == 0) throw DomainError("pass rate threshold: no sequences");
    const double p = 1.0 - kSignificance;
    return p - 3.0 * std::sqrt(p * kSignificance / static_cast<double>(n_sequences));
}

std::vector<TestReport> nist_subset(const BitStream& bits, std::size_t n_sequences, std::size_t seq_len_bits,
                                    unsigned workers) {
    if (seq_len_bits < 100) throw DomainError("nist subset: sequences must be at least 100 bits");
    if (n_sequences == 0) throw DomainError("nist subset: need at least one sequence");
    if (bits.size() < n_sequences * seq_len_bits) throw DomainError("nist subset: insufficient bits");

    const int log2n = std::bit_width(seq_len_bits) - 1;
    const int serial_m = std::clamp(log2n - 3, 2, 16);
    const int apen_m = std::clamp(log2n - 6, 2, 10);
    const bool with_longest_run = seq_len_bits >= 128;

    std::vector<std::string> names = {"Frequency", "BlockFrequency", "CumulativeSums-Forward", "CumulativeSums-Backward", "Runs"};
    if (with_longest_run) names.emplace_back("LongestRun");
    for (const char* name : {"FFT", "Serial-1", "Serial-2", "ApproximateEntropy"}) names.emplace_back(name);

    std::vector<std::vector<double>> per_seq(n_sequences);
    parallel_for(n_sequences, [&](std::size_t s) {
        const auto seq = bits.unpack(s * seq_len_bits, seq_len_bits);
        auto& out = per_seq[s];
        out.push_back(nist::frequency(seq));
        out.push_back(nist::block_frequency(seq, 128));
        const auto cusum = nist::cumulative_sums(seq);
        out.push_back(cusum[0]);
        out.push_back(cusum[1]);
        out.push_back(nist::runs(seq));
        if (with_longest_run) out.push_back(nist::longest_run_of_ones(seq));
        out.push_back(nist::spectral(seq));
        const auto ser = nist::serial(seq, serial_m);
        out.push_back(ser[0]);
        out.push_back(ser[1]);
        out.push_back(nist::approximate_entropy(seq, apen_m));
    }, workers);

    std::vector<TestReport> reports(names.size());
    for (std::size_t t = 0; t < names.size(); ++t) {
        auto& r = reports[t];
        r.test_name = names[t];
        r.per_sequence_pvalues.reserve(n_sequences);
        std::size_t passed = 0;
        for (const auto& seq : per_seq) {
            const double p = std::clamp(seq[t], 0.0, 1.0);
            r.per_sequence_pvalues.push_back(p);
            passed += p >= kSignificance;
        }
        r.pass_rate = static_cast<double>(passed) / static_cast<double>(n_sequences);
        r.uniformity_pvalue = uniformity_pvalue(r.per_sequence_pvalues);
    }
    return reports;
}

void write_reports_csv(std::ostream& out, std::span<const TestReport> reports) {
    out << "test,pass_rate,uniformity_p\n";
    out.precision(6);
    for (const auto& r : reports) out << r.test_name << ',' << r.pass_rate << ',' << r.uniformity_pvalue << '\n';
}

void write_psd_csv(std::ostream& out, std::span<const PsdPoint> psd) {
    out << "frequency_hz,density\n";
    out.precision(10);
    for (const auto& p : psd) out << p.frequency_hz << ',' << p.density << '\n';
}

void write_autocorrelation_csv(std::ostream& out, std::span<const double> r) {
    out << "lag,r\n";
    out.precision(10);
    for (std::size_t k = 0; k < r.size(); ++k) out << k << ',' << r[k] << '\n';
}

} // namespace qrng
