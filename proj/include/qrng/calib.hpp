#pragma once

#include "qrng/model.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qrng {

struct PowerSweepPoint {
    double power = 0.0;    ///< W at the interferometer
    double variance = 0.0; ///< V^2
    std::size_t n_samples = 2;

    void validate() const;
};

struct FringePoint {
    double phi2 = 0.0;     ///< rad, applied interferometer phase
    double variance = 0.0; ///< V^2
    std::size_t n_samples = 0;
};

struct FitOptions {
    /// Weight each point by the inverse variance of its variance estimate,
    /// n / (2 sigma^4). Off by default.
    bool weighted = false;
};

/// Least-squares fit of sigma^2 = AC P^2 + AQ P + F.
///
/// Needs at least four points at three distinct powers. A negative coefficient is
/// clamped to zero only when it lies within two standard errors (plus rounding) of
/// zero; anything more negative means the data do not follow the model.
VarianceFit fit_variance_vs_power(std::span<const PowerSweepPoint> points, const FitOptions& options = {});

/// AQ P / (AC P^2 + F).
double qcnr_from_fit(const VarianceFit& fit, double power);

struct OptimalPower {
    double power = 0.0;
    double qcnr = 0.0;
};

/// Analytic maximum of qcnr_from_fit: P* = sqrt(F / AC), QCNR* = AQ / (2 sqrt(AC F)).
OptimalPower qcnr_optimal_power(const VarianceFit& fit);

/// (sigma^2 - sigma_att^2) / sigma_att^2, with a small negative excess clamped to 0.
double qcnr_attenuation(double sigma_sq, double sigma_sq_att);

/// Relative power mismatch allowed between the direct and attenuated measurements.
inline constexpr double kPowerMatchTolerance = 0.01;

/// Attenuation estimate from two measurements at the same interferometer power.
double qcnr_attenuation(const PowerSweepPoint& direct, const PowerSweepPoint& attenuated);

/// Phase of maximum variance, refined by a parabola through the peak sample and
/// its two neighbours.
double find_quadrature(std::span<const FringePoint> fringe);

void write_sweep_csv(std::ostream& out, std::span<const PowerSweepPoint> points);
std::vector<PowerSweepPoint> read_sweep_csv(std::istream& in);

} // namespace qrng
