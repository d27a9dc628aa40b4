#include "qrng/calib.hpp"

#include "qrng/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace qrng {

void PowerSweepPoint::validate() const {
    if (!(power >= 0.0)) throw DomainError("sweep point: power must be nonnegative");
    if (!(variance >= 0.0)) throw DomainError("sweep point: variance must be nonnegative");
    if (n_samples < 2) throw DomainError("sweep point: at least two samples per variance");
}

VarianceFit fit_variance_vs_power(std::span<const PowerSweepPoint> points, const FitOptions& options) {
    for (const auto& p : points) p.validate();
    std::set<double> distinct;
    for (const auto& p : points) distinct.insert(p.power);
    if (points.size() < 4 || distinct.size() < 3) {
        throw ComputeError("rank deficient: need at least 4 points at 3 distinct powers");
    }

    const auto n = static_cast<Eigen::Index>(points.size());
    const double p_max = *distinct.rbegin();
    // Columns scaled to O(1) so the QR sees a well-conditioned problem.
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    double y_max = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        const double u = p.power / p_max;
        x(i, 0) = u * u;
        x(i, 1) = u;
        x(i, 2) = 1.0;
        y(i) = p.variance;
        y_max = std::max(y_max, p.variance);
        if (options.weighted) {
            const double v = std::max(p.variance, 1e-300);
            w(i) = static_cast<double>(p.n_samples) / (2.0 * v * v);
        }
    }
    w /= w.maxCoeff();
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * x;
    const Eigen::VectorXd yw = sw.asDiagonal() * y;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    if (qr.rank() < 3) throw ComputeError("rank deficient: design matrix has rank < 3");
    Eigen::Vector3d beta = qr.solve(yw);

    // Standard errors from the residual scatter, for the clamping rule.
    const Eigen::VectorXd resid_w = yw - xw * beta;
    const double dof = static_cast<double>(n - 3);
    const double s2 = dof > 0 ? resid_w.squaredNorm() / dof : 0.0;
    const Eigen::Matrix3d cov = s2 * (xw.transpose() * xw).inverse();
    for (int j = 0; j < 3; ++j) {
        if (beta(j) >= 0.0) continue;
        const double tolerance = 2.0 * std::sqrt(std::max(cov(j, j), 0.0)) + 1e-9 * y_max;
        if (-beta(j) > tolerance) throw ComputeError("model mismatch: fitted coefficient is negative");
        beta(j) = 0.0;
    }

    VarianceFit fit;
    fit.ac = beta(0) / (p_max * p_max);
    fit.aq = beta(1) / p_max;
    fit.f = beta(2);

    const double mean = y.mean();
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = y(i) - predicted_variance(fit, points[static_cast<std::size_t>(i)].power);
        ss_res += r * r;
        ss_tot += (y(i) - mean) * (y(i) - mean);
    }
    fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return fit;
}

double qcnr_from_fit(const VarianceFit& fit, double power) {
    if (!(power > 0.0)) throw DomainError("QCNR: power must be positive");
    const double denom = fit.ac * power * power + fit.f;
    if (!(denom > 0.0)) throw DomainError("QCNR: classical plus electronic variance is zero");
    return fit.aq * power / denom;
}

OptimalPower qcnr_optimal_power(const VarianceFit& fit) {
    if (!(fit.ac > 0.0) || !(fit.f > 0.0)) throw DomainError("optimal QCNR power needs AC > 0 and F > 0");
    return {std::sqrt(fit.f / fit.ac), fit.aq / (2.0 * std::sqrt(fit.ac * fit.f))};
}

double qcnr_attenuation(double sigma_sq, double sigma_sq_att) {
    if (!(sigma_sq_att > 0.0)) throw DomainError("attenuated variance must be positive");
    if (!(sigma_sq >= 0.0)) throw DomainError("variance must be nonnegative");
    return std::max(0.0, (sigma_sq - sigma_sq_att) / sigma_sq_att);
}

double qcnr_attenuation(const PowerSweepPoint& direct, const PowerSweepPoint& attenuated) {
    direct.validate();
    attenuated.validate();
    if (!(direct.power > 0.0)) throw DomainError("attenuation QCNR: power must be positive");
    if (std::abs(attenuated.power - direct.power) > kPowerMatchTolerance * direct.power) {
        throw DomainError("attenuation QCNR: powers differ by more than 1%");
    }
    return qcnr_attenuation(direct.variance, attenuated.variance);
}

double find_quadrature(std::span<const FringePoint> fringe) {
    if (fringe.size() < 8) throw DomainError("fringe: need at least 8 points");
    std::vector<FringePoint> pts(fringe.begin(), fringe.end());
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.phi2 < b.phi2; });
    if (pts.back().phi2 - pts.front().phi2 < std::numbers::pi - 1e-9) {
        throw DomainError("fringe: phases must span at least pi");
    }

    double v_min = pts.front().variance;
    double v_max = pts.front().variance;
    double v_sum = 0.0;
    std::size_t n_min = pts.front().n_samples;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        v_min = std::min(v_min, pts[i].variance);
        v_sum += pts[i].variance;
        n_min = std::min(n_min, pts[i].n_samples);
        if (pts[i].variance > v_max) { // strict: ties keep the smaller phase
            v_max = pts[i].variance;
            peak = i;
        }
    }
    const double v_mean = v_sum / static_cast<double>(pts.size());
    const double noise = n_min >= 2 ? v_mean * std::sqrt(2.0 / static_cast<double>(n_min)) : 0.0;
    if (!(v_max - v_min > std::max(3.0 * noise, 1e-12 * std::abs(v_mean)))) {
        throw ComputeError("no interference contrast");
    }

    std::size_t mid = std::clamp<std::size_t>(peak, 1, pts.size() - 2);
    const double x0 = pts[mid - 1].phi2, x1 = pts[mid].phi2, x2 = pts[mid + 1].phi2;
    const double y0 = pts[mid - 1].variance, y1 = pts[mid].variance, y2 = pts[mid + 1].variance;
    // Vertex of the parabola through three points (Lagrange form).
    const double d0 = (x1 - x0) * (y1 - y2);
    const double d1 = (x1 - x2) * (y1 - y0);
    const double denom = d0 - d1;
    if (denom <= 0.0 || peak != mid) return pts[peak].phi2; // not concave around an interior peak
    const double vertex = x1 - 0.5 * ((x1 - x0) * d0 - (x1 - x2) * d1) / denom;
    return std::clamp(vertex, x0, x2);
}

void write_sweep_csv(std::ostream& out, std::span<const PowerSweepPoint> points) {
    out << "power_w,variance_v2,n_samples\n";
    out.precision(17);
    for (const auto& p : points) out << p.power << ',' << p.variance << ',' << p.n_samples << '\n';
}

std::vector<PowerSweepPoint> read_sweep_csv(std::istream& in) {
    std::vector<PowerSweepPoint> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.starts_with("power_w")) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        PowerSweepPoint p;
        if (!(fields >> p.power >> p.variance >> p.n_samples)) {
            throw DomainError("sweep csv line " + std::to_string(line_no) + ": expected power_w, variance_v2, n_samples");
        }
        p.validate();
        points.push_back(p);
    }
    return points;
}

} // namespace qrng
