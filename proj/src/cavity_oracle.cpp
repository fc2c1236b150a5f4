// Time-domain path: truncated Wightman mode sum and brute-force quadrature of
// the Gaussian-windowed response integrals. Not used by the closed forms.

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "cavcorr/cavity_response.hpp"
#include "cavcorr/specfun.hpp"
#include "panel_quadrature.hpp"

namespace cavcorr::cavity {

namespace {

constexpr double pi = std::numbers::pi;

struct Mode {
    double k;  // xi / R
    double c;  // radial weight, azimuthal fold included
};

double radial_at(int m, double xi, double rho, double radius)
{
    if (rho == 0.0)
        return m == 0 ? 1.0 : 0.0;
    if (rho == radius)
        return 0.0;
    return specfun::bessel_j(m, xi * rho / radius);
}

std::vector<Mode> build_modes(double rho_i, double rho_j, const CavityConfig& cav, int m_max,
                              std::size_t n_modes)
{
    std::vector<Mode> modes;
    for (int m = 0; m <= m_max; ++m) {
        auto z = specfun::shared_zero_table().order(m, int(n_modes));
        const double w = (m == 0) ? 1.0 : 2.0;
        for (std::size_t n = 0; n < n_modes; ++n) {
            const double xi = (*z)[n];
            const double a = radial_at(m, xi, rho_i, cav.radius);
            const double b = radial_at(m, xi, rho_j, cav.radius);
            if (a == 0.0 || b == 0.0)
                continue;
            const double d = specfun::bessel_j(m + 1, xi);
            modes.push_back({xi / cav.radius, w * a * b / (d * d)});
        }
    }
    return modes;
}

// W(t) for t > 0; W(-t) is its conjugate.
cplx wightman_positive(double t, const std::vector<Mode>& modes, double radius)
{
    double js = 0.0, ys = 0.0;
    for (const auto& md : modes) {
        const double z = md.k * t;
        js += md.c * boost::math::cyl_bessel_j(0, z);
        ys += md.c * boost::math::cyl_neumann(0, z);
    }
    // -(i / 4 pi R^2) (J - iY)
    const double s = 1.0 / (4.0 * pi * radius * radius);
    return {-ys * s, -js * s};
}

// Breakpoints on [0, T]: geometric grading toward 0 below width w, then
// uniform panels of width <= w.
std::vector<double> graded_breaks(double T, double w)
{
    std::vector<double> cuts{0.0};
    const double first = std::min(w, T);
    std::vector<double> small;
    for (double x = first; x > 1e-14 * first; x *= 0.5)
        small.push_back(x);
    for (auto it = small.rbegin(); it != small.rend(); ++it)
        cuts.push_back(*it);
    const int pieces = int(std::ceil((T - first) / w));
    for (int p = 1; p <= pieces; ++p)
        cuts.push_back(first + (T - first) * double(p) / pieces);
    return cuts;
}

double panel_width(double sigma, double omega, double k_max)
{
    double w = 0.5 * sigma;
    if (k_max > 0.0)
        w = std::min(w, 2.0 * pi / k_max);
    if (omega > 0.0)
        w = std::min(w, 2.0 * pi / omega);
    return w;
}

double rho_of(Detector d, const CavityConfig& cav)
{
    return d == Detector::A ? 0.0 : cav.rho0;
}

}  // namespace

cplx wightman_cavity(double tau, double rho_i, double rho_j, const CavityConfig& cav,
                     const WightmanTruncation& trunc)
{
    if (tau == 0.0 || !std::isfinite(tau))
        throw std::domain_error("wightman_cavity: tau must be finite and nonzero");
    cav.validate();
    if (!(rho_i >= 0.0 && rho_i <= cav.radius && rho_j >= 0.0 && rho_j <= cav.radius))
        throw std::domain_error("wightman_cavity: radii outside the cavity");
    const auto modes = build_modes(rho_i, rho_j, cav, trunc.m_max, trunc.n_modes);
    const cplx w = wightman_positive(std::abs(tau), modes, cav.radius);
    return tau > 0.0 ? w : std::conj(w);
}

double oracle_x(Detector i, Detector j, const DetectorParams& det, const CavityConfig& cav,
                std::size_t n_modes, const OracleOptions& opt)
{
    det.validate();
    cav.validate();
    const bool both_b = (i == Detector::B && j == Detector::B);
    const auto modes = build_modes(rho_of(i, cav), rho_of(j, cav), cav, both_b ? opt.m_max : 0, n_modes);
    if (modes.empty())
        return 0.0;
    double k_max = 0.0;
    for (const auto& md : modes)
        k_max = std::max(k_max, md.k);
    const double s = det.sigma, om = det.omega;
    const auto cuts = graded_breaks(opt.window_sigmas * s, panel_width(s, om, k_max));
    // tau and -tau share one Bessel evaluation
    const cplx acc = detail::integrate_panels<cplx>(cuts, [&](double t) {
        const cplx wp = wightman_positive(t, modes, cav.radius);
        const cplx ph = std::polar(1.0, -om * t);
        return std::exp(-t * t / (4.0 * s * s)) * (ph * wp + std::conj(ph) * std::conj(wp));
    });
    const cplx x = std::sqrt(pi) * s * (det.lambda * det.lambda) * acc;
    if (!(std::abs(x.imag()) <= 1e-8 * std::abs(x.real()) + 1e-300))
        throw quadrature_failure("oracle_x: imaginary residual " + std::to_string(x.imag()) +
                                 " vs real part " + std::to_string(x.real()));
    return x.real();
}

cplx oracle_m(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes, const OracleOptions& opt)
{
    det.validate();
    cav.validate();
    const auto modes = build_modes(0.0, cav.rho0, cav, 0, n_modes);
    if (modes.empty())
        return {0.0, 0.0};
    double k_max = 0.0;
    for (const auto& md : modes)
        k_max = std::max(k_max, md.k);
    const double s = det.sigma, om = det.omega;
    const auto cuts = graded_breaks(opt.window_sigmas * s, panel_width(s, 0.0, k_max));
    const cplx acc = detail::integrate_panels<cplx>(cuts, [&](double t) {
        return std::exp(-t * t / (4.0 * s * s)) * wightman_positive(t, modes, cav.radius);
    });
    return -std::sqrt(pi) * s * (det.lambda * det.lambda) * std::exp(-om * om * s * s) * acc;
}

cplx mode_integral_quadrature(double k, double sigma, double window_sigmas)
{
    if (!(k > 0.0) || !(sigma > 0.0))
        throw std::domain_error("mode_integral_quadrature: need k > 0 and sigma > 0");
    const auto cuts = graded_breaks(window_sigmas * sigma, panel_width(sigma, 0.0, k));
    return detail::integrate_panels<cplx>(cuts, [&](double t) {
        const double z = k * t;
        const cplx h2(boost::math::cyl_bessel_j(0, z), -boost::math::cyl_neumann(0, z));
        return std::exp(-t * t / (4.0 * sigma * sigma)) * h2;
    });
}

cplx mode_integral_closed(double k, double sigma)
{
    const double q = k * sigma;
    const auto ik = specfun::scaled_bessel_ik0(0.5 * q * q);
    return sigma / std::sqrt(pi) * cplx(pi * ik.i0, ik.k0);
}

}  // namespace cavcorr::cavity
