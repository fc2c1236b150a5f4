#include "cavcorr/freespace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cavcorr/format.hpp"
#include "panel_quadrature.hpp"

namespace cavcorr::freespace {

namespace {

constexpr double pi = std::numbers::pi;
// exp(-t^2/4 sigma^2) < 1e-21 beyond this many sigma
constexpr double window_sigmas = 14.0;
// above this Omega*sigma the X entries are taken on the saddle contour
constexpr double shifted_contour_above = 4.0;

double gauss_window(double t, double sigma)
{
    return std::exp(-t * t / (4.0 * sigma * sigma));
}

// -sqrt(pi) sigma lambda^2 / (4 pi^2): Wightman normalization times the
// response prefactor.
double kernel_scale(const FreeSpaceParams& p)
{
    return -p.sigma * p.lambda * p.lambda / (4.0 * std::pow(pi, 1.5));
}

std::vector<double> uniform_cuts(double lo, double hi, double width)
{
    const int n = std::max(1, int(std::ceil((hi - lo) / width)));
    std::vector<double> c(std::size_t(n) + 1);
    for (int i = 0; i <= n; ++i)
        c[std::size_t(i)] = lo + (hi - lo) * double(i) / double(n);
    return c;
}

double panel_width(const FreeSpaceParams& p)
{
    double w = 0.25 * p.sigma;
    if (p.omega > 0.0)
        w = std::min(w, 1.0 / p.omega);
    return w;
}

// PV of the integral of h(t)/(t - d) over the real line, as the integral over
// u > 0 of (h(d+u) - h(d-u))/u, which is regular at u = 0.
template <class H>
double pv_cauchy(H&& h, double d, double reach, double width)
{
    const auto cuts = uniform_cuts(0.0, reach, width);
    return detail::integrate_panels<double>(cuts, [&](double u) { return (h(d + u) - h(d - u)) / u; });
}

double x_local_pv(const FreeSpaceParams& p)
{
    const double s = p.sigma, om = p.omega;
    // h(t) = g(t) cos(Omega t); the integrand h'(t)/t is even and regular
    auto hprime_over_t = [&](double t) {
        const double g = gauss_window(t, s);
        const double sinc = (om == 0.0) ? 0.0 : std::sin(om * t) / t;
        return -g * std::cos(om * t) / (2.0 * s * s) - om * g * sinc;
    };
    const auto cuts = uniform_cuts(0.0, window_sigmas * s, panel_width(p));
    const double pv = 2.0 * detail::integrate_panels<double>(cuts, hprime_over_t);
    // delta part: i pi f'(0) = pi Omega
    return kernel_scale(p) * (pv + pi * om);
}

double x_cross_pv(const FreeSpaceParams& p)
{
    const double s = p.sigma, om = p.omega, d = p.separation;
    auto h = [&](double t) { return gauss_window(t, s) * std::cos(om * t); };
    const double pv = pv_cauchy(h, d, d + window_sigmas * s, panel_width(p));
    return kernel_scale(p) * (pv / d + pi * std::sin(om * d) * gauss_window(d, s) / d);
}

// Contour t -> t - 2 i sigma^2 Omega: the integrand becomes
// e^{-Omega^2 sigma^2} g(t) / ((t - i delta)^2 - d^2), with no pole crossed.
double x_shifted(const FreeSpaceParams& p, double d)
{
    const double s = p.sigma;
    const double delta = 2.0 * s * s * p.omega;
    const auto cuts = uniform_cuts(-window_sigmas * s, window_sigmas * s, 0.5 * s);
    const cplx acc = detail::integrate_panels<cplx>(cuts, [&](double t) {
        const cplx z(t, -delta);
        return gauss_window(t, s) / (z * z - d * d);
    });
    const double damp = std::exp(-p.omega * p.omega * s * s);
    if (!(std::abs(acc.imag()) <= 1e-8 * std::abs(acc.real())))
        throw quadrature_failure("free space: saddle-contour integral has imaginary residual " +
                                 fmt17(acc.imag()) + " against " + fmt17(acc.real()));
    return kernel_scale(p) * damp * acc.real();
}

cplx m_pv(const FreeSpaceParams& p)
{
    const double s = p.sigma, d = p.separation;
    auto g = [&](double t) { return gauss_window(t, s); };
    const double pv = pv_cauchy(g, d, d + window_sigmas * s, 0.25 * s);
    const double damp = std::exp(-p.omega * p.omega * s * s);
    return -kernel_scale(p) * damp / (2.0 * d) * cplx(pv, pi * g(d));
}

// Breakpoints on [lo, hi]: uniform of the given width plus geometric
// refinement at scale eps around each near-pole center.
std::vector<double> graded_cuts(double lo, double hi, double width, double eps, const std::vector<double>& centers)
{
    auto cuts = uniform_cuts(lo, hi, width);
    for (double c : centers) {
        if (c > lo && c < hi)
            cuts.push_back(c);
        for (double r = eps / 16.0; r < width; r *= 2.0) {
            if (c - r > lo)
                cuts.push_back(c - r);
            if (c + r < hi)
                cuts.push_back(c + r);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [&](double a, double b) { return b - a <= 1e-15 * std::max(1.0, std::abs(a)); }),
               cuts.end());
    return cuts;
}

void check_finite(cplx v, const char* what)
{
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw quadrature_failure(std::string("free space: non-finite ") + what);
}

}  // namespace

void FreeSpaceParams::validate() const
{
    if (!(omega >= 0.0) || !std::isfinite(omega))
        throw std::invalid_argument("FreeSpaceParams: omega must be finite and >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("FreeSpaceParams: sigma must be finite and > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("FreeSpaceParams: lambda must be finite and > 0");
    if (!(separation >= 0.0) || !std::isfinite(separation))
        throw std::invalid_argument("FreeSpaceParams: separation must be finite and >= 0");
}

double free_x_local(const FreeSpaceParams& p)
{
    p.validate();
    const double v = (p.omega * p.sigma > shifted_contour_above) ? x_shifted(p, 0.0) : x_local_pv(p);
    check_finite(v, "X_AA");
    return v;
}

CorrelationSet free_corrs(const FreeSpaceParams& p)
{
    p.validate();
    if (!(p.separation > 0.0))
        throw std::domain_error("free_corrs: M diverges at zero separation");
    CorrelationSet c;
    c.x_aa = c.x_bb = free_x_local(p);
    const bool shifted = p.omega * p.sigma > shifted_contour_above;
    c.x_ab = shifted ? x_shifted(p, p.separation) : x_cross_pv(p);
    c.m_ab = m_pv(p);
    check_finite(c.x_ab, "X_AB");
    check_finite(c.m_ab, "M_AB");
    return c;
}

CorrelationSet free_corrs_at_eps(const FreeSpaceParams& p, double eps_over_sigma)
{
    p.validate();
    if (!(eps_over_sigma > 0.0))
        throw std::invalid_argument("free_corrs_at_eps: eps must be > 0");
    const double s = p.sigma, om = p.omega, d = p.separation, eps = eps_over_sigma * s;
    const double reach = d + window_sigmas * s;
    auto kernel = [&](double t) {
        const cplx z(t, -eps);
        return 1.0 / (z * z - d * d);
    };
    auto x_integral = [&](double sep) {
        const std::vector<double> centers = sep > 0.0 ? std::vector<double>{-sep, sep} : std::vector<double>{0.0};
        const auto cuts = graded_cuts(-reach, reach, panel_width(p), eps, centers);
        return detail::integrate_panels<cplx>(cuts, [&](double t) {
            const cplx z(t, -eps);
            return gauss_window(t, s) * std::polar(1.0, -om * t) / (z * z - sep * sep);
        });
    };
    CorrelationSet c;
    const cplx local = x_integral(0.0);
    c.x_aa = c.x_bb = kernel_scale(p) * local.real();
    c.x_ab = kernel_scale(p) * x_integral(d).real();
    if (d > 0.0) {
        const auto cuts = graded_cuts(0.0, reach, 0.25 * s, eps, {d});
        const cplx half = detail::integrate_panels<cplx>(cuts, [&](double t) { return gauss_window(t, s) * kernel(t); });
        c.m_ab = -kernel_scale(p) * std::exp(-om * om * s * s) * half;
    } else {
        c.m_ab = cplx(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
    }
    return c;
}

CorrelationSet free_corrs_eps_extrapolated(const FreeSpaceParams& p)
{
    const auto f1 = free_corrs_at_eps(p, 1e-3);
    const auto f2 = free_corrs_at_eps(p, 5e-4);
    const auto f4 = free_corrs_at_eps(p, 2.5e-4);
    // removes the O(eps) and O(eps^2) terms
    auto rich = [](auto a, auto b, auto c) { return (8.0 * c - 6.0 * b + a) / 3.0; };
    CorrelationSet out;
    out.x_aa = out.x_bb = rich(f1.x_aa, f2.x_aa, f4.x_aa);
    out.x_ab = rich(f1.x_ab, f2.x_ab, f4.x_ab);
    out.m_ab = rich(f1.m_ab, f2.m_ab, f4.m_ab);
    return out;
}

std::string to_string(BoundaryFlag f)
{
    switch (f) {
    case BoundaryFlag::crossing:
        return "crossing";
    case BoundaryFlag::entangled_everywhere:
        return "entangled_everywhere";
    case BoundaryFlag::entangled_nowhere:
        return "entangled_nowhere";
    }
    return "unknown";
}

std::vector<BoundaryPoint> free_negativity_boundary(const std::vector<double>& omega_sigma_grid,
                                                    const std::vector<double>& d_grid, double lambda, double d_tol)
{
    auto increasing = [](const std::vector<double>& v) {
        return !v.empty() && std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
    };
    if (!increasing(omega_sigma_grid) || !increasing(d_grid) || !(d_grid.front() > 0.0))
        throw std::invalid_argument("free_negativity_boundary: grids must be nonempty, strictly increasing, d > 0");
    if (!(d_tol > 0.0))
        throw std::invalid_argument("free_negativity_boundary: d_tol must be > 0");

    std::vector<BoundaryPoint> out;
    for (double os : omega_sigma_grid) {
        FreeSpaceParams p;
        p.omega = os;
        p.sigma = 1.0;
        p.lambda = lambda;
        const double local = free_x_local(p);
        auto margin = [&](double d) {
            p.separation = d;
            return std::abs(m_pv(p)) - local;
        };
        BoundaryPoint bp;
        bp.omega_sigma = os;
        bp.d_over_sigma = std::numeric_limits<double>::quiet_NaN();
        std::vector<double> vals;
        for (double d : d_grid)
            vals.push_back(margin(d));
        std::size_t k = 0;
        while (k + 1 < vals.size() && !(vals[k] > 0.0 && vals[k + 1] <= 0.0))
            ++k;
        if (k + 1 < vals.size()) {
            double lo = d_grid[k], hi = d_grid[k + 1];
            while (hi - lo > d_tol) {
                const double mid = 0.5 * (lo + hi);
                (margin(mid) > 0.0 ? lo : hi) = mid;
            }
            bp.d_over_sigma = 0.5 * (lo + hi);
        } else if (std::all_of(vals.begin(), vals.end(), [](double v) { return v > 0.0; })) {
            bp.flag = BoundaryFlag::entangled_everywhere;
        } else {
            bp.flag = BoundaryFlag::entangled_nowhere;
        }
        out.push_back(bp);
    }
    return out;
}

void write_boundary_csv(std::ostream& out, const std::vector<BoundaryPoint>& pts)
{
    out << "omega_sigma,d_over_sigma_boundary,flag\n";
    for (const auto& b : pts)
        out << fmt17(b.omega_sigma) << ',' << fmt17(b.d_over_sigma) << ',' << to_string(b.flag) << '\n';
}

}  // namespace cavcorr::freespace
