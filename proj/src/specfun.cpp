#include "cavcorr/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

namespace cavcorr::specfun {

namespace {

constexpr double pi = std::numbers::pi;

// Power series, only used for very small x.
double bessel_j_series(int m, double x)
{
    const double h = 0.5 * x;
    double lead = 1.0;
    for (int k = 1; k <= m; ++k) {
        lead *= h / k;
        if (lead == 0.0)
            return 0.0;
    }
    const double q = h * h;
    double term = lead, sum = lead;
    for (int k = 1; k < 30; ++k) {
        term *= -q / (double(k) * double(k + m));
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum))
            break;
    }
    return sum;
}

// Miller backward recurrence normalized with J_0 + 2 sum J_2k = 1.
double bessel_j_miller(int m, double x)
{
    int top = std::max(m, int(std::ceil(x))) + 30 + int(std::ceil(1.2 * x));
    top += top & 1;
    const double big = 1e250, small = 1e-250;
    double fkp1 = 0.0, fk = 1.0;
    double norm = 0.0, result = (m == top) ? fk : 0.0;
    for (int k = top; k >= 1; --k) {
        double fkm1 = (2.0 * k / x) * fk - fkp1;
        fkp1 = fk;
        fk = fkm1;
        if (std::abs(fk) > big) {
            fk *= small;
            fkp1 *= small;
            norm *= small;
            result *= small;
        }
        const int idx = k - 1;
        if (idx == m)
            result = fk;
        if (idx != 0 && (idx % 2) == 0)
            norm += 2.0 * fk;
    }
    norm += fk;
    return result / norm;
}

// Hankel asymptotic expansion for J_0 and J_1 at large x.
void bessel_j01_asymptotic(double x, double& j0, double& j1)
{
    double p[2], q[2];
    for (int nu = 0; nu < 2; ++nu) {
        const double mu = 4.0 * nu * nu;
        double a = 1.0, P = 1.0, Q = 0.0, last = 1.0;
        for (int k = 1; k < 60; ++k) {
            a *= (mu - double(2 * k - 1) * double(2 * k - 1)) / (8.0 * k * x);
            const double t = std::abs(a);
            if (t > last)
                break;
            last = t;
            // a_k/x^k alternates in sign pattern between P and Q
            const int r = k % 4;
            if (r == 0)
                P += a;
            else if (r == 1)
                Q += a;
            else if (r == 2)
                P -= a;
            else
                Q -= a;
            if (t < 1e-17)
                break;
        }
        p[nu] = P;
        q[nu] = Q;
    }
    const double s = std::sin(x), c = std::cos(x);
    const double r = std::sqrt(2.0 / (pi * x)) * std::numbers::sqrt2 / 2.0;
    // chi = x - pi/4 for J0, x - 3pi/4 for J1
    const double c0 = c + s, s0 = s - c;
    const double c1 = s - c, s1 = -s - c;
    j0 = r * (p[0] * c0 - q[0] * s0);
    j1 = r * (p[1] * c1 - q[1] * s1);
}

double bessel_j_large(int m, double x)
{
    double j0, j1;
    bessel_j01_asymptotic(x, j0, j1);
    if (m == 0)
        return j0;
    if (m == 1)
        return j1;
    if (m < x) {
        double jm1 = j0, jk = j1;
        for (int k = 1; k < m; ++k) {
            const double next = (2.0 * k / x) * jk - jm1;
            jm1 = jk;
            jk = next;
        }
        return jk;
    }
    // m >= x: forward to k0 = floor(x), backward from far above m, match.
    const int k0 = int(std::floor(x));
    double a = j0, b = j1;
    for (int k = 1; k < k0; ++k) {
        const double next = (2.0 * k / x) * b - a;
        a = b;
        b = next;
    }
    const double jk0 = b;
    const double jk0p1 = (2.0 * k0 / x) * b - a;

    const int top = m + 40 + int(std::sqrt(40.0 * m));
    const double big = 1e250, small = 1e-250;
    double fkp1 = 0.0, fk = 1.0, fm = 0.0, fk0 = 0.0, fk0p1 = 0.0;
    for (int k = top; k > k0; --k) {
        const double fkm1 = (2.0 * k / x) * fk - fkp1;
        fkp1 = fk;
        fk = fkm1;
        if (std::abs(fk) > big) {
            fk *= small;
            fkp1 *= small;
            fm *= small;
        }
        if (k - 1 == m)
            fm = fk;
    }
    fk0 = fk;
    fk0p1 = fkp1;
    if (m == k0 + 1)
        fm = fk0p1;
    const double scale = std::abs(jk0) > std::abs(jk0p1) ? jk0 / fk0 : jk0p1 / fk0p1;
    return fm * scale;
}

}  // namespace

double bessel_j(int m, double x)
{
    if (m < 0 || !(x >= 0.0))
        throw std::domain_error("bessel_j: need m >= 0 and x >= 0");
    if (x == 0.0)
        return m == 0 ? 1.0 : 0.0;
    if (x < 1e-3)
        return bessel_j_series(m, x);
    if (x <= 25.0)
        return bessel_j_miller(m, x);
    return bessel_j_large(m, x);
}

double bessel_j_derivative(int m, double x)
{
    if (m == 0)
        return -bessel_j(1, x);
    if (x == 0.0)
        return m == 1 ? 0.5 : 0.0;
    return bessel_j(m - 1, x) - (m / x) * bessel_j(m, x);
}

ScaledIK0 scaled_bessel_ik0(double x)
{
    if (!(x > 0.0))
        throw std::domain_error("scaled_bessel_ik0: need x > 0");
    ScaledIK0 r{};
    const double ex = std::exp(-x);

    if (x <= 20.0) {
        const double q = 0.25 * x * x;
        double t = 1.0, s = 1.0;
        for (int k = 1; k < 200; ++k) {
            t *= q / (double(k) * k);
            s += t;
            if (t < 1e-17 * s)
                break;
        }
        r.i0 = s * ex;
    } else {
        double a = 1.0, s = 1.0, last = 1.0;
        for (int k = 1; k < 200; ++k) {
            a *= double(2 * k - 1) * double(2 * k - 1) / (8.0 * k * x);
            if (a > last)
                break;
            last = a;
            s += a;
            if (a < 1e-17 * s)
                break;
        }
        r.i0 = s / std::sqrt(2.0 * pi * x);
    }

    if (x <= 2.0) {
        const double q = 0.25 * x * x;
        double t = 1.0, i0 = 1.0, tail = 0.0, h = 0.0;
        for (int k = 1; k < 100; ++k) {
            t *= q / (double(k) * k);
            h += 1.0 / k;
            i0 += t;
            tail += t * h;
            if (t < 1e-18)
                break;
        }
        const double k0 = -(std::log(0.5 * x) + std::numbers::egamma) * i0 + tail;
        r.k0 = k0 * ex;
    } else if (x <= 20.0) {
        // trapezoid on K_0(x) = int_0^inf exp(-x cosh t) dt, scaled
        const double step = 0.1;
        double s = 0.5;
        for (int k = 1; k < 400; ++k) {
            const double t = k * step;
            const double v = std::exp(-x * (std::cosh(t) - 1.0));
            s += v;
            if (v < 1e-18 * s)
                break;
        }
        r.k0 = step * s * std::exp(-2.0 * x);
    } else {
        double a = 1.0, s = 1.0, last = 1.0;
        for (int k = 1; k < 200; ++k) {
            a *= -double(2 * k - 1) * double(2 * k - 1) / (8.0 * k * x);
            const double t = std::abs(a);
            if (t > last)
                break;
            last = t;
            s += a;
            if (t < 1e-17 * std::abs(s))
                break;
        }
        r.k0 = std::sqrt(pi / (2.0 * x)) * s * std::exp(-2.0 * x);
    }
    return r;
}

double xlogx(double x)
{
    return x > 0.0 ? x * std::log(x) : 0.0;
}

double binary_entropy(double x)
{
    constexpr double band = 1e-12;
    if (!(x >= -band && x <= 1.0 + band))
        throw std::domain_error("binary_entropy: argument outside [0, 1]");
    x = std::clamp(x, 0.0, 1.0);
    if (x == 0.0 || x == 1.0)
        return 0.0;
    if (x > 0.5)
        x = 1.0 - x;
    return -x * std::log(x) - (1.0 - x) * std::log1p(-x);
}

double gauss_cosh_integral(double a, double b)
{
    if (!(b > 0.0) || !std::isfinite(b) || !std::isfinite(a))
        throw std::domain_error("gauss_cosh_integral: need finite a and b > 0");

    const double vmax = std::sqrt(745.0);
    const double arg = (vmax - a) / b;
    if (arg <= 1.0)
        return 0.0;
    const double s_max = std::acosh(arg);

    const double v0 = a + b;
    const double vmin2 = v0 >= 0.0 ? v0 * v0 : 0.0;

    std::vector<double> cuts{0.0};
    double v = v0;
    for (;;) {
        v += 1.0 / std::max(1.0, std::abs(v));
        const double c = (v - a) / b;
        if (c >= arg)
            break;
        cuts.push_back(std::acosh(c));
        if (v > 0.0 && v * v > vmin2 + 50.0)
            break;
    }
    cuts.push_back(s_max);

    auto f = [a, b](double s) {
        const double u = a + b * std::cosh(s);
        return std::exp(-u * u);
    };
    using gl = boost::math::quadrature::gauss<double, 20>;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        if (!(hi > lo))
            continue;
        const int pieces = std::max(1, int(std::ceil((hi - lo) / 0.5)));
        const double w = (hi - lo) / pieces;
        for (int p = 0; p < pieces; ++p)
            total += gl::integrate(f, lo + p * w, lo + (p + 1) * w);
    }
    return 2.0 * total;
}

}  // namespace cavcorr::specfun
