#include "cavcorr/cavity_response.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cavcorr/specfun.hpp"

namespace cavcorr::cavity {

namespace {

using series::KahanSum;
using series::scale_diagnostics;
using series::SumConfig;
using series::SumDiagnostics;
using specfun::bessel_j;

constexpr double pi = std::numbers::pi;

// Zeros of J_m fetched from the shared table, growing on demand.
class ZeroCursor {
public:
    explicit ZeroCursor(int m, std::size_t initial = 256)
        : m_(m), z_(specfun::shared_zero_table().order(m, int(initial))) {}

    double operator()(std::size_t n)
    {
        if (n > z_->size())
            z_ = specfun::shared_zero_table().order(m_, int(std::max(n, 2 * z_->size())));
        return (*z_)[n - 1];
    }

private:
    int m_;
    specfun::BesselZeroTable::slice z_;
};

// J_m(xi * eta) with the two exact endpoints: axis and wall.
double radial(int m, double xi, double eta)
{
    if (eta == 0.0)
        return m == 0 ? 1.0 : 0.0;
    if (eta == 1.0)
        return 0.0;
    return bessel_j(m, xi * eta);
}

SumConfig x_config(const ModeCutoffs& cut)
{
    SumConfig c;
    c.tol = cut.tol_x;
    c.n_max = cut.n_max_x;
    c.n_min = 8;
    c.window = 8;
    c.mode = series::SumMode::absolute;
    c.record_trace = cut.record_trace;
    return c;
}

// Runs a sum and brings value and diagnostics to final units: the raw sum
// times the geometric prefactor, then times lambda^2 (kept last so the
// lambda scaling is exact).
template <class Run>
auto scaled_run(Run&& run, double unit, double l2)
{
    try {
        auto [value, diag] = run();
        scale_diagnostics(diag, unit);
        scale_diagnostics(diag, l2);
        return std::pair{(value * unit) * l2, std::move(diag)};
    } catch (series::not_converged& e) {
        scale_diagnostics(e.diagnostics, unit);
        scale_diagnostics(e.diagnostics, l2);
        throw;
    }
}

series::real_term slice_terms(const DetectorParams& det, const CavityConfig& cav, int m)
{
    const double a = det.sigma * det.omega;
    const double q = det.sigma / cav.radius;
    const double eta = cav.eta();
    return [a, q, eta, m, z = ZeroCursor(m)](std::size_t n) mutable {
        const double xi = z(n);
        const double r = radial(m, xi, eta);
        if (r == 0.0)
            return 0.0;
        const double jn = bessel_j(m + 1, xi);
        return specfun::gauss_cosh_integral(a, q * xi) * (r * r) / (jn * jn);
    };
}

}  // namespace

double x_prefactor(const DetectorParams& det, const CavityConfig& cav)
{
    const double q = det.sigma / cav.radius;
    return q * q / (2.0 * pi);
}

void DetectorParams::validate() const
{
    if (!(omega >= 0.0) || !std::isfinite(omega))
        throw std::invalid_argument("DetectorParams: omega must be finite and >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("DetectorParams: sigma must be finite and > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("DetectorParams: lambda must be finite and > 0");
}

void CavityConfig::validate() const
{
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("CavityConfig: radius must be finite and > 0");
    if (!(rho0 >= 0.0 && rho0 <= radius))
        throw std::invalid_argument("CavityConfig: need 0 <= rho0 <= radius");
}

void ModeCutoffs::validate() const
{
    if (n_max_x < 16 || n_max_m < 16 || m_max < 0)
        throw std::invalid_argument("ModeCutoffs: caps too small");
    if (!(tol > 0.0 && tol < 1.0) || !(tol_x > 0.0 && tol_x < 1.0))
        throw std::invalid_argument("ModeCutoffs: tolerances must lie in (0, 1)");
}

series::real_term x_ab_terms(const DetectorParams& det, const CavityConfig& cav)
{
    const double a = det.sigma * det.omega;
    const double q = det.sigma / cav.radius;
    const double eta = cav.eta();
    return [a, q, eta, z = ZeroCursor(0)](std::size_t n) mutable {
        const double xi = z(n);
        const double r = radial(0, xi, eta);
        if (r == 0.0)
            return 0.0;
        const double j1 = bessel_j(1, xi);
        return specfun::gauss_cosh_integral(a, q * xi) * r / (j1 * j1);
    };
}

series::real_term x_aa_terms(const DetectorParams& det, const CavityConfig& cav)
{
    const double a = det.sigma * det.omega;
    const double q = det.sigma / cav.radius;
    return [a, q, z = ZeroCursor(0)](std::size_t n) mutable {
        const double xi = z(n);
        const double j1 = bessel_j(1, xi);
        return specfun::gauss_cosh_integral(a, q * xi) / (j1 * j1);
    };
}

Evaluated<double> x_aa(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut)
{
    det.validate();
    cav.validate();
    cut.validate();
    auto [v, d] = scaled_run([&] { return series::sum_absolute(x_aa_terms(det, cav), x_config(cut)); },
                             x_prefactor(det, cav), det.lambda * det.lambda);
    return {v, std::move(d)};
}

Evaluated<double> x_ab(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut)
{
    det.validate();
    cav.validate();
    cut.validate();
    auto [v, d] = scaled_run([&] { return series::sum_absolute(x_ab_terms(det, cav), x_config(cut)); },
                             x_prefactor(det, cav), det.lambda * det.lambda);
    return {v, std::move(d)};
}

Evaluated<double> x_bb(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut)
{
    det.validate();
    cav.validate();
    cut.validate();
    const double l2 = det.lambda * det.lambda;
    const double base = x_prefactor(det, cav);

    // n_values holds the slice index m + 1 and partial_sums the running total
    SumDiagnostics agg;
    KahanSum total;
    int quiet = 0;
    const auto cfg = x_config(cut);
    for (int m = 0; m <= cut.m_max; ++m) {
        double slice = 0.0;
        if (!(cav.rho0 == 0.0 && m > 0)) {
            try {
                auto r = series::sum_absolute(slice_terms(det, cav, m), cfg);
                slice = r.first;
                agg.terms_used += r.second.terms_used;
            } catch (series::not_converged& e) {
                agg.terms_used += e.diagnostics.terms_used;
                agg.estimate = (total.value() + e.diagnostics.estimate) * base * l2;
                throw series::not_converged("x_bb: slice m = " + std::to_string(m) + " did not converge",
                                            std::move(agg));
            }
        }
        const double contrib = (m == 0 ? 1.0 : 2.0) * slice;
        total.add(contrib);
        const double now = total.value();
        agg.n_values.push_back(std::size_t(m) + 1);
        agg.partial_sums.emplace_back(now * base * l2, 0.0);
        agg.rel_changes.push_back(now != 0.0 ? std::abs(contrib) / std::abs(now) : 0.0);
        if (std::abs(contrib) <= cut.tol_x * std::abs(now))
            ++quiet;
        else
            quiet = 0;
        if (quiet >= 2) {
            agg.converged = true;
            agg.estimate = {(now * base) * l2, 0.0};
            if (!cut.record_trace) {
                agg.n_values.clear();
                agg.partial_sums.clear();
                agg.rel_changes.clear();
            }
            return {(now * base) * l2, std::move(agg)};
        }
    }
    agg.estimate = {(total.value() * base) * l2, 0.0};
    throw series::not_converged("x_bb: azimuthal cap m_max reached", std::move(agg));
}

series::complex_term m_ab_terms(const DetectorParams& det, const CavityConfig& cav)
{
    const double q = det.sigma / cav.radius;
    const double eta = cav.eta();
    return [q, eta, z = ZeroCursor(0)](std::size_t n) mutable -> cplx {
        const double xi = z(n);
        const double r = radial(0, xi, eta);
        if (r == 0.0)
            return {0.0, 0.0};
        const double j1 = bessel_j(1, xi);
        const double qx = q * xi;
        const auto ik = specfun::scaled_bessel_ik0(0.5 * qx * qx);
        const double f = r / (j1 * j1);
        return {-f * ik.k0, f * pi * ik.i0};
    };
}

double m_ab_prefactor(const DetectorParams& det, const CavityConfig& cav)
{
    const double q = det.sigma / cav.radius;
    const double a = det.sigma * det.omega;
    return q * q / (4.0 * pi) * std::exp(-a * a);
}

RawNonlocalSum m_ab_raw(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut)
{
    det.validate();
    cav.validate();
    cut.validate();
    SumConfig cfg;
    cfg.tol = cut.tol;
    cfg.n_max = cut.n_max_m;
    cfg.n_min = 8;
    cfg.mode = series::SumMode::oscillatory;
    cfg.record_trace = cut.record_trace;
    RawNonlocalSum raw;
    try {
        auto [v, d] = series::sum_oscillatory(m_ab_terms(det, cav), cfg);
        raw.value = v;
        raw.diagnostics = std::move(d);
    } catch (series::not_converged& e) {
        raw.converged = false;
        raw.diagnostics = std::move(e.diagnostics);
        raw.value = raw.diagnostics.estimate;
    }
    return raw;
}

Evaluated<cplx> m_ab_from_raw(const RawNonlocalSum& raw, const DetectorParams& det, const CavityConfig& cav)
{
    auto run = [&]() -> std::pair<cplx, SumDiagnostics> {
        if (raw.converged)
            return {raw.value, raw.diagnostics};
        if (raw.diagnostics.insufficient_oscillation)
            throw series::insufficient_oscillation("m_ab: too few extrema before n_max_m", raw.diagnostics);
        throw series::not_converged("m_ab: midpoint estimate not settled before n_max_m", raw.diagnostics);
    };
    auto [v, d] = scaled_run(run, m_ab_prefactor(det, cav), det.lambda * det.lambda);
    return {v, std::move(d)};
}

Evaluated<cplx> m_ab(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut)
{
    return m_ab_from_raw(m_ab_raw(det, cav, cut), det, cav);
}

CorrelationSet compute_correlations(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut,
                                    const RawNonlocalSum* m_raw)
{
    det.validate();
    cav.validate();
    cut.validate();
    CorrelationSet c;
    auto run = [&c](int slot, auto&& fn) -> cplx {
        try {
            auto r = fn();
            c.diagnostics[slot] = std::move(r.diagnostics);
            c.converged[slot] = true;
            return cplx(r.value);
        } catch (series::not_converged& e) {
            c.converged[slot] = false;
            c.diagnostics[slot] = std::move(e.diagnostics);
            return c.diagnostics[slot].estimate;
        }
    };
    c.x_aa = run(0, [&] { return x_aa(det, cav, cut); }).real();
    c.x_bb = run(1, [&] { return x_bb(det, cav, cut); }).real();
    c.x_ab = run(2, [&] { return x_ab(det, cav, cut); });
    c.m_ab = run(3, [&] { return m_raw ? m_ab_from_raw(*m_raw, det, cav) : m_ab(det, cav, cut); });
    return c;
}

double x_aa_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes)
{
    det.validate();
    cav.validate();
    auto t = x_aa_terms(det, cav);
    KahanSum s;
    for (std::size_t n = 1; n <= n_modes; ++n)
        s.add(t(n));
    return (s.value() * x_prefactor(det, cav)) * (det.lambda * det.lambda);
}

double x_ab_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes)
{
    det.validate();
    cav.validate();
    auto t = x_ab_terms(det, cav);
    KahanSum s;
    for (std::size_t n = 1; n <= n_modes; ++n)
        s.add(t(n));
    return (s.value() * x_prefactor(det, cav)) * (det.lambda * det.lambda);
}

double x_bb_fixed(const DetectorParams& det, const CavityConfig& cav, int m_max, std::size_t n_modes)
{
    det.validate();
    cav.validate();
    KahanSum s;
    for (int m = 0; m <= m_max; ++m) {
        auto t = slice_terms(det, cav, m);
        KahanSum slice;
        for (std::size_t n = 1; n <= n_modes; ++n)
            slice.add(t(n));
        s.add((m == 0 ? 1.0 : 2.0) * slice.value());
    }
    return (s.value() * x_prefactor(det, cav)) * (det.lambda * det.lambda);
}

cplx m_ab_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes)
{
    det.validate();
    cav.validate();
    auto t = m_ab_terms(det, cav);
    KahanSum re, im;
    for (std::size_t n = 1; n <= n_modes; ++n) {
        const cplx v = t(n);
        re.add(v.real());
        im.add(v.imag());
    }
    return (cplx(re.value(), im.value()) * m_ab_prefactor(det, cav)) * (det.lambda * det.lambda);
}

}  // namespace cavcorr::cavity
