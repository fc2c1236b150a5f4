#include "cavcorr/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cavcorr/specfun.hpp"

namespace cavcorr::measures {

namespace {

using specfun::binary_entropy;
using specfun::xlogx;

constexpr double alpha_floor = 1e-12;

double norm2(cplx z)
{
    return std::norm(z);
}

void check_inputs(const CorrelationSet& c)
{
    if (!std::isfinite(c.x_aa) || !std::isfinite(c.x_bb) || !std::isfinite(c.x_ab.real()) ||
        !std::isfinite(c.x_ab.imag()) || !std::isfinite(c.m_ab.real()) || !std::isfinite(c.m_ab.imag()))
        throw invalid_state("correlation set has non-finite entries");
    if (c.x_aa < 0.0 || c.x_bb < 0.0)
        throw invalid_state("excitation probabilities must be nonnegative");
    if (1.0 - c.x_aa - c.x_bb < 0.0)
        throw invalid_state("1 - X_AA - X_BB < 0");
}

double clamp_alpha(double a)
{
    if (a >= 0.0)
        return a;
    if (a > -alpha_floor)
        return 0.0;
    throw invalid_state("negative eigenvalue of the reduced state (|X_AB|^2 > X_AA X_BB)");
}

// Entropy of a 2x2 block [[a, c], [c*, b]] normalized by its trace. The
// O(lambda^2) state drops a negative O(lambda^4) eigenvalue, so a conditional
// block can have delta slightly above 1; its spectrum is clipped to [0, 1].
double block_entropy(double a, double b, cplx c)
{
    const double p = a + b;
    if (!(p > 0.0))
        return 0.0;
    const double delta = std::sqrt((a - b) * (a - b) + 4.0 * norm2(c)) / p;
    return binary_entropy(0.5 * (1.0 - std::min(delta, 1.0)));
}

}  // namespace

ReducedState build_state(const CorrelationSet& c)
{
    check_inputs(c);
    ReducedState r;
    r.m[0][0] = 1.0 - c.x_aa - c.x_bb;
    r.m[1][1] = c.x_aa;
    r.m[2][2] = c.x_bb;
    r.m[1][2] = c.x_ab;
    r.m[2][1] = std::conj(c.x_ab);
    r.m[0][3] = std::conj(c.m_ab);
    r.m[3][0] = c.m_ab;
    return r;
}

PTEigenvalues pt_eigenvalues(const CorrelationSet& c)
{
    check_inputs(c);
    const double s = c.x_aa + c.x_bb;
    const double d = 1.0 - s;
    PTEigenvalues e;
    const double r1 = std::sqrt(d * d + 4.0 * norm2(c.x_ab));
    e.e_plus = 0.5 * (d + r1);
    // product of the pair is -|X_AB|^2
    e.e_minus = e.e_plus > 0.0 ? -norm2(c.x_ab) / e.e_plus : 0.0;
    const double r2 = std::sqrt((c.x_aa - c.x_bb) * (c.x_aa - c.x_bb) + 4.0 * norm2(c.m_ab));
    e.ep_plus = 0.5 * (s + r2);
    // product of the pair is X_AA X_BB - |M|^2
    e.ep_minus = e.ep_plus > 0.0 ? (c.x_aa * c.x_bb - norm2(c.m_ab)) / e.ep_plus : 0.0;
    return e;
}

double negativity(const CorrelationSet& c, NegativityMode mode)
{
    if (mode == NegativityMode::exact)
        return std::max(0.0, -pt_eigenvalues(c).ep_minus);
    check_inputs(c);
    return std::max(0.0, std::abs(c.m_ab) - 0.5 * (c.x_aa + c.x_bb));
}

std::pair<double, Alphas> mutual_information(const CorrelationSet& c)
{
    check_inputs(c);
    const double s = c.x_aa + c.x_bb;
    const double r = std::sqrt((c.x_aa - c.x_bb) * (c.x_aa - c.x_bb) + 4.0 * norm2(c.x_ab));
    Alphas a;
    a.a1 = clamp_alpha(1.0 - s);
    a.a3 = clamp_alpha(0.5 * (s + r));
    a.a4 = clamp_alpha(a.a3 > 0.0 ? (c.x_aa * c.x_bb - norm2(c.x_ab)) / a.a3 : 0.0);
    const double info = binary_entropy(c.x_aa) + binary_entropy(c.x_bb) + xlogx(a.a1) + xlogx(a.a3) + xlogx(a.a4);
    return {info, a};
}

std::pair<double, double> conditional_entropies(const CorrelationSet& c)
{
    check_inputs(c);
    const double s = c.x_aa + c.x_bb;
    // S1 = H((1 + r1)/2); its distance from 1 is (1 - r1^2) / (2 (1 + r1))
    const double r1 = std::sqrt((1.0 - s) * (1.0 - s) + 4.0 * norm2(c.x_ab));
    const double u1 = (s * (2.0 - s) - 4.0 * norm2(c.x_ab)) / (2.0 * (1.0 + r1));
    const double r2 = std::sqrt((c.x_aa - c.x_bb) * (c.x_aa - c.x_bb) + 4.0 * norm2(c.m_ab));
    const double u2 = 0.5 * (1.0 - r2);
    if (u1 < -1e-12 || u2 < -1e-12)
        throw invalid_state("conditional entropy argument outside [0, 1]");
    return {binary_entropy(std::max(u1, 0.0)), binary_entropy(std::max(u2, 0.0))};
}

CorrelationMeasures discord(const CorrelationSet& c)
{
    CorrelationMeasures out;
    const auto pt = pt_eigenvalues(c);
    out.negativity_margin = -pt.ep_minus;
    out.negativity_exact = std::max(0.0, -pt.ep_minus);
    out.negativity_pert = negativity(c, NegativityMode::perturbative);
    const auto [info, alpha] = mutual_information(c);
    out.mutual_info = info;
    out.alpha = alpha;
    const auto [s1, s2] = conditional_entropies(c);
    out.s1 = s1;
    out.s2 = s2;
    const double smin = std::min(s1, s2);
    out.classical_j = binary_entropy(c.x_bb) - smin;
    out.discord = binary_entropy(c.x_aa) + xlogx(alpha.a1) + xlogx(alpha.a3) + xlogx(alpha.a4) + smin;
    return out;
}

double brute_force_conditional_entropy(const CorrelationSet& c, int theta_steps, int phi_steps)
{
    if (theta_steps < 2 || phi_steps < 1)
        throw std::invalid_argument("brute_force_conditional_entropy: need theta_steps >= 2, phi_steps >= 1");
    const auto rho = build_state(c).m;
    constexpr double pi = std::numbers::pi;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < theta_steps; ++i) {
        const double theta = pi * double(i) / double(theta_steps - 1);
        const double ch = std::cos(0.5 * theta), sh = std::sin(0.5 * theta);
        for (int j = 0; j < phi_steps; ++j) {
            const double phi = 2.0 * pi * double(j) / double(phi_steps);
            const cplx ph = std::polar(1.0, phi);
            // orthonormal outcome vectors on A
            const std::array<std::array<cplx, 2>, 2> outcome{{{cplx(ch), sh * ph}, {cplx(sh), -ch * ph}}};
            double total = 0.0;
            for (const auto& u : outcome) {
                cplx blk[2][2]{};
                for (int b = 0; b < 2; ++b)
                    for (int bp = 0; bp < 2; ++bp)
                        for (int a = 0; a < 2; ++a)
                            for (int ap = 0; ap < 2; ++ap)
                                blk[b][bp] += std::conj(u[a]) * rho[2 * a + b][2 * ap + bp] * u[ap];
                const double p = blk[0][0].real() + blk[1][1].real();
                total += p * block_entropy(blk[0][0].real(), blk[1][1].real(), blk[0][1]);
            }
            best = std::min(best, total);
        }
    }
    return best;
}

}  // namespace cavcorr::measures
