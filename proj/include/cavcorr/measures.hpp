#ifndef CAVCORR_MEASURES_HPP
#define CAVCORR_MEASURES_HPP

#include <array>
#include <complex>
#include <stdexcept>

#include "cavcorr/correlation_set.hpp"

namespace cavcorr::measures {

// Entropies are in nats.
inline constexpr bool entropy_base_is_nats = true;

class invalid_state : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// 4x4 density matrix in the order |gg>, |ge>, |eg>, |ee> (A first).
struct ReducedState {
    std::array<std::array<cplx, 4>, 4> m{};

    cplx trace() const { return m[0][0] + m[1][1] + m[2][2] + m[3][3]; }
};

struct PTEigenvalues {
    double e_plus = 0.0, e_minus = 0.0;
    double ep_plus = 0.0, ep_minus = 0.0;
};

struct Alphas {
    double a1 = 1.0, a3 = 0.0, a4 = 0.0;
};

struct CorrelationMeasures {
    double negativity_exact = 0.0;
    double negativity_pert = 0.0;
    double mutual_info = 0.0;
    double classical_j = 0.0;
    double discord = 0.0;
    Alphas alpha;
    double s1 = 0.0, s2 = 0.0;
    // signed -e'_-: positive inside the entangled region
    double negativity_margin = 0.0;
};

enum class NegativityMode { exact, perturbative };

ReducedState build_state(const CorrelationSet& c);

PTEigenvalues pt_eigenvalues(const CorrelationSet& c);

double negativity(const CorrelationSet& c, NegativityMode mode = NegativityMode::exact);

std::pair<double, Alphas> mutual_information(const CorrelationSet& c);

// Conditional entropies of the two candidate measurement bases.
std::pair<double, double> conditional_entropies(const CorrelationSet& c);

CorrelationMeasures discord(const CorrelationSet& c);

// Minimum over a (theta, phi) grid of the measured conditional entropy of B
// after an orthogonal projective measurement on A. theta spans [0, pi] with
// theta_steps points, phi spans [0, 2 pi) with phi_steps points.
double brute_force_conditional_entropy(const CorrelationSet& c, int theta_steps, int phi_steps);

}  // namespace cavcorr::measures

#endif
