#ifndef CAVCORR_FREESPACE_HPP
#define CAVCORR_FREESPACE_HPP

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavcorr/correlation_set.hpp"

namespace cavcorr::freespace {

// Two static detectors in Minkowski space at distance `separation`.
struct FreeSpaceParams {
    double omega = 1.0;
    double sigma = 1.0;
    double lambda = 0.1;
    double separation = 1.0;

    void validate() const;
};

class quadrature_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Principal value + delta split of the distributional kernel
// 1/((tau - i eps)^2 - d^2). X_AA = X_BB. M uses the single time ordering of
// the cavity M. Requires separation > 0 (|M| ~ 1/d).
CorrelationSet free_corrs(const FreeSpaceParams& p);

// Local term only; valid for any separation.
double free_x_local(const FreeSpaceParams& p);

// Same entries from the kernel at finite eps (eps = eps_over_sigma * sigma).
CorrelationSet free_corrs_at_eps(const FreeSpaceParams& p, double eps_over_sigma);

// Richardson extrapolation of free_corrs_at_eps over eps/sigma in
// {1e-3, 5e-4, 2.5e-4}. Slow; used as an oracle.
CorrelationSet free_corrs_eps_extrapolated(const FreeSpaceParams& p);

enum class BoundaryFlag { crossing, entangled_everywhere, entangled_nowhere };

std::string to_string(BoundaryFlag f);

struct BoundaryPoint {
    double omega_sigma = 0.0;
    double d_over_sigma = 0.0;  // NaN unless flag == crossing
    BoundaryFlag flag = BoundaryFlag::crossing;
};

// Per omega_sigma: first sign change of the perturbative negativity
// |M| - (X_AA + X_BB)/2 along d_grid (in units of sigma), refined by
// bisection to width d_tol. Grids must be strictly increasing and d_grid > 0.
std::vector<BoundaryPoint> free_negativity_boundary(const std::vector<double>& omega_sigma_grid,
                                                    const std::vector<double>& d_grid, double lambda = 0.1,
                                                    double d_tol = 1e-9);

// Columns: omega_sigma, d_over_sigma_boundary, flag.
void write_boundary_csv(std::ostream& out, const std::vector<BoundaryPoint>& pts);

}  // namespace cavcorr::freespace

#endif
