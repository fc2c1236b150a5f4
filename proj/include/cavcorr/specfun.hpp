#ifndef CAVCORR_SPECFUN_HPP
#define CAVCORR_SPECFUN_HPP

#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace cavcorr::specfun {

// J_m(x) for integer m >= 0 and x >= 0.
double bessel_j(int m, double x);

// dJ_m/dx.
double bessel_j_derivative(int m, double x);

struct ScaledIK0 {
    double i0;  // e^{-x} I_0(x)
    double k0;  // e^{-x} K_0(x)
};

ScaledIK0 scaled_bessel_ik0(double x);

// Binary entropy in nats, H(0) = H(1) = 0.
double binary_entropy(double x);

// x log x with 0 log 0 = 0.
double xlogx(double x);

// Integral over the real line of exp(-(a + b cosh s)^2), b > 0.
double gauss_cosh_integral(double a, double b);

// Memoized positive zeros of J_m. Readers get immutable snapshots; growth
// happens under an exclusive lock, so concurrent readers are safe.
class BesselZeroTable {
public:
    using slice = std::shared_ptr<const std::vector<double>>;

    // First n zeros (at least) of J_m, ascending. n >= 1.
    slice order(int m, int n);

    // n-th zero, 1-based.
    double zero(int m, int n);

    // Writes "m n xi" rows for m in [0, m_max], n in [1, n_max].
    void save(const std::string& path, int m_max, int n_max);

    // Loads rows and re-verifies |J_m(xi)| < 1e-12 and interlacing; throws
    // std::runtime_error on a bad row. Loaded orders replace cached ones.
    void load(const std::string& path);

    // Checks |J_m| < 1e-12 and strict interlacing over m <= m_max, n <= n_max.
    bool verify(int m_max, int n_max, std::string* why = nullptr);

    void clear();

private:
    void grow_locked(int m, int n);

    std::shared_mutex mutex_;
    std::vector<slice> orders_;
};

// Process-wide table used by the response functions.
BesselZeroTable& shared_zero_table();

// Convenience: first n_max zeros of J_m from the shared table.
std::vector<double> bessel_zeros(int m, int n_max);

}  // namespace cavcorr::specfun

#endif
