#ifndef CAVCORR_CAVITY_RESPONSE_HPP
#define CAVCORR_CAVITY_RESPONSE_HPP

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "cavcorr/correlation_set.hpp"
#include "cavcorr/series.hpp"

namespace cavcorr::cavity {

struct DetectorParams {
    double omega = 1.0;   // energy gap
    double sigma = 1.0;   // switching width
    double lambda = 0.1;  // coupling

    void validate() const;
};

// Detector A sits on the axis, detector B at radius rho0.
struct CavityConfig {
    double radius = 10.0;
    double rho0 = 1.0;

    void validate() const;
    double eta() const { return rho0 / radius; }
};

struct ModeCutoffs {
    std::size_t n_max_x = 2000;
    int m_max = 1000;
    std::size_t n_max_m = 200000;
    double tol = 1e-3;    // oscillatory M series
    double tol_x = 1e-12; // absolutely convergent X series
    bool record_trace = false;

    void validate() const;
};

template <class T>
struct Evaluated {
    T value{};
    series::SumDiagnostics diagnostics;
};

// Closed-form mode sums. Each throws series::not_converged on failure.
Evaluated<double> x_aa(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut);
Evaluated<double> x_bb(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut);
Evaluated<double> x_ab(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut);
Evaluated<cplx> m_ab(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut);

// M sum before the Omega and lambda factors. It depends on sigma/R and
// rho0/R only, so a sweep can share it along an Omega axis. Failure is
// recorded instead of thrown.
struct RawNonlocalSum {
    cplx value{};
    series::SumDiagnostics diagnostics;
    bool converged = true;
};

RawNonlocalSum m_ab_raw(const DetectorParams& det, const CavityConfig& cav, const ModeCutoffs& cut);

// Bit-identical to m_ab() for the same inputs.
Evaluated<cplx> m_ab_from_raw(const RawNonlocalSum& raw, const DetectorParams& det, const CavityConfig& cav);

// All four entries; a non-converged entry keeps its last estimate and is
// flagged instead of throwing. m_raw, if given, must come from m_ab_raw with
// the same sigma, radius, rho0 and cutoffs.
CorrelationSet compute_correlations(const DetectorParams& det, const CavityConfig& cav,
                                    const ModeCutoffs& cut, const RawNonlocalSum* m_raw = nullptr);

// Same sums at a fixed truncation: n in [1, n_modes], m in [0, m_max].
double x_aa_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes);
double x_bb_fixed(const DetectorParams& det, const CavityConfig& cav, int m_max, std::size_t n_modes);
double x_ab_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes);
cplx m_ab_fixed(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes);

// Term sequence of the M series without the Omega-dependent prefactor.
series::complex_term m_ab_terms(const DetectorParams& det, const CavityConfig& cav);
double m_ab_prefactor(const DetectorParams& det, const CavityConfig& cav);

// Term sequences of the X_AA and X_AB series without prefactor.
series::real_term x_aa_terms(const DetectorParams& det, const CavityConfig& cav);
series::real_term x_ab_terms(const DetectorParams& det, const CavityConfig& cav);
// sigma^2 / (2 pi R^2), shared by the three X series
double x_prefactor(const DetectorParams& det, const CavityConfig& cav);

// ---- time-domain path (oracles) ----

enum class Detector { A, B };

struct WightmanTruncation {
    int m_max = 0;
    std::size_t n_modes = 200;
};

// Truncated mode-sum Wightman function at proper-time difference tau.
cplx wightman_cavity(double tau, double rho_i, double rho_j, const CavityConfig& cav,
                     const WightmanTruncation& trunc);

struct OracleOptions {
    int m_max = 30;              // azimuthal truncation when B-B is requested
    double window_sigmas = 10.0; // |tau| <= window_sigmas * sigma
};

class quadrature_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gaussian-windowed quadrature of the Wightman sum over tau.
double oracle_x(Detector i, Detector j, const DetectorParams& det, const CavityConfig& cav,
                std::size_t n_modes, const OracleOptions& opt = {});

// Half-line quadrature for the nonlocal term.
cplx oracle_m(const DetectorParams& det, const CavityConfig& cav, std::size_t n_modes,
              const OracleOptions& opt = {});

// Integral over [0, window_sigmas*sigma] of exp(-t^2/4 sigma^2) H0^(2)(k t),
// and its closed value (sigma/sqrt(pi)) e^{-x} [pi I0(x) + i K0(x)], x = k^2 sigma^2 / 2.
cplx mode_integral_quadrature(double k, double sigma, double window_sigmas = 10.0);
cplx mode_integral_closed(double k, double sigma);

}  // namespace cavcorr::cavity

#endif
