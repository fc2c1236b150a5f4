#ifndef CAVCORR_CORRELATION_SET_HPP
#define CAVCORR_CORRELATION_SET_HPP

#include <array>
#include <complex>

#include "cavcorr/series.hpp"

namespace cavcorr {

using cplx = std::complex<double>;

// Second-order response entries of the two-detector state.
// x_ab is complex so phase rotations can be exercised; cavity and free-space
// values are real.
struct CorrelationSet {
    double x_aa = 0.0;
    double x_bb = 0.0;
    cplx x_ab{};
    cplx m_ab{};

    // order: x_aa, x_bb, x_ab, m_ab
    std::array<series::SumDiagnostics, 4> diagnostics{};
    std::array<bool, 4> converged{true, true, true, true};

    bool all_converged() const { return converged[0] && converged[1] && converged[2] && converged[3]; }

    // excitation probabilities no longer small
    bool perturbative_warning() const { return x_aa + x_bb > 0.1; }
};

}  // namespace cavcorr

#endif
