#ifndef CAVCORR_SERIES_HPP
#define CAVCORR_SERIES_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace cavcorr::series {

using cplx = std::complex<double>;

enum class SumMode { absolute, oscillatory };

struct SumConfig {
    double tol = 1e-3;
    std::size_t n_max = 200000;
    std::size_t n_min = 8;
    // trailing window for the absolute (Cauchy) rule
    std::size_t window = 8;
    SumMode mode = SumMode::absolute;
    // keep the per-term partial-sum trace (otherwise only summary fields)
    bool record_trace = true;
    // oscillatory mode: at n_max, fall back to the mean of S_k over the
    // trailing half when the last-pair rule has not settled
    bool window_rule = true;

    void validate() const;
};

struct SumDiagnostics {
    // recorded trace: n_values[i] is the index of partial_sums[i]
    std::vector<std::size_t> n_values;
    std::vector<cplx> partial_sums;
    std::vector<double> rel_changes;

    // local extrema of the Re and Im traces, and the midpoint of each
    // successive pair (midpoints_x.size() == extrema_x.size() - 1)
    std::vector<std::size_t> extrema_re, extrema_im;
    std::vector<double> midpoints_re, midpoints_im;

    std::size_t terms_used = 0;
    bool converged = false;
    bool insufficient_oscillation = false;
    // estimate taken from the trailing-half mean at the cap
    bool window_rule = false;
    cplx estimate{};
    // mean over all midpoint pairs, kept for comparison with the last-pair rule
    cplx multi_pair_mean{};

    // union of extrema_re and extrema_im, ascending
    std::vector<std::size_t> extrema_indices() const;
};

class not_converged : public std::runtime_error {
public:
    not_converged(const std::string& what, SumDiagnostics d)
        : std::runtime_error(what), diagnostics(std::move(d)) {}
    SumDiagnostics diagnostics;
};

class insufficient_oscillation : public not_converged {
public:
    using not_converged::not_converged;
};

using real_term = std::function<double(std::size_t)>;
using complex_term = std::function<cplx(std::size_t)>;

// Terms are indexed from 1. Summation is sequential in ascending index with
// compensated accumulation, so results do not depend on threading.
std::pair<double, SumDiagnostics> sum_absolute(const real_term& term, const SumConfig& cfg);

std::pair<cplx, SumDiagnostics> sum_oscillatory(const complex_term& term, const SumConfig& cfg);

enum class Spacing { linear, log };

// Sums n_terms terms and records n_points samples; extrema and midpoints are
// detected on the full sequence. No convergence decision is made.
SumDiagnostics partial_sum_trace(const complex_term& term, std::size_t n_terms,
                                 std::size_t n_points, Spacing spacing);

// Sample indices in [1, n_terms], strictly increasing, last one = n_terms.
std::vector<std::size_t> sample_indices(std::size_t n_terms, std::size_t n_points, Spacing spacing);

// Multiplies every value-carrying field (sums, midpoints, estimates) by f.
void scale_diagnostics(SumDiagnostics& d, double f);

// Columns: n, partial_sum_re, partial_sum_im, rel_change, is_extremum,
// midpoint_estimate_re, midpoint_estimate_im. is_extremum: 1 Re, 2 Im, 3 both.
void write_diagnostics_csv(std::ostream& out, const SumDiagnostics& d);

// Neumaier compensated accumulator.
class KahanSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
};

}  // namespace cavcorr::series

#endif
