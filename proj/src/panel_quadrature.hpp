#ifndef CAVCORR_PANEL_QUADRATURE_HPP
#define CAVCORR_PANEL_QUADRATURE_HPP

#include <complex>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace cavcorr::detail {

// 20-point Gauss-Legendre on every panel [cuts[i], cuts[i+1]], summed in order.
template <class T, class F>
T integrate_panels(const std::vector<double>& cuts, F&& f)
{
    using gl = boost::math::quadrature::gauss<double, 20>;
    const auto& x = gl::abscissa();
    const auto& w = gl::weights();
    T total{};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        T panel{};
        for (std::size_t j = 0; j < x.size(); ++j) {
            panel += w[j] * f(mid + half * x[j]);
            if (x[j] != 0.0)
                panel += w[j] * f(mid - half * x[j]);
        }
        total += half * panel;
    }
    return total;
}

}  // namespace cavcorr::detail

#endif
