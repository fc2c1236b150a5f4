#include "cavcorr/contour.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace cavcorr::contour {

std::vector<Segment> marching_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const std::vector<double>& values, bool log_x, bool log_y)
{
    const std::size_t nx = xs.size(), ny = ys.size();
    if (values.size() != nx * ny)
        throw std::invalid_argument("marching_squares: values must have xs.size() * ys.size() entries");
    auto map = [](double v, bool lg) {
        if (lg && !(v > 0.0))
            throw std::invalid_argument("marching_squares: log axis needs positive coordinates");
        return lg ? std::log(v) : v;
    };
    auto unmap = [](double v, bool lg) { return lg ? std::exp(v) : v; };

    std::vector<Segment> out;
    if (nx < 2 || ny < 2)
        return out;
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            // corners counter-clockwise from (i, j)
            const std::array<std::size_t, 4> ci{i, i + 1, i + 1, i};
            const std::array<std::size_t, 4> cj{j, j, j + 1, j + 1};
            std::array<double, 4> v{};
            bool skip = false;
            for (int k = 0; k < 4; ++k) {
                v[k] = values[cj[k] * nx + ci[k]];
                skip = skip || std::isnan(v[k]);
            }
            if (skip)
                continue;
            std::array<bool, 4> in{};
            int mask = 0;
            for (int k = 0; k < 4; ++k) {
                in[k] = v[k] > 0.0;
                mask |= int(in[k]) << k;
            }
            if (mask == 0 || mask == 15)
                continue;
            // edge e joins corner e and corner e+1
            auto cross = [&](int e) {
                const int a = e, b = (e + 1) % 4;
                const double t = v[a] / (v[a] - v[b]);
                const double xa = map(xs[ci[a]], log_x), xb = map(xs[ci[b]], log_x);
                const double ya = map(ys[cj[a]], log_y), yb = map(ys[cj[b]], log_y);
                return Point{unmap(xa + t * (xb - xa), log_x), unmap(ya + t * (yb - ya), log_y)};
            };
            std::array<int, 4> edges{};
            int n_edges = 0;
            for (int e = 0; e < 4; ++e)
                if (in[e] != in[(e + 1) % 4])
                    edges[n_edges++] = e;
            if (n_edges == 2) {
                out.push_back({cross(edges[0]), cross(edges[1])});
                continue;
            }
            // saddle: isolate each corner whose sign differs from the center
            const bool center_in = 0.25 * (v[0] + v[1] + v[2] + v[3]) > 0.0;
            for (int k = 0; k < 4; ++k)
                if (in[k] != center_in)
                    out.push_back({cross((k + 3) % 4), cross(k)});
        }
    }
    return out;
}

}  // namespace cavcorr::contour
