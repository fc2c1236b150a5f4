#ifndef CAVCORR_CONTOUR_HPP
#define CAVCORR_CONTOUR_HPP

#include <vector>

namespace cavcorr::contour {

struct Point {
    double x = 0.0, y = 0.0;
};

struct Segment {
    Point a, b;
};

// Zero level set of values[j * xs.size() + i] sampled at (xs[i], ys[j]) by
// marching squares. "Inside" is value > 0. Cells with a NaN corner are
// skipped; saddles are resolved with the cell-center mean. Crossings are
// interpolated linearly in x (or log x when log_x) and likewise in y.
// Segments come out in cell order (row-major from the first row).
std::vector<Segment> marching_squares(const std::vector<double>& xs, const std::vector<double>& ys,
                                      const std::vector<double>& values, bool log_x = false, bool log_y = false);

}  // namespace cavcorr::contour

#endif
