#ifndef CAVCORR_FORMAT_HPP
#define CAVCORR_FORMAT_HPP

#include <charconv>
#include <cmath>
#include <string>

namespace cavcorr {

// Shortest-round-trip is not wanted here: fixed 17 significant digits, no
// locale, "nan"/"inf" spelled the same way on every platform.
inline std::string fmt17(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace cavcorr

#endif
