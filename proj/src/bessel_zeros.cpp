#include "cavcorr/specfun.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cavcorr::specfun {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double zero_check = 1e-12;

double mcmahon(int m, int n)
{
    const double mu = 4.0 * m * m;
    const double beta = (n + 0.5 * m - 0.25) * pi;
    const double e = 8.0 * beta;
    return beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e * e * e);
}

// Root of J_m in (lo, hi), where J_m changes sign exactly once.
double refine(int m, double lo, double hi, double seed)
{
    double flo = bessel_j(m, lo);
    double x = (seed > lo && seed < hi) ? seed : 0.5 * (lo + hi);
    // a bisection fallback can leave x off the best iterate, so keep that one
    double best = lo, fbest = std::abs(flo);
    for (int it = 0; it < 200; ++it) {
        const double f = bessel_j(m, x);
        if (std::abs(f) < fbest) {
            best = x;
            fbest = std::abs(f);
        }
        if (f == 0.0)
            break;
        if ((f > 0.0) == (flo > 0.0)) {
            lo = x;
            flo = f;
        } else {
            hi = x;
        }
        const double d = bessel_j_derivative(m, x);
        double next = x - f / d;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        const double dx = std::abs(next - x);
        x = next;
        if (dx <= 4.0 * std::numeric_limits<double>::epsilon() * x ||
            hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * x)
            break;
    }
    const double fx = std::abs(bessel_j(m, x));
    if (fx < fbest) {
        best = x;
        fbest = fx;
    }
    if (!(fbest < zero_check))
        throw std::runtime_error("bessel zero refinement failed for order " + std::to_string(m) + " near x = " +
                                 std::to_string(best));
    return best;
}

std::string format17(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace

void BesselZeroTable::grow_locked(int m, int n)
{
    if ((int)orders_.size() <= m)
        orders_.resize(m + 1);
    auto have = [this](int k) { return orders_[k] ? orders_[k]->size() : std::size_t(0); };

    // sizes wanted per order, top-down: order k-1 must bracket every zero of order k
    std::vector<std::size_t> want(m + 1, 0);
    for (int k = m; k >= 0; --k) {
        std::size_t need = (k == m) ? std::size_t(n) : want[k + 1] + 1;
        // amortize repeated small requests on the requested order only
        if (k == m && have(k) < need)
            need = std::max(need, have(k) + have(k) / 2);
        want[k] = std::max(need, have(k));
    }

    for (int k = 0; k <= m; ++k) {
        const std::size_t from = have(k);
        if (from >= want[k])
            continue;
        auto grown = std::make_shared<std::vector<double>>();
        if (orders_[k])
            *grown = *orders_[k];
        grown->reserve(want[k]);
        if (k == 0) {
            for (std::size_t i = from + 1; i <= want[k]; ++i) {
                const double lo = (double(i) - 0.5) * pi, hi = double(i) * pi;
                grown->push_back(refine(0, lo, hi, mcmahon(0, int(i))));
            }
        } else {
            const auto& prev = *orders_[k - 1];
            for (std::size_t i = from + 1; i <= want[k]; ++i)
                grown->push_back(refine(k, prev[i - 1], prev[i], mcmahon(k, int(i))));
        }
        orders_[k] = std::move(grown);
    }
}

BesselZeroTable::slice BesselZeroTable::order(int m, int n)
{
    if (m < 0 || n < 1)
        throw std::invalid_argument("bessel_zeros: need m >= 0 and n >= 1");
    {
        std::shared_lock lock(mutex_);
        if ((int)orders_.size() > m && orders_[m] && (int)orders_[m]->size() >= n)
            return orders_[m];
    }
    std::unique_lock lock(mutex_);
    grow_locked(m, n);
    return orders_[m];
}

double BesselZeroTable::zero(int m, int n)
{
    return (*order(m, n))[n - 1];
}

void BesselZeroTable::save(const std::string& path, int m_max, int n_max)
{
    if (!verify(m_max, n_max))
        throw std::runtime_error("zero table failed verification before export");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path);
    for (int m = 0; m <= m_max; ++m) {
        auto z = order(m, n_max);
        for (int n = 1; n <= n_max; ++n)
            out << m << ' ' << n << ' ' << format17((*z)[n - 1]) << '\n';
    }
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

void BesselZeroTable::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::map<int, std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        int m = -1, n = 0;
        double xi = 0.0;
        if (!(ss >> m >> n >> xi) || m < 0 || n < 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
        auto& v = rows[m];
        if ((int)v.size() != n - 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": indices not contiguous");
        if (!(std::abs(bessel_j(m, xi)) < zero_check))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a zero of J_m");
        if (!v.empty() && !(xi > v.back()))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": zeros not increasing");
        v.push_back(xi);
    }
    for (auto it = rows.begin(); it != rows.end(); ++it) {
        auto lower = rows.find(it->first - 1);
        if (lower == rows.end())
            continue;
        const auto& a = lower->second;
        const auto& b = it->second;
        for (std::size_t i = 0; i < b.size() && i < a.size(); ++i) {
            const bool ok = a[i] < b[i] && (i + 1 >= a.size() || b[i] < a[i + 1]);
            if (!ok)
                throw std::runtime_error(path + ": interlacing violated at order " +
                                         std::to_string(it->first));
        }
    }
    // only a gap-free prefix of orders can seed the cache
    std::unique_lock lock(mutex_);
    orders_.clear();
    for (int m = 0; rows.count(m); ++m)
        orders_.push_back(std::make_shared<const std::vector<double>>(std::move(rows[m])));
}

bool BesselZeroTable::verify(int m_max, int n_max, std::string* why)
{
    auto fail = [why](const std::string& s) {
        if (why)
            *why = s;
        return false;
    };
    for (int m = 0; m <= m_max; ++m) {
        auto z = order(m, n_max + 1);
        auto up = order(m + 1, n_max);
        const auto& a = *z;
        const auto& b = *up;
        for (int n = 0; n < n_max; ++n) {
            if (!(std::abs(bessel_j(m, a[n])) < zero_check))
                return fail("residual too large at m=" + std::to_string(m) + " n=" + std::to_string(n + 1));
            if (!(a[n] < a[n + 1]))
                return fail("not increasing at m=" + std::to_string(m));
            if (!(a[n] < b[n] && b[n] < a[n + 1]))
                return fail("interlacing violated at m=" + std::to_string(m) + " n=" + std::to_string(n + 1));
        }
    }
    if (!(zero(0, 1) > 2.0))
        return fail("first zero of J_0 below 2");
    return true;
}

void BesselZeroTable::clear()
{
    std::unique_lock lock(mutex_);
    orders_.clear();
}

BesselZeroTable& shared_zero_table()
{
    static BesselZeroTable table;
    return table;
}

std::vector<double> bessel_zeros(int m, int n_max)
{
    auto z = shared_zero_table().order(m, n_max);
    return std::vector<double>(z->begin(), z->begin() + n_max);
}

}  // namespace cavcorr::specfun
