#include "cavcorr/series.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "cavcorr/format.hpp"

namespace cavcorr::series {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();
constexpr double jitter = 1e-15;

// One real trace (Re or Im) of a running partial-sum sequence.
struct Trace {
    std::vector<double> v{0.0};  // v[0] = S_0 = 0
    std::vector<std::size_t> ext;
    std::vector<double> mids;
    std::vector<double> est_hist{nan};
    // cum[n] = S_1 + ... + S_n, for window means of the partial sums
    std::vector<double> cum{0.0};
    KahanSum cum_acc;
    std::deque<std::size_t> qmax, qmin;

    void push(double value, double margin_prev)
    {
        v.push_back(value);
        const std::size_t n = v.size() - 1;
        if (n >= 2) {
            const std::size_t k = n - 1;
            const double a = v[k - 1], b = v[k], c = v[n];
            const bool is_max = b > a + margin_prev && b > c + margin_prev;
            const bool is_min = b < a - margin_prev && b < c - margin_prev;
            if (is_max || is_min) {
                ext.push_back(k);
                if (ext.size() >= 2)
                    mids.push_back(0.5 * (v[ext[ext.size() - 1]] + v[ext[ext.size() - 2]]));
            }
        }
        est_hist.push_back(mids.empty() ? nan : mids.back());
        cum_acc.add(value);
        cum.push_back(cum_acc.value());

        while (!qmax.empty() && v[qmax.back()] <= value)
            qmax.pop_back();
        qmax.push_back(n);
        while (!qmin.empty() && v[qmin.back()] >= value)
            qmin.pop_back();
        qmin.push_back(n);
        const std::size_t lo = n / 2;
        while (qmax.front() < lo)
            qmax.pop_front();
        while (qmin.front() < lo)
            qmin.pop_front();
    }

    // spread of the trace over [n/2, n] relative to its current value
    double spread() const
    {
        const double now = v.back();
        return std::max(v[qmax.front()] - now, now - v[qmin.front()]);
    }

    // mean of S_k over k in (n/2, n]
    double window_mean(std::size_t n) const { return (cum[n] - cum[n / 2]) / double(n - n / 2); }

    double best() const { return mids.empty() ? v.back() : mids.back(); }
};

std::size_t extrema_since(const Trace& tr, std::size_t from)
{
    return std::size_t(tr.ext.end() - std::lower_bound(tr.ext.begin(), tr.ext.end(), from));
}

double modulus(double re, double im)
{
    return std::hypot(re, im);
}

double mean(const std::vector<double>& x)
{
    if (x.empty())
        return nan;
    KahanSum s;
    for (double t : x)
        s.add(t);
    return s.value() / double(x.size());
}

void finish_extrema(SumDiagnostics& d, Trace& re, Trace& im)
{
    d.extrema_re = std::move(re.ext);
    d.extrema_im = std::move(im.ext);
    d.multi_pair_mean = {mean(re.mids), mean(im.mids)};
    d.midpoints_re = std::move(re.mids);
    d.midpoints_im = std::move(im.mids);
}

}  // namespace

void SumConfig::validate() const
{
    if (!(tol > 0.0))
        throw std::invalid_argument("SumConfig: tol must be positive");
    if (!(n_min < n_max))
        throw std::invalid_argument("SumConfig: need n_min < n_max");
    if (window < 1)
        throw std::invalid_argument("SumConfig: window must be >= 1");
}

std::vector<std::size_t> SumDiagnostics::extrema_indices() const
{
    std::vector<std::size_t> out;
    std::set_union(extrema_re.begin(), extrema_re.end(), extrema_im.begin(), extrema_im.end(),
                   std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::pair<double, SumDiagnostics> sum_absolute(const real_term& term, const SumConfig& cfg)
{
    cfg.validate();
    SumDiagnostics d;
    KahanSum s;
    std::deque<double> recent;
    double prev = 0.0;
    for (std::size_t n = 1; n <= cfg.n_max; ++n) {
        const double t = term(n);
        if (!std::isfinite(t))
            throw std::domain_error("sum_absolute: non-finite term at n = " + std::to_string(n));
        s.add(t);
        const double sn = s.value();
        recent.push_back(std::abs(t));
        if (recent.size() > cfg.window)
            recent.pop_front();
        if (cfg.record_trace) {
            d.n_values.push_back(n);
            d.partial_sums.emplace_back(sn, 0.0);
            d.rel_changes.push_back(sn != 0.0 ? std::abs(sn - prev) / std::abs(sn)
                                              : (sn == prev ? 0.0 : std::numeric_limits<double>::infinity()));
        }
        prev = sn;
        if (n >= cfg.n_min) {
            const double w = *std::max_element(recent.begin(), recent.end());
            if (w == 0.0 || w < cfg.tol * std::abs(sn)) {
                d.terms_used = n;
                d.converged = true;
                d.estimate = {sn, 0.0};
                return {sn, std::move(d)};
            }
        }
    }
    d.terms_used = cfg.n_max;
    d.estimate = {s.value(), 0.0};
    throw not_converged("sum_absolute: not converged after " + std::to_string(cfg.n_max) + " terms",
                        std::move(d));
}

std::pair<cplx, SumDiagnostics> sum_oscillatory(const complex_term& term, const SumConfig& cfg)
{
    cfg.validate();
    SumDiagnostics d;
    Trace re, im;
    KahanSum sr, si;
    cplx prev{};
    bool window = false;

    // Settles one component at index n. The trailing-half mean is only
    // consulted at the cap, for beating oscillations (slowly modulated sign
    // alternation) that keep the last-pair midpoint jittering.
    auto decide = [&](const Trace& tr, std::size_t n, double& out, bool at_cap) {
        const double scale_s = modulus(re.v[n], im.v[n]);
        const double scale_e = modulus(re.best(), im.best());
        if (tr.spread() <= cfg.tol * scale_s) {
            out = tr.v.back();
            return true;
        }
        if (tr.mids.size() < 2)
            return false;
        const double e = tr.mids.back();
        const double before = tr.mids[tr.mids.size() - 2];
        const double half = tr.est_hist[n / 2];
        if (std::isnan(half))
            return false;
        const double lim = cfg.tol * scale_e;
        if (std::abs(e - before) <= lim && std::abs(e - half) <= lim) {
            out = e;
            return true;
        }
        if (at_cap && cfg.window_rule && n >= 4 * cfg.n_min && extrema_since(tr, n / 2) >= 8) {
            const double w = tr.window_mean(n);
            const double quarter = (tr.cum[n] - tr.cum[n - n / 4]) / double(n / 4);
            const double wlim = cfg.tol * modulus(re.window_mean(n), im.window_mean(n));
            if (std::abs(w - tr.window_mean(n / 2)) <= wlim && std::abs(w - quarter) <= wlim) {
                out = w;
                window = true;
                return true;
            }
        }
        return false;
    };

    for (std::size_t n = 1; n <= cfg.n_max; ++n) {
        const cplx t = term(n);
        if (!std::isfinite(t.real()) || !std::isfinite(t.imag()))
            throw std::domain_error("sum_oscillatory: non-finite term at n = " + std::to_string(n));
        sr.add(t.real());
        si.add(t.imag());
        const cplx sn{sr.value(), si.value()};
        const double margin = n >= 2 ? jitter * modulus(re.v[n - 1], im.v[n - 1]) : 0.0;
        re.push(sn.real(), margin);
        im.push(sn.imag(), margin);
        if (cfg.record_trace) {
            d.n_values.push_back(n);
            d.partial_sums.push_back(sn);
            const double m = std::abs(sn);
            d.rel_changes.push_back(m != 0.0 ? std::abs(sn - prev) / m
                                             : (sn == prev ? 0.0 : std::numeric_limits<double>::infinity()));
        }
        prev = sn;
        if (n < cfg.n_min)
            continue;

        double er = 0.0, ei = 0.0;
        const bool at_cap = n == cfg.n_max;
        if (decide(re, n, er, at_cap) && decide(im, n, ei, at_cap)) {
            d.window_rule = window;
            d.terms_used = n;
            d.converged = true;
            d.estimate = {er, ei};
            d.insufficient_oscillation = re.ext.empty() && im.ext.empty();
            finish_extrema(d, re, im);
            return {d.estimate, std::move(d)};
        }
        window = false;
    }
    d.terms_used = cfg.n_max;
    d.estimate = {re.best(), im.best()};
    const bool few = re.ext.size() < 2 && im.ext.size() < 2;
    d.insufficient_oscillation = few;
    finish_extrema(d, re, im);
    const std::string msg = "sum_oscillatory: not converged after " + std::to_string(cfg.n_max) + " terms";
    if (few)
        throw insufficient_oscillation(msg + " (fewer than 2 extrema)", std::move(d));
    throw not_converged(msg, std::move(d));
}

std::vector<std::size_t> sample_indices(std::size_t n_terms, std::size_t n_points, Spacing spacing)
{
    if (n_points < 2)
        throw std::invalid_argument("sample_indices: need n_points >= 2");
    if (n_terms < 1)
        throw std::invalid_argument("sample_indices: need n_terms >= 1");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_points; ++i) {
        const double f = double(i) / double(n_points - 1);
        double x;
        if (spacing == Spacing::linear)
            x = 1.0 + f * double(n_terms - 1);
        else
            x = std::exp(f * std::log(double(n_terms)));
        std::size_t k = std::clamp<std::size_t>(std::size_t(std::llround(x)), 1, n_terms);
        if (out.empty() || k > out.back())
            out.push_back(k);
    }
    if (out.back() != n_terms)
        out.push_back(n_terms);
    return out;
}

SumDiagnostics partial_sum_trace(const complex_term& term, std::size_t n_terms, std::size_t n_points,
                                 Spacing spacing)
{
    const auto picks = sample_indices(n_terms, n_points, spacing);
    SumDiagnostics d;
    Trace re, im;
    KahanSum sr, si;
    cplx last_sample{};
    std::size_t next = 0;
    for (std::size_t n = 1; n <= n_terms; ++n) {
        const cplx t = term(n);
        sr.add(t.real());
        si.add(t.imag());
        const cplx sn{sr.value(), si.value()};
        const double margin = n >= 2 ? jitter * modulus(re.v[n - 1], im.v[n - 1]) : 0.0;
        re.push(sn.real(), margin);
        im.push(sn.imag(), margin);
        if (next < picks.size() && picks[next] == n) {
            d.n_values.push_back(n);
            d.partial_sums.push_back(sn);
            const double m = std::abs(sn);
            d.rel_changes.push_back(m != 0.0 ? std::abs(sn - last_sample) / m
                                             : (sn == last_sample ? 0.0 : std::numeric_limits<double>::infinity()));
            last_sample = sn;
            ++next;
        }
    }
    d.terms_used = n_terms;
    d.estimate = {re.best(), im.best()};
    finish_extrema(d, re, im);
    return d;
}

void write_diagnostics_csv(std::ostream& out, const SumDiagnostics& d)
{
    out << "n,partial_sum_re,partial_sum_im,rel_change,is_extremum,midpoint_estimate_re,midpoint_estimate_im\n";
    auto confirmed_mid = [](const std::vector<std::size_t>& ext, const std::vector<double>& mids,
                            std::size_t n) {
        // extremum k is known once S_{k+1} exists
        const auto c = std::size_t(std::upper_bound(ext.begin(), ext.end(), n - 1) - ext.begin());
        return c >= 2 ? mids[c - 2] : nan;
    };
    for (std::size_t i = 0; i < d.n_values.size(); ++i) {
        const std::size_t n = d.n_values[i];
        int flag = 0;
        if (std::binary_search(d.extrema_re.begin(), d.extrema_re.end(), n))
            flag |= 1;
        if (std::binary_search(d.extrema_im.begin(), d.extrema_im.end(), n))
            flag |= 2;
        out << n << ',' << fmt17(d.partial_sums[i].real()) << ',' << fmt17(d.partial_sums[i].imag()) << ','
            << fmt17(d.rel_changes[i]) << ',' << flag << ','
            << fmt17(confirmed_mid(d.extrema_re, d.midpoints_re, n)) << ','
            << fmt17(confirmed_mid(d.extrema_im, d.midpoints_im, n)) << '\n';
    }
}

void scale_diagnostics(SumDiagnostics& d, double f)
{
    for (auto& s : d.partial_sums)
        s *= f;
    for (auto& x : d.midpoints_re)
        x *= f;
    for (auto& x : d.midpoints_im)
        x *= f;
    d.estimate *= f;
    d.multi_pair_mean *= f;
}

}  // namespace cavcorr::series
