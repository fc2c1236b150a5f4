#include "cavcorr/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cavcorr/format.hpp"

namespace cavcorr::sweep {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

double parse_double(const std::string& s)
{
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    if (s == "nan")
        return nan;
    if (s == "inf")
        return std::numeric_limits<double>::infinity();
    if (s == "-inf")
        return -std::numeric_limits<double>::infinity();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw validation_error("not a number: '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string join_values(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ',';
        s += fmt17(v[i]);
    }
    return s;
}

void write_file_atomic(const std::string& path, const std::string& text)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        out << text;
        if (!out)
            throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

std::vector<std::string> read_lines(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::vector<std::string> lines;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t start = 0;
    while (start < text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string::npos)
            break;  // an unterminated tail is an interrupted write
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

json value_or_null(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

json cutoffs_json(const cavity::ModeCutoffs& c)
{
    return {{"n_max_x", c.n_max_x}, {"m_max", c.m_max}, {"n_max_m", c.n_max_m}, {"tol", c.tol}, {"tol_x", c.tol_x}};
}

json spec_json(const SweepSpec& s)
{
    auto axis = [](const Axis& a) {
        return json{{"values", a.values}, {"spacing", a.spacing == Spacing::log ? "log" : "lin"}};
    };
    json outs = json::array();
    const auto& o = s.outputs;
    for (auto [on, name] : {std::pair{o.x_terms, "x_terms"}, {o.negativity, "negativity"},
                            {o.mutual_info, "mutual_info"}, {o.discord, "discord"},
                            {o.freespace_boundary, "freespace_boundary"}})
        if (on)
            outs.push_back(name);
    return {{"omega_sigma", axis(s.omega_sigma)},
            {"rho0_sigma", axis(s.rho0_sigma)},
            {"sigma_R", axis(s.sigma_R)},
            {"lambda", s.lambda},
            {"cutoffs", cutoffs_json(s.cut)},
            {"outputs", outs},
            {"format", s.format == Format::json ? "json" : "csv"}};
}

// Grid JSON document built from the CSV data lines.
std::string grid_json(const SweepSpec& spec, const std::vector<std::string>& lines)
{
    const auto& cols = csv_columns();
    const auto& o = spec.outputs;
    auto wanted = [&](const std::string& c) {
        if (c == "x_aa" || c == "x_bb" || c == "x_ab" || c == "m_ab_re" || c == "m_ab_im")
            return o.x_terms;
        if (c == "neg_exact" || c == "neg_pert")
            return o.negativity;
        if (c == "mutual_info")
            return o.mutual_info;
        if (c == "classical_j" || c == "discord" || c == "s1" || c == "s2")
            return o.discord;
        return true;
    };
    json rows = json::array();
    for (const auto& line : lines) {
        const auto f = split(line, ',');
        json r = json::object();
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (!wanted(cols[i]))
                continue;
            if (cols[i] == "converged_flags")
                r[cols[i]] = f[i];
            else
                r[cols[i]] = value_or_null(parse_double(f[i]));
        }
        rows.push_back(std::move(r));
    }
    json doc = {{"provenance",
                 {{"tool", tool_name},
                  {"tool_version", tool_version},
                  {"entropy_base", "nats"},
                  {"units", "sigma = 1"},
                  {"spec", spec_json(spec)}}},
                {"rows", rows}};
    return doc.dump(1) + "\n";
}

struct Manifest {
    std::string spec_hash;
    std::size_t grid_size = 0;
    std::string bitmap;
    std::vector<std::string> flags;
    double wall_time_s = 0.0;
    bool complete = false;

    std::string dump(const SweepSpec& spec) const
    {
        json j = {{"tool", tool_name},
                  {"tool_version", tool_version},
                  {"spec_hash", spec_hash},
                  {"spec", spec_json(spec)},
                  {"grid_size", grid_size},
                  {"completed_bitmap", bitmap},
                  {"converged_flags", flags},
                  {"wall_time_s", wall_time_s},
                  {"complete", complete}};
        return j.dump(1) + "\n";
    }

    static Manifest load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot read manifest " + path);
        const json j = json::parse(in);
        Manifest m;
        m.spec_hash = j.at("spec_hash").get<std::string>();
        m.grid_size = j.at("grid_size").get<std::size_t>();
        m.bitmap = j.at("completed_bitmap").get<std::string>();
        m.flags = j.at("converged_flags").get<std::vector<std::string>>();
        m.wall_time_s = j.at("wall_time_s").get<double>();
        m.complete = j.at("complete").get<bool>();
        if (m.bitmap.size() != m.grid_size || m.flags.size() != m.grid_size)
            throw std::runtime_error("manifest bitmap length does not match grid size");
        return m;
    }
};

// Lines of a finished JSON grid file, rebuilt in CSV form.
std::vector<std::string> lines_from_grid_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    const json doc = json::parse(in);
    std::vector<std::string> lines;
    for (const auto& r : doc.at("rows")) {
        std::string line;
        for (const auto& c : csv_columns()) {
            if (!line.empty())
                line += ',';
            if (!r.contains(c))
                line += "nan";
            else if (c == "converged_flags")
                line += r[c].get<std::string>();
            else
                line += r[c].is_null() ? std::string("nan") : fmt17(r[c].get<double>());
        }
        lines.push_back(line);
    }
    return lines;
}

std::size_t count_unconverged(const std::vector<std::string>& flags)
{
    return std::size_t(std::count_if(flags.begin(), flags.end(),
                                     [](const std::string& f) { return f.find('0') != std::string::npos; }));
}

}  // namespace

// ---- axes and spec ----

std::vector<double> axis_values(double lo, double hi, std::size_t count, Spacing spacing)
{
    if (count == 0)
        throw validation_error("axis: count must be >= 1");
    if (!std::isfinite(lo) || !std::isfinite(hi))
        throw validation_error("axis: bounds must be finite");
    if (spacing == Spacing::log && !(lo > 0.0 && hi > 0.0))
        throw validation_error("axis: log spacing needs positive bounds");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : double(i) / double(count - 1);
        v[i] = spacing == Spacing::log ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                                       : lo + t * (hi - lo);
    }
    v.front() = lo;
    if (count > 1)
        v.back() = hi;
    return v;
}

Axis parse_axis(const std::vector<std::string>& tokens)
{
    if (tokens.empty())
        throw validation_error("axis: no values");
    Axis a;
    if (tokens.size() == 1 && tokens[0].find(':') != std::string::npos) {
        const auto parts = split(trim(tokens[0]), ':');
        if (parts.size() < 3 || parts.size() > 4)
            throw validation_error("axis: expected lo:hi:count[:lin|log], got '" + tokens[0] + "'");
        const double lo = parse_double(parts[0]), hi = parse_double(parts[1]);
        const double cnt = parse_double(parts[2]);
        if (!(cnt >= 1.0) || cnt != std::floor(cnt))
            throw validation_error("axis: count must be a positive integer");
        if (parts.size() == 4) {
            if (parts[3] == "log")
                a.spacing = Spacing::log;
            else if (parts[3] != "lin")
                throw validation_error("axis: spacing must be lin or log");
        }
        if (!(hi >= lo))
            throw validation_error("axis: need lo <= hi");
        a.values = axis_values(lo, hi, std::size_t(cnt), a.spacing);
        return a;
    }
    for (const auto& t : tokens) {
        const auto s = trim(t);
        if (!s.empty())
            a.values.push_back(parse_double(s));
    }
    if (a.values.empty())
        throw validation_error("axis: no values");
    return a;
}

Format parse_format(const std::string& s)
{
    if (s == "csv")
        return Format::csv;
    if (s == "json")
        return Format::json;
    throw validation_error("format must be csv or json");
}

Outputs parse_outputs(const std::vector<std::string>& names)
{
    Outputs o{false, false, false, false, false};
    for (const auto& raw : names) {
        const auto n = trim(raw);
        if (n == "x_terms")
            o.x_terms = true;
        else if (n == "negativity")
            o.negativity = true;
        else if (n == "mutual_info")
            o.mutual_info = true;
        else if (n == "discord")
            o.discord = true;
        else if (n == "freespace_boundary")
            o.freespace_boundary = true;
        else if (!n.empty())
            throw validation_error("unknown output '" + n + "'");
    }
    return o;
}

void SweepSpec::validate() const
{
    auto check_axis = [](const Axis& a, const char* name, bool positive) {
        if (a.values.empty())
            throw validation_error(std::string(name) + ": axis is empty");
        for (double v : a.values)
            if (!std::isfinite(v) || v < 0.0 || (positive && v == 0.0))
                throw validation_error(std::string(name) + ": value " + fmt17(v) + " out of range");
    };
    check_axis(omega_sigma, "omega_sigma", false);
    check_axis(rho0_sigma, "rho0_sigma", false);
    check_axis(sigma_R, "sigma_R", true);
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw validation_error("lambda must be finite and > 0");
    try {
        cut.validate();
    } catch (const std::invalid_argument& e) {
        throw validation_error(e.what());
    }
}

std::string SweepSpec::canonical() const
{
    std::ostringstream s;
    auto sp = [](const Axis& a) { return a.spacing == Spacing::log ? "log" : "lin"; };
    s << "tool_version=" << tool_version << '\n'
      << "omega_sigma=" << join_values(omega_sigma.values) << ';' << sp(omega_sigma) << '\n'
      << "rho0_sigma=" << join_values(rho0_sigma.values) << ';' << sp(rho0_sigma) << '\n'
      << "sigma_R=" << join_values(sigma_R.values) << ';' << sp(sigma_R) << '\n'
      << "lambda=" << fmt17(lambda) << '\n'
      << "n_max_x=" << cut.n_max_x << "\nm_max=" << cut.m_max << "\nn_max_m=" << cut.n_max_m
      << "\ntol=" << fmt17(cut.tol) << "\ntol_x=" << fmt17(cut.tol_x) << '\n'
      << "outputs=" << outputs.x_terms << outputs.negativity << outputs.mutual_info << outputs.discord
      << outputs.freespace_boundary << '\n'
      << "format=" << (format == Format::json ? "json" : "csv") << '\n';
    return s.str();
}

std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t SweepSpec::hash() const
{
    return fnv1a64(canonical());
}

std::vector<GridPoint> build_grid(const SweepSpec& spec)
{
    spec.validate();
    std::vector<GridPoint> g;
    for (double sr : spec.sigma_R.values)
        for (double os : spec.omega_sigma.values)
            for (double rs : spec.rho0_sigma.values)
                if (rs * sr < 1.0)
                    g.push_back({os, rs, sr});
    if (g.empty())
        throw validation_error("no grid point satisfies rho0_sigma * sigma_R < 1");
    return g;
}

cavity::DetectorParams detector_at(const GridPoint& p, double lambda)
{
    cavity::DetectorParams d;
    d.omega = p.omega_sigma;
    d.sigma = 1.0;
    d.lambda = lambda;
    return d;
}

cavity::CavityConfig cavity_at(const GridPoint& p)
{
    cavity::CavityConfig c;
    c.radius = 1.0 / p.sigma_R;
    c.rho0 = p.rho0_sigma;
    return c;
}

// ---- rows ----

std::string Row::converged_flags() const
{
    std::string f;
    for (bool c : corrs.converged)
        f += c ? '1' : '0';
    return f;
}

Row evaluate_point(const GridPoint& p, double lambda, const cavity::ModeCutoffs& cut,
                   const cavity::RawNonlocalSum* m_raw)
{
    if (!(p.rho0_sigma * p.sigma_R < 1.0))
        throw validation_error("rho0_sigma * sigma_R must be < 1");
    Row r;
    r.point = p;
    r.lambda = lambda;
    r.corrs = cavity::compute_correlations(detector_at(p, lambda), cavity_at(p), cut, m_raw);
    if (!r.corrs.all_converged()) {
        r.measures_valid = false;
        r.error = "series not converged";
        return r;
    }
    try {
        r.meas = measures::discord(r.corrs);
    } catch (const measures::invalid_state& e) {
        r.measures_valid = false;
        r.error = e.what();
    }
    return r;
}

const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols{
        "omega_sigma", "rho0_sigma", "sigma_R",     "lambda",      "x_aa",    "x_bb", "x_ab", "m_ab_re", "m_ab_im",
        "neg_exact",   "neg_pert",   "mutual_info", "classical_j", "discord", "s1",   "s2",   "converged_flags"};
    return cols;
}

std::string csv_header()
{
    std::string h;
    for (const auto& c : csv_columns()) {
        if (!h.empty())
            h += ',';
        h += c;
    }
    return h;
}

std::string csv_row(const Row& r)
{
    const auto& m = r.meas;
    const bool ok = r.measures_valid;
    const double vals[] = {r.point.omega_sigma,
                           r.point.rho0_sigma,
                           r.point.sigma_R,
                           r.lambda,
                           r.corrs.x_aa,
                           r.corrs.x_bb,
                           r.corrs.x_ab.real(),
                           r.corrs.m_ab.real(),
                           r.corrs.m_ab.imag(),
                           ok ? m.negativity_exact : nan,
                           ok ? m.negativity_pert : nan,
                           ok ? m.mutual_info : nan,
                           ok ? m.classical_j : nan,
                           ok ? m.discord : nan,
                           ok ? m.s1 : nan,
                           ok ? m.s2 : nan};
    std::string line;
    for (double v : vals) {
        line += fmt17(v);
        line += ',';
    }
    line += r.converged_flags();
    return line;
}

ParsedRow parse_csv_row(const std::string& line)
{
    const auto f = split(line, ',');
    if (f.size() != csv_columns().size())
        throw std::runtime_error("grid row has " + std::to_string(f.size()) + " fields");
    ParsedRow r;
    r.point = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
    r.lambda = parse_double(f[3]);
    r.corrs.x_aa = parse_double(f[4]);
    r.corrs.x_bb = parse_double(f[5]);
    r.corrs.x_ab = parse_double(f[6]);
    r.corrs.m_ab = {parse_double(f[7]), parse_double(f[8])};
    r.neg_exact = parse_double(f[9]);
    r.neg_pert = parse_double(f[10]);
    r.mutual_info = parse_double(f[11]);
    r.classical_j = parse_double(f[12]);
    r.discord = parse_double(f[13]);
    r.s1 = parse_double(f[14]);
    r.s2 = parse_double(f[15]);
    r.flags = f[16];
    for (std::size_t i = 0; i < 4 && i < r.flags.size(); ++i)
        r.corrs.converged[i] = r.flags[i] == '1';
    return r;
}

std::string point_json(const Row& r, const cavity::ModeCutoffs& cut)
{
    const auto& c = r.corrs;
    const char* names[] = {"x_aa", "x_bb", "x_ab", "m_ab"};
    json conv, terms;
    for (int i = 0; i < 4; ++i) {
        conv[names[i]] = c.converged[std::size_t(i)];
        terms[names[i]] = c.diagnostics[std::size_t(i)].terms_used;
    }
    json meas = nullptr;
    if (r.measures_valid) {
        const auto& m = r.meas;
        meas = {{"neg_exact", m.negativity_exact},
                {"neg_pert", m.negativity_pert},
                {"negativity_margin", m.negativity_margin},
                {"mutual_info", m.mutual_info},
                {"classical_j", m.classical_j},
                {"discord", m.discord},
                {"s1", m.s1},
                {"s2", m.s2},
                {"alpha", {m.alpha.a1, m.alpha.a3, m.alpha.a4}}};
    }
    json doc = {{"provenance",
                 {{"tool", tool_name},
                  {"tool_version", tool_version},
                  {"entropy_base", "nats"},
                  {"units", "sigma = 1"},
                  {"parameters",
                   {{"omega_sigma", r.point.omega_sigma},
                    {"rho0_sigma", r.point.rho0_sigma},
                    {"sigma_R", r.point.sigma_R},
                    {"lambda", r.lambda}}},
                  {"cutoffs", cutoffs_json(cut)},
                  {"converged", conv},
                  {"terms_used", terms}}},
                {"correlations",
                 {{"x_aa", c.x_aa},
                  {"x_bb", c.x_bb},
                  {"x_ab", c.x_ab.real()},
                  {"m_ab", {c.m_ab.real(), c.m_ab.imag()}}}},
                {"measures", meas},
                {"perturbative_warning", c.perturbative_warning()}};
    if (!r.error.empty())
        doc["error"] = r.error;
    return doc.dump(2) + "\n";
}

// ---- grid runner ----

std::string partial_path(const std::string& out_path)
{
    return out_path + ".partial";
}

std::string manifest_path(const std::string& out_path)
{
    return out_path + ".manifest.json";
}

RunResult run_sweep(const SweepSpec& spec, const RunOptions& opt)
{
    if (spec.out_path.empty())
        throw validation_error("sweep needs an output path");
    const auto grid = build_grid(spec);
    const std::size_t n = grid.size();
    const std::string part = partial_path(spec.out_path), man = manifest_path(spec.out_path);
    auto say = [&](const std::string& s) {
        if (opt.log)
            *opt.log << s << '\n';
    };

    Manifest mf;
    mf.spec_hash = hex64(spec.hash());
    mf.grid_size = n;
    mf.bitmap.assign(n, '0');
    mf.flags.assign(n, "");
    std::vector<std::string> lines;
    std::size_t start = 0;

    if (opt.resume && fs::exists(man)) {
        Manifest old = Manifest::load(man);
        if (old.spec_hash != mf.spec_hash || old.grid_size != n)
            throw std::runtime_error("manifest " + man + " belongs to a different spec; remove it or drop --resume");
        if (old.complete && fs::exists(spec.out_path)) {
            RunResult done;
            done.grid_size = n;
            done.lines = spec.format == Format::csv ? read_lines(spec.out_path) : lines_from_grid_json(spec.out_path);
            if (spec.format == Format::csv && !done.lines.empty())
                done.lines.erase(done.lines.begin());
            done.unconverged = count_unconverged(old.flags);
            say("already complete: " + spec.out_path);
            return done;
        }
        const auto first_gap = old.bitmap.find('0');
        start = first_gap == std::string::npos ? n : first_gap;
        if (old.bitmap.find('1', start) != std::string::npos)
            throw std::runtime_error("manifest bitmap is not a prefix; cannot resume");
        if (fs::exists(part)) {
            auto have = read_lines(part);
            if (have.empty() || have.front() != csv_header())
                throw std::runtime_error("partial file " + part + " has an unexpected header");
            have.erase(have.begin());
            start = std::min(start, have.size());
            lines.assign(have.begin(), have.begin() + std::ptrdiff_t(start));
        } else {
            start = 0;
        }
        mf.wall_time_s = old.wall_time_s;
        for (std::size_t i = 0; i < start; ++i) {
            mf.bitmap[i] = '1';
            mf.flags[i] = old.flags[i];
        }
        say("resuming at point " + std::to_string(start) + " of " + std::to_string(n));
    }

    // rewrite the partial file so it holds exactly the kept rows
    {
        std::string text = csv_header() + "\n";
        for (const auto& l : lines)
            text += l + "\n";
        write_file_atomic(part, text);
    }
    write_file_atomic(man, mf.dump(spec));

    std::ofstream out(part, std::ios::binary | std::ios::app);
    if (!out)
        throw std::runtime_error("cannot append to " + part);

    const auto t0 = std::chrono::steady_clock::now();
    const double wall_before = mf.wall_time_s;

    std::mutex mu;
    std::condition_variable cv;
    std::vector<std::optional<Row>> slots(n);
    std::vector<std::string> failures(n);
    std::atomic<std::size_t> next{start};
    std::atomic<bool> stop{false};
    unsigned active = 0;

    // M sums shared along the Omega axis
    std::mutex cache_mu;
    std::map<std::pair<double, double>, std::shared_future<cavity::RawNonlocalSum>> cache;
    auto raw_for = [&](const GridPoint& p) {
        const auto key = std::make_pair(p.rho0_sigma, p.sigma_R);
        std::promise<cavity::RawNonlocalSum> prom;
        std::shared_future<cavity::RawNonlocalSum> fut;
        bool owner = false;
        {
            std::lock_guard lk(cache_mu);
            auto it = cache.find(key);
            if (it == cache.end()) {
                fut = prom.get_future().share();
                cache.emplace(key, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                prom.set_value(cavity::m_ab_raw(detector_at(p, spec.lambda), cavity_at(p), spec.cut));
            } catch (...) {
                prom.set_exception(std::current_exception());
            }
        }
        return fut.get();
    };

    auto interrupted = [&] { return stop.load() || (opt.interrupt && opt.interrupt->load()); };

    auto worker = [&] {
        for (;;) {
            if (interrupted())
                break;
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                break;
            std::optional<Row> row;
            std::string err;
            try {
                const auto raw = raw_for(grid[i]);
                row = evaluate_point(grid[i], spec.lambda, spec.cut, &raw);
            } catch (const std::exception& e) {
                err = e.what();
            }
            std::lock_guard lk(mu);
            if (row)
                slots[i] = std::move(row);
            else
                failures[i] = err.empty() ? "unknown failure" : err;
            cv.notify_all();
        }
        std::lock_guard lk(mu);
        --active;
        cv.notify_all();
    };

    const unsigned nthreads = std::max(1u, opt.threads);
    std::vector<std::thread> pool;
    active = nthreads;
    for (unsigned t = 0; t < nthreads; ++t)
        pool.emplace_back(worker);

    RunResult res;
    res.grid_size = n;
    std::string failure;
    std::size_t w = start;
    auto last_save = std::chrono::steady_clock::now();
    while (w < n) {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return slots[w].has_value() || !failures[w].empty() || active == 0; });
        if (!failures[w].empty()) {
            failure = failures[w];
            stop = true;
            break;
        }
        if (!slots[w])
            break;  // workers stopped before this point
        Row row = std::move(*slots[w]);
        slots[w].reset();
        lk.unlock();

        const std::string line = csv_row(row);
        out << line << '\n';
        out.flush();
        if (!out)
            throw std::runtime_error("write failed: " + part);
        lines.push_back(line);
        mf.bitmap[w] = '1';
        mf.flags[w] = row.converged_flags();
        ++w;
        ++res.computed;

        const auto now = std::chrono::steady_clock::now();
        if (now - last_save > std::chrono::seconds(2) || res.computed % 64 == 0) {
            mf.wall_time_s = wall_before + std::chrono::duration<double>(now - t0).count();
            write_file_atomic(man, mf.dump(spec));
            last_save = now;
        }
        if (opt.stop_after && res.computed >= opt.stop_after && w < n) {
            stop = true;
            break;
        }
        if (opt.interrupt && opt.interrupt->load())
            stop = true;
    }
    stop = true;
    for (auto& t : pool)
        t.join();
    out.close();

    mf.wall_time_s = wall_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.unconverged = count_unconverged(mf.flags);
    if (!failure.empty()) {
        write_file_atomic(man, mf.dump(spec));
        throw std::runtime_error("grid point " + std::to_string(w) + " failed: " + failure);
    }
    if (w < n) {
        write_file_atomic(man, mf.dump(spec));
        res.status = RunStatus::interrupted;
        say("stopped after " + std::to_string(w) + " of " + std::to_string(n) + " points; rerun with --resume");
        return res;
    }

    if (spec.format == Format::csv) {
        fs::rename(part, spec.out_path);
    } else {
        write_file_atomic(spec.out_path, grid_json(spec, lines));
        fs::remove(part);
    }
    mf.complete = true;
    write_file_atomic(man, mf.dump(spec));
    res.lines = std::move(lines);
    return res;
}

// ---- density ----

double negativity_margin(const ParsedRow& r)
{
    if (r.flags != "1111")
        return nan;
    try {
        return -measures::pt_eigenvalues(r.corrs).ep_minus;
    } catch (const measures::invalid_state&) {
        return nan;
    }
}

DensityProducts density_products(const SweepSpec& spec, const std::vector<std::string>& lines)
{
    if (spec.sigma_R.values.size() != 1)
        throw validation_error("density: sigma_R must be a single value");
    const auto& xs = spec.rho0_sigma.values;
    const auto& ys = spec.omega_sigma.values;
    if (xs.size() < 2 || ys.size() < 2)
        throw validation_error("density: omega_sigma and rho0_sigma need at least two values each");
    if (lines.size() != xs.size() * ys.size())
        throw validation_error("density: grid must be a full rectangle (rho0_sigma * sigma_R < 1 everywhere)");
    DensityProducts d;
    std::vector<double> margin(lines.size());
    for (std::size_t k = 0; k < lines.size(); ++k) {
        margin[k] = negativity_margin(parse_csv_row(lines[k]));
        if (std::isnan(margin[k]))
            ++d.unconverged_cells;
    }
    d.contour = contour::marching_squares(xs, ys, margin, spec.rho0_sigma.spacing == Spacing::log,
                                          spec.omega_sigma.spacing == Spacing::log);
    if (spec.outputs.freespace_boundary) {
        const bool increasing_x = std::is_sorted(xs.begin(), xs.end()) && xs.front() > 0.0;
        const bool increasing_y = std::is_sorted(ys.begin(), ys.end());
        if (increasing_x && increasing_y)
            d.free_boundary = freespace::free_negativity_boundary(ys, xs, spec.lambda);
    }
    return d;
}

void write_contour_csv(std::ostream& out, const std::vector<contour::Segment>& segs)
{
    out << "rho0_sigma_a,omega_sigma_a,rho0_sigma_b,omega_sigma_b\n";
    for (const auto& s : segs)
        out << fmt17(s.a.x) << ',' << fmt17(s.a.y) << ',' << fmt17(s.b.x) << ',' << fmt17(s.b.y) << '\n';
}

// ---- 1D crossing ----

Crossing negativity_crossing(double omega_sigma, double sigma_R, double lambda, const std::vector<double>& rho0_grid,
                             double tol, const cavity::ModeCutoffs& cut)
{
    if (rho0_grid.size() < 2 || !std::is_sorted(rho0_grid.begin(), rho0_grid.end()))
        throw validation_error("negativity_crossing: need an increasing grid of >= 2 points");
    if (!(tol > 0.0))
        throw validation_error("negativity_crossing: tol must be > 0");
    auto margin = [&](double rs) {
        const Row r = evaluate_point({omega_sigma, rs, sigma_R}, lambda, cut);
        if (!r.corrs.all_converged())
            throw std::runtime_error("negativity_crossing: series not converged at rho0_sigma = " + fmt17(rs));
        return -measures::pt_eigenvalues(r.corrs).ep_minus;
    };
    Crossing c;
    double prev = margin(rho0_grid[0]);
    for (std::size_t i = 1; i < rho0_grid.size(); ++i) {
        const double cur = margin(rho0_grid[i]);
        if (prev > 0.0 && cur <= 0.0) {
            double lo = rho0_grid[i - 1], hi = rho0_grid[i];
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                (margin(mid) > 0.0 ? lo : hi) = mid;
            }
            c.found = true;
            c.lo = lo;
            c.hi = hi;
            c.rho0_sigma = 0.5 * (lo + hi);
            return c;
        }
        prev = cur;
    }
    return c;
}

}  // namespace cavcorr::sweep
