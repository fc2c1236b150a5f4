// cavcorr: command-line front end for the cavity correlation library.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cavcorr/cavity_response.hpp"
#include "cavcorr/format.hpp"
#include "cavcorr/freespace.hpp"
#include "cavcorr/series.hpp"
#include "cavcorr/specfun.hpp"
#include "cavcorr/sweep.hpp"

namespace {

using namespace cavcorr;

constexpr int exit_ok = 0;
constexpr int exit_compute = 1;
constexpr int exit_validation = 2;

std::atomic<bool> g_interrupt{false};

extern "C" void on_sigint(int)
{
    g_interrupt = true;
}

struct Shared {
    std::vector<std::string> omega_sigma{"1"};
    std::vector<std::string> rho0_sigma{"1"};
    std::vector<std::string> sigma_r{"0.1"};
    std::vector<std::string> outputs{"x_terms", "negativity", "mutual_info", "discord"};
    double lambda = 0.1;
    double tol = 1e-3;
    double tol_x = 1e-12;
    std::size_t nmax_x = 2000;
    std::size_t nmax_m = 200000;
    int mmax = 1000;
    std::string format = "csv";
    std::string out;
    bool resume = false;
    bool allow_unconverged = false;
    unsigned threads = 1;
    std::size_t stop_after = 0;
};

sweep::SweepSpec make_spec(const Shared& s)
{
    sweep::SweepSpec spec;
    spec.omega_sigma = sweep::parse_axis(s.omega_sigma);
    spec.rho0_sigma = sweep::parse_axis(s.rho0_sigma);
    spec.sigma_R = sweep::parse_axis(s.sigma_r);
    spec.lambda = s.lambda;
    spec.cut.tol = s.tol;
    spec.cut.tol_x = s.tol_x;
    spec.cut.n_max_x = s.nmax_x;
    spec.cut.n_max_m = s.nmax_m;
    spec.cut.m_max = s.mmax;
    spec.outputs = sweep::parse_outputs(s.outputs);
    spec.format = sweep::parse_format(s.format);
    spec.out_path = s.out;
    spec.validate();
    return spec;
}

sweep::GridPoint single_point(const sweep::SweepSpec& spec)
{
    if (spec.omega_sigma.values.size() != 1 || spec.rho0_sigma.values.size() != 1 ||
        spec.sigma_R.values.size() != 1)
        throw sweep::validation_error("this command takes a single value per axis");
    sweep::GridPoint p{spec.omega_sigma.values[0], spec.rho0_sigma.values[0], spec.sigma_R.values[0]};
    if (!(p.rho0_sigma * p.sigma_R < 1.0))
        throw sweep::validation_error("rho0_sigma * sigma_R must be < 1 (detector B inside the cavity)");
    return p;
}

void emit(const std::string& text, const std::string& path)
{
    std::cout << text;
    if (!path.empty()) {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + path);
        out << text;
    }
}

int cmd_point(const Shared& s, bool format_given)
{
    auto spec = make_spec(s);
    const auto p = single_point(spec);
    const auto row = sweep::evaluate_point(p, spec.lambda, spec.cut);
    const bool as_json = !format_given || spec.format == sweep::Format::json;
    if (as_json)
        emit(sweep::point_json(row, spec.cut), s.out);
    else
        emit(sweep::csv_header() + "\n" + sweep::csv_row(row) + "\n", s.out);
    if (row.corrs.perturbative_warning())
        std::cerr << "warning: X_AA + X_BB > 0.1, outside the perturbative regime\n";
    if (!row.corrs.all_converged()) {
        std::cerr << "not converged (flags " << row.converged_flags() << ")\n";
        return s.allow_unconverged ? exit_ok : exit_compute;
    }
    if (!row.measures_valid) {
        std::cerr << "measures rejected: " << row.error << '\n';
        return exit_compute;
    }
    return exit_ok;
}

int finish_run(const sweep::RunResult& r)
{
    if (r.unconverged)
        std::cerr << r.unconverged << " of " << r.grid_size << " points not converged (NaN measures, flagged)\n";
    if (r.status == sweep::RunStatus::interrupted)
        return exit_compute;
    return exit_ok;
}

void write_free_boundary(const std::string& path, const std::vector<freespace::BoundaryPoint>& pts)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    freespace::write_boundary_csv(out, pts);
}

int cmd_sweep(const Shared& s)
{
    auto spec = make_spec(s);
    sweep::RunOptions opt{s.threads, s.resume, s.stop_after, &g_interrupt, &std::cerr};
    const auto r = sweep::run_sweep(spec, opt);
    if (r.status == sweep::RunStatus::complete && spec.outputs.freespace_boundary) {
        const auto pts =
            freespace::free_negativity_boundary(spec.omega_sigma.values, spec.rho0_sigma.values, spec.lambda);
        write_free_boundary(spec.out_path + ".freespace.csv", pts);
    }
    return finish_run(r);
}

int cmd_density(const Shared& s)
{
    auto spec = make_spec(s);
    spec.outputs.freespace_boundary = true;
    if (spec.sigma_R.values.size() != 1)
        throw sweep::validation_error("density: give a single --sigma-r");
    if (spec.omega_sigma.values.size() < 2 || spec.rho0_sigma.values.size() < 2)
        throw sweep::validation_error("density: --omega-sigma and --rho0-sigma need two or more values");
    const double sr = spec.sigma_R.values[0];
    for (double rs : spec.rho0_sigma.values)
        if (!(rs * sr < 1.0))
            throw sweep::validation_error("density: every rho0_sigma must satisfy rho0_sigma * sigma_R < 1");
    sweep::RunOptions opt{s.threads, s.resume, s.stop_after, &g_interrupt, &std::cerr};
    const auto r = sweep::run_sweep(spec, opt);
    if (r.status != sweep::RunStatus::complete)
        return finish_run(r);

    const auto d = sweep::density_products(spec, r.lines);
    {
        std::ofstream out(spec.out_path + ".contour.csv", std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write contour file");
        sweep::write_contour_csv(out, d.contour);
    }
    write_free_boundary(spec.out_path + ".freespace.csv", d.free_boundary);
    const std::string flag = d.contour.empty() ? "empty" : "ok";
    nlohmann::json summary = {{"grid", spec.out_path},
                              {"contour", spec.out_path + ".contour.csv"},
                              {"contour_segments", d.contour.size()},
                              {"contour_flag", flag},
                              {"unconverged_cells", d.unconverged_cells},
                              {"freespace_boundary", spec.out_path + ".freespace.csv"}};
    {
        std::ofstream out(spec.out_path + ".density.json", std::ios::binary);
        out << summary.dump(1) << '\n';
    }
    std::cout << "contour: " << flag << " (" << d.contour.size() << " segments)\n";
    return finish_run(r);
}

int cmd_converge(const Shared& s, const std::string& which, std::size_t n_points, const std::string& spacing,
                 std::size_t n_terms)
{
    auto spec = make_spec(s);
    const auto p = single_point(spec);
    if (n_points < 2)
        throw sweep::validation_error("converge: --n-points must be >= 2");
    const auto sp = spacing == "log" ? series::Spacing::log : series::Spacing::linear;
    if (spacing != "log" && spacing != "lin")
        throw sweep::validation_error("converge: --spacing must be lin or log");
    const auto det = sweep::detector_at(p, spec.lambda);
    const auto cav = sweep::cavity_at(p);

    series::complex_term term;
    double unit = 0.0;
    std::size_t used = 0;
    bool converged = false;
    cplx estimate{};
    if (which == "m_ab") {
        const auto raw = cavity::m_ab_raw(det, cav, spec.cut);
        used = raw.diagnostics.terms_used;
        converged = raw.converged;
        term = cavity::m_ab_terms(det, cav);
        unit = cavity::m_ab_prefactor(det, cav);
        estimate = (raw.value * unit) * (spec.lambda * spec.lambda);
    } else if (which == "x_aa") {
        try {
            const auto r = cavity::x_aa(det, cav, spec.cut);
            used = r.diagnostics.terms_used;
            converged = true;
            estimate = r.value;
        } catch (const series::not_converged& e) {
            used = e.diagnostics.terms_used;
            estimate = e.diagnostics.estimate;
        }
        auto real = cavity::x_aa_terms(det, cav);
        term = [real](std::size_t n) { return cplx(real(n)); };
        unit = cavity::x_prefactor(det, cav);
    } else {
        throw sweep::validation_error("converge: --series must be m_ab or x_aa");
    }
    const std::size_t total = n_terms ? n_terms : std::max<std::size_t>(used, n_points);
    auto trace = series::partial_sum_trace(term, total, n_points, sp);
    series::scale_diagnostics(trace, unit);
    series::scale_diagnostics(trace, spec.lambda * spec.lambda);

    std::ostringstream csv;
    series::write_diagnostics_csv(csv, trace);
    emit(csv.str(), s.out);
    nlohmann::json summary = {{"series", which},
                              {"omega_sigma", p.omega_sigma},
                              {"rho0_sigma", p.rho0_sigma},
                              {"sigma_R", p.sigma_R},
                              {"lambda", spec.lambda},
                              {"tol", which == "m_ab" ? spec.cut.tol : spec.cut.tol_x},
                              {"terms_used", used},
                              {"converged", converged},
                              {"estimate", {estimate.real(), estimate.imag()}},
                              {"trace_terms", total}};
    std::cerr << summary.dump() << '\n';
    if (!s.out.empty()) {
        std::ofstream out(s.out + ".summary.json", std::ios::binary);
        out << summary.dump(1) << '\n';
    }
    return converged || s.allow_unconverged ? exit_ok : exit_compute;
}

int cmd_modes(const Shared& s, int m_max, int n_max)
{
    if (m_max < 0 || n_max < 1)
        throw sweep::validation_error("modes: need --m-max >= 0 and --n-max >= 1");
    if (s.out.empty())
        throw sweep::validation_error("modes: --out is required");
    auto& table = specfun::shared_zero_table();
    std::string why;
    if (!table.verify(m_max, n_max, &why))
        throw std::runtime_error("zero table failed verification: " + why);
    table.save(s.out, m_max, n_max);
    specfun::BesselZeroTable reloaded;
    reloaded.load(s.out);
    if (!reloaded.verify(m_max, n_max, &why))
        throw std::runtime_error("reloaded table failed verification: " + why);
    std::cout << "wrote " << (m_max + 1) * n_max << " zeros to " << s.out << "; interlacing and reload verified\n";
    return exit_ok;
}

int cmd_freespace_boundary(const Shared& s)
{
    const auto om = sweep::parse_axis(s.omega_sigma);
    const auto d = sweep::parse_axis(s.rho0_sigma);
    if (!(s.lambda > 0.0))
        throw sweep::validation_error("lambda must be > 0");
    const auto pts = freespace::free_negativity_boundary(om.values, d.values, s.lambda);
    std::ostringstream csv;
    freespace::write_boundary_csv(csv, pts);
    emit(csv.str(), s.out);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Correlations harvested by two detectors in a cylindrical Dirichlet cavity"};
    app.fallthrough();
    app.set_config("--config", "", "key=value file; command-line flags override it");
    app.require_subcommand(1);

    Shared s;
    app.add_option("--omega-sigma", s.omega_sigma, "Omega*sigma: value, list a,b,c, or lo:hi:count[:lin|log]")
        ->delimiter(',');
    app.add_option("--rho0-sigma", s.rho0_sigma, "rho0/sigma (separation d/sigma for freespace-boundary)")
        ->delimiter(',');
    app.add_option("--sigma-r", s.sigma_r, "sigma/R")->delimiter(',');
    app.add_option("--lambda", s.lambda, "coupling");
    app.add_option("--tol", s.tol, "relative tolerance of the oscillatory M series");
    app.add_option("--tol-x", s.tol_x, "relative tolerance of the X series");
    app.add_option("--nmax-x", s.nmax_x, "term cap of the X series");
    app.add_option("--nmax-m", s.nmax_m, "term cap of the M series");
    app.add_option("--mmax", s.mmax, "azimuthal cap of the X_BB sum");
    auto* fmt = app.add_option("--format", s.format, "csv or json");
    app.add_option("--out", s.out, "output path");
    app.add_flag("--resume", s.resume, "continue an interrupted sweep from its manifest");
    app.add_flag("--allow-unconverged", s.allow_unconverged, "exit 0 even if a series did not converge");
    app.add_option("--threads", s.threads, "worker threads for grid commands");
    app.add_option("--outputs", s.outputs, "x_terms,negativity,mutual_info,discord,freespace_boundary")
        ->delimiter(',');
    app.add_option("--stop-after", s.stop_after)->group("");

    auto* point = app.add_subcommand("point", "evaluate one parameter point");
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a 1D or 2D grid");
    auto* density = app.add_subcommand("density", "2D grid plus zero-negativity contour and free-space overlay");
    auto* converge = app.add_subcommand("converge", "partial-sum trace of a mode series");
    std::string which = "m_ab", spacing = "log";
    std::size_t n_points = 200, n_terms = 0;
    converge->add_option("--series", which, "m_ab or x_aa");
    converge->add_option("--n-points", n_points, "sampled rows");
    converge->add_option("--spacing", spacing, "lin or log sampling");
    converge->add_option("--n-terms", n_terms, "terms to trace (default: terms the stopping rule used)");
    auto* modes = app.add_subcommand("modes", "export and re-verify a Bessel zero table");
    int m_max = 10, n_max = 100;
    modes->add_option("--m-max", m_max, "highest order");
    modes->add_option("--n-max", n_max, "zeros per order");
    auto* fsb = app.add_subcommand("freespace-boundary", "free-space zero-negativity curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    std::signal(SIGINT, on_sigint);
    try {
        if (*point)
            return cmd_point(s, fmt->count() > 0);
        if (*sweep_cmd)
            return cmd_sweep(s);
        if (*density)
            return cmd_density(s);
        if (*converge)
            return cmd_converge(s, which, n_points, spacing, n_terms);
        if (*modes)
            return cmd_modes(s, m_max, n_max);
        if (*fsb)
            return cmd_freespace_boundary(s);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_compute;
    }
    return exit_validation;
}
