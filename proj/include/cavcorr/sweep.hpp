#ifndef CAVCORR_SWEEP_HPP
#define CAVCORR_SWEEP_HPP

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavcorr/cavity_response.hpp"
#include "cavcorr/contour.hpp"
#include "cavcorr/freespace.hpp"
#include "cavcorr/measures.hpp"

namespace cavcorr::sweep {

inline constexpr const char* tool_name = "cavcorr";
inline constexpr const char* tool_version = "1.0.0";

class validation_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Spacing { lin, log };

struct Axis {
    std::vector<double> values;
    Spacing spacing = Spacing::lin;
};

// count points from lo to hi inclusive; count == 1 gives {lo}.
std::vector<double> axis_values(double lo, double hi, std::size_t count, Spacing spacing);

// Tokens as delivered by the CLI: either one "lo:hi:count[:lin|log]" range
// or one or more plain numbers. Throws validation_error.
Axis parse_axis(const std::vector<std::string>& tokens);

enum class Format { csv, json };

Format parse_format(const std::string& s);

struct Outputs {
    bool x_terms = true;
    bool negativity = true;
    bool mutual_info = true;
    bool discord = true;
    bool freespace_boundary = false;
};

// Names: x_terms, negativity, mutual_info, discord, freespace_boundary.
Outputs parse_outputs(const std::vector<std::string>& names);

struct SweepSpec {
    Axis omega_sigma{{1.0}};
    Axis rho0_sigma{{1.0}};
    Axis sigma_R{{0.1}};
    double lambda = 0.1;
    cavity::ModeCutoffs cut;
    Outputs outputs;
    Format format = Format::csv;
    std::string out_path;

    void validate() const;
    // Everything that determines the output bytes; the manifest hash covers it.
    std::string canonical() const;
    std::uint64_t hash() const;
};

std::uint64_t fnv1a64(const std::string& s);

struct GridPoint {
    double omega_sigma = 1.0;
    double rho0_sigma = 1.0;
    double sigma_R = 0.1;
};

// sigma_R outermost, then omega_sigma, rho0_sigma innermost. Points with
// rho0_sigma * sigma_R >= 1 are dropped; an empty result is a validation_error.
std::vector<GridPoint> build_grid(const SweepSpec& spec);

// Units: sigma = 1, so Omega = omega_sigma, rho0 = rho0_sigma, R = 1/sigma_R.
cavity::DetectorParams detector_at(const GridPoint& p, double lambda);
cavity::CavityConfig cavity_at(const GridPoint& p);

struct Row {
    GridPoint point;
    double lambda = 0.1;
    CorrelationSet corrs;
    measures::CorrelationMeasures meas;
    // false when an entry did not converge or the state was rejected
    bool measures_valid = true;
    std::string error;

    // one character per entry (x_aa, x_bb, x_ab, m_ab): 1 converged, 0 not
    std::string converged_flags() const;
};

Row evaluate_point(const GridPoint& p, double lambda, const cavity::ModeCutoffs& cut,
                   const cavity::RawNonlocalSum* m_raw = nullptr);

// Fixed column order of the grid CSV.
const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string csv_row(const Row& r);

// Values of one data line, parsed back. Flags kept as text.
struct ParsedRow {
    GridPoint point;
    double lambda = 0.0;
    CorrelationSet corrs;
    double neg_exact = 0.0, neg_pert = 0.0, mutual_info = 0.0, classical_j = 0.0, discord = 0.0, s1 = 0.0, s2 = 0.0;
    std::string flags;
};

ParsedRow parse_csv_row(const std::string& line);

// Single-point JSON with provenance (parameters, cutoffs, flags, terms used).
std::string point_json(const Row& r, const cavity::ModeCutoffs& cut);

struct RunOptions {
    unsigned threads = 1;
    bool resume = false;
    // stop dispatch after this many rows were written in this run (0: never)
    std::size_t stop_after = 0;
    const std::atomic<bool>* interrupt = nullptr;
    std::ostream* log = nullptr;
};

enum class RunStatus { complete, interrupted };

struct RunResult {
    RunStatus status = RunStatus::complete;
    std::size_t grid_size = 0;
    std::size_t computed = 0;      // rows computed in this run
    std::size_t unconverged = 0;   // rows with a 0 flag, whole grid
    std::vector<std::string> lines; // all data lines in grid order (complete runs only)
};

std::string partial_path(const std::string& out_path);
std::string manifest_path(const std::string& out_path);

// Evaluates the grid on a worker pool and writes rows in grid order. Progress
// lives in <out>.partial and <out>.manifest.json; an interrupted run keeps both
// and a later run with resume = true continues where it stopped. Throws
// validation_error for a bad spec and std::runtime_error for I/O or manifest
// mismatch.
RunResult run_sweep(const SweepSpec& spec, const RunOptions& opt);

// ---- density products ----

// Signed exact-negativity margin -e'_- of a parsed row; NaN if not converged.
double negativity_margin(const ParsedRow& r);

struct DensityProducts {
    std::vector<contour::Segment> contour;
    std::vector<freespace::BoundaryPoint> free_boundary;
    std::size_t unconverged_cells = 0;
};

// Two-axis grid (rho0_sigma along x, omega_sigma along y) at one sigma_R.
// Rows must cover the full rectangle in grid order.
DensityProducts density_products(const SweepSpec& spec, const std::vector<std::string>& lines);

// Columns: rho0_sigma_a, omega_sigma_a, rho0_sigma_b, omega_sigma_b.
void write_contour_csv(std::ostream& out, const std::vector<contour::Segment>& segs);

// ---- 1D crossing ----

struct Crossing {
    bool found = false;
    double rho0_sigma = 0.0;
    double lo = 0.0, hi = 0.0;  // final bracket
};

// First sign change (positive to non-positive) of the exact negativity margin
// along rho0_grid, refined by bisection to bracket width <= tol.
Crossing negativity_crossing(double omega_sigma, double sigma_R, double lambda, const std::vector<double>& rho0_grid,
                             double tol, const cavity::ModeCutoffs& cut);

}  // namespace cavcorr::sweep

#endif
