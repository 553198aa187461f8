#pragma once

// Case files, operating points and the experiment drivers behind the CLI:
// the lambda(s) sweep, the (s, rho) small-signal grid and the CCT table.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridpass/passivity.hpp"
#include "gridpass/powerflow.hpp"
#include "gridpass/sim.hpp"
#include "gridpass/system.hpp"

namespace gridpass {

// --- case file --------------------------------------------------------------

struct CaseBus {
    int id = 0;
    BusRole role;
    DeviceSpec device;
    // Optional fixed gains (K_I/K_E for an SG, D1/D2 for a droop). Used by
    // verify, smallsignal and simulate; sweeps always re-synthesize.
    std::optional<double> angle_gain;
    std::optional<double> voltage_gain;
};

struct CaseLine {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
};

struct Range {
    double min = 0.0;
    double max = 1.0;
    int steps = 2;

    /// Evenly spaced points, both ends included; steps == 1 gives {min}.
    [[nodiscard]] std::vector<double> values() const;
};

struct SimulationSettings {
    StepSettings steps{1e-4, 100};
    ConvergenceSpec convergence;
    double fault_shunt_b = -1000.0;
    double t_fault_on = 0.1;
    double cct_lower = 1e-3;
    double cct_upper = 0.5;
    double cct_tol = 1e-3;
    // Synthesis margin for the CCT table. With margin 0 the configuration at
    // sigma = -lambda is only marginally stable and no fault ever recovers.
    double cct_margin = 0.1;
};

struct SweepSettings {
    Range s{0.5, 2.5, 21};
    Range rho{-1.0, 1.0, 41};
    double margin = 0.0;
};

struct CaseFile {
    std::string name;
    std::vector<CaseBus> buses;
    std::vector<CaseLine> lines;
    PowerFlowOptions solver;
    SimulationSettings simulation;
    SweepSettings sweep;
};

/// Strict JSON: unknown keys are rejected. Throws ParseError (with line and
/// column) for malformed text and SchemaError naming the offending key.
CaseFile parse_case(std::string_view text);
CaseFile load_case(const std::filesystem::path& path);

/// Position of the bus with case id `id`; ConfigError when absent.
std::size_t bus_index(const CaseFile& c, int id);
std::vector<std::string> bus_labels(const CaseFile& c);

/// Lossless unless `lossy`, in which case the file's r values are kept.
NetworkModel case_network(const CaseFile& c, bool lossy);
std::vector<BusRole> case_roles(const CaseFile& c);

// --- operating points ---------------------------------------------------------

/// On lossy networks lambda is taken from the susceptance part only.
inline EnergyMode energy_mode(bool lossy) { return lossy ? EnergyMode::susceptance_only : EnergyMode::strict; }

struct OperatingPoint {
    double s = 1.0;
    bool lossy = false;
    NetworkModel net;
    Equilibrium equilibrium;
    int iterations = 0;
    PassivityReport passivity;

    [[nodiscard]] BusOperatingPoint bus(std::size_t i) const;
};

/// Power flow at load scale s plus the network passivity index. Starts from
/// `start` when given, else from the flat profile, falling back to
/// continuation in s from 0.5 if the flat start fails.
OperatingPoint solve_operating_point(const CaseFile& c, double s, bool lossy,
                                     const std::optional<VoltagePhasorVector>& start = std::nullopt);

/// One device per bus at index sigma[i]. With `use_case_gains`, buses that
/// carry explicit gains keep them instead of being synthesized.
std::vector<DeviceModel> case_devices(const CaseFile& c, const OperatingPoint& op, std::span<const double> sigma,
                                      GainMargins margin = {}, bool use_case_gains = false);

SystemModel case_system(const CaseFile& c, const OperatingPoint& op, std::span<const double> sigma,
                        GainMargins margin = {}, bool use_case_gains = false);

// --- experiments ----------------------------------------------------------------

enum class Execution { serial, parallel };

/// Worker-pool bound: PASSIVITY_GRID_THREADS when set to a positive integer,
/// otherwise the OpenMP default.
int worker_count();

struct LambdaRow {
    double s = 0.0;
    std::optional<double> lambda;  // empty when the power flow failed
    std::string note;
};

/// Continuation over s: each solve starts from the previous equilibrium.
std::vector<LambdaRow> sweep_lambda(const CaseFile& c, const Range& s, bool lossy);

struct SweepConfig {
    Range s;
    Range rho;
    bool lossy = false;
    double margin = 0.0;
    /// Buses (case ids) pinned at sigma = -lambda + value instead of the swept rho.
    std::map<int, double> fixed_rho;

    static SweepConfig from_case(const CaseFile& c, bool lossy);
};

struct GridCell {
    double s = 0.0;
    double sigma = 0.0;
    double rho = 0.0;
    double neg_lambda = 0.0;
    double max_real_part = 0.0;
    std::optional<Verdict> verdict;  // empty when the cell could not be evaluated
    std::string note;

    /// green / red / marginal, or "failed".
    [[nodiscard]] std::string verdict_label() const;
};

/// Evaluates one cell against a solved operating point; errors are recorded
/// in the cell, never thrown.
GridCell evaluate_grid_cell(const CaseFile& c, const OperatingPoint& op, double rho, const SweepConfig& cfg);

/// Row-major over (s, rho). Operating points are solved serially by
/// continuation; the cells are independent and run on the worker pool.
/// Output order does not depend on the execution mode.
std::vector<GridCell> sweep_stability_grid(const CaseFile& c, const SweepConfig& cfg,
                                           Execution exec = Execution::parallel);

struct CctConfig {
    std::vector<double> offsets{0.0, 1.0, 2.0};
    std::vector<int> fault_buses;  // case ids; empty means every bus
    bool lossy = false;
    double s = 1.0;
};

struct CctCell {
    int fault_bus = 0;
    double sigma_offset = 0.0;
    double sigma = 0.0;
    BracketResult result;
    std::string note;

    /// Seconds; +inf when no clearing time up to the bracket limit failed,
    /// NaN when the cell has no CCT for any other reason.
    [[nodiscard]] double cct_seconds() const;
};

/// Bus-major over (fault bus, offset). ConfigError for unknown fault buses.
std::vector<CctCell> cct_table(const CaseFile& c, const CctConfig& cfg, Execution exec = Execution::parallel);

// --- output ------------------------------------------------------------------------

void write_lambda_csv(std::ostream& out, const std::vector<LambdaRow>& rows);
void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);
void write_cct_csv(std::ostream& out, const std::vector<CctCell>& cells);

/// gnuplot script drawing whichever of the named CSVs are given (empty = skip).
void write_plot_script(std::ostream& out, const std::string& lambda_csv, const std::string& grid_csv);

}  // namespace gridpass
