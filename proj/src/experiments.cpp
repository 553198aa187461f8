#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>

#include <omp.h>

#include "gridpass/csv.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/harness.hpp"

namespace gridpass {

BusOperatingPoint OperatingPoint::bus(std::size_t i) const {
    return {equilibrium.y_star.theta[i], equilibrium.y_star.V[i], equilibrium.u_star.P[i], equilibrium.u_star.Q[i]};
}

OperatingPoint solve_operating_point(const CaseFile& c, double s, bool lossy,
                                     const std::optional<VoltagePhasorVector>& start) {
    if (!(s > 0.0)) throw ConfigError("load scale must be positive");
    OperatingPoint op;
    op.s = s;
    op.lossy = lossy;
    op.net = case_network(c, lossy);
    const std::vector<BusRole> base = case_roles(c);
    PowerFlowSolution pf;
    try {
        pf = solve_power_flow(op.net, scale_load(base, s), c.solver, start);
    } catch (const NumericalError&) {
        if (start || s <= 0.5) throw;
        // Continuation from a light load in steps of 0.1.
        std::optional<VoltagePhasorVector> warm;
        for (double t = 0.5; t < s; t += 0.1) warm = solve_power_flow(op.net, scale_load(base, t), c.solver, warm).equilibrium.y_star;
        pf = solve_power_flow(op.net, scale_load(base, s), c.solver, warm);
    }
    op.equilibrium = std::move(pf.equilibrium);
    op.iterations = pf.iterations;
    op.passivity = network_lambda(op.net, op.equilibrium.y_star, energy_mode(lossy));
    return op;
}

std::vector<DeviceModel> case_devices(const CaseFile& c, const OperatingPoint& op, std::span<const double> sigma,
                                      GainMargins margin, bool use_case_gains) {
    if (sigma.size() != c.buses.size()) throw ConfigError("need one sigma per bus");
    std::vector<DeviceModel> devices;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const CaseBus& b = c.buses[i];
        if (use_case_gains && b.angle_gain) {
            DeviceModel d = device_with_gains(b.device, op.bus(i), *b.angle_gain, *b.voltage_gain);
            d.sigma_target = sigma[i];
            devices.push_back(std::move(d));
        } else {
            devices.push_back(synthesize_from_sigma(b.device, sigma[i], op.bus(i), margin));
        }
    }
    return devices;
}

SystemModel case_system(const CaseFile& c, const OperatingPoint& op, std::span<const double> sigma, GainMargins margin,
                        bool use_case_gains) {
    return assemble(op.net, case_devices(c, op, sigma, margin, use_case_gains), op.equilibrium, bus_labels(c));
}

int worker_count() {
    if (const char* env = std::getenv("PASSIVITY_GRID_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<int>(std::min<long>(n, 1024));
    }
    return omp_get_max_threads();
}

namespace {

// Runs body(k) for k in [0, count); each body writes only its own slot.
template <class Body>
void for_each_cell(std::size_t count, Execution exec, Body&& body) {
    const auto n = static_cast<long>(count);
    if (exec == Execution::serial) {
        for (long k = 0; k < n; ++k) body(static_cast<std::size_t>(k));
        return;
    }
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count())
    for (long k = 0; k < n; ++k) body(static_cast<std::size_t>(k));
}

}  // namespace

std::vector<LambdaRow> sweep_lambda(const CaseFile& c, const Range& s, bool lossy) {
    std::vector<LambdaRow> rows;
    std::optional<VoltagePhasorVector> warm;
    for (double v : s.values()) {
        LambdaRow row{v, std::nullopt, ""};
        try {
            OperatingPoint op = solve_operating_point(c, v, lossy, warm);
            warm = op.equilibrium.y_star;
            row.lambda = op.passivity.lambda;
        } catch (const NumericalError& e) {
            row.note = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

SweepConfig SweepConfig::from_case(const CaseFile& c, bool lossy) {
    SweepConfig cfg;
    cfg.s = c.sweep.s;
    cfg.rho = c.sweep.rho;
    cfg.lossy = lossy;
    cfg.margin = c.sweep.margin;
    return cfg;
}

std::string GridCell::verdict_label() const { return verdict ? to_string(*verdict) : "failed"; }

GridCell evaluate_grid_cell(const CaseFile& c, const OperatingPoint& op, double rho, const SweepConfig& cfg) {
    GridCell cell;
    cell.s = op.s;
    cell.rho = rho;
    cell.neg_lambda = -op.passivity.lambda;
    cell.sigma = cell.neg_lambda + rho;
    cell.max_real_part = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sigma(c.buses.size(), cell.sigma);
    for (const auto& [id, fixed] : cfg.fixed_rho) sigma[bus_index(c, id)] = cell.neg_lambda + fixed;
    try {
        const SystemModel sys = case_system(c, op, sigma, GainMargins::uniform(cfg.margin));
        const StabilityVerdict v = small_signal(sys);
        cell.max_real_part = v.max_real_part;
        cell.verdict = v.verdict;
    } catch (const SynthesisError& e) {
        cell.note = std::string("synthesis: ") + e.what();
    } catch (const NumericalError& e) {
        cell.note = std::string("numerical: ") + e.what();
    }
    return cell;
}

std::vector<GridCell> sweep_stability_grid(const CaseFile& c, const SweepConfig& cfg, Execution exec) {
    for (const auto& [id, rho] : cfg.fixed_rho) (void)bus_index(c, id);
    const std::vector<double> s_values = cfg.s.values();
    const std::vector<double> rho_values = cfg.rho.values();

    std::vector<std::optional<OperatingPoint>> points;
    std::vector<std::string> failures;
    std::optional<VoltagePhasorVector> warm;
    for (double s : s_values) {
        try {
            points.emplace_back(solve_operating_point(c, s, cfg.lossy, warm));
            warm = points.back()->equilibrium.y_star;
            failures.emplace_back();
        } catch (const NumericalError& e) {
            points.emplace_back(std::nullopt);
            failures.emplace_back(std::string("power flow: ") + e.what());
        }
    }

    const std::size_t nr = rho_values.size();
    std::vector<GridCell> cells(s_values.size() * nr);
    for_each_cell(cells.size(), exec, [&](std::size_t k) {
        const std::size_t i = k / nr;
        const double rho = rho_values[k % nr];
        if (points[i]) {
            cells[k] = evaluate_grid_cell(c, *points[i], rho, cfg);
        } else {
            GridCell& cell = cells[k];
            cell.s = s_values[i];
            cell.rho = rho;
            cell.sigma = cell.neg_lambda = cell.max_real_part = std::numeric_limits<double>::quiet_NaN();
            cell.note = failures[i];
        }
    });
    return cells;
}

double CctCell::cct_seconds() const {
    if (result.threshold) return *result.threshold;
    if (result.no_failure && note.empty()) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
}

std::vector<CctCell> cct_table(const CaseFile& c, const CctConfig& cfg, Execution exec) {
    std::vector<int> buses = cfg.fault_buses;
    if (buses.empty())
        for (const auto& b : c.buses) buses.push_back(b.id);
    for (int id : buses) (void)bus_index(c, id);

    const OperatingPoint op = solve_operating_point(c, cfg.s, cfg.lossy);
    const SimulationSettings& sim = c.simulation;
    const std::size_t no = cfg.offsets.size();
    std::vector<CctCell> cells(buses.size() * no);
    for_each_cell(cells.size(), exec, [&](std::size_t k) {
        CctCell& cell = cells[k];
        cell.fault_bus = buses[k / no];
        cell.sigma_offset = cfg.offsets[k % no];
        cell.sigma = -op.passivity.lambda + cell.sigma_offset;
        try {
            const std::vector<double> sigma(c.buses.size(), cell.sigma);
            const SystemModel sys = case_system(c, op, sigma, GainMargins::uniform(sim.cct_margin));
            FaultScenario scenario;
            scenario.bus = bus_index(c, cell.fault_bus);
            scenario.fault_shunt_b = sim.fault_shunt_b;
            scenario.t_fault_on = sim.t_fault_on;
            cell.result = find_cct(sys, scenario, sim.convergence, sim.steps, sim.cct_lower, sim.cct_upper, sim.cct_tol);
            if (!cell.result.threshold && cell.result.probes <= 1) cell.note = cell.result.note;
        } catch (const Error& e) {
            cell.note = e.what();
        }
    });
    return cells;
}

void write_lambda_csv(std::ostream& out, const std::vector<LambdaRow>& rows) {
    out << "s,lambda\n";
    for (const auto& r : rows)
        out << format_number(r.s) << ',' << format_number(r.lambda.value_or(std::numeric_limits<double>::quiet_NaN()))
            << '\n';
}

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
    out << "s,sigma,rho,max_real_part,verdict,neg_lambda\n";
    for (const auto& c : cells)
        out << format_number(c.s) << ',' << format_number(c.sigma) << ',' << format_number(c.rho) << ','
            << format_number(c.max_real_part) << ',' << c.verdict_label() << ',' << format_number(c.neg_lambda) << '\n';
}

void write_cct_csv(std::ostream& out, const std::vector<CctCell>& cells) {
    out << "fault_bus,sigma_offset,sigma,cct_seconds\n";
    for (const auto& c : cells)
        out << c.fault_bus << ',' << format_number(c.sigma_offset) << ',' << format_number(c.sigma) << ','
            << format_number(c.cct_seconds()) << '\n';
}

void write_plot_script(std::ostream& out, const std::string& lambda_csv, const std::string& grid_csv) {
    out << "set datafile separator ','\n"
           "set key autotitle columnhead\n"
           "set terminal pngcairo size 900,600\n";
    if (!lambda_csv.empty()) {
        out << "set output 'lambda.png'\n"
               "set xlabel 's'\nset ylabel 'lambda'\n"
               "plot '" << lambda_csv << "' using 1:2 with linespoints title 'lambda(s)'\n";
    }
    if (!grid_csv.empty()) {
        const std::string stem = grid_csv.substr(0, grid_csv.rfind('.'));
        out << "set output '" << stem << ".png'\n"
               "set xlabel 's'\nset ylabel 'sigma'\n"
               "plot '" << grid_csv << "' using 1:(strcol(5) eq 'green' ? $2 : 1/0) with points pt 7 lc rgb 'forest-green' title 'stable', \\\n"
               "     '" << grid_csv << "' using 1:(strcol(5) eq 'red' ? $2 : 1/0) with points pt 7 lc rgb 'red' title 'unstable', \\\n"
               "     '" << grid_csv << "' using 1:(strcol(5) eq 'marginal' ? $2 : 1/0) with points pt 6 lc rgb 'orange' title 'marginal', \\\n"
               "     '" << grid_csv << "' using 1:(strcol(5) eq 'failed' ? $2 : 1/0) with points pt 2 lc rgb 'gray' title 'not synthesizable', \\\n"
               "     '" << grid_csv << "' using 1:6 with lines lw 2 lc rgb 'black' title '-lambda'\n";
    }
}

}  // namespace gridpass
