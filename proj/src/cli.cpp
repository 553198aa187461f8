#include "gridpass/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "gridpass/csv.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/harness.hpp"

namespace gridpass {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string case_path;
    std::string out_dir;
    double s = 1.0;
    bool lossy = false;
    std::optional<double> sigma;
    std::optional<double> rho;
    std::optional<double> margin;
    int fault_bus = 0;
    double clear = 0.0;
    std::optional<double> horizon;
    std::optional<int> s_steps;
    std::optional<int> rho_steps;
    std::vector<std::string> fixed;
    std::vector<int> buses;
    std::vector<double> offsets{0.0, 1.0, 2.0};
    bool serial = false;
};

std::ofstream open_output(const Options& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    std::ofstream f(fs::path(o.out_dir) / name);
    if (!f) throw ConfigError("cannot write " + (fs::path(o.out_dir) / name).string());
    return f;
}

std::vector<double> uniform_sigma(const CaseFile& c, double sigma) { return std::vector<double>(c.buses.size(), sigma); }

void print_spectrum(std::ostream& out, const char* title, const Vector& values) {
    out << title << ':';
    for (double v : values) out << ' ' << format_number(v);
    out << '\n';
}

int cmd_powerflow(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    const OperatingPoint op = solve_operating_point(c, o.s, o.lossy);
    out << "power flow converged in " << op.iterations << " iterations (s = " << format_number(o.s) << ")\n";
    out << std::setw(6) << "bus" << std::setw(14) << "theta" << std::setw(14) << "V" << std::setw(14) << "P"
        << std::setw(14) << "Q" << '\n';
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const BusOperatingPoint b = op.bus(i);
        out << std::setw(6) << c.buses[i].id << std::fixed << std::setprecision(6) << std::setw(14) << b.theta
            << std::setw(14) << b.V << std::setw(14) << b.P << std::setw(14) << b.Q << '\n';
    }
    out.unsetf(std::ios::floatfield);
    if (!o.out_dir.empty()) {
        auto f = open_output(o, "powerflow.csv");
        f << "bus,theta,V,P,Q\n";
        for (std::size_t i = 0; i < c.buses.size(); ++i) {
            const BusOperatingPoint b = op.bus(i);
            f << c.buses[i].id << ',' << format_number(b.theta) << ',' << format_number(b.V) << ','
              << format_number(b.P) << ',' << format_number(b.Q) << '\n';
        }
    }
    return 0;
}

int cmd_lambda(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    const OperatingPoint op = solve_operating_point(c, o.s, o.lossy);
    out << "lambda = " << format_number(op.passivity.lambda) << "  (s = " << format_number(o.s)
        << (o.lossy ? ", lossy, susceptance part" : ", lossless") << ")\n";
    print_spectrum(out, "deflated spectrum", op.passivity.deflated_spectrum);
    print_spectrum(out, "hessian spectrum", op.passivity.hessian_spectrum);
    out << "structural kernel residual = " << format_number(op.passivity.structural_kernel_residual) << '\n';
    if (!o.out_dir.empty()) {
        auto f = open_output(o, "lambda_point.csv");
        write_lambda_csv(f, {{o.s, op.passivity.lambda, ""}});
    }
    return 0;
}

int cmd_verify(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    const OperatingPoint op = solve_operating_point(c, o.s, o.lossy);
    const double lambda = op.passivity.lambda;
    const double sigma = *o.sigma;
    const auto devices =
        case_devices(c, op, uniform_sigma(c, sigma), GainMargins::uniform(o.margin.value_or(c.sweep.margin)), true);
    constexpr double kRoundoff = 1e-12;  // synthesized gains sit on the bound up to rounding
    out << "lambda = " << format_number(lambda) << ", sigma = " << format_number(sigma)
        << ", sigma + lambda = " << format_number(sigma + lambda) << '\n';
    std::vector<int> failing;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        bool ok = sigma + lambda > 0.0;
        out << "bus " << c.buses[i].id << " (" << to_string(devices[i].kind()) << ")\n";
        for (const auto& m : proposition_margins(devices[i], sigma)) {
            out << "  " << m.name << " = " << format_number(m.value) << '\n';
            ok = ok && m.value >= -kRoundoff;
        }
        out << "  Condition C1 " << (ok ? "satisfied" : "violated") << '\n';
        if (!ok) failing.push_back(c.buses[i].id);
    }
    if (failing.empty()) {
        out << "Condition C1 satisfied at all buses\n";
    } else {
        out << "Condition C1 violated at bus";
        for (int id : failing) out << ' ' << id;
        out << '\n';
    }
    return 0;
}

int cmd_smallsignal(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    const OperatingPoint op = solve_operating_point(c, o.s, o.lossy);
    const double sigma = o.sigma ? *o.sigma : -op.passivity.lambda + o.rho.value_or(0.0);
    const SystemModel sys = case_system(c, op, uniform_sigma(c, sigma),
                                        GainMargins::uniform(o.margin.value_or(c.sweep.margin)), true);
    const StabilityVerdict v = small_signal(sys);
    out << "sigma = " << format_number(sigma) << ", -lambda = " << format_number(-op.passivity.lambda) << '\n';
    out << "eigenvalues:\n";
    for (const auto& e : v.eigenvalues) out << "  " << format_number(e.real()) << (e.imag() < 0 ? " - " : " + ")
                                            << format_number(std::abs(e.imag())) << "i\n";
    out << "structural zeros (integrator invariants): " << v.structural_zero_count << '\n';
    out << "max real part = " << format_number(v.max_real_part) << "  verdict: " << to_string(v.verdict) << '\n';
    if (!o.out_dir.empty()) {
        auto f = open_output(o, "eigenvalues.csv");
        f << "re,im\n";
        for (const auto& e : v.eigenvalues) f << format_number(e.real()) << ',' << format_number(e.imag()) << '\n';
    }
    return 0;
}

int cmd_sweep_lambda(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    Range r = c.sweep.s;
    if (o.s_steps) r.steps = *o.s_steps;
    const auto rows = sweep_lambda(c, r, o.lossy);
    if (o.out_dir.empty()) {
        write_lambda_csv(out, rows);
        return 0;
    }
    const std::string name = o.lossy ? "lambda_lossy.csv" : "lambda.csv";
    auto f = open_output(o, name);
    write_lambda_csv(f, rows);
    auto gp = open_output(o, "plot_lambda.gp");
    write_plot_script(gp, name, "");
    out << "wrote " << rows.size() << " rows to " << (fs::path(o.out_dir) / name).string() << '\n';
    return 0;
}

int cmd_sweep_grid(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    SweepConfig cfg = SweepConfig::from_case(c, o.lossy);
    if (o.s_steps) cfg.s.steps = *o.s_steps;
    if (o.rho_steps) cfg.rho.steps = *o.rho_steps;
    if (o.margin) cfg.margin = *o.margin;
    for (const auto& item : o.fixed) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--fix expects BUS=RHO, got " + item);
        try {
            cfg.fixed_rho[std::stoi(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
        } catch (const std::logic_error&) {
            throw ConfigError("--fix expects BUS=RHO, got " + item);
        }
    }
    const auto cells = sweep_stability_grid(c, cfg, o.serial ? Execution::serial : Execution::parallel);
    if (o.out_dir.empty()) {
        write_grid_csv(out, cells);
        return 0;
    }
    const std::string name = o.lossy ? "grid_lossy.csv" : "grid.csv";
    auto f = open_output(o, name);
    write_grid_csv(f, cells);
    auto gp = open_output(o, o.lossy ? "plot_grid_lossy.gp" : "plot_grid.gp");
    write_plot_script(gp, "", name);
    std::map<std::string, int> counts;
    for (const auto& cell : cells) ++counts[cell.verdict_label()];
    out << "wrote " << cells.size() << " cells to " << (fs::path(o.out_dir) / name).string() << ':';
    for (const auto& [label, n] : counts) out << ' ' << label << '=' << n;
    out << '\n';
    return 0;
}

int cmd_cct(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    CctConfig cfg;
    cfg.lossy = o.lossy;
    cfg.offsets = o.offsets;
    cfg.fault_buses = o.buses;
    const auto cells = cct_table(c, cfg, o.serial ? Execution::serial : Execution::parallel);
    if (!o.out_dir.empty()) {
        auto f = open_output(o, o.lossy ? "cct_lossy.csv" : "cct.csv");
        write_cct_csv(f, cells);
    }
    out << (o.lossy ? "lossy" : "lossless") << " critical clearing times (s)\n";
    for (const auto& cell : cells) {
        out << "  fault bus " << cell.fault_bus << ", sigma = -lambda + " << format_number(cell.sigma_offset) << ": ";
        const double t = cell.cct_seconds();
        if (std::isfinite(t))
            out << format_number(t);
        else if (std::isinf(t))
            out << "> " << format_number(cell.result.upper) << " (no failing clearing time found)";
        else
            out << "n/a (" << (cell.note.empty() ? cell.result.note : cell.note) << ')';
        out << '\n';
    }
    return 0;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    const CaseFile c = load_case(o.case_path);
    const OperatingPoint op = solve_operating_point(c, o.s, o.lossy);
    const double sigma = o.sigma ? *o.sigma : -op.passivity.lambda + o.rho.value_or(1.0);
    const SystemModel sys = case_system(c, op, uniform_sigma(c, sigma),
                                        GainMargins::uniform(o.margin.value_or(c.simulation.cct_margin)), true);
    FaultScenario scenario;
    scenario.bus = bus_index(c, o.fault_bus);
    scenario.clearing_time = o.clear;
    scenario.fault_shunt_b = c.simulation.fault_shunt_b;
    scenario.t_fault_on = c.simulation.t_fault_on;
    ConvergenceSpec spec = c.simulation.convergence;
    if (o.horizon) {
        // Keep the tail test meaningful for short runs: the window shrinks
        // to a third of the horizon when the configured one would not fit.
        spec.horizon = *o.horizon;
        if (spec.window >= spec.horizon) spec.window = spec.horizon / 3.0;
    }
    const FaultRun run = simulate_fault(sys, scenario, spec, c.simulation.steps);
    out << "sigma = " << format_number(sigma) << ", fault at bus " << o.fault_bus << " cleared after "
        << format_number(o.clear) << " s\n";
    if (run.domain_exit_time) out << "left the model domain at t = " << format_number(*run.domain_exit_time) << " s\n";
    out << "tail deviation = " << format_number(run.tail_deviation) << ", converged: " << (run.converged ? "yes" : "no")
        << '\n';
    if (!o.out_dir.empty()) {
        auto f = open_output(o, "trace.csv");
        write_trace_csv(sys, run.trace, f);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Passivity-index stability toolkit for power networks with heterogeneous bus dynamics", "gridpass"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("case", o.case_path, "Case file (JSON)")->required();
        sub->add_option("--out", o.out_dir, "Directory for CSV and plot-script output");
    };
    auto add_point = [&](CLI::App* sub) {
        sub->add_option("--s", o.s, "Load scale factor")->check(CLI::PositiveNumber);
        sub->add_flag("--lossy", o.lossy, "Keep line resistances (lambda from the susceptance part)");
    };

    auto* pf = app.add_subcommand("powerflow", "Solve the power flow");
    add_common(pf);
    add_point(pf);
    auto* lam = app.add_subcommand("lambda", "Network passivity index and deflated Hessian spectrum");
    add_common(lam);
    add_point(lam);
    auto* ver = app.add_subcommand("verify", "Per-device proposition margins and Condition C1");
    add_common(ver);
    add_point(ver);
    ver->add_option("--sigma", o.sigma, "Passivity index assigned to every device")->required();
    ver->add_option("--margin", o.margin, "Synthesis margin");
    auto* ss = app.add_subcommand("smallsignal", "Jacobian eigenvalues at the equilibrium");
    add_common(ss);
    add_point(ss);
    auto* ss_sigma = ss->add_option("--sigma", o.sigma, "Passivity index assigned to every device");
    ss->add_option("--rho", o.rho, "Offset from -lambda (sigma = -lambda + rho)")->excludes(ss_sigma);
    ss->add_option("--margin", o.margin, "Synthesis margin");
    auto* sl = app.add_subcommand("sweep-lambda", "lambda over the load-scale range");
    add_common(sl);
    sl->add_flag("--lossy", o.lossy, "Keep line resistances");
    sl->add_option("--s-steps", o.s_steps, "Number of s points")->check(CLI::PositiveNumber);
    auto* sg = app.add_subcommand("sweep-grid", "Small-signal verdicts over the (s, rho) grid");
    add_common(sg);
    sg->add_flag("--lossy", o.lossy, "Keep line resistances");
    sg->add_option("--s-steps", o.s_steps, "Number of s points")->check(CLI::PositiveNumber);
    sg->add_option("--rho-steps", o.rho_steps, "Number of rho points")->check(CLI::PositiveNumber);
    sg->add_option("--margin", o.margin, "Synthesis margin");
    sg->add_option("--fix", o.fixed, "Pin a bus at sigma = -lambda + RHO (BUS=RHO, repeatable)");
    sg->add_flag("--serial", o.serial, "Evaluate cells on the calling thread");
    auto* cc = app.add_subcommand("cct", "Critical clearing times for every fault bus and sigma offset");
    add_common(cc);
    cc->add_flag("--lossy", o.lossy, "Keep line resistances");
    cc->add_option("--bus", o.buses, "Fault bus ids (default: all)");
    cc->add_option("--offsets", o.offsets, "sigma offsets from -lambda")->delimiter(',');
    cc->add_flag("--serial", o.serial, "Evaluate cells on the calling thread");
    auto* sim = app.add_subcommand("simulate", "Fault-on/post-fault time simulation");
    add_common(sim);
    add_point(sim);
    sim->add_option("--fault-bus", o.fault_bus, "Faulted bus id")->required();
    sim->add_option("--clear", o.clear, "Fault duration (s)")->required()->check(CLI::PositiveNumber);
    auto* sim_sigma = sim->add_option("--sigma", o.sigma, "Passivity index assigned to every device");
    sim->add_option("--rho", o.rho, "Offset from -lambda (default 1)")->excludes(sim_sigma);
    sim->add_option("--margin", o.margin, "Synthesis margin");
    sim->add_option("--horizon", o.horizon, "Simulation horizon (s); the tail window shrinks to a third of it if needed")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (pf->parsed()) return cmd_powerflow(o, out);
        if (lam->parsed()) return cmd_lambda(o, out);
        if (ver->parsed()) return cmd_verify(o, out);
        if (ss->parsed()) return cmd_smallsignal(o, out);
        if (sl->parsed()) return cmd_sweep_lambda(o, out);
        if (sg->parsed()) return cmd_sweep_grid(o, out);
        if (cc->parsed()) return cmd_cct(o, out);
        if (sim->parsed()) return cmd_simulate(o, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace gridpass
