#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gridpass/errors.hpp"
#include "gridpass/harness.hpp"

namespace gridpass {

namespace {

using json = nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    [[nodiscard]] std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k); }

    const json& value(const std::string& k) {
        seen_.insert(k);
        auto it = j_.find(k);
        if (it == j_.end()) throw SchemaError(key(k), "missing required key");
        return *it;
    }

    double number(const std::string& k) {
        const json& v = value(k);
        if (!v.is_number()) throw SchemaError(key(k), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw SchemaError(key(k), "must be finite");
        return d;
    }

    double number(const std::string& k, double fallback) { return has(k) ? number(k) : (seen_.insert(k), fallback); }

    std::optional<double> optional_number(const std::string& k) {
        if (!has(k)) return std::nullopt;
        return number(k);
    }

    int integer(const std::string& k) {
        const json& v = value(k);
        if (!v.is_number_integer()) throw SchemaError(key(k), "expected an integer");
        return v.get<int>();
    }

    int integer(const std::string& k, int fallback) { return has(k) ? integer(k) : (seen_.insert(k), fallback); }

    bool boolean(const std::string& k, bool fallback) {
        if (!has(k)) return fallback;
        const json& v = value(k);
        if (!v.is_boolean()) throw SchemaError(key(k), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& k) {
        const json& v = value(k);
        if (!v.is_string()) throw SchemaError(key(k), "expected a string");
        return v.get<std::string>();
    }

    const json& array(const std::string& k) {
        const json& v = value(k);
        if (!v.is_array()) throw SchemaError(key(k), "expected an array");
        return v;
    }

    void require(bool ok, const std::string& k, const std::string& what) const {
        if (!ok) throw SchemaError(key(k), what);
    }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.contains(item.key())) throw SchemaError(key(item.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

BusRole parse_role(const json& j, const std::string& path) {
    Fields f(j, path);
    const std::string type = f.string("type");
    BusRole role;
    if (type == "slack") {
        SlackBus b{f.number("theta", 0.0), f.number("V", 1.0)};
        f.require(b.V > 0.0, "V", "must be positive");
        role = b;
    } else if (type == "pv") {
        PVBus b{f.number("P"), f.number("V", 1.0)};
        f.require(b.V > 0.0, "V", "must be positive");
        role = b;
    } else if (type == "pq") {
        role = PQBus{f.number("P"), f.number("Q")};
    } else {
        throw SchemaError(f.key("type"), "expected slack, pv or pq");
    }
    f.finish();
    return role;
}

void parse_device(const json& j, const std::string& path, CaseBus& bus) {
    Fields f(j, path);
    const std::string type = f.string("type");
    if (type == "sg") {
        bus.device.kind = DeviceKind::synchronous_generator;
        SGPhysical& p = bus.device.sg;
        p.M = f.number("M");
        p.D = f.number("D");
        p.Td_prime = f.number("Td_prime");
        p.xd = f.number("xd");
        p.xd_prime = f.number("xd_prime");
        p.K_P = f.number("K_P", 0.1);
        f.require(p.M > 0.0, "M", "must be positive");
        f.require(p.D >= 0.0, "D", "must be non-negative");
        f.require(p.Td_prime > 0.0, "Td_prime", "must be positive");
        f.require(p.xd_prime > 0.0, "xd_prime", "must be positive");
        f.require(p.xd > p.xd_prime, "xd", "must exceed xd_prime");
        f.require(p.K_P > 0.0, "K_P", "must be positive");
        bus.angle_gain = f.optional_number("K_I");
        bus.voltage_gain = f.optional_number("K_E");
    } else if (type == "cd" || type == "qd") {
        bus.device.kind = type == "cd" ? DeviceKind::conventional_droop : DeviceKind::quadratic_droop;
        bus.device.droop.tau1 = f.number("tau1");
        bus.device.droop.tau2 = f.number("tau2");
        f.require(bus.device.droop.tau1 > 0.0, "tau1", "must be positive");
        f.require(bus.device.droop.tau2 > 0.0, "tau2", "must be positive");
        bus.angle_gain = f.optional_number("D1");
        bus.voltage_gain = f.optional_number("D2");
        f.require(!bus.angle_gain || *bus.angle_gain > 0.0, "D1", "must be positive");
        f.require(!bus.voltage_gain || *bus.voltage_gain > 0.0, "D2", "must be positive");
    } else {
        throw SchemaError(f.key("type"), "expected sg, cd or qd");
    }
    if (bus.angle_gain.has_value() != bus.voltage_gain.has_value())
        throw SchemaError(path, "explicit gains must be given in pairs");
    f.finish();
}

Range parse_range(Fields& f, const std::string& prefix, Range fallback) {
    Range r{f.number(prefix + "_min", fallback.min), f.number(prefix + "_max", fallback.max),
            f.integer(prefix + "_steps", fallback.steps)};
    f.require(r.steps >= 1, prefix + "_steps", "must be at least 1");
    f.require(r.steps == 1 || r.min < r.max, prefix + "_min", "must be below " + prefix + "_max");
    return r;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    // nlohmann reports the 1-based index of the byte it stopped at.
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < end; ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

std::vector<double> Range::values() const {
    if (steps < 1) throw ConfigError("range needs at least one step");
    if (steps == 1) return {min};
    std::vector<double> v(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) v[static_cast<std::size_t>(k)] = min + (max - min) * k / (steps - 1);
    v.back() = max;
    return v;
}

CaseFile parse_case(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        auto [line, col] = line_column(text, e.byte);
        throw ParseError("invalid JSON at line " + std::to_string(line) + ", column " + std::to_string(col), line, col);
    }

    CaseFile c;
    Fields top(root, "");
    c.name = top.has("name") ? top.string("name") : "case";

    const json& buses = top.array("buses");
    if (buses.size() < 2) throw SchemaError("buses", "need at least two buses");
    std::set<int> ids;
    for (std::size_t k = 0; k < buses.size(); ++k) {
        const std::string path = "buses[" + std::to_string(k) + "]";
        Fields f(buses[k], path);
        CaseBus bus;
        bus.id = f.integer("id");
        if (!ids.insert(bus.id).second) throw SchemaError(f.key("id"), "duplicate bus id " + std::to_string(bus.id));
        bus.role = parse_role(f.value("role"), f.key("role"));
        parse_device(f.value("device"), f.key("device"), bus);
        f.finish();
        c.buses.push_back(std::move(bus));
    }
    int slacks = 0;
    for (const auto& b : c.buses) slacks += std::holds_alternative<SlackBus>(b.role) ? 1 : 0;
    if (slacks != 1) throw SchemaError("buses", "exactly one slack bus required");

    const json& lines = top.array("lines");
    for (std::size_t k = 0; k < lines.size(); ++k) {
        const std::string path = "lines[" + std::to_string(k) + "]";
        Fields f(lines[k], path);
        CaseLine line{f.integer("from"), f.integer("to"), f.number("r", 0.0), f.number("x")};
        f.require(ids.contains(line.from), "from", "unknown bus id " + std::to_string(line.from));
        f.require(ids.contains(line.to), "to", "unknown bus id " + std::to_string(line.to));
        f.require(line.from != line.to, "to", "self-loop");
        f.require(line.r >= 0.0, "r", "must be non-negative");
        f.require(line.x > 0.0, "x", "must be positive");
        f.finish();
        c.lines.push_back(line);
    }

    if (top.has("solver")) {
        Fields f(top.value("solver"), "solver");
        c.solver.tol = f.number("tol", c.solver.tol);
        c.solver.max_iter = f.integer("max_iter", c.solver.max_iter);
        f.require(c.solver.tol > 0.0, "tol", "must be positive");
        f.require(c.solver.max_iter >= 1, "max_iter", "must be at least 1");
        f.finish();
    }

    if (top.has("simulation")) {
        Fields f(top.value("simulation"), "simulation");
        SimulationSettings& s = c.simulation;
        s.steps.step = f.number("step", s.steps.step);
        s.steps.record_every = f.integer("record_every", s.steps.record_every);
        s.convergence.horizon = f.number("horizon", s.convergence.horizon);
        s.convergence.window = f.number("window", s.convergence.window);
        s.convergence.tol = f.number("tol", s.convergence.tol);
        s.convergence.require_contraction = f.boolean("require_contraction", s.convergence.require_contraction);
        s.fault_shunt_b = f.number("fault_shunt_b", s.fault_shunt_b);
        s.t_fault_on = f.number("t_fault_on", s.t_fault_on);
        s.cct_lower = f.number("cct_lower", s.cct_lower);
        s.cct_upper = f.number("cct_upper", s.cct_upper);
        s.cct_tol = f.number("cct_tol", s.cct_tol);
        s.cct_margin = f.number("cct_margin", s.cct_margin);
        f.require(s.steps.step > 0.0, "step", "must be positive");
        f.require(s.steps.record_every >= 1, "record_every", "must be at least 1");
        f.require(s.convergence.window > 0.0 && s.convergence.window < s.convergence.horizon, "window",
                  "must lie in (0, horizon)");
        f.require(s.convergence.tol > 0.0, "tol", "must be positive");
        f.require(s.fault_shunt_b < 0.0, "fault_shunt_b", "must be negative");
        f.require(s.t_fault_on >= 0.0, "t_fault_on", "must be non-negative");
        f.require(s.cct_lower > 0.0 && s.cct_lower < s.cct_upper, "cct_lower", "must lie in (0, cct_upper)");
        f.require(s.cct_tol > 0.0, "cct_tol", "must be positive");
        f.require(s.cct_margin >= 0.0, "cct_margin", "must be non-negative");
        f.finish();
    }

    if (top.has("sweep")) {
        Fields f(top.value("sweep"), "sweep");
        c.sweep.s = parse_range(f, "s", c.sweep.s);
        c.sweep.rho = parse_range(f, "rho", c.sweep.rho);
        c.sweep.margin = f.number("margin", c.sweep.margin);
        f.require(c.sweep.s.min > 0.0, "s_min", "must be positive");
        f.finish();
    }

    top.finish();
    // Connectivity, duplicate lines and the rest are checked by the network builder.
    case_network(c, true);
    return c;
}

CaseFile load_case(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open case file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str());
}

std::size_t bus_index(const CaseFile& c, int id) {
    for (std::size_t i = 0; i < c.buses.size(); ++i)
        if (c.buses[i].id == id) return i;
    throw ConfigError("no bus with id " + std::to_string(id));
}

std::vector<std::string> bus_labels(const CaseFile& c) {
    std::vector<std::string> labels;
    for (const auto& b : c.buses) labels.push_back(std::to_string(b.id));
    return labels;
}

NetworkModel case_network(const CaseFile& c, bool lossy) {
    std::vector<LineParams> lines;
    for (const auto& l : c.lines) lines.push_back({static_cast<int>(bus_index(c, l.from)), static_cast<int>(bus_index(c, l.to)), lossy ? l.r : 0.0, l.x});
    return NetworkModel::build(std::move(lines), c.buses.size());
}

std::vector<BusRole> case_roles(const CaseFile& c) {
    std::vector<BusRole> roles;
    for (const auto& b : c.buses) roles.push_back(b.role);
    return roles;
}

}  // namespace gridpass
