#include "dpc/plant.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dpc/config.hpp"

namespace dpc {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("plant parameters: " + what);
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void PlantParams::validate() const {
    require(num_chillers >= 1, "num_chillers must be >= 1");
    require(c_p > 0 && cap_loop > 0 && cap_return > 0, "capacitances and c_p must be positive");
    require(q_max > 0, "q_max must be positive");
    require(base_power >= 0, "base_power must be nonnegative");
    require(eta_s > 0 && eta_s < 1, "eta_s must lie in (0,1)");
    require(eta_r > 0 && eta_r < 1, "eta_r must lie in (0,1)");
    require(gamma >= 0, "gamma must be nonnegative");
    require(mdot_min < mdot_max, "mdot_min must be < mdot_max");
    require(t_s_min < t_s_max, "t_s bounds out of order");
    require(t_e_min < t_e_max, "t_e bounds out of order");
    require(t_r_min < t_r_max, "t_r bounds out of order");
    require(dt > 0, "dt must be positive");
    require(!fir_coeffs.empty(), "fir_coeffs must be nonempty");
    double sum = 0;
    for (const double h : fir_coeffs) {
        require(h > 0, "fir_coeffs must all be positive");
        sum += h;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "fir_coeffs must sum to 1");
    if (ramp_limit) require(*ramp_limit > 0, "ramp_limit must be positive when set");
}

std::string PlantParams::to_text() const {
    KvFile f;
    f.set_int("num_chillers", num_chillers);
    f.set_double("c_p", c_p);
    f.set_double("C", cap_loop);
    f.set_double("C_r", cap_return);
    f.set_double("rho", base_power);
    f.set_double("Q_max", q_max);
    f.set_double("a0", a0);
    f.set_double("a1", a1);
    f.set_double("a2", a2);
    f.set_double("eta_s", eta_s);
    f.set_double("eta_r", eta_r);
    f.set_double("gamma", gamma);
    f.set_double("mdot_min", mdot_min);
    f.set_double("mdot_max", mdot_max);
    f.set_double("T_s_min", t_s_min);
    f.set_double("T_s_max", t_s_max);
    f.set_double("T_e_min", t_e_min);
    f.set_double("T_e_max", t_e_max);
    f.set_double("T_r_min", t_r_min);
    f.set_double("T_r_max", t_r_max);
    f.set_list("fir_coeffs", fir_coeffs);
    f.set_double("dt", dt);
    if (ramp_limit) f.set_double("ramp_limit", *ramp_limit);
    return f.to_text();
}

PlantParams PlantParams::from_text(const std::string& text) {
    const KvFile f = KvFile::parse(text);
    PlantParams p;  // defaults are the reference two-chiller plant
    p.num_chillers = static_cast<int>(f.get_int("num_chillers", p.num_chillers));
    p.c_p = f.get_double("c_p", p.c_p);
    p.cap_loop = f.get_double("C", p.cap_loop);
    p.cap_return = f.get_double("C_r", p.cap_return);
    p.base_power = f.get_double("rho", p.base_power);
    p.q_max = f.get_double("Q_max", p.q_max);
    p.a0 = f.get_double("a0", p.a0);
    p.a1 = f.get_double("a1", p.a1);
    p.a2 = f.get_double("a2", p.a2);
    p.eta_s = f.get_double("eta_s", p.eta_s);
    p.eta_r = f.get_double("eta_r", p.eta_r);
    p.gamma = f.get_double("gamma", p.gamma);
    p.mdot_min = f.get_double("mdot_min", p.mdot_min);
    p.mdot_max = f.get_double("mdot_max", p.mdot_max);
    p.t_s_min = f.get_double("T_s_min", p.t_s_min);
    p.t_s_max = f.get_double("T_s_max", p.t_s_max);
    p.t_e_min = f.get_double("T_e_min", p.t_e_min);
    p.t_e_max = f.get_double("T_e_max", p.t_e_max);
    p.t_r_min = f.get_double("T_r_min", p.t_r_min);
    p.t_r_max = f.get_double("T_r_max", p.t_r_max);
    if (f.has("fir_coeffs")) p.fir_coeffs = f.get_list("fir_coeffs");
    p.dt = f.get_double("dt", p.dt);
    if (f.has("ramp_limit")) p.ramp_limit = f.get_double("ramp_limit");
    p.validate();
    return p;
}

PlantParams PlantParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open plant file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void PlantParams::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plant file: " + path);
    out << to_text();
}

std::uint64_t PlantParams::hash() const { return fnv1a(to_text()); }

void PlantState::validate(const PlantParams& p) const {
    if (static_cast<int>(t_s.size()) != p.num_chillers) {
        throw ConfigError("plant state: t_s size does not match num_chillers");
    }
    if (t_s.size() + load_history.size() == 0 || !std::isfinite(t_r)) {
        throw ConfigError("plant state: empty or non-finite");
    }
    if (load_history.size() != p.fir_coeffs.size()) {
        throw ConfigError("plant state: load history length must match fir_coeffs length");
    }
    for (const double q : load_history) {
        if (q < 0) throw ConfigError("plant state: negative load sample");
    }
}

void ControlInput::validate(const PlantParams& p) const {
    const auto m = static_cast<std::size_t>(p.num_chillers);
    if (delta.size() != m || t_e.size() != m || mdot.size() != m) {
        throw ConfigError("control input: per-chiller sizes must match num_chillers");
    }
    bool any_on = false;
    for (const double d : delta) {
        if (d != 0.0 && d != 1.0) throw ConfigError("control input: delta entries must be 0 or 1");
        any_on = any_on || d == 1.0;
    }
    if (!any_on) throw ConfigError("control input: at least one chiller must stay on");
}

double filtered_load(std::span<const double> history, std::span<const double> coeffs) {
    if (history.size() != coeffs.size()) {
        throw ConfigError("filtered_load: history length must match coefficient length");
    }
    double acc = 0;
    for (std::size_t l = 0; l < coeffs.size(); ++l) acc += coeffs[l] * history[l];
    return acc;
}

StateCore<double> state_core(const PlantState& s) { return {s.t_r, s.t_s}; }

ControlCore<double> control_core(const ControlInput& u) { return {u.delta, u.t_e, u.mdot}; }

PowerBreakdown to_breakdown(const PowerCore<double>& p) {
    PowerBreakdown b;
    b.q = p.q;
    b.cop = p.cop;
    b.p_chiller = p.p_chiller;
    b.p_pump = p.p_pump;
    b.q_total = p.q_total;
    b.p_chiller_total = p.p_chiller_total;
    b.p_pump_total = p.p_pump_total;
    return b;
}

std::vector<double> delivered_cooling(const PlantState& s, const ControlInput& u,
                                      const PlantParams& p, const std::vector<double>* prev_q) {
    const auto x = state_core(s);
    const auto uc = control_core(u);
    return delivered_cooling(x, uc, p, prev_q);
}

PowerBreakdown power_draw(const PlantState& s, const ControlInput& u, const PlantParams& p,
                          const std::vector<double>* prev_q) {
    const auto x = state_core(s);
    const auto uc = control_core(u);
    return to_breakdown(power_draw(x, uc, p, prev_q));
}

std::pair<PlantState, PowerBreakdown> step(const PlantState& s, const ControlInput& u,
                                           const PlantParams& p, double next_load,
                                           const std::vector<double>* prev_q) {
    const double q_tilde = filtered_load(s.load_history, p.fir_coeffs);
    const auto result = step_core(state_core(s), control_core(u), q_tilde, p, prev_q);

    PlantState next;
    next.t_r = result.next.t_r;
    next.t_s = result.next.t_s;
    next.load_history.resize(s.load_history.size());
    next.load_history[0] = next_load;
    for (std::size_t l = 1; l < s.load_history.size(); ++l) {
        next.load_history[l] = s.load_history[l - 1];
    }

    bool finite = std::isfinite(next.t_r);
    for (const double t : next.t_s) finite = finite && std::isfinite(t);
    if (!finite) {
        std::ostringstream msg;
        msg << "plant step produced a non-finite state (t_r=" << next.t_r << ", q_tilde=" << q_tilde
            << ")";
        throw SimulationFault(msg.str());
    }
    return {std::move(next), to_breakdown(result.power)};
}

}  // namespace dpc
