#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpc/autodiff.hpp"
#include "dpc/errors.hpp"

namespace dpc {

// Physical constants and operating bounds of one multi-chiller plant.
// Units: temperatures in degC, heat/power in kW, mass flow in kg/s,
// capacitances in kJ/degC, dt in seconds. Chillers are identical units.
struct PlantParams {
    int num_chillers = 2;

    double c_p = 4.184;       // specific heat of water, kJ/(kg*degC)
    double cap_loop = 14644;  // thermal capacitance per chiller loop, kJ/degC
    double cap_return = 29288;
    double base_power = 10;   // standby draw of a running chiller, kW
    double q_max = 500;       // rated cooling per chiller, kW
    double a0 = 1.0;          // COP polynomial in part-load ratio
    double a1 = 19.33;
    double a2 = -18.33;
    double eta_s = 0.7;       // supply-side heat exchanger efficiency
    double eta_r = 0.75;      // return-side heat exchanger efficiency
    double gamma = 9.62e-4;   // pump power coefficient, kW*s^3/kg^3

    double mdot_min = 5, mdot_max = 20;
    double t_s_min = 8, t_s_max = 12;
    double t_e_min = 8, t_e_max = 12;
    double t_r_min = 8, t_r_max = 40;

    std::vector<double> fir_coeffs{0.45, 0.2, 0.15, 0.1, 0.05, 0.05};
    double dt = 180;
    std::optional<double> ramp_limit;  // max |dQ| per step per chiller, kW

    int history_len() const { return static_cast<int>(fir_coeffs.size()); }
    double total_q_max() const { return num_chillers * q_max; }

    void validate() const;  // throws ConfigError

    std::string to_text() const;
    static PlantParams from_text(const std::string& text);
    static PlantParams load(const std::string& path);
    void save(const std::string& path) const;

    // Stable content hash of the canonical text form.
    std::uint64_t hash() const;
};

// Simulator state. load_history holds the last L+1 raw load samples,
// newest first, so load_history[0] is the current step's load.
struct PlantState {
    double t_r = 0;
    std::vector<double> t_s;
    std::vector<double> load_history;

    void validate(const PlantParams& p) const;
};

struct ControlInput {
    std::vector<double> delta;  // 0/1 per chiller
    std::vector<double> t_e;
    std::vector<double> mdot;

    void validate(const PlantParams& p) const;
};

struct PowerBreakdown {
    std::vector<double> q;          // delivered cooling per chiller, kW
    std::vector<double> cop;
    std::vector<double> p_chiller;  // kW
    std::vector<double> p_pump;     // kW
    double q_total = 0;
    double p_chiller_total = 0;
    double p_pump_total = 0;
};

// Smallest COP the power model will use; the part-load polynomial turns
// negative past PLR ~ 1.11 and the simulator has to stay finite off-design.
inline constexpr double kCopFloor = 0.1;

// --- templated core ---------------------------------------------------------
// S is double (plain simulation) or ad::Var (differentiable rollouts).

template <class S>
struct StateCore {
    S t_r;
    std::vector<S> t_s;
};

template <class S>
struct ControlCore {
    std::vector<S> delta;
    std::vector<S> t_e;
    std::vector<S> mdot;
};

template <class S>
struct PowerCore {
    std::vector<S> q;
    std::vector<S> cop;
    std::vector<S> p_chiller;
    std::vector<S> p_pump;
    S q_total;
    S p_chiller_total;
    S p_pump_total;
};

template <class S>
struct StepCore {
    StateCore<S> next;
    PowerCore<S> power;
};

// Effective thermal load: FIR filter over the raw load history (newest first).
double filtered_load(std::span<const double> history, std::span<const double> coeffs);

// Delivered cooling per chiller. Floored at zero (a running chiller never
// heats the loop) and, when the plant has a ramp limit and the previous
// step's cooling is known, clamped to +-ramp_limit around it.
template <class S>
std::vector<S> delivered_cooling(const StateCore<S>& x, const ControlCore<S>& u,
                                 const PlantParams& p, const std::vector<S>* prev_q = nullptr) {
    using ad::relu;
    using ad::vmax;
    using ad::vmin;
    const int m = p.num_chillers;
    std::vector<S> q;
    q.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        S qi = relu(p.eta_r * p.c_p * (u.mdot[i] * u.delta[i] * (x.t_r - x.t_s[i])));
        if (p.ramp_limit && prev_q) {
            const S& q0 = (*prev_q)[i];
            qi = vmin(vmax(qi, relu(q0 - *p.ramp_limit)), q0 + *p.ramp_limit);
            // A switched-off chiller delivers nothing regardless of the ramp.
            qi = qi * u.delta[i];
        }
        q.push_back(qi);
    }
    return q;
}

// Part-load COP polynomial with the off-design floor.
template <class S>
S cop_curve(const S& q, const PlantParams& p) {
    using ad::clamp_min;
    using ad::square;
    const S plr = q * (1.0 / p.q_max);
    return clamp_min(p.a0 + p.a1 * plr + p.a2 * square(plr), kCopFloor);
}

template <class S>
PowerCore<S> power_draw(const StateCore<S>& x, const ControlCore<S>& u, const PlantParams& p,
                        const std::vector<S>* prev_q = nullptr) {
    using ad::cube;
    PowerCore<S> out;
    out.q = delivered_cooling(x, u, p, prev_q);
    const int m = p.num_chillers;
    out.cop.reserve(static_cast<std::size_t>(m));
    out.p_chiller.reserve(static_cast<std::size_t>(m));
    out.p_pump.reserve(static_cast<std::size_t>(m));
    S q_total = out.q[0];
    for (int i = 1; i < m; ++i) q_total = q_total + out.q[i];
    out.q_total = q_total;
    for (int i = 0; i < m; ++i) {
        out.cop.push_back(cop_curve(out.q[i], p));
        out.p_chiller.push_back(out.q[i] / out.cop[static_cast<std::size_t>(i)] +
                                p.base_power * u.delta[i]);
        out.p_pump.push_back(p.gamma * cube(u.mdot[i] * u.delta[i]));
    }
    S pc = out.p_chiller[0];
    S pp = out.p_pump[0];
    for (int i = 1; i < m; ++i) {
        pc = pc + out.p_chiller[static_cast<std::size_t>(i)];
        pp = pp + out.p_pump[static_cast<std::size_t>(i)];
    }
    out.p_chiller_total = pc;
    out.p_pump_total = pp;
    return out;
}

// Time derivative of (t_r, t_s[]) with the filtered load held constant.
template <class S>
StateCore<S> derivatives(const StateCore<S>& x, const ControlCore<S>& u, double q_tilde,
                         const PlantParams& p, const std::vector<S>* prev_q = nullptr) {
    const std::vector<S> q = delivered_cooling(x, u, p, prev_q);
    S q_sum = q[0];
    for (int i = 1; i < p.num_chillers; ++i) q_sum = q_sum + q[static_cast<std::size_t>(i)];
    StateCore<S> dot;
    dot.t_r = (q_tilde - q_sum) * (1.0 / p.cap_return);
    const double k = p.c_p * p.eta_s / p.cap_loop;
    dot.t_s.reserve(x.t_s.size());
    for (int i = 0; i < p.num_chillers; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        dot.t_s.push_back((-k) * (u.delta[idx] * u.mdot[idx] * (x.t_s[idx] - u.t_e[idx])));
    }
    return dot;
}

// One RK4 step of length p.dt with the filtered load held constant across the
// step. Also reports the power breakdown at the step's initial operating
// point; its per-chiller cooling is what a ramp-limited next step clamps to.
template <class S>
StepCore<S> step_core(const StateCore<S>& x, const ControlCore<S>& u, double q_tilde,
                      const PlantParams& p, const std::vector<S>* prev_q = nullptr) {
    const double h = p.dt;
    const auto m = static_cast<std::size_t>(p.num_chillers);

    auto advance = [&](const StateCore<S>& base, const StateCore<S>& slope, double f) {
        StateCore<S> out;
        out.t_r = base.t_r + (f * h) * slope.t_r;
        out.t_s.reserve(m);
        for (std::size_t i = 0; i < m; ++i) out.t_s.push_back(base.t_s[i] + (f * h) * slope.t_s[i]);
        return out;
    };

    StepCore<S> result;
    result.power = power_draw(x, u, p, prev_q);

    const StateCore<S> k1 = derivatives(x, u, q_tilde, p, prev_q);
    const StateCore<S> k2 = derivatives(advance(x, k1, 0.5), u, q_tilde, p, prev_q);
    const StateCore<S> k3 = derivatives(advance(x, k2, 0.5), u, q_tilde, p, prev_q);
    const StateCore<S> k4 = derivatives(advance(x, k3, 1.0), u, q_tilde, p, prev_q);

    result.next.t_r = x.t_r + (h / 6.0) * (k1.t_r + 2.0 * k2.t_r + 2.0 * k3.t_r + k4.t_r);
    result.next.t_s.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        result.next.t_s.push_back(x.t_s[i] + (h / 6.0) * (k1.t_s[i] + 2.0 * k2.t_s[i] +
                                                          2.0 * k3.t_s[i] + k4.t_s[i]));
    }
    return result;
}

// --- numeric front door ------------------------------------------------------

StateCore<double> state_core(const PlantState& s);
ControlCore<double> control_core(const ControlInput& u);
PowerBreakdown to_breakdown(const PowerCore<double>& p);

std::vector<double> delivered_cooling(const PlantState& s, const ControlInput& u,
                                      const PlantParams& p,
                                      const std::vector<double>* prev_q = nullptr);
PowerBreakdown power_draw(const PlantState& s, const ControlInput& u, const PlantParams& p,
                          const std::vector<double>* prev_q = nullptr);

// Advances one step: RK4 on the thermal states, then shifts the load history
// by the supplied next raw load sample. Throws SimulationFault if the state
// leaves the finite range.
std::pair<PlantState, PowerBreakdown> step(const PlantState& s, const ControlInput& u,
                                           const PlantParams& p, double next_load,
                                           const std::vector<double>* prev_q = nullptr);

}  // namespace dpc
