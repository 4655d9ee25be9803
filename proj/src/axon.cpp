#include "dbsuq/axon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dbsuq/errors.hpp"
#include "dbsuq/spline.hpp"

namespace dbsuq {

namespace {

constexpr double kPi = std::numbers::pi;

// x / (1 - exp(-x/y)) with the removable singularity at x = 0.
double vtrap(double x, double y)
{
    const double u = x / y;
    if (std::abs(u) < 1e-6) return y * (1.0 + 0.5 * u);
    return x / (1.0 - std::exp(-u));
}

double steady(double a, double b) { return a / (a + b); }

}  // namespace

void AxonGeometry::validate() const
{
    if (n_nodes < 2) throw ConfigError("axon: need at least two nodes of Ranvier");
    if (internode_compartments < 1) throw ConfigError("axon: need at least one internodal compartment per span");
    if (!(node_length > 0.0) || !(node_spacing > node_length))
        throw ConfigError("axon: need 0 < node_length < node_spacing");
    if (!(distance > 0.0) || !std::isfinite(distance)) throw ConfigError("axon: distance must be positive");
}

std::size_t AxonGeometry::n_compartments() const
{
    return static_cast<std::size_t>(n_nodes + (n_nodes - 1) * internode_compartments);
}

std::vector<double> AxonGeometry::positions() const
{
    validate();
    std::vector<double> s;
    s.reserve(n_compartments());
    const double half = 0.5 * (n_nodes - 1) * node_spacing;
    const double seg = (node_spacing - node_length) / internode_compartments;
    for (int k = 0; k < n_nodes; ++k) {
        const double x = k * node_spacing - half;
        s.push_back(x);
        if (k + 1 == n_nodes) break;
        for (int j = 0; j < internode_compartments; ++j) s.push_back(x + 0.5 * node_length + (j + 0.5) * seg);
    }
    return s;
}

std::vector<Eigen::Vector2d> AxonGeometry::compartment_points() const
{
    std::vector<Eigen::Vector2d> p;
    for (double s : positions()) p.emplace_back(std::hypot(distance, s), 0.0);
    return p;
}

void CableSystem::validate() const
{
    const std::size_t n = size();
    if (n == 0) throw std::invalid_argument("cable: empty system");
    if (g_axial.size() + 1 != n || area.size() != n || active.size() != n || g_passive.size() != n)
        throw std::invalid_argument("cable: inconsistent array sizes");
    for (double c : capacitance)
        if (!(c > 0.0)) throw std::invalid_argument("cable: capacitance must be positive");
    for (double g : g_axial)
        if (!(g > 0.0)) throw std::invalid_argument("cable: axial conductance must be positive");
}

GateRates gate_rates(double v)
{
    const double mv = v * 1e3;
    GateRates r{};
    r.alpha_m = 6.57 * vtrap(mv + 20.4, 10.3);
    r.beta_m = 0.304 * vtrap(-(mv + 25.7), 9.16);
    r.alpha_h = 0.34 * vtrap(-(mv + 114.0), 11.0);
    r.beta_h = 12.6 / (1.0 + std::exp(-(mv + 31.8) / 13.4));
    r.alpha_n = 0.3 / (1.0 + std::exp(-(mv + 53.0) / 5.0));
    r.beta_n = 0.03 / (1.0 + std::exp(-(mv + 90.0)));
    // per ms -> per s
    for (double* x : {&r.alpha_m, &r.beta_m, &r.alpha_h, &r.beta_h, &r.alpha_n, &r.beta_n}) *x *= 1e3;
    return r;
}

CableSystem build_axon(const AxonGeometry& geom, double fiber_diameter, const MembraneConstants& k)
{
    geom.validate();
    if (!(fiber_diameter > 0.0) || fiber_diameter > 1e-3) throw ConfigError("axon: non-physical fiber diameter");
    if (!(k.g_ratio > 0.0 && k.g_ratio <= 1.0) || !(k.axoplasm_resistivity > 0.0) || !(k.c_node > 0.0) ||
        !(k.c_myelin > 0.0) || k.g_myelin < 0.0 || k.g_leak <= 0.0)
        throw ConfigError("axon: non-physical membrane constants");

    const double d = k.g_ratio * fiber_diameter;
    const double cross = 0.25 * kPi * d * d;
    const double seg = (geom.node_spacing - geom.node_length) / geom.internode_compartments;

    CableSystem sys;
    sys.k = k;
    sys.v_rest = k.v_rest;
    std::vector<double> length;
    for (int n = 0; n < geom.n_nodes; ++n) {
        sys.nodes.push_back(length.size());
        length.push_back(geom.node_length);
        sys.active.push_back(1);
        if (n + 1 == geom.n_nodes) break;
        for (int j = 0; j < geom.internode_compartments; ++j) {
            length.push_back(seg);
            sys.active.push_back(0);
        }
    }
    for (std::size_t i = 0; i < length.size(); ++i) {
        const double a = kPi * d * length[i];
        sys.area.push_back(a);
        sys.capacitance.push_back(a * (sys.active[i] ? k.c_node : k.c_myelin));
        sys.g_passive.push_back(sys.active[i] ? 0.0 : a * k.g_myelin);
    }
    for (std::size_t i = 0; i + 1 < length.size(); ++i)
        sys.g_axial.push_back(1.0 / (k.axoplasm_resistivity * 0.5 * (length[i] + length[i + 1]) / cross));

    // Leak reversal that makes v_rest an equilibrium of the nodal membrane.
    const auto r = gate_rates(k.v_rest);
    const double m = steady(r.alpha_m, r.beta_m), h = steady(r.alpha_h, r.beta_h), n = steady(r.alpha_n, r.beta_n);
    const double i_channels = k.g_na * m * m * m * h * (k.v_rest - k.e_na) + k.g_k * n * (k.v_rest - k.e_k);
    sys.e_leak = k.v_rest + i_channels / k.g_leak;
    return sys;
}

CableSystem make_passive(CableSystem sys)
{
    sys.k.g_na = sys.k.g_k = 0.0;
    sys.k.g_leak = 0.0;
    std::fill(sys.g_passive.begin(), sys.g_passive.end(), 0.0);
    return sys;
}

MembraneState resting_state(const CableSystem& sys)
{
    const auto r = gate_rates(sys.v_rest);
    MembraneState s;
    s.phi_m.assign(sys.size(), sys.v_rest);
    s.m.assign(sys.size(), steady(r.alpha_m, r.beta_m));
    s.h.assign(sys.size(), steady(r.alpha_h, r.beta_h));
    s.n.assign(sys.size(), steady(r.alpha_n, r.beta_n));
    return s;
}

namespace {

// Membrane conductance G and G*E of compartment i at the current gates.
std::pair<double, double> membrane_linear(const CableSystem& sys, const MembraneState& s, std::size_t i)
{
    if (!sys.active[i]) return {sys.g_passive[i], sys.g_passive[i] * sys.v_rest};
    const auto& k = sys.k;
    const double a = sys.area[i];
    const double gna = a * k.g_na * s.m[i] * s.m[i] * s.m[i] * s.h[i];
    const double gk = a * k.g_k * s.n[i];
    const double gl = a * k.g_leak;
    return {gna + gk + gl, gna * k.e_na + gk * k.e_k + gl * sys.e_leak};
}

}  // namespace

double ionic_current(const CableSystem& sys, const MembraneState& s, std::size_t i)
{
    const auto [g, ge] = membrane_linear(sys, s, i);
    return g * s.phi_m[i] - ge;
}

void step_backward_euler(const CableSystem& sys, MembraneState& s, std::span<const double> phi_e, double dt,
                         std::span<const double> i_inj)
{
    const std::size_t n = sys.size();
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    if (phi_e.size() != n || (!i_inj.empty() && i_inj.size() != n))
        throw std::invalid_argument("step: drive size does not match the cable");

    for (std::size_t i : sys.nodes) {
        const auto r = gate_rates(s.phi_m[i]);
        auto advance = [dt](double x, double a, double b) {
            const double inf = a / (a + b);
            return inf + (x - inf) * std::exp(-(a + b) * dt);
        };
        s.m[i] = advance(s.m[i], r.alpha_m, r.beta_m);
        s.h[i] = advance(s.h[i], r.alpha_h, r.beta_h);
        s.n[i] = advance(s.n[i], r.alpha_n, r.beta_n);
    }

    // (C/dt + G + sum g_a) V_i - sum g_a V_j = C/dt V_i^n + G E + g_a Laplacian(phi_e) + i_inj
    thread_local std::vector<double> lower, diag, upper, rhs;
    lower.assign(n, 0.0);
    diag.assign(n, 0.0);
    upper.assign(n, 0.0);
    rhs.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [g, ge] = membrane_linear(sys, s, i);
        const double cdt = sys.capacitance[i] / dt;
        diag[i] = cdt + g;
        rhs[i] = cdt * s.phi_m[i] + ge + (i_inj.empty() ? 0.0 : i_inj[i]);
        if (i > 0) {
            const double ga = sys.g_axial[i - 1];
            diag[i] += ga;
            lower[i] = -ga;
            rhs[i] += ga * (phi_e[i - 1] - phi_e[i]);
        }
        if (i + 1 < n) {
            const double ga = sys.g_axial[i];
            diag[i] += ga;
            upper[i] = -ga;
            rhs[i] += ga * (phi_e[i + 1] - phi_e[i]);
        }
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(rhs[i]))
            throw NumericalError("axon: non-finite membrane potential at compartment " + std::to_string(i));
        s.phi_m[i] = rhs[i];
    }
}

SimulationResult simulate(const CableSystem& sys, const Eigen::MatrixXd& phi_e, double dt, int n_periods,
                          double scale)
{
    sys.validate();
    const std::size_t n = sys.size();
    if (static_cast<std::size_t>(phi_e.rows()) != n) throw std::invalid_argument("simulate: phi_e rows must match compartments");
    if (phi_e.cols() < 1 || n_periods < 1) throw std::invalid_argument("simulate: empty stimulus or horizon");

    const auto nt = static_cast<std::size_t>(phi_e.cols());
    const std::size_t steps = nt * static_cast<std::size_t>(n_periods);
    const std::size_t out = n - 1;

    MembraneState s = resting_state(sys);
    SimulationResult res;
    res.phi_i_out.reserve(steps + 1);
    res.phi_m_out.reserve(steps + 1);
    res.phi_i_out.push_back(scale * phi_e(static_cast<Eigen::Index>(out), 0));
    res.phi_m_out.push_back(s.phi_m[out]);

    std::vector<double> drive(n);
    for (std::size_t t = 1; t <= steps; ++t) {
        const auto col = static_cast<Eigen::Index>((t - 1) % nt);
        for (std::size_t i = 0; i < n; ++i) drive[i] = scale * phi_e(static_cast<Eigen::Index>(i), col);
        step_backward_euler(sys, s, drive, dt);
        const double phi_e_out = scale * phi_e(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(t % nt));
        res.phi_i_out.push_back(s.phi_m[out] + phi_e_out - sys.v_rest);
        res.phi_m_out.push_back(s.phi_m[out]);
    }
    res.metric = activation_metric(res.phi_m_out);
    res.activated = res.metric > 0.0;
    res.phi_i_positive = activation_metric(res.phi_i_out) > 0.0;
    return res;
}

double activation_metric(std::span<const double> trace)
{
    if (trace.empty()) throw std::invalid_argument("activation_metric: empty trace");
    return *std::max_element(trace.begin(), trace.end());
}

}  // namespace dbsuq
