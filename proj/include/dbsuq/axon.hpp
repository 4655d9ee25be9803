#pragma once

// Single-cable myelinated axon: active nodes of Ranvier, passive internodes.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dbsuq {

// Straight fiber in the z = 0 plane, perpendicular to the lead, with its
// centre node at distance `distance` from the lead axis.
struct AxonGeometry {
    int n_nodes = 21;
    int internode_compartments = 10;
    double node_spacing = 0.5e-3;  // node centre to node centre [m]
    double node_length = 1e-6;     // [m]
    double distance = 1e-3;        // [m]

    void validate() const;
    std::size_t n_compartments() const;
    std::vector<double> positions() const;  // centres along the fiber [m], centred on 0
    std::vector<Eigen::Vector2d> compartment_points() const;  // (r, z) in the meridian plane
};

// SI units. Nodal kinetics: fast sodium (m^3 h) and slow potassium (n) rate
// functions of the MRG mammalian node model; leak reversal is solved so that
// v_rest is an exact equilibrium.
struct MembraneConstants {
    double axoplasm_resistivity = 0.7;  // [Ohm m]
    double g_ratio = 0.6;               // axon / fiber diameter
    double c_node = 2e-2;               // [F/m^2]
    double g_na = 3e4;                  // [S/m^2]
    double g_k = 800.0;                 // [S/m^2]
    double g_leak = 70.0;               // [S/m^2]
    double e_na = 50e-3;                // [V]
    double e_k = -90e-3;                // [V]
    double c_myelin = 2e-3;             // [F/m^2] effective, per axon surface
    double g_myelin = 0.5;              // [S/m^2] effective, per axon surface
    double v_rest = -80e-3;             // [V]
};

struct CableSystem {
    std::vector<double> capacitance;  // [F]
    std::vector<double> g_axial;      // [S], between i and i+1
    std::vector<double> area;         // membrane area [m^2]
    std::vector<char> active;         // nodal (active) compartments
    std::vector<double> g_passive;    // passive membrane conductance [S] (0 for active)
    std::vector<std::size_t> nodes;   // indices of the active compartments
    MembraneConstants k;
    double e_leak = 0.0;
    double v_rest = -80e-3;

    std::size_t size() const { return capacitance.size(); }
    void validate() const;
};

CableSystem build_axon(const AxonGeometry& geom, double fiber_diameter, const MembraneConstants& k = {});

// Zero all ionic currents (nodal channels and passive leak).
CableSystem make_passive(CableSystem sys);

struct MembraneState {
    std::vector<double> phi_m;  // [V]
    std::vector<double> m, h, n;  // per compartment; only nodal entries evolve
};

struct GateRates {
    double alpha_m, beta_m, alpha_h, beta_h, alpha_n, beta_n;  // [1/s]
};
GateRates gate_rates(double v);  // v in volts

MembraneState resting_state(const CableSystem& sys);

// Ionic membrane current [A] of compartment i (outward positive).
double ionic_current(const CableSystem& sys, const MembraneState& s, std::size_t i);

// One backward-Euler step from t to t + dt. phi_e is the extracellular potential
// held over the step (the sample at t). Gates first (exponential integration at
// the old potential), then a tridiagonal solve for phi_m. i_inj (optional) is an
// injected current [A].
void step_backward_euler(const CableSystem& sys, MembraneState& state, std::span<const double> phi_e,
                         double dt, std::span<const double> i_inj = {});

struct SimulationResult {
    std::vector<double> phi_i_out;   // phi_m,out + phi_e,out - phi_r at each sample (t = 0 included)
    std::vector<double> phi_m_out;   // membrane potential of the outer compartment
    double metric = 0.0;             // max of phi_m_out
    bool activated = false;          // metric > 0: the outer compartment crossed 0 V
    bool phi_i_positive = false;     // diagnostic: max of phi_i_out > 0
};

// phi_e: compartments x nt, one stimulus period sampled at dt, tiled n_periods
// times and multiplied by `scale`. Sample j drives the step [j dt, (j+1) dt].
// The outer compartment is the last one, which is the distal node.
SimulationResult simulate(const CableSystem& sys, const Eigen::MatrixXd& phi_e, double dt, int n_periods,
                          double scale = 1.0);

double activation_metric(std::span<const double> trace);

}  // namespace dbsuq
