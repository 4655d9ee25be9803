#pragma once

// Fourier finite element method: frequency sweep of the volume conductor,
// transfer-function interpolation, and periodic time-domain reconstruction.

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dbsuq/dispersion.hpp"
#include "dbsuq/volume_conductor.hpp"

namespace dbsuq {

// Periodic cathodal square pulse train.
struct StimulusPulse {
    double amplitude = 1.0;      // I [A]; the applied current is -I during the pulse
    double pulse_width = 60e-6;  // [s]
    double period = 1.0 / 130.0; // [s]

    void validate() const;
};

// Observation points x sweep nodes. Column 0 is the DC node.
struct TransferFunction {
    std::vector<Eigen::Vector2d> points;
    std::vector<double> omega;  // [rad/s], omega[0] == 0
    Eigen::MatrixXcd H;         // [V/A]
};

struct TimeSignal {
    double dt = 0.0;
    std::size_t nt = 0;
    Eigen::MatrixXd values;  // points x nt [V]

    // Sample at index j, wrapped periodically (t = nt * dt is sample 0).
    double at(Eigen::Index point, std::ptrdiff_t j) const;
};

// Tissue model entering the sweep. kappa and eps_r are evaluated on
// (0, inf); the encapsulation layer uses encapsulation_factor * kappa with
// the tissue permittivity.
struct Material {
    std::function<double(double)> kappa;  // [S/m]
    std::function<double(double)> eps_r;
    double encapsulation_factor = 1.0;
};

// {0} followed by n log-equidistant angular frequencies from 2*pi*f_min to 2*pi*f_max.
std::vector<double> frequency_nodes(double f_min, double f_max, std::size_t n);

// One unit-current solve per node. The DC node uses the real conductivity
// kappa(omega[1]). With encapsulation_factor == 1 the admittivity is the same
// in both regions, so a single unit-conductivity solve is rescaled by 1/sigma.
TransferFunction sweep(const VolumeConductor& conductor, std::span<const Eigen::Vector2d> points,
                       const Material& material, std::span<const double> omega, unsigned threads = 1);

// c_k, k = 0..nt/2, of the sampled waveform s_j (j*dt < pulse_width -> -I),
// with c_k = (1/nt) sum_j s_j exp(-2 pi i j k / nt).
Eigen::VectorXcd stimulus_spectrum(const StimulusPulse& pulse, std::size_t nt);
std::vector<double> stimulus_samples(const StimulusPulse& pulse, std::size_t nt);

// H at the harmonics omega_k = 2 pi k / period, k = 0..nt/2 (points x harmonics).
// Re and Im are each splined in log(omega) over the nonzero nodes; between DC
// and the first nonzero node the value is blended linearly in omega; above the
// last node H is held at its last value.
Eigen::MatrixXcd interpolate_harmonics(const TransferFunction& tf, double period, std::size_t nt);

TimeSignal reconstruct_time(const TransferFunction& tf, const Eigen::VectorXcd& spectrum, double period,
                            std::size_t nt);

void write_transfer_csv(const TransferFunction& tf, std::ostream& out);
void write_time_csv(const TimeSignal& sig, std::ostream& out);

}  // namespace dbsuq
