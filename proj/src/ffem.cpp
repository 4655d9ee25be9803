#include "dbsuq/ffem.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

#include "dbsuq/errors.hpp"
#include "dbsuq/parallel.hpp"
#include "dbsuq/spline.hpp"

namespace dbsuq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_nodes(std::span<const double> omega)
{
    if (omega.size() < 2 || omega[0] != 0.0) throw std::invalid_argument("ffem: nodes must start with DC and have a nonzero node");
    for (std::size_t k = 1; k < omega.size(); ++k)
        if (!(omega[k] > omega[k - 1])) throw std::invalid_argument("ffem: nodes must be strictly increasing");
}

std::string node_label(std::size_t k, double omega)
{
    return "sweep node " + std::to_string(k) + " (f = " + std::to_string(omega / kTwoPi) + " Hz): ";
}

}  // namespace

void StimulusPulse::validate() const
{
    if (!std::isfinite(amplitude)) throw ConfigError("stimulus: amplitude must be finite");
    if (!(pulse_width > 0.0) || !(period > pulse_width) || !std::isfinite(period))
        throw ConfigError("stimulus: need 0 < pulse_width < period");
}

double TimeSignal::at(Eigen::Index point, std::ptrdiff_t j) const
{
    const auto n = static_cast<std::ptrdiff_t>(nt);
    return values(point, static_cast<Eigen::Index>(((j % n) + n) % n));
}

std::vector<double> frequency_nodes(double f_min, double f_max, std::size_t n)
{
    if (!(f_min > 0.0) || !(f_max > f_min) || !std::isfinite(f_max))
        throw std::invalid_argument("frequency_nodes: need 0 < f_min < f_max");
    if (n < 2) throw std::invalid_argument("frequency_nodes: need at least two nodes");
    std::vector<double> w(n + 1);
    w[0] = 0.0;
    const double lo = std::log(f_min), span = std::log(f_max) - lo;
    for (std::size_t k = 0; k < n; ++k)
        w[k + 1] = kTwoPi * std::exp(lo + span * static_cast<double>(k) / static_cast<double>(n - 1));
    w[1] = kTwoPi * f_min;
    w[n] = kTwoPi * f_max;
    return w;
}

TransferFunction sweep(const VolumeConductor& conductor, std::span<const Eigen::Vector2d> points,
                       const Material& material, std::span<const double> omega, unsigned threads)
{
    check_nodes(omega);
    if (!material.kappa || !material.eps_r) throw std::invalid_argument("sweep: material functions not set");
    if (!(material.encapsulation_factor > 0.0)) throw ConfigError("sweep: encapsulation factor must be positive");

    const Probe probe(conductor.mesh(), points);
    TransferFunction tf;
    tf.points.assign(points.begin(), points.end());
    tf.omega.assign(omega.begin(), omega.end());
    tf.H.resize(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(omega.size()));

    auto sigmas = [&](std::size_t k) {
        if (k == 0) {
            const double kap = material.kappa(omega[1]);
            return std::pair{ComplexAdmittivity{material.encapsulation_factor * kap}, ComplexAdmittivity{kap}};
        }
        const double w = omega[k];
        const double kap = material.kappa(w);
        const Complex displacement(0.0, w * kVacuumPermittivity * material.eps_r(w));
        return std::pair{ComplexAdmittivity{material.encapsulation_factor * kap + displacement},
                         ComplexAdmittivity{kap + displacement}};
    };

    if (material.encapsulation_factor == 1.0) {
        const FieldSolution unit = conductor.solve({Complex(1.0)}, {Complex(1.0)}, 0.0);
        const Eigen::VectorXcd h = probe.eval(unit);
        for (std::size_t k = 0; k < omega.size(); ++k) {
            const Complex s = sigmas(k).second.value;
            if (!(s.real() > 0.0) || !std::isfinite(s.imag()))
                throw std::invalid_argument(node_label(k, omega[k]) + "non-positive real admittivity");
            tf.H.col(static_cast<Eigen::Index>(k)) = h / s;
        }
        return tf;
    }

    parallel_for(omega.size(), threads, [&](std::size_t k) {
        const auto [enc, tissue] = sigmas(k);
        try {
            tf.H.col(static_cast<Eigen::Index>(k)) = probe.eval(conductor.solve(enc, tissue, omega[k]));
        } catch (const NumericalError& e) {
            throw NumericalError(node_label(k, omega[k]) + e.what());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(node_label(k, omega[k]) + e.what());
        }
    });
    return tf;
}

std::vector<double> stimulus_samples(const StimulusPulse& pulse, std::size_t nt)
{
    pulse.validate();
    if (nt < 8 || nt % 2 != 0) throw std::invalid_argument("stimulus: nt must be even and >= 8");
    const double dt = pulse.period / static_cast<double>(nt);
    if (pulse.pulse_width < 2.0 * dt) throw std::invalid_argument("stimulus: nt too small to resolve the pulse");
    std::vector<double> s(nt, 0.0);
    for (std::size_t j = 0; j < nt && static_cast<double>(j) * dt < pulse.pulse_width; ++j) s[j] = -pulse.amplitude;
    return s;
}

Eigen::VectorXcd stimulus_spectrum(const StimulusPulse& pulse, std::size_t nt)
{
    const auto s = stimulus_samples(pulse, nt);
    Eigen::FFT<double> fft;
    std::vector<Complex> spec;
    fft.fwd(spec, s);
    Eigen::VectorXcd c(static_cast<Eigen::Index>(nt / 2 + 1));
    for (std::size_t k = 0; k <= nt / 2; ++k) c[static_cast<Eigen::Index>(k)] = spec[k] / static_cast<double>(nt);
    c[0] = c[0].real();
    c[static_cast<Eigen::Index>(nt / 2)] = c[static_cast<Eigen::Index>(nt / 2)].real();
    return c;
}

Eigen::MatrixXcd interpolate_harmonics(const TransferFunction& tf, double period, std::size_t nt)
{
    check_nodes(tf.omega);
    if (tf.H.cols() != static_cast<Eigen::Index>(tf.omega.size()))
        throw std::invalid_argument("interpolate_harmonics: H columns do not match the nodes");
    if (!(period > 0.0) || nt < 2 || nt % 2 != 0) throw std::invalid_argument("interpolate_harmonics: bad period or nt");

    const std::size_t nn = tf.omega.size();
    const std::size_t nh = nt / 2 + 1;
    std::vector<double> x(nn - 1);
    for (std::size_t k = 1; k < nn; ++k) x[k - 1] = std::log(tf.omega[k]);
    const double w1 = tf.omega[1], wn = tf.omega.back();

    Eigen::MatrixXcd out(tf.H.rows(), static_cast<Eigen::Index>(nh));
    std::vector<double> re(nn - 1), im(nn - 1);
    for (Eigen::Index p = 0; p < tf.H.rows(); ++p) {
        for (std::size_t k = 1; k < nn; ++k) {
            re[k - 1] = tf.H(p, static_cast<Eigen::Index>(k)).real();
            im[k - 1] = tf.H(p, static_cast<Eigen::Index>(k)).imag();
        }
        const CubicSpline sre(x, re), sim(x, im);
        const Complex h0(tf.H(p, 0).real(), 0.0);
        const Complex h1 = tf.H(p, 1);
        for (std::size_t k = 0; k < nh; ++k) {
            const double w = kTwoPi * static_cast<double>(k) / period;
            Complex v;
            if (k == 0) {
                v = h0;
            } else if (w < w1 * (1.0 - 1e-12)) {
                v = h0 + (w / w1) * (h1 - h0);
            } else if (w >= wn) {
                v = tf.H(p, static_cast<Eigen::Index>(nn - 1));
            } else {
                const double lx = std::clamp(std::log(w), x.front(), x.back());
                v = Complex(sre(lx), sim(lx));
            }
            out(p, static_cast<Eigen::Index>(k)) = v;
        }
    }
    return out;
}

TimeSignal reconstruct_time(const TransferFunction& tf, const Eigen::VectorXcd& spectrum, double period,
                            std::size_t nt)
{
    if (spectrum.size() != static_cast<Eigen::Index>(nt / 2 + 1))
        throw std::invalid_argument("reconstruct_time: spectrum length must be nt/2 + 1");
    const Eigen::MatrixXcd hh = interpolate_harmonics(tf, period, nt);

    TimeSignal sig;
    sig.nt = nt;
    sig.dt = period / static_cast<double>(nt);
    sig.values.resize(tf.H.rows(), static_cast<Eigen::Index>(nt));

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::vector<Complex> full(nt), time;
    for (Eigen::Index p = 0; p < tf.H.rows(); ++p) {
        for (std::size_t k = 0; k <= nt / 2; ++k) full[k] = spectrum[static_cast<Eigen::Index>(k)] * hh(p, static_cast<Eigen::Index>(k));
        full[0] = full[0].real();
        full[nt / 2] = full[nt / 2].real();
        for (std::size_t k = 1; k < nt / 2; ++k) full[nt - k] = std::conj(full[k]);
        fft.inv(time, full);
        double max_re = 0.0, max_im = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
            sig.values(p, static_cast<Eigen::Index>(j)) = time[j].real();
            max_re = std::max(max_re, std::abs(time[j].real()));
            max_im = std::max(max_im, std::abs(time[j].imag()));
        }
        if (max_im > 1e-10 * max_re) throw NumericalError("reconstruct_time: inverse transform is not real");
    }
    return sig;
}

void write_transfer_csv(const TransferFunction& tf, std::ostream& out)
{
    out.precision(17);
    out << "point,frequency_hz,re_h,im_h\n";
    for (Eigen::Index p = 0; p < tf.H.rows(); ++p)
        for (std::size_t k = 0; k < tf.omega.size(); ++k) {
            const Complex h = tf.H(p, static_cast<Eigen::Index>(k));
            out << p << ',' << tf.omega[k] / kTwoPi << ',' << h.real() << ',' << h.imag() << '\n';
        }
}

void write_time_csv(const TimeSignal& sig, std::ostream& out)
{
    out.precision(17);
    out << 't';
    for (Eigen::Index p = 0; p < sig.values.rows(); ++p) out << ",phi_" << p;
    out << '\n';
    for (std::size_t j = 0; j < sig.nt; ++j) {
        out << static_cast<double>(j) * sig.dt;
        for (Eigen::Index p = 0; p < sig.values.rows(); ++p) out << ',' << sig.values(p, static_cast<Eigen::Index>(j));
        out << '\n';
    }
}

}  // namespace dbsuq
