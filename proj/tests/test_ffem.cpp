#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dbsuq/dispersion.hpp"
#include "dbsuq/ffem.hpp"
#include "dbsuq/mesh.hpp"

using namespace dbsuq;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

const VolumeConductor& conductor()
{
    static const VolumeConductor vc(build_mesh(Geometry{}, 5000));
    return vc;
}

Material mean_material(double enc_factor = 1.0)
{
    const auto p = literature_mean();
    return {[p](double w) { return conductivity(p, w); }, [p](double w) { return permittivity(p, w); }, enc_factor};
}

TransferFunction analytic_tf(std::size_t n, const std::function<Complex(double)>& h)
{
    TransferFunction tf;
    tf.points = {{0.0, 0.0}};
    tf.omega = frequency_nodes(130.0, 5e5, n);
    tf.H.resize(1, static_cast<Eigen::Index>(tf.omega.size()));
    for (std::size_t k = 0; k < tf.omega.size(); ++k) tf.H(0, static_cast<Eigen::Index>(k)) = h(tf.omega[k]);
    return tf;
}

// Periodic steady state of tau v' + v = s(t) by backward Euler on the
// sample grid, driven by the same sampled pulse.
std::vector<double> rc_oracle(double tau, double dt, const std::vector<double>& s)
{
    const std::size_t nt = s.size();
    std::vector<double> out(nt);
    double v = 0.0;
    for (int cycle = 0; cycle < 300; ++cycle)
        for (std::size_t j = 0; j < nt; ++j) {
            if (cycle == 299) out[j] = v;
            v = (v + dt / tau * s[(j + 1) % nt]) / (1.0 + dt / tau);
        }
    return out;
}

}  // namespace

TEST_CASE("frequency_nodes")
{
    const auto w = frequency_nodes(130.0, 5e5, 3846);
    REQUIRE(w.size() == 3847);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == kTwoPi * 130.0);
    CHECK(w.back() == kTwoPi * 5e5);
    const double q = w[2] / w[1];
    for (std::size_t k = 2; k < w.size(); ++k) CHECK(std::abs(w[k] / w[k - 1] - q) <= 1e-12);

    const auto two = frequency_nodes(130.0, 5e5, 2);
    CHECK(two == std::vector<double>{0.0, kTwoPi * 130.0, kTwoPi * 5e5});

    CHECK_THROWS_AS(frequency_nodes(0.0, 10.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(frequency_nodes(10.0, 10.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(frequency_nodes(1.0, 10.0, 1), std::invalid_argument);
}

TEST_CASE("stimulus_spectrum")
{
    const StimulusPulse pulse;
    const auto c = stimulus_spectrum(pulse, 768);
    REQUIRE(c.size() == 385);
    // Six samples fall inside the 60 us pulse at dt = period/768.
    CHECK(c[0].real() == doctest::Approx(-6.0 / 768.0).epsilon(1e-14));
    CHECK(c[0].imag() == 0.0);
    CHECK(std::abs(c[0].real() - (-60e-6 * 130.0)) <= 0.002 * 60e-6 * 130.0);

    StimulusPulse zero = pulse;
    zero.amplitude = 0.0;
    CHECK(stimulus_spectrum(zero, 768).cwiseAbs().maxCoeff() == 0.0);

    const auto s = stimulus_samples(pulse, 768);
    double time_energy = 0.0;
    for (double v : s) time_energy += v * v;
    time_energy /= 768.0;
    double spec_energy = std::norm(c[0]) + std::norm(c[384]);
    for (Eigen::Index k = 1; k < 384; ++k) spec_energy += 2.0 * std::norm(c[k]);
    CHECK(std::abs(time_energy - spec_energy) <= 1e-12);

    CHECK_THROWS_AS(stimulus_spectrum(pulse, 6), std::invalid_argument);
    CHECK_THROWS_AS(stimulus_spectrum(pulse, 769), std::invalid_argument);
    CHECK_THROWS_AS(stimulus_spectrum(pulse, 128), std::invalid_argument);  // dt ~ 60 us
    StimulusPulse bad = pulse;
    bad.pulse_width = pulse.period;
    CHECK_THROWS(stimulus_spectrum(bad, 768));
}

TEST_CASE("reconstruct_time: constant resistive transfer reproduces the pulse")
{
    const StimulusPulse pulse{2.5e-3, 60e-6, 1.0 / 130.0};
    const double r = 123.4;
    const auto tf = analytic_tf(50, [&](double) { return Complex(r); });
    const auto sig = reconstruct_time(tf, stimulus_spectrum(pulse, 768), pulse.period, 768);
    const auto s = stimulus_samples(pulse, 768);
    CHECK(sig.dt * 768 == doctest::Approx(pulse.period).epsilon(1e-12));
    for (std::size_t j = 0; j < 768; ++j)
        CHECK(std::abs(sig.values(0, static_cast<Eigen::Index>(j)) - r * s[j]) <= 1e-12 * r * pulse.amplitude);
    CHECK(sig.at(0, 768) == sig.at(0, 0));
    CHECK(sig.at(0, -1) == sig.at(0, 767));
}

TEST_CASE("reconstruct_time: one-pole lowpass against a backward-Euler RC oracle at dt = tau/100")
{
    const StimulusPulse pulse;
    for (std::size_t nt : {768u, 1536u}) {
        const double dt = pulse.period / static_cast<double>(nt);
        const double tau = 100.0 * dt;
        const auto tf = analytic_tf(400, [&](double w) { return 1.0 / Complex(1.0, w * tau); });
        const auto sig = reconstruct_time(tf, stimulus_spectrum(pulse, nt), pulse.period, nt);
        const auto ref = rc_oracle(tau, dt, stimulus_samples(pulse, nt));
        double err = 0.0, peak = 0.0;
        for (std::size_t j = 0; j < nt; ++j) {
            err += std::pow(sig.values(0, static_cast<Eigen::Index>(j)) - ref[j], 2);
            peak = std::max(peak, std::abs(ref[j]));
        }
        const double nrmse = std::sqrt(err / static_cast<double>(nt)) / peak;
        MESSAGE("nt " << nt << " RMS error / peak " << nrmse);
        CHECK(nrmse <= 0.02);
    }
}

TEST_CASE("reconstruct_time: zero spectrum, linearity in amplitude, spline at knots")
{
    const auto tf = analytic_tf(60, [](double w) { return 1.0 / Complex(1.0, w * 1e-4); });
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(385);
    CHECK(reconstruct_time(tf, zero, 1.0 / 130.0, 768).values.cwiseAbs().maxCoeff() == 0.0);

    const StimulusPulse unit;
    StimulusPulse scaled = unit;
    scaled.amplitude = 3.0;
    const auto a = reconstruct_time(tf, stimulus_spectrum(unit, 768), unit.period, 768);
    const auto b = reconstruct_time(tf, stimulus_spectrum(scaled, 768), unit.period, 768);
    CHECK((b.values - 3.0 * a.values).cwiseAbs().maxCoeff() <= 1e-14 * b.values.cwiseAbs().maxCoeff());

    // Nodes placed exactly on the harmonics are reproduced exactly.
    TransferFunction knots;
    knots.points = {{0.0, 0.0}};
    const double period = 1.0 / 130.0;
    knots.omega.push_back(0.0);
    for (int k = 1; k <= 16; ++k) knots.omega.push_back(kTwoPi * k / period);
    knots.H.resize(1, 17);
    for (int k = 0; k <= 16; ++k) knots.H(0, k) = Complex(std::cos(0.3 * k) + 2.0, k == 0 ? 0.0 : std::sin(0.7 * k));
    const auto hh = interpolate_harmonics(knots, period, 32);
    for (int k = 0; k <= 16; ++k) CHECK(hh(0, k) == knots.H(0, k));

    CHECK_THROWS_AS(reconstruct_time(tf, Eigen::VectorXcd::Zero(10), 1.0 / 130.0, 768), std::invalid_argument);
}

TEST_CASE("interpolate_harmonics: DC blend and clamp above the last node")
{
    TransferFunction tf;
    tf.points = {{0.0, 0.0}};
    tf.omega = {0.0, kTwoPi * 200.0, kTwoPi * 300.0, kTwoPi * 400.0};
    tf.H.resize(1, 4);
    tf.H << Complex(2.0), Complex(1.0, -1.0), Complex(0.5, -0.5), Complex(0.25, -0.25);
    const auto hh = interpolate_harmonics(tf, 0.01, 10);  // harmonics at 0, 100, ..., 500 Hz
    CHECK(hh(0, 0) == Complex(2.0));
    CHECK(hh(0, 1).real() == doctest::Approx(1.5));
    CHECK(hh(0, 1).imag() == doctest::Approx(-0.5));
    CHECK(std::abs(hh(0, 2) - tf.H(0, 1)) <= 1e-12);
    CHECK(std::abs(hh(0, 4) - tf.H(0, 3)) <= 1e-12);
    CHECK(hh(0, 5) == tf.H(0, 3));
}

TEST_CASE("sweep: constant medium, grounded point, fast path agrees with full solves")
{
    const auto nodes = frequency_nodes(130.0, 5e5, 20);
    const std::vector<Eigen::Vector2d> pts{{2e-3, 0.0}, {50e-3, 0.0}, {5e-3, 3e-3}};

    Material flat{[](double) { return 0.1; }, [](double) { return 0.0; }, 1.0};
    const auto tf = sweep(conductor(), pts, flat, nodes);
    for (Eigen::Index k = 1; k < tf.H.cols(); ++k) CHECK(std::abs(tf.H(0, k) - tf.H(0, 1)) <= 1e-12 * std::abs(tf.H(0, 1)));
    CHECK(tf.H.row(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tf.H(0, 0).imag() == 0.0);

    const auto mat = mean_material();
    const auto fast = sweep(conductor(), pts, mat, nodes);
    for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{10}, nodes.size() - 1}) {
        const double w = nodes[k];
        const Complex s = k == 0 ? Complex(mat.kappa(nodes[1]))
                                 : Complex(mat.kappa(w), w * kVacuumPermittivity * mat.eps_r(w));
        const auto direct = Probe(conductor().mesh(), pts).eval(conductor().solve({s}, {s}, w));
        for (Eigen::Index p = 0; p < 3; ++p)
            CHECK(std::abs(fast.H(p, static_cast<Eigen::Index>(k)) - direct[p]) <= 1e-9 * std::abs(direct[0]));
    }

    // Separate encapsulation conductivity takes the per-node solve path.
    const auto enc = sweep(conductor(), pts, mean_material(0.5), nodes, 2);
    CHECK(std::abs(enc.H(0, 5)) > std::abs(fast.H(0, 5)) * 0.5);
    CHECK(std::abs(enc.H(0, 5) - fast.H(0, 5)) > 1e-6 * std::abs(fast.H(0, 5)));
    CHECK(enc.H(0, 0).imag() == 0.0);
}

TEST_CASE("sweep: doubling the node count changes H at the harmonics by at most 1%")
{
    const std::vector<Eigen::Vector2d> pts{{1e-3, 0.0}, {5e-3, 0.0}};
    const auto mat = mean_material();
    const auto a = sweep(conductor(), pts, mat, frequency_nodes(130.0, 5e5, 100));
    const auto b = sweep(conductor(), pts, mat, frequency_nodes(130.0, 5e5, 200));
    const auto ha = interpolate_harmonics(a, 1.0 / 130.0, 768);
    const auto hb = interpolate_harmonics(b, 1.0 / 130.0, 768);
    CHECK((ha - hb).cwiseAbs().maxCoeff() <= 0.01 * hb.cwiseAbs().minCoeff());
}

TEST_CASE("time signal of the mean tissue: real, cathodal during the pulse")
{
    const std::vector<Eigen::Vector2d> pts{{1e-3, 0.0}};
    const auto tf = sweep(conductor(), pts, mean_material(), frequency_nodes(130.0, 5e5, 400));
    const StimulusPulse pulse{1e-3, 60e-6, 1.0 / 130.0};
    const auto sig = reconstruct_time(tf, stimulus_spectrum(pulse, 768), pulse.period, 768);
    CHECK(sig.values(0, 2) < 0.0);
    CHECK(std::abs(sig.values(0, 200)) < 0.05 * std::abs(sig.values(0, 2)));

    std::ostringstream a, b;
    write_transfer_csv(tf, a);
    write_time_csv(sig, b);
    CHECK(a.str().rfind("point,frequency_hz,re_h,im_h\n", 0) == 0);
    CHECK(b.str().rfind("t,phi_0\n", 0) == 0);
}
