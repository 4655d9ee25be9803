#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "dbsuq/dispersion.hpp"
#include "dbsuq/random.hpp"

using namespace dbsuq;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ColeColeParams constant_medium(double eps_inf, double kappa_i)
{
    ColeColeParams p;
    p.eps_inf = eps_inf;
    p.kappa_i = kappa_i;
    return p;
}

ColeColeParams single_debye()
{
    ColeColeParams p = constant_medium(4.0, 0.0);
    p.delta_eps[0] = 45.0;
    p.tau[0] = 1e-6;
    p.alpha[0] = 0.0;
    return p;
}

bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

}  // namespace

TEST_CASE("eval_f: trivial cases")
{
    const auto c = eval_f(constant_medium(4.0, 0.0), 123.0);
    CHECK(c.real() == 4.0);
    CHECK(c.imag() == 0.0);

    const auto p = single_debye();
    const auto f = eval_f(p, 1.0 / p.tau[0]);
    CHECK(f.real() == doctest::Approx(26.5).epsilon(1e-14));
    CHECK(f.imag() == doctest::Approx(-22.5).epsilon(1e-14));
}

// Golden values from an independent 40-digit mpmath evaluation of the
// composite Cole-Cole law at the literature mean vector.
TEST_CASE("eval_f, permittivity, conductivity, admittivity: golden values at the mean")
{
    const auto mean = literature_mean();
    const auto f = eval_f(mean, kTwoPi * 130.0);
    CHECK(close_rel(f.real(), 2458914.6271416843, 1e-12));
    CHECK(close_rel(f.imag(), -12641760.352471393, 1e-12));
    CHECK(close_rel(permittivity(mean, kTwoPi * 130.0), 2458914.6271416843, 1e-12));
    CHECK(close_rel(conductivity(mean, kTwoPi * 5e5), 0.15180160546814747, 1e-12));

    const auto y = admittivity(mean, kTwoPi * 1e3).value;
    CHECK(close_rel(y.real(), 0.098736109514398936, 1e-12));
    CHECK(close_rel(y.imag(), 0.0091230873177604679, 1e-12));
}

TEST_CASE("permittivity and conductivity: closed forms")
{
    CHECK(permittivity(constant_medium(4.0, 0.7), 10.0) == 4.0);
    const auto p = single_debye();
    const double w = 1.0 / p.tau[0];
    CHECK(permittivity(p, w) == doctest::Approx(26.5).epsilon(1e-14));
    CHECK(conductivity(p, w) == doctest::Approx(kVacuumPermittivity * w * 22.5).epsilon(1e-13));

    for (double w2 : {1.0, 1e3, 1e7})
        CHECK(conductivity(constant_medium(4.0, 0.02), w2) == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("eval_f rejects non-positive frequency")
{
    const auto mean = literature_mean();
    CHECK_THROWS_AS(eval_f(mean, 0.0), std::domain_error);
    CHECK_THROWS_AS(eval_f(mean, -1.0), std::domain_error);
    CHECK_THROWS_AS(permittivity(mean, 0.0), std::domain_error);
    CHECK_THROWS_AS(conductivity(mean, -5.0), std::domain_error);
    CHECK_THROWS_AS(admittivity(mean, -1.0), std::domain_error);
}

TEST_CASE("sample_params maps the box affinely")
{
    RandomParamBox box;
    const std::array<double, 14> zero{};
    CHECK(sample_params(box, zero) == box.mean);

    std::array<double, 14> ones{};
    ones.fill(1.0);
    const auto hi = sample_params(box, ones).to_array();
    const auto mean = box.mean.to_array();
    for (std::size_t i = 0; i < 14; ++i) CHECK(hi[i] == doctest::Approx(1.1 * mean[i]));

    SplitMix64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 14> u{};
        for (auto& x : u) x = rng.uniform(-1.0, 1.0);
        CHECK(sample_params(box, u).alpha[3] == 0.0);
    }

    std::array<double, 14> bad{};
    bad[5] = 1.0001;
    CHECK_THROWS_AS(sample_params(box, bad), std::invalid_argument);
    CHECK_THROWS_AS(sample_params(box, std::array<double, 3>{}), std::invalid_argument);
}

TEST_CASE("admittivity: DC limit, constant medium, override")
{
    const auto dc = admittivity(constant_medium(4.0, 0.02), 0.0).value;
    CHECK(dc.real() == 0.02);
    CHECK(dc.imag() == 0.0);

    const double w = kTwoPi * 130.0;
    const auto y = admittivity(constant_medium(4.0, 0.02), w).value;
    CHECK(y.real() == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(y.imag() == doctest::Approx(w * kVacuumPermittivity * 4.0).epsilon(1e-14));

    const auto mean = literature_mean();
    const auto o = admittivity(mean, w, 1000.0).value;
    CHECK(o.real() == doctest::Approx(conductivity(mean, w)).epsilon(1e-14));
    CHECK(o.imag() == doctest::Approx(w * kVacuumPermittivity * 1000.0).epsilon(1e-14));
}

TEST_CASE("parameter validation")
{
    CHECK_NOTHROW(literature_mean().validate());
    auto p = literature_mean();
    p.alpha[1] = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = literature_mean();
    p.tau[2] = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = literature_mean();
    p.kappa_i = -1e-3;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ColeColeParams::from_array(std::array<double, 13>{}), std::invalid_argument);
}

TEST_CASE("property: conductivity never drops below the ionic term inside the box")
{
    RandomParamBox box;
    SplitMix64 rng(2024);
    const double lo = std::log10(kTwoPi * 130.0);
    const double hi = std::log10(kTwoPi * 5e5);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<double, 14> u{};
        for (auto& x : u) x = trial < 2 ? (trial == 0 ? -1.0 : 1.0) : rng.uniform(-1.0, 1.0);
        const auto p = sample_params(box, u);
        for (int k = 0; k <= 40; ++k) {
            const double w = std::pow(10.0, lo + (hi - lo) * k / 40.0);
            CHECK(conductivity(p, w) >= p.kappa_i - 1e-12);
            CHECK(admittivity(p, w).value.real() >= 0.0);
        }
    }
}

TEST_CASE("property: single Debye permittivity strictly decreases with frequency")
{
    const auto p = single_debye();
    double prev = permittivity(p, 1.0);
    for (int k = 1; k <= 200; ++k) {
        const double w = std::pow(10.0, 0.05 * k);
        const double eps = permittivity(p, w);
        CHECK(eps < prev);
        prev = eps;
    }
}

TEST_CASE("property: zero coordinates reproduce the deterministic law bit for bit")
{
    RandomParamBox box;
    const std::array<double, 14> zero{};
    const auto sampled = sample_params(box, zero);
    for (double w : {kTwoPi * 130.0, kTwoPi * 1e3, kTwoPi * 5e5}) {
        const auto a = eval_f(sampled, w);
        const auto b = eval_f(box.mean, w);
        CHECK(std::memcmp(&a, &b, sizeof(a)) == 0);
    }
}

TEST_CASE("property: continuity in frequency")
{
    const auto mean = literature_mean();
    for (double f : {130.0, 1e3, 2e4, 5e5}) {
        const double w = kTwoPi * f;
        const double w2 = w * (1.0 + 1e-6);
        CHECK(std::abs(conductivity(mean, w2) - conductivity(mean, w)) <=
              1e-4 * std::abs(conductivity(mean, w)));
        CHECK(std::abs(permittivity(mean, w2) - permittivity(mean, w)) <=
              1e-4 * std::abs(permittivity(mean, w)));
    }
}
