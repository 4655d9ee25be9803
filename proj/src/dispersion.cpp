#include "dbsuq/dispersion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dbsuq {

ColeColeParams ColeColeParams::from_array(std::span<const double> flat)
{
    if (flat.size() != kColeColeParamCount)
        throw std::invalid_argument("Cole-Cole parameter vector must have 14 entries, got " +
                                    std::to_string(flat.size()));
    ColeColeParams p;
    p.eps_inf = flat[0];
    p.kappa_i = flat[1];
    for (std::size_t n = 0; n < kColeColeTerms; ++n) {
        p.delta_eps[n] = flat[2 + 3 * n];
        p.tau[n] = flat[3 + 3 * n];
        p.alpha[n] = flat[4 + 3 * n];
    }
    return p;
}

std::array<double, kColeColeParamCount> ColeColeParams::to_array() const
{
    std::array<double, kColeColeParamCount> flat{};
    flat[0] = eps_inf;
    flat[1] = kappa_i;
    for (std::size_t n = 0; n < kColeColeTerms; ++n) {
        flat[2 + 3 * n] = delta_eps[n];
        flat[3 + 3 * n] = tau[n];
        flat[4 + 3 * n] = alpha[n];
    }
    return flat;
}

void ColeColeParams::validate() const
{
    auto fail = [](const std::string& what) {
        throw std::invalid_argument("invalid Cole-Cole parameters: " + what);
    };
    if (!(eps_inf > 0.0)) fail("eps_inf must be > 0");
    if (!(kappa_i >= 0.0)) fail("kappa_i must be >= 0");
    for (std::size_t n = 0; n < kColeColeTerms; ++n) {
        const auto tag = " (term " + std::to_string(n + 1) + ")";
        if (!(delta_eps[n] >= 0.0)) fail("delta_eps must be >= 0" + tag);
        if (!(tau[n] > 0.0)) fail("tau must be > 0" + tag);
        if (!(alpha[n] >= 0.0 && alpha[n] < 1.0)) fail("alpha must lie in [0, 1)" + tag);
    }
}

ColeColeParams literature_mean()
{
    static constexpr std::array<double, kColeColeParamCount> kMean = {
        4.0,     0.02,      45.0, 7.96e-12,  0.1,  400.0,  15.92e-9,
        0.15,    2.0e5,     106.10e-6, 0.22, 4.5e7, 5.31e-3, 0.0};
    return ColeColeParams::from_array(kMean);
}

Complex eval_f(const ColeColeParams& p, double omega)
{
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw std::domain_error("Cole-Cole evaluation requires omega > 0");
    const Complex j{0.0, 1.0};
    Complex f = p.eps_inf + p.kappa_i / (j * omega * kVacuumPermittivity);
    for (std::size_t n = 0; n < kColeColeTerms; ++n) {
        const double order = 1.0 - p.alpha[n];
        // (j w tau)^(1-a) on the principal branch: arg(j w tau) = pi/2.
        const Complex power = std::polar(std::pow(omega * p.tau[n], order),
                                         order * std::numbers::pi / 2.0);
        f += p.delta_eps[n] / (1.0 + power);
    }
    return f;
}

double permittivity(const ColeColeParams& p, double omega)
{
    return eval_f(p, omega).real();
}

double conductivity(const ColeColeParams& p, double omega)
{
    return -(kVacuumPermittivity * omega * eval_f(p, omega)).imag();
}

ColeColeParams sample_params(const RandomParamBox& box, std::span<const double> u)
{
    if (u.size() != kColeColeParamCount)
        throw std::invalid_argument("sample_params expects 14 coordinates");
    auto flat = box.mean.to_array();
    for (std::size_t i = 0; i < kColeColeParamCount; ++i) {
        if (!(std::abs(u[i]) <= 1.0))
            throw std::invalid_argument("sample_params coordinate " + std::to_string(i) +
                                        " outside [-1, 1]");
        flat[i] = flat[i] * (1.0 + box.rel_halfwidth * u[i]);
    }
    return ColeColeParams::from_array(flat);
}

ComplexAdmittivity admittivity(const ColeColeParams& p, double omega,
                               std::optional<double> eps_r_override)
{
    if (omega < 0.0 || !std::isfinite(omega))
        throw std::domain_error("admittivity requires omega >= 0");
    if (omega == 0.0) return {Complex{p.kappa_i, 0.0}};
    const Complex f = eval_f(p, omega);
    const double kappa = -(kVacuumPermittivity * omega * f).imag();
    const double eps_r = eps_r_override.value_or(f.real());
    return {Complex{kappa, omega * kVacuumPermittivity * eps_r}};
}

}  // namespace dbsuq
