#pragma once

// Composite Cole-Cole dielectric dispersion with four relaxation terms, and
// the random version obtained by drawing all 14 parameters from a uniform box.

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>

namespace dbsuq {

using Complex = std::complex<double>;

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr std::size_t kColeColeTerms = 4;
inline constexpr std::size_t kColeColeParamCount = 14;

struct ColeColeParams {
    double eps_inf = 1.0;
    double kappa_i = 0.0;  // S/m
    std::array<double, kColeColeTerms> delta_eps{};
    std::array<double, kColeColeTerms> tau{1.0, 1.0, 1.0, 1.0};  // s
    std::array<double, kColeColeTerms> alpha{};

    // Flat layout: (eps_inf, kappa_i, de1, tau1, a1, ..., de4, tau4, a4).
    static ColeColeParams from_array(std::span<const double> flat);
    std::array<double, kColeColeParamCount> to_array() const;

    // Throws std::invalid_argument when an invariant is violated.
    void validate() const;

    bool operator==(const ColeColeParams&) const = default;
};

// Literature mean vector used for grey-matter-like tissue.
ColeColeParams literature_mean();

struct RandomParamBox {
    ColeColeParams mean = literature_mean();
    double rel_halfwidth = 0.10;
};

struct ComplexAdmittivity {
    Complex value;  // S/m, kappa(omega) + j*omega*eps0*eps_r(omega)
};

// f(omega) = eps_inf + kappa_i/(j w eps0) + sum de_n / (1 + (j w tau_n)^(1-a_n)),
// principal branch for the fractional power. Throws std::domain_error for omega <= 0.
Complex eval_f(const ColeColeParams& p, double omega);

// Re f(omega).
double permittivity(const ColeColeParams& p, double omega);

// -Im(eps0 * omega * f(omega)), S/m.
double conductivity(const ColeColeParams& p, double omega);

// param_i = mean_i * (1 + h * u_i), u in [-1, 1]^14.
ColeColeParams sample_params(const RandomParamBox& box, std::span<const double> u);

// kappa(omega) + j omega eps0 eps_r(omega); kappa_i + 0j at omega == 0. When
// eps_r_override is given it replaces Re f(omega) in the imaginary part.
ComplexAdmittivity admittivity(const ColeColeParams& p, double omega,
                               std::optional<double> eps_r_override = std::nullopt);

}  // namespace dbsuq
