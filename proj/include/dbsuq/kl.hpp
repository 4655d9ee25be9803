#pragma once

// Discrete Karhunen-Loeve reduction of the random conductivity curve: sample
// the random Cole-Cole law on a log-spaced frequency grid, estimate the
// covariance, eigendecompose, truncate to the dominant modes.

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "dbsuq/dispersion.hpp"
#include "dbsuq/spline.hpp"

namespace dbsuq {

struct FrequencyGrid {
    std::vector<double> omega;  // rad/s, strictly increasing
    double log_step = 0.0;
    double log_base = 10.0;

    std::size_t size() const { return omega.size(); }
    double min() const { return omega.front(); }
    double max() const { return omega.back(); }
    double log_coord(double w) const { return std::log(w) / std::log(log_base); }
};

// Points at log(omega_min) + k*log_step, k = 0..K, K = ceil(span/log_step);
// the last point is clamped to omega_max.
FrequencyGrid build_grid(double omega_min, double omega_max, double log_step,
                         double log_base = 10.0);

struct SampleEnsemble {
    Eigen::MatrixXd values;  // S x N, entry (s, n) = kappa(theta_s, omega_n)
};

// S draws of u ~ U[-1,1]^14, each from its own stream derived from (seed, s).
SampleEnsemble sample_ensemble(const RandomParamBox& box, const FrequencyGrid& grid,
                               std::size_t samples, std::uint64_t seed, unsigned threads = 1);

struct CovarianceEstimate {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // unbiased, 1/(S-1)
};

CovarianceEstimate sample_covariance(const SampleEnsemble& ens);

struct EigenDecomposition {
    Eigen::VectorXd lambda;   // descending
    Eigen::MatrixXd vectors;  // columns, largest-magnitude entry positive
};

// Dense symmetric eigensolver on (C + C^T)/2. Full spectrum.
EigenDecomposition eig_sym(const Eigen::MatrixXd& C);

// Lanczos with full reorthogonalisation for the `count` largest eigenpairs.
EigenDecomposition eig_sym_lanczos(const Eigen::MatrixXd& C, std::size_t count,
                                   double tol = 1e-12);

struct KLModel {
    FrequencyGrid grid;
    Eigen::VectorXd mean;   // N
    Eigen::MatrixXd basis;  // N x M, orthonormal columns
    Eigen::VectorXd scale;  // M, sqrt(lambda_m)

    std::size_t rank() const { return static_cast<std::size_t>(scale.size()); }
    Eigen::MatrixXd covariance() const;  // V_M diag(lambda) V_M^T
};

KLModel truncate(const EigenDecomposition& eig, std::size_t rank, const FrequencyGrid& grid,
                 const Eigen::VectorXd& mean);

// Smallest rank whose discarded eigenvalue mass is <= tol * trace.
KLModel truncate_by_energy(const EigenDecomposition& eig, double tol, const FrequencyGrid& grid,
                           const Eigen::VectorXd& mean);

// mean + V_M diag(sqrt(lambda)) y
Eigen::VectorXd kl_realize(const KLModel& model, std::span<const double> y);

// y_m = (g - mean)^T b_m / sqrt(lambda_m)
Eigen::VectorXd kl_project(const KLModel& model, const Eigen::VectorXd& g);

// Not-a-knot cubic spline in log(omega) through grid values; no extrapolation.
class GridSpline {
public:
    GridSpline(const FrequencyGrid& grid, std::span<const double> values);
    double operator()(double omega) const;

private:
    double log_base_;
    double omega_min_;
    double omega_max_;
    CubicSpline spline_;
};

double spline_eval(const FrequencyGrid& grid, std::span<const double> values, double omega);

struct TruncationError {
    double max_rel = 0.0;
    Eigen::MatrixXd field;      // |C - C_M| / max|C|
    double spectral_rel = 0.0;  // max|C - C_M| / ||C||_2, diagnostic
};

TruncationError truncation_error(const Eigen::MatrixXd& C, const KLModel& model);

// Versioned JSON document (grid descriptor, mean, eigenvalues, row-major basis).
nlohmann::json kl_model_to_json(const KLModel& model);
KLModel kl_model_from_json(const nlohmann::json& doc);
void save_kl_model(const KLModel& model, const std::string& path);
KLModel load_kl_model(const std::string& path);

}  // namespace dbsuq
