#pragma once

// End-to-end study: KL model of the random conductivity, sparse-grid
// collocation, one field sweep per node, activation thresholds per axon.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dbsuq/axon.hpp"
#include "dbsuq/dispersion.hpp"
#include "dbsuq/ffem.hpp"
#include "dbsuq/kl.hpp"
#include "dbsuq/mesh.hpp"
#include "dbsuq/sparse_grid.hpp"
#include "dbsuq/volume_conductor.hpp"

namespace dbsuq {

inline constexpr const char* kVersion = "1.0.0";

struct ThresholdOptions {
    double tol_abs = 1e-8;     // [A]
    double lower = 1e-5;       // first trial amplitude [A]
    double cap = 10.0;         // give up above this [A]
    double scan_factor = 2.0;  // geometric step of the upward scan
};

struct ThresholdResult {
    double current = std::numeric_limits<double>::quiet_NaN();  // [A]
    bool reachable = false;
    int evaluations = 0;
};

// Lowest amplitude with metric > 0: scan upward from max(lower, hint) (or from
// lower if the hint already activates) by scan_factor until the metric turns
// positive, then Brent on the last step. If the amplitude 1% below the root
// still activates, Brent is rerun below it. Unreachable below cap is
// reported, not thrown.
ThresholdResult activation_threshold(const std::function<double(double)>& metric, const ThresholdOptions& opts,
                                     double hint = 0.0);

// Same with the cable model driven by I * unit_phi (compartments x nt).
ThresholdResult activation_threshold(const CableSystem& sys, const Eigen::MatrixXd& unit_phi, double dt,
                                     int n_periods, const ThresholdOptions& opts, double hint = 0.0);

struct PipelineConfig {
    std::uint64_t seed = 20190411;

    RandomParamBox box;
    double kl_omega_min = 2.0 * 3.14159265358979323846 * 130.0;
    double kl_omega_max = 2.0 * 3.14159265358979323846 * 5e5;
    double kl_log_step = 0.004;
    std::size_t kl_samples = 1000;
    std::size_t kl_rank = 4;

    int grid_level = 3;

    Geometry geometry;
    std::size_t mesh_elements = 27000;
    double encapsulation_factor = 1.0;

    double f_min = 130.0;
    double f_max = 5e5;
    std::size_t sweep_nodes = 3846;
    std::size_t nt = 768;
    StimulusPulse pulse;  // amplitude is the unit; thresholds scale it

    AxonGeometry axon;  // distance is taken from `distances`
    double fiber_diameter = 5.7e-6;
    MembraneConstants membrane;
    std::vector<double> distances{1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 10e-3};
    int n_periods = 2;
    ThresholdOptions threshold;

    std::string unreachable_policy = "abort";  // or "exclude"

    void validate() const;
};

// Canonical document with every field (keys sorted).
nlohmann::json config_to_json(const PipelineConfig& cfg);
// Starts from the defaults and applies `doc`; unknown keys are a ConfigError.
PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::string& path);
// FNV-1a 64 over the canonical serialization.
std::uint64_t config_hash(const PipelineConfig& cfg);
std::string hash_hex(std::uint64_t h);

KLModel build_kl_model(const PipelineConfig& cfg, unsigned threads = 1);

// Quadrature abscissa x in [-1, 1]^M -> KL coordinate y = sqrt(3) x.
std::vector<double> kl_coordinates(std::span<const double> x);

// Random conductivity for KL coordinates y, mean Cole-Cole permittivity.
Material realization_material(const KLModel& model, std::span<const double> y, const PipelineConfig& cfg);

// Forward model shared by all collocation nodes.
class ForwardModel {
public:
    explicit ForwardModel(const PipelineConfig& cfg);

    const PipelineConfig& config() const { return cfg_; }
    const VolumeConductor& conductor() const { return conductor_; }
    const CableSystem& cable() const { return cable_; }
    double dt() const { return cfg_.pulse.period / static_cast<double>(cfg_.nt); }
    std::span<const Eigen::Vector2d> points() const { return points_; }  // all axons, concatenated

    // Extracellular potential per unit current, one compartments x nt block per axon.
    std::vector<Eigen::MatrixXd> unit_response(const Material& material, unsigned threads = 1) const;

private:
    PipelineConfig cfg_;
    VolumeConductor conductor_;
    CableSystem cable_;
    std::vector<Eigen::Vector2d> points_;
    std::vector<double> omega_;
    Eigen::VectorXcd spectrum_;
};

struct AxonStatistics {
    double distance = 0.0;            // [m]
    double mean = 0.0;                // [A]
    double std = 0.0;                 // [A]
    std::vector<double> thresholds;   // per collocation node [A], NaN if unreachable
};

struct UQResult {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    int dim = 0;
    int level = 0;
    Eigen::MatrixXd points;  // K x dim, quadrature abscissas in [-1, 1]
    std::vector<double> weights;
    std::vector<AxonStatistics> axons;
    std::size_t excluded = 0;  // node count dropped under the "exclude" policy
};

// Mean and standard deviation of one quantity over the rule; NaN entries are
// dropped with weights renormalised.
Moments collocation_moments(const SparseGridRule& rule, std::span<const double> values);

UQResult run_collocation(const ForwardModel& forward, const KLModel& model, const SparseGridRule& rule,
                         unsigned threads = 1);

nlohmann::json uq_result_to_json(const UQResult& r);
UQResult uq_result_from_json(const nlohmann::json& doc);
void save_uq_result(const UQResult& r, const std::string& path);
UQResult load_uq_result(const std::string& path);

// table.csv (axon, distance_mm, mean_ma, std_ma), manifest.json, optional
// thresholds.csv (one row per node). Returns the written paths.
std::vector<std::string> write_report(const UQResult& r, const nlohmann::json& config_doc, const std::string& dir,
                                      bool node_matrix = true);

// Analytic point-source stand-in for the field problem: homogeneous medium
// with the realised admittivity, phi = I / (4 pi sigma(omega) r). Returns the
// current [A] that brings max_t |phi_e| at distance r to v_ref.
class SurrogateModel {
public:
    SurrogateModel(const PipelineConfig& cfg, std::size_t sweep_nodes, double v_ref = 10e-3);
    double operator()(const KLModel& model, std::span<const double> y, double r) const;

private:
    PipelineConfig cfg_;
    std::vector<double> omega_;
    Eigen::VectorXcd spectrum_;
    double v_ref_;
};

}  // namespace dbsuq
