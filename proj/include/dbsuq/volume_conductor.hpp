#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dbsuq/dispersion.hpp"
#include "dbsuq/mesh.hpp"

namespace dbsuq {

// Nodal potential [V] for a unit (1 A) current injected at the active contact.
struct FieldSolution {
    double omega = 0.0;
    Eigen::VectorXcd phi;
};

// Axisymmetric P1 discretisation of div(sigma grad phi) = 0. The element
// matrices and the sparsity pattern are built once; each solve only fills in
// the admittivities and factorises. Safe to call solve() concurrently.
class VolumeConductor {
public:
    explicit VolumeConductor(Mesh mesh);

    const Mesh& mesh() const { return mesh_; }
    double source_area() const { return source_area_; }  // [m^2]
    const Eigen::VectorXd& load() const { return load_; }  // consistent nodal currents, sum 1 A

    FieldSolution solve(const ComplexAdmittivity& sigma_enc, const ComplexAdmittivity& sigma_tissue,
                        double omega) const;

    // Current-weighted mean potential on the active contact [V].
    Complex contact_potential(const FieldSolution& sol) const;
    // 2*pi * integral of sigma |grad phi|^2 r dr dz [W per A^2].
    Complex dissipated_power(const FieldSolution& sol, const ComplexAdmittivity& sigma_enc,
                             const ComplexAdmittivity& sigma_tissue) const;

private:
    Mesh mesh_;
    std::vector<std::array<double, 9>> stiffness_;  // 2*pi*r_c * A * grad Ni . grad Nj
    std::vector<int> dof_;  // node -> free index or -1 on ground
    Eigen::Index n_free_ = 0;
    Eigen::SparseMatrix<Complex> pattern_;
    std::vector<std::array<int, 9>> slot_;  // element entry -> index into value array, -1 if dropped
    Eigen::VectorXd load_;
    double source_area_ = 0.0;
};

FieldSolution assemble_solve(const Mesh& mesh, const ComplexAdmittivity& sigma_enc,
                             const ComplexAdmittivity& sigma_tissue, double omega);

// Potential of a unit point current in an unbounded homogeneous medium.
Complex point_source_oracle(Complex sigma, double r);

// Barycentric interpolation, with point location done once per point set.
class Probe {
public:
    Probe(const Mesh& mesh, std::span<const Eigen::Vector2d> points);

    std::size_t size() const { return element_.size(); }
    Eigen::VectorXcd eval(const FieldSolution& sol) const;

private:
    std::vector<std::array<int, 3>> element_;
    std::vector<std::array<double, 3>> weight_;
};

Eigen::VectorXcd eval_at_points(const FieldSolution& sol, const Mesh& mesh,
                                std::span<const Eigen::Vector2d> points);

}  // namespace dbsuq
