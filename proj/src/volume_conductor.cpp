#include "dbsuq/volume_conductor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>

#include <Eigen/SparseLU>

#include "dbsuq/errors.hpp"

namespace dbsuq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_admittivity(const ComplexAdmittivity& s, const char* region)
{
    if (!(s.value.real() > 0.0) || !std::isfinite(s.value.imag()))
        throw std::invalid_argument(std::string("volume conductor: non-positive real admittivity in ") + region);
}

}  // namespace

VolumeConductor::VolumeConductor(Mesh mesh) : mesh_(std::move(mesh))
{
    if (mesh_.source_edges.empty()) throw ConfigError("volume conductor: mesh has no active-contact edges");
    if (mesh_.ground_nodes.empty())
        throw NumericalError("volume conductor: singular system, no grounded (Dirichlet) boundary nodes; "
                             "the potential is only defined up to a constant");

    const std::size_t nn = mesh_.nodes.size();
    dof_.assign(nn, 0);
    for (int g : mesh_.ground_nodes) dof_[static_cast<std::size_t>(g)] = -1;

    // Every node must be connected to the grounded boundary through elements.
    {
        std::vector<std::vector<int>> adj(nn);
        for (const auto& t : mesh_.triangles)
            for (int a : t)
                for (int b : t)
                    if (a != b) adj[static_cast<std::size_t>(a)].push_back(b);
        std::vector<char> seen(nn, 0);
        std::queue<int> q;
        for (int g : mesh_.ground_nodes) {
            seen[static_cast<std::size_t>(g)] = 1;
            q.push(g);
        }
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            for (int w : adj[static_cast<std::size_t>(v)])
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    q.push(w);
                }
        }
        const auto floating = std::count(seen.begin(), seen.end(), 0);
        if (floating > 0)
            throw NumericalError("volume conductor: singular system, " + std::to_string(floating) +
                                 " nodes are not connected to the grounded boundary");
    }

    Eigen::Index next = 0;
    for (auto& d : dof_)
        if (d == 0) d = static_cast<int>(next++);
    n_free_ = next;

    stiffness_.resize(mesh_.triangles.size());
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(mesh_.triangles.size() * 9);
    for (std::size_t e = 0; e < mesh_.triangles.size(); ++e) {
        const auto& t = mesh_.triangles[e];
        const Eigen::Vector2d& p0 = mesh_.nodes[static_cast<std::size_t>(t[0])];
        const Eigen::Vector2d& p1 = mesh_.nodes[static_cast<std::size_t>(t[1])];
        const Eigen::Vector2d& p2 = mesh_.nodes[static_cast<std::size_t>(t[2])];
        const double area = mesh_.area(e);
        if (!(area > 0.0)) throw NumericalError("volume conductor: degenerate element " + std::to_string(e));
        const std::array<double, 3> b{p1.y() - p2.y(), p2.y() - p0.y(), p0.y() - p1.y()};
        const std::array<double, 3> c{p2.x() - p1.x(), p0.x() - p2.x(), p1.x() - p0.x()};
        const double rc = (p0.x() + p1.x() + p2.x()) / 3.0;
        const double scale = kTwoPi * rc / (4.0 * area);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                stiffness_[e][static_cast<std::size_t>(3 * i + j)] =
                    scale * (b[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(j)] +
                             c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)]);
                const int di = dof_[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])];
                const int dj = dof_[static_cast<std::size_t>(t[static_cast<std::size_t>(j)])];
                if (di >= 0 && dj >= 0) trip.emplace_back(di, dj, Complex(1.0));
            }
    }
    pattern_.resize(n_free_, n_free_);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slot_.resize(mesh_.triangles.size());
    for (std::size_t e = 0; e < mesh_.triangles.size(); ++e) {
        const auto& t = mesh_.triangles[e];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const int di = dof_[static_cast<std::size_t>(t[static_cast<std::size_t>(i)])];
                const int dj = dof_[static_cast<std::size_t>(t[static_cast<std::size_t>(j)])];
                slot_[e][static_cast<std::size_t>(3 * i + j)] =
                    (di >= 0 && dj >= 0) ? static_cast<int>(&pattern_.coeffRef(di, dj) - pattern_.valuePtr()) : -1;
            }
    }

    // Uniform normal current density J = 1/A over the contact; exact edge
    // integrals of N_i * 2*pi*r.
    load_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nn));
    for (const auto& edge : mesh_.source_edges) {
        const Eigen::Vector2d& a = mesh_.nodes[static_cast<std::size_t>(edge[0])];
        const Eigen::Vector2d& b = mesh_.nodes[static_cast<std::size_t>(edge[1])];
        const double len = (b - a).norm();
        source_area_ += kTwoPi * len * 0.5 * (a.x() + b.x());
        load_[edge[0]] += kTwoPi * len * (2.0 * a.x() + b.x()) / 6.0;
        load_[edge[1]] += kTwoPi * len * (a.x() + 2.0 * b.x()) / 6.0;
    }
    if (!(source_area_ > 0.0)) throw ConfigError("volume conductor: active contact has zero area");
    load_ /= source_area_;
    for (int g : mesh_.ground_nodes)
        if (load_[g] != 0.0) throw ConfigError("volume conductor: active contact touches the grounded boundary");
}

FieldSolution VolumeConductor::solve(const ComplexAdmittivity& sigma_enc, const ComplexAdmittivity& sigma_tissue,
                                     double omega) const
{
    check_admittivity(sigma_enc, "encapsulation");
    check_admittivity(sigma_tissue, "tissue");

    Eigen::SparseMatrix<Complex> a = pattern_;
    Complex* values = a.valuePtr();
    std::fill(values, values + a.nonZeros(), Complex(0.0));
    for (std::size_t e = 0; e < mesh_.triangles.size(); ++e) {
        const Complex s = mesh_.regions[e] == Region::Encapsulation ? sigma_enc.value : sigma_tissue.value;
        for (std::size_t k = 0; k < 9; ++k)
            if (slot_[e][k] >= 0) values[slot_[e][k]] += s * stiffness_[e][k];
    }

    Eigen::VectorXcd rhs(n_free_);
    for (std::size_t n = 0; n < dof_.size(); ++n)
        if (dof_[n] >= 0) rhs[dof_[n]] = load_[static_cast<Eigen::Index>(n)];

    Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw NumericalError("volume conductor: sparse factorisation failed (" + lu.lastErrorMessage() + ")");
    Eigen::VectorXcd x = lu.solve(rhs);
    const double tol = 1e-10 * rhs.norm();
    double res = (a * x - rhs).norm();
    if (!(res <= tol)) {
        x += lu.solve(rhs - a * x);
        res = (a * x - rhs).norm();
    }
    if (!(res <= tol))
        throw NumericalError("volume conductor: residual " + std::to_string(res / rhs.norm()) +
                             " exceeds 1e-10 relative");

    FieldSolution sol;
    sol.omega = omega;
    sol.phi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dof_.size()));
    for (std::size_t n = 0; n < dof_.size(); ++n)
        if (dof_[n] >= 0) sol.phi[static_cast<Eigen::Index>(n)] = x[dof_[n]];
    return sol;
}

Complex VolumeConductor::contact_potential(const FieldSolution& sol) const
{
    Complex v = 0.0;
    for (Eigen::Index n = 0; n < load_.size(); ++n) v += load_[n] * sol.phi[n];
    return v;
}

Complex VolumeConductor::dissipated_power(const FieldSolution& sol, const ComplexAdmittivity& sigma_enc,
                                          const ComplexAdmittivity& sigma_tissue) const
{
    Complex p = 0.0;
    for (std::size_t e = 0; e < mesh_.triangles.size(); ++e) {
        const auto& t = mesh_.triangles[e];
        double q = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                q += stiffness_[e][static_cast<std::size_t>(3 * i + j)] *
                     (std::conj(sol.phi[t[static_cast<std::size_t>(i)]]) * sol.phi[t[static_cast<std::size_t>(j)]]).real();
        p += (mesh_.regions[e] == Region::Encapsulation ? sigma_enc.value : sigma_tissue.value) * q;
    }
    return p;
}

FieldSolution assemble_solve(const Mesh& mesh, const ComplexAdmittivity& sigma_enc,
                             const ComplexAdmittivity& sigma_tissue, double omega)
{
    return VolumeConductor(mesh).solve(sigma_enc, sigma_tissue, omega);
}

Complex point_source_oracle(Complex sigma, double r)
{
    if (!(r > 0.0)) throw std::invalid_argument("point_source_oracle: r must be positive");
    if (sigma == Complex(0.0)) throw std::invalid_argument("point_source_oracle: sigma must be nonzero");
    return 1.0 / (4.0 * std::numbers::pi * sigma * r);
}

Probe::Probe(const Mesh& mesh, std::span<const Eigen::Vector2d> points)
{
    if (mesh.triangles.empty()) throw std::invalid_argument("probe: empty mesh");
    Eigen::Vector2d lo = mesh.nodes.front(), hi = mesh.nodes.front();
    for (const auto& p : mesh.nodes) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const auto nb = static_cast<int>(std::clamp(std::sqrt(static_cast<double>(mesh.triangles.size())), 1.0, 512.0));
    const Eigen::Vector2d cell = ((hi - lo) / nb).cwiseMax(Eigen::Vector2d::Constant(1e-300));
    auto bucket = [&](double v, int axis) {
        return std::clamp(static_cast<int>((v - lo[axis]) / cell[axis]), 0, nb - 1);
    };
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(nb * nb));
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        Eigen::Vector2d tlo = mesh.nodes[static_cast<std::size_t>(mesh.triangles[e][0])], thi = tlo;
        for (int k : mesh.triangles[e]) {
            tlo = tlo.cwiseMin(mesh.nodes[static_cast<std::size_t>(k)]);
            thi = thi.cwiseMax(mesh.nodes[static_cast<std::size_t>(k)]);
        }
        for (int i = bucket(tlo.x(), 0); i <= bucket(thi.x(), 0); ++i)
            for (int j = bucket(tlo.y(), 1); j <= bucket(thi.y(), 1); ++j)
                buckets[static_cast<std::size_t>(j * nb + i)].push_back(static_cast<int>(e));
    }

    element_.reserve(points.size());
    weight_.reserve(points.size());
    for (const auto& p : points) {
        const auto& cand = buckets[static_cast<std::size_t>(bucket(p.y(), 1) * nb + bucket(p.x(), 0))];
        double best = -std::numeric_limits<double>::infinity();
        std::array<int, 3> best_t{};
        std::array<double, 3> best_w{};
        for (int e : cand) {
            const auto& t = mesh.triangles[static_cast<std::size_t>(e)];
            const Eigen::Vector2d& p0 = mesh.nodes[static_cast<std::size_t>(t[0])];
            const Eigen::Vector2d u = mesh.nodes[static_cast<std::size_t>(t[1])] - p0;
            const Eigen::Vector2d v = mesh.nodes[static_cast<std::size_t>(t[2])] - p0;
            const Eigen::Vector2d d = p - p0;
            const double det = u.x() * v.y() - u.y() * v.x();
            const double l1 = (d.x() * v.y() - d.y() * v.x()) / det;
            const double l2 = (u.x() * d.y() - u.y() * d.x()) / det;
            const double l0 = 1.0 - l1 - l2;
            const double m = std::min({l0, l1, l2});
            if (m > best) {
                best = m;
                best_t = t;
                best_w = {l0, l1, l2};
            }
            if (m >= 0.0) break;
        }
        if (!(best >= -1e-9))
            throw std::out_of_range("probe: point (" + std::to_string(p.x()) + ", " + std::to_string(p.y()) +
                                    ") lies outside the mesh");
        for (double& w : best_w) w = std::max(w, 0.0);
        const double s = best_w[0] + best_w[1] + best_w[2];
        for (double& w : best_w) w /= s;
        element_.push_back(best_t);
        weight_.push_back(best_w);
    }
}

Eigen::VectorXcd Probe::eval(const FieldSolution& sol) const
{
    Eigen::VectorXcd out(static_cast<Eigen::Index>(element_.size()));
    for (std::size_t k = 0; k < element_.size(); ++k) {
        Complex v = 0.0;
        for (std::size_t i = 0; i < 3; ++i) v += weight_[k][i] * sol.phi[element_[k][i]];
        out[static_cast<Eigen::Index>(k)] = v;
    }
    return out;
}

Eigen::VectorXcd eval_at_points(const FieldSolution& sol, const Mesh& mesh, std::span<const Eigen::Vector2d> points)
{
    return Probe(mesh, points).eval(sol);
}

}  // namespace dbsuq
