#include "dbsuq/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>

#include "dbsuq/errors.hpp"

namespace dbsuq {

void Geometry::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("geometry: ") + name + " must be positive");
    };
    positive(lead_radius, "lead_radius");
    positive(contact_height, "contact_height");
    positive(contact_gap, "contact_gap");
    positive(tip_length, "tip_length");
    positive(encapsulation_thickness, "encapsulation_thickness");
    positive(domain_radius, "domain_radius");
    positive(domain_height, "domain_height");
    if (n_contacts < 1) throw ConfigError("geometry: n_contacts must be >= 1");
    if (active_contact_index < 1 || active_contact_index > n_contacts)
        throw ConfigError("geometry: active_contact_index out of range");
    if (lead_radius + encapsulation_thickness >= domain_radius)
        throw ConfigError("geometry: lead plus encapsulation must be thinner than the domain radius");
    if (tip_z() - encapsulation_thickness <= -0.5 * domain_height)
        throw ConfigError("geometry: lead tip and encapsulation extend below the domain");
    if (contact_top(n_contacts) >= 0.5 * domain_height)
        throw ConfigError("geometry: contacts extend above the domain");
}

double Geometry::tip_z() const
{
    return -(tip_length + (active_contact_index - 1) * (contact_height + contact_gap) + 0.5 * contact_height);
}

double Geometry::contact_bottom(int contact) const
{
    return tip_z() + tip_length + (contact - 1) * (contact_height + contact_gap);
}

double Geometry::contact_top(int contact) const { return contact_bottom(contact) + contact_height; }

double Mesh::area(std::size_t e) const
{
    const auto& t = triangles[e];
    const Eigen::Vector2d a = nodes[static_cast<std::size_t>(t[1])] - nodes[static_cast<std::size_t>(t[0])];
    const Eigen::Vector2d b = nodes[static_cast<std::size_t>(t[2])] - nodes[static_cast<std::size_t>(t[0])];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

double Mesh::diameter(std::size_t e) const
{
    const auto& t = triangles[e];
    double d = 0.0;
    for (int k = 0; k < 3; ++k)
        d = std::max(d, (nodes[static_cast<std::size_t>(t[k])] - nodes[static_cast<std::size_t>(t[(k + 1) % 3])]).norm());
    return d;
}

double Mesh::max_diameter_at_source() const
{
    std::set<int> on_source;
    for (const auto& e : source_edges) on_source.insert(e.begin(), e.end());
    double d = 0.0;
    for (std::size_t e = 0; e < triangles.size(); ++e) {
        const auto& t = triangles[e];
        if (std::any_of(t.begin(), t.end(), [&](int n) { return on_source.count(n) > 0; }))
            d = std::max(d, diameter(e));
    }
    return d;
}

void Mesh::check_invariants() const
{
    const auto n = static_cast<int>(nodes.size());
    if (regions.size() != triangles.size()) throw std::logic_error("mesh: region tags do not cover all elements");
    for (const auto& p : nodes)
        if (!(p.x() >= 0.0) || !std::isfinite(p.y())) throw std::logic_error("mesh: node with r < 0 or non-finite");
    // Each interior edge is shared by exactly two triangles with opposite
    // orientation; boundary edges by one.
    std::set<std::pair<int, int>> directed;
    for (std::size_t e = 0; e < triangles.size(); ++e) {
        const auto& t = triangles[e];
        for (int k : t)
            if (k < 0 || k >= n) throw std::logic_error("mesh: triangle index out of range");
        if (!(area(e) > 0.0)) throw std::logic_error("mesh: non-positive triangle area");
        for (int k = 0; k < 3; ++k)
            if (!directed.insert({t[k], t[(k + 1) % 3]}).second)
                throw std::logic_error("mesh: non-conforming edge");
    }
    std::vector<char> used(nodes.size(), 0);
    for (const auto& t : triangles)
        for (int k : t) used[static_cast<std::size_t>(k)] = 1;
    if (std::find(used.begin(), used.end(), 0) != used.end()) throw std::logic_error("mesh: orphan node");
    for (const auto& e : source_edges)
        if (!directed.count({e[0], e[1]}) && !directed.count({e[1], e[0]}))
            throw std::logic_error("mesh: source edge is not a mesh edge");
}

namespace {

// Subdivide [lo, hi] so that the spacing follows the size function h:
// nodes equidistribute the integral of 1/h. At least min_cells cells.
void subdivide(double lo, double hi, const std::function<double(double)>& h, int min_cells,
               std::vector<double>& out)
{
    constexpr int kQuad = 256;
    std::vector<double> cum(kQuad + 1, 0.0);
    const double dx = (hi - lo) / kQuad;
    for (int k = 0; k < kQuad; ++k) {
        const double x0 = lo + k * dx;
        cum[static_cast<std::size_t>(k + 1)] = cum[static_cast<std::size_t>(k)] + 0.5 * dx * (1.0 / h(x0) + 1.0 / h(x0 + dx));
    }
    const int n = std::max(min_cells, static_cast<int>(std::ceil(cum.back() - 1e-9)));
    out.push_back(lo);
    for (int i = 1; i < n; ++i) {
        const double target = cum.back() * i / n;
        const auto it = std::lower_bound(cum.begin(), cum.end(), target);
        const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cum.begin()));
        const double frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
        out.push_back(lo + (static_cast<double>(k - 1) + frac) * dx);
    }
}

std::vector<double> graded_line(const std::vector<double>& breaks, const std::function<double(double)>& h,
                                const std::function<int(double, double)>& min_cells)
{
    std::vector<double> x;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) subdivide(breaks[k], breaks[k + 1], h, min_cells(breaks[k], breaks[k + 1]), x);
    x.push_back(breaks.back());
    return x;
}

struct Lines {
    std::vector<double> r, z;
};

Lines mesh_lines(const Geometry& g, const MeshOptions& o, double scale)
{
    const double a = g.lead_radius, t = g.encapsulation_thickness;
    const double h0 = o.base_size * scale, hp = o.probe_size * scale;
    const double zb = g.contact_bottom(g.active_contact_index), zt = g.contact_top(g.active_contact_index);
    const double tip = g.tip_z();

    auto hr = [&](double r) {
        const double dist = r < a ? a - r : std::max(0.0, r - a - t);
        double h = h0 + o.growth * dist;
        if (r <= o.probe_radius) h = std::min(h, std::max(h0, hp));
        return h;
    };
    auto hz = [&](double z) { return h0 + o.growth * std::max({0.0, zb - z, z - zt}); };

    std::vector<double> rb{0.0, a, a + t};
    if (o.probe_radius > a + t && o.probe_radius < g.domain_radius) rb.push_back(o.probe_radius);
    rb.push_back(g.domain_radius);
    std::vector<double> zbk{-0.5 * g.domain_height, tip - t, tip, zb, 0.0, zt, 0.5 * g.domain_height};
    std::sort(zbk.begin(), zbk.end());
    zbk.erase(std::unique(zbk.begin(), zbk.end()), zbk.end());

    const int layers = o.min_encapsulation_layers;
    auto r_min = [&](double lo, double hi) { return (lo == a && hi == a + t) ? layers : 1; };
    auto z_min = [&](double lo, double hi) { return (lo == tip - t && hi == tip) ? layers : 1; };
    return {graded_line(rb, hr, r_min), graded_line(zbk, hz, z_min)};
}

std::size_t index_of(const std::vector<double>& v, double x)
{
    const auto it = std::find(v.begin(), v.end(), x);
    if (it == v.end()) throw std::logic_error("mesh: breakpoint missing from line");
    return static_cast<std::size_t>(it - v.begin());
}

std::size_t count_elements(const Geometry& g, const Lines& l)
{
    const std::size_t ia = index_of(l.r, g.lead_radius);
    const std::size_t itip = index_of(l.z, g.tip_z());
    const std::size_t nr = l.r.size() - 1, nz = l.z.size() - 1;
    return 2 * (nr * nz - ia * (nz - itip));
}

}  // namespace

Mesh build_mesh(const Geometry& g, std::size_t target_elements, const MeshOptions& o)
{
    g.validate();
    if (target_elements < 50) throw ConfigError("mesh: target_elements must be >= 50");
    if (o.min_encapsulation_layers < 1 || !(o.growth > 0.0) || !(o.base_size > 0.0) || !(o.probe_size > 0.0))
        throw ConfigError("mesh: invalid mesh options");
    if (g.encapsulation_thickness / o.min_encapsulation_layers < o.min_element_size)
        throw ConfigError("mesh: encapsulation layer thinner than the minimum element size allows");

    // Element count decreases monotonically with the scale; bisect in log scale.
    const auto target = static_cast<double>(target_elements);
    double lo = std::log(1e-4), hi = std::log(1e4);
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double c = static_cast<double>(count_elements(g, mesh_lines(g, o, std::exp(mid))));
        (c > target ? lo : hi) = mid;
    }
    double scale = std::exp(hi);
    Lines lines = mesh_lines(g, o, scale);
    {
        const Lines alt = mesh_lines(g, o, std::exp(lo));
        const auto ca = static_cast<double>(count_elements(g, alt));
        const auto cb = static_cast<double>(count_elements(g, lines));
        if (std::abs(ca - target) < std::abs(cb - target)) {
            lines = alt;
            scale = std::exp(lo);
        }
    }
    if (o.base_size * scale < o.min_element_size)
        throw ConfigError("mesh: target element count requires elements below the minimum element size");
    const auto count = static_cast<double>(count_elements(g, lines));
    if (std::abs(count - target) > 0.2 * target)
        throw NumericalError("mesh: cannot reach target element count " + std::to_string(target_elements) +
                             " (closest " + std::to_string(static_cast<std::size_t>(count)) + ")");

    const auto& r = lines.r;
    const auto& z = lines.z;
    const std::size_t nr = r.size(), nz = z.size();
    const std::size_t ia = index_of(r, g.lead_radius);
    const std::size_t itip = index_of(z, g.tip_z());
    const double a_t = g.lead_radius + g.encapsulation_thickness;
    const double z_enc = g.tip_z() - g.encapsulation_thickness;

    auto inside_lead = [&](std::size_t i, std::size_t j) { return i < ia && j >= itip; };  // cell (i, j)

    Mesh m;
    std::vector<int> id(nr * nz, -1);
    auto node = [&](std::size_t i, std::size_t j) {
        int& k = id[j * nr + i];
        if (k < 0) {
            k = static_cast<int>(m.nodes.size());
            m.nodes.emplace_back(r[i], z[j]);
        }
        return k;
    };
    for (std::size_t j = 0; j + 1 < nz; ++j) {
        for (std::size_t i = 0; i + 1 < nr; ++i) {
            if (inside_lead(i, j)) continue;
            const int n00 = node(i, j), n10 = node(i + 1, j), n11 = node(i + 1, j + 1), n01 = node(i, j + 1);
            const double rc = 0.5 * (r[i] + r[i + 1]), zc = 0.5 * (z[j] + z[j + 1]);
            const Region reg = (rc < a_t && zc > z_enc) ? Region::Encapsulation : Region::Tissue;
            // Alternate the diagonal to avoid a directional bias.
            if ((i + j) % 2 == 0) {
                m.triangles.push_back({n00, n10, n11});
                m.triangles.push_back({n00, n11, n01});
            } else {
                m.triangles.push_back({n00, n10, n01});
                m.triangles.push_back({n10, n11, n01});
            }
            m.regions.push_back(reg);
            m.regions.push_back(reg);
        }
    }

    const double zb = g.contact_bottom(g.active_contact_index), zt = g.contact_top(g.active_contact_index);
    for (std::size_t j = itip; j + 1 < nz; ++j)
        if (z[j] >= zb && z[j + 1] <= zt) m.source_edges.push_back({id[j * nr + ia], id[(j + 1) * nr + ia]});

    for (std::size_t j = 0; j < nz; ++j)
        for (std::size_t i = 0; i < nr; ++i) {
            const int k = id[j * nr + i];
            if (k >= 0 && (i + 1 == nr || j == 0 || j + 1 == nz)) m.ground_nodes.push_back(k);
        }
    std::sort(m.ground_nodes.begin(), m.ground_nodes.end());
    return m;
}

Mesh build_sphere_mesh(double r_inner, double r_outer, std::size_t radial_layers, std::size_t angular_divisions)
{
    if (!(r_inner > 0.0) || !(r_outer > r_inner)) throw ConfigError("sphere mesh: need 0 < r_inner < r_outer");
    if (radial_layers < 1 || angular_divisions < 2) throw ConfigError("sphere mesh: too few divisions");
    const std::size_t nrho = radial_layers + 1, nth = angular_divisions + 1;
    const double q = std::pow(r_outer / r_inner, 1.0 / static_cast<double>(radial_layers));

    Mesh m;
    for (std::size_t i = 0; i < nrho; ++i) {
        const double rho = i + 1 == nrho ? r_outer : r_inner * std::pow(q, static_cast<double>(i));
        for (std::size_t j = 0; j < nth; ++j) {
            const double th = std::numbers::pi * static_cast<double>(j) / static_cast<double>(angular_divisions);
            const double rr = (j == 0 || j + 1 == nth) ? 0.0 : rho * std::sin(th);
            m.nodes.emplace_back(rr, rho * std::cos(th));
        }
    }
    auto id = [&](std::size_t i, std::size_t j) { return static_cast<int>(i * nth + j); };
    for (std::size_t i = 0; i + 1 < nrho; ++i)
        for (std::size_t j = 0; j + 1 < nth; ++j) {
            std::array<int, 3> t1{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
            std::array<int, 3> t2{id(i, j), id(i + 1, j + 1), id(i, j + 1)};
            for (auto t : {t1, t2}) {
                m.triangles.push_back(t);
                m.regions.push_back(Region::Tissue);
                if (m.area(m.triangles.size() - 1) < 0.0) std::swap(m.triangles.back()[1], m.triangles.back()[2]);
            }
        }
    for (std::size_t j = 0; j + 1 < nth; ++j) m.source_edges.push_back({id(0, j), id(0, j + 1)});
    for (std::size_t j = 0; j < nth; ++j) m.ground_nodes.push_back(id(nrho - 1, j));
    return m;
}

void write_mesh_csv(const Mesh& mesh, std::ostream& nodes, std::ostream& triangles)
{
    nodes.precision(17);
    nodes << "id,r,z\n";
    for (std::size_t k = 0; k < mesh.nodes.size(); ++k)
        nodes << k << ',' << mesh.nodes[k].x() << ',' << mesh.nodes[k].y() << '\n';
    triangles << "id,n0,n1,n2,region\n";
    for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
        const auto& t = mesh.triangles[e];
        triangles << e << ',' << t[0] << ',' << t[1] << ',' << t[2] << ','
                  << (mesh.regions[e] == Region::Encapsulation ? "encapsulation" : "tissue") << '\n';
    }
}

}  // namespace dbsuq
