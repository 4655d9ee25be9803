#pragma once

// Structured triangulations of the meridian half-plane (r >= 0, z) for the
// axisymmetric volume-conductor problem.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace dbsuq {

// Simplified cylindrical DBS lead with band contacts. Contacts are numbered
// from the distal end (1 = closest to the tip). The active contact centre
// sits at z = 0; the lead runs along the axis up through the top boundary.
struct Geometry {
    double lead_radius = 0.635e-3;
    double contact_height = 1.5e-3;
    double contact_gap = 1.5e-3;
    int n_contacts = 4;
    int active_contact_index = 2;
    double tip_length = 1.5e-3;  // insulated tip below the distal contact
    double encapsulation_thickness = 0.2e-3;
    double domain_radius = 50e-3;
    double domain_height = 100e-3;

    void validate() const;

    double tip_z() const;
    double contact_bottom(int contact) const;  // 1-based
    double contact_top(int contact) const;
};

enum class Region : std::uint8_t { Encapsulation = 0, Tissue = 1 };

struct Mesh {
    std::vector<Eigen::Vector2d> nodes;  // (r, z) [m]
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<Region> regions;
    std::vector<std::array<int, 2>> source_edges;  // current-injection surface
    std::vector<int> ground_nodes;  // sorted, phi = 0

    std::size_t element_count() const { return triangles.size(); }
    double area(std::size_t element) const;
    double diameter(std::size_t element) const;  // longest edge

    // Largest diameter among elements touching the source surface.
    double max_diameter_at_source() const;

    // Throws std::logic_error if an invariant is broken.
    void check_invariants() const;
};

struct MeshOptions {
    double growth = 0.2;            // element size growth per unit distance
    double base_size = 20e-6;       // element size at the active contact (before scaling)
    double probe_size = 0.1e-3;     // cap on radial size along the axon plane (before scaling)
    double probe_radius = 12e-3;    // radial extent of the capped region
    double min_element_size = 1e-7;
    int min_encapsulation_layers = 3;
};

// Graded tensor-product triangulation refined toward the active contact.
// The scale of the size function is searched so the element count lands
// within +-20% of target_elements.
Mesh build_mesh(const Geometry& geom, std::size_t target_elements, const MeshOptions& opts = {});

// Validation geometry: spherical electrode of radius r_inner centred at the
// origin, grounded concentric sphere of radius r_outer, one homogeneous region.
Mesh build_sphere_mesh(double r_inner, double r_outer, std::size_t radial_layers,
                       std::size_t angular_divisions);

void write_mesh_csv(const Mesh& mesh, std::ostream& nodes, std::ostream& triangles);

}  // namespace dbsuq
