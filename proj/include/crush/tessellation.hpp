/**
 * @file tessellation.hpp
 * @brief Seeded Voronoi tessellation of a particle into convex fragment cells.
 *
 * Cells are built by clipping the particle polyhedron with the bisector
 * half-spaces of every other seed. Each bisector face keeps the index of the
 * neighbouring seed as its face tag, which is how adjacency is recovered.
 */
#pragma once

#include "crush/geometry.hpp"
#include "crush/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace crush::tessellation {

using geometry::ConvexPolyhedron;
using geometry::EllipsoidSpec;
using geometry::Vec3;

/// Shared face between two cells; `face` is counter-clockwise seen from cell j,
/// i.e. its right-hand normal points from cell i towards cell j.
struct Adjacency {
    int i = 0;
    int j = 0;
    std::vector<Vec3> face;
};

struct FragmentMesh {
    EllipsoidSpec particle;
    ConvexPolyhedron boundary;
    std::vector<ConvexPolyhedron> cells;
    std::vector<Vec3> seeds;
    std::vector<Adjacency> adjacency;
    std::uint64_t rng_seed = 0;
    int lloyd_iterations = 0;
    std::vector<double> lloyd_displacements;

    std::size_t size() const { return cells.size(); }
    /// Adjacency degree per cell.
    std::vector<int> degrees() const;
    bool connected() const;
    /// Same mesh expressed in a rotated frame (x -> rotation * x).
    FragmentMesh rotated(const geometry::Mat3& rotation) const;
};

/// Cell count for a particle of diameter d: round(8 (d / 11.86)^3) clamped to [8, 216].
int cell_count(double diameter);

/// Uniform seeds strictly inside the particle polyhedron.
std::vector<Vec3> generate_seeds(const EllipsoidSpec& spec, std::uint64_t rng_seed);
std::vector<Vec3> generate_seeds(const EllipsoidSpec& spec, const ConvexPolyhedron& particle,
                                 std::uint64_t rng_seed);

FragmentMesh voronoi(const EllipsoidSpec& spec, std::span<const Vec3> seeds, std::uint64_t rng_seed = 0);
FragmentMesh voronoi(const EllipsoidSpec& spec, const ConvexPolyhedron& particle,
                     std::span<const Vec3> seeds, std::uint64_t rng_seed = 0);

/// Centroidal refinement: seeds move to cell centroids until the largest move
/// drops below `tol` or `max_iters` re-tessellations have been done.
FragmentMesh lloyd_refine(const FragmentMesh& mesh, int max_iters = 50, double tol = -1.0);

struct TessellationOptions {
    int facet_count = 320;
    bool lloyd = true;
    int lloyd_max_iters = 50;
    double lloyd_tol_fraction = 1e-3;  ///< tolerance as a fraction of the diameter
};

/// generate_seeds + voronoi (+ lloyd_refine).
FragmentMesh tessellate(EllipsoidSpec spec, std::uint64_t rng_seed, const TessellationOptions& opts = {});

constexpr const char* kTessellationSchema = "crush.tessellation/1";

nlohmann::json to_json(const FragmentMesh& mesh);
FragmentMesh mesh_from_json(const nlohmann::json& j);

}  // namespace crush::tessellation
