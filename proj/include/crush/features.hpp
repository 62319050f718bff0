/**
 * @file features.hpp
 * @brief Particle morphology descriptors (PMD), fragment node and edge
 *        features, and centroid distance features.
 *
 * The PMD names, order, units and formulas live in data/pmd_registry.csv,
 * which is compiled into the library.
 */
#pragma once

#include "crush/tessellation.hpp"

#include <array>
#include <string>
#include <vector>

namespace crush::features {

constexpr int kPmdCount = 35;
constexpr int kNodeFeatureCount = 11;
constexpr int kEdgeFeatureCount = 9;
constexpr int kDistanceCount = 8;

struct Descriptor {
    std::string name;
    std::string category;  ///< geometric, form, roundness, sphericity, instability
    std::string unit;
    std::string formula;
};

/// Parsed registry, in PMD order.
const std::vector<Descriptor>& registry();
/// Registry version from the file header.
int registry_version();

using PmdVector = std::array<double, kPmdCount>;

/// Index of a descriptor by name; throws Config for unknown names.
int pmd_index(const std::string& name);

PmdVector compute_pmd(const geometry::ConvexPolyhedron& particle);

using NodeFeatures = std::array<double, kNodeFeatureCount>;
using EdgeFeatures = std::array<double, kEdgeFeatureCount>;

const std::array<const char*, kNodeFeatureCount>& node_feature_names();
const std::array<const char*, kEdgeFeatureCount>& edge_feature_names();

/// volume, surface_area, diameter, n_faces, n_neighbors, centroid xyz, euler zxz.
NodeFeatures compute_node_features(const tessellation::FragmentMesh& mesh, int cell);
/// contact_area, n_lines, max_length, centroid xyz, euler zxz of the face frame.
/// The face normal points from the lower to the higher cell index.
EdgeFeatures compute_edge_features(const tessellation::FragmentMesh& mesh, int edge);

using DistanceVector = std::array<double, kDistanceCount>;

struct DistanceFeatures {
    std::vector<DistanceVector> per_node;  ///< largest distances to other cell centroids
    DistanceVector per_particle{};         ///< largest centroid pair distances
};

/// Descending, zero padded. Throws DegenerateGeometry for fewer than 2 cells.
DistanceFeatures distance_features(const tessellation::FragmentMesh& mesh);

}  // namespace crush::features
