/**
 * @file geometry.hpp
 * @brief Convex polyhedra: construction, half-space clipping, integral
 *        measures, principal axes and sphere bounds.
 *
 * Everything here is double precision and value-semantic. Face rings are
 * counter-clockwise when seen from outside, so the right-hand normal of a
 * ring points out of the solid.
 */
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace crush::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Tolerances used by all geometry routines (lengths in mm).
namespace tol {
constexpr double kCoplanar = 1e-9;       ///< vertex-to-plane distance for "on plane"
constexpr double kRelPlane = 1e-11;      ///< clip classification, relative to model size
constexpr double kMinFaceArea = 1e-9;    ///< shared faces below this area are not contacts
constexpr double kEigenTie = 1e-12;      ///< relative eigenvalue gap treated as a tie
constexpr double kInscribed = 1e-9;      ///< LP optimality tolerance
}  // namespace tol

/// Face tag for faces that belong to the particle boundary.
constexpr int kExternalFace = -1;

struct Plane {
    Vec3 normal;          ///< unit outward normal
    double offset = 0.0;  ///< half-space is {x : normal.x <= offset}
    int tag = kExternalFace;

    double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
    Plane flipped() const { return {-normal, -offset, tag}; }
};

class ConvexPolyhedron {
public:
    ConvexPolyhedron() = default;
    ConvexPolyhedron(std::vector<Vec3> vertices, std::vector<std::vector<int>> faces,
                     std::vector<int> face_tags = {});

    /// Axis-aligned box [lo, hi].
    static ConvexPolyhedron box(const Vec3& lo, const Vec3& hi);
    /// Convex hull of a point cloud (coplanar facets merged into polygons).
    static ConvexPolyhedron hull(std::span<const Vec3> points);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::vector<int>>& faces() const { return faces_; }
    const std::vector<int>& face_tags() const { return tags_; }

    std::size_t num_faces() const { return faces_.size(); }
    bool empty() const { return faces_.empty(); }

    std::vector<Vec3> face_points(std::size_t f) const;
    Vec3 face_normal(std::size_t f) const;
    double face_area(std::size_t f) const;
    Plane face_plane(std::size_t f) const;

    /// Point membership with a signed slack (positive slack grows the body).
    bool contains(const Vec3& p, double slack = 0.0) const;

    /// Returns x -> rotation * x + translation applied to every vertex.
    ConvexPolyhedron transformed(const Mat3& rotation, const Vec3& translation) const;
    ConvexPolyhedron scaled(double s) const;

    /// Throws Error(DegenerateGeometry) describing the first violated invariant.
    void validate() const;

private:
    std::vector<Vec3> vertices_;
    std::vector<std::vector<int>> faces_;
    std::vector<int> tags_;
};

/// poly ∩ {x : n.x <= offset}. std::nullopt means the result is empty.
/// The new cap face, if any, carries plane.tag.
std::optional<ConvexPolyhedron> clip(const ConvexPolyhedron& poly, const Plane& plane);

struct Measures {
    double volume = 0.0;
    double surface_area = 0.0;
    Vec3 centroid = Vec3::Zero();
    Mat3 second_moment = Mat3::Zero();   ///< ∫ (x-c)(x-c)^T dV
    Mat3 inertia_tensor = Mat3::Zero();  ///< unit density, about the centroid
    double diameter = 0.0;               ///< max pairwise vertex distance
};

Measures measure(const ConvexPolyhedron& poly);

struct PrincipalAxes {
    Vec3 euler_angles = Vec3::Zero();  ///< ZXZ, radians in [-pi, pi]
    Vec3 semi_lengths = Vec3::Zero();  ///< (L, I, S) half extents, L >= I >= S
    Mat3 axes = Mat3::Identity();      ///< columns: long, intermediate, short axis
    Vec3 variances = Vec3::Zero();     ///< covariance eigenvalues in axis order
    Mat3 covariance = Mat3::Zero();    ///< solid covariance (second moment / volume)
};

/// Axes of the solid covariance; see DESIGN notes in the README for tie handling.
PrincipalAxes principal_axes(const ConvexPolyhedron& poly);

struct SphereBounds {
    double inscribed_diameter = 0.0;
    double circumscribed_diameter = 0.0;
    Vec3 inscribed_center = Vec3::Zero();
    Vec3 circumscribed_center = Vec3::Zero();
};

SphereBounds sphere_bounds(const ConvexPolyhedron& poly);

/// Minimum enclosing ball (center, radius) of a point set.
std::pair<Vec3, double> min_enclosing_ball(std::span<const Vec3> points);

struct EllipsoidSpec {
    double diameter = 1.0;             ///< reference sphere diameter d (mm)
    Vec3 scale = Vec3::Ones();         ///< (sx, sy, sz)
    int facet_count = 320;

    Vec3 semi_axes() const { return scale * (0.5 * diameter); }
};

ConvexPolyhedron ellipsoid_polyhedron(const EllipsoidSpec& spec);

/// ZXZ Euler angles of a proper rotation, R = Rz(a) Rx(b) Rz(c).
Vec3 euler_zxz(const Mat3& rotation);
Mat3 rotation_zxz(const Vec3& angles);

/// Planar polygon (ordered ring) measures.
struct PolygonMeasures {
    double area = 0.0;
    Vec3 centroid = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    int n_lines = 0;
    double max_length = 0.0;
    Mat3 frame = Mat3::Identity();  ///< columns: principal in-plane axis, second axis, normal
};

PolygonMeasures polygon_measures(std::span<const Vec3> ring);

}  // namespace crush::geometry
