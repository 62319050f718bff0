/**
 * @file geometry.cpp
 * @brief Convex polyhedron primitives.
 */

#include "crush/geometry.hpp"

#include "crush/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace crush::geometry {

namespace {

double model_scale(const std::vector<Vec3>& pts) {
    double s = 1.0;
    for (const auto& p : pts) s = std::max(s, p.cwiseAbs().maxCoeff());
    return s;
}

// Newell's method: twice the vector area of a (possibly non-planar) ring.
Vec3 newell(const std::vector<Vec3>& ring) {
    Vec3 n = Vec3::Zero();
    for (std::size_t i = 0; i < ring.size(); ++i) n += ring[i].cross(ring[(i + 1) % ring.size()]);
    return n;
}

// Sorts coplanar points counter-clockwise about `normal`, dropping near duplicates.
std::vector<int> sort_ring(const std::vector<Vec3>& pts, const std::vector<int>& ids,
                           const Vec3& normal, double merge_tol) {
    Vec3 center = Vec3::Zero();
    for (int id : ids) center += pts[id];
    center /= static_cast<double>(ids.size());
    Vec3 u = normal.unitOrthogonal();
    Vec3 w = normal.cross(u);
    std::vector<std::pair<double, int>> order;
    order.reserve(ids.size());
    for (int id : ids) {
        Vec3 d = pts[id] - center;
        order.emplace_back(std::atan2(d.dot(w), d.dot(u)), id);
    }
    std::sort(order.begin(), order.end());
    std::vector<int> ring;
    for (const auto& [angle, id] : order) {
        if (!ring.empty() && (pts[ring.back()] - pts[id]).norm() <= merge_tol) continue;
        ring.push_back(id);
    }
    if (ring.size() > 1 && (pts[ring.front()] - pts[ring.back()]).norm() <= merge_tol) ring.pop_back();
    return ring;
}

// Drops unreferenced vertices and renumbers face rings.
ConvexPolyhedron compact(const std::vector<Vec3>& verts, std::vector<std::vector<int>> faces,
                         std::vector<int> tags) {
    std::vector<int> remap(verts.size(), -1);
    std::vector<Vec3> out;
    for (auto& ring : faces) {
        for (int& v : ring) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(out.size());
                out.push_back(verts[v]);
            }
            v = remap[v];
        }
    }
    return ConvexPolyhedron(std::move(out), std::move(faces), std::move(tags));
}

// ---------------------------------------------------------------------------
// Incremental hull producing outward triangles.
// ---------------------------------------------------------------------------

using Tri = std::array<int, 3>;

double tri_side(const std::vector<Vec3>& p, const Tri& t, const Vec3& q) {
    Vec3 n = (p[t[1]] - p[t[0]]).cross(p[t[2]] - p[t[0]]);
    double len = n.norm();
    if (len == 0.0) return 0.0;
    return n.dot(q - p[t[0]]) / len;
}

std::vector<Tri> hull_triangles(const std::vector<Vec3>& p) {
    const std::size_t n = p.size();
    if (n < 4) throw Error(ErrorKind::DegenerateGeometry, "hull needs at least 4 points");
    const double eps = 1e-12 * model_scale(p);

    std::size_t i0 = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (p[i].x() < p[i0].x()) i0 = i;
    std::size_t i1 = i0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = (p[i] - p[i0]).squaredNorm();
        if (d > best) best = d, i1 = i;
    }
    std::size_t i2 = i0;
    best = 0.0;
    Vec3 dir = (p[i1] - p[i0]).normalized();
    for (std::size_t i = 0; i < n; ++i) {
        double d = (p[i] - p[i0]).cross(dir).squaredNorm();
        if (d > best) best = d, i2 = i;
    }
    std::size_t i3 = i0;
    best = 0.0;
    Vec3 nrm = (p[i1] - p[i0]).cross(p[i2] - p[i0]).normalized();
    for (std::size_t i = 0; i < n; ++i) {
        double d = std::abs(nrm.dot(p[i] - p[i0]));
        if (d > best) best = d, i3 = i;
    }
    if (best <= eps || i1 == i0 || i2 == i0)
        throw Error(ErrorKind::DegenerateGeometry, "hull points are coplanar");

    const int a = static_cast<int>(i0), b = static_cast<int>(i1), c = static_cast<int>(i2),
              d = static_cast<int>(i3);
    Vec3 interior = (p[a] + p[b] + p[c] + p[d]) / 4.0;
    std::vector<Tri> tris = {Tri{a, b, c}, Tri{a, b, d}, Tri{a, c, d}, Tri{b, c, d}};
    for (auto& t : tris)
        if (tri_side(p, t, interior) > 0) std::swap(t[1], t[2]);

    std::vector<char> used(n, 0);
    used[i0] = used[i1] = used[i2] = used[i3] = 1;
    for (std::size_t q = 0; q < n; ++q) {
        if (used[q]) continue;
        std::vector<char> visible(tris.size(), 0);
        bool any = false;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (tri_side(p, tris[t], p[q]) > eps) visible[t] = 1, any = true;
        }
        if (!any) continue;
        std::set<std::pair<int, int>> edges;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            if (!visible[t]) continue;
            for (int k = 0; k < 3; ++k) edges.emplace(tris[t][k], tris[t][(k + 1) % 3]);
        }
        std::vector<Tri> next;
        next.reserve(tris.size() + 8);
        for (std::size_t t = 0; t < tris.size(); ++t)
            if (!visible[t]) next.push_back(tris[t]);
        for (const auto& [u, v] : edges) {
            if (edges.count({v, u})) continue;
            next.push_back(Tri{u, v, static_cast<int>(q)});
        }
        tris = std::move(next);
    }
    return tris;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvexPolyhedron
// ---------------------------------------------------------------------------

ConvexPolyhedron::ConvexPolyhedron(std::vector<Vec3> vertices, std::vector<std::vector<int>> faces,
                                   std::vector<int> face_tags)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), tags_(std::move(face_tags)) {
    if (tags_.empty()) tags_.assign(faces_.size(), kExternalFace);
    if (tags_.size() != faces_.size())
        throw Error(ErrorKind::DegenerateGeometry, "face tag count does not match face count");
}

ConvexPolyhedron ConvexPolyhedron::box(const Vec3& lo, const Vec3& hi) {
    std::vector<Vec3> v(8);
    for (int i = 0; i < 8; ++i)
        v[i] = Vec3((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
    std::vector<std::vector<int>> f = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                                       {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
    return ConvexPolyhedron(std::move(v), std::move(f));
}

ConvexPolyhedron ConvexPolyhedron::hull(std::span<const Vec3> points) {
    std::vector<Vec3> p(points.begin(), points.end());
    const auto tris = hull_triangles(p);
    const double scale = model_scale(p);

    std::vector<Plane> planes;
    for (const auto& t : tris) {
        Vec3 n = (p[t[1]] - p[t[0]]).cross(p[t[2]] - p[t[0]]);
        if (n.norm() == 0.0) continue;
        n.normalize();
        const double off = n.dot(p[t[0]]);
        bool dup = false;
        for (const auto& pl : planes) {
            if (pl.normal.dot(n) > 1.0 - 1e-12 && std::abs(pl.offset - off) < 1e-10 * scale) {
                dup = true;
                break;
            }
        }
        if (!dup) planes.push_back({n, off, kExternalFace});
    }

    Vec3 lo = p.front(), hi = p.front();
    for (const auto& q : p) lo = lo.cwiseMin(q), hi = hi.cwiseMax(q);
    const Vec3 pad = Vec3::Constant(0.1 * (hi - lo).maxCoeff() + 1e-6);
    ConvexPolyhedron body = box(lo - pad, hi + pad);
    for (const auto& pl : planes) {
        auto next = clip(body, pl);
        if (!next) throw Error(ErrorKind::DegenerateGeometry, "hull clipping produced an empty body");
        body = std::move(*next);
    }
    return body;
}

std::vector<Vec3> ConvexPolyhedron::face_points(std::size_t f) const {
    std::vector<Vec3> ring;
    ring.reserve(faces_[f].size());
    for (int v : faces_[f]) ring.push_back(vertices_[v]);
    return ring;
}

Vec3 ConvexPolyhedron::face_normal(std::size_t f) const {
    Vec3 n = newell(face_points(f));
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double ConvexPolyhedron::face_area(std::size_t f) const { return 0.5 * newell(face_points(f)).norm(); }

Plane ConvexPolyhedron::face_plane(std::size_t f) const {
    const Vec3 n = face_normal(f);
    Vec3 c = Vec3::Zero();
    for (int v : faces_[f]) c += vertices_[v];
    c /= static_cast<double>(faces_[f].size());
    return {n, n.dot(c), tags_[f]};
}

bool ConvexPolyhedron::contains(const Vec3& p, double slack) const {
    for (std::size_t f = 0; f < faces_.size(); ++f)
        if (face_plane(f).signed_distance(p) > slack) return false;
    return !faces_.empty();
}

ConvexPolyhedron ConvexPolyhedron::transformed(const Mat3& rotation, const Vec3& translation) const {
    std::vector<Vec3> v;
    v.reserve(vertices_.size());
    for (const auto& p : vertices_) v.push_back(rotation * p + translation);
    auto f = faces_;
    if (rotation.determinant() < 0)
        for (auto& ring : f) std::reverse(ring.begin(), ring.end());
    return ConvexPolyhedron(std::move(v), std::move(f), tags_);
}

ConvexPolyhedron ConvexPolyhedron::scaled(double s) const {
    return transformed(Mat3::Identity() * s, Vec3::Zero());
}

void ConvexPolyhedron::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::DegenerateGeometry, msg); };
    if (faces_.size() < 4) fail("fewer than 4 faces");
    std::set<std::pair<int, int>> edges;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const auto& ring = faces_[f];
        if (ring.size() < 3) fail("face with fewer than 3 vertices");
        const Plane pl = face_plane(f);
        for (int v : ring) {
            if (v < 0 || static_cast<std::size_t>(v) >= vertices_.size()) fail("face index out of range");
            if (std::abs(pl.signed_distance(vertices_[v])) > tol::kCoplanar) fail("non-planar face");
        }
        for (const auto& p : vertices_)
            if (pl.signed_distance(p) > tol::kCoplanar) fail("polyhedron is not convex");
        for (std::size_t k = 0; k < ring.size(); ++k) {
            int a = ring[k], b = ring[(k + 1) % ring.size()];
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    const long euler = static_cast<long>(vertices_.size()) - static_cast<long>(edges.size()) +
                       static_cast<long>(faces_.size());
    if (euler != 2) {
        std::ostringstream os;
        os << "Euler characteristic " << euler << " != 2";
        fail(os.str());
    }
}

// ---------------------------------------------------------------------------
// Clipping
// ---------------------------------------------------------------------------

std::optional<ConvexPolyhedron> clip(const ConvexPolyhedron& poly, const Plane& plane) {
    const auto& verts = poly.vertices();
    if (poly.empty()) return std::nullopt;
    const double eps = tol::kRelPlane * model_scale(verts);

    std::vector<double> dist(verts.size());
    bool any_out = false, any_in = false;
    for (std::size_t i = 0; i < verts.size(); ++i) {
        dist[i] = plane.signed_distance(verts[i]);
        if (dist[i] > eps) any_out = true;
        if (dist[i] < -eps) any_in = true;
    }
    if (!any_out) return poly;
    if (!any_in) return std::nullopt;

    std::vector<Vec3> out_verts(verts.begin(), verts.end());
    std::map<std::pair<int, int>, int> crossings;
    auto crossing = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = crossings.find(key);
        if (it != crossings.end()) return it->second;
        const double t = dist[a] / (dist[a] - dist[b]);
        out_verts.push_back(verts[a] + t * (verts[b] - verts[a]));
        const int id = static_cast<int>(out_verts.size()) - 1;
        crossings.emplace(key, id);
        return id;
    };
    auto inside = [&](int v) { return dist[v] <= eps; };

    std::vector<std::vector<int>> faces;
    std::vector<int> tags;
    for (std::size_t f = 0; f < poly.num_faces(); ++f) {
        const auto& ring = poly.faces()[f];
        std::vector<int> kept;
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const int a = ring[k], b = ring[(k + 1) % ring.size()];
            if (inside(a)) kept.push_back(a);
            const bool strict = (dist[a] < -eps && dist[b] > eps) || (dist[a] > eps && dist[b] < -eps);
            if (strict) kept.push_back(crossing(a, b));
        }
        std::vector<int> ring2;
        for (int v : kept)
            if (ring2.empty() || ring2.back() != v) ring2.push_back(v);
        if (ring2.size() > 1 && ring2.front() == ring2.back()) ring2.pop_back();
        if (ring2.size() < 3) continue;
        std::vector<Vec3> pts;
        for (int v : ring2) pts.push_back(out_verts[v]);
        if (0.5 * newell(pts).norm() <= eps * eps) continue;
        faces.push_back(std::move(ring2));
        tags.push_back(poly.face_tags()[f]);
    }

    std::vector<int> cap;
    for (std::size_t i = 0; i < verts.size(); ++i)
        if (std::abs(dist[i]) <= eps) cap.push_back(static_cast<int>(i));
    for (const auto& [key, id] : crossings) cap.push_back(id);
    if (cap.size() >= 3) {
        auto ring = sort_ring(out_verts, cap, plane.normal, 10 * eps);
        if (ring.size() >= 3) {
            // merged duplicates must be redirected in the side faces as well
            std::vector<Vec3> pts;
            for (int v : ring) pts.push_back(out_verts[v]);
            if (0.5 * newell(pts).norm() > eps * eps) {
                std::set<int> in_ring(ring.begin(), ring.end());
                for (int v : cap) {
                    if (in_ring.count(v)) continue;
                    int nearest = ring.front();
                    for (int r : ring)
                        if ((out_verts[r] - out_verts[v]).squaredNorm() <
                            (out_verts[nearest] - out_verts[v]).squaredNorm())
                            nearest = r;
                    for (auto& face : faces)
                        for (int& x : face)
                            if (x == v) x = nearest;
                }
                for (auto& face : faces) {
                    std::vector<int> dedup;
                    for (int x : face)
                        if (dedup.empty() || dedup.back() != x) dedup.push_back(x);
                    if (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
                    face = std::move(dedup);
                }
                faces.push_back(std::move(ring));
                tags.push_back(plane.tag);
            }
        }
    }
    std::vector<std::vector<int>> final_faces;
    std::vector<int> final_tags;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (faces[f].size() < 3) continue;
        final_faces.push_back(std::move(faces[f]));
        final_tags.push_back(tags[f]);
    }
    if (final_faces.size() < 4) return std::nullopt;
    return compact(out_verts, std::move(final_faces), std::move(final_tags));
}

// ---------------------------------------------------------------------------
// Measures
// ---------------------------------------------------------------------------

Measures measure(const ConvexPolyhedron& poly) {
    Measures m;
    const auto& v = poly.vertices();
    if (poly.empty()) return m;
    Vec3 ref = Vec3::Zero();
    for (const auto& p : v) ref += p;
    ref /= static_cast<double>(v.size());

    double vol = 0.0;
    Vec3 first = Vec3::Zero();
    Mat3 second = Mat3::Zero();
    for (std::size_t f = 0; f < poly.num_faces(); ++f) {
        const auto& ring = poly.faces()[f];
        m.surface_area += poly.face_area(f);
        const Vec3 a = v[ring[0]] - ref;
        for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
            const Vec3 b = v[ring[k]] - ref;
            const Vec3 c = v[ring[k + 1]] - ref;
            const double tv = a.dot(b.cross(c)) / 6.0;
            vol += tv;
            const Vec3 s = a + b + c;
            first += tv * s / 4.0;
            second += (tv / 20.0) * (a * a.transpose() + b * b.transpose() + c * c.transpose() +
                                     s * s.transpose());
        }
    }
    m.volume = vol;
    const Vec3 off = vol != 0.0 ? Vec3(first / vol) : Vec3::Zero();
    m.centroid = ref + off;
    m.second_moment = second - vol * off * off.transpose();
    m.inertia_tensor = m.second_moment.trace() * Mat3::Identity() - m.second_moment;

    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) m.diameter = std::max(m.diameter, (v[i] - v[j]).norm());
    return m;
}

// ---------------------------------------------------------------------------
// Euler angles
// ---------------------------------------------------------------------------

Vec3 euler_zxz(const Mat3& r) {
    const double cb = std::clamp(r(2, 2), -1.0, 1.0);
    const double b = std::acos(cb);
    const double sb = std::sqrt(r(0, 2) * r(0, 2) + r(1, 2) * r(1, 2));
    if (sb > 1e-12) {
        return {std::atan2(r(0, 2), -r(1, 2)), b, std::atan2(r(2, 0), r(2, 1))};
    }
    return {std::atan2(r(1, 0), r(0, 0)), cb > 0 ? 0.0 : std::numbers::pi, 0.0};
}

Mat3 rotation_zxz(const Vec3& e) {
    using Eigen::AngleAxisd;
    return (AngleAxisd(e[0], Vec3::UnitZ()) * AngleAxisd(e[1], Vec3::UnitX()) *
            AngleAxisd(e[2], Vec3::UnitZ()))
        .toRotationMatrix();
}

namespace {

// Largest-magnitude component made positive; the first one wins a magnitude tie.
Vec3 canonical_sign(Vec3 v) {
    int k = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) > std::abs(v[k]) * (1.0 + 1e-12)) k = i;
    return v[k] < 0 ? Vec3(-v) : v;
}

bool lex_less(const Vec3& a, const Vec3& b) {
    for (int i = 0; i < 3; ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

}  // namespace

PrincipalAxes principal_axes(const ConvexPolyhedron& poly) {
    const Measures m = measure(poly);
    if (!(m.volume > 0)) throw Error(ErrorKind::DegenerateInertia, "polyhedron has no volume");
    PrincipalAxes out;
    out.covariance = m.second_moment / m.volume;
    Eigen::SelfAdjointEigenSolver<Mat3> es(out.covariance);

    struct Axis {
        Vec3 dir;
        double var;
        double half;
    };
    std::array<Axis, 3> axes;
    for (int k = 0; k < 3; ++k) {
        Vec3 dir = canonical_sign(es.eigenvectors().col(k));
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& p : poly.vertices()) {
            const double t = dir.dot(p - m.centroid);
            lo = std::min(lo, t), hi = std::max(hi, t);
        }
        axes[k] = {dir, es.eigenvalues()[k], 0.5 * (hi - lo)};
    }
    const double scale = std::max({axes[0].half, axes[1].half, axes[2].half});
    std::sort(axes.begin(), axes.end(), [&](const Axis& a, const Axis& b) {
        if (std::abs(a.half - b.half) > tol::kEigenTie * scale) return a.half > b.half;
        const double vs = std::max(std::abs(a.var), std::abs(b.var));
        if (std::abs(a.var - b.var) > tol::kEigenTie * vs) return a.var > b.var;
        return lex_less(b.dir, a.dir);
    });
    for (int k = 0; k < 3; ++k) {
        out.axes.col(k) = axes[k].dir;
        out.variances[k] = axes[k].var;
        out.semi_lengths[k] = axes[k].half;
    }
    Mat3 proper = out.axes;
    if (proper.determinant() < 0) proper.col(2) = -proper.col(2);
    out.euler_angles = euler_zxz(proper);
    return out;
}

// ---------------------------------------------------------------------------
// Sphere bounds
// ---------------------------------------------------------------------------

namespace {

struct Ball {
    Vec3 c = Vec3::Zero();
    double r = -1.0;
    bool contains(const Vec3& p) const { return r >= 0 && (p - c).norm() <= r * (1 + 1e-12) + 1e-12; }
};

Ball ball2(const Vec3& a, const Vec3& b) { return {(a + b) / 2, (a - b).norm() / 2}; }

Ball ball3(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a;
    const Vec3 n = ab.cross(ac);
    const double den = 2.0 * n.squaredNorm();
    if (den < 1e-24 * std::pow(std::max(ab.squaredNorm(), ac.squaredNorm()), 2)) {
        Ball best = ball2(a, b);
        for (const Ball& cand : {ball2(a, c), ball2(b, c)})
            if (cand.r > best.r) best = cand;
        return best;
    }
    const Vec3 off = (ab.squaredNorm() * ac.cross(n) + ac.squaredNorm() * n.cross(ab)) / den;
    return {a + off, off.norm()};
}

Ball ball4(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    Mat3 m;
    m.row(0) = (b - a).transpose();
    m.row(1) = (c - a).transpose();
    m.row(2) = (d - a).transpose();
    const Vec3 rhs(0.5 * (b - a).squaredNorm(), 0.5 * (c - a).squaredNorm(), 0.5 * (d - a).squaredNorm());
    const double det = m.determinant();
    const double s = std::max({(b - a).norm(), (c - a).norm(), (d - a).norm()});
    if (std::abs(det) < 1e-14 * s * s * s) {
        Ball best;
        const std::array<std::array<Vec3, 3>, 4> tris = {{{a, b, c}, {a, b, d}, {a, c, d}, {b, c, d}}};
        for (const auto& t : tris) {
            Ball cand = ball3(t[0], t[1], t[2]);
            if (cand.contains(a) && cand.contains(b) && cand.contains(c) && cand.contains(d) &&
                (best.r < 0 || cand.r < best.r))
                best = cand;
        }
        return best.r >= 0 ? best : ball3(a, b, c);
    }
    const Vec3 off = m.partialPivLu().solve(rhs);
    return {a + off, off.norm()};
}

// Chebyshev center by dense simplex (Bland's rule) on
//   max r  s.t.  n_f.(c+ - c-) + r <= b_f,  c+, c-, r >= 0.
std::pair<Vec3, double> chebyshev_center(const ConvexPolyhedron& poly) {
    const auto& v = poly.vertices();
    Vec3 origin = Vec3::Zero();
    for (const auto& p : v) origin += p;
    origin /= static_cast<double>(v.size());

    const int rows = static_cast<int>(poly.num_faces());
    const int nvar = 7;
    const int cols = nvar + rows + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows + 1, cols);
    for (int f = 0; f < rows; ++f) {
        const Plane pl = poly.face_plane(f);
        for (int k = 0; k < 3; ++k) {
            t(f, k) = pl.normal[k];
            t(f, 3 + k) = -pl.normal[k];
        }
        t(f, 6) = 1.0;
        t(f, nvar + f) = 1.0;
        t(f, cols - 1) = std::max(0.0, pl.offset - pl.normal.dot(origin));
    }
    t(rows, 6) = -1.0;  // objective row: minimize -r
    std::vector<int> basis(rows);
    std::iota(basis.begin(), basis.end(), nvar);

    const double eps = 1e-12;
    for (int iter = 0; iter < 100 * (rows + nvar); ++iter) {
        int enter = -1;
        for (int j = 0; j < cols - 1; ++j)
            if (t(rows, j) < -eps) {
                enter = j;
                break;
            }
        if (enter < 0) break;
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < rows; ++i) {
            if (t(i, enter) > eps) {
                const double ratio = t(i, cols - 1) / t(i, enter);
                if (ratio < best - 1e-15 || (ratio <= best + 1e-15 && leave >= 0 && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (leave < 0) break;
        t.row(leave) /= t(leave, enter);
        for (int i = 0; i <= rows; ++i)
            if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
        basis[leave] = enter;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nvar);
    for (int i = 0; i < rows; ++i)
        if (basis[i] < nvar) x[basis[i]] = t(i, cols - 1);
    const Vec3 c = origin + Vec3(x[0] - x[3], x[1] - x[4], x[2] - x[5]);
    // recompute the radius from the planes so the value is exactly feasible
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < poly.num_faces(); ++f) r = std::min(r, -poly.face_plane(f).signed_distance(c));
    return {c, r};
}

}  // namespace

std::pair<Vec3, double> min_enclosing_ball(std::span<const Vec3> points) {
    std::vector<Vec3> p(points.begin(), points.end());
    if (p.empty()) return {Vec3::Zero(), 0.0};
    // Deterministic shuffle keeps the expected linear running time.
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    for (std::size_t i = p.size(); i > 1; --i) {
        state ^= state << 13, state ^= state >> 7, state ^= state << 17;
        std::swap(p[i - 1], p[state % i]);
    }
    Ball b{p[0], 0.0};
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (b.contains(p[i])) continue;
        b = {p[i], 0.0};
        for (std::size_t j = 0; j < i; ++j) {
            if (b.contains(p[j])) continue;
            b = ball2(p[i], p[j]);
            for (std::size_t k = 0; k < j; ++k) {
                if (b.contains(p[k])) continue;
                b = ball3(p[i], p[j], p[k]);
                for (std::size_t l = 0; l < k; ++l) {
                    if (b.contains(p[l])) continue;
                    b = ball4(p[i], p[j], p[k], p[l]);
                }
            }
        }
    }
    return {b.c, b.r};
}

SphereBounds sphere_bounds(const ConvexPolyhedron& poly) {
    SphereBounds out;
    auto [cc, cr] = min_enclosing_ball(poly.vertices());
    out.circumscribed_center = cc;
    out.circumscribed_diameter = 2 * cr;
    auto [ic, ir] = chebyshev_center(poly);
    out.inscribed_center = ic;
    out.inscribed_diameter = 2 * ir;
    return out;
}

// ---------------------------------------------------------------------------
// Ellipsoid approximation
// ---------------------------------------------------------------------------

ConvexPolyhedron ellipsoid_polyhedron(const EllipsoidSpec& spec) {
    if (!(spec.diameter > 0)) throw Error(ErrorKind::DegenerateSpec, "diameter must be positive");
    if (!(spec.scale.minCoeff() > 0)) throw Error(ErrorKind::DegenerateSpec, "scale factors must be positive");
    if (spec.facet_count < 20) throw Error(ErrorKind::DegenerateSpec, "facet_count must be at least 20");

    const int n = spec.facet_count / 2 + 2;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> pts(n);
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        pts[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }
    ConvexPolyhedron unit = ConvexPolyhedron::hull(pts);
    // volume-matched: the faceted body has exactly the ellipsoid volume
    const double k = std::cbrt((4.0 / 3.0) * std::numbers::pi / measure(unit).volume);
    const Mat3 map = (spec.semi_axes() * k).asDiagonal();
    return unit.transformed(map, Vec3::Zero());
}

// ---------------------------------------------------------------------------
// Polygons
// ---------------------------------------------------------------------------

PolygonMeasures polygon_measures(std::span<const Vec3> ring) {
    PolygonMeasures pm;
    std::vector<Vec3> pts(ring.begin(), ring.end());
    pm.n_lines = static_cast<int>(pts.size());
    if (pts.size() < 3) return pm;
    const Vec3 nv = newell(pts);
    pm.area = 0.5 * nv.norm();
    pm.normal = pm.area > 0 ? Vec3(nv.normalized()) : Vec3::UnitZ();

    Vec3 ref = Vec3::Zero();
    for (const auto& p : pts) ref += p;
    ref /= static_cast<double>(pts.size());
    double total = 0.0;
    Vec3 first = Vec3::Zero();
    Mat3 second = Mat3::Zero();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Vec3 a = pts[k] - ref, b = pts[(k + 1) % pts.size()] - ref;
        const double area = 0.5 * a.cross(b).dot(pm.normal);
        const Vec3 s = a + b;
        total += area;
        first += area * s / 3.0;
        second += (area / 12.0) * (a * a.transpose() + b * b.transpose() + s * s.transpose());
    }
    const Vec3 off = total != 0.0 ? Vec3(first / total) : Vec3::Zero();
    pm.centroid = ref + off;
    const Mat3 central = second - total * off * off.transpose();

    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) pm.max_length = std::max(pm.max_length, (pts[i] - pts[j]).norm());

    const Vec3 u = pm.normal.unitOrthogonal();
    const Vec3 w = pm.normal.cross(u);
    Eigen::Matrix2d c2;
    c2 << u.dot(central * u), u.dot(central * w), w.dot(central * u), w.dot(central * w);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c2);
    const Eigen::Vector2d major = es.eigenvectors().col(1);
    const Vec3 e1 = canonical_sign((major[0] * u + major[1] * w).normalized());
    pm.frame.col(0) = e1;
    pm.frame.col(1) = pm.normal.cross(e1);
    pm.frame.col(2) = pm.normal;
    return pm;
}

}  // namespace crush::geometry
