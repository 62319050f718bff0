#include "crush/features.hpp"

#include "crush/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace crush::features {

using geometry::ConvexPolyhedron;
using geometry::Vec3;

namespace {

constexpr const char* kRegistryText =
#include "pmd_registry.inc"
    ;

struct Registry {
    int version = 0;
    std::vector<Descriptor> entries;
};

const Registry& parsed() {
    static const Registry reg = [] {
        Registry r;
        std::istringstream in(kRegistryText);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (line[0] == '#') {
                const auto pos = line.find("version ");
                if (pos != std::string::npos && r.version == 0) r.version = std::stoi(line.substr(pos + 8));
                continue;
            }
            Descriptor d;
            std::string* fields[] = {&d.name, &d.category, &d.unit};
            std::size_t start = 0;
            for (auto* f : fields) {
                const auto comma = line.find(',', start);
                if (comma == std::string::npos) throw Error(ErrorKind::Config, "bad registry line: " + line);
                *f = line.substr(start, comma - start);
                start = comma + 1;
            }
            d.formula = line.substr(start);
            r.entries.push_back(std::move(d));
        }
        return r;
    }();
    return reg;
}

// Angle of the corner p at a polygon vertex between neighbours a and b.
double corner_angle(const Vec3& a, const Vec3& p, const Vec3& b) {
    const Vec3 u = a - p, v = b - p;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

struct Roundness {
    double defect = 0.0;
    double dihedral = 0.0;
};

Roundness roundness(const ConvexPolyhedron& poly) {
    const auto& verts = poly.vertices();
    const auto& faces = poly.faces();
    std::vector<double> angle_sum(verts.size(), 0.0), weight(verts.size(), 0.0);
    std::vector<Vec3> normals;
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& ring = faces[f];
        const double share = poly.face_area(f) / static_cast<double>(ring.size());
        normals.push_back(poly.face_normal(f));
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const int prev = ring[(k + ring.size() - 1) % ring.size()], cur = ring[k],
                      next = ring[(k + 1) % ring.size()];
            angle_sum[cur] += corner_angle(verts[prev], verts[cur], verts[next]);
            weight[cur] += share;
            edge_faces[{std::min(cur, next), std::max(cur, next)}].push_back(static_cast<int>(f));
        }
    }
    Roundness r;
    double wsum = 0.0;
    for (std::size_t v = 0; v < verts.size(); ++v) {
        if (weight[v] == 0.0) continue;
        r.defect += weight[v] * (2 * std::numbers::pi - angle_sum[v]);
        wsum += weight[v];
    }
    r.defect /= wsum;
    double lsum = 0.0;
    for (const auto& [e, fs] : edge_faces) {
        if (fs.size() != 2) continue;
        const double len = (verts[e.first] - verts[e.second]).norm();
        const double c = std::clamp(normals[fs[0]].dot(normals[fs[1]]), -1.0, 1.0);
        r.dihedral += len * std::acos(c);
        lsum += len;
    }
    r.dihedral /= lsum;
    return r;
}

double support_offset(const ConvexPolyhedron& poly, const Vec3& centroid, double S) {
    std::size_t best = 0;
    double best_area = -1.0;
    for (std::size_t f = 0; f < poly.num_faces(); ++f) {
        const double a = poly.face_area(f);
        if (a > best_area * (1 + 1e-12)) best_area = a, best = f;
    }
    const auto pts = poly.face_points(best);
    const auto pm = geometry::polygon_measures(pts);
    Vec3 d = centroid - pm.centroid;
    d -= d.dot(pm.normal) * pm.normal;
    return d.norm() / S;
}

}  // namespace

const std::vector<Descriptor>& registry() { return parsed().entries; }
int registry_version() { return parsed().version; }

int pmd_index(const std::string& name) {
    const auto& reg = registry();
    for (std::size_t i = 0; i < reg.size(); ++i)
        if (reg[i].name == name) return static_cast<int>(i);
    throw Error(ErrorKind::Config, "unknown descriptor " + name);
}

PmdVector compute_pmd(const ConvexPolyhedron& particle) {
    const auto m = geometry::measure(particle);
    const auto axes = geometry::principal_axes(particle);
    const auto bounds = geometry::sphere_bounds(particle);
    const double V = m.volume, A = m.surface_area;
    const double L = 2 * axes.semi_lengths[0], I = 2 * axes.semi_lengths[1], S = 2 * axes.semi_lengths[2];
    const double pi = std::numbers::pi;
    const double d_eq = std::cbrt(6 * V / pi);
    const double d_ins = bounds.inscribed_diameter, d_cir = bounds.circumscribed_diameter;
    const double disc_rod = (L - S) < 1e-12 * L ? 0.5 : (L - I) / (L - S);
    const double p = S / I, q = I / L;
    const auto rnd = roundness(particle);
    double mean_dist = 0.0;
    for (const auto& v : particle.vertices()) mean_dist += (v - m.centroid).norm();
    mean_dist /= static_cast<double>(particle.vertices().size());

    const std::map<std::string, double> values = {
        {"volume", V},
        {"surface_area", A},
        {"long_length", L},
        {"intermediate_length", I},
        {"short_length", S},
        {"equivalent_diameter", d_eq},
        {"inscribed_diameter", d_ins},
        {"circumscribed_diameter", d_cir},
        {"mean_length", (L + I + S) / 3},
        {"elongation", I / L},
        {"flatness", S / I},
        {"aspect", S / L},
        {"corey", S / std::sqrt(L * I)},
        {"janke", S / std::sqrt((L * L + I * I + S * S) / 3)},
        {"disc_rod", disc_rod},
        {"wentworth", (L + I) / (2 * S)},
        {"aschenbrenner_shape", S * L / (I * I)},
        {"oblate_prolate", 10 * (disc_rod - 0.5) / (S / L)},
        {"box_fill", V / (L * I * S)},
        {"long_to_equivalent", L / d_eq},
        {"intermediate_to_equivalent", I / d_eq},
        {"short_to_equivalent", S / d_eq},
        {"vertex_defect_mean", rnd.defect},
        {"dihedral_smoothness", rnd.dihedral},
        {"inscribed_corner_ratio", 0.5 * d_ins / mean_dist},
        {"wadell", std::cbrt(pi) * std::pow(6 * V, 2.0 / 3.0) / A},
        {"krumbein", std::cbrt(I * S / (L * L))},
        {"sneed_folk", std::cbrt(S * S / (L * I))},
        {"riley", std::sqrt(d_ins / d_cir)},
        {"aschenbrenner_working",
         12.8 * std::cbrt(p * p * q) / (1 + p * (1 + q) + 6 * std::sqrt(1 + p * p * (1 + q * q)))},
        {"volume_circumscribed", d_eq / d_cir},
        {"inscribed_volume", d_ins / d_eq},
        {"intercept", std::sqrt(I * S) / L},
        {"area_circumscribed", std::sqrt(A / pi) / d_cir},
        {"support_offset", support_offset(particle, m.centroid, S)},
    };

    const auto& reg = registry();
    if (reg.size() != kPmdCount || values.size() != kPmdCount)
        throw Error(ErrorKind::Config, "descriptor registry does not list 35 entries");
    PmdVector out{};
    for (int i = 0; i < kPmdCount; ++i) {
        const auto it = values.find(reg[i].name);
        if (it == values.end()) throw Error(ErrorKind::Config, "no formula for descriptor " + reg[i].name);
        if (!std::isfinite(it->second)) throw Error(ErrorKind::NonFinite, "descriptor " + reg[i].name);
        out[i] = it->second;
    }
    return out;
}

const std::array<const char*, kNodeFeatureCount>& node_feature_names() {
    static const std::array<const char*, kNodeFeatureCount> names = {
        "volume", "surface_area", "diameter", "n_faces", "n_neighbors", "centroid_x",
        "centroid_y", "centroid_z", "euler_a", "euler_b", "euler_c"};
    return names;
}

const std::array<const char*, kEdgeFeatureCount>& edge_feature_names() {
    static const std::array<const char*, kEdgeFeatureCount> names = {
        "contact_area", "n_lines", "max_length", "centroid_x", "centroid_y",
        "centroid_z", "euler_a", "euler_b", "euler_c"};
    return names;
}

NodeFeatures compute_node_features(const tessellation::FragmentMesh& mesh, int cell) {
    const auto& poly = mesh.cells.at(cell);
    const auto m = geometry::measure(poly);
    const auto axes = geometry::principal_axes(poly);
    int degree = 0;
    for (const auto& a : mesh.adjacency) degree += (a.i == cell) + (a.j == cell);
    return {m.volume,
            m.surface_area,
            m.diameter,
            static_cast<double>(poly.num_faces()),
            static_cast<double>(degree),
            m.centroid.x(),
            m.centroid.y(),
            m.centroid.z(),
            axes.euler_angles[0],
            axes.euler_angles[1],
            axes.euler_angles[2]};
}

EdgeFeatures compute_edge_features(const tessellation::FragmentMesh& mesh, int edge) {
    const auto& adj = mesh.adjacency.at(edge);
    std::vector<Vec3> ring = adj.face;
    if (adj.i > adj.j) std::reverse(ring.begin(), ring.end());
    const auto pm = geometry::polygon_measures(ring);
    const Vec3 e = geometry::euler_zxz(pm.frame);
    return {pm.area,
            static_cast<double>(pm.n_lines),
            pm.max_length,
            pm.centroid.x(),
            pm.centroid.y(),
            pm.centroid.z(),
            e[0],
            e[1],
            e[2]};
}

DistanceFeatures distance_features(const tessellation::FragmentMesh& mesh) {
    const std::size_t n = mesh.size();
    if (n < 2) throw Error(ErrorKind::DegenerateGeometry, "distance features need at least 2 cells");
    std::vector<Vec3> c;
    for (const auto& cell : mesh.cells) c.push_back(geometry::measure(cell).centroid);

    auto top = [](std::vector<double>& d) {
        DistanceVector out{};
        const std::size_t k = std::min<std::size_t>(kDistanceCount, d.size());
        std::partial_sort(d.begin(), d.begin() + k, d.end(), std::greater<>());
        std::copy_n(d.begin(), k, out.begin());
        return out;
    };
    DistanceFeatures out;
    std::vector<double> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            d.push_back((c[i] - c[j]).norm());
            if (j > i) pairs.push_back(d.back());
        }
        out.per_node.push_back(top(d));
    }
    out.per_particle = top(pairs);
    return out;
}

}  // namespace crush::features
