/**
 * @file tessellation.cpp
 * @brief Clipping-based Voronoi tessellation and Lloyd refinement.
 */

#include "crush/tessellation.hpp"

#include "crush/error.hpp"
#include "crush/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace crush::tessellation {

using geometry::Mat3;
using geometry::Plane;

namespace {

constexpr double kReferenceDiameter = 11.86;
constexpr int kMinCells = 8;
constexpr int kMaxCells = 216;

ConvexPolyhedron voronoi_cell(const ConvexPolyhedron& particle, std::span<const Vec3> seeds, std::size_t i) {
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double da = (seeds[a] - seeds[i]).squaredNorm(), db = (seeds[b] - seeds[i]).squaredNorm();
        return da != db ? da < db : a < b;
    });
    ConvexPolyhedron cell = particle;
    for (std::size_t j : order) {
        if (j == i) continue;
        const Vec3 d = seeds[j] - seeds[i];
        const double half = 0.5 * d.norm();
        double reach = 0.0;
        for (const auto& v : cell.vertices()) reach = std::max(reach, (v - seeds[i]).norm());
        if (half > reach) break;  // every further bisector misses the cell
        const Vec3 n = d.normalized();
        auto next = geometry::clip(cell, Plane{n, n.dot(0.5 * (seeds[i] + seeds[j])), static_cast<int>(j)});
        if (!next) throw Error(ErrorKind::EmptyCell, "seed " + std::to_string(i) + " has an empty cell");
        cell = std::move(*next);
    }
    return cell;
}

}  // namespace

std::vector<int> FragmentMesh::degrees() const {
    std::vector<int> deg(cells.size(), 0);
    for (const auto& a : adjacency) ++deg[a.i], ++deg[a.j];
    return deg;
}

bool FragmentMesh::connected() const {
    if (cells.empty()) return false;
    std::vector<std::vector<int>> nbr(cells.size());
    for (const auto& a : adjacency) nbr[a.i].push_back(a.j), nbr[a.j].push_back(a.i);
    std::vector<char> seen(cells.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
        int c = q.front();
        q.pop();
        for (int n : nbr[c])
            if (!seen[n]) seen[n] = 1, ++count, q.push(n);
    }
    return count == cells.size();
}

FragmentMesh FragmentMesh::rotated(const Mat3& rotation) const {
    FragmentMesh out = *this;
    out.boundary = boundary.transformed(rotation, Vec3::Zero());
    for (auto& c : out.cells) c = c.transformed(rotation, Vec3::Zero());
    for (auto& s : out.seeds) s = rotation * s;
    for (auto& a : out.adjacency)
        for (auto& p : a.face) p = rotation * p;
    return out;
}

int cell_count(double diameter) {
    const double raw = 8.0 * std::pow(diameter / kReferenceDiameter, 3);
    return std::clamp(static_cast<int>(std::lround(raw)), kMinCells, kMaxCells);
}

std::vector<Vec3> generate_seeds(const EllipsoidSpec& spec, std::uint64_t rng_seed) {
    return generate_seeds(spec, geometry::ellipsoid_polyhedron(spec), rng_seed);
}

std::vector<Vec3> generate_seeds(const EllipsoidSpec& spec, const ConvexPolyhedron& particle,
                                 std::uint64_t rng_seed) {
    const int n = cell_count(spec.diameter);
    const Vec3 semi = spec.semi_axes();
    const double margin = 1e-6 * spec.diameter;
    Rng rng(rng_seed);
    std::vector<Vec3> seeds;
    seeds.reserve(n);
    while (static_cast<int>(seeds.size()) < n) {
        const Vec3 p(rng.uniform(-1, 1) * semi.x(), rng.uniform(-1, 1) * semi.y(), rng.uniform(-1, 1) * semi.z());
        if (p.cwiseQuotient(semi).squaredNorm() > 1.0) continue;
        if (!particle.contains(p, -margin)) continue;
        seeds.push_back(p);
    }
    return seeds;
}

FragmentMesh voronoi(const EllipsoidSpec& spec, std::span<const Vec3> seeds, std::uint64_t rng_seed) {
    return voronoi(spec, geometry::ellipsoid_polyhedron(spec), seeds, rng_seed);
}

FragmentMesh voronoi(const EllipsoidSpec& spec, const ConvexPolyhedron& particle, std::span<const Vec3> seeds,
                     std::uint64_t rng_seed) {
    if (seeds.size() < 2) throw Error(ErrorKind::DegenerateSpec, "voronoi needs at least two seeds");
    for (const auto& s : seeds)
        if (!particle.contains(s, 0.0))
            throw Error(ErrorKind::DegenerateSpec, "seed outside the particle");

    FragmentMesh mesh;
    mesh.particle = spec;
    mesh.boundary = particle;
    mesh.seeds.assign(seeds.begin(), seeds.end());
    mesh.rng_seed = rng_seed;
    mesh.cells.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) mesh.cells.push_back(voronoi_cell(particle, seeds, i));

    for (std::size_t i = 0; i < mesh.cells.size(); ++i) {
        const auto& cell = mesh.cells[i];
        for (std::size_t f = 0; f < cell.num_faces(); ++f) {
            const int j = cell.face_tags()[f];
            if (j <= static_cast<int>(i)) continue;
            if (cell.face_area(f) <= geometry::tol::kMinFaceArea) continue;
            mesh.adjacency.push_back({static_cast<int>(i), j, cell.face_points(f)});
        }
    }
    std::sort(mesh.adjacency.begin(), mesh.adjacency.end(),
              [](const Adjacency& a, const Adjacency& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
    return mesh;
}

FragmentMesh lloyd_refine(const FragmentMesh& mesh, int max_iters, double tol) {
    if (tol < 0) tol = 1e-3 * mesh.particle.diameter;
    FragmentMesh current = mesh;
    current.lloyd_iterations = 0;
    current.lloyd_displacements.clear();
    std::vector<double> log;
    int iterations = 0;
    for (int it = 0; it <= max_iters; ++it) {
        std::vector<Vec3> centroids;
        centroids.reserve(current.size());
        double disp = 0.0;
        for (std::size_t c = 0; c < current.size(); ++c) {
            centroids.push_back(geometry::measure(current.cells[c]).centroid);
            disp = std::max(disp, (centroids.back() - current.seeds[c]).norm());
        }
        log.push_back(disp);
        if (disp < tol || it == max_iters) break;
        current = voronoi(current.particle, current.boundary, centroids, current.rng_seed);
        iterations = it + 1;
    }
    current.lloyd_iterations = iterations;
    current.lloyd_displacements = std::move(log);
    return current;
}

FragmentMesh tessellate(EllipsoidSpec spec, std::uint64_t rng_seed, const TessellationOptions& opts) {
    spec.facet_count = opts.facet_count;
    const ConvexPolyhedron particle = geometry::ellipsoid_polyhedron(spec);
    const auto seeds = generate_seeds(spec, particle, rng_seed);
    FragmentMesh mesh = voronoi(spec, particle, seeds, rng_seed);
    if (opts.lloyd) mesh = lloyd_refine(mesh, opts.lloyd_max_iters, opts.lloyd_tol_fraction * spec.diameter);
    return mesh;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

nlohmann::json poly_json(const ConvexPolyhedron& p) {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : p.vertices()) verts.push_back(vec_json(v));
    return {{"vertices", verts}, {"faces", p.faces()}, {"tags", p.face_tags()}};
}

ConvexPolyhedron json_poly(const nlohmann::json& j) {
    std::vector<Vec3> verts;
    for (const auto& v : j.at("vertices")) verts.push_back(json_vec(v));
    return ConvexPolyhedron(std::move(verts), j.at("faces").get<std::vector<std::vector<int>>>(),
                            j.at("tags").get<std::vector<int>>());
}

}  // namespace

nlohmann::json to_json(const FragmentMesh& mesh) {
    nlohmann::json j;
    j["schema"] = kTessellationSchema;
    j["particle"] = {{"diameter", mesh.particle.diameter},
                     {"scale", vec_json(mesh.particle.scale)},
                     {"facet_count", mesh.particle.facet_count}};
    j["rng_seed"] = mesh.rng_seed;
    j["lloyd"] = {{"iterations", mesh.lloyd_iterations}, {"displacements", mesh.lloyd_displacements}};
    j["seeds"] = nlohmann::json::array();
    for (const auto& s : mesh.seeds) j["seeds"].push_back(vec_json(s));
    j["boundary"] = poly_json(mesh.boundary);
    j["cells"] = nlohmann::json::array();
    for (const auto& c : mesh.cells) j["cells"].push_back(poly_json(c));
    j["adjacency"] = nlohmann::json::array();
    for (const auto& a : mesh.adjacency) {
        nlohmann::json face = nlohmann::json::array();
        for (const auto& p : a.face) face.push_back(vec_json(p));
        j["adjacency"].push_back({{"i", a.i}, {"j", a.j}, {"face", face}});
    }
    return j;
}

FragmentMesh mesh_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kTessellationSchema)
        throw Error(ErrorKind::SchemaMismatch, "expected " + std::string(kTessellationSchema));
    FragmentMesh mesh;
    const auto& p = j.at("particle");
    mesh.particle = {p.at("diameter").get<double>(), json_vec(p.at("scale")), p.at("facet_count").get<int>()};
    mesh.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    mesh.lloyd_iterations = j.at("lloyd").at("iterations").get<int>();
    mesh.lloyd_displacements = j.at("lloyd").at("displacements").get<std::vector<double>>();
    for (const auto& s : j.at("seeds")) mesh.seeds.push_back(json_vec(s));
    mesh.boundary = json_poly(j.at("boundary"));
    for (const auto& c : j.at("cells")) mesh.cells.push_back(json_poly(c));
    for (const auto& a : j.at("adjacency")) {
        Adjacency adj{a.at("i").get<int>(), a.at("j").get<int>(), {}};
        for (const auto& q : a.at("face")) adj.face.push_back(json_vec(q));
        mesh.adjacency.push_back(std::move(adj));
    }
    return mesh;
}

}  // namespace crush::tessellation
