#include "crush/error.hpp"
#include "crush/tessellation.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace crush;
using namespace crush::tessellation;
using geometry::measure;
using geometry::Vec3;

namespace {

// Sphere polyhedron invariant under every coordinate reflection.
ConvexPolyhedron symmetric_sphere(double radius, int n = 60) {
    std::vector<Vec3> pts;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(1 - z * z);
        const Vec3 p(r * std::cos(golden * i), r * std::sin(golden * i), z);
        for (int s = 0; s < 8; ++s)
            pts.emplace_back(radius * ((s & 1) ? -p.x() : p.x()), radius * ((s & 2) ? -p.y() : p.y()),
                             radius * ((s & 4) ? -p.z() : p.z()));
    }
    return ConvexPolyhedron::hull(pts);
}

int containing_cell(const FragmentMesh& mesh, const Vec3& p) {
    int found = -1;
    for (std::size_t c = 0; c < mesh.size(); ++c)
        if (crush::testing::inside_faces(mesh.cells[c], p)) {
            if (found >= 0) return -2;
            found = static_cast<int>(c);
        }
    return found;
}

}  // namespace

TEST_CASE("cell_count follows the cubic law") {
    CHECK(cell_count(11.86) == 8);
    CHECK(cell_count(35.57) == 216);
    CHECK(cell_count(23.72) == 64);
    CHECK(cell_count(5.0) == 8);
    CHECK(cell_count(80.0) == 216);
}

TEST_CASE("generate_seeds: count, containment, determinism") {
    EllipsoidSpec spec{16.85, Vec3(1.2, 1.2, 1.0), 320};
    auto a = generate_seeds(spec, 99);
    auto b = generate_seeds(spec, 99);
    auto c = generate_seeds(spec, 100);
    CHECK(static_cast<int>(a.size()) == cell_count(spec.diameter));
    CHECK(a == b);
    CHECK(a != c);
    auto particle = geometry::ellipsoid_polyhedron(spec);
    for (const auto& s : a) CHECK(particle.contains(s, 0.0));
}

TEST_CASE("voronoi: two symmetric seeds split the sphere evenly") {
    auto particle = symmetric_sphere(1.0);
    EllipsoidSpec spec{2.0, Vec3::Ones(), 320};
    std::vector<Vec3> seeds = {Vec3(0.3, 0, 0), Vec3(-0.3, 0, 0)};
    auto mesh = voronoi(spec, particle, seeds);
    const double v0 = measure(mesh.cells[0]).volume, v1 = measure(mesh.cells[1]).volume;
    CHECK(std::abs(v0 - v1) <= 1e-9);
    REQUIRE(mesh.adjacency.size() == 1);
    CHECK(mesh.adjacency[0].i == 0);
    CHECK(mesh.adjacency[0].j == 1);
}

TEST_CASE("voronoi: eight cube-corner seeds give congruent cells") {
    auto particle = symmetric_sphere(5.0);
    EllipsoidSpec spec{10.0, Vec3::Ones(), 320};
    std::vector<Vec3> seeds;
    for (int s = 0; s < 8; ++s) seeds.emplace_back((s & 1) ? 2 : -2, (s & 2) ? 2 : -2, (s & 4) ? 2 : -2);
    auto mesh = voronoi(spec, particle, seeds);
    const double ref = measure(mesh.cells[0]).volume;
    for (const auto& c : mesh.cells) CHECK(std::abs(measure(c).volume - ref) <= 1e-6 * ref);
    CHECK(mesh.adjacency.size() == 12);
    for (const auto& c : mesh.cells) CHECK_NOTHROW(c.validate());
}

TEST_CASE("voronoi: nearest-seed oracle and partition on random meshes") {
    Rng rng(5);
    for (int t = 0; t < 4; ++t) {
        EllipsoidSpec spec{rng.uniform(11.86, 20.0), Vec3(rng.uniform(1, 1.5), 1.0, 1.0), 320};
        auto particle = geometry::ellipsoid_polyhedron(spec);
        auto mesh = voronoi(spec, particle, generate_seeds(spec, particle, 1000 + t));
        const Vec3 semi = spec.semi_axes();
        int checked = 0;
        while (checked < 100) {
            Vec3 p(rng.uniform(-1, 1) * semi.x(), rng.uniform(-1, 1) * semi.y(), rng.uniform(-1, 1) * semi.z());
            if (!crush::testing::inside_faces(particle, p)) continue;
            ++checked;
            std::size_t nearest = 0;
            for (std::size_t s = 1; s < mesh.seeds.size(); ++s)
                if ((mesh.seeds[s] - p).norm() < (mesh.seeds[nearest] - p).norm()) nearest = s;
            CHECK(containing_cell(mesh, p) == static_cast<int>(nearest));
        }
    }
}

TEST_CASE("tessellate: partition, adjacency areas, connectivity") {
    EllipsoidSpec spec{19.34, Vec3(1.3, 1.3, 1.0), 320};
    auto mesh = tessellate(spec, 77);
    CHECK(static_cast<int>(mesh.size()) == cell_count(spec.diameter));
    CHECK(mesh.connected());

    double total = 0.0;
    for (const auto& c : mesh.cells) {
        CHECK_NOTHROW(c.validate());
        total += measure(c).volume;
    }
    const double vp = measure(mesh.boundary).volume;
    CHECK(std::abs(total - vp) <= 1e-6 * vp);

    std::vector<double> shared(mesh.size(), 0.0);
    for (const auto& a : mesh.adjacency) {
        CHECK(a.i < a.j);
        const double area = geometry::polygon_measures(a.face).area;
        CHECK(area > 1e-9);
        shared[a.i] += area;
        shared[a.j] += area;
    }
    for (std::size_t c = 0; c < mesh.size(); ++c) {
        double internal = 0.0;
        for (std::size_t f = 0; f < mesh.cells[c].num_faces(); ++f)
            if (mesh.cells[c].face_tags()[f] >= 0) internal += mesh.cells[c].face_area(f);
        CHECK(std::abs(internal - shared[c]) <= 1e-6 * internal);
    }
}

TEST_CASE("lloyd_refine: centroidal fixed point, convergence, no-op") {
    auto particle = symmetric_sphere(1.0);
    EllipsoidSpec spec{2.0, Vec3::Ones(), 320};
    std::vector<Vec3> seeds = {Vec3(0.3, 0, 0), Vec3(-0.3, 0, 0)};
    auto first = voronoi(spec, particle, seeds);
    std::vector<Vec3> centroids = {measure(first.cells[0]).centroid, measure(first.cells[1]).centroid};
    auto centroidal = voronoi(spec, particle, centroids);
    auto refined = lloyd_refine(centroidal);
    CHECK(refined.lloyd_iterations <= 1);
    CHECK(refined.lloyd_displacements.back() < 1e-3 * spec.diameter);

    EllipsoidSpec spec8{11.86, Vec3::Ones(), 320};
    auto raw = voronoi(spec8, generate_seeds(spec8, 4242));
    auto conv = lloyd_refine(raw, 50, 1e-3 * spec8.diameter);
    REQUIRE(!conv.lloyd_displacements.empty());
    CHECK(conv.lloyd_displacements.back() < 1e-3 * spec8.diameter);
    CHECK(conv.lloyd_displacements.back() < conv.lloyd_displacements.front());
    CHECK(conv.lloyd_iterations + 1 == static_cast<int>(conv.lloyd_displacements.size()));

    auto same = lloyd_refine(raw, 50, std::numeric_limits<double>::infinity());
    CHECK(same.lloyd_iterations == 0);
    CHECK(same.seeds == raw.seeds);
    CHECK(to_json(same)["cells"] == to_json(raw)["cells"]);
}

TEST_CASE("tessellate: determinism and JSON round trip") {
    EllipsoidSpec spec{14.35, Vec3(1.1, 1.1, 1.0), 320};
    auto a = tessellate(spec, 123);
    auto b = tessellate(spec, 123);
    CHECK(to_json(a).dump() == to_json(b).dump());
    auto back = mesh_from_json(nlohmann::json::parse(to_json(a).dump()));
    CHECK(to_json(back).dump() == to_json(a).dump());
    auto bad = to_json(a);
    bad["schema"] = "crush.tessellation/0";
    CHECK_THROWS_AS(mesh_from_json(bad), Error);
}

TEST_CASE("voronoi: rejects bad seed sets") {
    EllipsoidSpec spec{11.86, Vec3::Ones(), 320};
    std::vector<Vec3> one = {Vec3::Zero()};
    CHECK_THROWS_AS(voronoi(spec, one), Error);
    std::vector<Vec3> outside = {Vec3::Zero(), Vec3(100, 0, 0)};
    CHECK_THROWS_AS(voronoi(spec, outside), Error);
}
