#include "crush/error.hpp"
#include "crush/features.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace crush;
using namespace crush::features;
using geometry::ConvexPolyhedron;
using geometry::EllipsoidSpec;
using geometry::Vec3;

namespace {

double pmd(const PmdVector& v, const char* name) { return v[pmd_index(name)]; }

ConvexPolyhedron ellipsoid(double d, Vec3 scale) { return geometry::ellipsoid_polyhedron({d, scale, 320}); }

// Two cells split by the plane x = 0 inside the box [-1,1]^3.
tessellation::FragmentMesh two_cells() {
    const auto box = ConvexPolyhedron::box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
    const std::vector<Vec3> seeds = {Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)};
    return tessellation::voronoi({2.0, Vec3::Ones(), 320}, box, seeds);
}

const tessellation::FragmentMesh& random_mesh() {
    static const auto mesh = tessellation::tessellate({16.85, Vec3(1.2, 1.0, 0.9), 320}, 11);
    return mesh;
}

}  // namespace

TEST_CASE("registry: 35 unique descriptors in five categories") {
    const auto& reg = registry();
    REQUIRE(reg.size() == 35);
    CHECK(registry_version() == 1);
    std::set<std::string> names;
    for (const auto& d : reg) {
        names.insert(d.name);
        CHECK_FALSE(d.formula.empty());
        CHECK_FALSE(d.unit.empty());
    }
    CHECK(names.size() == 35);
    auto count = [&](const char* c) { return std::count_if(reg.begin(), reg.end(), [&](auto& d) { return d.category == c; }); };
    CHECK(count("geometric") == 9);
    CHECK(count("form") == 13);
    CHECK(count("roundness") == 3);
    CHECK(count("sphericity") == 9);
    CHECK(count("instability") == 1);
    // categories are contiguous blocks in that order
    CHECK(reg[0].category == "geometric");
    CHECK(reg[9].category == "form");
    CHECK(reg[22].category == "roundness");
    CHECK(reg[25].category == "sphericity");
    CHECK(reg[34].category == "instability");
    CHECK_THROWS_AS(pmd_index("nope"), Error);
}

TEST_CASE("compute_pmd: sphere limits") {
    const auto v = compute_pmd(ellipsoid(2.0, Vec3::Ones()));
    CHECK(std::abs(pmd(v, "wadell") - 1.0) <= 0.02);
    CHECK(std::abs(pmd(v, "elongation") - 1.0) <= 0.02);
    CHECK(std::abs(pmd(v, "flatness") - 1.0) <= 0.02);
    CHECK(pmd(v, "volume") == doctest::Approx(4.0 / 3.0 * std::numbers::pi).epsilon(0.02));
    CHECK(pmd(v, "equivalent_diameter") == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("compute_pmd: oblate ellipsoid flatness") {
    const auto v = compute_pmd(ellipsoid(10.0, Vec3(1.4, 1.4, 1.0)));
    CHECK(std::abs(pmd(v, "flatness") - 1 / 1.4) <= 0.02 * (1 / 1.4));
    CHECK(pmd(v, "disc_rod") >= 0.0);
    CHECK(pmd(v, "disc_rod") <= 1.0);
}

TEST_CASE("compute_pmd: degenerate disc-rod index is 0.5") {
    const auto v = compute_pmd(ConvexPolyhedron::box(Vec3(0, 0, 0), Vec3(1, 1, 1)));
    CHECK(pmd(v, "disc_rod") == 0.5);
    CHECK(pmd(v, "oblate_prolate") == 0.0);
    CHECK(pmd(v, "box_fill") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pmd(v, "support_offset") == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("compute_pmd: Krumbein and form ratios recomputed from principal axes") {
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        const auto poly = testing::random_hull(rng, 40, 3.0);
        const auto v = compute_pmd(poly);
        const auto ax = geometry::principal_axes(poly);
        const double L = 2 * ax.semi_lengths[0], I = 2 * ax.semi_lengths[1], S = 2 * ax.semi_lengths[2];
        CHECK(pmd(v, "krumbein") == std::cbrt((I * S) / (L * L)));
        CHECK(pmd(v, "elongation") == I / L);
        CHECK(pmd(v, "corey") == S / std::sqrt(L * I));
        CHECK(pmd(v, "long_length") == L);
    }
}

TEST_CASE("compute_pmd: finite, sphericity in (0, 1.05]") {
    Rng rng(8);
    std::vector<ConvexPolyhedron> polys = {ellipsoid(11.86, Vec3(1.2, 1.0, 0.8)), ellipsoid(20, Vec3(1, 1, 1.4)),
                                           ConvexPolyhedron::box(Vec3(0, 0, 0), Vec3(3, 1, 0.2))};
    for (int t = 0; t < 10; ++t) polys.push_back(testing::random_hull(rng, 25, 2.0));
    for (const auto& p : polys) {
        const auto v = compute_pmd(p);
        for (int i = 0; i < kPmdCount; ++i) {
            CHECK(std::isfinite(v[i]));
            if (registry()[i].category == "sphericity") {
                CHECK(v[i] > 0.0);
                CHECK(v[i] <= 1.05);
            }
        }
    }
}

TEST_CASE("compute_pmd: rotation invariance and scaling laws") {
    Rng rng(21);
    std::vector<ConvexPolyhedron> polys = {ellipsoid(14.35, Vec3(1.2, 1.0, 0.8))};
    for (int t = 0; t < 4; ++t) polys.push_back(testing::random_hull(rng, 30, 2.0));
    for (const auto& poly : polys) {
        const auto base = compute_pmd(poly);
        for (int r = 0; r < 3; ++r) {
            const auto rot = testing::random_rotation(rng);
            const auto v = compute_pmd(poly.transformed(rot, Vec3(rng.uniform(-5, 5), 1.0, -2.0)));
            for (int i = 0; i < kPmdCount; ++i)
                CHECK_MESSAGE(std::abs(v[i] - base[i]) <= 1e-6 * std::max(1.0, std::abs(base[i])), registry()[i].name);
        }
        const double s = 2.5;
        const auto v = compute_pmd(poly.scaled(s));
        for (int i = 0; i < kPmdCount; ++i) {
            const auto& unit = registry()[i].unit;
            const double power = unit == "mm3" ? 3 : unit == "mm2" ? 2 : unit == "mm" ? 1 : 0;
            const double expect = base[i] * std::pow(s, power);
            const double tol = power == 0 ? 1e-9 : 1e-9 * std::abs(expect);
            CHECK_MESSAGE(std::abs(v[i] - expect) <= std::max(tol, 1e-12), registry()[i].name);
        }
    }
}

TEST_CASE("node and edge features: two symmetric cells") {
    const auto mesh = two_cells();
    REQUIRE(mesh.size() == 2);
    REQUIRE(mesh.adjacency.size() == 1);
    const auto a = compute_node_features(mesh, 0), b = compute_node_features(mesh, 1);
    CHECK(a.size() == 11);
    CHECK(a[4] == 1.0);
    CHECK(b[4] == 1.0);
    CHECK(std::abs(a[0] - b[0]) <= 1e-9);
    CHECK(a[0] == doctest::Approx(4.0));
    CHECK(a[3] == 6.0);
    CHECK(a[2] == doctest::Approx(std::sqrt(1 + 4 + 4.0)));
    const auto e = compute_edge_features(mesh, 0);
    CHECK(e.size() == 9);
    CHECK(e[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(e[1] == 4.0);
    CHECK(e[2] == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(std::abs(e[3]) <= 1e-12);
    const auto d = distance_features(mesh);
    CHECK(d.per_node[0][0] == doctest::Approx(1.0));
    for (int k = 1; k < kDistanceCount; ++k) CHECK(d.per_node[0][k] == 0.0);
}

TEST_CASE("node features: partition of volume and neighbour recount") {
    const auto& mesh = random_mesh();
    REQUIRE(mesh.size() >= 10);
    double total = 0.0;
    std::vector<int> deg(mesh.size(), 0);
    for (const auto& a : mesh.adjacency) ++deg[a.i], ++deg[a.j];
    for (std::size_t c = 0; c < mesh.size(); ++c) {
        const auto f = compute_node_features(mesh, static_cast<int>(c));
        total += f[0];
        CHECK(f[4] == deg[c]);
        CHECK(f[3] == mesh.cells[c].num_faces());
        CHECK(f[2] > 0.0);
    }
    CHECK(std::abs(total - geometry::measure(mesh.boundary).volume) <= 1e-6 * total);
}

TEST_CASE("edge features: shared faces match an independent re-clip from both sides") {
    const auto& mesh = random_mesh();
    const auto& seeds = mesh.seeds;
    // cell k rebuilt from the boundary and the bisectors of its seed
    auto rebuild = [&](int k) {
        ConvexPolyhedron cell = mesh.boundary;
        for (int o = 0; o < static_cast<int>(seeds.size()); ++o) {
            if (o == k) continue;
            const Vec3 n = seeds[o] - seeds[k];
            const double off = 0.5 * (seeds[o].squaredNorm() - seeds[k].squaredNorm());
            auto clipped = geometry::clip(cell, {n / n.norm(), off / n.norm(), o});
            REQUIRE(clipped.has_value());
            cell = *clipped;
        }
        return cell;
    };
    auto tagged_area = [](const ConvexPolyhedron& cell, int tag) {
        double a = 0.0;
        for (std::size_t f = 0; f < cell.num_faces(); ++f)
            if (cell.face_tags()[f] == tag) a += cell.face_area(f);
        return a;
    };
    for (int e = 0; e < static_cast<int>(mesh.adjacency.size()); ++e) {
        const auto& adj = mesh.adjacency[e];
        const auto f = compute_edge_features(mesh, e);
        CHECK(f[0] > 0.0);
        CHECK(f[1] >= 3.0);
        CHECK(f[2] > 0.0);
        CHECK(std::abs(f[0] - tagged_area(rebuild(adj.i), adj.j)) <= 1e-9);
        CHECK(std::abs(f[0] - tagged_area(rebuild(adj.j), adj.i)) <= 1e-9);
    }
}

TEST_CASE("edge features: order of the cell pair only flips the normal") {
    const auto& mesh = random_mesh();
    auto swapped = mesh;
    for (auto& a : swapped.adjacency) {
        std::swap(a.i, a.j);
        std::reverse(a.face.begin(), a.face.end());
    }
    for (int e = 0; e < static_cast<int>(mesh.adjacency.size()); ++e) {
        const auto a = compute_edge_features(mesh, e), b = compute_edge_features(swapped, e);
        for (int k = 0; k < kEdgeFeatureCount; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
    }
}

TEST_CASE("distance features: brute-force oracle") {
    const auto& mesh = random_mesh();
    const auto d = distance_features(mesh);
    std::vector<Vec3> c;
    for (const auto& cell : mesh.cells) {
        // centroid by tetrahedral decomposition from the first vertex
        const auto& v = cell.vertices();
        Vec3 acc = Vec3::Zero();
        double vol = 0.0;
        for (const auto& ring : cell.faces())
            for (std::size_t k = 1; k + 1 < ring.size(); ++k) {
                const Vec3 a = v[ring[0]] - v[0], b = v[ring[k]] - v[0], e = v[ring[k + 1]] - v[0];
                const double t = a.dot(b.cross(e)) / 6.0;
                vol += t;
                acc += t * (a + b + e) / 4.0;
            }
        c.push_back(v[0] + acc / vol);
    }
    std::vector<double> all;
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < c.size(); ++j)
            if (j != i) row.push_back((c[i] - c[j]).norm());
        for (std::size_t j = i + 1; j < c.size(); ++j) all.push_back((c[i] - c[j]).norm());
        std::sort(row.rbegin(), row.rend());
        for (int k = 0; k < kDistanceCount; ++k) CHECK(std::abs(d.per_node[i][k] - row[k]) <= 1e-9);
    }
    std::sort(all.rbegin(), all.rend());
    double max0 = 0.0;
    for (const auto& row : d.per_node) max0 = std::max(max0, row[0]);
    CHECK(d.per_particle[0] == max0);
    for (int k = 0; k < kDistanceCount; ++k) CHECK(std::abs(d.per_particle[k] - all[k]) <= 1e-9);
}
