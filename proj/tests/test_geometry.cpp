#include "crush/error.hpp"
#include "crush/geometry.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace crush;
using namespace crush::geometry;
using crush::testing::random_hull;
using crush::testing::random_plane;
using crush::testing::random_rotation;

namespace {

ConvexPolyhedron unit_cube() { return ConvexPolyhedron::box(Vec3::Zero(), Vec3::Ones()); }

ConvexPolyhedron regular_tetrahedron(double edge) {
    const double s = edge / (2.0 * std::sqrt(2.0));
    std::vector<Vec3> p = {Vec3(1, 1, 1) * s, Vec3(1, -1, -1) * s, Vec3(-1, 1, -1) * s, Vec3(-1, -1, 1) * s};
    return ConvexPolyhedron::hull(p);
}

ConvexPolyhedron octahedron(double r) {
    std::vector<Vec3> p = {Vec3(r, 0, 0), Vec3(-r, 0, 0), Vec3(0, r, 0),
                           Vec3(0, -r, 0), Vec3(0, 0, r), Vec3(0, 0, -r)};
    return ConvexPolyhedron::hull(p);
}

}  // namespace

TEST_CASE("measure: unit cube, scaled cube, regular tetrahedron") {
    auto m = measure(unit_cube());
    CHECK(m.volume == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.surface_area == doctest::Approx(6.0).epsilon(1e-14));
    CHECK((m.centroid - Vec3::Constant(0.5)).norm() < 1e-14);
    CHECK(m.diameter == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));

    auto m2 = measure(unit_cube().scaled(2.0));
    CHECK(m2.volume == doctest::Approx(8.0).epsilon(1e-14));
    CHECK(m2.surface_area == doctest::Approx(24.0).epsilon(1e-14));

    auto mt = measure(regular_tetrahedron(1.0));
    CHECK(mt.volume == doctest::Approx(1.0 / (6.0 * std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("measure: box inertia tensor matches the closed form") {
    auto box = ConvexPolyhedron::box(Vec3(-2, -1, -0.5), Vec3(2, 1, 0.5));
    auto m = measure(box);
    const double V = 8.0;
    CHECK(m.inertia_tensor(0, 0) == doctest::Approx(V * (4 + 1) / 12.0).epsilon(1e-12));
    CHECK(m.inertia_tensor(1, 1) == doctest::Approx(V * (16 + 1) / 12.0).epsilon(1e-12));
    CHECK(m.inertia_tensor(2, 2) == doctest::Approx(V * (16 + 4) / 12.0).epsilon(1e-12));
    CHECK(std::abs(m.inertia_tensor(0, 1)) < 1e-12);
}

TEST_CASE("hull: cube points give six quads and valid invariants") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    pts.emplace_back(0.5, 0.5, 0.5);
    pts.emplace_back(0.5, 0.5, 1.0);  // on a face, not a vertex
    auto h = ConvexPolyhedron::hull(pts);
    CHECK(h.num_faces() == 6);
    CHECK(h.vertices().size() == 8);
    CHECK_NOTHROW(h.validate());
    CHECK(measure(h).volume == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hull: random hulls satisfy the polyhedron invariants") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        auto h = random_hull(rng, 30);
        CHECK_NOTHROW(h.validate());
    }
}

TEST_CASE("clip: cube examples") {
    auto half = clip(unit_cube(), {Vec3::UnitX(), 0.5});
    REQUIRE(half);
    CHECK(measure(*half).volume == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_NOTHROW(half->validate());

    auto same = clip(unit_cube(), {Vec3::UnitX(), 2.0});
    REQUIRE(same);
    CHECK(same->vertices().size() == 8);
    CHECK(measure(*same).volume == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_FALSE(clip(unit_cube(), {Vec3::UnitX(), -0.1}).has_value());

    // diagonal cut through two vertical edges
    auto wedge = clip(unit_cube(), {Vec3(1, 1, 0).normalized(), 1.0 / std::sqrt(2.0)});
    REQUIRE(wedge);
    CHECK(measure(*wedge).volume == doctest::Approx(0.5).epsilon(1e-13));
    CHECK_NOTHROW(wedge->validate());
}

TEST_CASE("clip: cap face carries the plane tag") {
    auto half = clip(unit_cube(), {Vec3::UnitZ(), 0.25, 42});
    REQUIRE(half);
    int tagged = 0;
    for (std::size_t f = 0; f < half->num_faces(); ++f)
        if (half->face_tags()[f] == 42) {
            ++tagged;
            CHECK(half->face_area(f) == doctest::Approx(1.0));
            CHECK(half->face_normal(f).z() == doctest::Approx(1.0));
        }
    CHECK(tagged == 1);
}

TEST_CASE("clip: random hull against rejection-sampling oracle (1%)") {
    Rng rng(2024);
    for (int t = 0; t < 5; ++t) {
        auto h = random_hull(rng, 30);
        auto pl = random_plane(rng, 0.3);
        auto c = clip(h, pl);
        REQUIRE(c);
        Rng mc(100 + t);
        const int n = 1'000'000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            Vec3 p(mc.uniform(-1, 1), mc.uniform(-1, 1), mc.uniform(-1, 1));
            if (crush::testing::inside_faces(h, p) && pl.normal.dot(p) <= pl.offset) ++hits;
        }
        const double oracle = 8.0 * hits / n;
        CHECK(measure(*c).volume == doctest::Approx(oracle).epsilon(0.01));
    }
}

TEST_CASE("property: clip conservation on random polyhedra and planes") {
    Rng rng(7);
    for (int t = 0; t < 200; ++t) {
        auto h = random_hull(rng, 10 + static_cast<int>(rng.below(40)));
        auto pl = random_plane(rng, 0.8);
        const double v = measure(h).volume;
        auto a = clip(h, pl);
        auto b = clip(h, pl.flipped());
        const double va = a ? measure(*a).volume : 0.0;
        const double vb = b ? measure(*b).volume : 0.0;
        CHECK(std::abs(va + vb - v) <= 1e-9 * v);
        if (a) CHECK_NOTHROW(a->validate());
        if (b) CHECK_NOTHROW(b->validate());
    }
}

TEST_CASE("property: measure scaling laws") {
    Rng rng(8);
    for (int t = 0; t < 50; ++t) {
        auto h = random_hull(rng, 25);
        const double s = rng.uniform(0.1, 10.0);
        auto m = measure(h);
        auto ms = measure(h.scaled(s));
        CHECK(std::abs(ms.volume - s * s * s * m.volume) <= 1e-12 * ms.volume);
        CHECK(std::abs(ms.surface_area - s * s * m.surface_area) <= 1e-12 * ms.surface_area);
        CHECK(std::abs(ms.diameter - s * m.diameter) <= 1e-12 * ms.diameter);
    }
}

TEST_CASE("principal_axes: box and rotated box") {
    auto box = ConvexPolyhedron::box(Vec3(0, 0, 0), Vec3(4, 2, 1));
    auto pa = principal_axes(box);
    CHECK(pa.semi_lengths[0] == doctest::Approx(2.0));
    CHECK(pa.semi_lengths[1] == doctest::Approx(1.0));
    CHECK(pa.semi_lengths[2] == doctest::Approx(0.5));
    CHECK(pa.euler_angles.norm() < 1e-12);

    Mat3 rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    auto rotated = principal_axes(box.transformed(rz, Vec3::Zero()));
    CHECK((rotated.semi_lengths - pa.semi_lengths).norm() < 1e-12);
}

TEST_CASE("principal_axes: ordering, reconstruction and rotation invariance") {
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
        auto h = random_hull(rng, 30);
        auto pa = principal_axes(h);
        CHECK(pa.semi_lengths[0] >= pa.semi_lengths[1]);
        CHECK(pa.semi_lengths[1] >= pa.semi_lengths[2]);
        Mat3 recon = pa.axes * pa.variances.asDiagonal() * pa.axes.transpose();
        CHECK((recon - pa.covariance).norm() <= 1e-9 * pa.covariance.norm());
        for (int k = 0; k < 3; ++k) {
            const Vec3 col = pa.axes.col(k);
            int big = 0;
            for (int i = 1; i < 3; ++i)
                if (std::abs(col[i]) > std::abs(col[big])) big = i;
            CHECK(col[big] > 0);
        }
        auto rotated = principal_axes(h.transformed(random_rotation(rng), Vec3(1, 2, 3)));
        CHECK((rotated.semi_lengths - pa.semi_lengths).norm() <= 1e-9 * pa.semi_lengths.norm());
    }
}

TEST_CASE("principal_axes: sphere ties are resolved without error") {
    auto sphere = ellipsoid_polyhedron({2.0, Vec3::Ones(), 320});
    CHECK_NOTHROW(principal_axes(sphere));
    auto a = principal_axes(sphere);
    auto b = principal_axes(sphere);
    CHECK(a.axes == b.axes);
}

TEST_CASE("euler_zxz round trip") {
    Rng rng(10);
    for (int t = 0; t < 100; ++t) {
        Mat3 r = random_rotation(rng);
        Vec3 e = euler_zxz(r);
        CHECK((rotation_zxz(e) - r).norm() < 1e-12);
        for (int k = 0; k < 3; ++k) {
            CHECK(e[k] >= -std::numbers::pi);
            CHECK(e[k] <= std::numbers::pi);
        }
    }
    CHECK((rotation_zxz(euler_zxz(Mat3::Identity())) - Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("sphere_bounds: cube and octahedron") {
    auto cb = sphere_bounds(unit_cube());
    CHECK(cb.inscribed_diameter == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cb.circumscribed_diameter == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    auto ob = sphere_bounds(octahedron(1.0));
    CHECK(ob.circumscribed_diameter == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ob.inscribed_diameter == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-9));
}

TEST_CASE("sphere_bounds: random hulls against grid-search oracle") {
    Rng rng(12);
    for (int t = 0; t < 5; ++t) {
        auto h = random_hull(rng, 30);
        auto sb = sphere_bounds(h);
        CHECK(sb.inscribed_diameter <= sb.circumscribed_diameter);
        for (const auto& v : h.vertices())
            CHECK((v - sb.circumscribed_center).norm() <= 0.5 * sb.circumscribed_diameter * (1 + 1e-9));

        // dense grid over the bounding box, distance to the face planes from vertex lists
        std::vector<std::pair<Vec3, double>> planes;
        for (const auto& ring : h.faces()) {
            Vec3 n = Vec3::Zero();
            for (std::size_t k = 0; k < ring.size(); ++k)
                n += h.vertices()[ring[k]].cross(h.vertices()[ring[(k + 1) % ring.size()]]);
            n.normalize();
            planes.emplace_back(n, n.dot(h.vertices()[ring[0]]));
        }
        double best = 0.0;
        const int g = 120;
        for (int i = 0; i <= g; ++i)
            for (int j = 0; j <= g; ++j)
                for (int k = 0; k <= g; ++k) {
                    Vec3 p(-1 + 2.0 * i / g, -1 + 2.0 * j / g, -1 + 2.0 * k / g);
                    double r = 1e9;
                    for (const auto& [n, off] : planes) r = std::min(r, off - n.dot(p));
                    best = std::max(best, r);
                }
        CHECK(sb.inscribed_diameter == doctest::Approx(2 * best).epsilon(0.01));
        CHECK(sb.inscribed_diameter >= 2 * best * (1 - 1e-9));
    }
}

TEST_CASE("ellipsoid_polyhedron: volumes and facet count") {
    const double unit = 4.0 / 3.0 * std::numbers::pi;
    auto s = ellipsoid_polyhedron({2.0, Vec3::Ones(), 320});
    CHECK(measure(s).volume == doctest::Approx(unit).epsilon(0.02));
    CHECK(std::abs(static_cast<int>(s.num_faces()) - 320) <= 32);
    CHECK_NOTHROW(s.validate());

    auto e = ellipsoid_polyhedron({2.0, Vec3(2, 1, 1), 320});
    CHECK(measure(e).volume == doctest::Approx(2 * unit).epsilon(0.02));

    CHECK_THROWS_AS(ellipsoid_polyhedron({2.0, Vec3(1, 0, 1), 320}), Error);
    CHECK_THROWS_AS(ellipsoid_polyhedron({2.0, Vec3(1, -1, 1), 320}), Error);
}

TEST_CASE("ellipsoid_polyhedron: Monte-Carlo ellipsoid volume oracle") {
    const EllipsoidSpec spec{11.86, Vec3(1.4, 1.4, 1.0), 320};
    const Vec3 a = spec.semi_axes();
    Rng rng(31337);
    const long n = 10'000'000;
    long hits = 0;
    for (long i = 0; i < n; ++i) {
        const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1), z = rng.uniform(-1, 1);
        if (x * x + y * y + z * z <= 1.0) ++hits;
    }
    const double oracle = 8.0 * a.prod() * static_cast<double>(hits) / n;
    CHECK(measure(ellipsoid_polyhedron(spec)).volume == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("polygon_measures: square face") {
    std::vector<Vec3> sq = {Vec3(0, 0, 1), Vec3(2, 0, 1), Vec3(2, 2, 1), Vec3(0, 2, 1)};
    auto pm = polygon_measures(sq);
    CHECK(pm.area == doctest::Approx(4.0));
    CHECK(pm.n_lines == 4);
    CHECK(pm.max_length == doctest::Approx(2 * std::sqrt(2.0)));
    CHECK((pm.centroid - Vec3(1, 1, 1)).norm() < 1e-14);
    CHECK(pm.frame.determinant() == doctest::Approx(1.0));
}
