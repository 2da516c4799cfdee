#include <doctest.h>

#include <cmath>
#include <map>

#include "lfk/errors.hpp"
#include "lfk/mesh.hpp"
#include "lfk/rng.hpp"

using namespace lfk;

namespace {

Ellipsoid sphere(double r) {
    Ellipsoid e;
    e.semi_axes = {r, r, r};
    return e;
}

double mesh_volume(const TetMesh& m) {
    double v = 0;
    for (double x : m.element_volume) v += x;
    return v;
}

}  // namespace

TEST_SUITE_BEGIN("mesh");

TEST_CASE("sphere volume within 5% at h=10") {
    const TetMesh m = build_mesh_single(sphere(100.0), 10.0);
    const double analytic = 4.0 / 3.0 * M_PI * 1e6;
    CHECK(mesh_volume(m) == doctest::Approx(analytic).epsilon(0.05));
}

TEST_CASE("volume converges first order on the sphere") {
    const double analytic = 4.0 / 3.0 * M_PI * 125000.0;  // r = 50
    double prev_err = 1e300;
    for (double h : {16.0, 8.0, 4.0}) {
        const TetMesh m = build_mesh_single(sphere(50.0), h);
        const double err = std::abs(mesh_volume(m) - analytic) / analytic;
        CHECK(err < prev_err);
        prev_err = err;
    }
}

TEST_CASE("faces are shared by at most two tets; boundary is closed") {
    const TetMesh m = build_mesh_single(sphere(40.0), 8.0);
    std::map<std::array<std::uint32_t, 3>, int> count;
    constexpr int F[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& t : m.tets)
        for (const auto& f : F) {
            std::array<std::uint32_t, 3> key = {t[f[0]], t[f[1]], t[f[2]]};
            std::sort(key.begin(), key.end());
            count[key]++;
        }
    std::size_t boundary = 0;
    for (const auto& [key, c] : count) {
        CHECK(c <= 2);
        if (c == 1) boundary++;
    }
    CHECK(boundary == m.boundary_faces.size());

    // outward orientation: normals point away from the sphere center
    for (std::size_t f = 0; f < m.boundary_faces.size(); ++f) {
        const auto& fv = m.boundary_faces[f];
        const Vec3 a = m.nodes[fv[0]], b = m.nodes[fv[1]], c = m.nodes[fv[2]];
        const Vec3 n = cross(b - a, c - a);
        const Vec3 centroid = (a + b + c) / 3.0;
        CHECK(dot(n, centroid) > 0.0);
        CHECK(m.boundary_face_area[f] > 0.0);
    }
}

TEST_CASE("default torso mesh has HEART elements, labeled by the myocardium") {
    GeometryParams p;
    const ShapeSet s = make_shapes(p);
    const TetMesh m = build_mesh(s, 8.0);
    const auto heart = m.heart_elements();
    CHECK(heart.size() > 0);
    CHECK(heart.size() < m.num_tets());
    for (std::uint32_t t : heart) {
        CHECK(s.in_myocardium(m.centroid(t)));
        CHECK(norm(m.fibers[t]) == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (std::size_t t = 0; t < m.num_tets(); ++t)
        if (m.region[t] == Region::Torso) CHECK(norm(m.fibers[t]) == 0.0);
    for (double v : m.element_volume) CHECK(v > 0.0);
}

TEST_CASE("too-coarse mesh raises a resolution error") {
    GeometryParams p;
    const ShapeSet s = make_shapes(p);
    CHECK_THROWS_AS(build_mesh(s, 70.0), InputError);
}

TEST_CASE("gradient operator reproduces affine fields and kills constants") {
    const TetMesh m = build_mesh_single(sphere(30.0), 10.0);
    Rng rng(3);
    const Vec3 a{0.3, -1.2, 2.1};
    const double b = 0.7;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t t = rng.index(m.num_tets());
        const GradOp op = element_gradient_operator(m, t);
        std::array<double, 4> affine, constant;
        for (int v = 0; v < 4; ++v) {
            affine[v] = dot(a, m.nodes[m.tets[t][v]]) + b;
            constant[v] = 3.25;
        }
        const Vec3 g = op.apply(affine);
        CHECK(norm(g - a) < 1e-10);
        CHECK(norm(op.apply(constant)) < 1e-10);
        // rows sum to zero
        for (int r = 0; r < 3; ++r)
            CHECK(op.b[r][0] + op.b[r][1] + op.b[r][2] + op.b[r][3] ==
                  doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("reference tet gradient matches the hand computation") {
    // unit reference tet: p0=(0,0,0), p1=(1,0,0), p2=(0,1,0), p3=(0,0,1)
    TetMesh m;
    m.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.tets = {{0, 1, 2, 3}};
    m.element_volume = {1.0 / 6.0};
    m.region = {Region::Torso};
    const GradOp op = element_gradient_operator(m, 0);
    // values (0,1,0,0) => gradient = grad lambda_1 = (1,0,0)
    const Vec3 g = op.apply({0, 1, 0, 0});
    CHECK(norm(g - Vec3{1, 0, 0}) < 1e-14);
    // values (1,0,0,0) => grad lambda_0 = (-1,-1,-1)
    const Vec3 g0 = op.apply({1, 0, 0, 0});
    CHECK(norm(g0 - Vec3{-1, -1, -1}) < 1e-14);
}

TEST_CASE("point location") {
    const TetMesh m = build_mesh_single(sphere(30.0), 10.0);
    const PointLocator loc(m);

    const auto hit = loc.locate(m.centroid(5));
    REQUIRE(hit.has_value());
    CHECK(hit->first == 5);
    for (double b : hit->second) CHECK(b == doctest::Approx(0.25).epsilon(1e-9));

    CHECK_FALSE(loc.locate({500, 0, 0}).has_value());

    // a point on a shared face: some adjacent tet contains it
    const auto& t = m.tets[0];
    const Vec3 face_pt = (m.nodes[t[1]] + m.nodes[t[2]] + m.nodes[t[3]]) / 3.0;
    const auto hit2 = loc.locate(face_pt);
    REQUIRE(hit2.has_value());
    for (double b : hit2->second) CHECK(b >= -1e-9);
}

TEST_CASE("nearest boundary node: exact, far, tie rule") {
    const TetMesh m = build_mesh_single(sphere(30.0), 10.0);
    std::uint32_t some_boundary = 0;
    for (std::uint32_t v = 0; v < m.num_nodes(); ++v)
        if (m.node_is_boundary[v]) {
            some_boundary = v;
            break;
        }
    CHECK(nearest_boundary_node(m, m.nodes[some_boundary]) == some_boundary);

    const std::uint32_t far = nearest_boundary_node(m, {1e5, 1e5, 1e5});
    CHECK(m.node_is_boundary[far]);

    // tie: query equidistant from two boundary nodes -> lower index
    std::uint32_t a = some_boundary, b = 0;
    bool found = false;
    for (std::uint32_t v = a + 1; v < m.num_nodes() && !found; ++v)
        if (m.node_is_boundary[v] && std::abs(norm(m.nodes[v]) - norm(m.nodes[a])) < 1e-9) {
            b = v;
            found = true;
        }
    if (found) {
        const Vec3 midpoint = (m.nodes[a] + m.nodes[b]) * 0.5;
        const std::uint32_t got = nearest_boundary_node(m, midpoint);
        if (norm(m.nodes[a] - midpoint) == norm(m.nodes[b] - midpoint)) CHECK(got <= b);
    }
}

TEST_SUITE_END();
