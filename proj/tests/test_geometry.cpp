#include <doctest.h>

#include <cmath>
#include <set>

#include "lfk/errors.hpp"
#include "lfk/geometry.hpp"
#include "lfk/rng.hpp"

using namespace lfk;

namespace {

ShapeSet default_shapes(double tw = 0.0) {
    GeometryParams p;
    p.torso_weights = {tw, tw, tw};
    return make_shapes(p);
}

/// Sphere-shaped "torso" for analytic distance checks.
ShapeSet sphere_shapes(double radius) {
    GeometryParams p;
    ShapeFamily fam;
    fam.torso_base = {radius, radius, radius};
    fam.torso_gain = 0.0;
    return make_shapes(p, fam);
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("latin hypercube sampling: ranges, stratification, determinism") {
    const auto one = sample_geometry(0, 1);
    REQUIRE(one.size() == 1);
    for (double w : one[0].torso_weights) CHECK(std::abs(w) <= 1.0);
    for (double w : one[0].heart_weights) CHECK(std::abs(w) <= 1.0);
    for (double a : one[0].heart_rotation) CHECK(std::abs(a) <= M_PI / 4 + 1e-12);

    const int n = 100;
    const auto batch = sample_geometry(0, n);
    REQUIRE(batch.size() == n);
    // one sample per 1/n stratum in every marginal
    for (int d = 0; d < 10; ++d) {
        std::set<int> strata;
        for (const auto& g : batch) {
            const auto flat = g.flat();
            const double lo = d < 7 ? -1.0 : -M_PI / 4;
            const double hi = -lo;
            const double u = (flat[d] - lo) / (hi - lo);
            strata.insert(static_cast<int>(u * n));
        }
        CHECK(strata.size() == n);
    }

    const auto again = sample_geometry(0, n);
    for (int i = 0; i < n; ++i) CHECK(batch[i].flat() == again[i].flat());
}

TEST_CASE("implicit values: surface, interior, exterior") {
    const ShapeSet s = default_shapes();
    const Vec3 a = s.torso.semi_axes;
    CHECK(implicit_value(s, Surface::Torso, {a.x, 0, 0}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(implicit_value(s, Surface::Torso, {0, 0, 0}) < 0.0);
    CHECK(implicit_value(s, Surface::Torso, {10 * a.x, 0, 0}) > 0.0);

    CHECK(implicit_value(s, Surface::Epi, s.epi.center) < 0.0);
    // above the base cap plane the epicardial implicit is positive
    const Vec3 above = s.epi.to_world({0, 0, s.epi.cap_z + 5.0});
    CHECK(implicit_value(s, Surface::Epi, above) > 0.0);
}

TEST_CASE("signed distance against the analytic sphere") {
    const ShapeSet s = sphere_shapes(50.0);
    // generous tolerance: cloud spacing
    CHECK(signed_distance(s, Surface::Torso, {60, 0, 0}) == doctest::Approx(10.0).epsilon(0.08));
    CHECK(std::abs(signed_distance(s, Surface::Torso, {50, 0, 0})) < 2.0);
    CHECK(signed_distance(s, Surface::Torso, {0, 0, 0}) == doctest::Approx(-50.0).epsilon(0.04));
}

TEST_CASE("signed distance sign agrees with the implicit everywhere") {
    const ShapeSet s = default_shapes(0.3);
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p{rng.uniform(-260, 260), rng.uniform(-160, 160), rng.uniform(-340, 340)};
        for (int k = 0; k < kNumSurfaces; ++k) {
            const auto surf = static_cast<Surface>(k);
            const double f = implicit_value(s, surf, p);
            const double d = signed_distance(s, surf, p);
            if (std::abs(d) > 1e-9) CHECK((f < 0) == (d < 0));
        }
    }
}

TEST_CASE("sdf training point mixture") {
    const ShapeSet s = default_shapes();
    std::vector<Vec3> pts;
    std::vector<std::array<double, 4>> sdf;
    sample_sdf_training_points(s, 1000, 42, pts, sdf);
    REQUIRE(pts.size() == 1000);
    REQUIRE(sdf.size() == 1000);

    int near = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double dmin = 1e300;
        for (int k = 0; k < 4; ++k) {
            CHECK(std::isfinite(sdf[i][k]));
            dmin = std::min(dmin, std::abs(sdf[i][k]));
        }
        if (dmin <= 15.0) near += 1;
    }
    CHECK(near >= 450);

    std::vector<Vec3> pts2;
    std::vector<std::array<double, 4>> sdf2;
    sample_sdf_training_points(s, 1000, 42, pts2, sdf2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].x == pts2[i].x);
        CHECK(sdf[i] == sdf2[i]);
    }
}

TEST_CASE("fiber helix angle: endo +40, midwall -5, epi -50") {
    const ShapeSet s = default_shapes();

    auto helix_of = [&](const Vec3& x) {
        const Vec3 f = fiber_direction(s, x);
        // reconstruct the local frame used by the rule
        const Vec3 q = s.epi.to_local(x);
        const Vec3 sa = s.epi.semi_axes;
        const Vec3 n = normalized({q.x / (sa.x * sa.x), q.y / (sa.y * sa.y), q.z / (sa.z * sa.z)});
        Vec3 circ = normalized(cross(Vec3{0, 0, 1}, n));
        const Vec3 longi = cross(n, circ);
        const Vec3 fl = s.epi.rot.transposed() * f;
        return std::atan2(dot(fl, longi), dot(fl, circ)) * 180.0 / M_PI;
    };

    // walk the -x free wall ray from the LV cavity to the epicardium
    const Vec3 dir = normalized(s.epi.rot * Vec3{-1, 0, 0});
    auto point_at_depth = [&](double target) {
        // bisect transmural depth along the ray between the cavity wall and epi
        double lo = 29.0, hi = 41.9;  // mm from heart center along -x
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vec3 p = s.epi.center + dir * mid;
            (s.transmural_depth(p) < target ? lo : hi) = mid;
        }
        return s.epi.center + dir * (0.5 * (lo + hi));
    };

    const Vec3 mid = point_at_depth(0.5);
    REQUIRE(s.in_myocardium(mid));
    CHECK(helix_of(mid) == doctest::Approx(-5.0).epsilon(0.1));

    // endocardial anchor: an LV cloud point nudged into the wall
    const Vec3 endo_anchor = point_at_depth(0.02);
    CHECK(helix_of(endo_anchor) == doctest::Approx(40.0 - 0.02 * 90.0).epsilon(0.03));

    const Vec3 epi_anchor = point_at_depth(0.98);
    CHECK(helix_of(epi_anchor) == doctest::Approx(-50.0 + 0.02 * 90.0).epsilon(0.03));

    // unit norm across the wall
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p = point_at_depth(rng.uniform(0.02, 0.98));
        CHECK(norm(fiber_direction(s, p)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fiber continuity under 0.1 mm perturbations") {
    const ShapeSet s = default_shapes();
    Rng rng(17);
    int tested = 0;
    while (tested < 300) {
        const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Vec3 p = s.epi.to_world({q.x * s.epi.semi_axes.x, q.y * s.epi.semi_axes.y,
                                       q.z * s.epi.semi_axes.z});
        if (!s.in_myocardium(p)) continue;
        const Vec3 d = rng.unit_vector() * 0.1;
        if (!s.in_myocardium(p + d)) continue;
        const Vec3 f1 = fiber_direction(s, p);
        const Vec3 f2 = fiber_direction(s, p + d);
        const double angle = std::acos(std::min(1.0, std::abs(dot(f1, f2)))) * 180.0 / M_PI;
        CHECK(angle < 1.0);
        ++tested;
    }
}

TEST_CASE("fiber outside the myocardium is a domain error") {
    const ShapeSet s = default_shapes();
    CHECK_THROWS_AS(fiber_direction(s, {0, 0, 0}), InputError);
    CHECK_THROWS_AS(fiber_direction(s, s.lv.center), InputError);
}

TEST_CASE("electrodes: standard9 layout") {
    const ShapeSet s = default_shapes(0.2);
    const ElectrodeSet es = place_electrodes(s, ElectrodeMode::standard9());
    REQUIRE(es.size() == 9);
    for (std::size_t i = 0; i < es.size(); ++i) {
        // on the implicit surface within 1 mm (positions are analytic)
        CHECK(std::abs(signed_distance(s, Surface::Torso, es.positions[i])) < 1.0);
        CHECK(es.positions[i].y > 0.0);  // anterior
    }
    // sign convention: left-side electrodes have positive normalized x
    CHECK(es.normalized[es.find("LA")].x > 0.0);
    CHECK(es.normalized[es.find("V6")].x > 0.0);
    CHECK(es.normalized[es.find("RA")].x < 0.0);
    CHECK(es.normalized[es.find("V1")].x < 0.0);
}

TEST_CASE("electrodes: uniform anterior") {
    const ShapeSet s = default_shapes();
    const ElectrodeSet es = place_electrodes(s, ElectrodeMode::uniform_anterior(100));
    REQUIRE(es.size() == 100);
    double min_d = 1e300;
    for (std::size_t i = 0; i < es.size(); ++i) {
        CHECK(es.positions[i].y > 0.0);
        CHECK(std::abs(implicit_value(s, Surface::Torso, es.positions[i])) < 1e-9);
        for (std::size_t j = i + 1; j < es.size(); ++j)
            min_d = std::min(min_d, norm(es.positions[i] - es.positions[j]));
    }
    CHECK(min_d > 0.0);
    CHECK(es.labels[0] == "U001");
}

TEST_CASE("electrode normalization is exactly invertible") {
    const ShapeSet s = default_shapes(-0.4);
    const ElectrodeSet es = merged_electrodes(s, 20);
    for (std::size_t i = 0; i < es.size(); ++i) {
        const Vec3 back = s.denormalize_electrode(es.normalized[i]);
        CHECK(norm(back - es.positions[i]) < 1e-6);
        CHECK(es.normalized[i].x >= -1.0);
        CHECK(es.normalized[i].x <= 1.0);
        CHECK(es.normalized[i].y >= 0.0);
        CHECK(es.normalized[i].y <= 1.0);
        CHECK(es.normalized[i].z >= 0.0);
        CHECK(es.normalized[i].z <= 1.0);
    }
}

TEST_CASE("heart stays strictly inside the torso across the family") {
    const auto params = sample_geometry(123, 40);
    Rng rng(7);
    for (const auto& p : params) {
        const ShapeSet s = make_shapes(p);
        int inside = 0;
        while (inside < 250) {
            const Vec3 q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const Vec3 x = s.epi.to_world({q.x * s.epi.semi_axes.x, q.y * s.epi.semi_axes.y,
                                           q.z * s.epi.semi_axes.z});
            if (implicit_value(s, Surface::Epi, x) >= 0) continue;
            CHECK(implicit_value(s, Surface::Torso, x) < 0.0);
            ++inside;
        }
        // cavities inside the epicardial region
        CHECK(implicit_value(s, Surface::Epi, s.lv.center) < 0.0);
        CHECK(implicit_value(s, Surface::Epi, s.rv.center) < 0.0);
    }
}

TEST_SUITE_END();
