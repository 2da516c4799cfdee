#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lfk/geom3.hpp"
#include "lfk/point_index.hpp"
#include "lfk/rng.hpp"

namespace lfk {

/// Anatomical parameter vector of the synthetic heart-in-torso family:
/// 3 torso shape weights + 4 heart shape weights (all in [-1,1]) and
/// 3 heart rotation angles in [-pi/4, pi/4]. The heart center is a fixed
/// configuration constant, not a sampled parameter.
struct GeometryParams {
    std::array<double, 3> torso_weights{};
    std::array<double, 4> heart_weights{};
    std::array<double, 3> heart_rotation{};  // radians, (ax, ay, az)
    Vec3 heart_center{30.0, 20.0, 30.0};     // mm

    /// The 10 sampled components in order (torso, heart, angles).
    std::array<double, 10> flat() const {
        return {torso_weights[0], torso_weights[1], torso_weights[2],
                heart_weights[0], heart_weights[1], heart_weights[2], heart_weights[3],
                heart_rotation[0], heart_rotation[1], heart_rotation[2]};
    }
};

enum class Surface { Torso = 0, Epi = 1, LV = 2, RV = 3 };
constexpr int kNumSurfaces = 4;
const char* surface_name(Surface s);

/// Axis-aligned ellipsoid in its own local frame, optionally truncated by the
/// plane z_local <= cap_z (heart base). World pose = rotate + translate.
struct Ellipsoid {
    Vec3 semi_axes{1, 1, 1};
    Vec3 center{};          // world, mm
    Mat3 rot = Mat3::identity();   // local -> world
    bool capped = false;
    double cap_z = 0.0;     // local z of the base plane

    Vec3 to_local(const Vec3& p) const { return rot.transposed() * (p - center); }
    Vec3 to_world(const Vec3& q) const { return rot * q + center; }

    /// Negative inside, positive outside, zero on the surface.
    double implicit(const Vec3& p) const;
};

/// The four analytic surfaces of one geometry plus dense per-surface point
/// clouds for distance queries.
struct ShapeSet {
    GeometryParams params;
    Ellipsoid torso, epi, lv, rv;

    std::array<std::vector<Vec3>, kNumSurfaces> surface_clouds;
    std::array<PointGridIndex, kNumSurfaces> cloud_index;

    const Ellipsoid& surface(Surface s) const {
        switch (s) {
            case Surface::Torso: return torso;
            case Surface::Epi: return epi;
            case Surface::LV: return lv;
            default: return rv;
        }
    }

    /// Inside the solid myocardium: inside epicardium, outside both cavities.
    bool in_myocardium(const Vec3& p) const;
    /// Normalized transmural coordinate: 0 on the endocardium, 1 on the
    /// epicardium; defined through cloud distances.
    double transmural_depth(const Vec3& p) const;

    /// Torso bounding box half-extents (the torso semi-axes).
    Vec3 torso_box() const { return torso.semi_axes; }

    /// Map a world point to the normalized torso coordinates
    /// x in [-1,1] (right->left), y in [0,1] (posterior->anterior),
    /// z in [0,1] (inferior->superior).
    Vec3 normalize_electrode(const Vec3& p) const;
    Vec3 denormalize_electrode(const Vec3& n) const;

    /// Symmetric normalization of a spatial point to [-1,1]^3 (network input).
    Vec3 normalize_point(const Vec3& p) const {
        const Vec3 b = torso_box();
        return {p.x / b.x, p.y / b.y, p.z / b.z};
    }
};

struct ElectrodeSet {
    std::vector<Vec3> positions;    // mm, on the torso surface
    std::vector<Vec3> normalized;   // torso coordinates, see above
    std::vector<std::string> labels;

    std::size_t size() const { return positions.size(); }
    /// Index of a label, -1 if absent.
    int find(const std::string& label) const;
};

struct ElectrodeMode {
    enum Kind { Standard9, UniformAnterior } kind = Standard9;
    int n = 0;  // for UniformAnterior
    static ElectrodeMode standard9() { return {Standard9, 0}; }
    static ElectrodeMode uniform_anterior(int n) { return {UniformAnterior, n}; }
};

/// Family constants (base semi-axes in mm, modulation gains). Exposed for
/// tests; treat as fixed configuration.
struct ShapeFamily {
    Vec3 torso_base{200.0, 120.0, 280.0};
    double torso_gain = 0.15;
    Vec3 epi_base{42.0, 38.0, 58.0};
    Vec3 lv_base{13.0, 15.0, 28.0};
    Vec3 rv_base{11.0, 16.0, 27.0};
    Vec3 lv_center_base{-14.0, 0.0, -5.0};  // heart-local, mm
    Vec3 rv_center_base{15.0, 0.0, -2.0};
    double heart_gain = 0.05;   // per-surface size modulation
    double global_gain = 0.06;  // whole-heart size modulation (4th weight)
    double cap_z_base = 19.0;   // base plane, heart-local mm
    int cloud_points_torso = 40000;
    int cloud_points_heart = 16000;
};

/// Latin hypercube sample of n parameter vectors over
/// [-1,1]^7 x [-pi/4,pi/4]^3; deterministic in seed.
std::vector<GeometryParams> sample_geometry(std::uint64_t seed, int n);

/// Instantiate the analytic surfaces and point clouds for one parameter set.
ShapeSet make_shapes(const GeometryParams& params, const ShapeFamily& family = {});

/// Implicit function of one surface: negative inside, zero on, positive outside.
double implicit_value(const ShapeSet& shapes, Surface s, const Vec3& x);

/// Signed distance in mm (cloud-based magnitude, implicit sign).
double signed_distance(const ShapeSet& shapes, Surface s, const Vec3& x);

/// Mixture-sampled SDF training points: 50% near-surface (Gaussian offset
/// sigma = 5 mm), 30% uniform in the torso box, 20% uniform in the heart box.
/// Returns points and their 4 signed distances (torso, epi, lv, rv).
void sample_sdf_training_points(const ShapeSet& shapes, int n, std::uint64_t seed,
                                std::vector<Vec3>& points,
                                std::vector<std::array<double, 4>>& sdf);

/// Unit fiber direction at a myocardial point: helix angle interpolates
/// linearly from +40 deg (endo) to -50 deg (epi) in the transmural coordinate,
/// laid in the tangent plane of the epicardial ellipsoid.
Vec3 fiber_direction(const ShapeSet& shapes, const Vec3& x);

ElectrodeSet place_electrodes(const ShapeSet& shapes, const ElectrodeMode& mode);

/// Standard 9 + n uniform anterior electrodes, labels kept unique.
ElectrodeSet merged_electrodes(const ShapeSet& shapes, int n_unipolar);

}  // namespace lfk
