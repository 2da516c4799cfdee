#include "lfk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfk/errors.hpp"

namespace lfk {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;
}  // namespace

const char* surface_name(Surface s) {
    switch (s) {
        case Surface::Torso: return "torso";
        case Surface::Epi: return "epi";
        case Surface::LV: return "lv";
        default: return "rv";
    }
}

double Ellipsoid::implicit(const Vec3& p) const {
    const Vec3 q = to_local(p);
    const double rho = std::sqrt(q.x * q.x / (semi_axes.x * semi_axes.x) +
                                 q.y * q.y / (semi_axes.y * semi_axes.y) +
                                 q.z * q.z / (semi_axes.z * semi_axes.z));
    const double f_ell = rho - 1.0;
    if (!capped) return f_ell;
    const double f_cap = (q.z - cap_z) / semi_axes.z;
    return std::max(f_ell, f_cap);
}

int ElectrodeSet::find(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    return -1;
}

std::vector<GeometryParams> sample_geometry(std::uint64_t seed, int n) {
    if (n < 1) throw InputError("sample_geometry: n must be >= 1");
    constexpr int kDims = 10;
    const double lo[kDims] = {-1, -1, -1, -1, -1, -1, -1, -kPi / 4, -kPi / 4, -kPi / 4};
    const double hi[kDims] = {1, 1, 1, 1, 1, 1, 1, kPi / 4, kPi / 4, kPi / 4};

    Rng rng = Rng::stream(seed, 0xA11CE);
    std::vector<std::array<double, kDims>> values(n);
    std::vector<int> perm(n);
    for (int d = 0; d < kDims; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        // Fisher-Yates; one stratum per sample and dimension (Latin hypercube)
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(rng.index(static_cast<std::size_t>(i) + 1));
            std::swap(perm[i], perm[j]);
        }
        for (int i = 0; i < n; ++i) {
            const double u = (perm[i] + rng.uniform()) / n;
            values[i][d] = lo[d] + u * (hi[d] - lo[d]);
        }
    }

    std::vector<GeometryParams> out(n);
    for (int i = 0; i < n; ++i) {
        GeometryParams& g = out[i];
        for (int d = 0; d < 3; ++d) g.torso_weights[d] = values[i][d];
        for (int d = 0; d < 4; ++d) g.heart_weights[d] = values[i][3 + d];
        for (int d = 0; d < 3; ++d) g.heart_rotation[d] = values[i][7 + d];
    }
    return out;
}

namespace {

/// Area-uniform samples of a (possibly capped) ellipsoid surface, local frame.
std::vector<Vec3> sample_ellipsoid_surface_local(const Ellipsoid& e, int n, Rng& rng) {
    const double a = e.semi_axes.x, b = e.semi_axes.y, c = e.semi_axes.z;
    std::vector<Vec3> pts;
    pts.reserve(n);

    int n_cap = 0;
    double cap_rx = 0, cap_ry = 0;
    if (e.capped) {
        const double f = std::sqrt(std::max(0.0, 1.0 - (e.cap_z / c) * (e.cap_z / c)));
        cap_rx = a * f;
        cap_ry = b * f;
        const double cap_area = kPi * cap_rx * cap_ry;
        // Knud Thomsen approximation for the full ellipsoid area
        const double p = 1.6075;
        const double full = 4.0 * kPi *
            std::pow((std::pow(a * b, p) + std::pow(a * c, p) + std::pow(b * c, p)) / 3.0, 1.0 / p);
        const double frac_below = 0.5 * (1.0 + e.cap_z / c);  // sphere-measure estimate
        n_cap = static_cast<int>(n * cap_area / (cap_area + full * frac_below));
    }

    // cap disk
    for (int i = 0; i < n_cap; ++i) {
        const double r = std::sqrt(rng.uniform());
        const double t = rng.uniform(0.0, 2.0 * kPi);
        pts.push_back({cap_rx * r * std::cos(t), cap_ry * r * std::sin(t), e.cap_z});
    }

    // ellipsoid part, rejection for area uniformity
    const double wmax = 1.0 / std::min({a, b, c});
    while (static_cast<int>(pts.size()) < n) {
        const Vec3 u = rng.unit_vector();
        const double w = std::sqrt(u.x * u.x / (a * a) + u.y * u.y / (b * b) + u.z * u.z / (c * c));
        if (rng.uniform() * wmax > w) continue;
        const Vec3 q{a * u.x, b * u.y, c * u.z};
        if (e.capped && q.z > e.cap_z) continue;
        pts.push_back(q);
    }
    return pts;
}

std::vector<Vec3> sample_surface_world(const Ellipsoid& e, int n, Rng& rng) {
    std::vector<Vec3> local = sample_ellipsoid_surface_local(e, n, rng);
    std::vector<Vec3> world(local.size());
    for (std::size_t i = 0; i < local.size(); ++i) world[i] = e.to_world(local[i]);
    return world;
}

}  // namespace

ShapeSet make_shapes(const GeometryParams& params, const ShapeFamily& fam) {
    ShapeSet s;
    s.params = params;

    s.torso.semi_axes = {fam.torso_base.x * (1.0 + fam.torso_gain * params.torso_weights[0]),
                         fam.torso_base.y * (1.0 + fam.torso_gain * params.torso_weights[1]),
                         fam.torso_base.z * (1.0 + fam.torso_gain * params.torso_weights[2])};

    const double s_all = 1.0 + fam.global_gain * params.heart_weights[3];
    const double s_epi = (1.0 + fam.heart_gain * params.heart_weights[0]) * s_all;
    const double s_lv = (1.0 + fam.heart_gain * params.heart_weights[1]) * s_all;
    const double s_rv = (1.0 + fam.heart_gain * params.heart_weights[2]) * s_all;

    const Mat3 R = Mat3::rot_z(params.heart_rotation[2]) *
                   Mat3::rot_y(params.heart_rotation[1]) *
                   Mat3::rot_x(params.heart_rotation[0]);

    s.epi.semi_axes = fam.epi_base * s_epi;
    s.epi.center = params.heart_center;
    s.epi.rot = R;
    s.epi.capped = true;
    s.epi.cap_z = fam.cap_z_base * s_epi;

    s.lv.semi_axes = fam.lv_base * s_lv;
    s.lv.center = params.heart_center + R * (fam.lv_center_base * s_epi);
    s.lv.rot = R;
    s.lv.capped = true;
    s.lv.cap_z = s.epi.cap_z - dot(Vec3{0, 0, 1}, fam.lv_center_base * s_epi);

    s.rv.semi_axes = fam.rv_base * s_rv;
    s.rv.center = params.heart_center + R * (fam.rv_center_base * s_epi);
    s.rv.rot = R;
    s.rv.capped = true;
    s.rv.cap_z = s.epi.cap_z - dot(Vec3{0, 0, 1}, fam.rv_center_base * s_epi);

    Rng rng = Rng::stream(0xC10'0D5, 1);
    s.surface_clouds[0] = sample_surface_world(s.torso, fam.cloud_points_torso, rng);
    s.surface_clouds[1] = sample_surface_world(s.epi, fam.cloud_points_heart, rng);
    s.surface_clouds[2] = sample_surface_world(s.lv, fam.cloud_points_heart, rng);
    s.surface_clouds[3] = sample_surface_world(s.rv, fam.cloud_points_heart, rng);
    for (int k = 0; k < kNumSurfaces; ++k) s.cloud_index[k].build(s.surface_clouds[k]);
    return s;
}

double implicit_value(const ShapeSet& shapes, Surface surface, const Vec3& x) {
    return shapes.surface(surface).implicit(x);
}

double signed_distance(const ShapeSet& shapes, Surface surface, const Vec3& x) {
    const auto& index = shapes.cloud_index[static_cast<int>(surface)];
    if (index.empty()) throw ConfigError("signed_distance: empty surface cloud");
    const double d = index.nearest_distance(x);
    return implicit_value(shapes, surface, x) < 0.0 ? -d : d;
}

bool ShapeSet::in_myocardium(const Vec3& p) const {
    return epi.implicit(p) < 0.0 && lv.implicit(p) > 0.0 && rv.implicit(p) > 0.0;
}

double ShapeSet::transmural_depth(const Vec3& p) const {
    const double d_lv = cloud_index[static_cast<int>(Surface::LV)].nearest_distance(p);
    const double d_rv = cloud_index[static_cast<int>(Surface::RV)].nearest_distance(p);
    const double d_endo = std::min(d_lv, d_rv);
    const double d_epi = cloud_index[static_cast<int>(Surface::Epi)].nearest_distance(p);
    const double denom = d_endo + d_epi;
    return denom > 0.0 ? d_endo / denom : 0.0;
}

Vec3 ShapeSet::normalize_electrode(const Vec3& p) const {
    const Vec3 b = torso.semi_axes;
    return {p.x / b.x, (p.y + b.y) / (2.0 * b.y), (p.z + b.z) / (2.0 * b.z)};
}

Vec3 ShapeSet::denormalize_electrode(const Vec3& n) const {
    const Vec3 b = torso.semi_axes;
    return {n.x * b.x, n.y * 2.0 * b.y - b.y, n.z * 2.0 * b.z - b.z};
}

void sample_sdf_training_points(const ShapeSet& shapes, int n, std::uint64_t seed,
                                std::vector<Vec3>& points,
                                std::vector<std::array<double, 4>>& sdf) {
    if (n < 1) throw InputError("sample_sdf_training_points: n must be >= 1");
    Rng rng = Rng::stream(seed, 0x5DF);
    points.clear();
    sdf.clear();
    points.reserve(n);

    const int n_near = n / 2;
    const int n_torso = (3 * n) / 10;
    const int n_heart = n - n_near - n_torso;

    for (int i = 0; i < n_near; ++i) {
        const int surf = static_cast<int>(rng.index(kNumSurfaces));
        const auto& cloud = shapes.surface_clouds[surf];
        const Vec3 anchor = cloud[rng.index(cloud.size())];
        points.push_back(anchor + rng.normal3() * 5.0);
    }

    const Vec3 tb = shapes.torso_box();
    for (int i = 0; i < n_torso; ++i)
        points.push_back({rng.uniform(-tb.x, tb.x), rng.uniform(-tb.y, tb.y), rng.uniform(-tb.z, tb.z)});

    // heart bounding box from the rotated epicardial ellipsoid
    Vec3 he{0, 0, 0};
    for (int r = 0; r < 3; ++r) {
        double ext = 0;
        for (int c = 0; c < 3; ++c) ext += std::abs(shapes.epi.rot(r, c)) * shapes.epi.semi_axes[c];
        he[r] = ext;
    }
    const Vec3 hc = shapes.epi.center;
    for (int i = 0; i < n_heart; ++i)
        points.push_back({rng.uniform(hc.x - he.x, hc.x + he.x),
                          rng.uniform(hc.y - he.y, hc.y + he.y),
                          rng.uniform(hc.z - he.z, hc.z + he.z)});

    sdf.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        for (int k = 0; k < kNumSurfaces; ++k)
            sdf[i][k] = signed_distance(shapes, static_cast<Surface>(k), points[i]);
}

Vec3 fiber_direction(const ShapeSet& shapes, const Vec3& x) {
    if (!shapes.in_myocardium(x))
        throw InputError("fiber_direction: point is outside the myocardium");

    const double d = shapes.transmural_depth(x);
    const double helix = (40.0 + (-50.0 - 40.0) * d) * kDeg;

    // Frame from the (untruncated) epicardial ellipsoid so it stays smooth
    // across the base plane seam.
    const Vec3 q = shapes.epi.to_local(x);
    const Vec3 sa = shapes.epi.semi_axes;
    Vec3 n_loc = normalized({q.x / (sa.x * sa.x), q.y / (sa.y * sa.y), q.z / (sa.z * sa.z)});
    if (norm(n_loc) < 0.5) n_loc = {1, 0, 0};  // at the exact center

    Vec3 circ = cross(Vec3{0, 0, 1}, n_loc);
    if (norm(circ) < 1e-8) circ = cross(Vec3{1, 0, 0}, n_loc);
    circ = normalized(circ);
    const Vec3 longi = cross(n_loc, circ);

    const Vec3 f_loc = circ * std::cos(helix) + longi * std::sin(helix);
    return shapes.epi.rot * f_loc;
}

ElectrodeSet place_electrodes(const ShapeSet& shapes, const ElectrodeMode& mode) {
    ElectrodeSet es;
    const Vec3 b = shapes.torso.semi_axes;

    auto add_surface_point = [&](const std::string& label, double nx, double nz) {
        const double zc = 2.0 * nz - 1.0;
        const double arg = std::max(0.0, 1.0 - nx * nx - zc * zc);
        const Vec3 p{nx * b.x, b.y * std::sqrt(arg), zc * b.z};
        es.positions.push_back(p);
        es.normalized.push_back(shapes.normalize_electrode(p));
        es.labels.push_back(label);
    };

    if (mode.kind == ElectrodeMode::Standard9) {
        // anterior chest layout in normalized (x, z); RA/LA high, LL low left
        add_surface_point("RA", -0.60, 0.78);
        add_surface_point("LA", 0.60, 0.78);
        add_surface_point("LL", 0.45, 0.25);
        add_surface_point("V1", -0.12, 0.60);
        add_surface_point("V2", 0.12, 0.60);
        add_surface_point("V3", 0.25, 0.55);
        add_surface_point("V4", 0.38, 0.52);
        add_surface_point("V5", 0.52, 0.50);
        add_surface_point("V6", 0.65, 0.48);
        return es;
    }

    if (mode.n < 1) throw InputError("place_electrodes: uniform_anterior needs n >= 1");
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < mode.n; ++i) {
        // Fibonacci hemisphere around +y (anterior), projected radially
        const double uy = 1.0 - (i + 0.5) / mode.n;
        const double r = std::sqrt(std::max(0.0, 1.0 - uy * uy));
        const double phi = golden * i;
        const Vec3 u{r * std::cos(phi), uy, r * std::sin(phi)};
        const double rho =
            1.0 / std::sqrt(u.x * u.x / (b.x * b.x) + u.y * u.y / (b.y * b.y) + u.z * u.z / (b.z * b.z));
        const Vec3 p = u * rho;
        char label[8];
        std::snprintf(label, sizeof(label), "U%03d", i + 1);
        es.positions.push_back(p);
        es.normalized.push_back(shapes.normalize_electrode(p));
        es.labels.push_back(label);
    }
    return es;
}

ElectrodeSet merged_electrodes(const ShapeSet& shapes, int n_unipolar) {
    ElectrodeSet es = place_electrodes(shapes, ElectrodeMode::standard9());
    if (n_unipolar > 0) {
        ElectrodeSet uni = place_electrodes(shapes, ElectrodeMode::uniform_anterior(n_unipolar));
        es.positions.insert(es.positions.end(), uni.positions.begin(), uni.positions.end());
        es.normalized.insert(es.normalized.end(), uni.normalized.begin(), uni.normalized.end());
        es.labels.insert(es.labels.end(), uni.labels.begin(), uni.labels.end());
    }
    return es;
}

}  // namespace lfk
