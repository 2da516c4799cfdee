#include <doctest.h>

#include <cmath>

#include "lfk/ecg.hpp"
#include "lfk/errors.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/mesh.hpp"
#include "lfk/rng.hpp"

using namespace lfk;

namespace {

Ellipsoid sphere(double r) {
    Ellipsoid e;
    e.semi_axes = {r, r, r};
    return e;
}

ShapeSet small_torso() {
    GeometryParams p;
    ShapeFamily fam;
    fam.torso_base = {120.0, 90.0, 150.0};
    fam.cloud_points_torso = 16000;
    p.heart_center = {10.0, 5.0, 0.0};
    return make_shapes(p, fam);
}

}  // namespace

TEST_SUITE_BEGIN("leadfield");

TEST_CASE("conductivity tensors match the published values") {
    const Conductivities c;
    const Vec3 f{1, 0, 0};

    const Mat3 gi = conductivity_tensor(c, Region::Heart, f, TensorKind::Intracellular);
    CHECK(gi(0, 0) == doctest::Approx(3.0));
    CHECK(gi(1, 1) == doctest::Approx(0.3));
    CHECK(gi(2, 2) == doctest::Approx(0.3));
    CHECK(gi(0, 1) == doctest::Approx(0.0));

    const Mat3 g = conductivity_tensor(c, Region::Heart, f, TensorKind::Bulk);
    CHECK(g(0, 0) == doctest::Approx(6.0));
    CHECK(g(1, 1) == doctest::Approx(1.5));
    CHECK(g(2, 2) == doctest::Approx(1.5));

    const Mat3 g0 = conductivity_tensor(c, Region::Torso, {0, 0, 0}, TensorKind::Torso);
    CHECK(g0(0, 0) == doctest::Approx(0.6));
    CHECK(g0(1, 1) == doctest::Approx(0.6));

    // SPD for a generic fiber
    const Vec3 f2 = normalized(Vec3{1, 2, -1});
    const Mat3 gb = conductivity_tensor(c, Region::Heart, f2, TensorKind::Bulk);
    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        const Vec3 v = rng.normal3();
        CHECK(quadform(gb, v, v) > 0.0);
    }
    CHECK_THROWS_AS(conductivity_tensor(c, Region::Heart, {2, 0, 0}, TensorKind::Bulk), InputError);
}

TEST_CASE("stiffness: symmetry, null space, hand-assembled reference tet") {
    const TetMesh m = build_mesh_single(sphere(40.0), 10.0);
    Conductivities c;
    const CsrMatrix K = assemble_stiffness(m, c);

    // K * 1 = 0
    std::vector<double> ones(K.n, 1.0), out(K.n);
    csr_matvec(K, ones.data(), out.data());
    double maxabs = 0, scale = 0;
    for (double v : K.val) scale = std::max(scale, std::abs(v));
    for (double v : out) maxabs = std::max(maxabs, std::abs(v));
    CHECK(maxabs < 1e-10 * scale);

    // symmetry
    for (std::size_t r = 0; r < std::min<std::size_t>(K.n, 200); ++r)
        for (std::uint32_t k = K.row_ptr[r]; k < K.row_ptr[r + 1]; ++k) {
            const std::uint32_t cidx = K.col[k];
            double sym = 0;
            for (std::uint32_t k2 = K.row_ptr[cidx]; k2 < K.row_ptr[cidx + 1]; ++k2)
                if (K.col[k2] == r) sym = K.val[k2];
            CHECK(K.val[k] == doctest::Approx(sym).epsilon(1e-12));
        }

    // single reference tet with sigma = 1: local stiffness can be assembled
    // by hand from the shape gradients: K_ij = vol * grad_i . grad_j
    TetMesh single;
    single.nodes = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    single.tets = {{0, 1, 2, 3}};
    single.element_volume = {1.0 / 6.0};
    single.region = {Region::Torso};
    single.fibers = {{0, 0, 0}};
    Conductivities unity;
    unity.sigma_0 = 1.0;
    const CsrMatrix K1 = assemble_stiffness(single, unity);
    // gradients: l0 = (-1,-1,-1), l1 = (1,0,0), l2 = (0,1,0), l3 = (0,0,1)
    const double expect[4][4] = {{3, -1, -1, -1}, {-1, 1, 0, 0}, {-1, 0, 1, 0}, {-1, 0, 0, 1}};
    for (int i = 0; i < 4; ++i)
        for (std::uint32_t k = K1.row_ptr[i]; k < K1.row_ptr[i + 1]; ++k)
            CHECK(K1.val[k] == doctest::Approx(expect[i][K1.col[k]] / 6.0).epsilon(1e-12));
}

TEST_CASE("lead-field rhs is exactly compatible") {
    const TetMesh m = build_mesh_single(sphere(40.0), 10.0);
    const std::uint32_t node = nearest_boundary_node(m, {40, 0, 0});
    const auto b = leadfield_rhs(m, node);
    double s = 0;
    for (double v : b) s += v;
    CHECK(s == 0.0);  // exact in floating point by construction
    CHECK_THROWS_AS(leadfield_rhs(m, [&] {
                        for (std::uint32_t v = 0; v < m.num_nodes(); ++v)
                            if (!m.node_is_boundary[v]) return v;
                        return 0u;
                    }()),
                    InputError);
}

TEST_CASE("solve on a homogeneous sphere: zero mean, refinement agreement") {
    Conductivities c;
    const TetMesh coarse = build_mesh_single(sphere(50.0), 8.0);
    const TetMesh fine = build_mesh_single(sphere(50.0), 4.0);

    const Vec3 epos{50, 0, 0};
    const LeadField lf_c =
        solve_leadfield(coarse, c, nearest_boundary_node(coarse, epos), {1e-10, 20000});
    const LeadField lf_f =
        solve_leadfield(fine, c, nearest_boundary_node(fine, epos), {1e-10, 20000});

    CHECK(std::abs(lf_c.zero_mean_residual) < 1e-8);
    CHECK(lf_c.solver_residual < 1e-9);

    // compare Z in a ball near the center (interpolate the fine solution)
    const PointLocator floc(fine);
    Rng rng(2);
    double max_ref = 0, max_diff = 0;
    const PointLocator cloc(coarse);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p = rng.unit_vector() * rng.uniform(0.0, 20.0);
        const auto hc = cloc.locate(p);
        const auto hf = floc.locate(p);
        if (!hc || !hf) continue;
        double zc = 0, zf = 0;
        for (int v = 0; v < 4; ++v) {
            zc += hc->second[v] * lf_c.Z_nodal[coarse.tets[hc->first][v]];
            zf += hf->second[v] * lf_f.Z_nodal[fine.tets[hf->first][v]];
        }
        max_ref = std::max(max_ref, std::abs(zf));
        max_diff = std::max(max_diff, std::abs(zc - zf));
    }
    CHECK(max_diff < 0.02 * max_ref);
}

TEST_CASE("mirrored electrodes give mirrored solutions (staircase tolerance)") {
    Conductivities c;
    const TetMesh m = build_mesh_single(sphere(50.0), 8.0);
    const LeadField lf_a = solve_leadfield(m, c, nearest_boundary_node(m, {50, 0, 0}));
    const LeadField lf_b = solve_leadfield(m, c, nearest_boundary_node(m, {-50, 0, 0}));

    double zrange = 0;
    for (double z : lf_a.Z_nodal) zrange = std::max(zrange, std::abs(z));

    // compare Z_a(x) against Z_b(-x) at interior nodes away from the sources
    const PointLocator loc(m);
    double max_diff = 0;
    int counted = 0;
    for (std::uint32_t v = 0; v < m.num_nodes(); ++v) {
        const Vec3 p = m.nodes[v];
        if (norm(p) > 30.0) continue;
        const auto hit = loc.locate({-p.x, -p.y, -p.z});
        if (!hit) continue;
        double zb = 0;
        for (int k = 0; k < 4; ++k) zb += hit->second[k] * lf_b.Z_nodal[m.tets[hit->first][k]];
        max_diff = std::max(max_diff, std::abs(lf_a.Z_nodal[v] - zb));
        ++counted;
    }
    REQUIRE(counted > 100);
    CHECK(max_diff < 0.05 * zrange);
}

TEST_CASE("snapshot solve: constant Vm gives zero potential") {
    const ShapeSet s = small_torso();
    const TetMesh m = build_mesh(s, 8.0);
    Conductivities c;
    const CsrMatrix K = assemble_stiffness(m, c);

    const std::vector<double> vm(m.num_nodes(), -84.0);
    const auto phi = solve_extracellular_snapshot(m, c, K, vm, {1e-9, 20000});
    double maxabs = 0;
    for (double v : phi) maxabs = std::max(maxabs, std::abs(v));
    CHECK(maxabs < 1e-8);
}

TEST_CASE("snapshot solve: zero boundary mean and discrete reciprocity") {
    const ShapeSet s = small_torso();
    const TetMesh m = build_mesh(s, 8.0);
    Conductivities c;
    const CsrMatrix K = assemble_stiffness(m, c);
    const SolverOptions opt{1e-10, 40000};

    Rng rng(11);
    std::vector<double> vm(m.num_nodes(), 0.0);
    for (double& v : vm) v = rng.uniform(-84.0, 36.0);

    const auto phi = solve_extracellular_snapshot(m, c, K, vm, opt);

    const auto w = m.boundary_node_weights();
    double wsum = 0, mean = 0, phimax = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        wsum += w[i];
        mean += w[i] * phi[i];
        phimax = std::max(phimax, std::abs(phi[i]));
    }
    CHECK(std::abs(mean / wsum) < 1e-8 * phimax);

    // reciprocity against the lead-field integral (both via the same K)
    const std::uint32_t enode = nearest_boundary_node(m, {0, 90, 0});
    const LeadField lf = solve_leadfield(m, c, K, enode, opt);

    double integral = 0.0;
    for (std::size_t t = 0; t < m.num_tets(); ++t) {
        if (m.region[t] != Region::Heart) continue;
        const GradOp B = element_gradient_operator(m, t);
        const Mat3 gi = conductivity_tensor(c, Region::Heart, m.fibers[t], TensorKind::Intracellular);
        const auto& kn = m.tets[t];
        const Vec3 gvm = B.apply({vm[kn[0]], vm[kn[1]], vm[kn[2]], vm[kn[3]]});
        integral -= m.element_volume[t] * dot(gi * gvm, lf.grad_Z[t]);
    }
    CHECK(std::abs(integral - phi[enode]) < 1e-6 * std::abs(phi[enode]));
}

TEST_CASE("layered slab: exact piecewise-linear solution, flux continuity") {
    // box with two material layers stacked in z; uniform current in the top
    // face and out the bottom face; the exact solution is linear per layer
    // and lies in the FE space, so the discrete solution reproduces it and
    // the interface fluxes match to round-off.
    Ellipsoid box;  // abuse: huge ellipsoid so the grid box is kept whole
    const double L = 40.0;
    GeometryParams dummy;

    TetMesh m;
    {
        // build a 40x40x40 box mesh by clipping a giant sphere to the grid
        Ellipsoid big;
        big.semi_axes = {2 * L, 2 * L, 2 * L};
        m = build_mesh_single(big, 10.0);
        // keep only tets within the box [-20,20]^3
        TetMesh boxm;
        boxm.h = m.h;
        std::vector<std::int64_t> remap(m.num_nodes(), -1);
        for (std::size_t t = 0; t < m.num_tets(); ++t) {
            const Vec3 ctr = m.centroid(t);
            if (std::abs(ctr.x) > L / 2 || std::abs(ctr.y) > L / 2 || std::abs(ctr.z) > L / 2)
                continue;
            std::array<std::uint32_t, 4> tn;
            for (int v = 0; v < 4; ++v) {
                const std::uint32_t old = m.tets[t][v];
                if (remap[old] < 0) {
                    remap[old] = static_cast<std::int64_t>(boxm.nodes.size());
                    boxm.nodes.push_back(m.nodes[old]);
                }
                tn[v] = static_cast<std::uint32_t>(remap[old]);
            }
            boxm.tets.push_back(tn);
            boxm.element_volume.push_back(m.element_volume[t]);
            // HEART layer below z=0 with fibers along x
            boxm.region.push_back(ctr.z < 0 ? Region::Heart : Region::Torso);
            boxm.fibers.push_back(ctr.z < 0 ? Vec3{1, 0, 0} : Vec3{0, 0, 0});
        }
        boxm.node_is_boundary.assign(boxm.nodes.size(), 0);
        m = std::move(boxm);
    }
    (void)box;
    (void)dummy;

    Conductivities c;  // bulk heart zz-conductivity = 1.5, torso 0.6
    const CsrMatrix K = assemble_stiffness(m, c);

    // current density j in the top plane nodes, -j in the bottom: lumped by
    // the P1 face rule the load equals j per unit area
    std::vector<double> b(m.num_nodes(), 0.0);
    // top and bottom face nodal areas: count incident top/bottom faces
    const double zmax = 20.0, zmin = -20.0;
    // nodal weights from the structured grid: corner 1/4... easier: lump by
    // integrating the linear hat over the boundary squares: every boundary
    // face triangle contributes area/3 to its nodes
    constexpr int F[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    std::map<std::array<std::uint32_t, 3>, int> fc;
    for (const auto& t : m.tets)
        for (const auto& f : F) {
            std::array<std::uint32_t, 3> key = {t[f[0]], t[f[1]], t[f[2]]};
            std::sort(key.begin(), key.end());
            fc[key]++;
        }
    for (const auto& [key, cnt] : fc) {
        if (cnt != 1) continue;
        const Vec3 p0 = m.nodes[key[0]], p1 = m.nodes[key[1]], p2 = m.nodes[key[2]];
        const bool top = p0.z == zmax && p1.z == zmax && p2.z == zmax;
        const bool bottom = p0.z == zmin && p1.z == zmin && p2.z == zmin;
        if (!top && !bottom) continue;
        const double area = 0.5 * norm(cross(p1 - p0, p2 - p0));
        for (int v = 0; v < 3; ++v) b[key[v]] += (top ? 1.0 : -1.0) * area / 3.0;
    }

    std::vector<double> u;
    const CgResult cg = cg_solve_deflated(K, b, u, 1e-12, 20000);
    REQUIRE(cg.converged);

    // exact: piecewise-linear u(z) with slopes 1/sigma_zz per layer
    // (unit current density). sigma_zz: torso 0.6, heart bulk transverse 1.5
    const double s_top = 0.6, s_bot = 1.5;
    auto exact = [&](double z) { return z >= 0 ? z / s_top : z / s_bot; };
    // compare up to a constant: anchor at node 0
    double shift = 0;
    {
        shift = u[0] - exact(m.nodes[0].z);
    }
    double umax = 0;
    for (double v : u) umax = std::max(umax, std::abs(v));
    for (std::size_t v = 0; v < m.num_nodes(); ++v)
        CHECK(std::abs(u[v] - shift - exact(m.nodes[v].z)) < 1e-8 * umax);

    // interface flux continuity: G grad u . n equal across z=0 from both sides
    for (std::size_t t = 0; t < m.num_tets(); ++t) {
        const GradOp B = element_gradient_operator(m, t);
        const auto& kn = m.tets[t];
        const Vec3 g = B.apply({u[kn[0]], u[kn[1]], u[kn[2]], u[kn[3]]});
        const Mat3 G = conductivity_tensor(c, m.region[t], m.fibers[t], TensorKind::Bulk);
        const Vec3 flux = G * g;
        CHECK(flux.z == doctest::Approx(1.0).epsilon(1e-8));  // unit normal flux everywhere
        // tangential gradient vanishes in the exact solution
        CHECK(std::abs(g.x) < 1e-10);
        CHECK(std::abs(g.y) < 1e-10);
    }
}

TEST_CASE("pseudo lead-field profile correlation inside a homogeneous ball") {
    Conductivities c;
    const TetMesh m = build_mesh_single(sphere(50.0), 5.0);
    const Vec3 epos{50, 0, 0};
    const std::uint32_t enode = nearest_boundary_node(m, epos);
    const LeadField lf = solve_leadfield(m, c, enode);

    std::vector<double> z_fem, z_pseudo;
    for (std::uint32_t v = 0; v < m.num_nodes(); ++v) {
        const Vec3 p = m.nodes[v];
        if (norm(p) > 40.0) continue;
        if (norm(p - m.nodes[enode]) < 15.0) continue;
        z_fem.push_back(lf.Z_nodal[v]);
        z_pseudo.push_back(pseudo_leadfield_value(m.nodes[enode], p, c.sigma_0));
    }
    REQUIRE(z_fem.size() > 500);
    // Pearson correlation
    const auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
    };
    const double ma = mean(z_fem), mb = mean(z_pseudo);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < z_fem.size(); ++i) {
        sab += (z_fem[i] - ma) * (z_pseudo[i] - mb);
        saa += (z_fem[i] - ma) * (z_fem[i] - ma);
        sbb += (z_pseudo[i] - mb) * (z_pseudo[i] - mb);
    }
    CHECK(sab / std::sqrt(saa * sbb) > 0.99);
}

TEST_SUITE_END();
