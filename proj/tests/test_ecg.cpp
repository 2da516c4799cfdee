#include <doctest.h>

#include <cmath>

#include "lfk/ecg.hpp"
#include "lfk/errors.hpp"
#include "lfk/metrics.hpp"
#include "lfk/rng.hpp"

using namespace lfk;

namespace {

struct Setup {
    ShapeSet shapes;
    TetMesh mesh;
    ElectrodeSet electrodes;
    Conductivities cond;
    ActivationMap activation;
    APTemplate ap;
};

Setup make_setup() {
    Setup s;
    GeometryParams gp;
    ShapeFamily fam;
    fam.torso_base = {120.0, 90.0, 150.0};
    fam.cloud_points_torso = 16000;
    gp.heart_center = {10.0, 5.0, 0.0};
    s.shapes = make_shapes(gp, fam);
    s.mesh = build_mesh(s.shapes, 9.0);
    s.electrodes = place_electrodes(s.shapes, ElectrodeMode::standard9());
    s.activation = solve_eikonal(s.mesh, {0.6, 0.3},
                                 pacing_protocols(s.shapes, s.mesh, PacingProtocol::CrtLike));
    return s;
}

Setup& setup() {
    static Setup s = make_setup();
    return s;
}

GradientField random_field(const TetMesh& mesh, std::size_t n_elec, std::uint64_t seed) {
    GradientField f;
    f.provider = GradientProvider::FEM;
    f.heart_elems = mesh.heart_elements();
    Rng rng(seed);
    for (std::size_t j = 0; j < n_elec; ++j) {
        std::vector<Vec3> g(f.heart_elems.size());
        for (auto& v : g) v = rng.normal3() * 1e-5;
        f.grad.push_back(std::move(g));
        f.electrode_labels.push_back("E" + std::to_string(j));
    }
    return f;
}

}  // namespace

TEST_SUITE_BEGIN("ecg");

TEST_CASE("constant Vm gives a zero trace; scaling G_i doubles it") {
    Setup& s = setup();
    const TimeGrid grid{0.0, 1.0, 50};
    const GradientField field = random_field(s.mesh, 2, 3);

    // constant Vm: flat template (amplitude 0)
    APTemplate flat;
    flat.amplitude = 0.0;
    const ECGTrace zero = ecg_integral(s.mesh, s.cond, field, s.activation, flat, grid);
    for (const auto& lead : zero.values)
        for (double v : lead) CHECK(std::abs(v) < 1e-12);

    const ECGTrace base = ecg_integral(s.mesh, s.cond, field, s.activation, s.ap, grid);
    Conductivities doubled = s.cond;
    doubled.sigma_it *= 2.0;
    doubled.sigma_if *= 2.0;
    const ECGTrace twice = ecg_integral(s.mesh, doubled, field, s.activation, s.ap, grid);
    for (std::size_t l = 0; l < base.num_leads(); ++l)
        for (std::size_t t = 0; t < base.num_samples(); ++t)
            CHECK(twice.values[l][t] == doctest::Approx(2.0 * base.values[l][t]).epsilon(1e-10));
}

TEST_CASE("linearity: superposition of transmembrane sources") {
    Setup& s = setup();
    const TimeGrid grid{0.0, 2.0, 40};
    const GradientField field = random_field(s.mesh, 1, 7);

    // two templates and their sum, all evaluated through the same machinery
    APTemplate a = s.ap;
    APTemplate b = s.ap;
    b.amplitude = 55.0;
    b.resting = -20.0;

    const ECGTrace ta = ecg_integral(s.mesh, s.cond, field, s.activation, a, grid);
    const ECGTrace tb = ecg_integral(s.mesh, s.cond, field, s.activation, b, grid);

    APTemplate ab = a;  // U_a + U_b is not a template; emulate by amplitude sum
    ab.resting = a.resting + b.resting;
    ab.amplitude = a.amplitude + b.amplitude;
    // only valid because both share upstroke/apd/repol widths
    const ECGTrace tab = ecg_integral(s.mesh, s.cond, field, s.activation, ab, grid);
    for (std::size_t t = 0; t < ta.num_samples(); ++t)
        CHECK(tab.values[0][t] ==
              doctest::Approx(ta.values[0][t] + tb.values[0][t]).epsilon(1e-9).scale(1e-6));
}

TEST_CASE("time-shift equivariance on the grid") {
    Setup& s = setup();
    const TimeGrid grid{0.0, 1.0, 120};
    const GradientField field = random_field(s.mesh, 1, 11);

    ActivationMap shifted = s.activation;
    const double delta = 5.0;  // multiple of dt
    for (double& t : shifted.tau)
        if (std::isfinite(t)) t += delta;

    const ECGTrace base = ecg_integral(s.mesh, s.cond, field, s.activation, s.ap, grid);
    const ECGTrace moved = ecg_integral(s.mesh, s.cond, field, shifted, s.ap, grid);
    for (std::size_t t = 0; t + 5 < base.num_samples(); ++t)
        CHECK(moved.values[0][t + 5] == doctest::Approx(base.values[0][t]).epsilon(1e-12));
}

TEST_CASE("reciprocity: FEM gradient field reproduces the direct snapshot solve") {
    Setup& s = setup();
    const CsrMatrix K = assemble_stiffness(s.mesh, s.cond);
    const SolverOptions opt{1e-10, 40000};

    const std::uint32_t enode = nearest_boundary_node(s.mesh, s.electrodes.positions[0]);
    const LeadField lf = solve_leadfield(s.mesh, s.cond, K, enode, opt);
    const GradientField field = fem_gradient_field(s.mesh, {lf}, {"E0"});

    const TimeGrid grid{20.0, 7.0, 5};
    const ECGTrace via_z = ecg_integral(s.mesh, s.cond, field, s.activation, s.ap, grid);

    for (int step = 0; step < grid.steps; ++step) {
        const auto vm = transmembrane(s.activation, s.ap, grid.at(step), s.mesh.num_nodes());
        const auto phi = solve_extracellular_snapshot(s.mesh, s.cond, K, vm, opt);
        CHECK(std::abs(via_z.values[0][step] - phi[enode]) <=
              1e-6 * std::max(1e-9, std::abs(phi[enode])));
    }
}

TEST_CASE("pseudo lead field: closed form, direction, scalings") {
    const Vec3 e{100, 0, 0};
    const Vec3 x{0, 0, 0};
    CHECK(pseudo_leadfield_value(e, x, 0.6) == doctest::Approx(1.0 / (4 * M_PI * 0.6 * 100)));
    CHECK(pseudo_leadfield_value(e, x, 0.6) == doctest::Approx(1.326e-3).epsilon(1e-3));

    const Vec3 g = pseudo_leadfield_gradient(e, x, 0.6);
    CHECK(norm(cross(g, e - x)) < 1e-18);  // parallel to e - x
    CHECK(dot(g, e - x) > 0.0);            // Z* increases toward the electrode

    const Vec3 x2 = e - (e - x) * 2.0;  // double distance
    CHECK(pseudo_leadfield_value(e, x2, 0.6) ==
          doctest::Approx(0.5 * pseudo_leadfield_value(e, x, 0.6)));
    CHECK(norm(pseudo_leadfield_gradient(e, x2, 0.6)) == doctest::Approx(0.25 * norm(g)));

    CHECK_THROWS_AS(pseudo_leadfield_gradient(e, e, 0.6), InputError);
}

TEST_CASE("12-lead assembly identities") {
    ECGTrace uni;
    uni.dt = 1.0;
    uni.lead_names = {"RA", "LA", "LL", "V1", "V2", "V3", "V4", "V5", "V6"};
    Rng rng(5);
    uni.values.assign(9, std::vector<double>(30));
    for (auto& lead : uni.values)
        for (double& v : lead) v = rng.uniform(-1, 1);

    const ECGTrace t12 = assemble_leads(uni, LeadConfig::Standard12);
    REQUIRE(t12.num_leads() == 12);
    for (std::size_t t = 0; t < t12.num_samples(); ++t) {
        // Einthoven: I + III = II
        CHECK(t12.values[0][t] + t12.values[2][t] == doctest::Approx(t12.values[1][t]).epsilon(1e-12));
        // augmented leads sum to zero
        CHECK(t12.values[3][t] + t12.values[4][t] + t12.values[5][t] ==
              doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    }

    // all-equal inputs: every derived lead vanishes (zero-sum weights)
    for (auto& lead : uni.values) std::fill(lead.begin(), lead.end(), 0.37);
    const ECGTrace flat = assemble_leads(uni, LeadConfig::Standard12);
    for (const auto& lead : flat.values)
        for (double v : lead) CHECK(std::abs(v) < 1e-14);

    // unipolar passthrough
    const ECGTrace same = assemble_leads(uni, LeadConfig::Unipolar);
    CHECK(same.num_leads() == 9);

    // missing electrode
    ECGTrace broken = uni;
    broken.lead_names[0] = "XX";
    CHECK_THROWS_AS(assemble_leads(broken, LeadConfig::Standard12), InputError);
}

TEST_CASE("qrs features") {
    // triangular pulse: height 1, base 80 ms
    ECGTrace tr;
    tr.dt = 1.0;
    tr.lead_names = {"L"};
    tr.values.assign(1, std::vector<double>(201, 0.0));
    for (int t = 0; t <= 80; ++t)
        tr.values[0][t] = t <= 40 ? t / 40.0 : (80 - t) / 40.0;

    const QrsFeatures q = qrs_features(tr, 0, 0.0, 200.0);
    CHECK(q.amplitude == doctest::Approx(1.0));
    CHECK(q.duration == doctest::Approx(76.0).epsilon(1e-9));

    // all-zero trace
    ECGTrace flat;
    flat.dt = 1.0;
    flat.lead_names = {"L"};
    flat.values.assign(1, std::vector<double>(50, 0.0));
    const QrsFeatures qz = qrs_features(flat, 0, 0.0, 49.0);
    CHECK(qz.amplitude == 0.0);
    CHECK(qz.duration == 0.0);

    // scaling doubles amplitude, keeps duration
    ECGTrace big = tr;
    for (double& v : big.values[0]) v *= 2.0;
    const QrsFeatures qb = qrs_features(big, 0, 0.0, 200.0);
    CHECK(qb.amplitude == doctest::Approx(2.0));
    CHECK(qb.duration == doctest::Approx(q.duration));
}

TEST_CASE("error bound holds for random gradient perturbations") {
    Setup& s = setup();
    const TimeGrid grid{0.0, 2.0, 150};

    const CsrMatrix K = assemble_stiffness(s.mesh, s.cond);
    const std::uint32_t enode = nearest_boundary_node(s.mesh, s.electrodes.positions[2]);
    const LeadField lf = solve_leadfield(s.mesh, s.cond, K, enode);
    const GradientField ref = fem_gradient_field(s.mesh, {lf}, {"E"});

    const double c_vm = metrics::error_bound_constant(s.mesh, s.cond, s.activation, s.ap, grid);
    CHECK(c_vm > 0.0);

    const ECGTrace v_ref = ecg_integral(s.mesh, s.cond, ref, s.activation, s.ap, grid);

    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        GradientField pert = ref;
        const double scale = std::pow(10.0, rng.uniform(-7, -4));
        for (auto& g : pert.grad[0]) g += rng.normal3() * scale;

        const ECGTrace v_pert = ecg_integral(s.mesh, s.cond, pert, s.activation, s.ap, grid);
        std::vector<double> diff(v_ref.num_samples());
        for (std::size_t t = 0; t < diff.size(); ++t)
            diff[t] = v_ref.values[0][t] - v_pert.values[0][t];

        const double lhs = metrics::time_l2_sq(diff, grid.dt);
        const double rhs =
            c_vm * metrics::grad_l2_sq_diff(s.mesh, ref.heart_elems, ref.grad[0], pert.grad[0]);
        CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
}

TEST_SUITE_END();
