#include "lfk/leadfield.hpp"

#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/parallel.hpp"

namespace lfk {

Mat3 conductivity_tensor(const Conductivities& cond, Region region, const Vec3& fiber,
                         TensorKind kind) {
    if (kind == TensorKind::Torso || region == Region::Torso)
        return Mat3::scaled_identity(cond.sigma_0);

    const double fn = norm(fiber);
    if (std::abs(fn - 1.0) > 1e-6)
        throw InputError("conductivity_tensor: HEART element fiber must be a unit vector");

    switch (kind) {
        case TensorKind::Intracellular:
            return Mat3::iso_plus_rank1(cond.sigma_it, cond.sigma_if - cond.sigma_it, fiber);
        case TensorKind::Bulk: {
            const double st = cond.sigma_it + cond.sigma_et;
            const double sf = cond.sigma_if + cond.sigma_ef;
            return Mat3::iso_plus_rank1(st, sf - st, fiber);
        }
        default:
            return Mat3::scaled_identity(cond.sigma_0);
    }
}

CsrMatrix assemble_stiffness(const TetMesh& mesh, const Conductivities& cond) {
    const std::size_t m = mesh.num_tets();
    std::vector<std::uint32_t> rows, cols;
    std::vector<double> vals;
    rows.reserve(m * 16);
    cols.reserve(m * 16);
    vals.reserve(m * 16);

    for (std::size_t t = 0; t < m; ++t) {
        const GradOp B = element_gradient_operator(mesh, t);
        const Mat3 G = conductivity_tensor(cond, mesh.region[t], mesh.fibers[t], TensorKind::Bulk);
        const double vol = mesh.element_volume[t];

        // local = vol * B^T G B (4x4)
        Vec3 gb[4];
        for (int j = 0; j < 4; ++j) {
            const Vec3 bj{B.b[0][j], B.b[1][j], B.b[2][j]};
            gb[j] = G * bj;
        }
        const auto& kn = mesh.tets[t];
        for (int i = 0; i < 4; ++i) {
            const Vec3 bi{B.b[0][i], B.b[1][i], B.b[2][i]};
            for (int j = 0; j < 4; ++j) {
                rows.push_back(kn[i]);
                cols.push_back(kn[j]);
                vals.push_back(vol * dot(bi, gb[j]));
            }
        }
    }
    return csr_from_triplets(mesh.num_nodes(), rows, cols, vals);
}

std::vector<double> leadfield_rhs(const TetMesh& mesh, std::uint32_t electrode_node) {
    if (!mesh.node_is_boundary[electrode_node])
        throw InputError("solve_leadfield: electrode node is not on the boundary");

    const std::vector<double> w = mesh.boundary_node_weights();
    double wsum = 0.0;
    for (double x : w) wsum += x;

    std::vector<double> b(mesh.num_nodes(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = -w[i] / wsum;
    b[electrode_node] += 1.0;

    // force exact compatibility: correct the last boundary entry
    double s = 0.0;
    for (double x : b) s += x;
    for (std::size_t i = b.size(); i-- > 0;) {
        if (mesh.node_is_boundary[i]) {
            b[i] -= s;
            break;
        }
    }
    return b;
}

namespace {

void shift_to_zero_boundary_mean(const TetMesh& mesh, std::vector<double>& u, double* residual) {
    const std::vector<double> w = mesh.boundary_node_weights();
    double wsum = 0.0, m = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        wsum += w[i];
        m += w[i] * u[i];
    }
    const double shift = m / wsum;
    for (double& x : u) x -= shift;
    if (residual) {
        double m2 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) m2 += w[i] * u[i];
        *residual = m2 / wsum;
    }
}

std::vector<Vec3> element_gradients(const TetMesh& mesh, const std::vector<double>& u) {
    std::vector<Vec3> g(mesh.num_tets());
    parallel_for(static_cast<std::int64_t>(mesh.num_tets()), [&](std::int64_t t) {
        const GradOp B = element_gradient_operator(mesh, t);
        const auto& kn = mesh.tets[t];
        g[t] = B.apply({u[kn[0]], u[kn[1]], u[kn[2]], u[kn[3]]});
    });
    return g;
}

}  // namespace

LeadField solve_leadfield(const TetMesh& mesh, const Conductivities& cond, const CsrMatrix& K,
                          std::uint32_t electrode_node, const SolverOptions& opt) {
    const std::vector<double> b = leadfield_rhs(mesh, electrode_node);

    LeadField lf;
    lf.electrode_node = electrode_node;
    CgResult cg = cg_solve_deflated(K, b, lf.Z_nodal, opt.tol, opt.max_iter);
    if (!cg.converged)
        throw SolverError("solve_leadfield: CG did not converge in " +
                          std::to_string(cg.iterations) +
                          " iterations, relative residual " + std::to_string(cg.relative_residual));
    lf.solver_residual = cg.relative_residual;
    lf.iterations = cg.iterations;

    shift_to_zero_boundary_mean(mesh, lf.Z_nodal, &lf.zero_mean_residual);
    lf.grad_Z = element_gradients(mesh, lf.Z_nodal);
    return lf;
}

LeadField solve_leadfield(const TetMesh& mesh, const Conductivities& cond,
                          std::uint32_t electrode_node, const SolverOptions& opt) {
    const CsrMatrix K = assemble_stiffness(mesh, cond);
    return solve_leadfield(mesh, cond, K, electrode_node, opt);
}

std::vector<double> solve_extracellular_snapshot(const TetMesh& mesh, const Conductivities& cond,
                                                 const CsrMatrix& K,
                                                 const std::vector<double>& Vm_nodal,
                                                 const SolverOptions& opt, CgResult* stats) {
    // weak-form load of div(G_i grad Vm): g = -sum_heart vol B^T G_i (B Vm)
    std::vector<double> g(mesh.num_nodes(), 0.0);
    for (std::size_t t = 0; t < mesh.num_tets(); ++t) {
        if (mesh.region[t] != Region::Heart) continue;
        const GradOp B = element_gradient_operator(mesh, t);
        const Mat3 Gi =
            conductivity_tensor(cond, Region::Heart, mesh.fibers[t], TensorKind::Intracellular);
        const auto& kn = mesh.tets[t];
        const Vec3 grad_vm =
            B.apply({Vm_nodal[kn[0]], Vm_nodal[kn[1]], Vm_nodal[kn[2]], Vm_nodal[kn[3]]});
        const Vec3 flux = Gi * grad_vm;
        const double vol = mesh.element_volume[t];
        for (int i = 0; i < 4; ++i) {
            const Vec3 bi{B.b[0][i], B.b[1][i], B.b[2][i]};
            g[kn[i]] -= vol * dot(bi, flux);
        }
    }

    std::vector<double> phi;
    CgResult cg = cg_solve_deflated(K, g, phi, opt.tol, opt.max_iter);
    if (!cg.converged)
        throw SolverError("solve_extracellular_snapshot: CG did not converge, residual " +
                          std::to_string(cg.relative_residual));
    if (stats) *stats = cg;
    shift_to_zero_boundary_mean(mesh, phi, nullptr);
    return phi;
}

}  // namespace lfk
