#pragma once

#include <cstdint>
#include <vector>

#include "lfk/geom3.hpp"
#include "lfk/mesh.hpp"
#include "lfk/sparse.hpp"

namespace lfk {

/// Tissue conductivities in mS/cm. Lengths are mm throughout, so potentials
/// come out in 1/(mS/cm * mm) per unit injected current ("solver units").
struct Conductivities {
    double sigma_it = 0.3;
    double sigma_if = 3.0;
    double sigma_et = 1.2;
    double sigma_ef = 3.0;
    double sigma_0 = 0.6;
};

enum class TensorKind { Bulk, Intracellular, Torso };

/// Transversely isotropic conductivity tensor for one element.
Mat3 conductivity_tensor(const Conductivities& cond, Region region, const Vec3& fiber,
                         TensorKind kind);

struct LeadField {
    std::uint32_t electrode_node = 0;
    std::vector<double> Z_nodal;   // per node, solver units
    std::vector<Vec3> grad_Z;      // per element, solver units / mm
    double zero_mean_residual = 0.0;  // boundary-weighted mean after the shift
    double solver_residual = 0.0;
    int iterations = 0;
};

struct SolverOptions {
    double tol = 1e-9;
    int max_iter = 20000;
};

/// K = sum_e vol * B^T G B with the region-appropriate tensor G
/// (bulk in the heart, sigma_0 I elsewhere). Symmetric, K 1 = 0.
CsrMatrix assemble_stiffness(const TetMesh& mesh, const Conductivities& cond);

/// Lead-field solve: unit load at the electrode node minus an area-lumped
/// uniform boundary sink, deflated CG, then shifted to zero area-weighted
/// boundary mean.
LeadField solve_leadfield(const TetMesh& mesh, const Conductivities& cond,
                          const CsrMatrix& K, std::uint32_t electrode_node,
                          const SolverOptions& opt = {});

/// Convenience overload assembling K internally.
LeadField solve_leadfield(const TetMesh& mesh, const Conductivities& cond,
                          std::uint32_t electrode_node, const SolverOptions& opt = {});

/// Single-snapshot pseudo-bidomain solve: K phi = -sum_heart vol B^T G_i B Vm,
/// shifted to zero boundary mean. Vm is indexed by global node id.
std::vector<double> solve_extracellular_snapshot(const TetMesh& mesh, const Conductivities& cond,
                                                 const CsrMatrix& K,
                                                 const std::vector<double>& Vm_nodal,
                                                 const SolverOptions& opt = {},
                                                 CgResult* stats = nullptr);

/// Right-hand side of the lead-field problem (exposed for tests).
std::vector<double> leadfield_rhs(const TetMesh& mesh, std::uint32_t electrode_node);

}  // namespace lfk
