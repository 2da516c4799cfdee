#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfk/geometry.hpp"
#include "lfk/mesh.hpp"

namespace lfk {

/// Conduction velocities along / across the fiber direction, mm/ms.
struct VelocityModel {
    double v_f = 0.6;
    double v_t = 0.3;
};

struct PacingSource {
    std::uint32_t node = 0;  // global mesh node id
    double t0 = 0.0;         // ms
};

struct ActivationMap {
    std::vector<double> tau;              // per global node; +inf outside the heart
    std::vector<std::uint32_t> heart_nodes;
    std::vector<PacingSource> sources;
};

/// Fast iterative method on the HEART tet submesh with per-element metric
/// V = v_t^2 I + (v_f^2 - v_t^2) f (x) f. Converged when the largest nodal
/// update falls below 1e-6 ms.
ActivationMap solve_eikonal(const TetMesh& mesh, const VelocityModel& vm,
                            const std::vector<PacingSource>& sources);

/// Analytic action-potential template: resting -84 mV, amplitude 120 mV,
/// logistic upstroke (1 ms) and repolarization (20 ms), APD 280 ms.
struct APTemplate {
    double resting = -84.0;   // mV
    double amplitude = 120.0; // mV
    double upstroke_width = 1.0;   // ms
    double apd = 280.0;       // ms
    double repol_width = 20.0;     // ms

    double value(double xi) const;
};

/// Vm_i = U(t - tau_i) on the heart nodes of the map (global node indexing;
/// non-heart entries are set to the resting value).
std::vector<double> transmembrane(const ActivationMap& map, const APTemplate& temp, double t_ms,
                                  std::size_t num_nodes);

enum class PacingProtocol { CrtLike, SinusLike };
const char* protocol_name(PacingProtocol p);
PacingProtocol protocol_from_name(const std::string& name);

/// CRT-like: RV apical endocardium + LV lateral epicardium, both at t=0.
/// Sinus-like: 3 LV + 3 RV endocardial sites with onsets in [0,15] ms.
std::vector<PacingSource> pacing_protocols(const ShapeSet& shapes, const TetMesh& mesh,
                                           PacingProtocol protocol);

}  // namespace lfk
