#pragma once

#include <string>
#include <vector>

#include "lfk/ecg.hpp"
#include "lfk/eikonal.hpp"
#include "lfk/geom3.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/mesh.hpp"

namespace lfk {
namespace metrics {

constexpr double kEps = 1e-8;

/// Angle between two vectors in degrees, eps-guarded and clamped.
double angular_error(const Vec3& a, const Vec3& b, double eps = kEps);

struct MagnitudeError {
    double absolute = 0.0;
    double relative = 0.0;
};
MagnitudeError magnitude_error(const Vec3& a, const Vec3& b, double eps = kEps);

/// Symmetric Chamfer distance (mean nearest-neighbor both ways, averaged),
/// exact via the grid index.
double chamfer(const std::vector<Vec3>& X, const std::vector<Vec3>& Y);

/// Relative l2 error of a single lead over the shared time grid (trapezoid).
double ecg_rel_l2(const std::vector<double>& pred, const std::vector<double>& ref, double dt);

/// Stacked-lead relative l2 error of a whole trace:
/// sqrt(sum_l ||pred_l - ref_l||^2) / sqrt(sum_l ||ref_l||^2).
double trace_rel_l2(const ECGTrace& pred, const ECGTrace& ref);

/// C_Vm = int_0^T ||G_i grad Vm||^2_{L2(heart)} dt
/// (element-centroid quadrature + trapezoidal time rule).
double error_bound_constant(const TetMesh& mesh, const Conductivities& cond,
                            const ActivationMap& activation, const APTemplate& temp,
                            const TimeGrid& grid);

/// ||grad(Z - Zhat)||^2_{L2(heart)} between two gradient fields of one electrode.
double grad_l2_sq_diff(const TetMesh& mesh, const std::vector<std::uint32_t>& heart_elems,
                       const std::vector<Vec3>& ga, const std::vector<Vec3>& gb);

/// ||v||^2_{L2(0,T)} by the trapezoidal rule.
double time_l2_sq(const std::vector<double>& v, double dt);

struct CdfEntry {
    double quantile;
    double value;
};

/// Empirical quantiles with linear interpolation between order statistics;
/// the median and 95th percentile are always included.
std::vector<CdfEntry> error_cdf(std::vector<double> values, std::vector<double> quantiles = {});

struct ErrorReport {
    std::string region;  // "full_torso" or "heart_10mm"
    std::vector<double> angular_deg;        // raw per-point errors
    std::vector<double> magnitude_abs;
    std::vector<double> magnitude_rel;
    double mean_angular = 0.0;
    double mean_magnitude_abs = 0.0;
    double mean_magnitude_rel = 0.0;
    double median_angular = 0.0;
    double p95_angular = 0.0;
};

/// Pointwise comparison of predicted vs reference gradients.
ErrorReport compare_gradients(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref,
                              const std::string& region);

}  // namespace metrics
}  // namespace lfk
