#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfk/eikonal.hpp"
#include "lfk/geometry.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/mesh.hpp"

namespace lfk {

struct ECGTrace {
    double dt = 1.0;   // ms
    double t0 = 0.0;   // ms
    std::vector<std::string> lead_names;
    std::vector<std::vector<double>> values;  // [lead][time]

    std::size_t num_leads() const { return values.size(); }
    std::size_t num_samples() const { return values.empty() ? 0 : values[0].size(); }
};

enum class GradientProvider { FEM, Surrogate, Pseudo };
const char* provider_name(GradientProvider p);
GradientProvider provider_from_name(const std::string& name);

/// Lead-field gradients at heart-element centroids, one set per electrode.
/// The three providers (FEM / surrogate / pseudo) are interchangeable here.
struct GradientField {
    GradientProvider provider = GradientProvider::FEM;
    std::vector<std::uint32_t> heart_elems;           // global tet ids
    std::vector<std::vector<Vec3>> grad;              // [electrode][heart elem]
    std::vector<std::string> electrode_labels;
};

struct TimeGrid {
    double t0 = 0.0;
    double dt = 1.0;
    int steps = 401;

    double at(int i) const { return t0 + dt * i; }
};

/// Reciprocity integral (element-centroid quadrature):
/// phi_j(t) = -sum_heart vol * (G_i grad Vm) . grad Z_j.
/// Returns one unipolar trace per electrode in the field.
ECGTrace ecg_integral(const TetMesh& mesh, const Conductivities& cond, const GradientField& field,
                      const ActivationMap& activation, const APTemplate& temp, const TimeGrid& grid);

/// Gradient of the infinite-medium pseudo lead field Z* = 1/(4 pi sigma0 r).
Vec3 pseudo_leadfield_gradient(const Vec3& electrode, const Vec3& x, double sigma_0);
double pseudo_leadfield_value(const Vec3& electrode, const Vec3& x, double sigma_0);

/// FEM lead fields restricted to heart-element centroids.
GradientField fem_gradient_field(const TetMesh& mesh, const std::vector<LeadField>& leadfields,
                                 const std::vector<std::string>& labels);

/// Pseudo lead-field gradients at heart-element centroids (needs only the
/// electrode positions).
GradientField pseudo_gradient_field(const TetMesh& mesh, const ElectrodeSet& electrodes,
                                    double sigma_0);

enum class LeadConfig { Unipolar, Standard12 };

/// Unipolar pass-through or the standard 12-lead combination
/// (I, II, III, aVR, aVL, aVF, V1..V6 referenced to the Wilson terminal).
ECGTrace assemble_leads(const ECGTrace& unipolar, LeadConfig config);

struct QrsFeatures {
    double amplitude = 0.0;  // max - min in the window
    double duration = 0.0;   // ms, 5%-of-amplitude envelope span
};

QrsFeatures qrs_features(const ECGTrace& trace, std::size_t lead, double t_begin, double t_end);

}  // namespace lfk
