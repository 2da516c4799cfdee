#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lfk/ecg.hpp"
#include "lfk/geometry.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/mesh.hpp"
#include "lfk/nn.hpp"

namespace lfk {

enum class Encoding { PCA, SDF };
const char* encoding_name(Encoding e);
Encoding encoding_from_name(const std::string& name);

struct SamplingPolicy {
    int n_points = 4096;          // per geometry
    double near_fraction = 0.8;   // near the torso surface / heart-torso interface
    double band_mm = 10.0;
};

/// Per-geometry shared point sets plus per-(geometry, electrode) gradient
/// targets. Spatial inputs are normalized to each torso bounding box; targets
/// are stored divided by grad_scale (global RMS of the raw components).
struct SurrogateDataset {
    Encoding encoding = Encoding::PCA;
    int d_code = 0;
    double grad_scale = 1.0;
    std::uint64_t seed = 0;
    SamplingPolicy policy;

    std::vector<std::string> geom_ids;
    std::vector<std::vector<double>> codes;        // [geom][d_code]
    std::vector<Vec3> torso_box;                   // [geom], for denormalization
    std::vector<std::vector<Vec3>> points_norm;    // [geom][n]
    std::vector<std::vector<Vec3>> points_mm;      // [geom][n]

    struct Block {
        std::uint32_t geom = 0, elec = 0;
        Vec3 electrode_norm;
        std::vector<Vec3> targets_scaled;  // [n]
    };
    std::vector<Block> blocks;

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.targets_scaled.size();
        return n;
    }
};

/// Mixture sampler for one geometry: near_fraction of the points within
/// band_mm of the torso or epicardial surface, the rest uniform in the torso
/// and strictly outside the band; every point lies inside the mesh.
std::vector<Vec3> sample_policy_points(const ShapeSet& shapes, const TetMesh& mesh,
                                       const PointLocator& locator, const SamplingPolicy& policy,
                                       std::uint64_t seed);

/// Assembles the training dataset. leadfield_of(g, e) must return the solved
/// lead field for geometry index g and electrode index e.
SurrogateDataset build_dataset(
    const std::vector<std::string>& geom_ids, const std::vector<const ShapeSet*>& shapes,
    const std::vector<const TetMesh*>& meshes, const std::vector<const ElectrodeSet*>& electrodes,
    const std::function<const LeadField&(std::size_t, std::size_t)>& leadfield_of,
    const std::vector<std::vector<double>>& codes, Encoding encoding,
    const SamplingPolicy& policy, std::uint64_t seed);

struct SurrogateConfig {
    int k_fourier = 64;
    double sigma_fourier = 1.0;
    std::vector<int> hidden{256, 256, 256, 256, 256};
    double lr = 1e-3;
    int epochs = 100;
    int steps_per_epoch = 128;
    int batch = 512;
    double lambda_cos = 0.1;
    double eps = 1e-8;
    std::uint64_t seed = 1;
};

struct SurrogateTrainResult {
    nn::Network net;
    double grad_scale = 1.0;
    std::vector<double> loss_history;  // per epoch (mean batch loss)
    std::vector<double> lr_history;    // per epoch
};

nn::Descriptor surrogate_descriptor(const SurrogateConfig& cfg, int d_code);

/// Adam training of the gradient surrogate (MSE + cosine loss); the learning
/// rate is halved after half the epoch budget.
SurrogateTrainResult train_surrogate(const SurrogateDataset& dataset, const SurrogateConfig& cfg);

/// Batched prediction; output in raw solver units (denormalized by grad_scale).
std::vector<Vec3> predict_grad(const nn::Network& net, double grad_scale,
                               const std::vector<Vec3>& x_norm, const Vec3& electrode_norm,
                               const std::vector<double>& code);

/// Gradients at every HEART element centroid, packaged for the ECG integral.
GradientField surrogate_gradient_field(const nn::Network& net, double grad_scale,
                                       const TetMesh& mesh, const ShapeSet& shapes,
                                       const ElectrodeSet& electrodes,
                                       const std::vector<double>& code);

}  // namespace lfk
