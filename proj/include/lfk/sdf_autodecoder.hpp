#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lfk/geom3.hpp"
#include "lfk/nn.hpp"

namespace lfk {

struct LatentCode {
    std::string geometry_id;
    std::vector<double> z;
    enum class Origin { Trained, Inferred } origin = Origin::Trained;
};

/// Empirical latent statistics with a ridge-regularized inverse covariance.
struct LatentStats {
    std::vector<double> mu;
    std::vector<std::vector<double>> sigma;
    std::vector<std::vector<double>> sigma_inv;
    double ridge = 0.0;
};

LatentStats latent_stats(const std::vector<LatentCode>& codes, double ridge_rel = 1e-6);
double mahalanobis2(const LatentStats& stats, const std::vector<double>& z);

/// Per-geometry SDF samples (raw mm).
struct SdfGeometrySamples {
    std::string geometry_id;
    std::vector<Vec3> points;
    std::vector<std::array<double, 4>> sdf;
};

struct SdfConfig {
    int d_z = 16;
    int k_fourier = 64;
    double sigma_fourier = 1.0;
    std::vector<int> hidden{256, 256, 256, 256, 256};
    double lr = 1e-3;
    int epochs = 40;
    int batch = 512;
    int batches_per_geometry = 4;
    double lambda_prior = 1e-4;
    double lambda_lip = 1e-6;
    Vec3 box_half{240.0, 150.0, 330.0};  // shared coordinate normalization, mm
    double sdf_scale_mm = 300.0;         // SDF target scaling
    std::uint64_t seed = 1;
};

struct SdfTrainResult {
    nn::Network decoder;
    std::vector<LatentCode> codes;
    std::vector<double> loss_history;  // per epoch
};

/// Joint Adam optimization of the decoder and per-geometry latent codes
/// (SDF MSE + Gaussian prior on codes + Lipschitz surrogate penalty).
SdfTrainResult train_autodecoder(const std::vector<SdfGeometrySamples>& dataset,
                                 const SdfConfig& cfg);

struct InferConfig {
    double lambda_maha = 1e-4;
    int iterations = 250;
    double lr = 5e-2;
    std::uint64_t seed = 1;
};

struct InferResult {
    LatentCode code;
    std::vector<double> objective_trace;  // per iteration, full-batch
};

/// MAP latent inference for an unseen geometry: Adam on z from mu with the
/// decoder frozen. Non-convergence is reported through the trace, not thrown.
InferResult infer_latent(const nn::Network& decoder, const SdfConfig& cfg,
                         const LatentStats& stats, const std::vector<Vec3>& obs_points,
                         const std::vector<std::array<double, 4>>& obs_sdf,
                         const InferConfig& icfg);

/// Decoder evaluated on an n^3 grid over [center-half, center+half];
/// returns 4 volumes (mm units) in x-fastest order.
struct SdfVolumes {
    int n = 0;
    Vec3 lo, hi;
    std::array<std::vector<double>, 4> values;

    Vec3 grid_point(int ix, int iy, int iz) const;
    double spacing() const;
};

SdfVolumes reconstruct_grid(const nn::Network& decoder, const SdfConfig& cfg,
                            const std::vector<double>& z, const Vec3& center, const Vec3& half,
                            int n);

/// Decoder forward for arbitrary points (mm in, mm out).
std::vector<std::array<double, 4>> decode_sdf(const nn::Network& decoder, const SdfConfig& cfg,
                                              const std::vector<double>& z,
                                              const std::vector<Vec3>& points);

/// The decoder architecture used by train_autodecoder (exposed for tests).
nn::Descriptor sdf_descriptor(const SdfConfig& cfg);

}  // namespace lfk
