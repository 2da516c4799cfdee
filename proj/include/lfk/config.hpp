#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfk/eikonal.hpp"
#include "lfk/geometry.hpp"
#include "lfk/leadfield.hpp"
#include "lfk/sdf_autodecoder.hpp"
#include "lfk/surrogate.hpp"

namespace lfk {

/// Resolved run configuration. Defaults that do not come from published
/// values are tracked and marked in the emitted resolved config.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    int n_train = 20;
    int n_test = 5;
    Vec3 heart_center{30.0, 20.0, 30.0};

    double mesh_h = 10.0;       // pipeline meshes, mm
    Conductivities cond;
    VelocityModel velocities;
    APTemplate ap;

    int n_unipolar = 7;         // merged with the standard 9

    SamplingPolicy sampling;
    SolverOptions solver;

    SdfConfig sdf;
    int sdf_samples_per_geometry = 20000;
    InferConfig infer;
    int infer_observations = 512;
    int sdf_grid_n = 64;

    SurrogateConfig surrogate;

    double ecg_dt = 1.0;
    double ecg_t_end = 400.0;
    double qrs_window_begin = 0.0;
    double qrs_window_end = 200.0;

    double eval_heart_band = 10.0;
    int eval_points = 2048;

    /// Dotted key paths of defaults that are not published values.
    static std::vector<std::string> non_paper_defaults();
};

/// Parse and validate a config file; unknown keys are rejected.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text);

/// Resolved config as JSON text (includes the non-paper-default markers).
std::string resolved_config_json(const RunConfig& cfg);

}  // namespace lfk
