#include "lfk/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lfk/errors.hpp"

namespace lfk {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
    if (!j.is_object()) throw ConfigError("config: expected object at " + scope);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + scope + it.key() + "'");
}

double num(const json& j, const char* key, double dflt) {
    return j.contains(key) ? j.at(key).get<double>() : dflt;
}
int inum(const json& j, const char* key, int dflt) {
    return j.contains(key) ? j.at(key).get<int>() : dflt;
}

Vec3 vec3_of(const json& j, const char* key, const Vec3& dflt) {
    if (!j.contains(key)) return dflt;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string("config: ") + key + " must be [x,y,z]");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

}  // namespace

std::vector<std::string> RunConfig::non_paper_defaults() {
    return {
        "geometry.family (synthetic ellipsoid torso/heart replaces the atlases)",
        "geometry.heart_center",
        "mesh.h_mm",
        "electrodes.n_unipolar (merged 9 standard + n anterior unipolar list)",
        "velocities.v_f", "velocities.v_t",
        "ap_template.* (analytic action potential replaces ten Tusscher)",
        "sampling.n_points (desk scale)",
        "solver.tol", "solver.max_iter",
        "sdf.k_fourier", "sdf.sigma_fourier", "sdf.lambda_prior", "sdf.lambda_lip",
        "sdf.epochs (desk scale)", "sdf.batch", "sdf.batches_per_geometry",
        "sdf.samples_per_geometry (desk scale)", "sdf.box_half_mm", "sdf.sdf_scale_mm",
        "sdf.grid_n (desk scale)",
        "infer.lambda_maha", "infer.iterations", "infer.lr", "infer.observations",
        "surrogate.k_fourier", "surrogate.sigma_fourier", "surrogate.lambda_cos",
        "surrogate.epochs (desk scale)", "surrogate.steps_per_epoch", "surrogate.batch",
        "ecg.dt_ms", "ecg.t_end_ms", "ecg.qrs_window_ms (5%-envelope duration rule)",
        "eval.n_points",
    };
}

RunConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }

    check_keys(j, {"seed", "out_dir", "geometry", "mesh", "conductivities", "velocities",
                   "ap_template", "electrodes", "sampling", "solver", "sdf", "infer", "surrogate",
                   "ecg", "eval"},
               "");

    RunConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();

    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        check_keys(g, {"n_train", "n_test", "heart_center"}, "geometry.");
        c.n_train = inum(g, "n_train", c.n_train);
        c.n_test = inum(g, "n_test", c.n_test);
        c.heart_center = vec3_of(g, "heart_center", c.heart_center);
        if (c.n_train < 2 || c.n_test < 1)
            throw ConfigError("config: need n_train >= 2 and n_test >= 1");
    }
    if (j.contains("mesh")) {
        const auto& g = j.at("mesh");
        check_keys(g, {"h_mm"}, "mesh.");
        c.mesh_h = num(g, "h_mm", c.mesh_h);
        if (c.mesh_h <= 0) throw ConfigError("config: mesh.h_mm must be positive");
    }
    if (j.contains("conductivities")) {
        const auto& g = j.at("conductivities");
        check_keys(g, {"sigma_it", "sigma_if", "sigma_et", "sigma_ef", "sigma_0"},
                   "conductivities.");
        c.cond.sigma_it = num(g, "sigma_it", c.cond.sigma_it);
        c.cond.sigma_if = num(g, "sigma_if", c.cond.sigma_if);
        c.cond.sigma_et = num(g, "sigma_et", c.cond.sigma_et);
        c.cond.sigma_ef = num(g, "sigma_ef", c.cond.sigma_ef);
        c.cond.sigma_0 = num(g, "sigma_0", c.cond.sigma_0);
        for (double s : {c.cond.sigma_it, c.cond.sigma_if, c.cond.sigma_et, c.cond.sigma_ef,
                         c.cond.sigma_0})
            if (s <= 0) throw ConfigError("config: conductivities must be positive");
    }
    if (j.contains("velocities")) {
        const auto& g = j.at("velocities");
        check_keys(g, {"v_f", "v_t"}, "velocities.");
        c.velocities.v_f = num(g, "v_f", c.velocities.v_f);
        c.velocities.v_t = num(g, "v_t", c.velocities.v_t);
        if (!(c.velocities.v_f >= c.velocities.v_t && c.velocities.v_t > 0))
            throw ConfigError("config: velocities must satisfy v_f >= v_t > 0");
    }
    if (j.contains("ap_template")) {
        const auto& g = j.at("ap_template");
        check_keys(g, {"resting_mv", "amplitude_mv", "upstroke_ms", "apd_ms", "repol_ms"},
                   "ap_template.");
        c.ap.resting = num(g, "resting_mv", c.ap.resting);
        c.ap.amplitude = num(g, "amplitude_mv", c.ap.amplitude);
        c.ap.upstroke_width = num(g, "upstroke_ms", c.ap.upstroke_width);
        c.ap.apd = num(g, "apd_ms", c.ap.apd);
        c.ap.repol_width = num(g, "repol_ms", c.ap.repol_width);
    }
    if (j.contains("electrodes")) {
        const auto& g = j.at("electrodes");
        check_keys(g, {"n_unipolar"}, "electrodes.");
        c.n_unipolar = inum(g, "n_unipolar", c.n_unipolar);
        if (c.n_unipolar < 0) throw ConfigError("config: electrodes.n_unipolar must be >= 0");
    }
    if (j.contains("sampling")) {
        const auto& g = j.at("sampling");
        check_keys(g, {"n_points", "near_fraction", "band_mm"}, "sampling.");
        c.sampling.n_points = inum(g, "n_points", c.sampling.n_points);
        c.sampling.near_fraction = num(g, "near_fraction", c.sampling.near_fraction);
        c.sampling.band_mm = num(g, "band_mm", c.sampling.band_mm);
        if (c.sampling.near_fraction < 0 || c.sampling.near_fraction > 1)
            throw ConfigError("config: sampling.near_fraction must be in [0,1]");
        if (c.sampling.band_mm <= 0) throw ConfigError("config: sampling.band_mm must be positive");
    }
    if (j.contains("solver")) {
        const auto& g = j.at("solver");
        check_keys(g, {"tol", "max_iter"}, "solver.");
        c.solver.tol = num(g, "tol", c.solver.tol);
        c.solver.max_iter = inum(g, "max_iter", c.solver.max_iter);
    }
    if (j.contains("sdf")) {
        const auto& g = j.at("sdf");
        check_keys(g, {"d_z", "k_fourier", "sigma_fourier", "samples_per_geometry", "epochs",
                       "batch", "batches_per_geometry", "lr", "lambda_prior", "lambda_lip",
                       "grid_n", "sdf_scale_mm", "box_half_mm"},
                   "sdf.");
        c.sdf.d_z = inum(g, "d_z", c.sdf.d_z);
        c.sdf.k_fourier = inum(g, "k_fourier", c.sdf.k_fourier);
        c.sdf.sigma_fourier = num(g, "sigma_fourier", c.sdf.sigma_fourier);
        c.sdf_samples_per_geometry = inum(g, "samples_per_geometry", c.sdf_samples_per_geometry);
        c.sdf.epochs = inum(g, "epochs", c.sdf.epochs);
        c.sdf.batch = inum(g, "batch", c.sdf.batch);
        c.sdf.batches_per_geometry = inum(g, "batches_per_geometry", c.sdf.batches_per_geometry);
        c.sdf.lr = num(g, "lr", c.sdf.lr);
        c.sdf.lambda_prior = num(g, "lambda_prior", c.sdf.lambda_prior);
        c.sdf.lambda_lip = num(g, "lambda_lip", c.sdf.lambda_lip);
        c.sdf_grid_n = inum(g, "grid_n", c.sdf_grid_n);
        c.sdf.sdf_scale_mm = num(g, "sdf_scale_mm", c.sdf.sdf_scale_mm);
        c.sdf.box_half = vec3_of(g, "box_half_mm", c.sdf.box_half);
    }
    if (j.contains("infer")) {
        const auto& g = j.at("infer");
        check_keys(g, {"lambda_maha", "iterations", "lr", "observations"}, "infer.");
        c.infer.lambda_maha = num(g, "lambda_maha", c.infer.lambda_maha);
        c.infer.iterations = inum(g, "iterations", c.infer.iterations);
        c.infer.lr = num(g, "lr", c.infer.lr);
        c.infer_observations = inum(g, "observations", c.infer_observations);
    }
    if (j.contains("surrogate")) {
        const auto& g = j.at("surrogate");
        check_keys(g, {"k_fourier", "sigma_fourier", "epochs", "steps_per_epoch", "batch", "lr",
                       "lambda_cos"},
                   "surrogate.");
        c.surrogate.k_fourier = inum(g, "k_fourier", c.surrogate.k_fourier);
        c.surrogate.sigma_fourier = num(g, "sigma_fourier", c.surrogate.sigma_fourier);
        c.surrogate.epochs = inum(g, "epochs", c.surrogate.epochs);
        c.surrogate.steps_per_epoch = inum(g, "steps_per_epoch", c.surrogate.steps_per_epoch);
        c.surrogate.batch = inum(g, "batch", c.surrogate.batch);
        c.surrogate.lr = num(g, "lr", c.surrogate.lr);
        c.surrogate.lambda_cos = num(g, "lambda_cos", c.surrogate.lambda_cos);
    }
    if (j.contains("ecg")) {
        const auto& g = j.at("ecg");
        check_keys(g, {"dt_ms", "t_end_ms", "qrs_window_ms"}, "ecg.");
        c.ecg_dt = num(g, "dt_ms", c.ecg_dt);
        c.ecg_t_end = num(g, "t_end_ms", c.ecg_t_end);
        if (g.contains("qrs_window_ms")) {
            const auto& w = g.at("qrs_window_ms");
            if (!w.is_array() || w.size() != 2)
                throw ConfigError("config: ecg.qrs_window_ms must be [begin, end]");
            c.qrs_window_begin = w[0].get<double>();
            c.qrs_window_end = w[1].get<double>();
        }
        if (c.ecg_dt <= 0 || c.ecg_t_end <= 0) throw ConfigError("config: ecg grid must be positive");
    }
    if (j.contains("eval")) {
        const auto& g = j.at("eval");
        check_keys(g, {"heart_band_mm", "n_points"}, "eval.");
        c.eval_heart_band = num(g, "heart_band_mm", c.eval_heart_band);
        c.eval_points = inum(g, "n_points", c.eval_points);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string resolved_config_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["geometry"] = {{"n_train", c.n_train},
                     {"n_test", c.n_test},
                     {"heart_center", {c.heart_center.x, c.heart_center.y, c.heart_center.z}}};
    j["mesh"] = {{"h_mm", c.mesh_h}};
    j["conductivities"] = {{"sigma_it", c.cond.sigma_it}, {"sigma_if", c.cond.sigma_if},
                           {"sigma_et", c.cond.sigma_et}, {"sigma_ef", c.cond.sigma_ef},
                           {"sigma_0", c.cond.sigma_0}};
    j["velocities"] = {{"v_f", c.velocities.v_f}, {"v_t", c.velocities.v_t}};
    j["ap_template"] = {{"resting_mv", c.ap.resting},
                        {"amplitude_mv", c.ap.amplitude},
                        {"upstroke_ms", c.ap.upstroke_width},
                        {"apd_ms", c.ap.apd},
                        {"repol_ms", c.ap.repol_width}};
    j["electrodes"] = {{"n_unipolar", c.n_unipolar}};
    j["sampling"] = {{"n_points", c.sampling.n_points},
                     {"near_fraction", c.sampling.near_fraction},
                     {"band_mm", c.sampling.band_mm}};
    j["solver"] = {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}};
    j["sdf"] = {{"d_z", c.sdf.d_z},
                {"k_fourier", c.sdf.k_fourier},
                {"sigma_fourier", c.sdf.sigma_fourier},
                {"samples_per_geometry", c.sdf_samples_per_geometry},
                {"epochs", c.sdf.epochs},
                {"batch", c.sdf.batch},
                {"batches_per_geometry", c.sdf.batches_per_geometry},
                {"lr", c.sdf.lr},
                {"lambda_prior", c.sdf.lambda_prior},
                {"lambda_lip", c.sdf.lambda_lip},
                {"grid_n", c.sdf_grid_n},
                {"sdf_scale_mm", c.sdf.sdf_scale_mm},
                {"box_half_mm", {c.sdf.box_half.x, c.sdf.box_half.y, c.sdf.box_half.z}}};
    j["infer"] = {{"lambda_maha", c.infer.lambda_maha},
                  {"iterations", c.infer.iterations},
                  {"lr", c.infer.lr},
                  {"observations", c.infer_observations}};
    j["surrogate"] = {{"k_fourier", c.surrogate.k_fourier},
                      {"sigma_fourier", c.surrogate.sigma_fourier},
                      {"epochs", c.surrogate.epochs},
                      {"steps_per_epoch", c.surrogate.steps_per_epoch},
                      {"batch", c.surrogate.batch},
                      {"lr", c.surrogate.lr},
                      {"lambda_cos", c.surrogate.lambda_cos}};
    j["ecg"] = {{"dt_ms", c.ecg_dt},
                {"t_end_ms", c.ecg_t_end},
                {"qrs_window_ms", {c.qrs_window_begin, c.qrs_window_end}}};
    j["eval"] = {{"heart_band_mm", c.eval_heart_band}, {"n_points", c.eval_points}};
    j["_non_paper_defaults"] = RunConfig::non_paper_defaults();
    return j.dump(2) + "\n";
}

}  // namespace lfk
