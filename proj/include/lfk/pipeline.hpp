#pragma once

#include <map>
#include <string>
#include <vector>

#include "lfk/config.hpp"
#include "lfk/ecg.hpp"
#include "lfk/store.hpp"
#include "lfk/surrogate.hpp"

namespace lfk {

/// Artifact layout under the run directory.
struct Paths {
    std::string root;

    std::string resolved_config() const { return root + "/resolved_config.json"; }
    std::string split() const { return root + "/split.json"; }
    std::string geometry(const std::string& id) const {
        return root + "/geometries/" + id + ".json";
    }
    std::string mesh(const std::string& id) const { return root + "/meshes/" + id + ".mesh.json"; }
    std::string leadfield(const std::string& id, std::size_t elec) const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "e%02zu", elec);
        return root + "/leadfields/" + id + "/" + buf + ".lf.json";
    }
    std::string leadfield_dir(const std::string& id) const { return root + "/leadfields/" + id; }
    std::string sdf_decoder() const { return root + "/sdf/decoder.net.json"; }
    std::string sdf_codes_train() const { return root + "/sdf/codes_train.json"; }
    std::string sdf_codes_test() const { return root + "/sdf/codes_test.json"; }
    std::string sdf_stats() const { return root + "/sdf/latent_stats.json"; }
    std::string sdf_loss() const { return root + "/sdf/loss_sdf.csv"; }
    std::string infer_traces() const { return root + "/sdf/infer_traces.json"; }
    std::string dataset(Encoding e) const {
        return root + "/datasets/train_" + encoding_name(e) + ".ds.json";
    }
    std::string surrogate_net(Encoding e) const {
        return root + "/surrogate/net_" + encoding_name(e) + ".net.json";
    }
    std::string surrogate_loss(Encoding e) const {
        return root + "/surrogate/loss_" + encoding_name(e) + ".csv";
    }
    std::string ecg_dir(const std::string& id, const std::string& protocol) const {
        return root + "/ecg/" + id + "/" + protocol;
    }
    std::string activation(const std::string& id, const std::string& protocol) const {
        return ecg_dir(id, protocol) + "/activation.json";
    }
    std::string ecg_csv(const std::string& id, const std::string& protocol,
                        const std::string& provider_tag, bool twelve_lead) const {
        return ecg_dir(id, protocol) + "/" + provider_tag +
               (twelve_lead ? "_12lead.csv" : "_unipolar.csv");
    }
    std::string report_dir() const { return root + "/reports"; }
    std::string access(const std::string& stage) const {
        return root + "/access/" + stage + ".json";
    }
    std::string timing(const std::string& stage) const {
        return root + "/timing/" + stage + ".json";
    }
};

struct LoadedGeometry {
    store::GeometryRecord rec;
    ShapeSet shapes;
    ElectrodeSet electrodes;
};

LoadedGeometry load_geometry_full(const RunConfig& cfg, const Paths& paths, const std::string& id);

void stage_gen_geometries(const RunConfig& cfg);
void stage_gen_meshes(const RunConfig& cfg);
void stage_gen_leadfields(const RunConfig& cfg);
void stage_train_sdf(const RunConfig& cfg);
void stage_infer_latents(const RunConfig& cfg);
void stage_gen_dataset(const RunConfig& cfg, Encoding encoding);
void stage_train_lf(const RunConfig& cfg, Encoding encoding);
void stage_simulate_ecg(const RunConfig& cfg, GradientProvider provider, PacingProtocol protocol,
                        Encoding encoding = Encoding::SDF);

struct EvaluationSummary {
    struct Row {
        double angular_heart = 0.0;      // mean over test geometries, degrees
        double angular_ecg_leads = 0.0;  // precordial electrodes only
        double ecg_rel_l2 = 0.0;         // stacked 12-lead, mean over geoms+protocols
    };
    Row pca, sdf;
    double pseudo_angular_heart = 0.0;
    double pseudo_ecg_rel_l2 = 0.0;

    // per test geometry (SDF-encoded surrogate vs pseudo), both protocols averaged
    std::vector<std::string> geom_ids;
    std::vector<double> surrogate_ecg_err;
    std::vector<double> pseudo_ecg_err;
    int surrogate_beats_pseudo = 0;

    std::map<std::string, double> extras;
};

EvaluationSummary stage_evaluate(const RunConfig& cfg, bool strict);

/// All stages in order (geometries ... evaluate).
EvaluationSummary run_pipeline(const RunConfig& cfg);

}  // namespace lfk
