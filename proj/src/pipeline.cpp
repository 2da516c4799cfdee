#include "lfk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "lfk/errors.hpp"
#include "lfk/metrics.hpp"
#include "lfk/svg.hpp"

namespace lfk {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string geom_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "geom_%03d", i);
    return buf;
}

ShapeFamily family_for(const RunConfig& cfg) {
    ShapeFamily fam;
    (void)cfg;
    return fam;
}

void begin_stage() { store::AccessLog::instance().reset(); }

void end_stage(const RunConfig& cfg, const Paths& paths, const std::string& stage,
               const json& timing) {
    store::AccessLog::instance().save(paths.access(stage));
    store::write_text_file(paths.timing(stage), timing.dump(2) + "\n");
    (void)cfg;
}

/// Training stages must never read test-split lead fields.
void audit_no_test_leadfields(const Paths& paths, const store::SplitManifest& split,
                              const std::string& stage) {
    const auto reads = store::AccessLog::instance().paths();
    for (const std::string& id : split.test_ids) {
        const std::string prefix = paths.leadfield_dir(id);
        for (const std::string& p : reads)
            if (p.rfind(prefix, 0) == 0)
                throw ConfigError("stage " + stage + " read test-split lead field " + p);
    }
}

std::vector<double> pca_code(const GeometryParams& params) {
    const auto flat = params.flat();
    return std::vector<double>(flat.begin(), flat.end());
}

TimeGrid grid_for(const RunConfig& cfg) {
    TimeGrid g;
    g.t0 = 0.0;
    g.dt = cfg.ecg_dt;
    g.steps = static_cast<int>(std::lround(cfg.ecg_t_end / cfg.ecg_dt)) + 1;
    return g;
}

}  // namespace

LoadedGeometry load_geometry_full(const RunConfig& cfg, const Paths& paths, const std::string& id) {
    LoadedGeometry g;
    g.rec = store::load_geometry(paths.geometry(id));
    g.shapes = make_shapes(g.rec.params, family_for(cfg));
    g.electrodes = merged_electrodes(g.shapes, cfg.n_unipolar);
    return g;
}

void stage_gen_geometries(const RunConfig& cfg) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const int n = cfg.n_train + cfg.n_test;
    std::vector<GeometryParams> params = sample_geometry(cfg.seed, n);

    store::SplitManifest split;
    split.seed = cfg.seed;
    for (int i = 0; i < n; ++i) {
        params[i].heart_center = cfg.heart_center;
        const std::string id = geom_id(i);
        const ShapeSet shapes = make_shapes(params[i], family_for(cfg));
        const ElectrodeSet electrodes = merged_electrodes(shapes, cfg.n_unipolar);
        store::save_geometry(paths.geometry(id), {id, params[i]}, shapes, electrodes);
        (i < cfg.n_train ? split.train_ids : split.test_ids).push_back(id);
    }
    store::save_split(paths.split(), split);
    store::write_text_file(paths.resolved_config(), resolved_config_json(cfg));

    end_stage(cfg, paths, "gen-geometries", {{"seconds", seconds_since(t0)}, {"geometries", n}});
}

void stage_gen_meshes(const RunConfig& cfg) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    std::vector<std::string> ids = split.train_ids;
    ids.insert(ids.end(), split.test_ids.begin(), split.test_ids.end());

    json per;
    for (const std::string& id : ids) {
        const auto tg = Clock::now();
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        const TetMesh mesh = build_mesh(g.shapes, cfg.mesh_h);
        store::save_mesh(paths.mesh(id), mesh);
        per[id] = {{"seconds", seconds_since(tg)},
                   {"nodes", mesh.num_nodes()},
                   {"tets", mesh.num_tets()},
                   {"heart_tets", mesh.heart_elements().size()}};
    }
    end_stage(cfg, paths, "gen-meshes", {{"seconds", seconds_since(t0)}, {"meshes", per}});
}

void stage_gen_leadfields(const RunConfig& cfg) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    std::vector<std::string> ids = split.train_ids;
    ids.insert(ids.end(), split.test_ids.begin(), split.test_ids.end());

    int failures = 0;
    double solve_seconds = 0.0;
    int solves = 0;
    json per = json::object();

    for (const std::string& id : ids) {
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        const TetMesh mesh = store::load_mesh(paths.mesh(id));
        const CsrMatrix K = assemble_stiffness(mesh, cfg.cond);

        json elecs = json::array();
        for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
            const auto ts = Clock::now();
            const std::uint32_t node = nearest_boundary_node(mesh, g.electrodes.positions[e]);
            try {
                const LeadField lf = solve_leadfield(mesh, cfg.cond, K, node, cfg.solver);
                store::LeadFieldHeader hdr;
                hdr.electrode_label = g.electrodes.labels[e];
                hdr.tol = cfg.solver.tol;
                store::save_leadfield(paths.leadfield(id, e), hdr, lf);
                const double secs = seconds_since(ts);
                solve_seconds += secs;
                solves += 1;
                elecs.push_back({{"label", g.electrodes.labels[e]},
                                 {"seconds", secs},
                                 {"iterations", lf.iterations},
                                 {"residual", lf.solver_residual}});
            } catch (const SolverError& err) {
                failures += 1;
                elecs.push_back({{"label", g.electrodes.labels[e]}, {"error", err.what()}});
            }
        }
        per[id] = elecs;
    }

    json timing = {{"seconds", seconds_since(t0)},
                   {"solves", solves},
                   {"mean_solve_seconds", solves > 0 ? solve_seconds / solves : 0.0},
                   {"failures", failures},
                   {"per_geometry", per}};
    end_stage(cfg, paths, "gen-leadfields", timing);
    std::printf("gen-leadfields: %d solves, mean %.2f s, %d failures\n", solves,
                solves > 0 ? solve_seconds / solves : 0.0, failures);
    if (failures > 0)
        throw SolverError("gen-leadfields: " + std::to_string(failures) + " solve(s) failed");
}

void stage_train_sdf(const RunConfig& cfg) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    std::vector<SdfGeometrySamples> dataset;
    for (const std::string& id : split.train_ids) {
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        SdfGeometrySamples s;
        s.geometry_id = id;
        sample_sdf_training_points(g.shapes, cfg.sdf_samples_per_geometry,
                                   cfg.seed ^ std::hash<std::string>{}(id), s.points, s.sdf);
        dataset.push_back(std::move(s));
    }

    SdfConfig sc = cfg.sdf;
    sc.seed = cfg.seed;
    const SdfTrainResult res = train_autodecoder(dataset, sc);

    store::save_network(paths.sdf_decoder(), res.decoder,
                        {{"sdf_scale_mm", sc.sdf_scale_mm},
                         {"box_half_x", sc.box_half.x},
                         {"box_half_y", sc.box_half.y},
                         {"box_half_z", sc.box_half.z}});
    store::save_codes(paths.sdf_codes_train(), res.codes);
    store::save_latent_stats(paths.sdf_stats(), latent_stats(res.codes));
    store::save_loss_csv(paths.sdf_loss(), res.loss_history);

    audit_no_test_leadfields(paths, split, "train-sdf");
    end_stage(cfg, paths, "train-sdf",
              {{"seconds", seconds_since(t0)},
               {"epochs", sc.epochs},
               {"final_loss", res.loss_history.empty() ? 0.0 : res.loss_history.back()}});
}

void stage_infer_latents(const RunConfig& cfg) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    const nn::Network decoder = store::load_network(paths.sdf_decoder());
    const LatentStats stats = store::load_latent_stats(paths.sdf_stats());

    SdfConfig sc = cfg.sdf;
    InferConfig ic = cfg.infer;

    std::vector<LatentCode> codes;
    json traces = json::object();
    for (const std::string& id : split.test_ids) {
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        std::vector<Vec3> pts;
        std::vector<std::array<double, 4>> sdf;
        sample_sdf_training_points(g.shapes, cfg.infer_observations,
                                   (cfg.seed * 31 + 7) ^ std::hash<std::string>{}(id), pts, sdf);
        ic.seed = cfg.seed;
        InferResult res = infer_latent(decoder, sc, stats, pts, sdf, ic);
        res.code.geometry_id = id;
        codes.push_back(res.code);
        traces[id] = {{"initial", res.objective_trace.front()},
                      {"final", res.objective_trace.back()},
                      {"trace", res.objective_trace}};
    }
    store::save_codes(paths.sdf_codes_test(), codes);
    store::write_text_file(paths.infer_traces(), traces.dump(2) + "\n");

    end_stage(cfg, paths, "infer-latents", {{"seconds", seconds_since(t0)}});
}

void stage_gen_dataset(const RunConfig& cfg, Encoding encoding) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    const std::vector<std::string>& ids = split.train_ids;

    std::vector<LoadedGeometry> geoms;
    std::vector<TetMesh> meshes;
    std::vector<std::vector<LeadField>> lfs(ids.size());
    for (std::size_t g = 0; g < ids.size(); ++g) {
        geoms.push_back(load_geometry_full(cfg, paths, ids[g]));
        meshes.push_back(store::load_mesh(paths.mesh(ids[g])));
        for (std::size_t e = 0; e < geoms[g].electrodes.size(); ++e)
            lfs[g].push_back(store::load_leadfield(paths.leadfield(ids[g], e)));
    }

    std::vector<std::vector<double>> codes;
    if (encoding == Encoding::PCA) {
        for (const auto& g : geoms) codes.push_back(pca_code(g.rec.params));
    } else {
        const auto stored = store::load_codes(paths.sdf_codes_train());
        for (const std::string& id : ids) {
            auto it = std::find_if(stored.begin(), stored.end(),
                                   [&](const LatentCode& c) { return c.geometry_id == id; });
            if (it == stored.end())
                throw MissingArtifact("gen-dataset: no trained latent code for " + id +
                                      " (run train-sdf first)");
            codes.push_back(it->z);
        }
    }

    std::vector<const ShapeSet*> shapes_p;
    std::vector<const TetMesh*> meshes_p;
    std::vector<const ElectrodeSet*> elecs_p;
    for (std::size_t g = 0; g < geoms.size(); ++g) {
        shapes_p.push_back(&geoms[g].shapes);
        meshes_p.push_back(&meshes[g]);
        elecs_p.push_back(&geoms[g].electrodes);
    }
    const SurrogateDataset ds = build_dataset(
        ids, shapes_p, meshes_p, elecs_p,
        [&](std::size_t g, std::size_t e) -> const LeadField& { return lfs[g][e]; }, codes,
        encoding, cfg.sampling, cfg.seed);
    store::save_dataset(paths.dataset(encoding), ds);

    audit_no_test_leadfields(paths, split, "gen-dataset");
    end_stage(cfg, paths, std::string("gen-dataset-") + encoding_name(encoding),
              {{"seconds", seconds_since(t0)}, {"samples", ds.total_samples()}});
}

void stage_train_lf(const RunConfig& cfg, Encoding encoding) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    if (!store::file_exists(paths.dataset(encoding)))
        throw MissingArtifact("train-lf: dataset " + paths.dataset(encoding) +
                              " missing (run gen-dataset first)");
    const SurrogateDataset ds = store::load_dataset(paths.dataset(encoding));

    SurrogateConfig sc = cfg.surrogate;
    sc.seed = cfg.seed + (encoding == Encoding::SDF ? 1 : 2);
    const SurrogateTrainResult res = train_surrogate(ds, sc);

    store::save_network(paths.surrogate_net(encoding), res.net, {{"grad_scale", res.grad_scale}});
    store::save_loss_csv(paths.surrogate_loss(encoding), res.loss_history, res.lr_history);

    const store::SplitManifest split = store::load_split(paths.split());
    audit_no_test_leadfields(paths, split, "train-lf");
    end_stage(cfg, paths, std::string("train-lf-") + encoding_name(encoding),
              {{"seconds", seconds_since(t0)},
               {"epochs", sc.epochs},
               {"final_loss", res.loss_history.empty() ? 0.0 : res.loss_history.back()}});
}

namespace {

std::vector<double> code_for(const RunConfig& cfg, const Paths& paths, const std::string& id,
                             const store::SplitManifest& split, Encoding encoding,
                             const GeometryParams& params) {
    if (encoding == Encoding::PCA) return pca_code(params);
    const bool is_test =
        std::find(split.test_ids.begin(), split.test_ids.end(), id) != split.test_ids.end();
    const auto codes =
        store::load_codes(is_test ? paths.sdf_codes_test() : paths.sdf_codes_train());
    auto it = std::find_if(codes.begin(), codes.end(),
                           [&](const LatentCode& c) { return c.geometry_id == id; });
    if (it == codes.end())
        throw MissingArtifact("no latent code for " + id + " (run train-sdf / infer-latents)");
    (void)cfg;
    return it->z;
}

ActivationMap activation_for(const RunConfig& cfg, const Paths& paths, const LoadedGeometry& g,
                             const TetMesh& mesh, PacingProtocol protocol) {
    const std::string path = paths.activation(g.rec.id, protocol_name(protocol));
    if (store::file_exists(path)) return store::load_activation(path, mesh.num_nodes());
    const auto sources = pacing_protocols(g.shapes, mesh, protocol);
    const ActivationMap map = solve_eikonal(mesh, cfg.velocities, sources);
    store::save_activation(path, protocol_name(protocol), cfg.velocities, map);
    return map;
}

void emit_overlay_plots(const RunConfig& cfg, const Paths& paths, const std::string& id,
                        const std::string& protocol) {
    // overlay every provider trace present for this (geometry, protocol)
    const std::vector<std::pair<std::string, std::string>> providers = {
        {"fem", "#1f77b4"},
        {"surrogate_sdf", "#2ca02c"},
        {"surrogate_pca", "#9467bd"},
        {"pseudo", "#d62728"}};
    std::vector<std::pair<std::string, ECGTrace>> traces;
    for (const auto& [tag, color] : providers) {
        const std::string csv = paths.ecg_csv(id, protocol, tag, true);
        if (store::file_exists(csv)) traces.push_back({tag, store::load_ecg(csv)});
    }
    if (traces.empty()) return;

    const auto& names = traces.front().second.lead_names;
    for (std::size_t l = 0; l < names.size(); ++l) {
        std::vector<SvgSeries> series;
        for (const auto& [tag, trace] : traces) {
            SvgSeries s;
            s.label = tag;
            for (const auto& [ptag, color] : providers)
                if (ptag == tag) s.color = color;
            for (std::size_t i = 0; i < trace.num_samples(); ++i) {
                s.x.push_back(trace.t0 + trace.dt * i);
                s.y.push_back(trace.values[l][i]);
            }
            series.push_back(std::move(s));
        }
        store::ensure_dir(paths.ecg_dir(id, protocol) + "/plots");
        write_svg_chart(paths.ecg_dir(id, protocol) + "/plots/" + names[l] + ".svg",
                        "lead " + names[l] + " (" + protocol + ")", "t [ms]", "potential",
                        series);
    }
    (void)cfg;
}

}  // namespace

void stage_simulate_ecg(const RunConfig& cfg, GradientProvider provider, PacingProtocol protocol,
                        Encoding encoding) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    const TimeGrid grid = grid_for(cfg);

    std::string provider_tag = provider_name(provider);
    if (provider == GradientProvider::Surrogate)
        provider_tag += std::string("_") + encoding_name(encoding);

    nn::Network net;
    double grad_scale = 1.0;
    if (provider == GradientProvider::Surrogate) {
        std::map<std::string, double> meta;
        if (!store::file_exists(paths.surrogate_net(encoding)))
            throw MissingArtifact("simulate-ecg: surrogate net missing (run train-lf first)");
        net = store::load_network(paths.surrogate_net(encoding), &meta);
        grad_scale = meta.count("grad_scale") ? meta.at("grad_scale") : 1.0;
    }

    for (const std::string& id : split.test_ids) {
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        const TetMesh mesh = store::load_mesh(paths.mesh(id));
        const ActivationMap activation = activation_for(cfg, paths, g, mesh, protocol);

        GradientField field;
        switch (provider) {
            case GradientProvider::FEM: {
                std::vector<LeadField> lfs;
                for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
                    if (!store::file_exists(paths.leadfield(id, e)))
                        throw MissingArtifact("simulate-ecg: lead field missing for " + id +
                                              " (run gen-leadfields first)");
                    lfs.push_back(store::load_leadfield(paths.leadfield(id, e)));
                }
                field = fem_gradient_field(mesh, lfs, g.electrodes.labels);
                break;
            }
            case GradientProvider::Surrogate: {
                const auto code = code_for(cfg, paths, id, split, encoding, g.rec.params);
                field = surrogate_gradient_field(net, grad_scale, mesh, g.shapes, g.electrodes,
                                                 code);
                break;
            }
            case GradientProvider::Pseudo:
                field = pseudo_gradient_field(mesh, g.electrodes, cfg.cond.sigma_0);
                break;
        }

        const ECGTrace unipolar = ecg_integral(mesh, cfg.cond, field, activation, cfg.ap, grid);
        store::save_ecg(paths.ecg_csv(id, protocol_name(protocol), provider_tag, false), unipolar,
                        protocol_name(protocol), provider_tag);
        const ECGTrace twelve = assemble_leads(unipolar, LeadConfig::Standard12);
        store::save_ecg(paths.ecg_csv(id, protocol_name(protocol), provider_tag, true), twelve,
                        protocol_name(protocol), provider_tag);
        emit_overlay_plots(cfg, paths, id, protocol_name(protocol));
    }

    end_stage(cfg, paths, "simulate-ecg-" + provider_tag + "-" + protocol_name(protocol),
              {{"seconds", seconds_since(t0)}});
}

EvaluationSummary stage_evaluate(const RunConfig& cfg, bool strict) {
    begin_stage();
    const Paths paths{cfg.out_dir};
    const auto t0 = Clock::now();

    const store::SplitManifest split = store::load_split(paths.split());
    const TimeGrid grid = grid_for(cfg);
    (void)grid;

    std::map<std::string, double> grad_scale;
    std::map<std::string, nn::Network> nets;
    for (Encoding enc : {Encoding::PCA, Encoding::SDF}) {
        std::map<std::string, double> meta;
        if (!store::file_exists(paths.surrogate_net(enc)))
            throw MissingArtifact("evaluate: surrogate net missing (run train-lf for both encodings)");
        nets[encoding_name(enc)] = store::load_network(paths.surrogate_net(enc), &meta);
        grad_scale[encoding_name(enc)] = meta.count("grad_scale") ? meta.at("grad_scale") : 1.0;
    }

    EvaluationSummary sum;
    sum.geom_ids = split.test_ids;

    // pooled per-point errors per encoding and region
    std::map<std::string, std::vector<double>> angular_heart, angular_full, magrel_heart,
        magrel_full;
    std::map<std::string, std::vector<double>> angular_prec;  // precordial electrodes
    std::vector<double> pseudo_ang_heart, pseudo_ang_full;

    std::map<std::string, std::vector<double>> ecg_err;  // encoding -> per geometry x protocol
    std::vector<double> pseudo_ecg;

    for (const std::string& id : split.test_ids) {
        const LoadedGeometry g = load_geometry_full(cfg, paths, id);
        const TetMesh mesh = store::load_mesh(paths.mesh(id));
        const PointLocator locator(mesh);

        SamplingPolicy pol = cfg.sampling;
        pol.n_points = cfg.eval_points;
        const std::vector<Vec3> pts =
            sample_policy_points(g.shapes, mesh, locator, pol, cfg.seed * 131 + 17);

        std::vector<std::uint32_t> tet_of(pts.size());
        std::vector<bool> in_heart_region(pts.size());
        std::vector<Vec3> x_norm(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            tet_of[i] = locator.locate(pts[i])->first;
            in_heart_region[i] =
                signed_distance(g.shapes, Surface::Epi, pts[i]) <= cfg.eval_heart_band;
            x_norm[i] = g.shapes.normalize_point(pts[i]);
        }

        // FEM reference gradients at the sample points, all electrodes
        std::vector<LeadField> lfs;
        for (std::size_t e = 0; e < g.electrodes.size(); ++e)
            lfs.push_back(store::load_leadfield(paths.leadfield(id, e)));

        for (Encoding enc : {Encoding::PCA, Encoding::SDF}) {
            const std::string key = encoding_name(enc);
            const auto code = code_for(cfg, paths, id, split, enc, g.rec.params);
            for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
                const auto pred = predict_grad(nets[key], grad_scale[key], x_norm,
                                               g.electrodes.normalized[e], code);
                const bool precordial = g.electrodes.labels[e][0] == 'V' &&
                                        g.electrodes.labels[e].size() == 2;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const Vec3 ref = lfs[e].grad_Z[tet_of[i]];
                    const double ang = metrics::angular_error(pred[i], ref);
                    const double rel = metrics::magnitude_error(pred[i], ref).relative;
                    angular_full[key].push_back(ang);
                    magrel_full[key].push_back(rel);
                    if (in_heart_region[i]) {
                        angular_heart[key].push_back(ang);
                        magrel_heart[key].push_back(rel);
                        if (precordial) angular_prec[key].push_back(ang);
                    }
                }
            }
        }

        // pseudo lead-field baseline on the same points
        for (std::size_t e = 0; e < g.electrodes.size(); ++e) {
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const Vec3 ref = lfs[e].grad_Z[tet_of[i]];
                const Vec3 ps =
                    pseudo_leadfield_gradient(g.electrodes.positions[e], pts[i], cfg.cond.sigma_0);
                const double ang = metrics::angular_error(ps, ref);
                pseudo_ang_full.push_back(ang);
                if (in_heart_region[i]) pseudo_ang_heart.push_back(ang);
            }
        }

        // ECG-level comparisons from the simulated traces
        double surr_geo = 0.0, pseudo_geo = 0.0;
        int n_proto = 0;
        for (PacingProtocol proto : {PacingProtocol::CrtLike, PacingProtocol::SinusLike}) {
            const std::string pn = protocol_name(proto);
            const std::string fem_csv = paths.ecg_csv(id, pn, "fem", true);
            if (!store::file_exists(fem_csv))
                throw MissingArtifact("evaluate: missing " + fem_csv +
                                      " (run simulate-ecg for all providers first)");
            const ECGTrace fem = store::load_ecg(fem_csv);
            for (Encoding enc : {Encoding::PCA, Encoding::SDF}) {
                const std::string tag = std::string("surrogate_") + encoding_name(enc);
                const ECGTrace tr = store::load_ecg(paths.ecg_csv(id, pn, tag, true));
                const double err = metrics::trace_rel_l2(tr, fem);
                ecg_err[encoding_name(enc)].push_back(err);
                if (enc == Encoding::SDF) surr_geo += err;
            }
            const ECGTrace ps = store::load_ecg(paths.ecg_csv(id, pn, "pseudo", true));
            const double perr = metrics::trace_rel_l2(ps, fem);
            pseudo_ecg.push_back(perr);
            pseudo_geo += perr;
            n_proto += 1;
        }
        sum.surrogate_ecg_err.push_back(surr_geo / n_proto);
        sum.pseudo_ecg_err.push_back(pseudo_geo / n_proto);
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
    };

    sum.pca.angular_heart = mean(angular_heart["pca"]);
    sum.pca.angular_ecg_leads = mean(angular_prec["pca"]);
    sum.pca.ecg_rel_l2 = mean(ecg_err["pca"]);
    sum.sdf.angular_heart = mean(angular_heart["sdf"]);
    sum.sdf.angular_ecg_leads = mean(angular_prec["sdf"]);
    sum.sdf.ecg_rel_l2 = mean(ecg_err["sdf"]);
    sum.pseudo_angular_heart = mean(pseudo_ang_heart);
    sum.pseudo_ecg_rel_l2 = mean(pseudo_ecg);
    for (std::size_t i = 0; i < sum.geom_ids.size(); ++i)
        if (sum.surrogate_ecg_err[i] < sum.pseudo_ecg_err[i]) sum.surrogate_beats_pseudo += 1;
    sum.extras["sdf_angular_full"] = mean(angular_full["sdf"]);
    sum.extras["pca_angular_full"] = mean(angular_full["pca"]);
    sum.extras["pseudo_angular_full"] = mean(pseudo_ang_full);

    // reports
    store::ensure_dir(paths.report_dir());
    {
        std::string csv = "encoding,angular_error_deg,angular_error_ecg_leads_deg,ecg_rel_l2\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "pca,%.6g,%.6g,%.6g\n", sum.pca.angular_heart,
                      sum.pca.angular_ecg_leads, sum.pca.ecg_rel_l2);
        csv += buf;
        std::snprintf(buf, sizeof(buf), "sdf,%.6g,%.6g,%.6g\n", sum.sdf.angular_heart,
                      sum.sdf.angular_ecg_leads, sum.sdf.ecg_rel_l2);
        csv += buf;
        store::write_text_file(paths.report_dir() + "/table1.csv", csv);
    }
    for (const auto& [key, vals] : angular_heart)
        store::save_cdf_csv(paths.report_dir() + "/cdf_angular_heart10mm_" + key + ".csv",
                            metrics::error_cdf(vals));
    for (const auto& [key, vals] : angular_full)
        store::save_cdf_csv(paths.report_dir() + "/cdf_angular_full_torso_" + key + ".csv",
                            metrics::error_cdf(vals));
    for (const auto& [key, vals] : magrel_heart)
        store::save_cdf_csv(paths.report_dir() + "/cdf_magrel_heart10mm_" + key + ".csv",
                            metrics::error_cdf(vals));
    for (const auto& [key, vals] : magrel_full)
        store::save_cdf_csv(paths.report_dir() + "/cdf_magrel_full_torso_" + key + ".csv",
                            metrics::error_cdf(vals));

    json rep;
    rep["regions"] = {"full_torso", "heart_10mm"};
    rep["table1"] = {{"pca",
                      {{"angular_heart", sum.pca.angular_heart},
                       {"angular_ecg_leads", sum.pca.angular_ecg_leads},
                       {"ecg_rel_l2", sum.pca.ecg_rel_l2}}},
                     {"sdf",
                      {{"angular_heart", sum.sdf.angular_heart},
                       {"angular_ecg_leads", sum.sdf.angular_ecg_leads},
                       {"ecg_rel_l2", sum.sdf.ecg_rel_l2}}}};
    rep["pseudo_baseline"] = {{"angular_heart", sum.pseudo_angular_heart},
                              {"angular_full", sum.extras["pseudo_angular_full"]},
                              {"ecg_rel_l2", sum.pseudo_ecg_rel_l2}};
    rep["per_geometry"] = json::object();
    for (std::size_t i = 0; i < sum.geom_ids.size(); ++i)
        rep["per_geometry"][sum.geom_ids[i]] = {{"surrogate_ecg_rel_l2", sum.surrogate_ecg_err[i]},
                                                {"pseudo_ecg_rel_l2", sum.pseudo_ecg_err[i]}};
    rep["surrogate_beats_pseudo"] = sum.surrogate_beats_pseudo;
    store::write_text_file(paths.report_dir() + "/evaluation.json", rep.dump(2) + "\n");

    std::printf("evaluate: table (encoding, angular, angular ECG leads, ECG rel l2)\n");
    std::printf("  pca: %.3f deg, %.3f deg, %.4f\n", sum.pca.angular_heart,
                sum.pca.angular_ecg_leads, sum.pca.ecg_rel_l2);
    std::printf("  sdf: %.3f deg, %.3f deg, %.4f\n", sum.sdf.angular_heart,
                sum.sdf.angular_ecg_leads, sum.sdf.ecg_rel_l2);
    std::printf("  pseudo baseline: %.3f deg heart, ECG rel l2 %.4f\n", sum.pseudo_angular_heart,
                sum.pseudo_ecg_rel_l2);

    end_stage(cfg, paths, "evaluate", {{"seconds", seconds_since(t0)}});

    if (strict) {
        std::vector<std::string> violations;
        if (!(sum.sdf.angular_heart < 15.0))
            violations.push_back("SDF-encoded heart-region angular error >= 15 deg");
        if (!(sum.sdf.ecg_rel_l2 < 0.10))
            violations.push_back("SDF-encoded ECG relative l2 error >= 0.10");
        if (!(sum.surrogate_beats_pseudo >= static_cast<int>(sum.geom_ids.size()) - 1))
            violations.push_back("surrogate ECG error does not beat pseudo on enough geometries");
        if (!(sum.sdf.angular_heart <= sum.pca.angular_heart))
            violations.push_back("SDF-encoded angular error exceeds PCA-encoded");
        if (!(sum.sdf.angular_heart < sum.pseudo_angular_heart))
            violations.push_back("surrogate angular error does not beat the pseudo baseline");
        if (!violations.empty()) {
            std::string msg = "evaluate --strict: ordering violations:";
            for (const auto& v : violations) msg += "\n  - " + v;
            throw ConfigError(msg);
        }
    }
    return sum;
}

EvaluationSummary run_pipeline(const RunConfig& cfg) {
    stage_gen_geometries(cfg);
    stage_gen_meshes(cfg);
    stage_gen_leadfields(cfg);
    stage_train_sdf(cfg);
    stage_infer_latents(cfg);
    stage_gen_dataset(cfg, Encoding::PCA);
    stage_gen_dataset(cfg, Encoding::SDF);
    stage_train_lf(cfg, Encoding::PCA);
    stage_train_lf(cfg, Encoding::SDF);
    for (PacingProtocol proto : {PacingProtocol::CrtLike, PacingProtocol::SinusLike}) {
        stage_simulate_ecg(cfg, GradientProvider::FEM, proto);
        stage_simulate_ecg(cfg, GradientProvider::Pseudo, proto);
        stage_simulate_ecg(cfg, GradientProvider::Surrogate, proto, Encoding::PCA);
        stage_simulate_ecg(cfg, GradientProvider::Surrogate, proto, Encoding::SDF);
    }
    return stage_evaluate(cfg, false);
}

}  // namespace lfk
