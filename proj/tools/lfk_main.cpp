#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lfk/config.hpp"
#include "lfk/errors.hpp"
#include "lfk/pipeline.hpp"

namespace {

// exit codes: 0 ok, 2 validation, 3 missing upstream artifact, 4 solver/training
int run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return 0;
    } catch (const lfk::MissingArtifact& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const lfk::SolverError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const lfk::TrainingError& e) {
        std::fprintf(stderr, "error: %s (last finite epoch %d)\n", e.what(), e.last_finite_epoch);
        return 4;
    } catch (const lfk::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const lfk::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lfk - geometry-dependent ECG lead-field kit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool strict = false;

    app.add_option("--config", config_path, "run configuration JSON")->capture_default_str();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed, "seed (overrides config)");
    app.add_flag("--strict", strict, "evaluate: fail on acceptance-ordering violations");

    std::string provider = "fem";
    std::string protocol = "crt";
    std::string encoding = "sdf";

    auto* gen_geo = app.add_subcommand("gen-geometries", "sample geometries and the split manifest");
    auto* gen_mesh = app.add_subcommand("gen-meshes", "build and store labeled tet meshes");
    auto* gen_lf = app.add_subcommand("gen-leadfields", "solve lead fields for every electrode");
    auto* train_sdf = app.add_subcommand("train-sdf", "train the SDF auto-decoder");
    auto* infer = app.add_subcommand("infer-latents", "MAP latent codes for the test split");
    auto* gen_ds = app.add_subcommand("gen-dataset", "build the surrogate training dataset");
    gen_ds->add_option("--encoding", encoding, "pca|sdf");
    auto* train_lf = app.add_subcommand("train-lf", "train the gradient surrogate");
    train_lf->add_option("--encoding", encoding, "pca|sdf");
    auto* sim = app.add_subcommand("simulate-ecg", "simulate ECG traces for the test split");
    sim->add_option("--provider", provider, "fem|surrogate|pseudo");
    sim->add_option("--protocol", protocol, "crt|sinus");
    sim->add_option("--encoding", encoding, "pca|sdf (surrogate provider)");
    auto* eval = app.add_subcommand("evaluate", "metrics report and summary table");
    auto* pipe = app.add_subcommand("pipeline", "run every stage in order");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        lfk::RunConfig cfg = config_path.empty() ? lfk::RunConfig{} : lfk::load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.seed = *seed;

        if (gen_geo->parsed()) lfk::stage_gen_geometries(cfg);
        if (gen_mesh->parsed()) lfk::stage_gen_meshes(cfg);
        if (gen_lf->parsed()) lfk::stage_gen_leadfields(cfg);
        if (train_sdf->parsed()) lfk::stage_train_sdf(cfg);
        if (infer->parsed()) lfk::stage_infer_latents(cfg);
        if (gen_ds->parsed()) lfk::stage_gen_dataset(cfg, lfk::encoding_from_name(encoding));
        if (train_lf->parsed()) lfk::stage_train_lf(cfg, lfk::encoding_from_name(encoding));
        if (sim->parsed())
            lfk::stage_simulate_ecg(cfg, lfk::provider_from_name(provider),
                                    lfk::protocol_from_name(protocol),
                                    lfk::encoding_from_name(encoding));
        if (eval->parsed()) lfk::stage_evaluate(cfg, strict);
        if (pipe->parsed()) lfk::run_pipeline(cfg);
    });
}
