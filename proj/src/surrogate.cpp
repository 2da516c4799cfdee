#include "lfk/surrogate.hpp"

#include <algorithm>
#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/rng.hpp"

namespace lfk {

const char* encoding_name(Encoding e) { return e == Encoding::PCA ? "pca" : "sdf"; }

Encoding encoding_from_name(const std::string& name) {
    if (name == "pca") return Encoding::PCA;
    if (name == "sdf") return Encoding::SDF;
    throw InputError("unknown encoding: " + name);
}

std::vector<Vec3> sample_policy_points(const ShapeSet& shapes, const TetMesh& mesh,
                                       const PointLocator& locator, const SamplingPolicy& policy,
                                       std::uint64_t seed) {
    if (policy.n_points < 1) throw InputError("sample_policy_points: n_points must be >= 1");
    Rng rng = Rng::stream(seed, 0xB1A5);

    const int n_near = static_cast<int>(std::lround(policy.near_fraction * policy.n_points));
    const int n_far = policy.n_points - n_near;
    const double band = policy.band_mm;
    const Vec3 tb = shapes.torso_box();

    auto in_mesh = [&](const Vec3& p) { return locator.locate(p).has_value(); };
    auto near_interface = [&](const Vec3& p) {
        return std::abs(signed_distance(shapes, Surface::Torso, p)) <= band ||
               std::abs(signed_distance(shapes, Surface::Epi, p)) <= band;
    };

    std::vector<Vec3> pts;
    pts.reserve(policy.n_points);

    // near points: half anchored on the torso surface (inward offsets), half
    // around the heart-torso interface; offsets stay clear of the band edge
    for (int i = 0; i < n_near; ++i) {
        for (;;) {
            Vec3 p;
            if (i % 2 == 0) {
                const auto& cloud = shapes.surface_clouds[static_cast<int>(Surface::Torso)];
                const Vec3 anchor = cloud[rng.index(cloud.size())];
                const double depth = rng.uniform(0.5, 0.9 * band);
                // inward along the torso implicit gradient direction
                const Vec3 q = shapes.torso.to_local(anchor);
                const Vec3 sa = shapes.torso.semi_axes;
                const Vec3 nrm = normalized({q.x / (sa.x * sa.x), q.y / (sa.y * sa.y),
                                             q.z / (sa.z * sa.z)});
                p = anchor - shapes.torso.rot * nrm * depth;
            } else {
                const auto& cloud = shapes.surface_clouds[static_cast<int>(Surface::Epi)];
                const Vec3 anchor = cloud[rng.index(cloud.size())];
                p = anchor + rng.unit_vector() * rng.uniform(0.0, 0.9 * band);
            }
            if (implicit_value(shapes, Surface::Torso, p) < 0 && in_mesh(p) && near_interface(p)) {
                pts.push_back(p);
                break;
            }
        }
    }

    // far points: uniform in the torso, strictly outside the interface band
    for (int i = 0; i < n_far; ++i) {
        for (;;) {
            const Vec3 p{rng.uniform(-tb.x, tb.x), rng.uniform(-tb.y, tb.y),
                         rng.uniform(-tb.z, tb.z)};
            if (implicit_value(shapes, Surface::Torso, p) >= 0) continue;
            if (near_interface(p)) continue;
            if (!in_mesh(p)) continue;
            pts.push_back(p);
            break;
        }
    }
    return pts;
}

SurrogateDataset build_dataset(
    const std::vector<std::string>& geom_ids, const std::vector<const ShapeSet*>& shapes,
    const std::vector<const TetMesh*>& meshes, const std::vector<const ElectrodeSet*>& electrodes,
    const std::function<const LeadField&(std::size_t, std::size_t)>& leadfield_of,
    const std::vector<std::vector<double>>& codes, Encoding encoding, const SamplingPolicy& policy,
    std::uint64_t seed) {
    const std::size_t G = geom_ids.size();
    if (shapes.size() != G || meshes.size() != G || electrodes.size() != G || codes.size() != G)
        throw InputError("build_dataset: input array sizes disagree");
    if (G == 0) throw InputError("build_dataset: no geometries");

    SurrogateDataset ds;
    ds.encoding = encoding;
    ds.d_code = static_cast<int>(codes[0].size());
    ds.seed = seed;
    ds.policy = policy;
    ds.geom_ids = geom_ids;
    ds.codes = codes;

    double sum_sq = 0.0;
    std::size_t n_comp = 0;

    for (std::size_t g = 0; g < G; ++g) {
        if (static_cast<int>(codes[g].size()) != ds.d_code)
            throw InputError("build_dataset: inconsistent code dimension");
        const PointLocator locator(*meshes[g]);
        const std::vector<Vec3> pts =
            sample_policy_points(*shapes[g], *meshes[g], locator, policy, seed + g);

        ds.torso_box.push_back(shapes[g]->torso_box());
        std::vector<Vec3> pn(pts.size());
        std::vector<std::uint32_t> tet_of(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            pn[i] = shapes[g]->normalize_point(pts[i]);
            const auto loc = locator.locate(pts[i]);
            tet_of[i] = loc->first;  // sample_policy_points guarantees in-mesh
        }
        ds.points_mm.push_back(pts);
        ds.points_norm.push_back(std::move(pn));

        for (std::size_t e = 0; e < electrodes[g]->size(); ++e) {
            SurrogateDataset::Block blk;
            blk.geom = static_cast<std::uint32_t>(g);
            blk.elec = static_cast<std::uint32_t>(e);
            blk.electrode_norm = electrodes[g]->normalized[e];
            const LeadField& lf = leadfield_of(g, e);
            blk.targets_scaled.resize(pts.size());
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const Vec3 t = lf.grad_Z[tet_of[i]];
                blk.targets_scaled[i] = t;
                sum_sq += norm2(t);
                n_comp += 3;
            }
            ds.blocks.push_back(std::move(blk));
        }
    }

    ds.grad_scale = std::sqrt(sum_sq / std::max<std::size_t>(n_comp, 1));
    if (ds.grad_scale <= 0.0) ds.grad_scale = 1.0;
    for (auto& blk : ds.blocks)
        for (Vec3& t : blk.targets_scaled) t = t / ds.grad_scale;
    return ds;
}

nn::Descriptor surrogate_descriptor(const SurrogateConfig& cfg, int d_code) {
    nn::Descriptor d;
    d.tag = "leadfield_gradient_surrogate";
    d.d_main = 3;
    d.k_fourier = cfg.k_fourier;
    d.sigma_fourier = cfg.sigma_fourier;
    d.hidden = cfg.hidden;
    d.d_out = 3;
    d.d_ext0 = d_code;
    d.d_ext1 = 3;  // electrode coordinates
    // latent code and electrode coordinates join the third hidden layer
    d.concat = {{3, nn::AuxSource::External0}, {3, nn::AuxSource::External1}};
    return d;
}

SurrogateTrainResult train_surrogate(const SurrogateDataset& ds, const SurrogateConfig& cfg) {
    if (ds.blocks.empty()) throw InputError("train_surrogate: empty dataset");

    SurrogateTrainResult res;
    res.grad_scale = ds.grad_scale;
    res.net = nn::init_network(surrogate_descriptor(cfg, ds.d_code), cfg.seed);

    std::vector<std::size_t> sizes;
    std::vector<double*> params = nn::param_slices(res.net, sizes);
    nn::AdamState opt;
    opt.lr = cfg.lr;
    opt.init(sizes);

    Rng rng = Rng::stream(cfg.seed, 0x7A41);
    nn::Workspace ws;
    nn::Grads grads;

    int last_finite_epoch = -1;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        opt.lr = (epoch <= cfg.epochs / 2) ? cfg.lr : cfg.lr * 0.5;
        res.lr_history.push_back(opt.lr);

        double epoch_loss = 0.0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const auto& blk = ds.blocks[rng.index(ds.blocks.size())];
            const auto& pts = ds.points_norm[blk.geom];
            const std::size_t B = std::min<std::size_t>(cfg.batch, pts.size());

            nn::Batch batch;
            batch.main = nn::Matrix(B, 3);
            batch.ext0 = nn::Matrix(B, ds.d_code);
            batch.ext1 = nn::Matrix(B, 3);
            std::vector<std::size_t> idx(B);
            for (std::size_t r = 0; r < B; ++r) {
                idx[r] = rng.index(pts.size());
                const Vec3 p = pts[idx[r]];
                batch.main.at(r, 0) = p.x;
                batch.main.at(r, 1) = p.y;
                batch.main.at(r, 2) = p.z;
                const auto& code = ds.codes[blk.geom];
                std::copy(code.begin(), code.end(), batch.ext0.row(r));
                batch.ext1.at(r, 0) = blk.electrode_norm.x;
                batch.ext1.at(r, 1) = blk.electrode_norm.y;
                batch.ext1.at(r, 2) = blk.electrode_norm.z;
            }

            nn::forward(res.net, batch, ws);
            nn::Matrix dOut(B, 3);
            double loss = 0.0;
            for (std::size_t r = 0; r < B; ++r) {
                const Vec3 pred{ws.out.at(r, 0), ws.out.at(r, 1), ws.out.at(r, 2)};
                const Vec3 target = blk.targets_scaled[idx[r]];
                Vec3 dpred;
                loss += nn::loss_mse_cos(pred, target, cfg.lambda_cos, cfg.eps, &dpred) / B;
                dOut.at(r, 0) = dpred.x / B;
                dOut.at(r, 1) = dpred.y / B;
                dOut.at(r, 2) = dpred.z / B;
            }
            if (!std::isfinite(loss))
                throw TrainingError("train_surrogate: loss diverged at epoch " +
                                        std::to_string(epoch),
                                    last_finite_epoch);

            grads.init_like(res.net, B, false);
            grads.zero();
            nn::backward(res.net, batch, ws, dOut, grads, false);
            nn::adam_step(opt, params, nn::grad_slices(grads), sizes);
            epoch_loss += loss;
        }
        res.loss_history.push_back(epoch_loss / cfg.steps_per_epoch);
        last_finite_epoch = epoch;
    }
    return res;
}

std::vector<Vec3> predict_grad(const nn::Network& net, double grad_scale,
                               const std::vector<Vec3>& x_norm, const Vec3& electrode_norm,
                               const std::vector<double>& code) {
    if (static_cast<int>(code.size()) != net.desc.d_ext0)
        throw InputError("predict_grad: code dimension mismatch");

    std::vector<Vec3> out(x_norm.size());
    const std::size_t chunk = 8192;
    nn::Workspace ws;
    for (std::size_t start = 0; start < x_norm.size(); start += chunk) {
        const std::size_t end = std::min(x_norm.size(), start + chunk);
        const std::size_t B = end - start;
        nn::Batch batch;
        batch.main = nn::Matrix(B, 3);
        batch.ext0 = nn::Matrix(B, code.size());
        batch.ext1 = nn::Matrix(B, 3);
        for (std::size_t r = 0; r < B; ++r) {
            const Vec3 p = x_norm[start + r];
            batch.main.at(r, 0) = p.x;
            batch.main.at(r, 1) = p.y;
            batch.main.at(r, 2) = p.z;
            std::copy(code.begin(), code.end(), batch.ext0.row(r));
            batch.ext1.at(r, 0) = electrode_norm.x;
            batch.ext1.at(r, 1) = electrode_norm.y;
            batch.ext1.at(r, 2) = electrode_norm.z;
        }
        nn::forward(net, batch, ws);
        for (std::size_t r = 0; r < B; ++r)
            out[start + r] = Vec3{ws.out.at(r, 0), ws.out.at(r, 1), ws.out.at(r, 2)} * grad_scale;
    }
    return out;
}

GradientField surrogate_gradient_field(const nn::Network& net, double grad_scale,
                                       const TetMesh& mesh, const ShapeSet& shapes,
                                       const ElectrodeSet& electrodes,
                                       const std::vector<double>& code) {
    GradientField f;
    f.provider = GradientProvider::Surrogate;
    f.heart_elems = mesh.heart_elements();
    f.electrode_labels = electrodes.labels;

    std::vector<Vec3> xn(f.heart_elems.size());
    for (std::size_t e = 0; e < f.heart_elems.size(); ++e)
        xn[e] = shapes.normalize_point(mesh.centroid(f.heart_elems[e]));

    f.grad.reserve(electrodes.size());
    for (std::size_t j = 0; j < electrodes.size(); ++j)
        f.grad.push_back(predict_grad(net, grad_scale, xn, electrodes.normalized[j], code));
    return f;
}

}  // namespace lfk
