#include "lfk/sdf_autodecoder.hpp"

#include <algorithm>
#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/rng.hpp"

namespace lfk {

namespace {

/// Dense symmetric positive definite inverse via Cholesky.
std::vector<std::vector<double>> spd_inverse(std::vector<std::vector<double>> A) {
    const int n = static_cast<int>(A.size());
    // Cholesky A = L L^T, in place (lower)
    for (int j = 0; j < n; ++j) {
        double d = A[j][j];
        for (int k = 0; k < j; ++k) d -= A[j][k] * A[j][k];
        if (d <= 0.0) throw InputError("spd_inverse: matrix not positive definite");
        A[j][j] = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = A[i][j];
            for (int k = 0; k < j; ++k) s -= A[i][k] * A[j][k];
            A[i][j] = s / A[j][j];
        }
    }
    // solve L L^T X = I column by column
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    std::vector<double> y(n);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = (i == c) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) s -= A[i][k] * y[k];
            y[i] = s / A[i][i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double s = y[i];
            for (int k = i + 1; k < n; ++k) s -= A[k][i] * inv[k][c];
            inv[i][c] = s / A[i][i];
        }
    }
    return inv;
}

}  // namespace

LatentStats latent_stats(const std::vector<LatentCode>& codes, double ridge_rel) {
    if (codes.empty()) throw InputError("latent_stats: no codes");
    const int d = static_cast<int>(codes[0].z.size());
    const double n = static_cast<double>(codes.size());

    LatentStats st;
    st.mu.assign(d, 0.0);
    for (const LatentCode& c : codes)
        for (int i = 0; i < d; ++i) st.mu[i] += c.z[i] / n;

    st.sigma.assign(d, std::vector<double>(d, 0.0));
    for (const LatentCode& c : codes)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                st.sigma[i][j] += (c.z[i] - st.mu[i]) * (c.z[j] - st.mu[j]) / n;

    double trace = 0.0;
    for (int i = 0; i < d; ++i) trace += st.sigma[i][i];
    st.ridge = ridge_rel * std::max(trace / d, 1e-12);
    auto reg = st.sigma;
    for (int i = 0; i < d; ++i) reg[i][i] += st.ridge;
    st.sigma_inv = spd_inverse(std::move(reg));
    return st;
}

double mahalanobis2(const LatentStats& stats, const std::vector<double>& z) {
    const int d = static_cast<int>(stats.mu.size());
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
        double row = 0.0;
        for (int j = 0; j < d; ++j) row += stats.sigma_inv[i][j] * (z[j] - stats.mu[j]);
        s += (z[i] - stats.mu[i]) * row;
    }
    return s;
}

nn::Descriptor sdf_descriptor(const SdfConfig& cfg) {
    nn::Descriptor d;
    d.tag = "sdf_autodecoder";
    d.d_main = 3;
    d.k_fourier = cfg.k_fourier;
    d.sigma_fourier = cfg.sigma_fourier;
    d.hidden = cfg.hidden;
    d.d_out = 4;
    d.d_ext0 = cfg.d_z;
    // latent code joins the first layer; encoded coordinates re-enter after
    // the third hidden layer (skip connection)
    d.concat = {{1, nn::AuxSource::External0}, {4, nn::AuxSource::EncodedMain}};
    return d;
}

namespace {

nn::Batch make_sdf_batch(const SdfConfig& cfg, const std::vector<Vec3>& pts,
                         const std::vector<std::size_t>& idx, const std::vector<double>& z) {
    nn::Batch batch;
    const std::size_t B = idx.size();
    batch.main = nn::Matrix(B, 3);
    batch.ext0 = nn::Matrix(B, z.size());
    for (std::size_t r = 0; r < B; ++r) {
        const Vec3 p = pts[idx[r]];
        batch.main.at(r, 0) = p.x / cfg.box_half.x;
        batch.main.at(r, 1) = p.y / cfg.box_half.y;
        batch.main.at(r, 2) = p.z / cfg.box_half.z;
        std::copy(z.begin(), z.end(), batch.ext0.row(r));
    }
    return batch;
}

}  // namespace

SdfTrainResult train_autodecoder(const std::vector<SdfGeometrySamples>& dataset,
                                 const SdfConfig& cfg) {
    if (dataset.size() < 2) throw InputError("train_autodecoder: need at least 2 geometries");
    for (const auto& g : dataset)
        if (g.points.size() < 1000)
            throw InputError("train_autodecoder: need >= 1000 samples per geometry");

    SdfTrainResult res;
    res.decoder = nn::init_network(sdf_descriptor(cfg), cfg.seed);

    Rng rng = Rng::stream(cfg.seed, 0x5DF7);
    const std::size_t P = dataset.size();
    res.codes.resize(P);
    for (std::size_t p = 0; p < P; ++p) {
        res.codes[p].geometry_id = dataset[p].geometry_id;
        res.codes[p].origin = LatentCode::Origin::Trained;
        res.codes[p].z.resize(cfg.d_z);
        for (double& v : res.codes[p].z) v = 0.01 * rng.normal();
    }

    std::vector<std::size_t> sizes;
    std::vector<double*> params = nn::param_slices(res.decoder, sizes);
    nn::AdamState opt;
    opt.lr = cfg.lr;
    opt.init(sizes);

    std::vector<nn::AdamState> code_opt(P);
    for (auto& co : code_opt) {
        co.lr = cfg.lr;
        co.init({static_cast<std::size_t>(cfg.d_z)});
    }

    nn::Grads grads;
    nn::Workspace ws;
    std::vector<std::size_t> idx(cfg.batch);

    int last_finite_epoch = -1;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int epoch_steps = 0;
        for (std::size_t p = 0; p < P; ++p) {
            const auto& geo = dataset[p];
            auto& z = res.codes[p].z;
            for (int kb = 0; kb < cfg.batches_per_geometry; ++kb) {
                const std::size_t B = std::min<std::size_t>(cfg.batch, geo.points.size());
                idx.resize(B);
                if (B == geo.points.size()) {
                    for (std::size_t i = 0; i < B; ++i) idx[i] = i;
                } else {
                    for (std::size_t i = 0; i < B; ++i) idx[i] = rng.index(geo.points.size());
                }

                nn::Batch batch = make_sdf_batch(cfg, geo.points, idx, z);
                nn::forward(res.decoder, batch, ws);

                nn::Matrix dOut(B, 4);
                double loss = 0.0;
                for (std::size_t r = 0; r < B; ++r) {
                    double target[4];
                    for (int k = 0; k < 4; ++k) target[k] = geo.sdf[idx[r]][k] / cfg.sdf_scale_mm;
                    double dpred[4];
                    loss += nn::loss_sdf(ws.out.row(r), target, 4, dpred) / B;
                    for (int k = 0; k < 4; ++k) dOut.at(r, k) = dpred[k] / B;
                }

                grads.init_like(res.decoder, B, true);
                grads.zero();
                nn::backward(res.decoder, batch, ws, dOut, grads, true);
                loss += nn::lipschitz_penalty(res.decoder, cfg.lambda_lip, &grads);

                std::vector<double> dz(cfg.d_z, 0.0);
                for (std::size_t r = 0; r < B; ++r)
                    for (int k = 0; k < cfg.d_z; ++k) dz[k] += grads.dExt0.at(r, k);
                std::vector<double> dprior(cfg.d_z);
                loss += nn::latent_prior(z.data(), cfg.d_z, cfg.lambda_prior, dprior.data());
                for (int k = 0; k < cfg.d_z; ++k) dz[k] += dprior[k];

                if (!std::isfinite(loss))
                    throw TrainingError("train_autodecoder: loss diverged at epoch " +
                                            std::to_string(epoch),
                                        last_finite_epoch);

                nn::adam_step(opt, params, nn::grad_slices(grads), sizes);
                nn::adam_step(code_opt[p], {z.data()}, {dz.data()},
                              {static_cast<std::size_t>(cfg.d_z)});

                epoch_loss += loss;
                epoch_steps += 1;
            }
        }
        res.loss_history.push_back(epoch_loss / std::max(epoch_steps, 1));
        last_finite_epoch = epoch;
    }
    return res;
}

InferResult infer_latent(const nn::Network& decoder, const SdfConfig& cfg,
                         const LatentStats& stats, const std::vector<Vec3>& obs_points,
                         const std::vector<std::array<double, 4>>& obs_sdf,
                         const InferConfig& icfg) {
    if (obs_points.empty()) throw InputError("infer_latent: need at least one observation");

    InferResult out;
    out.code.origin = LatentCode::Origin::Inferred;
    std::vector<double>& z = out.code.z;
    z = stats.mu;

    const int d = cfg.d_z;
    nn::AdamState opt;
    opt.lr = icfg.lr;
    opt.init({static_cast<std::size_t>(d)});

    std::vector<std::size_t> idx(obs_points.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    nn::Workspace ws;
    nn::Grads grads;
    const std::size_t B = obs_points.size();

    for (int it = 0; it < icfg.iterations; ++it) {
        nn::Batch batch = make_sdf_batch(cfg, obs_points, idx, z);
        nn::forward(decoder, batch, ws);

        nn::Matrix dOut(B, 4);
        double loss = 0.0;
        for (std::size_t r = 0; r < B; ++r) {
            double target[4];
            for (int k = 0; k < 4; ++k) target[k] = obs_sdf[r][k] / cfg.sdf_scale_mm;
            double dpred[4];
            loss += nn::loss_sdf(ws.out.row(r), target, 4, dpred) / B;
            for (int k = 0; k < 4; ++k) dOut.at(r, k) = dpred[k] / B;
        }

        grads.init_like(decoder, B, true);
        grads.zero();
        nn::backward(decoder, batch, ws, dOut, grads, true);

        std::vector<double> dz(d, 0.0);
        for (std::size_t r = 0; r < B; ++r)
            for (int k = 0; k < d; ++k) dz[k] += grads.dExt0.at(r, k);

        // Mahalanobis prior: lambda * (z-mu)^T Sigma^-1 (z-mu)
        double maha = 0.0;
        for (int i = 0; i < d; ++i) {
            double row = 0.0;
            for (int j = 0; j < d; ++j) row += stats.sigma_inv[i][j] * (z[j] - stats.mu[j]);
            maha += (z[i] - stats.mu[i]) * row;
            dz[i] += 2.0 * icfg.lambda_maha * row;
        }
        loss += icfg.lambda_maha * maha;
        out.objective_trace.push_back(loss);

        nn::adam_step(opt, {z.data()}, {dz.data()}, {static_cast<std::size_t>(d)});
    }
    return out;
}

Vec3 SdfVolumes::grid_point(int ix, int iy, int iz) const {
    const double fx = n > 1 ? static_cast<double>(ix) / (n - 1) : 0.5;
    const double fy = n > 1 ? static_cast<double>(iy) / (n - 1) : 0.5;
    const double fz = n > 1 ? static_cast<double>(iz) / (n - 1) : 0.5;
    return {lo.x + fx * (hi.x - lo.x), lo.y + fy * (hi.y - lo.y), lo.z + fz * (hi.z - lo.z)};
}

double SdfVolumes::spacing() const {
    if (n <= 1) return 0.0;
    return std::max({(hi.x - lo.x), (hi.y - lo.y), (hi.z - lo.z)}) / (n - 1);
}

std::vector<std::array<double, 4>> decode_sdf(const nn::Network& decoder, const SdfConfig& cfg,
                                              const std::vector<double>& z,
                                              const std::vector<Vec3>& points) {
    std::vector<std::array<double, 4>> out(points.size());
    const std::size_t chunk = 8192;
    nn::Workspace ws;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < points.size(); start += chunk) {
        const std::size_t end = std::min(points.size(), start + chunk);
        idx.resize(end - start);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
        nn::Batch batch = make_sdf_batch(cfg, points, idx, z);
        nn::forward(decoder, batch, ws);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (int k = 0; k < 4; ++k) out[start + r][k] = ws.out.at(r, k) * cfg.sdf_scale_mm;
    }
    return out;
}

SdfVolumes reconstruct_grid(const nn::Network& decoder, const SdfConfig& cfg,
                            const std::vector<double>& z, const Vec3& center, const Vec3& half,
                            int n) {
    SdfVolumes vol;
    vol.n = n;
    vol.lo = center - half;
    vol.hi = center + half;
    for (auto& v : vol.values) v.resize(static_cast<std::size_t>(n) * n * n);

    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(n) * n * n);
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) pts.push_back(vol.grid_point(ix, iy, iz));

    const auto sdf = decode_sdf(decoder, cfg, z, pts);
    for (std::size_t i = 0; i < sdf.size(); ++i)
        for (int k = 0; k < 4; ++k) vol.values[k][i] = sdf[i][k];
    return vol;
}

}  // namespace lfk
