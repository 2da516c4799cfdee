#include "lfk/nn.hpp"

#include <algorithm>
#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/parallel.hpp"
#include "lfk/rng.hpp"

namespace lfk::nn {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

void matmul_nt(const Matrix& A, const Matrix& Bm, Matrix& C) {
    if (A.cols != Bm.cols) throw InputError("matmul_nt: shape mismatch");
    C = Matrix(A.rows, Bm.rows);
    parallel_for(static_cast<std::int64_t>(A.rows), [&](std::int64_t r) {
        const double* ar = A.row(r);
        double* cr = C.row(r);
        for (std::size_t n = 0; n < Bm.rows; ++n) {
            const double* br = Bm.row(n);
            double s = 0.0;
            for (std::size_t m = 0; m < A.cols; ++m) s += ar[m] * br[m];
            cr[n] = s;
        }
    });
}

void matmul_nt_serial(const Matrix& A, const Matrix& Bm, Matrix& C) {
    if (A.cols != Bm.cols) throw InputError("matmul_nt_serial: shape mismatch");
    C = Matrix(A.rows, Bm.rows);
    for (std::size_t r = 0; r < A.rows; ++r) {
        const double* ar = A.row(r);
        double* cr = C.row(r);
        for (std::size_t n = 0; n < Bm.rows; ++n) {
            const double* br = Bm.row(n);
            double s = 0.0;
            for (std::size_t m = 0; m < A.cols; ++m) s += ar[m] * br[m];
            cr[n] = s;
        }
    }
}

void matmul_nn(const Matrix& A, const Matrix& Bm, Matrix& C) {
    if (A.cols != Bm.rows) throw InputError("matmul_nn: shape mismatch");
    C = Matrix(A.rows, Bm.cols);
    parallel_for(static_cast<std::int64_t>(A.rows), [&](std::int64_t r) {
        const double* ar = A.row(r);
        double* cr = C.row(r);
        for (std::size_t n = 0; n < A.cols; ++n) {
            const double an = ar[n];
            if (an == 0.0) continue;
            const double* br = Bm.row(n);
            for (std::size_t m = 0; m < Bm.cols; ++m) cr[m] += an * br[m];
        }
    });
}

void matmul_tn(const Matrix& A, const Matrix& Bm, Matrix& C) {
    if (A.rows != Bm.rows) throw InputError("matmul_tn: shape mismatch");
    C = Matrix(A.cols, Bm.cols);
    parallel_for(static_cast<std::int64_t>(A.cols), [&](std::int64_t n) {
        double* cr = C.row(n);
        for (std::size_t r = 0; r < A.rows; ++r) {
            const double an = A.at(r, n);
            if (an == 0.0) continue;
            const double* br = Bm.row(r);
            for (std::size_t m = 0; m < Bm.cols; ++m) cr[m] += an * br[m];
        }
    });
}

int Descriptor::layer_input_dim(int l) const {
    int dim = (l == 0) ? encoded_main_dim() : hidden[l - 1];
    for (const ConcatSpec& c : concat)
        if (c.layer == l + 1) dim += aux_dim(c.source);
    return dim;
}

std::size_t Network::num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].a.size() + b[l].size();
    return n;
}

Network init_network(const Descriptor& desc, std::uint64_t seed) {
    Network net;
    net.desc = desc;
    Rng rng = Rng::stream(seed, 0x11E7);

    if (desc.k_fourier > 0) {
        net.B_ff = Matrix(desc.k_fourier, desc.d_main);
        for (double& v : net.B_ff.a) v = desc.sigma_fourier * rng.normal();
    }

    const int L = desc.num_layers();
    net.W.resize(L);
    net.b.resize(L);
    for (int l = 0; l < L; ++l) {
        const int in = desc.layer_input_dim(l);
        const int out = desc.layer_output_dim(l);
        net.W[l] = Matrix(out, in);
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : net.W[l].a) v = rng.uniform(-s, s);
        net.b[l].assign(out, 0.0);
    }
    return net;
}

std::vector<double> fourier_features(const std::vector<double>& x, const Matrix& B_ff) {
    if (x.size() != B_ff.cols) throw InputError("fourier_features: dimension mismatch");
    std::vector<double> out(2 * B_ff.rows);
    for (std::size_t k = 0; k < B_ff.rows; ++k) {
        double arg = 0.0;
        const double* br = B_ff.row(k);
        for (std::size_t d = 0; d < x.size(); ++d) arg += br[d] * x[d];
        arg *= kTwoPi;
        out[k] = std::sin(arg);
        out[B_ff.rows + k] = std::cos(arg);
    }
    return out;
}

namespace {

void encode_main(const Network& net, const Matrix& main, Matrix& enc) {
    if (net.desc.k_fourier <= 0) {
        enc = main;
        return;
    }
    const std::size_t k = net.B_ff.rows;
    enc = Matrix(main.rows, 2 * k);
    parallel_for(static_cast<std::int64_t>(main.rows), [&](std::int64_t r) {
        const double* x = main.row(r);
        double* e = enc.row(r);
        for (std::size_t f = 0; f < k; ++f) {
            double arg = 0.0;
            const double* br = net.B_ff.row(f);
            for (std::size_t d = 0; d < main.cols; ++d) arg += br[d] * x[d];
            arg *= kTwoPi;
            e[f] = std::sin(arg);
            e[k + f] = std::cos(arg);
        }
    });
}

const Matrix& aux_matrix(const Batch& batch, const Workspace& ws, AuxSource s) {
    switch (s) {
        case AuxSource::External0: return batch.ext0;
        case AuxSource::External1: return batch.ext1;
        default: return ws.enc;
    }
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, a.cols + b.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        std::copy(a.row(r), a.row(r) + a.cols, c.row(r));
        std::copy(b.row(r), b.row(r) + b.cols, c.row(r) + a.cols);
    }
    return c;
}

}  // namespace

void forward(const Network& net, const Batch& batch, Workspace& ws) {
    const Descriptor& d = net.desc;
    if (batch.main.cols != static_cast<std::size_t>(d.d_main))
        throw InputError("forward: main input width mismatch");
    if (d.d_ext0 > 0 && batch.ext0.cols != static_cast<std::size_t>(d.d_ext0))
        throw InputError("forward: ext0 width mismatch");
    if (d.d_ext1 > 0 && batch.ext1.cols != static_cast<std::size_t>(d.d_ext1))
        throw InputError("forward: ext1 width mismatch");

    encode_main(net, batch.main, ws.enc);

    const int L = d.num_layers();
    ws.layer_in.assign(L, Matrix());
    ws.pre.assign(L, Matrix());

    Matrix cur = ws.enc;
    for (int l = 0; l < L; ++l) {
        for (const ConcatSpec& c : d.concat)
            if (c.layer == l + 1) cur = concat_cols(cur, aux_matrix(batch, ws, c.source));
        ws.layer_in[l] = cur;

        Matrix pre;
        matmul_nt(cur, net.W[l], pre);
        parallel_for(static_cast<std::int64_t>(pre.rows), [&](std::int64_t r) {
            double* pr = pre.row(r);
            for (std::size_t cidx = 0; cidx < pre.cols; ++cidx) pr[cidx] += net.b[l][cidx];
        });
        ws.pre[l] = pre;

        if (l < L - 1) {
            cur = pre;
            for (double& v : cur.a) v = v > 0.0 ? v : 0.0;
        } else {
            cur = pre;
        }
    }
    ws.out = cur;
}

void Grads::init_like(const Network& net, std::size_t batch_size, bool want_ext0) {
    dW.resize(net.W.size());
    db.resize(net.b.size());
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        dW[l] = Matrix(net.W[l].rows, net.W[l].cols);
        db[l].assign(net.b[l].size(), 0.0);
    }
    if (want_ext0) dExt0 = Matrix(batch_size, net.desc.d_ext0);
}

void Grads::zero() {
    for (Matrix& m : dW) m.zero();
    for (auto& v : db) std::fill(v.begin(), v.end(), 0.0);
    dExt0.zero();
}

void backward(const Network& net, const Batch& batch, const Workspace& ws, const Matrix& dOut,
              Grads& grads, bool want_ext0) {
    if (ws.out.empty()) throw InputError("backward: no recorded forward pass");
    const Descriptor& d = net.desc;
    const int L = d.num_layers();
    if (grads.dW.empty()) grads.init_like(net, batch.main.rows, want_ext0);
    if (want_ext0 && grads.dExt0.empty()) grads.dExt0 = Matrix(batch.main.rows, d.d_ext0);

    Matrix dPre = dOut;  // output layer is linear
    for (int l = L - 1; l >= 0; --l) {
        // parameter gradients (accumulate)
        Matrix dWl;
        matmul_tn(dPre, ws.layer_in[l], dWl);
        for (std::size_t i = 0; i < dWl.a.size(); ++i) grads.dW[l].a[i] += dWl.a[i];
        for (std::size_t r = 0; r < dPre.rows; ++r) {
            const double* pr = dPre.row(r);
            for (std::size_t c = 0; c < dPre.cols; ++c) grads.db[l][c] += pr[c];
        }

        if (l == 0 && !want_ext0) break;

        Matrix dIn;
        matmul_nn(dPre, net.W[l], dIn);

        // split off concatenated aux gradients (reverse order of concat)
        std::vector<const ConcatSpec*> here;
        for (const ConcatSpec& c : d.concat)
            if (c.layer == l + 1) here.push_back(&c);
        std::size_t width = dIn.cols;
        for (auto it = here.rbegin(); it != here.rend(); ++it) {
            const int adim = d.aux_dim((*it)->source);
            width -= adim;
            if ((*it)->source == AuxSource::External0 && want_ext0) {
                for (std::size_t r = 0; r < dIn.rows; ++r) {
                    const double* src = dIn.row(r) + width;
                    double* dst = grads.dExt0.row(r);
                    for (int k = 0; k < adim; ++k) dst[k] += src[k];
                }
            }
        }

        if (l == 0) break;

        // through ReLU of the previous layer
        Matrix dPrev(dIn.rows, width);
        const Matrix& pre_prev = ws.pre[l - 1];
        for (std::size_t r = 0; r < dPrev.rows; ++r) {
            const double* src = dIn.row(r);
            const double* pp = pre_prev.row(r);
            double* dst = dPrev.row(r);
            for (std::size_t c = 0; c < width; ++c) dst[c] = pp[c] > 0.0 ? src[c] : 0.0;
        }
        dPre = std::move(dPrev);
    }
}

void AdamState::init(const std::vector<std::size_t>& sizes) {
    step = 0;
    m.clear();
    v.clear();
    for (std::size_t s : sizes) {
        m.emplace_back(s, 0.0);
        v.emplace_back(s, 0.0);
    }
}

void adam_step(AdamState& st, const std::vector<double*>& params,
               const std::vector<const double*>& grads, const std::vector<std::size_t>& sizes) {
    if (params.size() != grads.size() || params.size() != sizes.size() ||
        params.size() != st.m.size())
        throw InputError("adam_step: slice count mismatch");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t s = 0; s < params.size(); ++s) {
        if (st.m[s].size() != sizes[s]) throw InputError("adam_step: moment shape mismatch");
        double* p = params[s];
        const double* g = grads[s];
        double* ms = st.m[s].data();
        double* vs = st.v[s].data();
        for (std::size_t i = 0; i < sizes[s]; ++i) {
            ms[i] = st.beta1 * ms[i] + (1.0 - st.beta1) * g[i];
            vs[i] = st.beta2 * vs[i] + (1.0 - st.beta2) * g[i] * g[i];
            const double mhat = ms[i] / bc1;
            const double vhat = vs[i] / bc2;
            p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

std::vector<double*> param_slices(Network& net, std::vector<std::size_t>& sizes) {
    std::vector<double*> out;
    sizes.clear();
    for (std::size_t l = 0; l < net.W.size(); ++l) {
        out.push_back(net.W[l].a.data());
        sizes.push_back(net.W[l].a.size());
        out.push_back(net.b[l].data());
        sizes.push_back(net.b[l].size());
    }
    return out;
}

std::vector<const double*> grad_slices(const Grads& g) {
    std::vector<const double*> out;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        out.push_back(g.dW[l].a.data());
        out.push_back(g.db[l].data());
    }
    return out;
}

double loss_mse_cos(const Vec3& pred, const Vec3& target, double lambda_cos, double eps,
                    Vec3* dpred) {
    const Vec3 diff = pred - target;
    const double mse = norm2(diff);

    const double np = norm(pred), nt = norm(target);
    const double denom = np * nt + eps;
    const double c = dot(pred, target);
    const double cos_term = 1.0 - c / denom;

    if (dpred) {
        Vec3 dcos{0, 0, 0};
        // d/dp [c/denom] = t/denom - c * nt * p/np / denom^2
        if (np > 1e-300) {
            dcos = target / denom - pred * (c * nt / (np * denom * denom));
        } else {
            dcos = target / denom;
        }
        *dpred = diff * 2.0 - dcos * lambda_cos;
    }
    return mse + lambda_cos * cos_term;
}

double loss_sdf(const double* pred, const double* target, int dim, double* dpred) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
        if (dpred) dpred[i] = 2.0 * d;
    }
    return s;
}

double latent_prior(const double* z, int dim, double lambda, double* dz) {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
        s += z[i] * z[i];
        if (dz) dz[i] = 2.0 * lambda * z[i];
    }
    return lambda * s;
}

double lipschitz_penalty(const Network& net, double lambda, Grads* grads) {
    const std::size_t L = net.W.size();
    std::vector<double> fro(L), sp(L);
    auto softplus = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

    double prod = 1.0;
    for (std::size_t l = 0; l < L; ++l) {
        double s2 = 0.0;
        for (double v : net.W[l].a) s2 += v * v;
        fro[l] = std::sqrt(s2);
        sp[l] = softplus(fro[l]);
        prod *= sp[l];
    }

    if (grads) {
        for (std::size_t l = 0; l < L; ++l) {
            if (fro[l] < 1e-12) continue;
            const double others = prod / sp[l];
            const double coef = lambda * others * sigmoid(fro[l]) / fro[l];
            for (std::size_t i = 0; i < net.W[l].a.size(); ++i)
                grads->dW[l].a[i] += coef * net.W[l].a[i];
        }
    }
    return lambda * prod;
}

}  // namespace lfk::nn
