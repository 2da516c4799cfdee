#include <doctest.h>

#include <cmath>

#include "lfk/errors.hpp"
#include "lfk/nn.hpp"
#include "lfk/rng.hpp"

using namespace lfk;
using namespace lfk::nn;

namespace {

Batch random_batch(const Descriptor& d, std::size_t B, Rng& rng) {
    Batch batch;
    batch.main = Matrix(B, d.d_main);
    for (double& v : batch.main.a) v = rng.uniform(-1, 1);
    if (d.d_ext0 > 0) {
        batch.ext0 = Matrix(B, d.d_ext0);
        for (double& v : batch.ext0.a) v = rng.uniform(-1, 1);
    }
    if (d.d_ext1 > 0) {
        batch.ext1 = Matrix(B, d.d_ext1);
        for (double& v : batch.ext1.a) v = rng.uniform(-1, 1);
    }
    return batch;
}

/// Total loss over a batch for finite-difference checks: sum of per-row
/// losses with fixed targets. loss_kind 0 = mse+cos, 1 = sdf.
double batch_loss(const Network& net, const Batch& batch, const Matrix& targets, int loss_kind,
                  double lambda_cos, Matrix* dOut = nullptr) {
    Workspace ws;
    forward(net, batch, ws);
    double total = 0.0;
    if (dOut) *dOut = Matrix(ws.out.rows, ws.out.cols);
    for (std::size_t r = 0; r < ws.out.rows; ++r) {
        if (loss_kind == 0) {
            const Vec3 pred{ws.out.at(r, 0), ws.out.at(r, 1), ws.out.at(r, 2)};
            const Vec3 tgt{targets.at(r, 0), targets.at(r, 1), targets.at(r, 2)};
            Vec3 dp;
            total += loss_mse_cos(pred, tgt, lambda_cos, 1e-8, &dp);
            if (dOut) {
                dOut->at(r, 0) = dp.x;
                dOut->at(r, 1) = dp.y;
                dOut->at(r, 2) = dp.z;
            }
        } else {
            std::vector<double> dp(ws.out.cols);
            total += loss_sdf(ws.out.row(r), targets.row(r), static_cast<int>(ws.out.cols),
                              dp.data());
            if (dOut)
                for (std::size_t c = 0; c < ws.out.cols; ++c) dOut->at(r, c) = dp[c];
        }
    }
    return total;
}

/// Smallest |preactivation| in the forward pass; FD checks need to stay away
/// from the ReLU kink.
double min_abs_preact(const Network& net, const Batch& batch) {
    Workspace ws;
    forward(net, batch, ws);
    double m = 1e300;
    for (std::size_t l = 0; l + 1 < ws.pre.size(); ++l)
        for (double v : ws.pre[l].a) m = std::min(m, std::abs(v));
    return m;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("fourier features") {
    Matrix B(1, 3);
    B.at(0, 0) = 1.0;
    const auto f = fourier_features({0.25, 0.0, 0.0}, B);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == doctest::Approx(1.0));         // sin(pi/2)
    CHECK(f[1] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));  // cos(pi/2)

    const auto z = fourier_features({0.0, 0.0, 0.0}, B);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 1.0);

    Matrix B2(8, 3);
    Rng rng(3);
    for (double& v : B2.a) v = rng.normal();
    const auto g = fourier_features({0.3, -0.7, 0.2}, B2);
    for (double v : g) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
    CHECK_THROWS_AS(fourier_features({1.0}, B2), InputError);
}

TEST_CASE("forward: zero weights give the output bias; linear head scales") {
    Descriptor d;
    d.d_main = 3;
    d.hidden = {4};
    d.d_out = 2;
    Network net = init_network(d, 1);
    for (auto& W : net.W) W.zero();
    net.b[1] = {0.5, -1.5};

    Batch batch;
    batch.main = Matrix(2, 3);
    batch.main.at(0, 0) = 1.0;
    Workspace ws;
    forward(net, batch, ws);
    CHECK(ws.out.at(0, 0) == 0.5);
    CHECK(ws.out.at(0, 1) == -1.5);
    CHECK(ws.out.at(1, 0) == 0.5);

    // doubling the final W doubles the output at zero bias
    Rng rng(5);
    Network net2 = init_network(d, 2);
    net2.b[1] = {0.0, 0.0};
    Batch b2 = random_batch(d, 3, rng);
    Workspace w1, w2;
    forward(net2, b2, w1);
    for (double& v : net2.W[1].a) v *= 2.0;
    forward(net2, b2, w2);
    for (std::size_t i = 0; i < w1.out.a.size(); ++i)
        CHECK(w2.out.a[i] == doctest::Approx(2.0 * w1.out.a[i]));
}

TEST_CASE("one-hidden-unit network matches the hand computation") {
    Descriptor d;
    d.d_main = 2;
    d.hidden = {1};
    d.d_out = 1;
    Network net = init_network(d, 1);
    net.W[0].at(0, 0) = 0.5;
    net.W[0].at(0, 1) = -1.0;
    net.b[0] = {0.25};
    net.W[1].at(0, 0) = 2.0;
    net.b[1] = {-0.1};

    Batch batch;
    batch.main = Matrix(1, 2);
    batch.main.at(0, 0) = 1.0;
    batch.main.at(0, 1) = 0.5;
    Workspace ws;
    forward(net, batch, ws);
    // pre = 0.5*1 - 1*0.5 + 0.25 = 0.25; relu -> 0.25; out = 2*0.25 - 0.1 = 0.4
    CHECK(ws.out.at(0, 0) == doctest::Approx(0.4).epsilon(1e-15));

    // negative preactivation clamps to the bias-only output
    batch.main.at(0, 0) = -2.0;
    forward(net, batch, ws);
    CHECK(ws.out.at(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("hand gradient: d/dw (w*x)^2 at w=1, x=2 is 8") {
    Descriptor d;
    d.d_main = 1;
    d.hidden = {};
    d.d_out = 1;
    Network net = init_network(d, 1);
    net.W[0].at(0, 0) = 1.0;
    net.b[0] = {0.0};

    Batch batch;
    batch.main = Matrix(1, 1);
    batch.main.at(0, 0) = 2.0;
    Workspace ws;
    forward(net, batch, ws);
    const double y = ws.out.at(0, 0);
    CHECK(y == 2.0);

    // loss = y^2, dL/dy = 2y
    Matrix dOut(1, 1);
    dOut.at(0, 0) = 2.0 * y;
    Grads g;
    backward(net, batch, ws, dOut, g);
    CHECK(g.dW[0].at(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("reverse-mode gradients match central finite differences") {
    Rng arch_rng(2024);
    int tested = 0;
    while (tested < 12) {
        Descriptor d;
        d.d_main = 2 + static_cast<int>(arch_rng.index(3));
        d.k_fourier = static_cast<int>(arch_rng.index(3));  // 0..2
        d.sigma_fourier = 0.7;
        const int L = 1 + static_cast<int>(arch_rng.index(3));
        for (int l = 0; l < L; ++l) d.hidden.push_back(2 + static_cast<int>(arch_rng.index(5)));
        const int loss_kind = tested % 2;
        d.d_out = loss_kind == 0 ? 3 : 4;
        d.d_ext0 = 1 + static_cast<int>(arch_rng.index(3));
        d.d_ext1 = static_cast<int>(arch_rng.index(3));
        if (tested % 2 == 0) {
            // surrogate-style plan: aux joins a middle layer
            const int at = 1 + static_cast<int>(arch_rng.index(L));
            d.concat.push_back({at, AuxSource::External0});
            if (d.d_ext1 > 0) d.concat.push_back({at, AuxSource::External1});
        } else {
            // auto-decoder-style plan: code at layer 1, encoded skip later
            d.concat.push_back({1, AuxSource::External0});
            d.concat.push_back({std::max(1, L), AuxSource::EncodedMain});
            d.d_ext1 = 0;
        }

        Network net = init_network(d, tested + 10);
        Rng rng(900 + tested);
        Batch batch = random_batch(d, 4, rng);
        if (min_abs_preact(net, batch) < 1e-3) continue;  // FD invalid at ReLU kinks

        Matrix targets(4, d.d_out);
        for (double& v : targets.a) v = rng.uniform(-1, 1);

        Matrix dOut;
        batch_loss(net, batch, targets, loss_kind, 0.15, &dOut);
        Workspace ws;
        forward(net, batch, ws);
        Grads grads;
        grads.init_like(net, 4, d.d_ext0 > 0);
        grads.zero();
        backward(net, batch, ws, dOut, grads, d.d_ext0 > 0);

        const double h = 1e-5;
        double max_rel = 0.0;
        auto check_param = [&](double* p, double analytic) {
            const double saved = *p;
            *p = saved + h;
            const double up = batch_loss(net, batch, targets, loss_kind, 0.15);
            *p = saved - h;
            const double dn = batch_loss(net, batch, targets, loss_kind, 0.15);
            *p = saved;
            const double fd = (up - dn) / (2 * h);
            max_rel = std::max(max_rel, std::abs(fd - analytic) / std::max(1.0, std::abs(fd)));
        };
        for (std::size_t l = 0; l < net.W.size(); ++l) {
            for (std::size_t i = 0; i < net.W[l].a.size(); i += 3)
                check_param(&net.W[l].a[i], grads.dW[l].a[i]);
            for (std::size_t i = 0; i < net.b[l].size(); ++i)
                check_param(&net.b[l][i], grads.db[l][i]);
        }
        // gradient w.r.t. the external code input
        if (d.d_ext0 > 0) {
            for (std::size_t r = 0; r < 4; ++r)
                for (int c = 0; c < d.d_ext0; ++c) {
                    double* p = &batch.ext0.at(r, c);
                    check_param(p, grads.dExt0.at(r, c));
                }
        }
        CHECK(max_rel < 1e-4);
        ++tested;
    }
}

TEST_CASE("zero loss gradient is zero") {
    Descriptor d;
    d.d_main = 3;
    d.hidden = {5};
    d.d_out = 3;
    Network net = init_network(d, 3);
    Rng rng(1);
    Batch batch = random_batch(d, 2, rng);
    Workspace ws;
    forward(net, batch, ws);
    Matrix dOut(2, 3);  // all zeros: dLoss/dOut = 0
    Grads g;
    backward(net, batch, ws, dOut, g);
    for (const auto& W : g.dW)
        for (double v : W.a) CHECK(v == 0.0);
}

TEST_CASE("adam: zero gradient, first-step arithmetic, determinism") {
    AdamState st;
    st.init({2});
    std::vector<double> w{1.0, -2.0};
    std::vector<double> g{0.0, 0.0};
    adam_step(st, {w.data()}, {g.data()}, {2});
    CHECK(w[0] == 1.0);
    CHECK(w[1] == -2.0);

    AdamState st2;
    st2.init({1});
    std::vector<double> w2{0.0}, g2{1.0};
    adam_step(st2, {w2.data()}, {g2.data()}, {1});
    CHECK(w2[0] == doctest::Approx(-1e-3 * (1.0 / (1.0 + 1e-8))).epsilon(1e-12));

    // identical calls from identical states match bitwise
    AdamState sa, sb;
    sa.init({3});
    sb.init({3});
    std::vector<double> wa{0.1, 0.2, 0.3}, wb{0.1, 0.2, 0.3};
    std::vector<double> gs{0.5, -0.25, 0.125};
    for (int i = 0; i < 10; ++i) {
        adam_step(sa, {wa.data()}, {gs.data()}, {3});
        adam_step(sb, {wb.data()}, {gs.data()}, {3});
    }
    CHECK(wa == wb);
}

TEST_CASE("losses: values and guards") {
    // identical nonzero vectors
    const Vec3 v{1, 2, 3};
    Vec3 dp;
    const double same = loss_mse_cos(v, v, 1.0, 1e-8, &dp);
    CHECK(same == doctest::Approx(0.0).epsilon(1e-8));

    // antiparallel unit vectors
    const double anti = loss_mse_cos({1, 0, 0}, {-1, 0, 0}, 1.0, 1e-8);
    CHECK(anti == doctest::Approx(6.0).epsilon(1e-7));  // 4 (mse) + 2 (cos)

    // zero prediction: cos term ~ 1 through the eps guard
    const double zero = loss_mse_cos({0, 0, 0}, {0, 1, 0}, 1.0, 1e-8);
    CHECK(zero == doctest::Approx(2.0).epsilon(1e-7));  // 1 (mse) + 1 (cos)

    double pred[4] = {1, 2, 3, 4};
    double tgt[4] = {1, 2, 3, 4};
    CHECK(loss_sdf(pred, tgt, 4) == 0.0);

    double z[3] = {0, 0, 0};
    CHECK(latent_prior(z, 3, 5.0) == 0.0);
}

TEST_CASE("lipschitz penalty grows when weights grow") {
    Descriptor d;
    d.d_main = 2;
    d.hidden = {4, 4};
    d.d_out = 1;
    Network net = init_network(d, 9);
    const double before = lipschitz_penalty(net, 1e-3);
    for (auto& W : net.W)
        for (double& v : W.a) v *= 2.0;
    const double after = lipschitz_penalty(net, 1e-3);
    CHECK(after > before);

    // gradient direction: finite differences on one entry
    Grads g;
    g.init_like(net, 1, false);
    g.zero();
    lipschitz_penalty(net, 1e-3, &g);
    const double h = 1e-6;
    double* p = &net.W[0].a[0];
    const double saved = *p;
    *p = saved + h;
    const double up = lipschitz_penalty(net, 1e-3);
    *p = saved - h;
    const double dn = lipschitz_penalty(net, 1e-3);
    *p = saved;
    CHECK(g.dW[0].a[0] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-4));
}

TEST_CASE("hidden-unit permutation covariance") {
    Descriptor d;
    d.d_main = 3;
    d.hidden = {6, 5};
    d.d_out = 2;
    Network net = init_network(d, 31);
    Rng rng(7);
    Batch batch = random_batch(d, 3, rng);
    Workspace ws;
    forward(net, batch, ws);
    const Matrix ref = ws.out;

    // permute the units of hidden layer 1: rows of W0/b0, columns of W1
    Network p = net;
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    for (int r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < p.W[0].cols; ++c) p.W[0].at(perm[r], c) = net.W[0].at(r, c);
        p.b[0][perm[r]] = net.b[0][r];
        for (std::size_t o = 0; o < p.W[1].rows; ++o) p.W[1].at(o, perm[r]) = net.W[1].at(o, r);
    }
    forward(p, batch, ws);
    for (std::size_t i = 0; i < ref.a.size(); ++i)
        CHECK(ws.out.a[i] == doctest::Approx(ref.a[i]).epsilon(1e-12));
}

TEST_CASE("matmul kernels agree with the serial reference") {
    Rng rng(13);
    Matrix A(17, 9), B(11, 9);
    for (double& v : A.a) v = rng.uniform(-1, 1);
    for (double& v : B.a) v = rng.uniform(-1, 1);
    Matrix C1, C2;
    matmul_nt(A, B, C1);
    matmul_nt_serial(A, B, C2);
    CHECK(C1.a == C2.a);  // bitwise: same order of operations
}

TEST_CASE("backward without forward is an error") {
    Descriptor d;
    d.d_main = 2;
    d.hidden = {3};
    d.d_out = 1;
    Network net = init_network(d, 4);
    Batch batch;
    batch.main = Matrix(1, 2);
    Workspace ws;  // no forward recorded
    Matrix dOut(1, 1);
    Grads g;
    CHECK_THROWS_AS(backward(net, batch, ws, dOut, g), InputError);
}

TEST_SUITE_END();
