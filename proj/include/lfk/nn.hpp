#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfk/geom3.hpp"

namespace lfk::nn {

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    bool empty() const { return a.empty(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

/// C = A * B^T  (A: BxM, Bm: NxM -> C: BxN). Parallel over rows of A;
/// fixed-order inner sums keep results thread-count independent.
void matmul_nt(const Matrix& A, const Matrix& Bm, Matrix& C);
/// C = A * B    (A: BxN, Bm: NxM -> C: BxM)
void matmul_nn(const Matrix& A, const Matrix& Bm, Matrix& C);
/// C = A^T * B  (A: BxN, Bm: BxM -> C: NxM)
void matmul_tn(const Matrix& A, const Matrix& Bm, Matrix& C);

/// Serial reference twins (tests, kernel benchmark).
void matmul_nt_serial(const Matrix& A, const Matrix& Bm, Matrix& C);

/// Where an auxiliary input joins the layer stack.
enum class AuxSource { External0, External1, EncodedMain };

struct ConcatSpec {
    int layer = 1;  // 1-based hidden-layer index whose input gains the vector
    AuxSource source = AuxSource::External0;
};

struct Descriptor {
    std::string tag;         // free-form name, stored with the weights
    int d_main = 3;          // primary spatial input
    int k_fourier = 0;       // Fourier feature pairs; 0 = raw input
    double sigma_fourier = 1.0;
    std::vector<int> hidden; // hidden widths (ReLU)
    int d_out = 3;           // linear outputs
    int d_ext0 = 0;          // e.g. latent code
    int d_ext1 = 0;          // e.g. electrode coordinates
    std::vector<ConcatSpec> concat;

    int encoded_main_dim() const { return k_fourier > 0 ? 2 * k_fourier : d_main; }
    int aux_dim(AuxSource s) const {
        switch (s) {
            case AuxSource::External0: return d_ext0;
            case AuxSource::External1: return d_ext1;
            default: return encoded_main_dim();
        }
    }
    int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
    /// Input width of 0-based layer l, including concatenated vectors.
    int layer_input_dim(int l) const;
    int layer_output_dim(int l) const {
        return l < static_cast<int>(hidden.size()) ? hidden[l] : d_out;
    }
};

struct Network {
    Descriptor desc;
    Matrix B_ff;                        // k x d_main frequency matrix
    std::vector<Matrix> W;              // [out x in] per layer
    std::vector<std::vector<double>> b;

    std::size_t num_params() const;
};

/// Fan-in scaled uniform init; B_ff ~ sigma_fourier * N(0,1). Deterministic.
Network init_network(const Descriptor& desc, std::uint64_t seed);

struct Batch {
    Matrix main;  // B x d_main
    Matrix ext0;  // B x d_ext0 (empty when unused)
    Matrix ext1;  // B x d_ext1
};

struct Workspace {
    Matrix enc;
    std::vector<Matrix> layer_in;   // input of each layer after concatenation
    std::vector<Matrix> pre;        // pre-activations
    Matrix out;
};

/// [sin(2 pi B x); cos(2 pi B x)] for one point.
std::vector<double> fourier_features(const std::vector<double>& x, const Matrix& B_ff);

void forward(const Network& net, const Batch& batch, Workspace& ws);

struct Grads {
    std::vector<Matrix> dW;
    std::vector<std::vector<double>> db;
    Matrix dExt0;  // B x d_ext0, gradient w.r.t. the external code input

    void init_like(const Network& net, std::size_t batch_size, bool want_ext0);
    void zero();
};

/// Exact reverse-mode gradients of sum_b loss_b given dOut = dLoss/dOut.
/// Requires the workspace of the matching forward call.
void backward(const Network& net, const Batch& batch, const Workspace& ws, const Matrix& dOut,
              Grads& grads, bool want_ext0 = false);

struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::vector<std::vector<double>> m, v;

    void init(const std::vector<std::size_t>& sizes);
};

/// Standard Adam update with bias correction over a list of parameter slices.
void adam_step(AdamState& st, const std::vector<double*>& params,
               const std::vector<const double*>& grads, const std::vector<std::size_t>& sizes);

/// Parameter slices of a network in serialization order (W0, b0, W1, b1, ...).
std::vector<double*> param_slices(Network& net, std::vector<std::size_t>& sizes);
std::vector<const double*> grad_slices(const Grads& g);

/// Squared error plus cosine-direction term:
/// ||p - t||^2 + lambda * (1 - p.t / (|p||t| + eps)). Returns loss, fills dp.
double loss_mse_cos(const Vec3& pred, const Vec3& target, double lambda_cos, double eps,
                    Vec3* dpred = nullptr);

/// Squared SDF residual over the 4 surface channels (Euclidean norm squared).
double loss_sdf(const double* pred, const double* target, int dim, double* dpred = nullptr);

/// lambda * ||z||^2 with gradient 2 lambda z.
double latent_prior(const double* z, int dim, double lambda, double* dz = nullptr);

/// Differentiable Lipschitz surrogate: lambda * prod_l softplus(||W_l||_F).
/// Gradients accumulate into grads.dW when provided.
double lipschitz_penalty(const Network& net, double lambda, Grads* grads = nullptr);

}  // namespace lfk::nn
