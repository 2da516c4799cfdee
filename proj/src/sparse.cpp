#include "lfk/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfk/errors.hpp"
#include "lfk/parallel.hpp"

namespace lfk {

std::vector<double> CsrMatrix::diagonal() const {
    std::vector<double> d(n, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::uint32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col[k] == r) d[r] = val[k];
    return d;
}

CsrMatrix csr_from_triplets(std::size_t n, const std::vector<std::uint32_t>& rows,
                            const std::vector<std::uint32_t>& cols,
                            const std::vector<double>& vals) {
    CsrMatrix A;
    A.n = n;
    const std::size_t nnz_in = rows.size();

    std::vector<std::uint32_t> count(n + 1, 0);
    for (std::size_t k = 0; k < nnz_in; ++k) count[rows[k] + 1]++;
    for (std::size_t r = 0; r < n; ++r) count[r + 1] += count[r];

    std::vector<std::uint32_t> tcol(nnz_in);
    std::vector<double> tval(nnz_in);
    std::vector<std::uint32_t> cursor(count.begin(), count.end() - 1);
    for (std::size_t k = 0; k < nnz_in; ++k) {
        const std::uint32_t at = cursor[rows[k]]++;
        tcol[at] = cols[k];
        tval[at] = vals[k];
    }

    A.row_ptr.assign(n + 1, 0);
    for (std::size_t r = 0; r < n; ++r) {
        const std::uint32_t beg = count[r], end = count[r + 1];
        std::vector<std::uint32_t> order(end - beg);
        std::iota(order.begin(), order.end(), 0u);
        std::sort(order.begin(), order.end(),
                  [&](std::uint32_t a, std::uint32_t b) { return tcol[beg + a] < tcol[beg + b]; });
        std::uint32_t prev = UINT32_MAX;
        for (std::uint32_t o : order) {
            const std::uint32_t c = tcol[beg + o];
            const double v = tval[beg + o];
            if (c == prev) {
                A.val.back() += v;
            } else {
                A.col.push_back(c);
                A.val.push_back(v);
                prev = c;
            }
        }
        A.row_ptr[r + 1] = static_cast<std::uint32_t>(A.col.size());
    }
    return A;
}

void csr_matvec(const CsrMatrix& A, const double* x, double* y) {
    parallel_for(static_cast<std::int64_t>(A.n), [&](std::int64_t r) {
        double s = 0.0;
        for (std::uint32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    });
}

void csr_matvec_serial(const CsrMatrix& A, const double* x, double* y) {
    for (std::size_t r = 0; r < A.n; ++r) {
        double s = 0.0;
        for (std::uint32_t k = A.row_ptr[r]; k < A.row_ptr[r + 1]; ++k) s += A.val[k] * x[A.col[k]];
        y[r] = s;
    }
}

namespace {

double dot_vec(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void remove_mean(std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double& x : v) x -= m;
}

}  // namespace

CgResult cg_solve_deflated(const CsrMatrix& A, const std::vector<double>& b, std::vector<double>& x,
                           double tol, int max_iter) {
    const std::size_t n = A.n;
    x.assign(n, 0.0);

    std::vector<double> r = b;
    remove_mean(r);
    const double bnorm = std::sqrt(dot_vec(r, r));
    CgResult res;
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }

    std::vector<double> invdiag = A.diagonal();
    for (double& d : invdiag) d = (d != 0.0) ? 1.0 / d : 1.0;

    std::vector<double> z(n), p(n), Ap(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = invdiag[i] * r[i];
    remove_mean(z);
    p = z;
    double rz = dot_vec(r, z);

    for (int it = 1; it <= max_iter; ++it) {
        csr_matvec(A, p.data(), Ap.data());
        const double pAp = dot_vec(p, Ap);
        if (pAp <= 0.0) throw SolverError("cg: non-positive curvature (matrix not SPD on subspace)");
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        remove_mean(r);
        const double rnorm = std::sqrt(dot_vec(r, r));
        res.iterations = it;
        res.relative_residual = rnorm / bnorm;
        if (res.relative_residual < tol) {
            res.converged = true;
            remove_mean(x);
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = invdiag[i] * r[i];
        remove_mean(z);
        const double rz_new = dot_vec(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return res;
}

}  // namespace lfk
