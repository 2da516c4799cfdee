#pragma once

#include <cstdint>
#include <vector>

namespace lfk {

/// Symmetric sparse matrix in CSR form (full pattern stored).
struct CsrMatrix {
    std::size_t n = 0;
    std::vector<std::uint32_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    std::vector<double> diagonal() const;
};

/// Assembles a CSR matrix from (row, col, value) triplets, summing duplicates.
CsrMatrix csr_from_triplets(std::size_t n, const std::vector<std::uint32_t>& rows,
                            const std::vector<std::uint32_t>& cols,
                            const std::vector<double>& vals);

/// y = A x. OpenMP-parallel over rows; each row is a fixed-order dot product,
/// so results do not depend on the thread count.
void csr_matvec(const CsrMatrix& A, const double* x, double* y);

/// Serial reference used by tests and the kernel benchmark.
void csr_matvec_serial(const CsrMatrix& A, const double* x, double* y);

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Preconditioned conjugate gradients with Jacobi preconditioning and
/// constant-mode deflation: the right-hand side, iterates, and residuals are
/// kept orthogonal to the all-ones vector (the stiffness null space).
CgResult cg_solve_deflated(const CsrMatrix& A, const std::vector<double>& b,
                           std::vector<double>& x, double tol, int max_iter);

}  // namespace lfk
