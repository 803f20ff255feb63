#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "qtgp/error.hpp"

namespace qtgp {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSchmidtCutoff = 1e-12;
inline constexpr double kDegeneracyRel = 1e-8;
inline constexpr int kMaxEigDim = 64;

// Pure state of a two-part system; index = i_a * dim_b + i_b.
struct BipartiteState {
    int dim_a = 0;
    int dim_b = 0;
    CVector amp;

    BipartiteState() = default;
    BipartiteState(int da, int db, CVector v);

    double norm() const { return amp.norm(); }
    // amplitude matrix C(i_a, i_b)
    CMatrix coefficients() const;
};

enum class Subsystem { A, B };

struct BiorthogonalEigensystem {
    std::vector<cplx> values;
    std::vector<CVector> rights;  // unit norm
    std::vector<CVector> lefts;   // <left_n|right_n> = 1
    std::vector<double> condition;
    int size() const { return static_cast<int>(values.size()); }
};

struct HermitianEigensystem {
    Eigen::VectorXd values;  // descending
    CMatrix vectors;         // columns
};

struct SchmidtDecomposition {
    std::vector<double> weights;  // sqrt(p_j), descending
    std::vector<CVector> vectors_a;
    std::vector<CVector> vectors_b;
    int terms() const { return static_cast<int>(weights.size()); }
};

void require_finite(const CMatrix& m, const char* what);

// Non-Hermitian eigenproblem with paired left vectors.
BiorthogonalEigensystem eig_general(const CMatrix& m);

// Cyclic Jacobi; m must be Hermitian.
HermitianEigensystem eig_hermitian(const CMatrix& m);

// eigenvalues only (Hessenberg + shifted QR)
std::vector<cplx> eigenvalues_qr(const CMatrix& m);

// Tr_other |first><second|
CMatrix partial_trace(const BipartiteState& first, const BipartiteState& second, Subsystem keep);

SchmidtDecomposition schmidt(const BipartiteState& state);

CMatrix kron(const CMatrix& a, const CMatrix& b);

}  // namespace qtgp
