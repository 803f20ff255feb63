#include "qtgp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace qtgp {

const char* kind_name(ErrorKind k) noexcept {
    switch (k) {
        case ErrorKind::NonSquare: return "NonSquare";
        case ErrorKind::Degenerate: return "Degenerate";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ZeroState: return "ZeroState";
        case ErrorKind::StepUnderflow: return "StepUnderflow";
        case ErrorKind::AnnihilatedState: return "AnnihilatedState";
        case ErrorKind::ZeroOverlap: return "ZeroOverlap";
        case ErrorKind::BranchLost: return "BranchLost";
        case ErrorKind::WeightsVary: return "WeightsVary";
        case ErrorKind::SchmidtDegenerate: return "SchmidtDegenerate";
        case ErrorKind::ZeroExpectation: return "ZeroExpectation";
        case ErrorKind::NoTransition: return "NoTransition";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

void require_finite(const CMatrix& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorKind::InvalidArgument, std::string(what) + " has non-finite entries");
}

BipartiteState::BipartiteState(int da, int db, CVector v) : dim_a(da), dim_b(db), amp(std::move(v)) {
    if (da < 1 || db < 1 || amp.size() != static_cast<Eigen::Index>(da) * db)
        throw Error(ErrorKind::DimensionMismatch,
                    "amplitude count " + std::to_string(amp.size()) + " vs " + std::to_string(da) + "x" +
                        std::to_string(db));
    if (!amp.allFinite()) throw Error(ErrorKind::InvalidArgument, "state has non-finite amplitudes");
}

CMatrix BipartiteState::coefficients() const {
    CMatrix c(dim_a, dim_b);
    for (int i = 0; i < dim_a; ++i)
        for (int j = 0; j < dim_b; ++j) c(i, j) = amp(i * dim_b + j);
    return c;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMatrix partial_trace(const BipartiteState& first, const BipartiteState& second, Subsystem keep) {
    if (first.dim_a != second.dim_a || first.dim_b != second.dim_b)
        throw Error(ErrorKind::DimensionMismatch, "partial_trace: states live in different spaces");
    const CMatrix c1 = first.coefficients();
    const CMatrix c2 = second.coefficients();
    if (keep == Subsystem::A) return c1 * c2.adjoint();
    return c1.transpose() * c2.conjugate();
}

HermitianEigensystem eig_hermitian(const CMatrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::NonSquare, "eig_hermitian");
    require_finite(m, "eig_hermitian input");
    const Eigen::Index n = m.rows();
    CMatrix a = (m + m.adjoint()) * 0.5;
    CMatrix v = CMatrix::Identity(n, n);
    const double scale = std::max(a.norm(), 1e-300);

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(a(p, q));
        if (std::sqrt(off) <= 1e-16 * scale) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const cplx b = a(p, q);
                const double ab = std::abs(b);
                if (ab <= 1e-300) continue;
                // phase P = diag(1, e^{-i alpha}) makes the pair real, then a plane rotation
                const cplx ph = b / ab;
                const double app = a(p, p).real(), aqq = a(q, q).real();
                const double th = 0.5 * std::atan2(2 * ab, aqq - app);
                const double c = std::cos(th), s = std::sin(th);
                // columns p,q of U = P R with R = [[c, s], [-s, c]]
                const cplx u_pp = c, u_pq = s;
                const cplx u_qp = -s * std::conj(ph), u_qq = c * std::conj(ph);
                for (Eigen::Index k = 0; k < n; ++k) {
                    const cplx x = a(k, p), y = a(k, q);
                    a(k, p) = x * u_pp + y * u_qp;
                    a(k, q) = x * u_pq + y * u_qq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const cplx x = a(p, k), y = a(q, k);
                    a(p, k) = std::conj(u_pp) * x + std::conj(u_qp) * y;
                    a(q, k) = std::conj(u_pq) * x + std::conj(u_qq) * y;
                }
                a(p, q) = 0;
                a(q, p) = 0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const cplx x = v(k, p), y = v(k, q);
                    v(k, p) = x * u_pp + y * u_qp;
                    v(k, q) = x * u_pq + y * u_qq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i).real() > a(j, j).real(); });
    HermitianEigensystem out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = a(order[k], order[k]).real();
        out.vectors.col(k) = v.col(order[k]).normalized();
    }
    return out;
}

SchmidtDecomposition schmidt(const BipartiteState& state) {
    const double nrm = state.norm();
    if (!(nrm > 0)) throw Error(ErrorKind::ZeroState, "schmidt of the zero vector");
    const CMatrix c = state.coefficients();
    const HermitianEigensystem gram = eig_hermitian(c * c.adjoint());

    SchmidtDecomposition out;
    const int rank = std::min(state.dim_a, state.dim_b);
    for (Eigen::Index j = 0; j < gram.values.size() && out.terms() < rank; ++j) {
        CVector e = gram.vectors.col(j);
        // projection norm resolves small weights that sqrt(eigenvalue) loses to round-off
        const double w = (c.transpose() * e.conjugate()).norm();
        if (w <= kSchmidtCutoff * nrm) continue;
        CVector f = c.transpose() * e.conjugate() / w;
        // Gram-Schmidt against the earlier b vectors
        for (const auto& prev : out.vectors_b) f -= prev.dot(f) * prev;
        f.normalize();
        // weight from the projection keeps the reconstruction tight
        out.weights.push_back(std::abs(f.dot(c.transpose() * e.conjugate())));
        out.vectors_a.push_back(std::move(e));
        out.vectors_b.push_back(std::move(f));
    }
    return out;
}

}  // namespace qtgp
