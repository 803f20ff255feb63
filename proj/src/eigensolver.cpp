#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <string>

#include "qtgp/linalg.hpp"

namespace qtgp {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Householder reduction to upper Hessenberg form (similarity transform).
CMatrix hessenberg(CMatrix h) {
    const Eigen::Index n = h.rows();
    for (Eigen::Index k = 0; k + 2 < n; ++k) {
        CVector x = h.block(k + 1, k, n - k - 1, 1);
        const double xn = x.norm();
        if (xn == 0) continue;
        const double a0 = std::abs(x(0));
        const cplx ph = a0 > 0 ? x(0) / a0 : cplx(1, 0);
        CVector v = x;
        v(0) += ph * xn;
        const double vn = v.norm();
        if (vn == 0) continue;
        v /= vn;
        // H <- (I - 2vv*) H (I - 2vv*) on the trailing block
        auto rows = h.block(k + 1, 0, n - k - 1, n);
        const Eigen::RowVectorXcd vr = v.adjoint() * rows;
        rows -= 2.0 * v * vr;
        auto cols = h.block(0, k + 1, n, n - k - 1);
        const CVector vc = cols * v;
        cols -= 2.0 * vc * v.adjoint();
        for (Eigen::Index i = k + 2; i < n; ++i) h(i, k) = 0;
    }
    return h;
}

cplx wilkinson_shift(cplx a, cplx b, cplx c, cplx d) {
    const cplx half = 0.5 * (a - d);
    const cplx disc = std::sqrt(half * half + b * c);
    const cplx m1 = d - b * c / (half + disc);
    const cplx m2 = d - b * c / (half - disc);
    auto ok = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
    if (!ok(m1)) return ok(m2) ? m2 : d;
    if (!ok(m2)) return m1;
    return std::abs(m1 - d) <= std::abs(m2 - d) ? m1 : m2;
}

void givens(cplx f, cplx g, double& c, cplx& s) {
    // [c s; -conj(s) c] * [f; g] = [r; 0]
    const double af = std::abs(f), ag = std::abs(g);
    if (ag == 0) {
        c = 1;
        s = 0;
        return;
    }
    if (af == 0) {
        c = 0;
        s = std::conj(g) / ag;
        return;
    }
    const double r = std::hypot(af, ag);
    c = af / r;
    s = (f / af) * std::conj(g) / r;
}

// LU with partial pivoting, in place. Tiny pivots are replaced so that
// near-singular shifted systems still solve (inverse iteration wants that).
struct LU {
    CMatrix a;
    std::vector<Eigen::Index> piv;

    LU(CMatrix m, double floor) : a(std::move(m)), piv(a.rows()) {
        const Eigen::Index n = a.rows();
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::Index p = k;
            for (Eigen::Index i = k + 1; i < n; ++i)
                if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
            piv[k] = p;
            if (p != k) a.row(k).swap(a.row(p));
            if (std::abs(a(k, k)) < floor) a(k, k) = floor;
            for (Eigen::Index i = k + 1; i < n; ++i) {
                a(i, k) /= a(k, k);
                for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= a(i, k) * a(k, j);
            }
        }
    }

    CVector solve(CVector b) const {
        const Eigen::Index n = a.rows();
        for (Eigen::Index k = 0; k < n; ++k) {
            if (piv[k] != k) std::swap(b(k), b(piv[k]));
            for (Eigen::Index i = k + 1; i < n; ++i) b(i) -= a(i, k) * b(k);
        }
        for (Eigen::Index k = n - 1; k >= 0; --k) {
            for (Eigen::Index j = k + 1; j < n; ++j) b(k) -= a(k, j) * b(j);
            b(k) /= a(k, k);
        }
        return b;
    }
};

CVector start_vector(Eigen::Index n, int attempt) {
    // deterministic, not aligned with any basis direction
    CVector v(n);
    std::uint64_t x = 0x9E3779B97F4A7C15ull + 7919ull * static_cast<std::uint64_t>(attempt);
    for (Eigen::Index i = 0; i < n; ++i) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        const double re = static_cast<double>(x >> 11) * 0x1.0p-53 - 0.5;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        const double im = static_cast<double>(x >> 11) * 0x1.0p-53 - 0.5;
        v(i) = cplx(1.0 + re, im);
    }
    return v.normalized();
}

CVector inverse_iteration(const CMatrix& m, cplx lambda, double mnorm) {
    const Eigen::Index n = m.rows();
    const double floor = kEps * std::max(mnorm, 1e-300);
    CVector best;
    double best_res = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 4; ++attempt) {
        // small offset keeps the factorisation finite when lambda is exact
        const cplx shift = lambda + cplx(1, 0.5) * (10 * kEps * std::max(mnorm, 1e-300) * (1 + attempt));
        const LU lu(m - shift * CMatrix::Identity(n, n), floor);
        CVector v = start_vector(n, attempt);
        for (int it = 0; it < 3; ++it) {
            v = lu.solve(v);
            const double vn = v.norm();
            if (!(vn > 0) || !std::isfinite(vn)) break;
            v /= vn;
        }
        if (!v.allFinite()) continue;
        const double res = (m * v - lambda * v).norm();
        if (res < best_res) {
            best_res = res;
            best = v;
        }
        if (res <= 1e-13 * std::max(mnorm, 1e-300)) break;
    }
    if (best.size() == 0) throw Error(ErrorKind::NoConvergence, "inverse iteration failed");
    return best;
}

bool real_tie(cplx a, cplx b, double scale) { return std::abs(a.real() - b.real()) <= 1e-10 * scale; }

}  // namespace

std::vector<cplx> eigenvalues_qr(const CMatrix& m) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::NonSquare, "matrix is not square");
    const Eigen::Index n = m.rows();
    std::vector<cplx> out;
    if (n == 0) return out;
    CMatrix h = hessenberg(m);
    const double hnorm = std::max(h.norm(), 1e-300);

    Eigen::Index hi = n - 1;
    int iter = 0, since = 0;
    const int max_iter = 100 * static_cast<int>(n);
    while (hi >= 0) {
        if (hi == 0) {
            out.push_back(h(0, 0));
            break;
        }
        // find the active window [lo, hi]
        Eigen::Index lo = hi;
        while (lo > 0) {
            const double sub = std::abs(h(lo, lo - 1));
            const double diag = std::abs(h(lo, lo)) + std::abs(h(lo - 1, lo - 1));
            if (sub <= kEps * (diag > 0 ? diag : hnorm)) {
                h(lo, lo - 1) = 0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            out.push_back(h(hi, hi));
            --hi;
            since = 0;
            continue;
        }
        if (++iter > max_iter) throw Error(ErrorKind::NoConvergence, "QR iteration did not converge");
        ++since;

        cplx mu;
        if (since % 10 == 0)
            mu = h(hi, hi) + cplx(0.75, 0.25) * std::abs(h(hi, hi - 1));
        else
            mu = wilkinson_shift(h(hi - 1, hi - 1), h(hi - 1, hi), h(hi, hi - 1), h(hi, hi));

        for (Eigen::Index k = lo; k <= hi; ++k) h(k, k) -= mu;
        std::vector<double> cs(hi - lo);
        std::vector<cplx> ss(hi - lo);
        for (Eigen::Index k = lo; k < hi; ++k) {
            double c;
            cplx s;
            givens(h(k, k), h(k + 1, k), c, s);
            cs[k - lo] = c;
            ss[k - lo] = s;
            for (Eigen::Index j = k; j <= hi; ++j) {
                const cplx x = h(k, j), y = h(k + 1, j);
                h(k, j) = c * x + s * y;
                h(k + 1, j) = -std::conj(s) * x + c * y;
            }
        }
        for (Eigen::Index k = lo; k < hi; ++k) {
            const double c = cs[k - lo];
            const cplx s = ss[k - lo];
            const Eigen::Index top = std::min<Eigen::Index>(k + 2, hi);
            for (Eigen::Index i = lo; i <= top; ++i) {
                const cplx x = h(i, k), y = h(i, k + 1);
                h(i, k) = c * x + std::conj(s) * y;
                h(i, k + 1) = -s * x + c * y;
            }
        }
        for (Eigen::Index k = lo; k <= hi; ++k) h(k, k) += mu;
    }
    return out;
}

BiorthogonalEigensystem eig_general(const CMatrix& m) {
    if (m.rows() != m.cols())
        throw Error(ErrorKind::NonSquare,
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " matrix is not square");
    if (m.rows() > kMaxEigDim) throw Error(ErrorKind::InvalidArgument, "dimension above 64");
    require_finite(m, "eig_general input");
    const Eigen::Index n = m.rows();
    const double mnorm = m.norm();
    const double scale = std::max(mnorm, 1e-300);

    std::vector<cplx> lam = eigenvalues_qr(m);
    const double tol = kDegeneracyRel * mnorm;
    for (std::size_t i = 0; i < lam.size(); ++i)
        for (std::size_t j = i + 1; j < lam.size(); ++j)
            if (std::abs(lam[i] - lam[j]) <= tol)
                throw Error(ErrorKind::Degenerate, "eigenvalue gap " + std::to_string(std::abs(lam[i] - lam[j])) +
                                                       " below tolerance");

    // descending real part, ties by descending imaginary part
    std::stable_sort(lam.begin(), lam.end(), [&](cplx a, cplx b) {
        if (!real_tie(a, b, scale)) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    // insertion pass in case the tolerant comparator left a misordered tie
    for (std::size_t i = 1; i < lam.size(); ++i)
        for (std::size_t j = i; j > 0; --j) {
            const cplx a = lam[j - 1], b = lam[j];
            const bool before = real_tie(a, b, scale) ? b.imag() > a.imag() : b.real() > a.real();
            if (!before) break;
            std::swap(lam[j - 1], lam[j]);
        }

    const CMatrix madj = m.adjoint();
    std::vector<cplx> mu = eigenvalues_qr(madj);
    std::vector<bool> used(mu.size(), false);

    BiorthogonalEigensystem out;
    out.values.resize(n);
    out.rights.resize(n);
    out.lefts.resize(n);
    out.condition.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        // adjoint eigenvalue closest to conj(lambda)
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < mu.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(mu[j] - std::conj(lam[k]));
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        used[best] = true;

        CVector r = inverse_iteration(m, lam[k], mnorm);
        CVector l = inverse_iteration(madj, mu[best], mnorm);
        const cplx ov = l.dot(r);
        out.condition[k] = std::abs(ov);
        if (std::abs(ov) < 1e-14)
            throw Error(ErrorKind::Degenerate, "left and right eigenvectors are orthogonal (exceptional point)");
        l /= std::conj(ov);
        // biorthogonal Rayleigh quotient sharpens lambda
        out.values[k] = l.dot(m * r);
        out.rights[k] = std::move(r);
        out.lefts[k] = std::move(l);
    }
    return out;
}

}  // namespace qtgp
