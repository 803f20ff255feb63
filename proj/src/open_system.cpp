#include "qtgp/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qtgp {

namespace {

constexpr cplx I1(0, 1);

CVector rk4_step(const TimeMatrix& h, double t, double dt, const CVector& y) {
    const CMatrix h0 = h(t);
    const CMatrix hm = h(t + 0.5 * dt);
    const CMatrix h1 = h(t + dt);
    const CVector k1 = -I1 * (h0 * y);
    const CVector k2 = -I1 * (hm * (y + 0.5 * dt * k1));
    const CVector k3 = -I1 * (hm * (y + 0.5 * dt * k2));
    const CVector k4 = -I1 * (h1 * (y + dt * k3));
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_step(const TimeMatrix& h, double t, double dt, const CVector& y) {
    const CVector full = rk4_step(h, t, dt, y);
    const CVector half = rk4_step(h, t + 0.5 * dt, 0.5 * dt, rk4_step(h, t, 0.5 * dt, y));
    const double err = (full - half).norm() / 15.0;
    const double ref = std::max(y.norm(), 1e-300);
    if (!(err <= 1e-6 * ref))
        throw Error(ErrorKind::StepUnderflow,
                    "local error estimate " + std::to_string(err / ref) + " at t = " + std::to_string(t));
}

CMatrix block_of(const CMatrix& op, int da, int db, bool a_side) {
    if (a_side) {
        CMatrix a(da, da);
        for (int i = 0; i < da; ++i)
            for (int k = 0; k < da; ++k) a(i, k) = op(i * db, k * db);
        return a;
    }
    return op.topLeftCorner(db, db);
}

}  // namespace

void LindbladModel::validate(const Point& x) const {
    const int n = dim();
    const CMatrix h = hamiltonian(x);
    if (h.rows() != n || h.cols() != n) throw Error(ErrorKind::DimensionMismatch, "hamiltonian size");
    require_finite(h, "hamiltonian");
    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorKind::InvalidArgument, "hamiltonian is not Hermitian");
    for (const auto& j : jump_ops) {
        if (j.op.rows() != n || j.op.cols() != n) throw Error(ErrorKind::DimensionMismatch, "jump operator size");
        if (j.tag == JumpTag::Global) continue;
        const bool a_side = j.tag == JumpTag::SubsystemA;
        const CMatrix local = block_of(j.op, dim_a, dim_b, a_side);
        const CMatrix rebuilt = a_side ? kron(local, CMatrix::Identity(dim_b, dim_b))
                                       : kron(CMatrix::Identity(dim_a, dim_a), local);
        const double s = std::max(1.0, j.op.cwiseAbs().maxCoeff());
        if ((rebuilt - j.op).cwiseAbs().maxCoeff() > 1e-12 * s)
            throw Error(ErrorKind::InvalidArgument, "jump operator is not local to its tagged subsystem");
    }
}

CMatrix effective_hamiltonian(const LindbladModel& model, const Point& x) {
    CMatrix h = model.hamiltonian(x);
    for (const auto& j : model.jump_ops) h -= 0.5 * I1 * (j.op.adjoint() * j.op);
    return h;
}

void propagate_visit(const TimeMatrix& h_eff, const BipartiteState& psi0, double t0, double t1, int steps,
                     const std::function<void(int, double, const CVector&)>& visit) {
    if (steps < 1) throw Error(ErrorKind::InvalidArgument, "steps must be >= 1");
    if (!(t1 > t0)) throw Error(ErrorKind::InvalidArgument, "t1 must exceed t0");
    const double dt = (t1 - t0) / steps;
    CVector y = psi0.amp;
    int next_check = 0, checks = 0;
    for (int k = 0; k < steps; ++k) {
        const double t = t0 + k * dt;
        if (visit) visit(k, t, y);
        if (k == next_check) {
            check_step(h_eff, t, dt, y);
            ++checks;
            next_check = static_cast<int>(static_cast<long long>(steps) * checks / 8);
            if (next_check <= k) next_check = k + 1;
        }
        y = rk4_step(h_eff, t, dt, y);
    }
    if (visit) visit(steps, t1, y);
}

BipartiteState propagate_nojump(const TimeMatrix& h_eff, const BipartiteState& psi0, double t0, double t1,
                                int steps) {
    BipartiteState out = psi0;
    propagate_visit(h_eff, psi0, t0, t1, steps, [&](int k, double, const CVector& y) {
        if (k == steps) out.amp = y;
    });
    return out;
}

std::pair<BipartiteState, double> apply_jump(const BipartiteState& psi, const CMatrix& gamma) {
    const int n = psi.dim_a * psi.dim_b;
    if (gamma.rows() != n || gamma.cols() != n) throw Error(ErrorKind::DimensionMismatch, "jump operator size");
    const double n0 = psi.amp.squaredNorm();
    if (!(n0 > 0)) throw Error(ErrorKind::ZeroState, "apply_jump on the zero vector");
    CVector out = gamma * psi.amp;
    const double n1 = out.squaredNorm();
    if (n1 <= 1e-28 * n0) throw Error(ErrorKind::AnnihilatedState, "jump operator annihilates the state");
    return {BipartiteState(psi.dim_a, psi.dim_b, std::move(out)), n1 / n0};
}

CMatrix discrete_step_map(const CMatrix& rho, const LindbladModel& model, const Point& x, double dt) {
    if (!(dt > 0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const int n = model.dim();
    if (rho.rows() != n || rho.cols() != n) throw Error(ErrorKind::DimensionMismatch, "density matrix size");
    const CMatrix w0 = CMatrix::Identity(n, n) - I1 * dt * effective_hamiltonian(model, x);
    CMatrix out = w0 * rho * w0.adjoint();
    for (const auto& j : model.jump_ops) out += dt * (j.op * rho * j.op.adjoint());
    return 0.5 * (out + out.adjoint());
}

std::optional<double> sample_jump_time(const TimeMatrix& h_eff, const BipartiteState& psi0, double T, double u,
                                       int steps) {
    if (!(u > 0 && u < 1)) throw Error(ErrorKind::InvalidArgument, "u must lie in (0, 1)");
    std::vector<double> n2(steps + 1);
    propagate_visit(h_eff, psi0, 0.0, T, steps, [&](int k, double, const CVector& y) { n2[k] = y.squaredNorm(); });
    if (n2.back() > u) return std::nullopt;
    // norm curve is non-increasing: first index with n2 <= u
    int lo = 0, hi = steps;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (n2[mid] <= u ? hi : lo) = mid;
    }
    if (n2[lo] <= u) return 0.0;
    const double dt = T / steps;
    const double frac = (n2[lo] - u) / (n2[lo] - n2[hi]);
    return (lo + frac) * dt;
}

double uniform_open(std::uint64_t bits) { return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52; }

}  // namespace qtgp
