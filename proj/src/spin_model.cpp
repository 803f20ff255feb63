#include "qtgp/spin_model.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace qtgp::spin {

namespace {

constexpr cplx I1(0, 1);

// coefficient slots -> basis index
constexpr int kSlot[4] = {1, 0, 3, 2};  // a:|eg>, b:|ee>, c:|gg>, d:|ge>

struct Coeffs {
    std::array<cplx, 4> v;
    bool ok;
};

Coeffs coefficients(double s, cplx x, cplx e, double g, double phi) {
    const cplx den = s * s + x * x - e * e;
    if (std::abs(s) < 1e-8 || std::abs(den) < 1e-10) return {{}, false};
    const cplx eim = std::exp(-I1 * phi);
    const cplx a = s * eim;
    const cplx c = e - x;
    const cplx d = g * s * (x - e) * std::conj(eim) / den;
    const cplx b = (e + x) * eim * d / s;
    return {{a, b, c, d}, true};
}

double norm4(const std::array<cplx, 4>& v) {
    double n = 0;
    for (const auto& z : v) n += std::norm(z);
    return std::sqrt(n);
}

CVector assemble(const std::array<cplx, 4>& v, double scale) {
    CVector out(4);
    for (int k = 0; k < 4; ++k) out(kSlot[k]) = v[k] / scale;
    return out;
}

std::array<cplx, 4> slots_of(const CVector& u) {
    std::array<cplx, 4> v;
    for (int k = 0; k < 4; ++k) v[k] = u(kSlot[k]);
    return v;
}

}  // namespace

void ModelParams::validate() const {
    if (!(theta >= 0 && theta <= kPi)) throw Error(ErrorKind::InvalidArgument, "theta outside [0, pi]");
    if (!(kappa >= 0)) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
    if (!(g >= 0)) throw Error(ErrorKind::InvalidArgument, "g must be >= 0");
    if (!std::isfinite(phi)) throw Error(ErrorKind::InvalidArgument, "phi must be finite");
}

CMatrix field_term(double theta, double phi) {
    CMatrix m(2, 2);
    m << std::cos(theta), std::sin(theta) * std::exp(-I1 * phi), std::sin(theta) * std::exp(I1 * phi), -std::cos(theta);
    return m;
}

CMatrix sigma_minus_a() {
    CMatrix sm = CMatrix::Zero(2, 2);
    sm(1, 0) = 1;  // |g><e|
    return kron(sm, CMatrix::Identity(2, 2));
}

CMatrix hamiltonian(const ModelParams& p) {
    CMatrix h = kron(field_term(p.theta, p.phi), CMatrix::Identity(2, 2));
    h(0, 3) += p.g;
    h(3, 0) += p.g;
    return h;
}

LindbladModel lindblad_model(double kappa) {
    if (!(kappa >= 0)) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 0");
    LindbladModel m;
    m.dim_a = 2;
    m.dim_b = 2;
    m.hamiltonian = [](const Point& x) { return hamiltonian({x.at(0), x.at(1), x.at(2), 0.0}); };
    if (kappa > 0) m.jump_ops.push_back({std::sqrt(2 * kappa) * sigma_minus_a(), JumpTag::SubsystemA});
    return m;
}

CMatrix effective_hamiltonian(const ModelParams& p) {
    p.validate();
    return qtgp::effective_hamiltonian(lindblad_model(p.kappa), p.point());
}

MatrixBuilder effective_builder(double kappa) {
    return [kappa](const Point& x) {
        CMatrix h = hamiltonian({x.at(0), x.at(1), x.at(2), kappa});
        h(0, 0) -= I1 * kappa;
        h(1, 1) -= I1 * kappa;
        return h;
    };
}

MatrixBuilder single_spin_builder(double kappa) {
    return [kappa](const Point& x) {
        CMatrix h = field_term(x.at(0), x.at(1));
        h(0, 0) -= I1 * kappa;
        return h;
    };
}

LoopPath phi_loop(double theta, double g, int points, bool with_g) {
    LoopPath loop;
    loop.points = points;
    loop.description = "phi loop";
    if (with_g)
        loop.at = [theta, g](double s) { return Point{theta, 2 * kPi * s, g}; };
    else
        loop.at = [theta](double s) { return Point{theta, 2 * kPi * s}; };
    return loop;
}

CVector AnalyticBranch::right_vector() const { return assemble(right, norm_right); }
CVector AnalyticBranch::left_vector() const { return assemble(left, norm_left); }

std::array<cplx, 4> analytic_energies(const ModelParams& p) {
    const double s = std::sin(p.theta);
    const cplx x(std::cos(p.theta), -0.5 * p.kappa);
    const double r = std::sqrt(p.g * p.g + 4 * s * s);
    const cplx base = s * s + x * x + 0.5 * p.g * p.g;
    const cplx e1 = std::sqrt(base + 0.5 * p.g * r);
    const cplx e3 = std::sqrt(base - 0.5 * p.g * r);
    return {e1, -e1, e3, -e3};
}

std::array<AnalyticBranch, 4> analytic_eigensystem(const ModelParams& p) {
    p.validate();
    if (p.g < 1e-6) throw Error(ErrorKind::Degenerate, "g below 1e-6 leaves a degenerate spectrum");
    const std::array<cplx, 4> e = analytic_energies(p);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (std::abs(e[i] - e[j]) < 1e-8)
                throw Error(ErrorKind::Degenerate, "branches " + std::to_string(i + 1) + " and " +
                                                       std::to_string(j + 1) + " coincide");

    const double s = std::sin(p.theta);
    const cplx x(std::cos(p.theta), -0.5 * p.kappa);
    std::array<AnalyticBranch, 4> out;
    for (int n = 0; n < 4; ++n) {
        out[n].index = n + 1;
        out[n].energy = e[n];
        out[n].eigenvalue = e[n] - I1 * (0.5 * p.kappa);
    }
    bool fallback = false;
    for (int n = 0; n < 4; ++n) {
        AnalyticBranch& b = out[n];
        // left vectors: kappa -> -kappa, energy -> its conjugate
        const Coeffs r = coefficients(s, x, e[n], p.g, p.phi);
        const Coeffs l = coefficients(s, std::conj(x), std::conj(e[n]), p.g, p.phi);
        if (!r.ok || !l.ok) {
            fallback = true;
            break;
        }
        b.right = r.v;
        b.left = l.v;
        b.norm_right = norm4(r.v);
        b.norm_left = norm4(l.v);
    }
    if (!fallback) return out;

    const BiorthogonalEigensystem es = eig_general(effective_hamiltonian(p));
    std::array<bool, 4> used{};
    for (int n = 0; n < 4; ++n) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 4; ++j) {
            const double d = std::abs(es.values[j] - out[n].eigenvalue);
            if (!used[j] && d < bd) {
                bd = d;
                best = j;
            }
        }
        used[best] = true;
        AnalyticBranch& b = out[n];
        b.path = EigenPath::NumericFallback;
        b.right = slots_of(es.rights[best]);
        b.left = slots_of(es.lefts[best]);
        b.norm_right = norm4(b.right);
        b.norm_left = norm4(b.left);
    }
    return out;
}

JumpTerms model_jump_terms(int branch, const ModelParams& p) {
    if (branch < 1 || branch > 4) throw Error(ErrorKind::InvalidArgument, "branch must be 1..4");
    const AnalyticBranch b = analytic_eigensystem(p)[branch - 1];
    const double scale = b.norm_right * b.norm_left;
    return {b.right[0] * std::conj(b.left[2]) / scale, b.right[1] * std::conj(b.left[3]) / scale};
}

double model_jump_phase(int branch, const ModelParams& p) {
    const JumpTerms t = model_jump_terms(branch, p);
    const cplx z = t.ac + t.bd;
    if (std::abs(z) < 1e-14) throw Error(ErrorKind::ZeroExpectation, "a C* + b D* vanishes");
    return wrap_phase(std::arg(z));
}

std::vector<SweepRow> berry_sweep(const std::vector<double>& theta_grid, const std::vector<double>& kappa_grid,
                                  double g, int branch, int loop_points, int jobs) {
    if (theta_grid.empty() || kappa_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty sweep grid");
    if (!(g > 0)) throw Error(ErrorKind::InvalidArgument, "sweep needs g > 0");
    const std::size_t nk = kappa_grid.size();
    std::vector<SweepRow> rows(theta_grid.size() * nk);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            SweepRow& row = rows[i];
            row.theta = theta_grid[i / nk];
            row.kappa = kappa_grid[i % nk];
            row.g = g;
            row.branch = branch;
            row.report.points = loop_points;
            try {
                ModelParams{row.theta, 0.0, g, row.kappa}.validate();
                row.report = adiabatic_berry_phase(effective_builder(row.kappa), phi_loop(row.theta, g, loop_points),
                                                   branch);
                if (!std::isfinite(row.report.geometric) || !std::isfinite(row.report.geometric_unwrapped))
                    row.status = "NonFinite";
            } catch (const Error& err) {
                row.status = kind_name(err.kind());
            }
            if (row.status != "ok") {
                const double nan = std::numeric_limits<double>::quiet_NaN();
                row.report.geometric = row.report.geometric_unwrapped = nan;
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(rows.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    return rows;
}

double discontinuity_indicator(double g, double kappa, int branch, int loop_points, double eps) {
    const MatrixBuilder h = effective_builder(kappa);
    const double up = adiabatic_berry_phase(h, phi_loop(kPi / 2 + eps, g, loop_points), branch).geometric;
    const double dn = adiabatic_berry_phase(h, phi_loop(kPi / 2 - eps, g, loop_points), branch).geometric;
    return std::abs(wrap_phase(up - dn));
}

double critical_kappa(double g, int branch, double tol, int loop_points, const DiscontinuityConfig& cfg) {
    if (!(g > 0) || !(tol > 0)) throw Error(ErrorKind::InvalidArgument, "critical_kappa needs g > 0 and tol > 0");
    auto jumps = [&](double k) { return discontinuity_indicator(g, k, branch, loop_points, cfg.eps) > cfg.threshold; };
    double lo = 0, hi = cfg.kappa_max;
    if (jumps(lo) || !jumps(hi))
        throw Error(ErrorKind::NoTransition, "indicator does not change on [0, " + std::to_string(hi) + "]");
    while (hi - lo >= tol) {
        const double mid = 0.5 * (lo + hi);
        (jumps(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace qtgp::spin
