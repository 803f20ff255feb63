#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qtgp/geometric_phase.hpp"
#include "qtgp/spin_model.hpp"
#include "support/oracles.hpp"

using namespace qtgp;
using oracle::phase_dist;

namespace {

const cplx I1(0, 1);
// (sigma_z^a - sigma_z^b) / 2 generates the phi rotation of the spin model
const CMatrix K = CVector((CVector(4) << 0, 1, -1, 0).finished()).asDiagonal();

double rotation_oracle(double theta, double g, double kappa, int branch) {
    const auto es = eig_general(spin::effective_hamiltonian({theta, 0, g, kappa}));
    const CVector& r = es.rights[branch - 1];
    const CVector& l = es.lefts[branch - 1];
    return wrap_phase(2 * kPi * l.dot(K * r).real());
}

CVector aligned_up(double theta, double phi) {
    CVector v(2);
    v << std::cos(theta / 2), std::sin(theta / 2) * std::exp(I1 * phi);
    return v;
}

}  // namespace

TEST_CASE("phase wrapping lands in (-pi, pi]") {
    CHECK(wrap_phase(kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_phase(-0.5) == doctest::Approx(-0.5));
    CHECK(wrap_phase(2 * kPi + 0.25) == doctest::Approx(0.25));
    for (double x = -20; x < 20; x += 0.37) {
        const double w = wrap_phase(x);
        CHECK(w > -kPi);
        CHECK(w <= kPi);
    }
}

TEST_CASE("polar loop has no Berry phase") {
    const auto r = adiabatic_berry_phase(spin::single_spin_builder(0), spin::phi_loop(0, 0, 64, false), 1);
    CHECK(std::abs(r.geometric) < 1e-12);
    const auto r4 = adiabatic_berry_phase(spin::effective_builder(0), spin::phi_loop(0, 1, 64), 1);
    CHECK(std::abs(r4.geometric) < 1e-12);
}

TEST_CASE("equatorial loop of the aligned spin gives pi") {
    const auto r = adiabatic_berry_phase(spin::single_spin_builder(0), spin::phi_loop(kPi / 2, 0, 1024, false), 1);
    CHECK(std::abs(std::abs(r.geometric) - kPi) < 1e-9);
}

TEST_CASE("closed-system solid angle") {
    for (double th : {kPi / 6, kPi / 4, kPi / 3, 2 * kPi / 3, 3 * kPi / 4}) {
        const auto r = adiabatic_berry_phase(spin::single_spin_builder(0), spin::phi_loop(th, 0, 1024, false), 1);
        CHECK(phase_dist(r.geometric, -kPi * (1 - std::cos(th))) < 1e-9);
        CHECK(std::abs(r.imaginary) < 1e-10);
    }
}

TEST_CASE("holonomy matches the rotation-generator closed form on the spin model") {
    for (auto [th, g, k] : {std::tuple{1.0, 1.0, 0.4}, {0.5, 0.6, 0.9}, {2.3, 1.7, 0.2}, {1.2, 1.0, 0.0}}) {
        for (int b = 1; b <= 4; ++b) {
            const auto r = adiabatic_berry_phase(spin::effective_builder(k), spin::phi_loop(th, g, 512), b);
            CHECK(phase_dist(r.geometric, rotation_oracle(th, g, k, b)) < 1e-9);
        }
    }
}

TEST_CASE("doubling the loop resolution barely moves the phase") {
    for (int b = 1; b <= 4; ++b) {
        const auto r1 = adiabatic_berry_phase(spin::effective_builder(0.4), spin::phi_loop(1.0, 1.0, 256), b);
        const auto r2 = adiabatic_berry_phase(spin::effective_builder(0.4), spin::phi_loop(1.0, 1.0, 512), b);
        CHECK(phase_dist(r1.geometric, r2.geometric) < 1e-6);
    }
}

TEST_CASE("geometric and unwrapped phases agree modulo 2 pi") {
    const auto r = adiabatic_berry_phase(spin::effective_builder(0.7), spin::phi_loop(2.0, 1.3, 256), 2);
    CHECK(phase_dist(r.geometric, r.geometric_unwrapped) < 1e-10);
    CHECK(r.total == r.geometric);
    CHECK(r.dynamical == 0.0);
}

TEST_CASE("holonomy is invariant under per-sample rescaling") {
    const MatrixBuilder h = spin::effective_builder(0.5);
    const LoopPath loop = spin::phi_loop(0.8, 1.2, 256);
    std::vector<CVector> rs, ls;
    for (int k = 0; k < loop.points; ++k) {
        const auto es = eig_general(h(loop.sample(k)));
        rs.push_back(es.rights[0]);
        ls.push_back(es.lefts[0]);
    }
    const cplx s0 = holonomy_log(rs, ls);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ud(0.2, 5.0), ph(-kPi, kPi);
    for (int rep = 0; rep < 5; ++rep) {
        auto r2 = rs;
        auto l2 = ls;
        for (int k = 0; k < loop.points; ++k) {
            r2[k] *= std::polar(ud(rng), ph(rng));
            l2[k] *= std::polar(ud(rng), ph(rng));
        }
        const cplx s = holonomy_log(r2, l2);
        CHECK(phase_dist(-s.imag(), -s0.imag()) < 1e-12);
        CHECK(std::abs(s.real() - s0.real()) < 1e-12);
    }
}

TEST_CASE("reversing the loop negates the phase") {
    for (int b = 1; b <= 4; ++b) {
        LoopPath fwd = spin::phi_loop(1.1, 0.9, 512);
        LoopPath back = fwd;
        back.at = [f = fwd.at](double s) { return f(s == 0 ? 0.0 : 1.0 - s); };
        const auto a = adiabatic_berry_phase(spin::effective_builder(0.3), fwd, b);
        const auto r = adiabatic_berry_phase(spin::effective_builder(0.3), back, b);
        CHECK(phase_dist(a.geometric, -r.geometric) < 1e-10);
    }
}

TEST_CASE("Hermitian limit has no imaginary contamination") {
    for (int b = 1; b <= 4; ++b) {
        const auto r = adiabatic_berry_phase(spin::effective_builder(0), spin::phi_loop(0.7, 1.1, 256), b);
        CHECK(std::abs(r.imaginary) < 1e-10);
    }
}

TEST_CASE("loop errors") {
    SUBCASE("degenerate spectrum") {
        try {
            adiabatic_berry_phase(spin::effective_builder(0), spin::phi_loop(1.0, 0.0, 32), 1);
            FAIL("expected Degenerate");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Degenerate);
        }
    }
    SUBCASE("coarse loop loses the branch") {
        // second sample sits in the Fourier basis: every overlap is 1/sqrt(8)
        LoopPath loop;
        loop.points = 2;
        loop.at = [](double s) { return Point{s}; };
        const MatrixBuilder h = [](const Point& x) {
            const int n = 8;
            CMatrix d = CMatrix::Zero(n, n), f(n, n);
            for (int i = 0; i < n; ++i) {
                d(i, i) = i + 1.0;
                for (int j = 0; j < n; ++j) f(i, j) = std::polar(1 / std::sqrt(8.0), 2 * kPi * i * j / n);
            }
            return x[0] < 0.25 ? d : CMatrix(f * d * f.adjoint());
        };
        try {
            adiabatic_berry_phase(h, loop, 1);
            FAIL("expected BranchLost");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BranchLost);
        }
    }
    SUBCASE("branch out of range") {
        CHECK_THROWS_AS(adiabatic_berry_phase(spin::effective_builder(0.1), spin::phi_loop(1, 1, 16), 5), Error);
    }
}

TEST_CASE("no-jump phase over a vanishing interval") {
    const LindbladModel m = spin::lindblad_model(0.3);
    auto path = [](double) { return Point{0.8, 0.2, 1.0}; };
    std::mt19937_64 rng(31);
    const BipartiteState psi(2, 2, oracle::random_vector(rng, 4).normalized());
    const auto r = nojump_geometric_phase(m, path, 1e-6, psi, 1);
    CHECK(std::abs(r.geometric) < 1e-8);
}

TEST_CASE("no-jump phase of a stationary eigenstate is zero") {
    const LindbladModel m = spin::lindblad_model(0.0);
    const Point x{0.8, 0.2, 1.0};
    const auto es = eig_general(m.hamiltonian(x));
    const BipartiteState psi(2, 2, es.rights[1]);
    const auto r = nojump_geometric_phase(m, [&](double) { return x; }, 30, psi, 6000);
    CHECK(std::abs(r.geometric) < 1e-8);
    CHECK(phase_dist(r.dynamical, 30 * es.values[1].real()) < 1e-10);
    CHECK(phase_dist(r.geometric, r.geometric_unwrapped) < 1e-10);
}

TEST_CASE("finite-time loops match the co-rotating frame solution") {
    const Eigen::VectorXd k = (Eigen::VectorXd(4) << 0, 1, -1, 0).finished();
    const LindbladModel m = spin::lindblad_model(0.0);
    SUBCASE("single spin") {
        const double th = kPi / 3;
        const CVector v = kron(aligned_up(th, 0), (CVector(2) << 0, 1).finished());
        for (double T : {20.0, 80.0}) {
            auto path = [&](double t) { return Point{th, 2 * kPi * t / T, 0.0}; };
            const auto r = nojump_geometric_phase(m, path, T, BipartiteState(2, 2, v), static_cast<int>(100 * T));
            const auto ex = oracle::rotating_frame_phase(m.hamiltonian({th, 0, 0}), k, T, v);
            CHECK(phase_dist(r.dynamical, ex.dynamical) < 1e-6);
            CHECK(phase_dist(r.geometric, ex.geometric) < 1e-6);
        }
    }
    SUBCASE("coupled pair") {
        const double th = kPi / 4, g = 1.0;
        const CVector v = eig_general(m.hamiltonian({th, 0, g})).rights[0];
        for (double T : {20.0, 80.0}) {
            auto path = [&](double t) { return Point{th, 2 * kPi * t / T, g}; };
            const auto r = nojump_geometric_phase(m, path, T, BipartiteState(2, 2, v), static_cast<int>(100 * T));
            const auto ex = oracle::rotating_frame_phase(m.hamiltonian({th, 0, g}), k, T, v);
            CHECK(phase_dist(r.geometric, ex.geometric) < 1e-6);
        }
    }
}

TEST_CASE("slow closed-system loop approaches the solid angle") {
    // the non-adiabatic correction is first order in 1/T
    const double th = kPi / 3;
    const LindbladModel m = spin::lindblad_model(0.0);
    CVector v = kron(aligned_up(th, 0), (CVector(2) << 0, 1).finished());
    const BipartiteState psi(2, 2, v);
    const double target = -kPi * (1 - std::cos(th));
    double prev = 1e9;
    for (double T : {50.0, 200.0, 800.0}) {
        auto path = [&](double t) { return Point{th, 2 * kPi * t / T, 0.0}; };
        const auto r = nojump_geometric_phase(m, path, T, psi, static_cast<int>(40 * T));
        const double err = phase_dist(r.geometric, target);
        CHECK(err < prev);
        if (prev < 1e9) CHECK(err < 0.3 * prev);
        prev = err;
    }
}

TEST_CASE("slow Hermitian loop of a coupled branch approaches the holonomy") {
    const double th = kPi / 4, g = 1.0;
    const auto es = eig_general(spin::effective_hamiltonian({th, 0, g, 0}));
    const BipartiteState psi(2, 2, es.rights[0]);
    const double target =
        adiabatic_berry_phase(spin::effective_builder(0), spin::phi_loop(th, g, 1024), 1).geometric;
    const LindbladModel m = spin::lindblad_model(0.0);
    double prev = 1e9;
    for (double T : {100.0, 400.0, 1600.0}) {
        auto path = [&](double t) { return Point{th, 2 * kPi * t / T, g}; };
        const double err = phase_dist(nojump_geometric_phase(m, path, T, psi, static_cast<int>(50 * T)).geometric, target);
        CHECK(err < prev);
        if (prev < 1e9) CHECK(err < 0.3 * prev);
        prev = err;
    }
}

TEST_CASE("no-jump phase preconditions") {
    const LindbladModel m = spin::lindblad_model(0.1);
    auto path = [](double) { return Point{0.8, 0.2, 1.0}; };
    CVector v = CVector::Zero(4);
    v(0) = 2;
    CHECK_THROWS_AS(nojump_geometric_phase(m, path, 1, BipartiteState(2, 2, v), 10), Error);
}

TEST_CASE("jump phase examples") {
    const CMatrix sm = spin::sigma_minus_a();
    const double r = 1 / std::sqrt(2.0);
    CVector v = CVector::Zero(4);
    v(1) = r;
    v(3) = r;
    CHECK(std::abs(jump_phase_total(BipartiteState(2, 2, v), sm)) < 1e-15);
    v(3) = I1 * r;
    CHECK(std::abs(jump_phase_total(BipartiteState(2, 2, v), sm) + kPi / 2) < 1e-15);
    v = CVector::Zero(4);
    v(1) = 1;
    try {
        jump_phase_total(BipartiteState(2, 2, v), sm);
        FAIL("expected ZeroExpectation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroExpectation);
    }
}

TEST_CASE("subsystem jump phase examples") {
    CMatrix s = CMatrix::Zero(2, 2);
    s(1, 0) = 1;
    const CMatrix rho = 0.5 * CMatrix::Ones(2, 2);
    CHECK(std::abs(jump_phase_subsystem(rho, s)) < 1e-15);
    CHECK_THROWS_AS(jump_phase_subsystem(0.5 * CMatrix::Identity(2, 2), s), Error);
}

TEST_CASE("jump phase locality over random states") {
    std::mt19937_64 rng(1234);
    CMatrix s = CMatrix::Zero(2, 2);
    s(1, 0) = 1;
    const CMatrix big = kron(s, CMatrix::Identity(2, 2));
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const BipartiteState psi(2, 2, oracle::random_vector(rng, 4));
        const double t = jump_phase_total(psi, big);
        const double sub = jump_phase_subsystem(partial_trace(psi, psi, Subsystem::A), s);
        worst = std::max(worst, phase_dist(t, sub));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("jump phases ignore global phase and positive scale") {
    std::mt19937_64 rng(55);
    const CMatrix sm = spin::sigma_minus_a();
    for (int i = 0; i < 50; ++i) {
        const CVector v = oracle::random_vector(rng, 4);
        const double a = jump_phase_total(BipartiteState(2, 2, v), sm);
        const double b = jump_phase_total(BipartiteState(2, 2, std::polar(2.5, 0.9 * i) * v), sm);
        CHECK(phase_dist(a, b) < 1e-13);
    }
}

TEST_CASE("subsystem split of a product branch") {
    // decoupled spins with distinct local fields: a single Schmidt term
    const MatrixBuilder h = [](const Point& x) {
        CMatrix b = CMatrix::Zero(2, 2);
        b(0, 0) = 0.3;
        b(1, 1) = -0.3;
        return CMatrix(kron(spin::field_term(x[0], x[1]), CMatrix::Identity(2, 2)) +
                       kron(CMatrix::Identity(2, 2), b));
    };
    const double th = 1.0;
    const LoopPath loop = spin::phi_loop(th, 0, 256, false);
    const SubsystemPhaseSplit s = subsystem_phase_split(h, loop, 1, 2, 2);
    REQUIRE(s.weights.size() == 1);
    CHECK(std::abs(s.weights[0] - 1.0) < 1e-12);
    CHECK(std::abs(s.gamma_b[0]) < 1e-12);
    CHECK(phase_dist(s.recombined, s.gamma_a[0].real()) < 1e-12);
    CHECK(phase_dist(s.recombined, s.direct) < 1e-10);
    CHECK(phase_dist(s.direct, -kPi * (1 - std::cos(th))) < 1e-9);
}

TEST_CASE("subsystem split in the Hermitian limit") {
    for (auto [th, g] : {std::pair{0.8, 1.0}, {1.3, 0.7}, {2.2, 1.6}}) {
        for (int b = 1; b <= 4; ++b) {
            const SubsystemPhaseSplit s =
                subsystem_phase_split(spin::effective_builder(0), spin::phi_loop(th, g, 512), b, 2, 2);
            cplx wsum = 0;
            for (const auto& w : s.weights) {
                CHECK(std::abs(w.imag()) < 1e-10);
                wsum += w;
            }
            CHECK(std::abs(wsum - 1.0) < 1e-10);
            CHECK(phase_dist(s.recombined, s.direct) < 1e-8);
            CHECK(s.pairing_residual < 1e-12);
        }
    }
}

TEST_CASE("subsystem split with decay keeps unit total weight") {
    const SubsystemPhaseSplit s =
        subsystem_phase_split(spin::effective_builder(0.3), spin::phi_loop(0.8, 1.0, 512), 1, 2, 2);
    cplx wsum = 0;
    for (const auto& w : s.weights) wsum += w;
    CHECK(std::abs(wsum - 1.0) < 1e-10);
    CHECK(s.pairing_residual < 1e-12);
    // with decay the weights pick up phases
    CHECK(std::abs(s.weights[0].imag()) > 1e-4);
    CHECK(phase_dist(s.direct, rotation_oracle(0.8, 1.0, 0.3, 1)) < 1e-9);
}

TEST_CASE("subsystem split rejects drifting weights") {
    // g varies around the loop, so the entanglement does too
    LoopPath loop;
    loop.points = 64;
    loop.at = [](double s) { return Point{1.0, 2 * kPi * s, 1.0 + 0.3 * std::sin(2 * kPi * s)}; };
    try {
        subsystem_phase_split(spin::effective_builder(0.1), loop, 1, 2, 2);
        FAIL("expected WeightsVary");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::WeightsVary);
    }
}
