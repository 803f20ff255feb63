#pragma once

#include <array>
#include <string>
#include <vector>

#include "qtgp/geometric_phase.hpp"
#include "qtgp/linalg.hpp"
#include "qtgp/open_system.hpp"

namespace qtgp::spin {

// Two spin-1/2 particles, a driven by a field along n(theta, phi) and decaying,
// coupled to b by g (s_a^+ s_b^+ + h.c.). Basis |ee>, |eg>, |ge>, |gg>.
// Energies in units of the a-spin Zeeman half-splitting.
struct ModelParams {
    double theta = 0;
    double phi = 0;
    double g = 0;
    double kappa = 0;

    void validate() const;
    Point point() const { return {theta, phi, g}; }
};

CMatrix hamiltonian(const ModelParams& p);
// n.sigma on a single spin
CMatrix field_term(double theta, double phi);
CMatrix sigma_minus_a();  // s^- (x) 1

// Jump operator sqrt(2 kappa) s_a^-, so H_eff = H - i kappa |e><e|_a.
LindbladModel lindblad_model(double kappa);
CMatrix effective_hamiltonian(const ModelParams& p);

// Point (theta, phi, g) -> H_eff at fixed kappa.
MatrixBuilder effective_builder(double kappa);
// Point (theta, phi) -> n.sigma - i kappa |e><e| for the lone a spin.
MatrixBuilder single_spin_builder(double kappa);
// phi: 0 -> 2 pi at fixed theta (and g, when with_g)
LoopPath phi_loop(double theta, double g, int points, bool with_g = true);

enum class EigenPath { Analytic, NumericFallback };

struct AnalyticBranch {
    int index = 0;          // 1..4
    cplx energy;            // E_n, traceless part
    cplx eigenvalue;        // E_n - i kappa / 2
    std::array<cplx, 4> right{};  // (a, b, c, d) on |eg>, |ee>, |gg>, |ge>
    std::array<cplx, 4> left{};   // (A, B, C, D)
    double norm_right = 1;
    double norm_left = 1;
    EigenPath path = EigenPath::Analytic;

    CVector right_vector() const;  // unit norm, basis order
    CVector left_vector() const;   // unit norm, basis order
};

std::array<cplx, 4> analytic_energies(const ModelParams& p);
std::array<AnalyticBranch, 4> analytic_eigensystem(const ModelParams& p);

struct JumpTerms {
    cplx ac;  // a C*
    cplx bd;  // b D*
};
JumpTerms model_jump_terms(int branch, const ModelParams& p);
double model_jump_phase(int branch, const ModelParams& p);

struct SweepRow {
    double theta = 0;
    double kappa = 0;
    double g = 0;
    int branch = 0;
    PhaseReport report;
    std::string status = "ok";
};

// theta outer, kappa inner
std::vector<SweepRow> berry_sweep(const std::vector<double>& theta_grid, const std::vector<double>& kappa_grid,
                                  double g, int branch, int loop_points, int jobs = 1);

struct DiscontinuityConfig {
    double eps = 1e-3;
    double threshold = 0.5;
    double kappa_max = 5.0;
};

double discontinuity_indicator(double g, double kappa, int branch, int loop_points, double eps = 1e-3);
double critical_kappa(double g, int branch, double tol, int loop_points = 1024, const DiscontinuityConfig& cfg = {});

}  // namespace qtgp::spin
