#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qtgp/linalg.hpp"
#include "qtgp/open_system.hpp"

namespace qtgp {

// Closed curve X(s), s in [0, 1). Sample k sits at s = k / points, and
// sample `points` is sample 0 again, so closure holds exactly.
struct LoopPath {
    std::function<Point(double)> at;
    int points = 1024;
    std::string description;

    Point sample(int k) const { return at(static_cast<double>(k % points) / points); }
};

struct PhaseReport {
    double geometric = 0;  // (-pi, pi]
    double geometric_unwrapped = 0;
    double dynamical = 0;
    double total = 0;
    double imaginary = 0;  // non-Hermitian remainder of the holonomy (0 for Eq-3 runs)
    int branch = 0;
    std::string loop;
    int points = 0;
};

struct SubsystemPhaseSplit {
    std::vector<cplx> gamma_a;  // per Schmidt term
    std::vector<cplx> gamma_b;
    std::vector<cplx> weights;
    double recombined = 0;
    double direct = 0;            // holonomy of the full branch
    double pairing_residual = 0;  // |Tr_b|phi><Phi| - sum_j w_j |e_j><E_j|| at the loop start
};

using MatrixBuilder = std::function<CMatrix(const Point&)>;

// reduce to (-pi, pi]
double wrap_phase(double x);

// Discrete holonomy sum S for biorthogonal curves (rights[k], lefts[k]),
// k = 0..N-1, closed by index N == 0. gamma = -Im S, Re S is the decay part.
cplx holonomy_log(const std::vector<CVector>& rights, const std::vector<CVector>& lefts);

PhaseReport nojump_geometric_phase(const LindbladModel& model, const std::function<Point(double)>& path, double T,
                                   const BipartiteState& psi0, int steps);

// branch is 1-based, in eig_general order at the loop start
PhaseReport adiabatic_berry_phase(const MatrixBuilder& h_eff, const LoopPath& loop, int branch);

SubsystemPhaseSplit subsystem_phase_split(const MatrixBuilder& h_eff, const LoopPath& loop, int branch, int dim_a,
                                          int dim_b);

double jump_phase_total(const BipartiteState& psi, const CMatrix& gamma);
// arg <bra|gamma|ket>
double jump_phase_total(const BipartiteState& bra, const BipartiteState& ket, const CMatrix& gamma);
double jump_phase_subsystem(const CMatrix& rho_sub, const CMatrix& gamma_sub);

}  // namespace qtgp
