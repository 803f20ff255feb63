#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qtgp/linalg.hpp"

namespace qtgp {

// A point in control-parameter space. The spin model uses (theta, phi, g).
using Point = std::vector<double>;

enum class JumpTag { SubsystemA, SubsystemB, Global };

struct JumpOperator {
    CMatrix op;  // full-space matrix
    JumpTag tag = JumpTag::Global;
};

struct LindbladModel {
    std::function<CMatrix(const Point&)> hamiltonian;
    std::vector<JumpOperator> jump_ops;
    int dim_a = 1;
    int dim_b = 1;

    int dim() const { return dim_a * dim_b; }
    // Hermiticity of H(x) and the tensor structure of tagged jump operators.
    void validate(const Point& x) const;
};

struct JumpEvent {
    double time;
    int op_index;
};

struct TrajectoryRecord {
    std::vector<JumpEvent> jump_events;
    double duration = 0;
    int steps = 0;
};

using TimeMatrix = std::function<CMatrix(double)>;

CMatrix effective_hamiltonian(const LindbladModel& model, const Point& x);

// RK4 on i d|psi>/dt = H(t)|psi>. Unnormalized result.
BipartiteState propagate_nojump(const TimeMatrix& h_eff, const BipartiteState& psi0, double t0, double t1,
                                int steps);

// Same integration, calling visit(k, t_k, psi_k) for k = 0..steps.
void propagate_visit(const TimeMatrix& h_eff, const BipartiteState& psi0, double t0, double t1, int steps,
                     const std::function<void(int, double, const CVector&)>& visit);

std::pair<BipartiteState, double> apply_jump(const BipartiteState& psi, const CMatrix& gamma);

CMatrix discrete_step_map(const CMatrix& rho, const LindbladModel& model, const Point& x, double dt);

// First t with |psi(t)|^2 = u; nullopt when no jump happens before T.
std::optional<double> sample_jump_time(const TimeMatrix& h_eff, const BipartiteState& psi0, double T, double u,
                                       int steps = 10000);

// (x >> 11 + 1/2) * 2^-53: strictly inside (0, 1)
double uniform_open(std::uint64_t bits);

}  // namespace qtgp
