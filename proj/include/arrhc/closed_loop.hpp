#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "arrhc/horizon_qp.hpp"
#include "arrhc/plant.hpp"
#include "arrhc/replay.hpp"

namespace arrhc {

/// Actuator-side plan buffer. `age` counts steps since the buffered plan
/// arrived and equals s(k) while under attack.
struct ActuatorState {
  std::optional<Plan> buffer;
  int age = 0;
};

struct ActuatorOutput {
  Vector u;
  ActuatorState state;
};

/// Fresh delivery: apply its first element and buffer it. Attack: advance
/// the age and apply the buffered element for the current instant. Throws
/// ResilienceViolation when the buffer runs out and, if `now` is given,
/// ProtocolError when the buffered plan does not cover time `now`.
ActuatorOutput actuator_step(const ActuatorState& state, const Plan& delivered, bool attacked,
                             std::optional<long> now = std::nullopt);

struct TraceRow {
  long k = 0;
  int theta = 0;
  int s = 0;
  Vector x;
  Vector u;
  double lyap = 0.0;        ///< V_{N - s(k-1)}(x(k)); NaN when not monitored
  double stage_cost = 0.0;  ///< |x|_P^2 + |u|_Q^2
  double envelope = std::numeric_limits<double>::quiet_NaN();  ///< gamma^k V_N(x(0))
  double value_N = 0.0;     ///< V_N(x(k)) from the operator's solve
  long plan_created_at = 0; ///< creation time of the plan u(k) was taken from
};

struct ClosedLoopTrace {
  int N = 0;
  int S = 0;
  std::vector<TraceRow> rows;
  Vector x_final;  ///< x(T)
  double V0 = 0.0; ///< V_N(x(0))
};

struct ClosedLoopOptions {
  std::optional<double> gamma;  ///< fills the envelope column
  /// Solve the extra (N - s)-QP for the Lyapunov column on attack steps.
  bool monitor_lyapunov = true;
  /// Stop once |x(k)|_P^2 < 1e-12 |x(0)|_P^2.
  bool stop_when_converged = false;
  SolverSettings solver;
};

/// Runs the protocol for schedule.T() steps: the operator solves the N-QP at
/// every step and transmits the whole plan, the channel forwards or replays,
/// the actuator applies. Throws InfeasibleSeedError for x0 outside X0,
/// DomainError when N < S + 1, SolverError if a solve fails and
/// ResilienceViolation if a state leaves X0.
ClosedLoopTrace run_closed_loop(const SystemSpec& spec, int N, const AttackSchedule& schedule, const Vector& x0,
                                const ClosedLoopOptions& options = {});

struct DecayReport {
  double max_ratio = 0.0;          ///< max_k lyap(k) / (gamma^k V0)
  std::optional<long> first_violation;
  bool ok() const noexcept { return !first_violation; }
};

/// Checks lyap(k) <= gamma^k V0 (1 + 1e-6) at every row.
DecayReport verify_decay(const ClosedLoopTrace& trace, double gamma);

/// Checks lyap(c' + 1) <= gamma_hat lyap(c) for consecutive idle-block
/// starts c < c'. Rows past the end are skipped.
DecayReport verify_block_decay(const ClosedLoopTrace& trace, double gamma_hat);

struct CostReport {
  double total = 0.0;   ///< simulated cost plus tail bound
  double tail = 0.0;    ///< phi_N |x(T)|^2 / (1 - gamma)
  double bound = 0.0;   ///< V0 / (1 - gamma)
  bool satisfied = false;
  bool truncated = false;  ///< tail above 1e-9 of the total
};

CostReport accumulated_cost(const ClosedLoopTrace& trace, double gamma, double phi_N);

/// First k with |x(k)|^2 < threshold, or nullopt.
std::optional<long> settling_time(const ClosedLoopTrace& trace, double threshold = 1e-6);

}  // namespace arrhc
