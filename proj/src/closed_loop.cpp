#include "arrhc/closed_loop.hpp"

#include <cmath>
#include <string>

#include "arrhc/errors.hpp"

namespace arrhc {

ActuatorOutput actuator_step(const ActuatorState& state, const Plan& delivered, bool attacked,
                             std::optional<long> now) {
  if (!attacked) {
    if (delivered.inputs.empty()) throw ProtocolError("actuator: empty plan delivered");
    if (now && delivered.created_at != *now)
      throw ProtocolError("actuator: fresh plan created at " + std::to_string(delivered.created_at) +
                          " delivered at " + std::to_string(*now));
    return {delivered.inputs.front(), ActuatorState{delivered, 0}};
  }
  if (!state.buffer) throw ProtocolError("actuator: attack before any plan was received");
  const int age = state.age + 1;
  const auto n = static_cast<int>(state.buffer->inputs.size());
  if (age >= n)
    throw ResilienceViolation("actuator: buffer of length " + std::to_string(n) + " exhausted after " +
                              std::to_string(age) + " consecutive attacks");
  if (now && state.buffer->created_at + age != *now)
    throw ProtocolError("actuator: buffered plan from " + std::to_string(state.buffer->created_at) +
                        " indexed at age " + std::to_string(age) + " for time " + std::to_string(*now));
  return {state.buffer->inputs[static_cast<std::size_t>(age)], ActuatorState{state.buffer, age}};
}

ClosedLoopTrace run_closed_loop(const SystemSpec& spec, int N, const AttackSchedule& schedule, const Vector& x0,
                                const ClosedLoopOptions& options) {
  schedule.validate();
  if (N < 1) throw DomainError("run_closed_loop: N must be at least 1");
  if (N < schedule.S + 1)
    throw DomainError("run_closed_loop: N = " + std::to_string(N) + " is below S + 1 = " +
                      std::to_string(schedule.S + 1));
  if (x0.size() != spec.n()) throw DomainError("run_closed_loop: x0 has the wrong dimension");
  if (!in_X0(spec, x0).inside) throw InfeasibleSeedError("run_closed_loop: x0 is outside X0");

  HorizonSolver solver(spec, options.solver);
  ClosedLoopTrace trace;
  trace.N = N;
  trace.S = schedule.S;
  trace.rows.reserve(static_cast<std::size_t>(schedule.T()));

  const double p0 = quad_form(x0, spec.P());
  const double slack = options.solver.eps_feas + kX0Slack;
  AttackerState attacker;
  ActuatorState actuator;
  std::optional<WarmStart> warm;
  Vector x = x0;
  int s_prev = 0;

  for (long k = 0; k < schedule.T(); ++k) {
    if (options.stop_when_converged && k > 0 && quad_form(x, spec.P()) < 1e-12 * p0) break;

    const int theta = schedule.flags[static_cast<std::size_t>(k)];
    const QPSolution sol = solver.solve(x, N, warm ? &*warm : nullptr);
    if (sol.status != QPStatus::optimal)
      throw SolverError("N-QP at k = " + std::to_string(k) + " ended with status " + std::string(to_string(sol.status)));
    warm = shift_warm_start(spec, sol);

    TraceRow row;
    row.k = k;
    row.theta = theta;
    row.x = x;
    row.value_N = sol.value;
    if (s_prev == 0)
      row.lyap = sol.value;
    else if (options.monitor_lyapunov)
      row.lyap = solver.value(x, N - s_prev);
    else
      row.lyap = std::numeric_limits<double>::quiet_NaN();
    if (k == 0) trace.V0 = sol.value;
    if (options.gamma) row.envelope = std::pow(*options.gamma, static_cast<double>(k)) * trace.V0;

    const Delivery d = channel_step(attacker, theta, Plan{k, sol.inputs});
    attacker = d.state;
    const ActuatorOutput act = actuator_step(actuator, d.delivered, d.attacked, k);
    actuator = act.state;
    row.s = attacker.s;
    row.u = act.u;
    row.plan_created_at = actuator.buffer->created_at;
    row.stage_cost = quad_form(x, spec.P()) + quad_form(row.u, spec.Q());

    x = step(spec, x, row.u);
    if (quad_form(x, spec.Pbar()) > spec.c() + slack * std::max(1.0, spec.c()))
      throw ResilienceViolation("state left X0 at k = " + std::to_string(k + 1));
    s_prev = attacker.s;
    trace.rows.push_back(std::move(row));
  }
  trace.x_final = x;
  return trace;
}

DecayReport verify_decay(const ClosedLoopTrace& trace, double gamma) {
  DecayReport rep;
  double g = 1.0;
  for (const auto& row : trace.rows) {
    const double env = g * trace.V0;
    g *= gamma;
    if (std::isnan(row.lyap)) continue;
    if (env > 0) rep.max_ratio = std::max(rep.max_ratio, row.lyap / env);
    if (row.lyap > env * (1 + 1e-6) && !rep.first_violation) rep.first_violation = row.k;
  }
  return rep;
}

DecayReport verify_block_decay(const ClosedLoopTrace& trace, double gamma_hat) {
  DecayReport rep;
  const auto& r = trace.rows;
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (r[k].theta == 0 && (k == 0 || r[k - 1].theta == 1)) starts.push_back(k);
  for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
    const std::size_t a = starts[i], b = starts[i + 1] + 1;
    if (b >= r.size()) break;
    if (std::isnan(r[a].lyap) || std::isnan(r[b].lyap)) continue;
    const double ref = gamma_hat * r[a].lyap;
    if (ref > 0) rep.max_ratio = std::max(rep.max_ratio, r[b].lyap / ref);
    if (r[b].lyap > ref * (1 + 1e-6) && !rep.first_violation) rep.first_violation = r[b].k;
  }
  return rep;
}

CostReport accumulated_cost(const ClosedLoopTrace& trace, double gamma, double phi_N) {
  if (!(gamma > 0 && gamma < 1)) throw DomainError("accumulated_cost: gamma must be in (0, 1)");
  CostReport rep;
  double sum = 0.0;
  for (const auto& row : trace.rows) sum += row.stage_cost;
  rep.tail = trace.x_final.size() ? phi_N * trace.x_final.squaredNorm() / (1 - gamma) : 0.0;
  rep.total = sum + rep.tail;
  rep.bound = trace.V0 / (1 - gamma);
  rep.satisfied = rep.total <= rep.bound * (1 + 1e-6);
  rep.truncated = rep.tail > 1e-9 * rep.total;
  return rep;
}

std::optional<long> settling_time(const ClosedLoopTrace& trace, double threshold) {
  for (const auto& row : trace.rows)
    if (row.x.squaredNorm() < threshold) return row.k;
  if (trace.x_final.size() && trace.x_final.squaredNorm() < threshold) return static_cast<long>(trace.rows.size());
  return std::nullopt;
}

}  // namespace arrhc
