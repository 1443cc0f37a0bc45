#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrhc/linalg.hpp"

namespace arrhc {

/// s(k) from s(k-1) and the attack flag.
int update_counter(int s_prev, int theta);

/// A control plan as transmitted by the operator: inputs for times
/// created_at, created_at + 1, ...
struct Plan {
  long created_at = 0;
  std::vector<Vector> inputs;
};

struct AttackerState {
  std::optional<Plan> memory;
  int s = 0;
};

struct Delivery {
  Plan delivered;
  bool attacked;  ///< true when `delivered` is a replayed copy
  AttackerState state;
};

/// One step of the replay attacker. theta = 0 forwards and records the
/// message; theta = 1 drops it and resends the stored one. Throws
/// ProtocolError when asked to attack with nothing stored.
Delivery channel_step(const AttackerState& state, int theta, const Plan& message);

enum class ScheduleKind { none, periodic_burst, random, greedy };
std::string_view to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(std::string_view s);

struct AttackSchedule {
  ScheduleKind kind = ScheduleKind::none;
  int S = 0;
  std::uint64_t seed = 0;
  int period = 0;  ///< idle steps between bursts (periodic_burst only)
  std::vector<int> flags;

  int T() const noexcept { return static_cast<int>(flags.size()); }
  /// Throws DomainError unless flags are 0/1, flags[0] = 0 and no run of
  /// ones is longer than S.
  void validate() const;
};

/// Longest run of consecutive ones.
int max_run(const std::vector<int>& flags);

/// none: all zeros. periodic_burst: from k = 1, S ones then `period` zeros,
/// repeated (period defaults to S). random: fair coin flips from the seeded
/// generator, a one that would extend a run past S is forced to zero.
/// greedy: from k = 1, S ones then a single zero, repeated.
/// For the attacking kinds S >= T is a DomainError.
AttackSchedule gen_schedule(ScheduleKind kind, int S, int T, std::optional<int> period = std::nullopt,
                            std::uint64_t seed = 0);

nlohmann::json schedule_to_json(const AttackSchedule& s);
AttackSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace arrhc
