#include "arrhc/replay.hpp"

#include <algorithm>

#include "arrhc/errors.hpp"
#include "arrhc/rng.hpp"

namespace arrhc {

int update_counter(int s_prev, int theta) {
  if (s_prev < 0) throw DomainError("update_counter: negative counter");
  if (theta != 0 && theta != 1) throw DomainError("update_counter: theta must be 0 or 1");
  return theta == 1 ? s_prev + 1 : 0;
}

Delivery channel_step(const AttackerState& state, int theta, const Plan& message) {
  if (theta == 0) return {message, false, AttackerState{message, 0}};
  if (theta != 1) throw DomainError("channel_step: theta must be 0 or 1");
  if (!state.memory) throw ProtocolError("channel_step: attack with empty memory");
  return {*state.memory, true, AttackerState{state.memory, state.s + 1}};
}

std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::none: return "none";
    case ScheduleKind::periodic_burst: return "periodic_burst";
    case ScheduleKind::random: return "random";
    case ScheduleKind::greedy: return "greedy";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(std::string_view s) {
  if (s == "none") return ScheduleKind::none;
  if (s == "periodic_burst" || s == "periodic") return ScheduleKind::periodic_burst;
  if (s == "random") return ScheduleKind::random;
  if (s == "greedy") return ScheduleKind::greedy;
  throw DomainError("unknown schedule kind '" + std::string(s) + "'");
}

int max_run(const std::vector<int>& flags) {
  int best = 0, run = 0;
  for (int f : flags) {
    run = f ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

void AttackSchedule::validate() const {
  if (S < 0) throw DomainError("schedule: S must be non-negative");
  if (flags.empty()) throw DomainError("schedule: T must be at least 1");
  for (int f : flags)
    if (f != 0 && f != 1) throw DomainError("schedule: flags must be 0 or 1");
  if (flags[0] != 0) throw DomainError("schedule: theta(0) must be 0");
  const int r = max_run(flags);
  if (r > S)
    throw DomainError("schedule: run of " + std::to_string(r) + " consecutive attacks exceeds S = " +
                      std::to_string(S));
}

AttackSchedule gen_schedule(ScheduleKind kind, int S, int T, std::optional<int> period, std::uint64_t seed) {
  if (S < 0) throw DomainError("gen_schedule: S must be non-negative");
  if (T < 1) throw DomainError("gen_schedule: T must be at least 1");
  if (kind != ScheduleKind::none && S >= T)
    throw DomainError("gen_schedule: S >= T leaves no idle step after k = 0");

  AttackSchedule out;
  out.kind = kind;
  out.S = S;
  out.seed = seed;
  out.flags.assign(static_cast<std::size_t>(T), 0);
  auto& f = out.flags;

  switch (kind) {
    case ScheduleKind::none:
      break;
    case ScheduleKind::periodic_burst: {
      out.period = period.value_or(std::max(S, 1));
      if (out.period < 1) throw DomainError("gen_schedule: period must be at least 1");
      const int cycle = S + out.period;
      for (int k = 1; k < T; ++k) f[static_cast<std::size_t>(k)] = (k - 1) % cycle < S ? 1 : 0;
      break;
    }
    case ScheduleKind::random: {
      XorShift64Star rng(seed);
      int run = 0;
      for (int k = 1; k < T; ++k) {
        int bit = rng.bit() ? 1 : 0;
        if (bit && run == S) bit = 0;
        run = bit ? run + 1 : 0;
        f[static_cast<std::size_t>(k)] = bit;
      }
      break;
    }
    case ScheduleKind::greedy:
      for (int k = 1; k < T; ++k) f[static_cast<std::size_t>(k)] = (k - 1) % (S + 1) < S ? 1 : 0;
      break;
  }
  out.validate();
  return out;
}

nlohmann::json schedule_to_json(const AttackSchedule& s) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(s.kind));
  j["S"] = s.S;
  j["T"] = s.T();
  j["seed"] = s.seed;
  j["period"] = s.period;
  j["flags"] = s.flags;
  return j;
}

AttackSchedule schedule_from_json(const nlohmann::json& j) {
  AttackSchedule s;
  try {
    s.kind = schedule_kind_from_string(j.at("kind").get<std::string>());
    s.S = j.at("S").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.period = j.value("period", 0);
    s.flags = j.at("flags").get<std::vector<int>>();
    if (j.contains("T") && j.at("T").get<int>() != s.T())
      throw DomainError("schedule: T does not match the number of flags");
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("schedule JSON: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace arrhc
