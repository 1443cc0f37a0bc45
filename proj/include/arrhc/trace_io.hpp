#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "arrhc/closed_loop.hpp"

namespace arrhc {

/// Shortest decimal that round-trips (std::to_chars); "nan", "inf", "-inf"
/// for non-finite values.
std::string format_double(double v);

/// k,theta,s,x_1..x_n,u_1..u_m,lyap,stage_cost,envelope
std::string trace_header(Eigen::Index n, Eigen::Index m);
std::string trace_to_csv(const ClosedLoopTrace& trace);

struct RunSummary {
  int N = 0;
  int S = 0;
  std::optional<double> gamma;
  std::optional<int> Nstar;
  double total_cost = 0.0;
  std::optional<double> cost_bound;
  std::optional<bool> decay_ok;
  std::optional<bool> cost_ok;
  bool certified = false;
};

/// Keys N, S, gamma, Nstar, total_cost, cost_bound, decay_ok, cost_ok,
/// certified; absent quantities are null.
nlohmann::json summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace arrhc
