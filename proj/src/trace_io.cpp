#include "arrhc/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "arrhc/errors.hpp"

namespace arrhc {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trace_header(Eigen::Index n, Eigen::Index m) {
  std::string h = "k,theta,s";
  for (Eigen::Index i = 1; i <= n; ++i) h += ",x_" + std::to_string(i);
  for (Eigen::Index i = 1; i <= m; ++i) h += ",u_" + std::to_string(i);
  h += ",lyap,stage_cost,envelope";
  return h;
}

std::string trace_to_csv(const ClosedLoopTrace& trace) {
  const Eigen::Index n = trace.x_final.size();
  const Eigen::Index m = trace.rows.empty() ? 0 : trace.rows.front().u.size();
  std::string out = trace_header(n, m) + '\n';
  for (const auto& r : trace.rows) {
    out += std::to_string(r.k) + ',' + std::to_string(r.theta) + ',' + std::to_string(r.s);
    for (Eigen::Index i = 0; i < n; ++i) out += ',' + format_double(r.x(i));
    for (Eigen::Index i = 0; i < m; ++i) out += ',' + format_double(r.u(i));
    out += ',' + format_double(r.lyap) + ',' + format_double(r.stage_cost) + ',' + format_double(r.envelope) + '\n';
  }
  return out;
}

nlohmann::json summary_to_json(const RunSummary& s) {
  auto opt = [](const auto& o) -> nlohmann::json {
    if (o) return *o;
    return nullptr;
  };
  nlohmann::json j;
  j["N"] = s.N;
  j["S"] = s.S;
  j["gamma"] = opt(s.gamma);
  j["Nstar"] = opt(s.Nstar);
  j["total_cost"] = s.total_cost;
  j["cost_bound"] = opt(s.cost_bound);
  j["decay_ok"] = opt(s.decay_ok);
  j["cost_ok"] = opt(s.cost_ok);
  j["certified"] = s.certified;
  return j;
}

RunSummary summary_from_json(const nlohmann::json& j) {
  RunSummary s;
  try {
    s.N = j.at("N").get<int>();
    s.S = j.at("S").get<int>();
    if (!j.at("gamma").is_null()) s.gamma = j.at("gamma").get<double>();
    if (!j.at("Nstar").is_null()) s.Nstar = j.at("Nstar").get<int>();
    s.total_cost = j.at("total_cost").get<double>();
    if (!j.at("cost_bound").is_null()) s.cost_bound = j.at("cost_bound").get<double>();
    if (!j.at("decay_ok").is_null()) s.decay_ok = j.at("decay_ok").get<bool>();
    if (!j.at("cost_ok").is_null()) s.cost_ok = j.at("cost_ok").get<bool>();
    s.certified = j.value("certified", false);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("summary JSON: ") + e.what());
  }
  return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw Error("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot move " + tmp.string() + " to " + path.string());
  }
}

}  // namespace arrhc
