#include "arrhc/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arrhc/certificates.hpp"
#include "arrhc/errors.hpp"
#include "arrhc/plant.hpp"

namespace arrhc {

SecurityMap::Eval SecurityMap::eval(double y) const {
  if (!(y >= 0)) throw DomainError("security map: y must be non-negative");
  if (kind == Kind::affine) return {sigma0 + sigma1 * y, sigma1, 0.0};
  const double z = kappa * (y - y0);
  // log(1 + e^z) and the logistic function, both without overflow.
  const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  const double sig = z > 0 ? 1 / (1 + std::exp(-z)) : std::exp(z) / (1 + std::exp(z));
  return {sigma0 + sigma1 * sp / kappa, sigma1 * sig, sigma1 * kappa * sig * (1 - sig)};
}

double SecurityMap::max_total(double level, double y_hi) const {
  if ((*this)(0.0) > level) return -1.0;
  if ((*this)(y_hi) <= level) return y_hi;
  double lo = 0.0, hi = y_hi;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    ((*this)(mid) <= level ? lo : hi) = mid;
  }
  return lo;
}

void AllocationProblem::validate() const {
  if (players.empty()) throw DomainError("allocation: no players");
  for (const auto& pl : players) {
    const std::string who = "allocation: player '" + pl.name + "': ";
    if (!(pl.chi > 0 && pl.chi < 1)) throw DomainError(who + "chi must be in (0, 1)");
    if (!(pl.psi >= 0)) throw DomainError(who + "psi must be non-negative");
    if (!(pl.a > 0)) throw DomainError(who + "a must be positive");
    if (!(pl.M_min > 0 && pl.M_min < pl.M_max)) throw DomainError(who + "need 0 < M_min < M_max");
    if (pl.N < 1) throw DomainError(who + "N must be at least 1");
  }
  if (map.sigma0 < 0 || map.sigma1 < 0) throw DomainError("allocation: sigma0 and sigma1 must be non-negative");
  if (map.kind == SecurityMap::Kind::softplus && !(map.kappa > 0))
    throw DomainError("allocation: softplus kappa must be positive");
  if (!std::isfinite(cap)) throw DomainError("allocation: cap must be finite");
}

double AllocationProblem::max_total() const {
  double hi = 0.0;
  for (const auto& pl : players) hi += pl.M_max;
  return map.max_total(cap, hi);
}

double total_investment(const std::vector<double>& M) { return std::accumulate(M.begin(), M.end(), 0.0); }

bool AllocationProblem::feasible(const std::vector<double>& M, double slack) const {
  if (M.size() != players.size()) return false;
  for (std::size_t i = 0; i < M.size(); ++i)
    if (M[i] < players[i].M_min - slack || M[i] > players[i].M_max + slack) return false;
  return map(std::max(0.0, total_investment(M))) <= cap + slack;
}

namespace {

struct AttackTerm {
  double value, d1, d2;  ///< derivatives in y
};

AttackTerm attack_term(const Player& pl, const SecurityMap::Eval& s) {
  const double lc = std::log(pl.chi);
  const double t = pl.psi * std::exp((pl.N - s.value) * lc);
  const double L = std::log1p(t);
  const double t1 = -lc * s.d1 * t;
  const double t2 = -lc * (s.d2 * t + s.d1 * t1);
  const double L1 = t1 / (1 + t);
  const double L2 = (t2 * (1 + t) - t1 * t1) / ((1 + t) * (1 + t));
  const double f = (s.value + 1) * L;
  const double f1 = s.d1 * L + (s.value + 1) * L1;
  const double f2 = s.d2 * L + 2 * s.d1 * L1 + (s.value + 1) * L2;
  const double e = std::exp(f);
  return {e, e * f1, e * (f2 + f1 * f1)};
}

void check_index(const AllocationProblem& p, std::size_t i, const std::vector<double>& M) {
  if (i >= p.size()) throw DomainError("allocation: player index out of range");
  if (M.size() != p.size()) throw DomainError("allocation: investment vector has the wrong length");
}

}  // namespace

double cost_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M) {
  check_index(p, i, M);
  const auto& pl = p.players[i];
  return attack_term(pl, p.map.eval(total_investment(M))).value + 0.5 * pl.a * M[i] * M[i];
}

double grad_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M) {
  check_index(p, i, M);
  const auto& pl = p.players[i];
  return attack_term(pl, p.map.eval(total_investment(M))).d1 + pl.a * M[i];
}

double hess_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M) {
  check_index(p, i, M);
  const auto& pl = p.players[i];
  return attack_term(pl, p.map.eval(total_investment(M))).d2 + pl.a;
}

double printed_grad_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M) {
  check_index(p, i, M);
  const auto& pl = p.players[i];
  const auto s = p.map.eval(total_investment(M));
  const double lc = std::log(pl.chi);
  const double t = pl.psi * std::exp((pl.N - s.value) * lc);
  return -std::log1p(t) * std::pow(1 + t, s.value + 1) * lc * t * s.d1 * s.d1 + pl.a * M[i];
}

double total_cost(const AllocationProblem& p, const std::vector<double>& M) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += cost_Ci(p, i, M);
  return sum;
}

ConvexityReport check_convexity(const AllocationProblem& p, std::size_t i, const std::vector<double>& M, int grid) {
  check_index(p, i, M);
  if (grid < 3) throw DomainError("check_convexity: grid needs at least 3 points");
  const auto& pl = p.players[i];
  const double h = (pl.M_max - pl.M_min) / (grid - 1);
  ConvexityReport rep;
  rep.min_second_difference = INFINITY;
  std::vector<double> m = M;
  auto c = [&](double v) {
    m[i] = v;
    return cost_Ci(p, i, m);
  };
  for (int k = 1; k + 1 < grid; ++k) {
    const double v = pl.M_min + k * h;
    const double d2 = (c(v + h) - 2 * c(v) + c(v - h)) / (h * h);
    ++rep.points;
    rep.min_second_difference = std::min(rep.min_second_difference, d2);
    if (d2 < -1e-8) rep.violations.emplace_back(v, d2);
  }
  return rep;
}

namespace {

std::vector<double> lower(const AllocationProblem& p) {
  std::vector<double> v;
  for (const auto& pl : p.players) v.push_back(pl.M_min);
  return v;
}

std::vector<double> upper(const AllocationProblem& p) {
  std::vector<double> v;
  for (const auto& pl : p.players) v.push_back(pl.M_max);
  return v;
}

double budget_or_throw(const AllocationProblem& p) {
  p.validate();
  const auto lo = lower(p);
  const double Y = p.max_total();
  if (Y < 0 || total_investment(lo) > Y * (1 + 1e-12) + 1e-12)
    throw InfeasibleAllocation("allocation: the cap " + std::to_string(p.cap) +
                               " is violated even at minimal investment");
  return Y;
}

/// Minimizer of C_i over [lo, hi] in M_i with the others fixed.
double best_response(const AllocationProblem& p, std::size_t i, std::vector<double> M, double lo, double hi,
                     double tol) {
  auto g = [&](double v) {
    M[i] = v;
    return grad_Ci(p, i, M);
  };
  auto c = [&](double v) {
    M[i] = v;
    return cost_Ci(p, i, M);
  };
  if (hi <= lo) return lo;
  const double glo = g(lo), ghi = g(hi);
  if (glo >= 0 && ghi >= glo) return lo;
  if (ghi <= 0 && glo <= ghi) return hi;
  if (glo < 0 && ghi > 0) {
    double a = lo, b = hi;
    while (b - a > tol * std::max(1.0, std::abs(b))) {
      const double mid = 0.5 * (a + b);
      (g(mid) < 0 ? a : b) = mid;
    }
    return 0.5 * (a + b);
  }
  // Derivative sign pattern inconsistent with convexity: golden section.
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi, x1 = b - r * (b - a), x2 = a + r * (b - a), f1 = c(x1), f2 = c(x2);
  while (b - a > tol * std::max(1.0, std::abs(b))) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = c(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = c(x2);
    }
  }
  double best = 0.5 * (a + b);
  for (double v : {lo, hi})
    if (c(v) < c(best)) best = v;
  return best;
}

void fill_costs(const AllocationProblem& p, AllocationResult& r) {
  r.costs.clear();
  for (std::size_t i = 0; i < p.size(); ++i) r.costs.push_back(cost_Ci(p, i, r.M));
  r.total = std::accumulate(r.costs.begin(), r.costs.end(), 0.0);
}

}  // namespace

std::vector<double> project_budget(const std::vector<double>& z, const std::vector<double>& lo,
                                   const std::vector<double>& hi, double Y) {
  auto clip = [&](double tau) {
    std::vector<double> m(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) m[i] = std::clamp(z[i] - tau, lo[i], hi[i]);
    return m;
  };
  auto m = clip(0.0);
  if (total_investment(m) <= Y) return m;
  double a = 0.0, b = 1.0;
  while (total_investment(clip(b)) > Y) b *= 2;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (a + b);
    (total_investment(clip(mid)) > Y ? a : b) = mid;
  }
  return clip(b);
}

AllocationResult solve_nash(const AllocationProblem& p, double tol, int max_rounds) {
  const double Y = budget_or_throw(p);
  const auto lo = lower(p), hi = upper(p);
  const std::size_t n = p.size();

  AllocationResult r;
  r.M.resize(n);
  auto at = [&](double w) {
    for (std::size_t i = 0; i < n; ++i) r.M[i] = lo[i] + w * 0.5 * (hi[i] - lo[i]);
  };
  double w = 1.0;
  at(w);
  for (int k = 0; k < 200 && total_investment(r.M) > Y; ++k) at(w *= 0.5);
  if (total_investment(r.M) > Y) at(0.0);

  auto cap_for = [&](std::size_t i) { return std::min(hi[i], Y - (total_investment(r.M) - r.M[i])); };

  for (r.rounds = 1; r.rounds <= max_rounds; ++r.rounds) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = best_response(p, i, r.M, lo[i], std::max(lo[i], cap_for(i)), tol * 1e-2);
      change = std::max(change, std::abs(next - r.M[i]));
      r.M[i] = next;
    }
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  r.rounds = std::min(r.rounds, max_rounds);
  r.residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad_Ci(p, i, r.M);
    const double proj = std::clamp(r.M[i] - g, lo[i], std::max(lo[i], cap_for(i)));
    r.residual = std::max(r.residual, std::abs(r.M[i] - proj));
  }
  fill_costs(p, r);
  return r;
}

AllocationResult solve_social(const AllocationProblem& p, double tol, int max_iter) {
  const double Y = budget_or_throw(p);
  const auto lo = lower(p), hi = upper(p);
  const std::size_t n = p.size();

  auto gradient = [&](const std::vector<double>& M) {
    const double y = total_investment(M);
    const auto s = p.map.eval(y);
    double shared = 0.0;
    for (const auto& pl : p.players) shared += attack_term(pl, s).d1;
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) g[j] = shared + p.players[j].a * M[j];
    return g;
  };
  auto residual = [&](const std::vector<double>& M, const std::vector<double>& g) {
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j) z[j] = M[j] - g[j];
    const auto q = project_budget(z, lo, hi, Y);
    double res = 0.0;
    for (std::size_t j = 0; j < n; ++j) res = std::max(res, std::abs(M[j] - q[j]));
    return res;
  };

  AllocationResult r;
  std::vector<double> mid(n);
  for (std::size_t j = 0; j < n; ++j) mid[j] = 0.5 * (lo[j] + hi[j]);
  r.M = project_budget(mid, lo, hi, Y);
  double f = total_cost(p, r.M);
  double step = 1.0;
  for (r.rounds = 1; r.rounds <= max_iter; ++r.rounds) {
    const auto g = gradient(r.M);
    r.residual = residual(r.M, g);
    if (r.residual <= tol) {
      r.converged = true;
      break;
    }
    step = std::min(step * 2, 1e6);
    bool moved = false;
    for (int k = 0; k < 100; ++k, step *= 0.5) {
      std::vector<double> z(n);
      for (std::size_t j = 0; j < n; ++j) z[j] = r.M[j] - step * g[j];
      const auto cand = project_budget(z, lo, hi, Y);
      double dist = 0.0;
      for (std::size_t j = 0; j < n; ++j) dist += (r.M[j] - cand[j]) * (r.M[j] - cand[j]);
      const double fc = total_cost(p, cand);
      if (fc <= f - 0.5 * dist / step || dist == 0.0) {
        moved = dist > 0.0;
        r.M = cand;
        f = fc;
        break;
      }
    }
    if (!moved) {
      r.residual = residual(r.M, gradient(r.M));
      r.converged = r.residual <= tol;
      break;
    }
  }
  r.rounds = std::min(r.rounds, max_iter);
  fill_costs(p, r);
  return r;
}

AllocationProblem problem_from_json(const nlohmann::json& j) {
  AllocationProblem p;
  try {
    if (j.contains("security_map")) {
      const auto& m = j.at("security_map");
      const auto kind = m.value("kind", std::string("affine"));
      if (kind == "affine") p.map.kind = SecurityMap::Kind::affine;
      else if (kind == "softplus") p.map.kind = SecurityMap::Kind::softplus;
      else throw DomainError("allocation: unknown security map kind '" + kind + "'");
      p.map.sigma0 = m.value("sigma0", 0.0);
      p.map.sigma1 = m.value("sigma1", 1.0);
      p.map.kappa = m.value("kappa", 1.0);
      p.map.y0 = m.value("y0", 0.0);
    }
    for (const auto& pj : j.at("players")) {
      Player pl;
      pl.name = pj.value("name", "player" + std::to_string(p.players.size() + 1));
      pl.N = pj.at("N").get<int>();
      pl.a = pj.at("a").get<double>();
      pl.M_min = pj.at("M_min").get<double>();
      pl.M_max = pj.at("M_max").get<double>();
      if (pj.contains("spec")) {
        const auto repair = pj.value("repair_k", false) ? GainRepair::lq : GainRepair::off;
        const auto spec = SystemSpec::validate(params_from_json(pj.at("spec")), repair);
        const auto mode = lambda_mode_from_string(pj.value("lambda_mode", std::string("proof")));
        const CertificateSet cs(spec, mode, std::max(pl.N, 2));
        pl.psi = cs.psi();
        pl.chi = cs.chi();
        if (pl.N >= 3) pl.Sstar = cs.Sstar(pl.N);
      } else {
        pl.psi = pj.at("psi").get<double>();
        pl.chi = pj.at("chi").get<double>();
      }
      if (pj.contains("Sstar")) pl.Sstar = pj.at("Sstar").get<int>();
      p.players.push_back(pl);
    }
    if (j.contains("cap")) {
      p.cap = j.at("cap").get<double>();
    } else {
      double cap = INFINITY;
      for (const auto& pl : p.players) {
        if (!pl.Sstar) throw DomainError("allocation: no cap given and player '" + pl.name + "' has no S*");
        cap = std::min(cap, static_cast<double>(*pl.Sstar));
      }
      p.cap = cap;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("allocation JSON: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json problem_to_json(const AllocationProblem& p) {
  nlohmann::json j;
  j["security_map"] = {{"kind", p.map.kind == SecurityMap::Kind::affine ? "affine" : "softplus"},
                       {"sigma0", p.map.sigma0},
                       {"sigma1", p.map.sigma1},
                       {"kappa", p.map.kappa},
                       {"y0", p.map.y0}};
  j["cap"] = p.cap;
  j["players"] = nlohmann::json::array();
  for (const auto& pl : p.players) {
    nlohmann::json o = {{"name", pl.name}, {"psi", pl.psi}, {"chi", pl.chi},     {"N", pl.N},
                        {"a", pl.a},       {"M_min", pl.M_min}, {"M_max", pl.M_max}};
    if (pl.Sstar) o["Sstar"] = *pl.Sstar;
    j["players"].push_back(o);
  }
  return j;
}

nlohmann::json result_to_json(const AllocationProblem& p, const AllocationResult& r) {
  nlohmann::json j;
  j["M"] = r.M;
  j["costs"] = r.costs;
  j["total"] = r.total;
  j["security_level"] = p.map(total_investment(r.M));
  j["cap_slack"] = p.cap - p.map(total_investment(r.M));
  j["residual"] = r.residual;
  j["rounds"] = r.rounds;
  j["converged"] = r.converged;
  return j;
}

}  // namespace arrhc
