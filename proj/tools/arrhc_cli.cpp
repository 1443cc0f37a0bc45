// arrhc: certificates, closed-loop simulation, sweeps and resilience
// allocation for attack-resilient receding-horizon control.
//
// Exit codes: 0 ok, 1 usage or parse error, 2 invalid spec, 3 solver failure
// or failed certified check, 4 infeasible allocation.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arrhc/allocation.hpp"
#include "arrhc/certificates.hpp"
#include "arrhc/closed_loop.hpp"
#include "arrhc/errors.hpp"
#include "arrhc/plant.hpp"
#include "arrhc/replay.hpp"
#include "arrhc/trace_io.hpp"

namespace fs = std::filesystem;
using namespace arrhc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalidSpec = 2, kSolver = 3, kInfeasible = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

/// Parses a JSON file, reporting line and column on failure.
nlohmann::json read_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseFailure(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
}

/// "3", "1,2,5", "2-6" or mixtures such as "1-3,10".
std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      const auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        out.push_back(std::stoi(item));
      } else {
        const int a = std::stoi(item.substr(0, dash)), b = std::stoi(item.substr(dash + 1));
        if (b < a) throw UsageError("empty range '" + item + "'");
        for (int v = a; v <= b; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad integer list '" + s + "'");
    }
  }
  return out;
}

Vector parse_vector(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("bad number '" + item + "' in '" + s + "'");
    }
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SystemSpec load_spec(const std::string& path, bool repair, std::vector<SpecCheck>* log = nullptr) {
  const auto j = read_json(path);
  SystemParams params;
  try {
    params = params_from_json(j);
  } catch (const Error& e) {
    throw InvalidSpecError(e.what());
  }
  return SystemSpec::validate(params, repair ? GainRepair::lq : GainRepair::off, log);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "'");
}

std::string fmt(double v, const char* f = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

struct CommonOptions {
  std::string spec;
  bool repair_k = false;
  std::string lambda_mode = "proof";
  int n_cap = CertificateSet::kDefaultNCap;
  std::string out;
};

int cmd_validate(const CommonOptions& o) {
  std::vector<SpecCheck> log;
  std::optional<SystemSpec> spec;
  std::string failure;
  try {
    spec = load_spec(o.spec, o.repair_k, &log);
  } catch (const InvalidSpecError& e) {
    failure = e.what();
  } catch (const InstabilityError& e) {
    failure = e.what();
  }
  for (const auto& c : log) std::printf("[%s] %-18s %s\n", c.passed ? " ok " : "FAIL", c.name.c_str(), c.detail.c_str());
  if (!spec) {
    std::printf("invalid: %s\n", failure.c_str());
    if (!o.repair_k) std::printf("hint: --repair-k replaces an unstable K with the LQ gain for (P, Q)\n");
    return kInvalidSpec;
  }
  if (spec->gain_repaired()) {
    const Matrix& k = spec->K();
    std::printf("notice: K repaired to the LQ gain [");
    for (Eigen::Index j = 0; j < k.size(); ++j) std::printf("%s%.10g", j ? ", " : "", k.data()[j]);
    std::printf("]\n");
  }
  std::printf("valid\n");
  return kOk;
}

int cmd_certify(const CommonOptions& o, const std::string& n_list, const std::string& s_list) {
  const auto Ns = parse_int_list(n_list);
  const auto Ss = parse_int_list(s_list);
  if (Ns.empty() && Ss.empty()) throw UsageError("empty (N, S) grid");
  const auto spec = load_spec(o.spec, o.repair_k);

  std::vector<LambdaMode> modes;
  if (o.lambda_mode == "both") modes = {LambdaMode::proof, LambdaMode::table};
  else modes = {lambda_mode_from_string(o.lambda_mode)};

  nlohmann::json all;
  for (auto mode : modes) {
    const int horizon = std::max({o.n_cap, Ns.empty() ? 2 : *std::max_element(Ns.begin(), Ns.end()), 2});
    const CertificateSet cs(spec, mode, horizon);
    const auto report = certificate_report(cs, Ns, Ss, o.n_cap);
    std::printf("%s\n", render_certificate_table(report).c_str());
    all[std::string(to_string(mode))] = report;
  }
  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file_atomic(fs::path(o.out) / "certify.json", all.dump(2) + "\n");
  }
  return kOk;
}

struct SimRequest {
  int N = 0;
  int S = 0;
  ScheduleKind kind = ScheduleKind::greedy;
  std::uint64_t seed = 0;
  std::optional<int> period;
  std::optional<Vector> x0;
  int T = 100;
  bool monitor = true;
};

struct SimOutcome {
  ClosedLoopTrace trace;
  RunSummary summary;
  AttackSchedule schedule;
  std::optional<long> settle;
};

SimOutcome simulate_one(const SystemSpec& spec, const CertificateSet& cs, const SimRequest& r, int n_cap) {
  SimOutcome out;
  out.schedule = gen_schedule(r.kind, r.S, r.T, r.period, r.seed);
  Vector x0;
  if (r.x0) {
    x0 = *r.x0;
    if (x0.size() != spec.n()) throw UsageError("--x0 needs " + std::to_string(spec.n()) + " entries");
    if (!in_X0(spec, x0).inside) throw UsageError("--x0 is outside X0");
  } else {
    // Initial state drawn near the boundary of X0 from a stream separate from the schedule's.
    XorShift64Star rng(r.seed ^ 0x5DEECE66DULL);
    x0 = sample_X0(spec, rng, 0.999, true);
  }

  RunSummary& sum = out.summary;
  sum.N = r.N;
  sum.S = r.S;
  ClosedLoopOptions opt;
  opt.monitor_lyapunov = r.monitor;
  if (r.N >= r.S + 2 && r.N <= cs.max_horizon()) {
    const double g = cs.gamma(r.N, r.S);
    if (g < 1) {
      sum.gamma = g;
      opt.gamma = g;
    }
  }
  try {
    sum.Nstar = cs.Nstar(r.S, n_cap);
  } catch (const NotFoundError&) {
  }
  out.trace = run_closed_loop(spec, r.N, out.schedule, x0, opt);
  for (const auto& row : out.trace.rows) sum.total_cost += row.stage_cost;
  out.settle = settling_time(out.trace);

  sum.certified = sum.Nstar && r.N >= *sum.Nstar + 1 && sum.gamma;
  if (sum.certified) {
    const auto cost = accumulated_cost(out.trace, *sum.gamma, cs.phi(r.N));
    sum.total_cost = cost.total;
    sum.cost_bound = cost.bound;
    sum.cost_ok = cost.satisfied;
    sum.decay_ok = verify_decay(out.trace, *sum.gamma).ok();
  }
  return out;
}

int cmd_simulate(const CommonOptions& o, const SimRequest& r) {
  const auto spec = load_spec(o.spec, o.repair_k);
  const CertificateSet cs(spec, lambda_mode_from_string(o.lambda_mode), std::max(o.n_cap, r.N));
  const auto out = simulate_one(spec, cs, r, o.n_cap);
  const auto& s = out.summary;

  if (!o.out.empty()) {
    ensure_dir(o.out);
    write_file_atomic(fs::path(o.out) / "trace.csv", trace_to_csv(out.trace));
    write_file_atomic(fs::path(o.out) / "summary.json", summary_to_json(s).dump(2) + "\n");
  }

  std::printf("N = %d, S = %d, schedule = %s, T = %d, seed = %llu\n", r.N, r.S,
              std::string(to_string(r.kind)).c_str(), r.T, static_cast<unsigned long long>(r.seed));
  std::printf("attacks = %d, longest run = %d\n",
              static_cast<int>(std::count(out.schedule.flags.begin(), out.schedule.flags.end(), 1)),
              max_run(out.schedule.flags));
  std::printf("V_N(x0) = %s, |x(T)|^2 = %s, settling time = %s\n", fmt(out.trace.V0).c_str(),
              fmt(out.trace.x_final.squaredNorm(), "%.3e").c_str(),
              out.settle ? std::to_string(*out.settle).c_str() : "not reached");
  std::printf("N* = %s, gamma = %s\n", s.Nstar ? std::to_string(*s.Nstar).c_str() : "not found",
              s.gamma ? fmt(*s.gamma, "%.12g").c_str() : "-");
  if (!s.certified) {
    std::printf("uncertified: N < N*(S) + 1, checks skipped; total cost = %s\n", fmt(s.total_cost).c_str());
    return kOk;
  }
  std::printf("decay envelope: %s\n", *s.decay_ok ? "ok" : "VIOLATED");
  std::printf("cost %s <= bound %s: %s\n", fmt(s.total_cost).c_str(), fmt(*s.cost_bound).c_str(),
              *s.cost_ok ? "ok" : "VIOLATED");
  return *s.decay_ok && *s.cost_ok ? kOk : kSolver;
}

int cmd_sweep(const CommonOptions& o, const std::string& n_list, const std::string& s_list,
              const std::string& kinds, const std::string& seeds, int T, int jobs, bool monitor) {
  const auto Ns = parse_int_list(n_list);
  const auto Ss = parse_int_list(s_list);
  const auto seed_list = parse_int_list(seeds);
  std::vector<ScheduleKind> ks;
  {
    std::stringstream ss(kinds);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) ks.push_back(schedule_kind_from_string(item));
  }
  if (Ns.empty() || Ss.empty() || ks.empty() || seed_list.empty()) throw UsageError("empty sweep grid");
  if (o.out.empty()) throw UsageError("sweep needs --out");

  const auto spec = load_spec(o.spec, o.repair_k);
  const int horizon = std::max(o.n_cap, *std::max_element(Ns.begin(), Ns.end()));
  const CertificateSet cs(spec, lambda_mode_from_string(o.lambda_mode), horizon);

  struct Cell {
    SimRequest req;
    std::optional<SimOutcome> result;
    std::string error;
  };
  std::vector<Cell> cells;
  for (int N : Ns)
    for (int S : Ss)
      for (auto k : ks)
        for (int sd : seed_list) {
          SimRequest r;
          r.N = N;
          r.S = S;
          r.kind = k;
          r.seed = static_cast<std::uint64_t>(sd);
          r.T = T;
          r.monitor = monitor;
          cells.push_back({r, std::nullopt, {}});
        }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        cells[i].result = simulate_one(spec, cs, cells[i].req, o.n_cap);
      } catch (const std::exception& e) {
        cells[i].error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  auto cell_str = [](const auto& o) { return o ? format_double(static_cast<double>(*o)) : std::string(); };
  auto bool_str = [](const std::optional<bool>& b) { return b ? (*b ? "true" : "false") : ""; };
  std::string csv = "N,S,schedule,seed,certified,gamma,Nstar,total_cost,cost_bound,decay_ok,cost_ok,settling_time,error\n";
  nlohmann::json rows = nlohmann::json::array();
  int failures = 0;
  for (const auto& c : cells) {
    const auto& r = c.req;
    csv += std::to_string(r.N) + ',' + std::to_string(r.S) + ',' + std::string(to_string(r.kind)) + ',' +
           std::to_string(r.seed) + ',';
    nlohmann::json row;
    row["schedule"] = std::string(to_string(r.kind));
    row["seed"] = r.seed;
    if (c.result) {
      const auto& s = c.result->summary;
      csv += std::string(s.certified ? "true" : "false") + ',' + cell_str(s.gamma) + ',' +
             (s.Nstar ? std::to_string(*s.Nstar) : "") + ',' + format_double(s.total_cost) + ',' +
             cell_str(s.cost_bound) + ',' + bool_str(s.decay_ok) + ',' + bool_str(s.cost_ok) + ',' +
             (c.result->settle ? std::to_string(*c.result->settle) : "") + ",\n";
      row["summary"] = summary_to_json(s);
      if (s.certified && !(*s.decay_ok && *s.cost_ok)) ++failures;
    } else {
      std::string err = c.error;
      std::replace(err.begin(), err.end(), ',', ';');
      csv += ",,,,,,,," + err + '\n';
      row["N"] = r.N;
      row["S"] = r.S;
      row["error"] = c.error;
      ++failures;
    }
    rows.push_back(row);
  }
  ensure_dir(o.out);
  write_file_atomic(fs::path(o.out) / "sweep.csv", csv);
  write_file_atomic(fs::path(o.out) / "sweep.json", rows.dump(2) + "\n");
  std::printf("%zu cells on %d threads, %d failed or violated\n", cells.size(), n_threads, failures);
  return failures ? kSolver : kOk;
}

int cmd_allocate(const std::string& problem_path, const std::string& mode, const std::string& out) {
  if (mode != "nash" && mode != "social" && mode != "both") throw UsageError("--mode must be nash, social or both");
  const auto j = read_json(problem_path);
  AllocationProblem p;
  try {
    p = problem_from_json(j);
  } catch (const DomainError& e) {
    throw ParseFailure(problem_path + ": " + e.what());
  }

  nlohmann::json result;
  result["problem"] = problem_to_json(p);
  std::printf("%zu players, cap = %s, max total investment = %s\n", p.size(), fmt(p.cap).c_str(),
              fmt(p.max_total()).c_str());
  auto show = [&](const char* title, const AllocationResult& r) {
    std::printf("\n%s (%s after %d rounds, residual %.3e)\n", title, r.converged ? "converged" : "NOT converged",
                r.rounds, r.residual);
    std::printf("  %-12s %14s %14s %14s %14s\n", "player", "M", "cost", "dC/dM", "printed dC/dM");
    for (std::size_t i = 0; i < p.size(); ++i)
      std::printf("  %-12s %14.8g %14.8g %14.8g %14.8g\n", p.players[i].name.c_str(), r.M[i], r.costs[i],
                  grad_Ci(p, i, r.M), printed_grad_Ci(p, i, r.M));
    const double level = p.map(total_investment(r.M));
    std::printf("  total cost %.10g, security level %.6g, cap slack %.6g\n", r.total, level, p.cap - level);
  };
  std::optional<AllocationResult> nash, social;
  if (mode != "social") {
    nash = solve_nash(p);
    show("Nash equilibrium", *nash);
    result["nash"] = result_to_json(p, *nash);
  }
  if (mode != "nash") {
    social = solve_social(p);
    show("social optimum", *social);
    result["social"] = result_to_json(p, *social);
  }
  if (nash && social)
    std::printf("\nsocial total - Nash total = %.6g\n", social->total - nash->total);
  if (!out.empty()) {
    ensure_dir(out);
    write_file_atomic(fs::path(out) / "allocation.json", result.dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attack-resilient receding-horizon control toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string n_list = "5,10,15,100,1500", s_list = "1-5";
  SimRequest sim;
  std::string schedule = "greedy", x0_text, kinds = "greedy", seeds = "1";
  std::uint64_t seed = 1;
  int period = 0, jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool no_lyap = false;
  std::string problem, alloc_mode = "both";

  auto add_spec = [&](CLI::App* c) {
    c->add_option("--spec", common.spec, "System description (JSON)")->required()->check(CLI::ExistingFile);
    c->add_flag("--repair-k", common.repair_k, "Replace an unstable K by the LQ gain for (P, Q)");
  };
  auto add_lambda = [&](CLI::App* c, bool allow_both) {
    auto* opt = c->add_option("--lambda-mode", common.lambda_mode, "Contraction factor formula");
    opt->check(allow_both ? CLI::IsMember({"proof", "table", "both"}) : CLI::IsMember({"proof", "table"}));
    c->add_option("--N-cap", common.n_cap, "Largest horizon scanned for N*(S)")->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate", "Check a system description");
  add_spec(validate);

  auto* certify = app.add_subcommand("certify", "Tabulate stability constants and horizon bounds");
  add_spec(certify);
  add_lambda(certify, true);
  certify->add_option("--N", n_list, "Horizons, e.g. 5,10,1300-1305");
  certify->add_option("--S", s_list, "Attack budgets, e.g. 1-6");
  certify->add_option("--out", common.out, "Directory for certify.json");

  auto* simulate = app.add_subcommand("simulate", "Run the closed loop under a replay schedule");
  add_spec(simulate);
  add_lambda(simulate, false);
  simulate->add_option("--N", sim.N, "Horizon")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--S", sim.S, "Maximum consecutive attacks")->required()->check(CLI::NonNegativeNumber);
  simulate->add_option("--schedule", schedule, "none | periodic_burst | random | greedy")
      ->check(CLI::IsMember({"none", "periodic_burst", "random", "greedy"}));
  simulate->add_option("--seed", seed, "Seed for the schedule and the sampled x0");
  simulate->add_option("--period", period, "Idle steps between bursts (periodic_burst)");
  simulate->add_option("--x0", x0_text, "Initial state, comma separated; sampled near the boundary of X0 if omitted");
  simulate->add_option("--T", sim.T, "Number of steps")->check(CLI::PositiveNumber);
  simulate->add_option("--out", common.out, "Directory for trace.csv and summary.json");
  simulate->add_flag("--no-lyap", no_lyap, "Skip the extra (N - s)-QP behind the lyap column");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of simulations in parallel");
  add_spec(sweep);
  add_lambda(sweep, false);
  sweep->add_option("--N", n_list, "Horizons")->required();
  sweep->add_option("--S", s_list, "Attack budgets")->required();
  sweep->add_option("--schedule", kinds, "Comma separated schedule kinds");
  sweep->add_option("--seed", seeds, "Seeds, e.g. 1-4");
  sweep->add_option("--T", sim.T, "Number of steps")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", common.out, "Directory for sweep.csv and sweep.json")->required();
  sweep->add_flag("--no-lyap", no_lyap, "Skip the extra (N - s)-QP behind the lyap column");

  auto* allocate = app.add_subcommand("allocate", "Solve the resilience investment problem");
  allocate->add_option("--problem", problem, "Allocation problem (JSON)")->required()->check(CLI::ExistingFile);
  allocate->add_option("--mode", alloc_mode, "nash | social | both")->check(CLI::IsMember({"nash", "social", "both"}));
  allocate->add_option("--out", common.out, "Directory for allocation.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*validate) return cmd_validate(common);
    if (*certify) return cmd_certify(common, n_list, s_list);
    if (*simulate) {
      sim.kind = schedule_kind_from_string(schedule);
      sim.seed = seed;
      if (period > 0) sim.period = period;
      if (!x0_text.empty()) sim.x0 = parse_vector(x0_text);
      sim.monitor = !no_lyap;
      return cmd_simulate(common, sim);
    }
    if (*sweep) return cmd_sweep(common, n_list, s_list, kinds, seeds, sim.T, jobs, !no_lyap);
    if (*allocate) return cmd_allocate(problem, alloc_mode, common.out);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ParseFailure& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kUsage;
  } catch (const InvalidSpecError& e) {
    std::fprintf(stderr, "invalid spec: %s\n", e.what());
    return kInvalidSpec;
  } catch (const InstabilityError& e) {
    std::fprintf(stderr, "invalid spec: %s\n", e.what());
    return kInvalidSpec;
  } catch (const CertificateInvalid& e) {
    std::fprintf(stderr, "invalid spec: %s\n", e.what());
    return kInvalidSpec;
  } catch (const InfeasibleAllocation& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kInfeasible;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const InfeasibleSeedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolver;
  }
  return kUsage;
}
