// Command-line laboratory for the discrete-time Poisson channel: certified
// capacities, wiretap secrecy, identification-code experiments, leakage
// audits, and information-density concentration tables.
//
// Exit codes: 0 success, 1 certification or validation failure, 2 usage.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "dtpc/capacity.hpp"
#include "dtpc/converse.hpp"
#include "dtpc/id_code.hpp"
#include "dtpc/json_io.hpp"
#include "dtpc/secrecy.hpp"

using nlohmann::json;
using namespace dtpc;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalArgs {
  std::string out_dir = ".";
  std::string config_path;
  std::uint64_t seed = 1;
  int threads = 1;
  json config;  // null unless --config was given

  void load_config() {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + config_path);
    in >> config;
  }

  // flags win over the config file; the file wins over defaults
  template <typename T>
  void resolve(const CLI::Option* opt, const char* key, T& value) const {
    if (opt->count() > 0) return;
    if (!config.is_null() && config.contains(key)) value = config.at(key).get<T>();
  }
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// summaries must be byte-identical across reruns, so the wallclock goes to a
// sidecar file instead of the summary
void emit(const GlobalArgs& g, const std::string& command, const json& config, const json& result,
          const Timer& timer) {
  std::filesystem::create_directories(g.out_dir);
  json summary{{"command", command},
               {"version", kVersion},
               {"root_seed", g.seed},
               {"config", config},
               {"result", result}};
  write_text(std::filesystem::path(g.out_dir) / (command + ".json"), summary.dump(2) + "\n");
  json meta{{"wallclock_ms", timer.ms()}};
  write_text(std::filesystem::path(g.out_dir) / (command + ".meta.json"), meta.dump(2) + "\n");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_support_csv(const std::filesystem::path& path, const DiscreteInputDistribution& d) {
  std::string text = "x,p\n";
  for (int j = 0; j < d.size(); ++j)
    text += fmt_double(d.x[j]) + "," + fmt_double(d.p[j]) + "\n";
  write_text(path, text);
}

int require_params(const std::vector<std::pair<const char*, double>>& params) {
  for (const auto& [name, value] : params)
    if (std::isnan(value)) {
      std::fprintf(stderr, "missing required parameter --%s (flag or config file)\n", name);
      return 2;
    }
  return 0;
}

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------

struct CapacityArgs {
  double lambda0 = kUnset, p_max = kUnset, p_avg = kUnset;
  double gap_tol = 1e-6, kkt_tol = 1e-4;
  int grid = 2000;
};

int run_capacity(const GlobalArgs& g, const CapacityArgs& a) {
  if (int rc = require_params({{"lambda0", a.lambda0}, {"pmax", a.p_max}, {"pavg", a.p_avg}}))
    return rc;
  Timer timer;
  PoissonChannel ch = PoissonChannel::truncated(a.lambda0, a.p_max);
  CapacitySolveOptions opt;
  opt.ba_gap_tol_bits = a.gap_tol;
  opt.kkt_tol_bits = a.kkt_tol;
  opt.grid_points = a.grid;
  CapacityResult res = capacity(ch, PowerConstraint(a.p_max, a.p_avg), opt);

  json config{{"lambda0", a.lambda0}, {"p_max", a.p_max},   {"p_avg", a.p_avg},
              {"gap_tol", a.gap_tol}, {"kkt_tol", a.kkt_tol}, {"grid", a.grid}};
  emit(g, "capacity", config, json(res), timer);
  write_support_csv(std::filesystem::path(g.out_dir) / "support.csv", res.distribution);
  if (!res.certified) {
    std::fprintf(stderr, "capacity: optimality certificate failed (kkt=%g, gap=%g)\n",
                 res.kkt_max_violation_bits, res.ba_gap_bits);
    return 1;
  }
  std::printf("capacity_bits=%.9f support=%d certified\n", res.capacity_bits,
              res.distribution.size());
  return 0;
}

struct PairArgs {
  double lambda_b = kUnset, lambda_e = kUnset, p_max = kUnset, p_avg = kUnset;
  double gap_tol = 1e-6, kkt_tol = 1e-4;
};

int run_secrecy(const GlobalArgs& g, const PairArgs& a) {
  if (int rc = require_params({{"lambda-b", a.lambda_b},
                               {"lambda-e", a.lambda_e},
                               {"pmax", a.p_max},
                               {"pavg", a.p_avg}}))
    return rc;
  Timer timer;
  WiretapPair wp{PoissonChannel::truncated(a.lambda_b, a.p_max),
                 PoissonChannel::truncated(a.lambda_e, a.p_max)};
  CapacitySolveOptions opt;
  opt.ba_gap_tol_bits = a.gap_tol;
  opt.kkt_tol_bits = a.kkt_tol;
  CapacityResult res = secrecy_capacity(wp, PowerConstraint(a.p_max, a.p_avg), opt);

  json config{{"lambda_b", a.lambda_b}, {"lambda_e", a.lambda_e}, {"p_max", a.p_max},
              {"p_avg", a.p_avg},       {"gap_tol", a.gap_tol},   {"kkt_tol", a.kkt_tol}};
  emit(g, "secrecy", config, json(res), timer);
  write_support_csv(std::filesystem::path(g.out_dir) / "support.csv", res.distribution);
  if (!res.certified) {
    std::fprintf(stderr, "secrecy: stationarity certificate failed (kkt=%g)\n",
                 res.kkt_max_violation_bits);
    return 1;
  }
  std::printf("secrecy_capacity_bits=%.9f certified\n", res.capacity_bits);
  return 0;
}

int run_sid(const GlobalArgs& g, const PairArgs& a) {
  if (int rc = require_params({{"lambda-b", a.lambda_b},
                               {"lambda-e", a.lambda_e},
                               {"pmax", a.p_max},
                               {"pavg", a.p_avg}}))
    return rc;
  Timer timer;
  WiretapPair wp{PoissonChannel::truncated(a.lambda_b, a.p_max),
                 PoissonChannel::truncated(a.lambda_e, a.p_max)};
  CapacitySolveOptions opt;
  opt.ba_gap_tol_bits = a.gap_tol;
  opt.kkt_tol_bits = a.kkt_tol;
  SidReport rep = sid_capacity(wp, PowerConstraint(a.p_max, a.p_avg), opt);

  json config{{"lambda_b", a.lambda_b}, {"lambda_e", a.lambda_e}, {"p_max", a.p_max},
              {"p_avg", a.p_avg},       {"gap_tol", a.gap_tol},   {"kkt_tol", a.kkt_tol}};
  emit(g, "sid", config, json(rep), timer);
  if (!rep.main.certified || !rep.secrecy.certified) {
    std::fprintf(stderr, "sid: certificate failed on a sub-solve\n");
    return 1;
  }
  std::printf("c_main=%.9f c_secrecy=%.9f c_sid=%.9f\n", rep.main.capacity_bits,
              rep.secrecy.capacity_bits, rep.sid_capacity_bits);
  return 0;
}

struct IdsimArgs {
  double lambda0 = 0.1, p_max = 30.0, p_avg = 30.0;
  int n = 64;
  std::uint64_t q = 257;
  int degree = 4;
  int bin_size = 1;
  long trials = 10000;
  int pairs = 256;
  double lambda1 = 0.05, lambda2 = 0.05, rate_margin = 0.8;
  bool trace_csv = false;
};

int run_idsim(const GlobalArgs& g, const IdsimArgs& a) {
  Timer timer;
  PoissonChannel ch = PoissonChannel::truncated(a.lambda0, a.p_max);
  PowerConstraint pc(a.p_max, a.p_avg);
  IdCodeSpec spec = build_id_code(ch, pc, a.n, a.q, a.degree, g.seed, a.bin_size, a.lambda1,
                                  a.lambda2, a.rate_margin);
  std::vector<TrialRow> trace;
  TrialReport rep = measure_errors(spec, ch, a.trials, g.seed, a.pairs, nullptr, 0, g.threads,
                                   a.trace_csv ? &trace : nullptr);

  json config{{"lambda0", a.lambda0}, {"p_max", a.p_max},     {"p_avg", a.p_avg},
              {"n", a.n},             {"q", a.q},             {"degree", a.degree},
              {"bin_size", a.bin_size}, {"trials", a.trials}, {"pairs", a.pairs},
              {"lambda1", a.lambda1}, {"lambda2", a.lambda2}, {"rate_margin", a.rate_margin}};
  json result(rep);
  result["rate_of"] = rate_of(spec);
  result["total_blocklength"] = spec.total_blocklength();
  emit(g, "idsim", config, result, timer);

  if (a.trace_csv) {
    std::string text = "trial,true_msg,candidate,accepted,first_kind,second_kind\n";
    for (const TrialRow& row : trace)
      text += std::to_string(row.trial) + "," + std::to_string(row.true_message) + "," +
              std::to_string(row.candidate) + "," + std::to_string(int(row.accepted)) + "," +
              std::to_string(int(row.first_kind_error)) + "," +
              std::to_string(int(row.second_kind_accept)) + "\n";
    write_text(std::filesystem::path(g.out_dir) / "trials.csv", text);
  }

  std::printf("first_kind=%.5f second_kind=%s trials=%ld\n", rep.first_kind_rate,
              rep.second_kind_rate ? fmt_double(*rep.second_kind_rate).c_str() : "n/a", rep.trials);
  const bool within = rep.first_kind_rate <= a.lambda1 &&
                      (!rep.second_kind_rate || *rep.second_kind_rate <= a.lambda2);
  if (!within) {
    std::fprintf(stderr, "idsim: empirical error rates exceeded the configured targets\n");
    return 1;
  }
  return 0;
}

struct LeakageArgs {
  double lambda_e = 10.0;
  int messages = 4;
  int n = 2;
  int support = 3;
  double eps = 0.1;  // per-letter peak as a fraction of lambda_e
  long mc_samples = 20000;
};

int run_leakage(const GlobalArgs& g, const LeakageArgs& a) {
  Timer timer;
  const double peak = a.eps * a.lambda_e;
  PoissonChannel eve = PoissonChannel::truncated(a.lambda_e, peak);
  auto ensemble = random_ensemble(a.messages, a.n, a.support, peak, g.seed);
  LeakageReport rep = leakage_report(ensemble, eve, a.mc_samples, g.seed);

  json config{{"lambda_e", a.lambda_e}, {"messages", a.messages},     {"n", a.n},
              {"support", a.support},   {"eps", a.eps},               {"mc_samples", a.mc_samples}};
  emit(g, "leakage", config, json(rep), timer);

  // per-event audit between the first two messages on the exact path
  if (a.n <= kExactBlockLimit) {
    EveOutputMeasure qi = exact_output_measure(ensemble[0], eve, 0);
    EveOutputMeasure qj = exact_output_measure(ensemble[1], eve, 1);
    std::string text = "event_id,q_i,q_j,abs_diff\n";
    for (Eigen::Index z = 0; z < qi.pmf.size(); ++z)
      text += std::to_string(z) + "," + fmt_double(qi.pmf[z]) + "," + fmt_double(qj.pmf[z]) + "," +
              fmt_double(std::fabs(qi.pmf[z] - qj.pmf[z])) + "\n";
    write_text(std::filesystem::path(g.out_dir) / "audit.csv", text);
  }

  if (rep.exact_mi_bits && *rep.exact_mi_bits > rep.chain_rule_bound_bits + 1e-9) {
    std::fprintf(stderr, "leakage: exact leakage exceeded the chain-rule bound\n");
    return 1;
  }
  std::printf("leakage path=%s chain_bound=%.6g bits\n", rep.path.c_str(),
              rep.chain_rule_bound_bits);
  return 0;
}

struct ConverseArgs {
  double lambda0 = 2.0, p_max = 1.0, p_avg = 1.0;
  std::vector<int> n_list{10, 100, 1000};
  double nu = 0.1;
  long samples = 100000;
};

int run_converse(const GlobalArgs& g, const ConverseArgs& a) {
  Timer timer;
  PoissonChannel ch = PoissonChannel::truncated(a.lambda0, a.p_max);
  PowerConstraint pc(a.p_max, a.p_avg);
  std::vector<ConverseRow> rows =
      converse_experiment(ch, pc, a.n_list, a.nu, a.samples, g.seed, nullptr, g.threads);

  json config{{"lambda0", a.lambda0}, {"p_max", a.p_max},   {"p_avg", a.p_avg},
              {"n_list", a.n_list},   {"nu", a.nu},         {"samples", a.samples}};
  json result{{"rows", rows}, {"gamma", gamma_bound(a.lambda0, a.p_max)}};
  emit(g, "converse", config, result, timer);

  std::string text = "n,nu,empirical_tail,chebyshev_bound,samples,seed\n";
  for (const ConverseRow& row : rows)
    text += std::to_string(row.n) + "," + fmt_double(row.nu) + "," +
            fmt_double(row.empirical_tail) + "," + fmt_double(row.chebyshev_bound) + "," +
            std::to_string(row.samples) + "," + std::to_string(row.seed) + "\n";
  write_text(std::filesystem::path(g.out_dir) / "converse.csv", text);

  for (const ConverseRow& row : rows) std::printf("n=%d tail=%g bound=%g\n", row.n,
                                                  row.empirical_tail, row.chebyshev_bound);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-time Poisson channel laboratory"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "root seed for every random stream");
  app.add_option("--threads", g.threads, "worker cap for Monte-Carlo loops");
  app.add_option("--config", g.config_path, "JSON config file (flags win)");

  CapacityArgs cap;
  auto* cap_cmd = app.add_subcommand("capacity", "certified constrained capacity");
  cap_cmd->fallthrough();
  auto* cap_l0 = cap_cmd->add_option("--lambda0", cap.lambda0, "dark current");
  auto* cap_pm = cap_cmd->add_option("--pmax", cap.p_max, "peak power");
  auto* cap_pa = cap_cmd->add_option("--pavg", cap.p_avg, "average power");
  auto* cap_gt = cap_cmd->add_option("--gap-tol", cap.gap_tol, "ascent bracket tolerance, bits");
  auto* cap_kt = cap_cmd->add_option("--kkt-tol", cap.kkt_tol, "certificate tolerance, bits");
  auto* cap_gr = cap_cmd->add_option("--grid", cap.grid, "initial grid size");

  PairArgs sec;
  auto* sec_cmd = app.add_subcommand("secrecy", "certified secrecy capacity of a degraded pair");
  sec_cmd->fallthrough();
  auto* sec_lb = sec_cmd->add_option("--lambda-b", sec.lambda_b, "main dark current");
  auto* sec_le = sec_cmd->add_option("--lambda-e", sec.lambda_e, "eavesdropper dark current");
  auto* sec_pm = sec_cmd->add_option("--pmax", sec.p_max, "peak power");
  auto* sec_pa = sec_cmd->add_option("--pavg", sec.p_avg, "average power");
  auto* sec_gt = sec_cmd->add_option("--gap-tol", sec.gap_tol, "ascent bracket tolerance, bits");
  auto* sec_kt = sec_cmd->add_option("--kkt-tol", sec.kkt_tol, "certificate tolerance, bits");

  PairArgs sid;
  auto* sid_cmd = app.add_subcommand("sid", "secure identification capacity dichotomy");
  sid_cmd->fallthrough();
  auto* sid_lb = sid_cmd->add_option("--lambda-b", sid.lambda_b, "main dark current");
  auto* sid_le = sid_cmd->add_option("--lambda-e", sid.lambda_e, "eavesdropper dark current");
  auto* sid_pm = sid_cmd->add_option("--pmax", sid.p_max, "peak power");
  auto* sid_pa = sid_cmd->add_option("--pavg", sid.p_avg, "average power");
  auto* sid_gt = sid_cmd->add_option("--gap-tol", sid.gap_tol, "ascent bracket tolerance, bits");
  auto* sid_kt = sid_cmd->add_option("--kkt-tol", sid.kkt_tol, "certificate tolerance, bits");

  IdsimArgs idsim;
  auto* id_cmd = app.add_subcommand("idsim", "identification-code error measurement");
  id_cmd->fallthrough();
  auto* id_l0 = id_cmd->add_option("--lambda0", idsim.lambda0, "dark current");
  auto* id_pm = id_cmd->add_option("--pmax", idsim.p_max, "peak power");
  auto* id_pa = id_cmd->add_option("--pavg", idsim.p_avg, "average power");
  auto* id_n = id_cmd->add_option("--n", idsim.n, "index blocklength");
  auto* id_q = id_cmd->add_option("--q", idsim.q, "prime field size");
  auto* id_d = id_cmd->add_option("--d", idsim.degree, "coloring degree");
  auto* id_b = id_cmd->add_option("--bins", idsim.bin_size, "dummy indices per color");
  auto* id_t = id_cmd->add_option("--trials", idsim.trials, "Monte-Carlo trials per error kind");
  auto* id_p = id_cmd->add_option("--pairs", idsim.pairs, "sampled candidate pairs");
  auto* id_l1 = id_cmd->add_option("--lambda1", idsim.lambda1, "first-kind target");
  auto* id_l2 = id_cmd->add_option("--lambda2", idsim.lambda2, "second-kind target");
  auto* id_rm = id_cmd->add_option("--rate-margin", idsim.rate_margin, "index-rate capacity margin");
  auto* id_csv = id_cmd->add_flag("--trace-csv", idsim.trace_csv, "write per-trial rows");

  LeakageArgs leak;
  auto* lk_cmd = app.add_subcommand("leakage", "eavesdropper leakage report");
  lk_cmd->fallthrough();
  auto* lk_le = lk_cmd->add_option("--lambda-e", leak.lambda_e, "eavesdropper dark current");
  auto* lk_m = lk_cmd->add_option("--messages", leak.messages, "ensemble size");
  auto* lk_n = lk_cmd->add_option("--n", leak.n, "blocklength");
  auto* lk_s = lk_cmd->add_option("--support", leak.support, "sequences per message");
  auto* lk_e = lk_cmd->add_option("--eps", leak.eps, "peak as a fraction of lambda_e");
  auto* lk_mc = lk_cmd->add_option("--mc-samples", leak.mc_samples, "samples on the MC path");

  ConverseArgs conv;
  auto* cv_cmd = app.add_subcommand("converse", "information-density concentration table");
  cv_cmd->fallthrough();
  auto* cv_l0 = cv_cmd->add_option("--lambda0", conv.lambda0, "dark current");
  auto* cv_pm = cv_cmd->add_option("--pmax", conv.p_max, "peak power");
  auto* cv_pa = cv_cmd->add_option("--pavg", conv.p_avg, "average power");
  auto* cv_n = cv_cmd->add_option("--n", conv.n_list, "blocklengths")->delimiter(',');
  auto* cv_nu = cv_cmd->add_option("--nu", conv.nu, "threshold offset above capacity, bits");
  auto* cv_s = cv_cmd->add_option("--samples", conv.samples, "Monte-Carlo samples per n");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    g.load_config();
    if (cap_cmd->parsed()) {
      g.resolve(cap_l0, "lambda0", cap.lambda0);
      g.resolve(cap_pm, "p_max", cap.p_max);
      g.resolve(cap_pa, "p_avg", cap.p_avg);
      g.resolve(cap_gt, "gap_tol", cap.gap_tol);
      g.resolve(cap_kt, "kkt_tol", cap.kkt_tol);
      g.resolve(cap_gr, "grid", cap.grid);
      return run_capacity(g, cap);
    }
    if (sec_cmd->parsed()) {
      g.resolve(sec_lb, "lambda_b", sec.lambda_b);
      g.resolve(sec_le, "lambda_e", sec.lambda_e);
      g.resolve(sec_pm, "p_max", sec.p_max);
      g.resolve(sec_pa, "p_avg", sec.p_avg);
      g.resolve(sec_gt, "gap_tol", sec.gap_tol);
      g.resolve(sec_kt, "kkt_tol", sec.kkt_tol);
      return run_secrecy(g, sec);
    }
    if (sid_cmd->parsed()) {
      g.resolve(sid_lb, "lambda_b", sid.lambda_b);
      g.resolve(sid_le, "lambda_e", sid.lambda_e);
      g.resolve(sid_pm, "p_max", sid.p_max);
      g.resolve(sid_pa, "p_avg", sid.p_avg);
      g.resolve(sid_gt, "gap_tol", sid.gap_tol);
      g.resolve(sid_kt, "kkt_tol", sid.kkt_tol);
      return run_sid(g, sid);
    }
    if (id_cmd->parsed()) {
      g.resolve(id_l0, "lambda0", idsim.lambda0);
      g.resolve(id_pm, "p_max", idsim.p_max);
      g.resolve(id_pa, "p_avg", idsim.p_avg);
      g.resolve(id_n, "n", idsim.n);
      g.resolve(id_q, "q", idsim.q);
      g.resolve(id_d, "degree", idsim.degree);
      g.resolve(id_b, "bin_size", idsim.bin_size);
      g.resolve(id_t, "trials", idsim.trials);
      g.resolve(id_p, "pairs", idsim.pairs);
      g.resolve(id_l1, "lambda1", idsim.lambda1);
      g.resolve(id_l2, "lambda2", idsim.lambda2);
      g.resolve(id_rm, "rate_margin", idsim.rate_margin);
      g.resolve(id_csv, "trace_csv", idsim.trace_csv);
      return run_idsim(g, idsim);
    }
    if (lk_cmd->parsed()) {
      g.resolve(lk_le, "lambda_e", leak.lambda_e);
      g.resolve(lk_m, "messages", leak.messages);
      g.resolve(lk_n, "n", leak.n);
      g.resolve(lk_s, "support", leak.support);
      g.resolve(lk_e, "eps", leak.eps);
      g.resolve(lk_mc, "mc_samples", leak.mc_samples);
      return run_leakage(g, leak);
    }
    if (cv_cmd->parsed()) {
      g.resolve(cv_l0, "lambda0", conv.lambda0);
      g.resolve(cv_pm, "p_max", conv.p_max);
      g.resolve(cv_pa, "p_avg", conv.p_avg);
      g.resolve(cv_n, "n_list", conv.n_list);
      g.resolve(cv_nu, "nu", conv.nu);
      g.resolve(cv_s, "samples", conv.samples);
      return run_converse(g, conv);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
