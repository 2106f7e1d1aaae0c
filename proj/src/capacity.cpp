#include "dtpc/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dtpc/info_math.hpp"
#include "dtpc/rng.hpp"

namespace dtpc {
namespace {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using RowFn = std::function<ArrayXd(double)>;

constexpr double kTinyLog = 1e-320;

ArrayXd safe_log(const ArrayXd& v) { return v.max(kTinyLog).log(); }

// Fixed-support problem data. For the secrecy objective `sub` holds the
// eavesdropper rows and scores become D_W - D_V - mu x; otherwise D_W - mu x.
struct SupportMats {
  VectorXd x;
  MatrixXd w, logw;
  VectorXd w_self;  // sum_y W log W per row
  bool has_sub = false;
  MatrixXd v, logv;
  VectorXd v_self;

  void build(const VectorXd& xs, const RowFn& wrow, const RowFn* vrow) {
    x = xs;
    const Eigen::Index g = xs.size();
    {
      ArrayXd first = wrow(xs[0]);
      w.resize(g, first.size());
      w.row(0) = first.matrix();
      for (Eigen::Index j = 1; j < g; ++j) w.row(j) = wrow(xs[j]).matrix();
      logw = w.array().max(kTinyLog).log().matrix();
      w_self = w.cwiseProduct(logw).rowwise().sum();
    }
    has_sub = vrow != nullptr;
    if (has_sub) {
      ArrayXd first = (*vrow)(xs[0]);
      v.resize(g, first.size());
      v.row(0) = first.matrix();
      for (Eigen::Index j = 1; j < g; ++j) v.row(j) = (*vrow)(xs[j]).matrix();
      logv = v.array().max(kTinyLog).log().matrix();
      v_self = v.cwiseProduct(logv).rowwise().sum();
    }
  }

  void keep(const std::vector<Eigen::Index>& idx) {
    const Eigen::Index g = static_cast<Eigen::Index>(idx.size());
    VectorXd x2(g);
    MatrixXd w2(g, w.cols()), logw2(g, w.cols());
    VectorXd ws2(g);
    MatrixXd v2, logv2;
    VectorXd vs2;
    if (has_sub) {
      v2.resize(g, v.cols());
      logv2.resize(g, v.cols());
      vs2.resize(g);
    }
    for (Eigen::Index k = 0; k < g; ++k) {
      x2[k] = x[idx[k]];
      w2.row(k) = w.row(idx[k]);
      logw2.row(k) = logw.row(idx[k]);
      ws2[k] = w_self[idx[k]];
      if (has_sub) {
        v2.row(k) = v.row(idx[k]);
        logv2.row(k) = logv.row(idx[k]);
        vs2[k] = v_self[idx[k]];
      }
    }
    x.swap(x2);
    w.swap(w2);
    logw.swap(logw2);
    w_self.swap(ws2);
    if (has_sub) {
      v.swap(v2);
      logv.swap(logv2);
      v_self.swap(vs2);
    }
  }

  // per-point scores d_j given current masses; for the plain objective this is
  // D(W_j || q), for the difference objective D(W_j || qW) - D(V_j || qV)
  VectorXd scores(const VectorXd& p) const {
    ArrayXd q = (w.transpose() * p).array();
    VectorXd d = w_self - w * safe_log(q).matrix();
    if (has_sub) {
      ArrayXd qv = (v.transpose() * p).array();
      d -= (v_self - v * safe_log(qv).matrix());
    }
    return d;
  }
};

struct BaOutcome {
  VectorXd p;
  VectorXd d;          // scores at the returned p
  double objective;    // p . d  (I, or I_W - I_V), nats
  double mean_x;
  double lower, upper; // bracket for max_p [objective - mu E[X]], nats
  long sweeps = 0;
};

// Multiplicative ascent at fixed mu. For the plain objective the normalizer
// log Z is a monotone lower bound and max_j s_j the Csiszar upper bound; for
// the difference objective we damp the step whenever the objective drops and
// stop on the stationarity gap instead. The gap of the grid relaxation can
// decay like 1/t when the true support falls between grid points, so a
// stalled lower bound is also accepted as converged when stall_tol > 0.
BaOutcome ba_solve(SupportMats& mats, double mu, double tol_nats, long max_sweeps,
                   VectorXd warm_logp, long& sweep_budget, bool allow_prune,
                   double stall_tol = 0.0, long stall_window = 500) {
  const bool difference = mats.has_sub;
  Eigen::Index g = mats.x.size();
  VectorXd logp = warm_logp.size() == g ? std::move(warm_logp)
                                        : VectorXd::Constant(g, -std::log(double(g)));
  logp.array() -= log_sum_exp(logp.array());  // warm starts may arrive unnormalized
  double eta = 1.0;
  double prev_obj = -std::numeric_limits<double>::infinity();
  double prev_lower = -std::numeric_limits<double>::infinity();
  double window_mark = -std::numeric_limits<double>::infinity();
  BaOutcome out;
  for (long it = 0; it < max_sweeps; ++it) {
    if (--sweep_budget < 0) throw std::runtime_error("capacity solver: iteration budget exhausted");
    VectorXd p = logp.array().exp();
    p /= p.sum();
    VectorXd d = mats.scores(p);
    ArrayXd s = d.array() - mu * mats.x.array();
    const double obj = p.dot(d);
    const double smax = s.maxCoeff();
    const double penalized = obj - mu * p.dot(mats.x);

    out.p = p;
    out.d = d;
    out.objective = obj;
    out.mean_x = p.dot(mats.x);
    out.upper = smax;
    out.sweeps = it + 1;

    if (!difference) {
      ArrayXd lse = logp.array() + s;
      const double z = log_sum_exp(lse);
      out.lower = z;
      if (z + 1e-7 < prev_lower)
        throw std::logic_error("capacity solver: lower bound decreased");
      prev_lower = z;
      if (smax - z <= tol_nats) return out;
      if (stall_tol > 0.0 && it % stall_window == 0) {
        if (z - window_mark <= stall_tol) return out;
        window_mark = z;
      }
      logp = (lse - z).matrix();
    } else {
      out.lower = penalized;
      const double gap = smax - penalized;  // stationarity gap
      if (gap <= tol_nats) return out;
      if (stall_tol > 0.0 && it % stall_window == 0) {
        if (penalized - window_mark <= stall_tol && it > 0) return out;
        window_mark = penalized;
      }
      if (penalized + 1e-13 < prev_obj && eta > 1.0 / 64.0)
        eta *= 0.5;
      else
        eta = std::min(1.0, eta * 1.25);
      prev_obj = penalized;
      ArrayXd lse = logp.array() + eta * s;
      const double z = log_sum_exp(lse);
      logp = (lse - z).matrix();
    }

    if (allow_prune && (it % 256) == 255 && g > 64) {
      std::vector<Eigen::Index> keep;
      keep.reserve(g);
      for (Eigen::Index j = 0; j < g; ++j)
        if (logp[j] > -120.0 || s[j] > smax - 1e-6) keep.push_back(j);
      if (static_cast<Eigen::Index>(keep.size()) < g) {
        VectorXd lp2(static_cast<Eigen::Index>(keep.size()));
        for (Eigen::Index k = 0; k < lp2.size(); ++k) lp2[k] = logp[keep[k]];
        mats.keep(keep);
        logp = lp2;
        g = mats.x.size();
        // renormalize in log domain
        VectorXd p2 = logp.array().exp();
        logp.array() -= std::log(p2.sum());
      }
    }
  }
  return out;
}

struct MuSolve {
  BaOutcome outcome;
  double mu = 0.0;
};

// Outer search for the mean-power multiplier: E[X](mu) is nonincreasing, so a
// doubling bracket plus Illinois-damped regula falsi pins E[X] = p_avg. A
// multiplier hint keeps the search near the optimum: visiting a wildly wrong
// mu with a warm mass vector crushes currently-inactive points so deep in the
// log domain that they cannot regrow within any reasonable sweep budget.
MuSolve solve_with_mean_constraint(SupportMats& mats, const PowerConstraint& pc, double tol_nats,
                                   double mean_tol, long& sweep_budget, bool allow_prune,
                                   double stall_tol = 0.0, long per_call = 200'000,
                                   const VectorXd* warm_hint = nullptr, double mu_hint = -1.0) {
  MuSolve res;
  VectorXd warm;
  if (warm_hint && warm_hint->size() == mats.x.size()) warm = *warm_hint;
  auto run = [&](double mu) {
    BaOutcome o = ba_solve(mats, mu, tol_nats, per_call, warm, sweep_budget, allow_prune, stall_tol);
    warm = o.p.array().max(kTinyLog).log().matrix();
    return o;
  };
  const double target = pc.effective_avg();

  // Illinois regula falsi on h(mu) = E[X](mu) - target over a sign-changing
  // bracket; returns the best feasible point if the tolerance is never met
  auto illinois = [&](double lo, double h_lo, double hi, double h_hi, BaOutcome feasible) {
    double side = 0.0;
    double best_mu = hi;
    for (int it = 0; it < 200; ++it) {
      double mid = (h_lo != h_hi) ? (lo * h_hi - hi * h_lo) / (h_hi - h_lo) : 0.5 * (lo + hi);
      if (!(mid > lo) || !(mid < hi)) mid = 0.5 * (lo + hi);
      BaOutcome at_mid = run(mid);
      const double h_mid = at_mid.mean_x - target;
      if (std::fabs(h_mid) <= mean_tol || hi - lo < 1e-14 * (1.0 + hi)) {
        res.outcome = std::move(at_mid);
        res.mu = mid;
        return;
      }
      if (h_mid > 0.0) {
        lo = mid;
        h_lo = h_mid;
        if (side < 0.0) h_hi *= 0.5;
        side = 1.0;
      } else {
        hi = mid;
        h_hi = h_mid;
        feasible = at_mid;
        best_mu = mid;
        if (side > 0.0) h_lo *= 0.5;
        side = -1.0;
      }
    }
    res.outcome = std::move(feasible);
    res.mu = best_mu;
  };

  if (pc.average_can_bind() && mu_hint > 0.0) {
    BaOutcome at_hint = run(mu_hint);
    if (std::fabs(at_hint.mean_x - target) <= mean_tol) {
      res.outcome = std::move(at_hint);
      res.mu = mu_hint;
      return res;
    }
    if (at_hint.mean_x > target) {
      double lo = mu_hint, h_lo = at_hint.mean_x - target;
      double hi = 2.0 * mu_hint;
      BaOutcome at_hi = run(hi);
      double h_hi = at_hi.mean_x - target;
      int guard = 0;
      while (h_hi > 0.0) {
        if (++guard > 60) throw std::runtime_error("capacity solver: multiplier bracket failed");
        lo = hi;
        h_lo = h_hi;
        hi *= 2.0;
        at_hi = run(hi);
        h_hi = at_hi.mean_x - target;
      }
      if (std::fabs(h_hi) <= mean_tol) {
        res.outcome = std::move(at_hi);
        res.mu = hi;
        return res;
      }
      illinois(lo, h_lo, hi, h_hi, at_hi);
      return res;
    }
    double hi = mu_hint, h_hi = at_hint.mean_x - target;
    BaOutcome at_hi = at_hint;
    double lo = 0.5 * mu_hint;
    int guard = 0;
    for (;;) {
      BaOutcome at_lo = run(lo);
      const double h_lo = at_lo.mean_x - target;
      if (h_lo > 0.0) {
        illinois(lo, h_lo, hi, h_hi, at_hi);
        return res;
      }
      hi = lo;
      h_hi = h_lo;
      at_hi = std::move(at_lo);
      lo *= 0.5;
      if (++guard > 60 || lo < 1e-13 * (1.0 + mu_hint)) break;  // constraint is inactive
    }
  }

  BaOutcome at0 = run(0.0);
  if (!pc.average_can_bind() || at0.mean_x <= target + mean_tol) {
    res.outcome = std::move(at0);
    res.mu = 0.0;
    return res;
  }

  double lo = 0.0, hi = 1.0;
  double h_lo = at0.mean_x - target;
  BaOutcome at_hi = run(hi);
  double h_hi = at_hi.mean_x - target;
  int doublings = 0;
  while (h_hi > 0.0) {
    if (++doublings > 60) throw std::runtime_error("capacity solver: multiplier bracket failed");
    lo = hi;
    h_lo = h_hi;
    hi *= 2.0;
    at_hi = run(hi);
    h_hi = at_hi.mean_x - target;
  }
  if (std::fabs(h_hi) <= mean_tol) {
    res.outcome = std::move(at_hi);
    res.mu = hi;
    return res;
  }
  illinois(lo, h_lo, hi, h_hi, at_hi);
  return res;
}

struct ExtractOptions {
  double mass_tol;
  double merge_tol;
  int max_points = 60;
};

VectorXd extract_support(const VectorXd& x, const VectorXd& p, const ExtractOptions& eo) {
  std::vector<std::pair<double, double>> pts;  // (x, mass)
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (p[j] >= eo.mass_tol) pts.emplace_back(x[j], p[j]);
  if (pts.empty()) {
    Eigen::Index j;
    p.maxCoeff(&j);
    pts.emplace_back(x[j], 1.0);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& pt : pts) {
    if (!merged.empty() && pt.first - merged.back().first < eo.merge_tol) {
      auto& m = merged.back();
      const double mass = m.second + pt.second;
      m.first = (m.first * m.second + pt.first * pt.second) / mass;
      m.second = mass;
    } else {
      merged.push_back(pt);
    }
  }
  if (static_cast<int>(merged.size()) > eo.max_points) {
    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    merged.resize(eo.max_points);
    std::sort(merged.begin(), merged.end());
  }
  VectorXd out(static_cast<Eigen::Index>(merged.size()));
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = merged[k].first;
  return out;
}

double kl_rows_nats(const ArrayXd& r, const ArrayXd& logq) {
  double acc = 0.0;
  for (Eigen::Index y = 0; y < r.size(); ++y)
    if (r[y] > 0.0) acc += r[y] * (std::log(r[y]) - logq[y]);
  return acc;
}

// Continuous score x -> D(W(.|x)||qW) [- D(V(.|x)||qV)] - mu x for the current
// output mixtures; this is what the Kuhn-Tucker condition compares against the
// on-support level.
struct ScoreFn {
  const RowFn* wrow;
  const RowFn* vrow;
  ArrayXd logqw, logqv;
  double mu;

  double operator()(double x) const {
    double s = kl_rows_nats((*wrow)(x), logqw);
    if (vrow) s -= kl_rows_nats((*vrow)(x), logqv);
    return s - mu * x;
  }
};

template <typename F>
double golden_max(const F& f, double a, double b, double xtol) {
  // coarse scan guards against local dips inside the bracket
  const int scan = 17;
  double best_x = a, best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan; ++i) {
    const double x = a + (b - a) * i / double(scan - 1);
    const double v = f(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  const double h = (b - a) / double(scan - 1);
  double lo = std::max(a, best_x - h), hi = std::min(b, best_x + h);
  const double invphi = 0.6180339887498949;
  double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > xtol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    }
  }
  const double xm = 0.5 * (lo + hi);
  return f(xm) >= best_v ? xm : best_x;
}

VectorXd linspace(double a, double b, int n) {
  VectorXd v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / double(n - 1);
  return v;
}

struct PipelineResult {
  VectorXd x, p;
  double mu = 0.0;
  double objective_nats = 0.0;  // I or I_W - I_V at the solution
  double gap_nats = 0.0;
  double kkt_max_nats = 0.0;
  double kkt_support_nats = 0.0;
  long iterations = 0;
  bool certified = false;
};

// Shared solve pipeline. `vrow` switches on the difference objective.
PipelineResult solve_pipeline(const RowFn& wrow, const RowFn* vrow, const PowerConstraint& pc,
                              const CapacitySolveOptions& opt, bool continuous_support,
                              const VectorXd* fixed_grid) {
  PipelineResult out;
  long sweep_budget = opt.max_iterations;
  const double tol_nats = nats_from_bits(opt.ba_gap_tol_bits);
  const double kkt_tol_nats = nats_from_bits(opt.kkt_tol_bits);
  const double mean_tol_grid = 1e-5 * std::max(1.0, pc.effective_avg());
  const double mean_tol_final = 1e-9 * std::max(1.0, pc.effective_avg());

  VectorXd grid = fixed_grid ? *fixed_grid : linspace(0.0, pc.p_max, opt.grid_points);

  // Stage 1: grid ascent. The difference objective is not a concave program
  // under the grid relaxation, so it gets random restarts on a coarse grid
  // and keeps the best stationary point.
  SupportMats mats;
  MuSolve grid_solve;
  if (!vrow) {
    mats.build(grid, wrow, vrow);
    grid_solve = solve_with_mean_constraint(mats, pc, std::max(tol_nats, 3e-5), mean_tol_grid,
                                            sweep_budget, true, 1e-9);
  } else {
    const int coarse_n = std::min<int>(opt.grid_points, 400);
    const VectorXd coarse_x = linspace(0.0, pc.p_max, coarse_n);
    double best_obj = -std::numeric_limits<double>::infinity();
    VectorXd best_x, best_p;
    for (int r = 0; r < std::max(1, opt.secrecy_restarts); ++r) {
      SupportMats coarse;
      coarse.build(coarse_x, wrow, vrow);
      VectorXd logp(coarse.x.size());
      if (r == 0) {
        logp.setConstant(-std::log(double(coarse.x.size())));
      } else {
        RngStream rng(opt.restart_seed, static_cast<std::uint64_t>(r));
        for (Eigen::Index j = 0; j < logp.size(); ++j)
          logp[j] = std::log(-std::log(std::max(rng.next_unit(), 1e-15)));
        VectorXd pr = logp.array().exp();
        logp.array() -= std::log(pr.sum());
      }
      BaOutcome o = ba_solve(coarse, 0.0, 1e-9, 60'000, logp, sweep_budget, true, 1e-10);
      if (o.objective > best_obj) {
        best_obj = o.objective;
        best_x = coarse.x;
        best_p = o.p;
      }
    }
    mats.build(best_x, wrow, vrow);
    VectorXd warm_logp = best_p.array().max(kTinyLog).log().matrix();
    grid_solve.outcome = ba_solve(mats, 0.0, 1e-9, 60'000, warm_logp, sweep_budget, false, 1e-10);
    grid_solve.mu = 0.0;
  }

  // The initial support comes from the local maxima of the stage-1
  // stationarity score; peaks are isolated by construction, so the candidate
  // set cannot start with duplicate points.
  const double xtol = 1e-11 * std::max(1.0, pc.p_max);
  const double merge_tol = opt.merge_tol_factor * pc.p_max;
  const bool trace = std::getenv("DTPC_TRACE") != nullptr;

  auto build_score = [&](const SupportMats& m, const VectorXd& p, double mu) {
    ScoreFn score;
    score.wrow = &wrow;
    score.vrow = vrow;
    score.mu = mu;
    score.logqw = safe_log((m.w.transpose() * p).array());
    if (vrow) score.logqv = safe_log((m.v.transpose() * p).array());
    return score;
  };

  // all polished local maxima of the score with value >= level - slack
  auto landscape_peaks = [&](const ScoreFn& score, double level, double slack) {
    const int scan_n = 2001;
    const double h = pc.p_max / double(scan_n - 1);
    std::vector<double> ss(scan_n);
    for (int i = 0; i < scan_n; ++i) ss[static_cast<std::size_t>(i)] = score(i * h);
    std::vector<double> peaks;
    for (int i = 0; i < scan_n; ++i) {
      const bool left_ok = i == 0 || ss[i] >= ss[i - 1];
      const bool right_ok = i == scan_n - 1 || ss[i] >= ss[i + 1];
      if (!left_ok || !right_ok) continue;
      if (ss[i] < level - slack) continue;
      const double lo = std::max(0.0, (i - 1) * h);
      const double hi = std::min(pc.p_max, (i + 1) * h);
      const double px = golden_max(score, lo, hi, xtol);
      if (!peaks.empty() && px - peaks.back() <= std::max(merge_tol, 2.0 * h)) {
        if (score(px) > score(peaks.back())) peaks.back() = px;
      } else if (static_cast<int>(peaks.size()) < 60) {
        peaks.push_back(px);
      }
    }
    if (peaks.empty()) peaks.push_back(0.0);
    return Eigen::Map<VectorXd>(peaks.data(), static_cast<Eigen::Index>(peaks.size())).eval();
  };

  VectorXd centers;
  if (continuous_support) {
    ScoreFn s0 = build_score(mats, grid_solve.outcome.p, grid_solve.mu);
    const double level0 =
        grid_solve.outcome.objective - grid_solve.mu * grid_solve.outcome.mean_x;
    centers = landscape_peaks(s0, level0, 0.05 * std::max(level0, 1e-3));
    // an active mean constraint is only satisfiable with mass available at 0
    if (pc.average_can_bind() && centers[0] > merge_tol) {
      VectorXd with_zero(centers.size() + 1);
      with_zero << 0.0, centers;
      centers = with_zero;
    }
  } else {
    ExtractOptions eo{opt.mass_tol, 0.0, 60};
    centers = extract_support(mats.x, grid_solve.outcome.p, eo);
  }

  VectorXd support = centers;
  MuSolve sup_solve;
  SupportMats sup_mats;
  VectorXd warm_masses;  // aligned with support when non-empty
  double mu_hint = grid_solve.mu > 0.0 ? grid_solve.mu : -1.0;
  auto resolve_masses = [&]() {
    sup_mats = SupportMats();
    sup_mats.build(support, wrow, vrow);
    VectorXd warm_logp;
    const bool have_warm = warm_masses.size() == support.size();
    // floor the seed so freshly added low-mass points start recoverable
    if (have_warm) warm_logp = warm_masses.array().max(1e-6).log().matrix();
    sup_solve = solve_with_mean_constraint(sup_mats, pc, 1e-12, mean_tol_final, sweep_budget, false,
                                           1e-13, 60'000, have_warm ? &warm_logp : nullptr, mu_hint);
    std::vector<double> kept;
    for (Eigen::Index j = 0; j < support.size(); ++j)
      if (sup_solve.outcome.p[j] >= opt.mass_tol) kept.push_back(support[j]);
    if (kept.size() != static_cast<std::size_t>(support.size())) {
      support = Eigen::Map<VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
      sup_mats = SupportMats();
      sup_mats.build(support, wrow, vrow);
      sup_solve = solve_with_mean_constraint(sup_mats, pc, 1e-12, mean_tol_final, sweep_budget,
                                             false, 1e-13, 60'000, nullptr,
                                             sup_solve.mu > 0.0 ? sup_solve.mu : -1.0);
    }
    warm_masses = sup_solve.outcome.p;
    mu_hint = sup_solve.mu > 0.0 ? sup_solve.mu : -1.0;
  };
  resolve_masses();

  // exact penalized objective of the small problem at given locations
  auto small_objective = [&](const VectorXd& xs, const VectorXd& ps, double mu) {
    Eigen::Index k = xs.size();
    std::vector<ArrayXd> rows_w(static_cast<std::size_t>(k));
    ArrayXd qw;
    for (Eigen::Index j = 0; j < k; ++j) {
      rows_w[static_cast<std::size_t>(j)] = wrow(xs[j]);
      if (j == 0)
        qw = ps[j] * rows_w[0];
      else
        qw += ps[j] * rows_w[static_cast<std::size_t>(j)];
    }
    ArrayXd logqw = safe_log(qw);
    double val = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
      val += ps[j] * kl_rows_nats(rows_w[static_cast<std::size_t>(j)], logqw);
    if (vrow) {
      std::vector<ArrayXd> rows_v(static_cast<std::size_t>(k));
      ArrayXd qv;
      for (Eigen::Index j = 0; j < k; ++j) {
        rows_v[static_cast<std::size_t>(j)] = (*vrow)(xs[j]);
        if (j == 0)
          qv = ps[j] * rows_v[0];
        else
          qv += ps[j] * rows_v[static_cast<std::size_t>(j)];
      }
      ArrayXd logqv = safe_log(qv);
      for (Eigen::Index j = 0; j < k; ++j)
        val -= ps[j] * kl_rows_nats(rows_v[static_cast<std::size_t>(j)], logqv);
    }
    return val - mu * ps.dot(xs);
  };

  // Stage 2: monotone coordinate ascent on the exact small problem. Each
  // location move is a golden-section maximization of the true penalized
  // objective, so the value never decreases and relocation cannot cycle.
  auto ascend_locations = [&]() {
    for (int round = 0; round < 40; ++round) {
      if (trace) {
        std::fprintf(stderr, "[round %d] budget_used=%ld obj=%.12f support:", round,
                     opt.max_iterations - sweep_budget, sup_solve.outcome.objective);
        for (Eigen::Index j = 0; j < support.size(); ++j)
          std::fprintf(stderr, " %.6f", support[j]);
        std::fprintf(stderr, "\n");
      }
      const double mu = sup_solve.mu;
      VectorXd ps = sup_solve.outcome.p;
      double current = small_objective(support, ps, mu);
      bool moved = false;
      for (Eigen::Index j = 0; j < support.size(); ++j) {
        const double lo = j == 0 ? 0.0 : support[j - 1] + 0.5 * merge_tol;
        const double hi =
            j + 1 == support.size() ? pc.p_max : support[j + 1] - 0.5 * merge_tol;
        if (!(lo < hi)) continue;
        auto f = [&](double x) {
          VectorXd xs = support;
          xs[j] = x;
          return small_objective(xs, ps, mu);
        };
        const double cand = golden_max(f, lo, hi, xtol);
        const double gain = f(cand) - current;
        if (gain > 1e-14 && std::fabs(cand - support[j]) > 1e-12 * std::max(1.0, pc.p_max)) {
          support[j] = cand;
          current += gain;
          moved = true;
        }
      }
      if (!moved) break;
      resolve_masses();
    }
  };

  // Alternate ascent with a dense stationarity scan: a violating peak is a
  // support point the whole grid path missed, so add it and ascend again.
  // Adding a point only ever raises the restricted optimum.
  if (continuous_support && opt.refine_support) {
    for (int outer = 0; outer < 16; ++outer) {
      ascend_locations();
      ScoreFn score = build_score(sup_mats, sup_solve.outcome.p, sup_solve.mu);
      const double c_star = sup_solve.outcome.objective - sup_solve.mu * sup_solve.outcome.mean_x;
      VectorXd peaks = landscape_peaks(score, c_star, -0.5 * kkt_tol_nats);
      double worst = -std::numeric_limits<double>::infinity();
      double worst_x = 0.0;
      for (Eigen::Index j = 0; j < peaks.size(); ++j) {
        double dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < support.size(); ++k)
          dist = std::min(dist, std::fabs(peaks[j] - support[k]));
        if (dist > std::max(10.0 * merge_tol, 1e-4 * pc.p_max)) {
          const double v = score(peaks[j]) - c_star;
          if (v > worst) {
            worst = v;
            worst_x = peaks[j];
          }
        }
      }
      if (worst <= 0.6 * kkt_tol_nats) break;
      if (trace)
        std::fprintf(stderr, "[grow %d] adding %.6f (excess %.3g)\n", outer, worst_x, worst);
      Eigen::Index at = 0;
      while (at < support.size() && support[at] < worst_x) ++at;
      VectorXd grown(support.size() + 1), grown_w(support.size() + 1);
      for (Eigen::Index j = 0; j < at; ++j) {
        grown[j] = support[j];
        grown_w[j] = sup_solve.outcome.p[j];
      }
      grown[at] = worst_x;
      grown_w[at] = 1e-3;  // seed mass, re-solved immediately
      for (Eigen::Index j = at; j < support.size(); ++j) {
        grown[j + 1] = support[j];
        grown_w[j + 1] = sup_solve.outcome.p[j];
      }
      support = grown;
      warm_masses = grown_w / grown_w.sum();
      resolve_masses();
    }
  }
  out.iterations = opt.max_iterations - sweep_budget;

  // Stage 3: certification on a dense grid (or on the labels for tables).
  const double c_star = sup_solve.outcome.objective - sup_solve.mu * sup_solve.outcome.mean_x;
  ScoreFn score;
  score.wrow = &wrow;
  score.vrow = vrow;
  score.mu = sup_solve.mu;
  score.logqw = safe_log((sup_mats.w.transpose() * sup_solve.outcome.p).array());
  if (vrow) score.logqv = safe_log((sup_mats.v.transpose() * sup_solve.outcome.p).array());

  double max_violation = 0.0;
  if (continuous_support) {
    for (int i = 0; i < opt.verification_grid; ++i) {
      const double xx = pc.p_max * i / double(opt.verification_grid - 1);
      max_violation = std::max(max_violation, score(xx) - c_star);
    }
  } else {
    for (Eigen::Index i = 0; i < fixed_grid->size(); ++i)
      max_violation = std::max(max_violation, score((*fixed_grid)[i]) - c_star);
  }
  double support_residual = 0.0;
  for (Eigen::Index j = 0; j < support.size(); ++j)
    support_residual = std::max(support_residual, std::fabs(score(support[j]) - c_star));

  out.x = support;
  out.p = sup_solve.outcome.p;
  out.mu = sup_solve.mu;
  out.objective_nats = sup_solve.outcome.objective;
  out.gap_nats = sup_solve.outcome.upper - sup_solve.outcome.lower;
  out.kkt_max_nats = max_violation;
  out.kkt_support_nats = support_residual;
  out.iterations = opt.max_iterations - sweep_budget;
  out.certified = max_violation <= nats_from_bits(opt.kkt_tol_bits) &&
                  support_residual <= nats_from_bits(opt.kkt_tol_bits) &&
                  out.gap_nats <= nats_from_bits(opt.ba_gap_tol_bits);
  return out;
}

CapacityResult to_result(const PipelineResult& pr, bool clamp_nonnegative) {
  VectorXd p = pr.p / pr.p.sum();
  CapacityResult res{
      bits_from_nats(pr.objective_nats),
      DiscreteInputDistribution(pr.x, p),
      bits_from_nats(pr.mu),
      bits_from_nats(pr.kkt_max_nats),
      bits_from_nats(pr.kkt_support_nats),
      bits_from_nats(pr.gap_nats),
      pr.iterations,
      pr.certified,
  };
  if (clamp_nonnegative && res.capacity_bits < 0.0) res.capacity_bits = 0.0;
  return res;
}

RowFn make_rowfn(const PoissonChannel& ch) {
  return [ch](double x) { return ch.row(x); };
}

RowFn make_rowfn(const StateChannel& sc) {
  return [sc](double x) { return sc.row(x); };
}

}  // namespace

double mutual_information_bits(const DiscreteInputDistribution& dist, const PoissonChannel& ch) {
  ArrayXd q = output_distribution(dist, ch).pmf;
  ArrayXd logq = safe_log(q);
  double acc = 0.0;
  for (int j = 0; j < dist.size(); ++j) acc += dist.p[j] * kl_rows_nats(ch.row(dist.x[j]), logq);
  return bits_from_nats(acc);
}

double lagrangian_bits(double mu_bits, double x, const DiscreteInputDistribution& dist,
                       const PoissonChannel& ch, double p_avg) {
  if (x < 0.0) throw std::invalid_argument("lagrangian_bits: negative input");
  ArrayXd q = output_distribution(dist, ch).pmf;
  const double d_bits = bits_from_nats(kl_rows_nats(ch.row(x), safe_log(q)));
  return mutual_information_bits(dist, ch) + mu_bits * (x - p_avg) - d_bits;
}

BaStep ba_step(const DiscreteInputDistribution& dist, const Eigen::MatrixXd& rows, double mu_bits) {
  if (rows.rows() != dist.size()) throw std::invalid_argument("ba_step: rows/support mismatch");
  const double mu = nats_from_bits(mu_bits);
  MatrixXd logr = rows.array().max(kTinyLog).log().matrix();
  VectorXd self = rows.cwiseProduct(logr).rowwise().sum();
  ArrayXd q = (rows.transpose() * dist.p).array();
  VectorXd d = self - rows * safe_log(q).matrix();
  ArrayXd s = d.array() - mu * dist.x.array();
  ArrayXd lse = dist.p.array().log() + s;
  const double z = log_sum_exp(lse);
  VectorXd p_next = (lse - z).exp().max(1e-300);
  p_next /= p_next.sum();
  return {DiscreteInputDistribution(dist.x, p_next), bits_from_nats(z), bits_from_nats(s.maxCoeff())};
}

BaStep ba_step(const DiscreteInputDistribution& dist, const PoissonChannel& ch, double mu_bits) {
  MatrixXd rows(dist.size(), ch.y_max + 1);
  for (int j = 0; j < dist.size(); ++j) rows.row(j) = ch.row(dist.x[j]).matrix();
  return ba_step(dist, rows, mu_bits);
}

CapacityResult capacity(const PoissonChannel& ch, const PowerConstraint& pc,
                        const CapacitySolveOptions& options) {
  RowFn w = make_rowfn(ch);
  return to_result(solve_pipeline(w, nullptr, pc, options, true, nullptr), false);
}

CapacityResult capacity(const StateChannel& sc, const PowerConstraint& pc,
                        const CapacitySolveOptions& options) {
  RowFn w = make_rowfn(sc);
  return to_result(solve_pipeline(w, nullptr, pc, options, true, nullptr), false);
}

CapacityResult capacity(const GenericDmc& dmc, const PowerConstraint& pc,
                        const CapacitySolveOptions& options) {
  if (dmc.inputs[dmc.inputs.size() - 1] > pc.p_max + 1e-12)
    throw std::invalid_argument("capacity: table inputs exceed the peak constraint");
  // row lookup by label; the pipeline only ever evaluates on the labels
  const GenericDmc* table = &dmc;
  RowFn w = [table](double x) -> ArrayXd {
    Eigen::Index lo = 0, hi = table->inputs.size() - 1;
    while (lo < hi) {
      const Eigen::Index mid = (lo + hi) / 2;
      if (table->inputs[mid] < x - 1e-12)
        lo = mid + 1;
      else
        hi = mid;
    }
    if (std::fabs(table->inputs[lo] - x) > 1e-9)
      throw std::invalid_argument("capacity: off-label evaluation on a table channel");
    return table->rows.row(lo).array();
  };
  VectorXd grid = dmc.inputs;
  return to_result(solve_pipeline(w, nullptr, pc, options, false, &grid), false);
}

CapacityResult secrecy_capacity(const WiretapPair& wp, const PowerConstraint& pc,
                                const CapacitySolveOptions& options) {
  if (!wp.degraded())
    throw std::invalid_argument("secrecy_capacity: pair is not degraded (eve dark current below main)");
  RowFn w = make_rowfn(wp.main);
  RowFn v = make_rowfn(wp.eve);
  CapacityResult res = to_result(solve_pipeline(w, &v, pc, options, true, nullptr), true);
  if (res.capacity_bits <= 1e-15) {
    // identical channels: every input law attains 0, report the simplest one
    Eigen::VectorXd x0(1), p0(1);
    x0 << 0.0;
    p0 << 1.0;
    res.capacity_bits = 0.0;
    res.distribution = DiscreteInputDistribution(x0, p0);
  }
  return res;
}

SidReport sid_capacity(const WiretapPair& wp, const PowerConstraint& pc,
                       const CapacitySolveOptions& options) {
  SidReport rep{capacity(wp.main, pc, options), secrecy_capacity(wp, pc, options), false, 0.0};
  rep.secrecy_positive = rep.secrecy.capacity_bits > kSidPositivityThresholdBits;
  rep.sid_capacity_bits = rep.secrecy_positive ? rep.main.capacity_bits : 0.0;
  return rep;
}

SidReport sid_capacity(const StateChannel& main, const PoissonChannel& eve,
                       const PowerConstraint& pc, const CapacitySolveOptions& options) {
  for (const auto& [prob, ch] : main.states) {
    (void)prob;
    if (eve.dark_current < ch.dark_current)
      throw std::invalid_argument("sid_capacity: eavesdropper must be degraded w.r.t. every state");
  }
  RowFn w = make_rowfn(main);
  RowFn v = make_rowfn(eve);
  SidReport rep{to_result(solve_pipeline(w, nullptr, pc, options, true, nullptr), false),
                to_result(solve_pipeline(w, &v, pc, options, true, nullptr), true), false, 0.0};
  if (rep.secrecy.capacity_bits <= 1e-15) rep.secrecy.capacity_bits = 0.0;
  rep.secrecy_positive = rep.secrecy.capacity_bits > kSidPositivityThresholdBits;
  rep.sid_capacity_bits = rep.secrecy_positive ? rep.main.capacity_bits : 0.0;
  return rep;
}

}  // namespace dtpc
