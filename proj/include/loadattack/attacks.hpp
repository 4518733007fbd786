#pragma once

// Temperature-injection attacks on forecasters: white-box iterative sign
// gradient, black-box central-difference gradient estimation, transfer from a
// trained substitute, and the epsilon-ball projections they share.
//
// Budgets are in physical degrees. The ball is applied per window row (lag),
// so for L1/L2 each lag may move by up to epsilon; for Linf this is the usual
// per-coordinate box.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loadattack/dataio.hpp"
#include "loadattack/error.hpp"
#include "loadattack/neuralnet.hpp"

namespace loadattack::attacks {

enum class Norm { Linf, L1, L2 };
enum class Mode { Projection, Barrier };

inline const char* norm_name(Norm n) {
  switch (n) {
    case Norm::Linf: return "linf";
    case Norm::L1: return "l1";
    case Norm::L2: return "l2";
  }
  return "?";
}

inline Norm parse_norm(const std::string& s) {
  if (s == "linf") return Norm::Linf;
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  fail(Errc::InvalidConfig, "unknown norm '" + s + "'");
}

struct AttackConfig {
  int gamma = 1;          // +1 pushes the forecast down, -1 up
  double epsilon = 5.0;   // physical degrees
  Norm norm = Norm::Linf;
  double alpha = -1.0;    // scaled units per step; negative picks epsilon / 5 in scaled units
  double beta = 0.01;     // barrier weight
  double delta = 1e-3;    // finite-difference step, scaled units
  int iterations = 10;
  long query_budget = 1'000'000;
  Mode mode = Mode::Projection;

  void validate() const {
    require(gamma == 1 || gamma == -1, Errc::InvalidConfig, "gamma must be +1 or -1");
    require(epsilon >= 0.0 && std::isfinite(epsilon), Errc::InvalidConfig, "epsilon must be >= 0");
    require(std::isfinite(alpha), Errc::InvalidConfig, "alpha must be finite (negative selects the default)");
    require(delta > 0.0, Errc::InvalidConfig, "delta must be > 0");
    require(iterations >= 1, Errc::InvalidConfig, "iterations must be >= 1");
    require(beta >= 0.0, Errc::InvalidConfig, "beta must be >= 0");
    require(query_budget >= 0, Errc::InvalidConfig, "query budget must be >= 0");
  }
};

// ---- forecaster access ----

class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual double forward(const Eigen::MatrixXd& x) const = 0;
  virtual Eigen::MatrixXd grad_input(const Eigen::MatrixXd& x) const = 0;
  virtual Eigen::VectorXd forward_batch(const std::vector<const Eigen::MatrixXd*>& xs) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) y(static_cast<Eigen::Index>(i)) = forward(*xs[i]);
    return y;
  }
};

class ModelForecaster : public Forecaster {
 public:
  explicit ModelForecaster(const nn::ForecastModel& m) : m_(&m) {}
  double forward(const Eigen::MatrixXd& x) const override { return m_->forward(x); }
  Eigen::MatrixXd grad_input(const Eigen::MatrixXd& x) const override { return m_->grad_input(x); }
  Eigen::VectorXd forward_batch(const std::vector<const Eigen::MatrixXd*>& xs) const override {
    for (const auto* x : xs) m_->check_window(*x);
    return m_->forward_batch(xs);
  }

 private:
  const nn::ForecastModel* m_;
};

// f(x) = <w, x> + b.
class LinearForecaster : public Forecaster {
 public:
  LinearForecaster(Eigen::MatrixXd w, double b = 0.0) : w_(std::move(w)), b_(b) {}
  double forward(const Eigen::MatrixXd& x) const override {
    require(x.rows() == w_.rows() && x.cols() == w_.cols(), Errc::ShapeMismatch, "window shape mismatch");
    return (w_.array() * x.array()).sum() + b_;
  }
  Eigen::MatrixXd grad_input(const Eigen::MatrixXd&) const override { return w_; }

 private:
  Eigen::MatrixXd w_;
  double b_;
};

// Query-only access with a thread-safe call counter. The wrapped forecaster is
// never exposed, so attacks written against this type cannot read gradients.
class QueryHandle {
 public:
  explicit QueryHandle(const Forecaster& f, long budget = -1) : f_(&f), budget_(budget) {}

  double query(const Eigen::MatrixXd& x) {
    charge(1);
    return f_->forward(x);
  }

  Eigen::VectorXd query_batch(const std::vector<const Eigen::MatrixXd*>& xs) {
    charge(static_cast<long>(xs.size()));
    return f_->forward_batch(xs);
  }

  long used() const { return used_.load(); }
  long budget() const { return budget_; }
  long remaining() const { return budget_ < 0 ? std::numeric_limits<long>::max() : budget_ - used_.load(); }

 private:
  void charge(long n) {
    const long before = used_.fetch_add(n);
    if (budget_ >= 0 && before + n > budget_) {
      used_.fetch_sub(n);
      fail(Errc::QueryBudgetExhausted, "query budget of " + std::to_string(budget_) + " exhausted");
    }
  }

  const Forecaster* f_;
  long budget_;
  std::atomic<long> used_{0};
};

// ---- results ----

struct AttackResult {
  Eigen::MatrixXd adversarial;
  Eigen::MatrixXd clean;
  long queries_used = 0;
  double clean_forecast = 0.0;
  double attacked_forecast = 0.0;
  double perturbation_norm = 0.0;  // physical degrees, max over lags
  int iterations_run = 0;
  bool budget_exhausted = false;

  double objective_gain(int gamma) const { return gamma * (clean_forecast - attacked_forecast); }
};

// Physical degrees per scaled unit for every column (1 on non-temperature columns).
inline Eigen::RowVectorXd column_scale(const data::ScalingParams& sp, Eigen::Index cols) {
  Eigen::RowVectorXd s = Eigen::RowVectorXd::Ones(cols);
  for (std::size_t i = 0; i < sp.num_stations(); ++i) s(1 + static_cast<Eigen::Index>(i)) = sp.temp_span(i);
  return s;
}

inline double lag_norm(const Eigen::RowVectorXd& v, Norm n) {
  switch (n) {
    case Norm::Linf: return v.cwiseAbs().maxCoeff();
    case Norm::L1: return v.cwiseAbs().sum();
    case Norm::L2: return v.norm();
  }
  return 0.0;
}

// Max over rows of the masked deviation norm, in physical units.
inline double perturbation_norm(const Eigen::MatrixXd& adv, const Eigen::MatrixXd& clean, const Eigen::MatrixXd& mask,
                                const Eigen::RowVectorXd& scale, Norm n) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < adv.rows(); ++r) {
    const Eigen::RowVectorXd dv =
        ((adv.row(r) - clean.row(r)).array() * mask.row(r).array() * scale.array()).matrix();
    worst = std::max(worst, lag_norm(dv, n));
  }
  return worst;
}

namespace detail {

// Euclidean projection of v onto {u : ||u||_1 <= r}.
inline Eigen::VectorXd project_l1(const Eigen::VectorXd& v, double r) {
  if (v.cwiseAbs().sum() <= r) return v;
  if (r <= 0.0) return Eigen::VectorXd::Zero(v.size());
  std::vector<double> a(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(v(i));
  std::sort(a.begin(), a.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cum += a[i];
    const double t = (cum - r) / static_cast<double>(i + 1);
    if (i + 1 == a.size() || a[i + 1] <= t) {
      theta = t;
      break;
    }
  }
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::max(0.0, std::abs(v(i)) - theta);
    out(i) = v(i) >= 0.0 ? m : -m;
  }
  return out;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Closest point to xadv in the epsilon ball around xclean (masked coordinates,
// physical units, per lag), then clipped to [0,1]. Unmasked entries are copied
// from xclean.
inline Eigen::MatrixXd project(const Eigen::MatrixXd& xadv, const Eigen::MatrixXd& xclean, const Eigen::MatrixXd& mask,
                               const Eigen::RowVectorXd& scale, double epsilon, Norm norm) {
  require(xadv.rows() == xclean.rows() && xadv.cols() == xclean.cols() && mask.rows() == xclean.rows() &&
              mask.cols() == xclean.cols(),
          Errc::ShapeMismatch, "project: shapes differ");
  Eigen::MatrixXd out = xclean;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < xclean.cols(); ++c)
    if (mask.col(c).maxCoeff() > 0.0) cols.push_back(c);
  for (Eigen::Index r = 0; r < xclean.rows(); ++r) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index c : cols)
      if (mask(r, c) > 0.0) idx.push_back(c);
    if (idx.empty()) continue;
    Eigen::VectorXd dv(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      dv(static_cast<Eigen::Index>(i)) = (xadv(r, idx[i]) - xclean(r, idx[i])) * scale(idx[i]);
    // Entries already inside the ball keep their exact value.
    std::vector<bool> moved(idx.size(), false);
    switch (norm) {
      case Norm::Linf:
        for (Eigen::Index i = 0; i < dv.size(); ++i) {
          if (std::abs(dv(i)) > epsilon) {
            dv(i) = dv(i) > 0.0 ? epsilon : -epsilon;
            moved[static_cast<std::size_t>(i)] = true;
          }
        }
        break;
      case Norm::L2: {
        const double n = dv.norm();
        if (n > epsilon) {
          dv *= epsilon / n;
          moved.assign(idx.size(), true);
        }
        break;
      }
      case Norm::L1:
        if (dv.cwiseAbs().sum() > epsilon) {
          dv = detail::project_l1(dv, epsilon);
          moved.assign(idx.size(), true);
        }
        break;
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Eigen::Index c = idx[i];
      const double v = moved[i] ? xclean(r, c) + dv(static_cast<Eigen::Index>(i)) / scale(c) : xadv(r, c);
      // Clamping toward [0,1] can only shrink the deviation of an in-range clean value.
      out(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

inline Eigen::MatrixXd project(const data::FeatureWindow& adv, const data::FeatureWindow& clean,
                               const data::ScalingParams& sp, const AttackConfig& cfg) {
  return project(adv.x, clean.x, clean.mask, column_scale(sp, clean.x.cols()), cfg.epsilon, cfg.norm);
}

namespace detail {

inline double default_alpha(const AttackConfig& cfg, const Eigen::RowVectorXd& scale, const Eigen::MatrixXd& mask) {
  if (cfg.alpha >= 0.0) return cfg.alpha;
  double s = 0.0;
  int n = 0;
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    if (mask.col(c).maxCoeff() > 0.0) {
      s += cfg.epsilon / scale(c);
      ++n;
    }
  }
  return n ? s / n / 5.0 : 0.0;
}

// Barrier term -beta * sum_r log(eps - ||d_r||) and its gradient in scaled units.
inline double barrier(const Eigen::MatrixXd& x, const Eigen::MatrixXd& clean, const Eigen::MatrixXd& mask,
                      const Eigen::RowVectorXd& scale, const AttackConfig& cfg, Eigen::MatrixXd* grad) {
  double value = 0.0;
  if (grad) grad->setZero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Eigen::RowVectorXd dv = ((x.row(r) - clean.row(r)).array() * mask.row(r).array() * scale.array()).matrix();
    const double n = lag_norm(dv, cfg.norm);
    const double slack = cfg.epsilon - n;
    if (!(slack > 0.0)) fail(Errc::BarrierDomain, "iterate on or outside the epsilon boundary");
    value -= cfg.beta * std::log(slack);
    if (!grad) continue;
    // d/dx of -beta log(eps - n) = beta / slack * dn/dx.
    Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(x.cols());
    switch (cfg.norm) {
      case Norm::L2:
        if (n > 0.0) dn = dv / n;
        break;
      case Norm::L1:
        for (Eigen::Index c = 0; c < x.cols(); ++c) dn(c) = sign0(dv(c));
        break;
      case Norm::Linf: {
        Eigen::Index arg = 0;
        const double m = dv.cwiseAbs().maxCoeff(&arg);
        if (m > 0.0) dn(arg) = sign0(dv(arg));
        break;
      }
    }
    grad->row(r) = (cfg.beta / slack) * (dn.array() * scale.array() * mask.row(r).array()).matrix();
  }
  return value;
}

// Shared sign-gradient loop. `grad` returns d f / d x on masked entries, `eval`
// returns f, and `can_step` says whether another iteration is affordable.
template <class GradFn, class EvalFn, class BudgetFn>
AttackResult sign_descent(const data::FeatureWindow& w, const data::ScalingParams& sp, const AttackConfig& cfg,
                          const Eigen::MatrixXd* warm, GradFn&& grad, EvalFn&& eval, BudgetFn&& can_step) {
  const Eigen::RowVectorXd scale = column_scale(sp, w.x.cols());
  const double alpha = default_alpha(cfg, scale, w.mask);
  AttackResult res;
  res.clean = w.x;
  res.clean_forecast = eval(w.x);
  Eigen::MatrixXd cur = warm ? project(*warm, w.x, w.mask, scale, cfg.epsilon, cfg.norm) : w.x;
  double cur_f = warm ? eval(cur) : res.clean_forecast;
  if (cfg.mode == Mode::Barrier) barrier(cur, w.x, w.mask, scale, cfg, nullptr);
  Eigen::MatrixXd best = cur;
  double best_obj = cfg.gamma * cur_f;
  if (cfg.gamma * res.clean_forecast < best_obj) {
    best = w.x;
    best_obj = cfg.gamma * res.clean_forecast;
  }
  for (int j = 0; j < cfg.iterations; ++j) {
    if (!can_step()) {
      res.budget_exhausted = true;
      break;
    }
    Eigen::MatrixXd g = cfg.gamma * grad(cur);
    if (cfg.mode == Mode::Barrier) {
      Eigen::MatrixXd gb;
      barrier(cur, w.x, w.mask, scale, cfg, &gb);
      g += gb;
    }
    Eigen::MatrixXd step = g.unaryExpr([](double v) { return sign0(v); }).cwiseProduct(w.mask);
    Eigen::MatrixXd next;
    if (cfg.mode == Mode::Projection) {
      next = project(cur - alpha * step, w.x, w.mask, scale, cfg.epsilon, cfg.norm);
    } else {
      // Backtrack until the step stays strictly inside the barrier domain.
      double a = alpha;
      bool inside = false;
      for (int t = 0; t < 40 && !inside; ++t, a *= 0.5) {
        next = (cur - a * step).cwiseMax(0.0).cwiseMin(1.0);
        next = w.x + (next - w.x).cwiseProduct(w.mask);
        inside = perturbation_norm(next, w.x, w.mask, scale, cfg.norm) < cfg.epsilon;
      }
      if (!inside) fail(Errc::BarrierDomain, "no step keeps the iterate inside the epsilon ball");
    }
    cur = next;
    cur_f = eval(cur);
    ++res.iterations_run;
    if (cfg.gamma * cur_f < best_obj) {
      best_obj = cfg.gamma * cur_f;
      best = cur;
    }
  }
  res.adversarial = best;
  res.attacked_forecast = cfg.gamma * best_obj;
  res.perturbation_norm = perturbation_norm(best, w.x, w.mask, scale, cfg.norm);
  return res;
}

}  // namespace detail

// ---- attacks ----

// Iterative sign-gradient attack with analytic input gradients. The result is
// the best iterate by gamma * f, so it never does worse than the clean window
// (or the warm start, when given).
inline AttackResult whitebox_attack(const Forecaster& f, const data::FeatureWindow& w, const data::ScalingParams& sp,
                                    const AttackConfig& cfg, const Eigen::MatrixXd* warm = nullptr) {
  cfg.validate();
  return detail::sign_descent(
      w, sp, cfg, warm, [&](const Eigen::MatrixXd& x) { return f.grad_input(x); },
      [&](const Eigen::MatrixXd& x) { return f.forward(x); }, [] { return true; });
}

inline AttackResult whitebox_attack(const nn::ForecastModel& m, const data::FeatureWindow& w, const AttackConfig& cfg,
                                    const Eigen::MatrixXd* warm = nullptr) {
  return whitebox_attack(ModelForecaster(m), w, m.scaling, cfg, warm);
}

inline long masked_count(const Eigen::MatrixXd& mask) { return static_cast<long>((mask.array() > 0.0).count()); }

// Two-sided difference (f(x + delta e_k) - f(x - delta e_k)) / (2 delta) on every
// masked coordinate; consumes exactly 2 * |mask| queries.
inline Eigen::MatrixXd grad_estimate(QueryHandle& q, const Eigen::MatrixXd& x, double delta, const Eigen::MatrixXd& mask) {
  require(delta > 0.0, Errc::InvalidConfig, "delta must be > 0");
  require(mask.rows() == x.rows() && mask.cols() == x.cols(), Errc::ShapeMismatch, "mask shape differs from window");
  const long need = 2 * masked_count(mask);
  if (q.remaining() < need)
    fail(Errc::QueryBudgetExhausted, "gradient estimate needs " + std::to_string(need) + " queries");
  std::vector<Eigen::MatrixXd> probes;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> coords;
  probes.reserve(static_cast<std::size_t>(need));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (!(mask(r, c) > 0.0)) continue;
      coords.emplace_back(r, c);
      probes.push_back(x);
      probes.back()(r, c) += delta;
      probes.push_back(x);
      probes.back()(r, c) -= delta;
    }
  }
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& p : probes) ptrs.push_back(&p);
  const Eigen::VectorXd y = ptrs.empty() ? Eigen::VectorXd() : q.query_batch(ptrs);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(2 * i);
    g(coords[i].first, coords[i].second) = (y(k) - y(k + 1)) / (2.0 * delta);
  }
  return g;
}

// Same loop as the white-box attack with estimated gradients. Query use per
// attack: one clean evaluation, one for a warm start, then 2|mask| + 1 per
// iteration. Stops early, keeping the best iterate, when the budget runs out.
inline AttackResult blackbox_attack(QueryHandle& q, const data::FeatureWindow& w, const data::ScalingParams& sp,
                                    const AttackConfig& cfg, const Eigen::MatrixXd* warm = nullptr) {
  cfg.validate();
  const long start = q.used();
  const long limit = std::min(cfg.query_budget, q.remaining());
  const long per_step = 2 * masked_count(w.mask) + 1;
  auto spent = [&] { return q.used() - start; };
  const long upfront = warm ? 2 : 1;
  if (limit < upfront) {
    AttackResult r;
    r.clean = w.x;
    r.adversarial = w.x;
    r.budget_exhausted = true;
    r.clean_forecast = r.attacked_forecast = NAN;
    return r;
  }
  AttackResult r = detail::sign_descent(
      w, sp, cfg, warm, [&](const Eigen::MatrixXd& x) { return grad_estimate(q, x, cfg.delta, w.mask); },
      [&](const Eigen::MatrixXd& x) { return q.query(x); }, [&] { return limit - spent() >= per_step; });
  r.queries_used = spent();
  return r;
}

// ---- transfer ----

struct SubstituteReport {
  nn::ForecastModel model;
  nn::TrainReport training;
  long target_queries_during_crafting = 0;
};

// Trains the attacker's own forecaster on data it collected itself.
inline SubstituteReport train_substitute(const std::vector<data::FeatureWindow>& substitute_data,
                                         const nn::ModelConfig& model_cfg, const data::ScalingParams& sp,
                                         const nn::TrainConfig& train_cfg) {
  SubstituteReport s;
  s.model = nn::train(nn::init_model(model_cfg, sp), substitute_data, train_cfg, &s.training);
  return s;
}

// Crafts on the substitute (white-box) and spends exactly one target query to
// record the transferred forecast.
inline AttackResult transfer_attack(const nn::ForecastModel& substitute, QueryHandle& target,
                                    const data::FeatureWindow& w, const AttackConfig& cfg) {
  AttackResult r = whitebox_attack(substitute, w, cfg);
  const long before = target.used();
  r.attacked_forecast = target.query(r.adversarial);
  r.clean_forecast = NAN;  // the target is not asked about the clean window
  r.queries_used = target.used() - before;
  return r;
}

inline std::vector<AttackResult> learn_and_attack(const std::vector<data::FeatureWindow>& substitute_data,
                                                  QueryHandle& target, const nn::ModelConfig& model_cfg,
                                                  const data::ScalingParams& sp, const nn::TrainConfig& train_cfg,
                                                  const AttackConfig& cfg,
                                                  const std::vector<data::FeatureWindow>& windows,
                                                  SubstituteReport* report = nullptr) {
  const long before = target.used();
  SubstituteReport sub = train_substitute(substitute_data, model_cfg, sp, train_cfg);
  sub.target_queries_during_crafting = target.used() - before;
  std::vector<AttackResult> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(transfer_attack(sub.model, target, w, cfg));
  if (report) *report = std::move(sub);
  return out;
}

// ---- rolling day series ----

struct SeriesResult {
  std::vector<AttackResult> per_window;             // independent per-hour attacks
  std::vector<Eigen::MatrixXd> reconciled;          // windows after last-writer-wins merge
  std::vector<double> clean_forecast;               // scaled
  std::vector<double> attacked_forecast;            // scaled, per-hour attack results
  std::vector<double> reconciled_forecast;          // scaled, re-evaluated on the merged series
  std::map<std::int64_t, Eigen::RowVectorXd> injected;  // timestamp -> scaled temperature row deltas
  long queries_used = 0;
};

namespace detail {

// Overlapping records take the perturbation crafted for the latest window that contains them.
inline void reconcile(const std::vector<data::FeatureWindow>& ws, SeriesResult& s) {
  for (std::size_t i = 1; i < ws.size(); ++i)
    require(ws[i].target_timestamp > ws[i - 1].target_timestamp, Errc::InvalidConfig,
            "attack_series needs chronologically ordered windows");
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& w = ws[i];
    const Eigen::MatrixXd delta = (s.per_window[i].adversarial - w.x).cwiseProduct(w.mask);
    for (Eigen::Index r = 0; r < w.x.rows(); ++r) s.injected[w.row_timestamp(r)] = delta.row(r);
  }
  for (const auto& w : ws) {
    Eigen::MatrixXd x = w.x;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto it = s.injected.find(w.row_timestamp(r));
      x.row(r) = (x.row(r) + it->second).cwiseMax(0.0).cwiseMin(1.0);
    }
    s.reconciled.push_back(std::move(x));
  }
}

}  // namespace detail

// Attacks every hour of a day independently; the hourly results form the
// adversarial forecast series. Overlapping history is also merged with
// last-writer-wins into one injected temperature trace, and the forecasts on
// that trace are reported alongside.
inline SeriesResult attack_series(const Forecaster& f, const std::vector<data::FeatureWindow>& ws,
                                  const data::ScalingParams& sp, const AttackConfig& cfg) {
  SeriesResult s;
  for (const auto& w : ws) s.per_window.push_back(whitebox_attack(f, w, sp, cfg));
  detail::reconcile(ws, s);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    s.clean_forecast.push_back(s.per_window[i].clean_forecast);
    s.attacked_forecast.push_back(s.per_window[i].attacked_forecast);
    s.reconciled_forecast.push_back(f.forward(s.reconciled[i]));
  }
  return s;
}

inline SeriesResult attack_series(QueryHandle& q, const std::vector<data::FeatureWindow>& ws,
                                  const data::ScalingParams& sp, const AttackConfig& cfg) {
  SeriesResult s;
  const long before = q.used();
  for (const auto& w : ws) s.per_window.push_back(blackbox_attack(q, w, sp, cfg));
  detail::reconcile(ws, s);
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& x : s.reconciled) ptrs.push_back(&x);
  const Eigen::VectorXd y = q.query_batch(ptrs);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    s.clean_forecast.push_back(s.per_window[i].clean_forecast);
    s.attacked_forecast.push_back(s.per_window[i].attacked_forecast);
    s.reconciled_forecast.push_back(y(static_cast<Eigen::Index>(i)));
  }
  s.queries_used = q.used() - before;
  return s;
}

// ---- serialization ----

inline nlohmann::json to_json(const AttackResult& r, const data::FeatureWindow& w, const data::ScalingParams& sp) {
  nlohmann::json clean = nlohmann::json::array(), adv = nlohmann::json::array();
  for (Eigen::Index row = 0; row < w.x.rows(); ++row) {
    nlohmann::json c = nlohmann::json::array(), a = nlohmann::json::array();
    for (std::size_t s = 0; s < sp.num_stations(); ++s) {
      const std::string name = "temp_" + std::to_string(s);
      const auto col = static_cast<Eigen::Index>(1 + s);
      c.push_back(sp.invert(name, r.clean(row, col)));
      a.push_back(sp.invert(name, r.adversarial(row, col)));
    }
    clean.push_back(c);
    adv.push_back(a);
  }
  return {{"target_timestamp", data::format_timestamp(w.target_timestamp)},
          {"clean_temperatures", clean},
          {"adversarial_temperatures", adv},
          {"perturbation_norm", r.perturbation_norm},
          {"queries_used", r.queries_used},
          {"iterations", r.iterations_run},
          {"budget_exhausted", r.budget_exhausted},
          {"clean_forecast_mw", std::isfinite(r.clean_forecast) ? nlohmann::json(sp.load_to_mw(r.clean_forecast)) : nlohmann::json()},
          {"attacked_forecast_mw", std::isfinite(r.attacked_forecast) ? nlohmann::json(sp.load_to_mw(r.attacked_forecast)) : nlohmann::json()}};
}

}  // namespace loadattack::attacks
