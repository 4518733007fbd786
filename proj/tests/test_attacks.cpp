#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "gradcheck.hpp"
#include "loadattack/attacks.hpp"

using namespace loadattack;
using namespace loadattack::attacks;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::IoError;
}

struct Trained {
  data::ScalingParams sp;
  std::vector<data::FeatureWindow> train, test;
  nn::ForecastModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained x;
    data::SynthConfig sc;
    const auto out = data::synth_generate(sc);
    const auto [tr, te] = data::split(out.aggregate, 0.8);
    x.sp = data::fit_scaling(tr);
    x.train = data::make_windows(tr, 5, 1, x.sp);
    x.test = data::make_windows_for_targets(out.aggregate, 5, 1, x.sp, tr.size(), out.aggregate.size());
    const auto cfg = nn::ModelConfig::recurrent(5, static_cast<int>(tr.feature_dim()), 1);
    x.model = nn::train(nn::init_model(cfg, x.sp), x.train, nn::TrainConfig::for_family(cfg.family, 1));
    return x;
  }();
  return t;
}

// Small window with two temperature columns and unit physical scale.
data::FeatureWindow toy_window(std::mt19937_64& rng, int rows = 3, int cols = 6) {
  data::FeatureWindow w;
  w.x = oracle::random_window(rng, rows, cols);
  w.mask = Eigen::MatrixXd::Zero(rows, cols);
  w.mask.middleCols(1, 2).setOnes();
  w.target_timestamp = 100;
  return w;
}

data::ScalingParams unit_scaling() {
  data::ScalingParams sp;
  sp.load_min = 0.0;
  sp.load_max = 1.0;
  sp.temp_min = {0.0, 0.0};
  sp.temp_max = {1.0, 1.0};
  return sp;
}

class SquareForecaster : public Forecaster {
 public:
  double forward(const Eigen::MatrixXd& x) const override { return x(0, 1) * x(0, 1); }
  Eigen::MatrixXd grad_input(const Eigen::MatrixXd&) const override { throw std::logic_error("no gradients"); }
};

// Answers queries but refuses gradient access; black-box attacks must still work.
class QueryOnly : public Forecaster {
 public:
  explicit QueryOnly(const Forecaster& f) : f_(f) {}
  double forward(const Eigen::MatrixXd& x) const override { return f_.forward(x); }
  Eigen::MatrixXd grad_input(const Eigen::MatrixXd&) const override { throw std::logic_error("gradient requested"); }

 private:
  const Forecaster& f_;
};

}  // namespace

TEST(Project, InsideBallUnchanged) {
  std::mt19937_64 rng(1);
  const auto w = toy_window(rng);
  const Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(6);
  Eigen::MatrixXd adv = w.x;
  adv.middleCols(1, 2).array() += 0.01;
  adv = adv.cwiseMin(1.0);
  for (Norm n : {Norm::Linf, Norm::L1, Norm::L2}) {
    const auto p = project(adv, w.x, w.mask, scale, 0.5, n);
    EXPECT_EQ(p, adv);
  }
}

TEST(Project, ZeroBudgetAndClampArithmetic) {
  std::mt19937_64 rng(2);
  const auto w = toy_window(rng);
  const Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(6);
  Eigen::MatrixXd adv = Eigen::MatrixXd::Constant(3, 6, 0.77);
  for (Norm n : {Norm::Linf, Norm::L1, Norm::L2}) {
    const auto p = project(adv, w.x, w.mask, scale, 0.0, n);
    EXPECT_EQ(p, w.x);
  }
  Eigen::MatrixXd clean = Eigen::MatrixXd::Constant(1, 6, 0.5), a = clean;
  a(0, 1) = 0.9;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(1, 6);
  mask(0, 1) = 1.0;
  EXPECT_NEAR(project(a, clean, mask, scale, 0.1, Norm::Linf)(0, 1), 0.6, 1e-15);
  // Physical budget 3 degrees on a 30 degree span is 0.1 scaled.
  Eigen::RowVectorXd s30 = scale;
  s30(1) = 30.0;
  EXPECT_NEAR(project(a, clean, mask, s30, 3.0, Norm::Linf)(0, 1), 0.6, 1e-15);
}

TEST(Project, L2RadialAndL1Optimal) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(6);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd clean = Eigen::MatrixXd::Constant(1, 6, 0.5);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(1, 6);
    mask.middleCols(1, 4).setOnes();
    Eigen::MatrixXd adv = clean;
    for (int c = 1; c <= 4; ++c) adv(0, c) = 0.5 + 0.4 * u(rng);
    const double eps = 0.05 + 0.1 * (u(rng) + 1.0);
    const auto p2 = project(adv, clean, mask, scale, eps, Norm::L2);
    const Eigen::RowVectorXd d = adv.row(0) - clean.row(0);
    if (d.norm() > eps) {
      const Eigen::RowVectorXd pd = p2.row(0) - clean.row(0);
      EXPECT_NEAR(pd.norm(), eps, 1e-12);
      EXPECT_NEAR((pd - d * eps / d.norm()).norm(), 0.0, 1e-12);
    }
    const auto p1 = project(adv, clean, mask, scale, eps, Norm::L1);
    const Eigen::RowVectorXd d1 = p1.row(0) - clean.row(0);
    EXPECT_LE(d1.cwiseAbs().sum(), eps + 1e-12);
    // No random point of the L1 ball is closer to adv than the projection.
    const double best = (p1 - adv).norm();
    for (int k = 0; k < 300; ++k) {
      Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(6);
      for (int c = 1; c <= 4; ++c) z(c) = u(rng);
      z *= eps / std::max(eps, z.cwiseAbs().sum()) * std::abs(u(rng));
      EXPECT_GE((clean.row(0) + z - adv.row(0)).norm(), best - 1e-12);
    }
  }
}

TEST(WhiteBox, ZeroStepReturnsClean) {
  std::mt19937_64 rng(4);
  const auto w = toy_window(rng);
  const LinearForecaster f(oracle::random_window(rng, 3, 6));
  AttackConfig cfg;
  cfg.iterations = 1;
  cfg.alpha = 0.0;
  cfg.epsilon = 0.3;
  const auto r = whitebox_attack(f, w, unit_scaling(), cfg);
  EXPECT_EQ(r.adversarial, w.x);
  EXPECT_EQ(r.attacked_forecast, r.clean_forecast);
}

TEST(WhiteBox, LinearClosedForm) {
  std::mt19937_64 rng(5);
  for (int gamma : {1, -1}) {
    auto w = toy_window(rng);
    w.x.middleCols(1, 2).setConstant(0.5);
    Eigen::MatrixXd wt = oracle::random_window(rng, 3, 6).array() - 0.5;
    const LinearForecaster f(wt);
    AttackConfig cfg;
    cfg.gamma = gamma;
    cfg.epsilon = 0.2;
    cfg.alpha = 0.25;
    cfg.iterations = 1;
    const auto r = whitebox_attack(f, w, unit_scaling(), cfg);
    Eigen::MatrixXd expect = w.x;
    for (Eigen::Index i = 0; i < 3; ++i)
      for (Eigen::Index c = 1; c <= 2; ++c) expect(i, c) -= gamma * 0.2 * (wt(i, c) > 0 ? 1.0 : -1.0);
    EXPECT_NEAR((r.adversarial - expect).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_LE(gamma * r.attacked_forecast, gamma * r.clean_forecast);
    EXPECT_NEAR(r.perturbation_norm, 0.2, 1e-12);
  }
}

TEST(WhiteBox, TrainedModelBestIterateAndNorm) {
  const auto& t = trained();
  AttackConfig cfg;
  cfg.epsilon = 5.0;
  for (Norm n : {Norm::Linf, Norm::L2, Norm::L1}) {
    cfg.norm = n;
    for (std::size_t i = 0; i < t.test.size(); i += 37) {
      const auto r = whitebox_attack(t.model, t.test[i], cfg);
      EXPECT_LE(r.attacked_forecast, r.clean_forecast);
      EXPECT_LE(r.perturbation_norm, cfg.epsilon + 1e-9);
      const Eigen::MatrixXd off = (r.adversarial - r.clean).cwiseProduct((1.0 - t.test[i].mask.array()).matrix());
      EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Barrier, DomainAndCompliance) {
  const auto& t = trained();
  AttackConfig cfg;
  cfg.mode = Mode::Barrier;
  cfg.norm = Norm::L2;
  cfg.epsilon = 0.0;
  EXPECT_EQ(code_of([&] { whitebox_attack(t.model, t.test[0], cfg); }), Errc::BarrierDomain);
  cfg.epsilon = 5.0;
  for (std::size_t i = 0; i < t.test.size(); i += 97) {
    const auto r = whitebox_attack(t.model, t.test[i], cfg);
    EXPECT_LT(r.perturbation_norm, cfg.epsilon);
    EXPECT_LE(r.attacked_forecast, r.clean_forecast);
  }
}

TEST(GradEstimate, QuadraticConstantAndCount) {
  const SquareForecaster sq;
  QueryHandle q(sq);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 3);
  x(0, 1) = 0.5;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(1, 3);
  mask(0, 1) = mask(0, 2) = 1.0;
  const auto g = grad_estimate(q, x, 0.01, mask);
  EXPECT_NEAR(g(0, 1), 1.0, 1e-12);
  EXPECT_EQ(g(0, 2), 0.0);
  EXPECT_EQ(q.used(), 4);
  QueryHandle small(sq, 3);
  EXPECT_EQ(code_of([&] { grad_estimate(small, x, 0.01, mask); }), Errc::QueryBudgetExhausted);
  EXPECT_EQ(small.used(), 0);
}

TEST(GradEstimate, MatchesAnalyticOnTrainedModel) {
  const auto& t = trained();
  const ModelForecaster mf(t.model);
  QueryHandle q(mf);
  double worst = 1.0;
  for (std::size_t i = 0; i < t.test.size(); i += 50) {
    const auto& w = t.test[i];
    const Eigen::MatrixXd ga = t.model.grad_input(w.x).cwiseProduct(w.mask);
    const Eigen::MatrixXd ge = grad_estimate(q, w.x, 1e-3, w.mask);
    const double cs = (ga.array() * ge.array()).sum() / (ga.norm() * ge.norm());
    worst = std::min(worst, cs);
  }
  EXPECT_GT(worst, 0.95);
}

TEST(BlackBox, BudgetTooSmallGivesClean) {
  std::mt19937_64 rng(6);
  const auto w = toy_window(rng);
  const LinearForecaster f(oracle::random_window(rng, 3, 6));
  QueryHandle q(f);
  AttackConfig cfg;
  cfg.epsilon = 0.2;
  cfg.query_budget = 2 * 6 - 1;
  const auto r = blackbox_attack(q, w, unit_scaling(), cfg);
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_EQ(r.adversarial, w.x);
  EXPECT_EQ(r.iterations_run, 0);
  EXPECT_LE(r.queries_used, cfg.query_budget);
}

TEST(BlackBox, MatchesWhiteBoxOnLinearModel) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = toy_window(rng);
    const LinearForecaster f(oracle::random_window(rng, 3, 6).array() - 0.5);
    const QueryOnly blind(f);
    QueryHandle q(blind);
    AttackConfig cfg;
    cfg.gamma = trial % 2 ? 1 : -1;
    cfg.epsilon = 0.15;
    cfg.iterations = 6;
    const auto wb = whitebox_attack(f, w, unit_scaling(), cfg);
    const auto bb = blackbox_attack(q, w, unit_scaling(), cfg);
    EXPECT_EQ(wb.adversarial, bb.adversarial);
    EXPECT_EQ(bb.queries_used, 1 + cfg.iterations * (2 * 6 + 1));
    EXPECT_EQ(q.used(), bb.queries_used);
  }
}

TEST(BlackBox, PartialBudgetKeepsBestIterate) {
  std::mt19937_64 rng(8);
  const auto w = toy_window(rng);
  const LinearForecaster f(oracle::random_window(rng, 3, 6).array() - 0.5);
  QueryHandle q(f);
  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.iterations = 10;
  cfg.query_budget = 1 + 3 * 13 + 5;
  const auto r = blackbox_attack(q, w, unit_scaling(), cfg);
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_EQ(r.iterations_run, 3);
  EXPECT_EQ(r.queries_used, 1 + 3 * 13);
  EXPECT_LE(r.attacked_forecast, r.clean_forecast);
}

TEST(QueryHandle, ConcurrentCounting) {
  const SquareForecaster sq;
  QueryHandle q(sq);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 2, 0.5);
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i)
    ts.emplace_back([&] {
      for (int k = 0; k < 500; ++k) q.query(x);
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(q.used(), 2000);
}

TEST(Transfer, ExactCopyMatchesWhiteBoxAndSpendsOneQuery) {
  const auto& t = trained();
  const ModelForecaster mf(t.model);
  QueryHandle q(mf);
  AttackConfig cfg;
  for (std::size_t i = 0; i < t.test.size(); i += 113) {
    const auto wb = whitebox_attack(t.model, t.test[i], cfg);
    const auto tr = transfer_attack(t.model, q, t.test[i], cfg);
    EXPECT_EQ(tr.adversarial, wb.adversarial);
    EXPECT_EQ(tr.attacked_forecast, wb.attacked_forecast);
    EXPECT_EQ(tr.queries_used, 1);
  }
}

TEST(Transfer, SubstituteTrainingUsesNoTargetQueries) {
  const auto& t = trained();
  const ModelForecaster mf(t.model);
  QueryHandle q(mf);
  std::vector<data::FeatureWindow> sub(t.train.begin(), t.train.begin() + 200);
  auto mc = nn::ModelConfig::recurrent(5, t.model.config.d, 77);
  mc.hidden = {16, 8};
  SubstituteReport rep;
  std::vector<data::FeatureWindow> few(t.test.begin(), t.test.begin() + 5);
  const auto res = learn_and_attack(sub, q, mc, t.sp, {0.05, 2, 32, 3}, AttackConfig{}, few, &rep);
  EXPECT_EQ(rep.target_queries_during_crafting, 0);
  EXPECT_EQ(q.used(), 5);
  EXPECT_EQ(res.size(), 5u);
}

TEST(Series, ZeroBudgetIdentityAndDirection) {
  const auto& t = trained();
  const ModelForecaster mf(t.model);
  std::vector<data::FeatureWindow> day(t.test.begin() + 48, t.test.begin() + 72);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  const auto s0 = attack_series(mf, day, t.sp, cfg);
  for (std::size_t i = 0; i < day.size(); ++i) EXPECT_EQ(s0.attacked_forecast[i], s0.clean_forecast[i]);
  cfg.epsilon = 5.0;
  for (int gamma : {1, -1}) {
    cfg.gamma = gamma;
    const auto s = attack_series(mf, day, t.sp, cfg);
    double mc = 0.0, ma = 0.0;
    for (std::size_t i = 0; i < day.size(); ++i) {
      mc += s.clean_forecast[i];
      ma += s.attacked_forecast[i];
    }
    EXPECT_LT(gamma * ma, gamma * mc);
    // Every merged window still lies in the ball around its clean window.
    const auto scale = column_scale(t.sp, day[0].x.cols());
    for (std::size_t i = 0; i < day.size(); ++i)
      EXPECT_LE(perturbation_norm(s.reconciled[i], day[i].x, day[i].mask, scale, cfg.norm), cfg.epsilon + 1e-9);
    // The last window's history is entirely its own perturbation.
    EXPECT_EQ(s.reconciled.back(), s.per_window.back().adversarial);
  }
  const ModelForecaster f2(t.model);
  QueryHandle q(f2);
  const auto sb = attack_series(q, day, t.sp, cfg);
  EXPECT_EQ(sb.queries_used, q.used());
}

TEST(Direction, TrainedModelMovesForecastBothWays) {
  const auto& t = trained();
  AttackConfig cfg;
  cfg.epsilon = 5.0;
  for (int gamma : {1, -1}) {
    cfg.gamma = gamma;
    int moved = 0, total = 0;
    for (std::size_t i = 0; i < t.test.size(); i += 7) {
      const auto r = whitebox_attack(t.model, t.test[i], cfg);
      moved += gamma * r.attacked_forecast < gamma * r.clean_forecast;
      ++total;
    }
    EXPECT_GE(moved, 0.95 * total);
  }
}

TEST(Monotone, WarmStartNeverWorse) {
  const auto& t = trained();
  const ModelForecaster mf(t.model);
  QueryHandle q(mf);
  AttackConfig c1, c2;
  c1.epsilon = 2.0;
  c2.epsilon = 3.0;
  for (std::size_t i = 0; i < t.test.size(); i += 61) {
    const auto r1 = whitebox_attack(mf, t.test[i], t.sp, c1);
    const auto r2 = whitebox_attack(mf, t.test[i], t.sp, c2, &r1.adversarial);
    EXPECT_LE(r2.attacked_forecast, r1.attacked_forecast);
    const auto b1 = blackbox_attack(q, t.test[i], t.sp, c1);
    const auto b2 = blackbox_attack(q, t.test[i], t.sp, c2, &b1.adversarial);
    EXPECT_LE(b2.attacked_forecast, b1.attacked_forecast);
  }
}

TEST(Json, RecordsPhysicalSeries) {
  const auto& t = trained();
  const auto r = whitebox_attack(t.model, t.test[0], AttackConfig{});
  const auto j = to_json(r, t.test[0], t.sp);
  EXPECT_EQ(j["clean_temperatures"].size(), 6u);
  EXPECT_LE(j["perturbation_norm"].get<double>(), 5.0 + 1e-9);
  EXPECT_GT(j["clean_forecast_mw"].get<double>(), 1000.0);
}
