#pragma once

// Central finite-difference reference for the forecaster gradients.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "loadattack/neuralnet.hpp"

namespace oracle {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

struct GradCheck {
  int probes = 0;
  int input_coords = 0;
  int param_coords = 0;
  double worst_input = 0.0;
  double worst_param = 0.0;
};

inline Eigen::MatrixXd random_window(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = u(rng);
  return x;
}

// Each probe draws a fresh model (family, activation, sizes, weights and
// biases) and a random batch, then compares every input coordinate of the
// first window and a sample of parameter coordinates against central
// differences with the given step.
inline GradCheck gradient_probes(std::uint64_t seed, int probes, double step = 1e-4, int params_per_probe = 24) {
  using namespace loadattack::nn;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GradCheck out;
  const Activation acts[] = {Activation::Tanh, Activation::Sigmoid, Activation::Relu};
  int done = 0;
  while (done < probes) {
    ModelConfig cfg;
    cfg.family = done % 2 == 0 ? Family::Feedforward : Family::Recurrent;
    cfg.activation = acts[(done / 2) % 3];
    cfg.H = 1 + static_cast<int>(rng() % 5);
    cfg.d = 2 + static_cast<int>(rng() % 10);
    cfg.seed = rng();
    // Every tenth probe uses the full default widths.
    if (done % 10 == 9) {
      cfg.hidden = cfg.family == Family::Feedforward ? std::vector<int>{512, 128, 32} : std::vector<int>{64, 32};
    } else {
      cfg.hidden = {3 + static_cast<int>(rng() % 12), 2 + static_cast<int>(rng() % 6)};
    }
    ForecastModel m = init_model(cfg);
    // Random biases so the probe is not special-cased by the zero init.
    for (auto& b : m.params.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.2 * (u(rng) - 0.5);

    std::vector<Eigen::MatrixXd> xs;
    std::vector<double> ts;
    for (int i = 0; i < 3; ++i) {
      xs.push_back(random_window(rng, cfg.rows(), cfg.d));
      ts.push_back(u(rng));
    }
    std::vector<const Eigen::MatrixXd*> ptrs;
    for (const auto& x : xs) ptrs.push_back(&x);

    // Skip draws sitting within reach of a relu kink or an L1 kink.
    bool near_kink = false;
    for (const auto& x : xs) near_kink |= m.kink_margin(x) < 1e-3;
    const Eigen::VectorXd y = m.forward_batch(ptrs);
    for (int i = 0; i < 3; ++i) near_kink |= std::abs(y(i) - ts[static_cast<std::size_t>(i)]) < 1e-3;
    if (near_kink) continue;

    const Eigen::MatrixXd gi = m.grad_input(xs[0]);
    for (Eigen::Index r = 0; r < gi.rows(); ++r) {
      for (Eigen::Index c = 0; c < gi.cols(); ++c) {
        Eigen::MatrixXd xp = xs[0], xm = xs[0];
        xp(r, c) += step;
        xm(r, c) -= step;
        const double fd = (m.forward(xp) - m.forward(xm)) / (2.0 * step);
        out.worst_input = std::max(out.worst_input, rel_err(gi(r, c), fd));
        ++out.input_coords;
      }
    }

    const Eigen::VectorXd gp = m.grad_params(ptrs, ts).flatten();
    const Eigen::VectorXd theta = m.params.flatten();
    auto loss_at = [&](const Eigen::VectorXd& th) {
      ForecastModel mm = m;
      mm.params.assign(th);
      double l = 0.0;
      mm.grad_params(ptrs, ts, &l);
      return l;
    };
    for (int k = 0; k < params_per_probe; ++k) {
      const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(theta.size()));
      Eigen::VectorXd tp = theta, tm = theta;
      tp(j) += step;
      tm(j) -= step;
      const double fd = (loss_at(tp) - loss_at(tm)) / (2.0 * step);
      out.worst_param = std::max(out.worst_param, rel_err(gp(j), fd));
      ++out.param_coords;
    }
    ++done;
  }
  out.probes = done;
  return out;
}

}  // namespace oracle
