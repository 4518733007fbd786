#pragma once

// Feedforward and simple recurrent load forecasters with hand-written
// backpropagation, plain minibatch SGD on the mean L1 loss, and JSON checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "loadattack/dataio.hpp"
#include "loadattack/error.hpp"

namespace loadattack::nn {

enum class Family { Feedforward, Recurrent };
enum class Activation { Relu, Sigmoid, Tanh };

inline const char* family_name(Family f) { return f == Family::Feedforward ? "feedforward" : "recurrent"; }

inline Family parse_family(const std::string& s) {
  if (s == "feedforward") return Family::Feedforward;
  if (s == "recurrent") return Family::Recurrent;
  fail(Errc::InvalidConfig, "unknown model family '" + s + "'");
}

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  fail(Errc::InvalidConfig, "unknown activation '" + s + "'");
}

// For the recurrent family hidden[0] is the tanh cell width and the remaining
// entries are dense layers on the final hidden state.
struct ModelConfig {
  Family family = Family::Feedforward;
  std::vector<int> hidden{512, 128, 32};
  Activation activation = Activation::Relu;
  int H = 5;
  int d = 0;
  std::uint64_t seed = 1;

  int rows() const { return H + 1; }
  int input_size() const { return rows() * d; }

  void validate() const {
    if (hidden.empty()) fail(Errc::BadShape, "need at least one hidden layer");
    for (int h : hidden)
      if (h <= 0) fail(Errc::BadShape, "hidden layer sizes must be positive");
    if (H < 0 || d <= 0) fail(Errc::BadShape, "input shape must be (H+1) x d with d > 0");
  }

  static ModelConfig feedforward(int H, int d, std::uint64_t seed = 1) {
    return {Family::Feedforward, {512, 128, 32}, Activation::Relu, H, d, seed};
  }
  static ModelConfig recurrent(int H, int d, std::uint64_t seed = 1) {
    return {Family::Recurrent, {64, 32}, Activation::Tanh, H, d, seed};
  }
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 20;
  int batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const {
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), Errc::InvalidConfig, "learning rate must be >= 0");
    require(epochs >= 1, Errc::InvalidConfig, "epochs must be >= 1");
    require(batch_size >= 1, Errc::InvalidConfig, "batch size must be >= 1");
  }

  static TrainConfig for_family(Family f, std::uint64_t seed = 1) {
    return f == Family::Feedforward ? TrainConfig{0.05, 20, 32, seed} : TrainConfig{0.05, 30, 32, seed};
  }
};

struct Metrics {
  double mae = 0.0;   // scaled units
  double mape = 0.0;  // percent, on MW
};

namespace detail {

inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

// Derivative expressed through the activation output a (and z for relu).
inline Eigen::MatrixXd activate_deriv(Activation act, const Eigen::MatrixXd& z, const Eigen::MatrixXd& a) {
  switch (act) {
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid: return (a.array() * (1.0 - a.array())).matrix();
    case Activation::Tanh: return (1.0 - a.array().square()).matrix();
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Parameter layout.
//   feedforward: weights[i], biases[i] for each dense layer incl. the 1-unit output.
//   recurrent:   weights[0] = W_x (h x d), weights[1] = W_h (h x h), biases[0] = b_h,
//                biases[1] unused (empty); then dense layers as above.
struct Params {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) n += weights[i].size() + biases[i].size();
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(size());
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      v.segment(o, weights[i].size()) = weights[i].reshaped();
      o += weights[i].size();
      v.segment(o, biases[i].size()) = biases[i];
      o += biases[i].size();
    }
    return v;
  }

  void assign(const Eigen::VectorXd& v) {
    require(v.size() == size(), Errc::ShapeMismatch, "flat parameter vector has wrong length");
    Eigen::Index o = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i].reshaped() = v.segment(o, weights[i].size());
      o += weights[i].size();
      biases[i] = v.segment(o, biases[i].size());
      o += biases[i].size();
    }
  }

  Params zeros_like() const {
    Params z = *this;
    for (auto& w : z.weights) w.setZero();
    for (auto& b : z.biases) b.setZero();
    return z;
  }

  bool finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }
};

class ForecastModel {
 public:
  ModelConfig config;
  data::ScalingParams scaling;
  Params params;

  int first_dense() const { return config.family == Family::Recurrent ? 2 : 0; }

  void check_window(const Eigen::MatrixXd& x) const {
    if (x.rows() != config.rows() || x.cols() != config.d)
      fail(Errc::ShapeMismatch, "window is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                    ", model expects " + std::to_string(config.rows()) + "x" + std::to_string(config.d));
  }

  // Scaled forecast for one (H+1) x d window.
  double forward(const Eigen::MatrixXd& x) const {
    check_window(x);
    std::vector<const Eigen::MatrixXd*> xs{&x};
    return forward_batch(xs)(0);
  }

  // Forecasts for many windows at once.
  Eigen::VectorXd forward_batch(const std::vector<const Eigen::MatrixXd*>& xs) const {
    Cache c;
    run(xs, c);
    return c.acts.back().row(0).transpose();
  }

  Eigen::VectorXd forward_batch(const std::vector<Eigen::MatrixXd>& xs) const {
    std::vector<const Eigen::MatrixXd*> ptrs;
    ptrs.reserve(xs.size());
    for (const auto& x : xs) ptrs.push_back(&x);
    return forward_batch(ptrs);
  }

  // d forecast / d window, same shape as the window.
  Eigen::MatrixXd grad_input(const Eigen::MatrixXd& x) const {
    check_window(x);
    std::vector<const Eigen::MatrixXd*> xs{&x};
    Cache c;
    run(xs, c);
    Eigen::MatrixXd dy = Eigen::MatrixXd::Ones(1, 1);
    Params* none = nullptr;
    std::vector<Eigen::MatrixXd> dx;
    backward(c, dy, none, &dx);
    return dx.front();
  }

  // Smallest |pre-activation| over relu layers (inf when no relu is used);
  // finite differences are only meaningful when this exceeds the step.
  double kink_margin(const Eigen::MatrixXd& x) const {
    if (config.activation != Activation::Relu) return INFINITY;
    std::vector<const Eigen::MatrixXd*> xs{&x};
    Cache c;
    run(xs, c);
    double m = INFINITY;
    for (std::size_t i = 0; i + 1 < c.zs.size(); ++i) m = std::min(m, c.zs[i].cwiseAbs().minCoeff());
    return m;
  }

  // Gradient of the mean L1 loss over the batch; subgradient 0 at zero residual.
  Params grad_params(const std::vector<const Eigen::MatrixXd*>& xs, const std::vector<double>& targets,
                     double* loss = nullptr) const {
    require(xs.size() == targets.size() && !xs.empty(), Errc::ShapeMismatch, "batch and targets differ in size");
    for (const auto* x : xs) check_window(*x);
    Cache c;
    run(xs, c);
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd dy(1, n);
    double l = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = c.acts.back()(0, i) - targets[static_cast<std::size_t>(i)];
      l += std::abs(r);
      dy(0, i) = detail::sign0(r) / static_cast<double>(n);
    }
    if (loss) *loss = l / static_cast<double>(n);
    Params g = params.zeros_like();
    Params* gp = &g;
    backward(c, dy, gp, nullptr);
    return g;
  }

 private:
  struct Cache {
    std::vector<Eigen::MatrixXd> seq;    // recurrent: inputs per step (d x n)
    std::vector<Eigen::MatrixXd> hs;     // recurrent: hidden states, hs[0] = 0
    std::vector<Eigen::MatrixXd> zs;     // dense pre-activations
    std::vector<Eigen::MatrixXd> acts;   // acts[0] = dense input, acts[i+1] = layer i output
  };

  void run(const std::vector<const Eigen::MatrixXd*>& xs, Cache& c) const {
    const auto n = static_cast<Eigen::Index>(xs.size());
    const int R = config.rows(), d = config.d;
    if (config.family == Family::Feedforward) {
      Eigen::MatrixXd in(R * d, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        // Row-major flattening: entry (r, j) -> r * d + j.
        const Eigen::MatrixXd& x = *xs[static_cast<std::size_t>(i)];
        for (int r = 0; r < R; ++r) in.col(i).segment(r * d, d) = x.row(r).transpose();
      }
      c.acts.push_back(std::move(in));
    } else {
      const auto& wx = params.weights[0];
      const auto& wh = params.weights[1];
      const auto& bh = params.biases[0];
      c.hs.push_back(Eigen::MatrixXd::Zero(wh.rows(), n));
      for (int r = 0; r < R; ++r) {
        Eigen::MatrixXd xt(d, n);
        for (Eigen::Index i = 0; i < n; ++i) xt.col(i) = xs[static_cast<std::size_t>(i)]->row(r).transpose();
        Eigen::MatrixXd s = wx * xt + wh * c.hs.back();
        s.colwise() += bh;
        c.hs.push_back(s.array().tanh().matrix());
        c.seq.push_back(std::move(xt));
      }
      c.acts.push_back(c.hs.back());
    }
    const int L = static_cast<int>(params.weights.size());
    for (int l = first_dense(); l < L; ++l) {
      const auto li = static_cast<std::size_t>(l);
      Eigen::MatrixXd z = params.weights[li] * c.acts.back();
      z.colwise() += params.biases[li];
      const bool out = l == L - 1;
      Eigen::MatrixXd a = detail::activate(out ? Activation::Sigmoid : config.activation, z);
      c.zs.push_back(std::move(z));
      c.acts.push_back(std::move(a));
    }
  }

  void backward(const Cache& c, const Eigen::MatrixXd& dy, Params* g, std::vector<Eigen::MatrixXd>* dx) const {
    const int L = static_cast<int>(params.weights.size());
    const int f = first_dense();
    Eigen::MatrixXd da = dy;
    for (int l = L - 1; l >= f; --l) {
      const auto li = static_cast<std::size_t>(l);
      const auto k = static_cast<std::size_t>(l - f);
      const bool out = l == L - 1;
      Eigen::MatrixXd dz =
          da.cwiseProduct(detail::activate_deriv(out ? Activation::Sigmoid : config.activation, c.zs[k], c.acts[k + 1]));
      if (g) {
        g->weights[li] += dz * c.acts[k].transpose();
        g->biases[li] += dz.rowwise().sum();
      }
      da = params.weights[li].transpose() * dz;
    }
    const int R = config.rows(), d = config.d;
    const auto n = dy.cols();
    if (config.family == Family::Feedforward) {
      if (dx) {
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::MatrixXd gx(R, d);
          for (int r = 0; r < R; ++r) gx.row(r) = da.col(i).segment(r * d, d).transpose();
          dx->push_back(std::move(gx));
        }
      }
      return;
    }
    // Backpropagation through time.
    const auto& wx = params.weights[0];
    const auto& wh = params.weights[1];
    std::vector<Eigen::MatrixXd> dxt(static_cast<std::size_t>(R));
    Eigen::MatrixXd dh = da;
    for (int r = R - 1; r >= 0; --r) {
      const auto& h = c.hs[static_cast<std::size_t>(r) + 1];
      Eigen::MatrixXd ds = dh.cwiseProduct((1.0 - h.array().square()).matrix());
      if (g) {
        g->weights[0] += ds * c.seq[static_cast<std::size_t>(r)].transpose();
        g->weights[1] += ds * c.hs[static_cast<std::size_t>(r)].transpose();
        g->biases[0] += ds.rowwise().sum();
      }
      if (dx) dxt[static_cast<std::size_t>(r)] = wx.transpose() * ds;
      dh = wh.transpose() * ds;
    }
    if (dx) {
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::MatrixXd gx(R, d);
        for (int r = 0; r < R; ++r) gx.row(r) = dxt[static_cast<std::size_t>(r)].col(i).transpose();
        dx->push_back(std::move(gx));
      }
    }
  }
};

// Glorot-uniform weights, zero biases.
inline ForecastModel init_model(const ModelConfig& cfg, const data::ScalingParams& scaling = {}) {
  cfg.validate();
  ForecastModel m;
  m.config = cfg;
  m.scaling = scaling;
  std::mt19937_64 rng(cfg.seed);
  auto glorot = [&](int rows, int cols) {
    const double lim = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-lim, lim);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    return w;
  };
  int in = cfg.input_size();
  std::size_t first = 0;
  if (cfg.family == Family::Recurrent) {
    const int h = cfg.hidden[0];
    m.params.weights.push_back(glorot(h, cfg.d));
    m.params.biases.push_back(Eigen::VectorXd::Zero(h));
    m.params.weights.push_back(glorot(h, h));
    m.params.biases.push_back(Eigen::VectorXd());
    in = h;
    first = 1;
  }
  for (std::size_t i = first; i <= cfg.hidden.size(); ++i) {
    const int out = i < cfg.hidden.size() ? cfg.hidden[i] : 1;
    m.params.weights.push_back(glorot(out, in));
    m.params.biases.push_back(Eigen::VectorXd::Zero(out));
    in = out;
  }
  return m;
}

// ---- training and evaluation ----

struct TrainReport {
  std::vector<double> epoch_loss;  // [0] = before training, then one per epoch
  double initial_loss() const { return epoch_loss.front(); }
  double final_loss() const { return epoch_loss.back(); }
};

inline double mean_l1(const ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  double s = 0.0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < ws.size(); i += kChunk) {
    std::vector<const Eigen::MatrixXd*> xs;
    const std::size_t e = std::min(ws.size(), i + kChunk);
    for (std::size_t j = i; j < e; ++j) xs.push_back(&ws[j].x);
    const Eigen::VectorXd y = m.forward_batch(xs);
    for (std::size_t j = i; j < e; ++j) s += std::abs(y(static_cast<Eigen::Index>(j - i)) - ws[j].target);
  }
  return s / static_cast<double>(ws.size());
}

inline ForecastModel train(const ForecastModel& init, const std::vector<data::FeatureWindow>& ws, const TrainConfig& cfg,
                           TrainReport* report = nullptr) {
  cfg.validate();
  require(!ws.empty(), Errc::InsufficientHistory, "no training windows");
  ForecastModel m = init;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(ws.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainReport rep;
  rep.epoch_loss.push_back(mean_l1(m, ws));
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int ep = 0; ep < cfg.epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); i += bs) {
      const std::size_t e = std::min(order.size(), i + bs);
      std::vector<const Eigen::MatrixXd*> xs;
      std::vector<double> ts;
      for (std::size_t j = i; j < e; ++j) {
        xs.push_back(&ws[order[j]].x);
        ts.push_back(ws[order[j]].target);
      }
      const Params g = m.grad_params(xs, ts);
      for (std::size_t l = 0; l < g.weights.size(); ++l) {
        m.params.weights[l] -= cfg.learning_rate * g.weights[l];
        m.params.biases[l] -= cfg.learning_rate * g.biases[l];
      }
    }
    const double loss = mean_l1(m, ws);
    if (!std::isfinite(loss) || !m.params.finite())
      fail(Errc::Diverged, "training diverged in epoch " + std::to_string(ep + 1));
    rep.epoch_loss.push_back(loss);
  }
  if (report) *report = std::move(rep);
  return m;
}

inline Metrics metrics_from(const data::ScalingParams& sp, const std::vector<double>& predicted,
                            const std::vector<double>& truth) {
  require(predicted.size() == truth.size() && !truth.empty(), Errc::ShapeMismatch, "prediction/truth size mismatch");
  Metrics out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out.mae += std::abs(predicted[i] - truth[i]);
    const double p = sp.load_to_mw(predicted[i]), t = sp.load_to_mw(truth[i]);
    out.mape += std::abs(p - t) / t;
  }
  out.mae /= static_cast<double>(truth.size());
  out.mape *= 100.0 / static_cast<double>(truth.size());
  return out;
}

inline std::vector<double> predict(const ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  std::vector<double> out;
  out.reserve(ws.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < ws.size(); i += kChunk) {
    std::vector<const Eigen::MatrixXd*> xs;
    const std::size_t e = std::min(ws.size(), i + kChunk);
    for (std::size_t j = i; j < e; ++j) xs.push_back(&ws[j].x);
    const Eigen::VectorXd y = m.forward_batch(xs);
    for (Eigen::Index j = 0; j < y.size(); ++j) out.push_back(y(j));
  }
  return out;
}

inline Metrics evaluate(const ForecastModel& m, const std::vector<data::FeatureWindow>& ws) {
  require(!ws.empty(), Errc::InsufficientHistory, "no windows to evaluate");
  std::vector<double> truth;
  for (const auto& w : ws) truth.push_back(w.target);
  return metrics_from(m.scaling, predict(m, ws), truth);
}

// ---- checkpoints ----

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json scaling_to_json(const data::ScalingParams& s) {
  return {{"load_min", s.load_min}, {"load_max", s.load_max}, {"temp_min", s.temp_min}, {"temp_max", s.temp_max}};
}

inline data::ScalingParams scaling_from_json(const nlohmann::json& j) {
  data::ScalingParams s;
  s.load_min = j.at("load_min").get<double>();
  s.load_max = j.at("load_max").get<double>();
  s.temp_min = j.at("temp_min").get<std::vector<double>>();
  s.temp_max = j.at("temp_max").get<std::vector<double>>();
  require(s.temp_min.size() == s.temp_max.size(), Errc::SchemaError, "temp_min/temp_max lengths differ");
  return s;
}

inline nlohmann::json to_json(const ForecastModel& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < m.params.weights.size(); ++i) {
    const auto& w = m.params.weights[i];
    std::vector<double> wv(w.data(), w.data() + w.size());
    std::vector<double> bv(m.params.biases[i].data(), m.params.biases[i].data() + m.params.biases[i].size());
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weights_colmajor", wv}, {"bias", bv}});
  }
  return {{"version", kCheckpointVersion},
          {"config",
           {{"family", family_name(m.config.family)},
            {"hidden", m.config.hidden},
            {"activation", activation_name(m.config.activation)},
            {"H", m.config.H},
            {"d", m.config.d},
            {"seed", m.config.seed}}},
          {"scaling", scaling_to_json(m.scaling)},
          {"layers", layers}};
}

inline ForecastModel model_from_json(const nlohmann::json& j) {
  try {
    require(j.at("version").get<int>() == kCheckpointVersion, Errc::SchemaError, "unsupported checkpoint version");
    const auto& c = j.at("config");
    ModelConfig cfg;
    cfg.family = parse_family(c.at("family").get<std::string>());
    cfg.hidden = c.at("hidden").get<std::vector<int>>();
    cfg.activation = parse_activation(c.at("activation").get<std::string>());
    cfg.H = c.at("H").get<int>();
    cfg.d = c.at("d").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    ForecastModel m = init_model(cfg, scaling_from_json(j.at("scaling")));
    const auto& layers = j.at("layers");
    require(layers.size() == m.params.weights.size(), Errc::SchemaError, "layer count does not match config");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& w = m.params.weights[i];
      const auto wv = layers[i].at("weights_colmajor").get<std::vector<double>>();
      const auto bv = layers[i].at("bias").get<std::vector<double>>();
      require(layers[i].at("rows").get<Eigen::Index>() == w.rows() && layers[i].at("cols").get<Eigen::Index>() == w.cols() &&
                  static_cast<Eigen::Index>(wv.size()) == w.size() &&
                  static_cast<Eigen::Index>(bv.size()) == m.params.biases[i].size(),
              Errc::SchemaError, "layer " + std::to_string(i) + " has the wrong shape");
      w = Eigen::Map<const Eigen::MatrixXd>(wv.data(), w.rows(), w.cols());
      m.params.biases[i] = Eigen::Map<const Eigen::VectorXd>(bv.data(), static_cast<Eigen::Index>(bv.size()));
    }
    require(m.params.finite(), Errc::SchemaError, "non-finite parameters in checkpoint");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, std::string("checkpoint: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ForecastModel& m) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << to_json(m).dump() << "\n";
}

inline ForecastModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::SchemaError, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace loadattack::nn
