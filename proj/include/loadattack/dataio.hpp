#pragma once

// Load/weather records, CSV ingestion, min-max scaling, sliding windows and a
// synthetic weather-driven load generator.
//
// Feature layout of one time step (d = 1 + stations + 38):
//   [load, temp_0..temp_{s-1}, hour(24), day-of-week(7), season(4), condition(3)]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadattack/error.hpp"

namespace loadattack::data {

enum class Condition { Clear = 0, Cloudy = 1, Rain = 2 };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::Clear: return "clear";
    case Condition::Cloudy: return "cloudy";
    case Condition::Rain: return "rain";
  }
  return "?";
}

inline constexpr int kHourSlots = 24;
inline constexpr int kDowSlots = 7;
inline constexpr int kSeasonSlots = 4;
inline constexpr int kCondSlots = 3;
inline constexpr int kIndicatorDims = kHourSlots + kDowSlots + kSeasonSlots + kCondSlots;

// ---- calendar helpers (timestamps are whole hours since 1970-01-01T00 UTC) ----

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline int hour_of_day(std::int64_t ts) { return static_cast<int>(ts - floor_div(ts, 24) * 24); }

// Monday = 0. 1970-01-01 was a Thursday.
inline int day_of_week(std::int64_t ts) {
  const std::int64_t days = floor_div(ts, 24);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

inline std::chrono::year_month_day civil_date(std::int64_t ts) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{floor_div(ts, 24)}}};
}

// Meteorological seasons: 0 = DJF, 1 = MAM, 2 = JJA, 3 = SON.
inline int season(std::int64_t ts) {
  const unsigned m = static_cast<unsigned>(civil_date(ts).month());
  return static_cast<int>((m % 12) / 3);
}

inline int day_of_year(std::int64_t ts) {
  const auto ymd = civil_date(ts);
  const auto jan1 = std::chrono::sys_days{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((std::chrono::sys_days{ymd} - jan1).count());
}

inline std::string format_timestamp(std::int64_t ts) {
  const auto ymd = civil_date(ts);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour_of_day(ts));
  return buf;
}

// Parses "YYYY-MM-DDTHH:00"; returns false on malformed input.
inline bool parse_timestamp(const std::string& s, std::int64_t& out) {
  int y, mo, d, h, mi;
  char tail;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d%c", &y, &mo, &d, &h, &mi, &tail) != 5) return false;
  if (s.size() != 16 || mi != 0 || h < 0 || h > 23) return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  out = std::chrono::sys_days{ymd}.time_since_epoch().count() * 24 + h;
  return true;
}

inline std::int64_t timestamp_of(int year, unsigned month, unsigned day, int hour = 0) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  return std::chrono::sys_days{ymd}.time_since_epoch().count() * 24 + hour;
}

// ---- records and datasets ----

struct FeatureRecord {
  std::int64_t timestamp = 0;
  double load = 0.0;
  std::vector<double> temps;
  Condition cond = Condition::Clear;
};

struct Dataset {
  std::vector<FeatureRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  std::size_t num_stations() const { return records.empty() ? 0 : records.front().temps.size(); }
  std::size_t feature_dim() const { return 1 + num_stations() + kIndicatorDims; }

  // Hourly, gap-free, positive loads, consistent station count.
  void validate() const {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!(r.load > 0.0) || !std::isfinite(r.load))
        fail(Errc::NonPositiveLoad, "load at " + format_timestamp(r.timestamp) + " is not positive");
      if (r.temps.size() != num_stations()) fail(Errc::MalformedRow, "inconsistent station count");
      for (double t : r.temps)
        if (!std::isfinite(t)) fail(Errc::MalformedRow, "non-finite temperature at " + format_timestamp(r.timestamp));
      if (i > 0 && r.timestamp != records[i - 1].timestamp + 1)
        fail(Errc::TimestampGap, "gap between " + format_timestamp(records[i - 1].timestamp) + " and " +
                                     format_timestamp(r.timestamp));
    }
  }

  Dataset slice(std::size_t first, std::size_t last) const {
    Dataset out;
    out.records.assign(records.begin() + static_cast<std::ptrdiff_t>(first),
                       records.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
  }

  double min_load() const {
    double m = INFINITY;
    for (const auto& r : records) m = std::min(m, r.load);
    return m;
  }
  double max_load() const {
    double m = -INFINITY;
    for (const auto& r : records) m = std::max(m, r.load);
    return m;
  }
};

inline std::string csv_header(std::size_t stations) {
  std::string h = "timestamp,load_mw";
  for (std::size_t s = 0; s < stations; ++s) h += ",temp_" + std::to_string(s);
  return h + ",cond";
}

inline void write_csv(std::ostream& os, const Dataset& ds) {
  os << csv_header(ds.num_stations()) << "\n";
  char buf[64];
  for (const auto& r : ds.records) {
    os << format_timestamp(r.timestamp);
    std::snprintf(buf, sizeof buf, ",%.6f", r.load);
    os << buf;
    for (double t : r.temps) {
      std::snprintf(buf, sizeof buf, ",%.6f", t);
      os << buf;
    }
    os << "," << condition_name(r.cond) << "\n";
  }
}

inline void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  write_csv(out, ds);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace detail

inline Dataset read_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::MalformedRow, name + ": empty file");
  const auto header = detail::split_fields(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "load_mw" || header.back() != "cond")
    fail(Errc::MalformedRow, name + ": header must be timestamp,load_mw,temp_0..temp_{d-1},cond");
  const std::size_t stations = header.size() - 3;
  if (line.find('\r') == std::string::npos && csv_header(stations) != line)
    fail(Errc::MalformedRow, name + ": unexpected header columns");
  Dataset ds;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_fields(line);
    const std::string where = name + ":" + std::to_string(lineno);
    if (f.size() != header.size()) fail(Errc::MalformedRow, where + ": expected " + std::to_string(header.size()) + " fields");
    FeatureRecord r;
    if (!parse_timestamp(f[0], r.timestamp)) fail(Errc::MalformedRow, where + ": bad timestamp '" + f[0] + "'");
    if (!detail::parse_double(f[1], r.load)) fail(Errc::MalformedRow, where + ": bad load");
    for (std::size_t s = 0; s < stations; ++s) {
      double t;
      if (!detail::parse_double(f[2 + s], t)) fail(Errc::MalformedRow, where + ": bad temperature");
      r.temps.push_back(t);
    }
    const auto& c = f.back();
    if (c == "clear") r.cond = Condition::Clear;
    else if (c == "cloudy") r.cond = Condition::Cloudy;
    else if (c == "rain") r.cond = Condition::Rain;
    else fail(Errc::MalformedRow, where + ": unknown condition '" + c + "'");
    if (!(r.load > 0.0)) fail(Errc::NonPositiveLoad, where + ": load must be positive");
    if (!ds.records.empty() && r.timestamp != ds.records.back().timestamp + 1)
      fail(Errc::TimestampGap, where + ": expected " + format_timestamp(ds.records.back().timestamp + 1));
    ds.records.push_back(std::move(r));
  }
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  return read_csv(in, path);
}

// ---- scaling ----

struct ScalingParams {
  double load_min = 0.0, load_max = 1.0;
  std::vector<double> temp_min, temp_max;

  std::size_t num_stations() const { return temp_min.size(); }

  // Feature names: "load" or "temp_<i>".
  std::pair<double, double> range(const std::string& feature) const {
    if (feature == "load") return {load_min, load_max};
    if (feature.rfind("temp_", 0) == 0) {
      std::size_t pos = 0;
      int idx = -1;
      try {
        idx = std::stoi(feature.substr(5), &pos);
      } catch (const std::exception&) {
        idx = -1;
      }
      if (idx >= 0 && pos == feature.size() - 5 && static_cast<std::size_t>(idx) < temp_min.size())
        return {temp_min[static_cast<std::size_t>(idx)], temp_max[static_cast<std::size_t>(idx)]};
    }
    fail(Errc::UnknownFeature, "unknown feature '" + feature + "'");
  }

  // Maps to [0,1]; out-of-range values are clipped and flagged.
  double scale(const std::string& feature, double v, bool* clipped = nullptr) const {
    const auto [lo, hi] = range(feature);
    double s = (v - lo) / (hi - lo);
    bool c = false;
    if (s < 0.0) {
      s = 0.0;
      c = true;
    } else if (s > 1.0) {
      s = 1.0;
      c = true;
    }
    if (clipped) *clipped = c;
    return s;
  }

  double invert(const std::string& feature, double s) const {
    const auto [lo, hi] = range(feature);
    return lo + s * (hi - lo);
  }

  double load_to_mw(double s) const { return load_min + s * (load_max - load_min); }
  double temp_span(std::size_t station) const { return temp_max[station] - temp_min[station]; }
};

inline ScalingParams fit_scaling(const Dataset& ds) {
  require(!ds.empty(), Errc::InsufficientHistory, "cannot fit scaling on an empty dataset");
  ScalingParams p;
  p.load_min = ds.min_load();
  p.load_max = ds.max_load();
  if (!(p.load_max > p.load_min)) fail(Errc::ConstantFeature, "load is constant");
  const std::size_t s = ds.num_stations();
  p.temp_min.assign(s, INFINITY);
  p.temp_max.assign(s, -INFINITY);
  for (const auto& r : ds.records) {
    for (std::size_t i = 0; i < s; ++i) {
      p.temp_min[i] = std::min(p.temp_min[i], r.temps[i]);
      p.temp_max[i] = std::max(p.temp_max[i], r.temps[i]);
    }
  }
  for (std::size_t i = 0; i < s; ++i)
    if (!(p.temp_max[i] > p.temp_min[i])) fail(Errc::ConstantFeature, "temperature of station " + std::to_string(i) + " is constant");
  return p;
}

inline double invert_scaling(const ScalingParams& p, double value, const std::string& feature) {
  return p.invert(feature, value);
}

struct ScaledRecord {
  Eigen::VectorXd x;  // full feature vector of one time step
  bool clipped = false;
};

inline ScaledRecord apply_scaling(const ScalingParams& p, const FeatureRecord& r) {
  require(r.temps.size() == p.num_stations(), Errc::ShapeMismatch, "station count differs from scaling params");
  const auto s = static_cast<Eigen::Index>(p.num_stations());
  ScaledRecord out;
  out.x = Eigen::VectorXd::Zero(1 + s + kIndicatorDims);
  bool c = false;
  out.x(0) = p.scale("load", r.load, &c);
  out.clipped |= c;
  for (Eigen::Index i = 0; i < s; ++i) {
    const auto [lo, hi] = std::pair{p.temp_min[static_cast<std::size_t>(i)], p.temp_max[static_cast<std::size_t>(i)]};
    double v = (r.temps[static_cast<std::size_t>(i)] - lo) / (hi - lo);
    if (v < 0.0 || v > 1.0) {
      v = std::clamp(v, 0.0, 1.0);
      out.clipped = true;
    }
    out.x(1 + i) = v;
  }
  Eigen::Index off = 1 + s;
  out.x(off + hour_of_day(r.timestamp)) = 1.0;
  off += kHourSlots;
  out.x(off + day_of_week(r.timestamp)) = 1.0;
  off += kDowSlots;
  out.x(off + season(r.timestamp)) = 1.0;
  off += kSeasonSlots;
  out.x(off + static_cast<int>(r.cond)) = 1.0;
  return out;
}

// ---- windows ----

struct FeatureWindow {
  Eigen::MatrixXd x;     // (H+1) x d, rows X_{t-H} .. X_t
  Eigen::MatrixXd mask;  // 1 on temperature entries, 0 elsewhere
  double target = 0.0;   // scaled L_{t+k}
  std::int64_t target_timestamp = 0;
  int lead = 1;          // k
  bool clipped = false;

  std::int64_t row_timestamp(Eigen::Index r) const { return target_timestamp - lead - (x.rows() - 1) + r; }
};

inline Eigen::MatrixXd temperature_mask(int H, std::size_t stations) {
  const auto d = static_cast<Eigen::Index>(1 + stations + kIndicatorDims);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(H + 1, d);
  m.middleCols(1, static_cast<Eigen::Index>(stations)).setOnes();
  return m;
}

// Windows whose targets are records [first_target, last_target), drawn from ds.
inline std::vector<FeatureWindow> make_windows_for_targets(const Dataset& ds, int H, int k, const ScalingParams& p,
                                                           std::size_t first_target, std::size_t last_target) {
  require(H >= 0 && k >= 1, Errc::InvalidConfig, "need H >= 0 and k >= 1");
  const auto need = static_cast<std::size_t>(H + k);
  require(first_target >= need && last_target <= ds.size() && first_target <= last_target, Errc::InsufficientHistory,
          "targets lack H + k records of history");
  std::vector<ScaledRecord> scaled;
  const std::size_t lo = first_target - need;
  const std::size_t hi = last_target == 0 ? 0 : last_target - static_cast<std::size_t>(k);
  scaled.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) scaled.push_back(apply_scaling(p, ds.records[i]));
  const Eigen::MatrixXd mask = temperature_mask(H, ds.num_stations());
  std::vector<FeatureWindow> out;
  out.reserve(last_target - first_target);
  for (std::size_t tgt = first_target; tgt < last_target; ++tgt) {
    FeatureWindow w;
    const std::size_t start = tgt - need;
    w.x.resize(H + 1, static_cast<Eigen::Index>(ds.feature_dim()));
    for (int h = 0; h <= H; ++h) {
      const auto& sr = scaled[start + static_cast<std::size_t>(h) - lo];
      w.x.row(h) = sr.x.transpose();
      w.clipped |= sr.clipped;
    }
    w.mask = mask;
    bool c = false;
    w.target = p.scale("load", ds.records[tgt].load, &c);
    w.clipped |= c;
    w.target_timestamp = ds.records[tgt].timestamp;
    w.lead = k;
    out.push_back(std::move(w));
  }
  return out;
}

// All T - H - k windows: window i covers records i..i+H with target i+H+k.
inline std::vector<FeatureWindow> make_windows(const Dataset& ds, int H, int k, const ScalingParams& p) {
  require(H >= 0 && k >= 1, Errc::InvalidConfig, "need H >= 0 and k >= 1");
  if (ds.size() < static_cast<std::size_t>(H + k + 1))
    fail(Errc::InsufficientHistory, "need at least H + k + 1 = " + std::to_string(H + k + 1) + " records");
  return make_windows_for_targets(ds, H, k, p, static_cast<std::size_t>(H + k), ds.size());
}

// ---- chronological split ----

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction) {
  require(train_fraction > 0.0 && train_fraction < 1.0, Errc::InvalidConfig, "train fraction must lie in (0,1)");
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(ds.size()) * train_fraction));
  if (n == 0 || n >= ds.size()) fail(Errc::EmptySplit, "split leaves one side empty");
  return {ds.slice(0, n), ds.slice(n, ds.size())};
}

// ---- synthetic scenario generator ----

struct SynthConfig {
  int days = 150;
  int stations = 2;
  std::uint64_t seed = 1;
  double noise = 0.01;  // multiplicative, fraction of load
  std::vector<double> shares{1.0};
  std::int64_t start = timestamp_of(2019, 10, 1);
  double load_low = 6500.0;
  double load_high = 9500.0;
  // Load sensitivity (fraction of nominal per degree) below the heating and above the cooling point.
  double heating_slope = 0.03;
  double cooling_slope = 0.025;
  double heating_point = 16.0;
  double cooling_point = 22.0;
  // Weather: seasonal and diurnal amplitudes (degrees), AR(1) front persistence and innovation sd.
  double seasonal_amplitude = 11.0;
  double diurnal_amplitude = 2.5;
  double front_persistence = 0.98;
  double front_sd = 0.9;

  void validate() const {
    require(front_persistence >= 0.0 && front_persistence < 1.0, Errc::InvalidConfig, "front persistence must lie in [0, 1)");
    require(seasonal_amplitude >= 0.0 && diurnal_amplitude >= 0.0 && front_sd >= 0.0, Errc::InvalidConfig,
            "weather amplitudes must be >= 0");
    require(days >= 1, Errc::InvalidConfig, "days must be >= 1");
    require(stations >= 1, Errc::InvalidConfig, "need at least one station");
    require(noise >= 0.0 && noise <= 0.2, Errc::InvalidConfig, "noise level must lie in [0, 0.2]");
    require(!shares.empty(), Errc::InvalidConfig, "need at least one share");
    double s = 0.0;
    for (double v : shares) {
      require(v >= 0.0, Errc::InvalidConfig, "shares must be >= 0");
      s += v;
    }
    require(std::abs(s - 1.0) <= 1e-6, Errc::InvalidConfig, "shares must sum to 1");
    require(load_high > load_low && load_low > 0.0, Errc::InvalidConfig, "bad load range");
  }
};

struct SynthOutput {
  Dataset aggregate;
  std::vector<Dataset> nodes;  // one per share, same weather, load = share x aggregate
  std::vector<double> deterministic;  // noise-free aggregate profile
};

namespace detail {

// Daily load shape by hour with a weekend dip.
inline double calendar_factor(int hour, int dow) {
  static constexpr std::array<double, 24> shape{0.80, 0.77, 0.75, 0.74, 0.75, 0.78, 0.85, 0.93, 0.98, 1.00, 1.00, 0.99,
                                                0.98, 0.97, 0.96, 0.96, 0.98, 1.02, 1.04, 1.03, 0.99, 0.94, 0.88, 0.83};
  const double weekend = dow >= 5 ? 0.96 : 1.0;
  return (1.0 + 0.6 * (shape[static_cast<std::size_t>(hour)] - 1.0)) * weekend;
}

inline double condition_factor(Condition c) {
  switch (c) {
    case Condition::Clear: return 1.0;
    case Condition::Cloudy: return 1.01;
    case Condition::Rain: return 1.025;
  }
  return 1.0;
}

}  // namespace detail

// Lagged, station-averaged temperature driving the load at hour i.
inline double effective_temperature(const std::vector<std::vector<double>>& temps, std::size_t i) {
  static constexpr int kLags = 6;
  double num = 0.0, den = 0.0, w = 1.0;
  for (int l = 1; l <= kLags; ++l) {
    w *= 0.7;
    const std::size_t j = i >= static_cast<std::size_t>(l) ? i - static_cast<std::size_t>(l) : 0;
    double avg = 0.0;
    for (double t : temps[j]) avg += t;
    num += w * avg / static_cast<double>(temps[j].size());
    den += w;
  }
  return num / den;
}

inline SynthOutput synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution switch_cond(0.06);
  std::uniform_int_distribution<int> other_cond(0, 1);
  const auto n = static_cast<std::size_t>(cfg.days) * 24;
  const auto ns = static_cast<std::size_t>(cfg.stations);

  std::vector<double> offsets(ns);
  for (std::size_t s = 0; s < ns; ++s) offsets[s] = 1.5 * gauss(rng);

  // Weather: seasonal + diurnal + a persistent front + per-station jitter.
  std::vector<std::vector<double>> temps(n, std::vector<double>(ns));
  std::vector<Condition> conds(n);
  double front = 0.0;
  int cond = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t ts = cfg.start + static_cast<std::int64_t>(i);
    const double doy = day_of_year(ts);
    const double seasonal = 10.0 - cfg.seasonal_amplitude * std::cos(2.0 * std::numbers::pi * (doy - 20.0) / 365.25);
    const double diurnal = -cfg.diurnal_amplitude * std::cos(2.0 * std::numbers::pi * (hour_of_day(ts) - 3.0) / 24.0);
    front = cfg.front_persistence * front + cfg.front_sd * gauss(rng);
    // Markov weather condition with persistence.
    if (switch_cond(rng)) cond = (cond + 1 + other_cond(rng)) % 3;
    conds[i] = static_cast<Condition>(cond);
    const double cond_shift = cond == 2 ? -1.0 : (cond == 1 ? -0.4 : 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      temps[i][s] = seasonal + diurnal + front + offsets[s] + cond_shift + 0.3 * gauss(rng);
    }
  }

  // Deterministic load profile, then an affine map onto the nominal range.
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t ts = cfg.start + static_cast<std::int64_t>(i);
    const double te = effective_temperature(temps, i);
    const double weather = 1.0 + cfg.heating_slope * std::max(0.0, cfg.heating_point - te) +
                           cfg.cooling_slope * std::max(0.0, te - cfg.cooling_point);
    raw[i] = detail::calendar_factor(hour_of_day(ts), day_of_week(ts)) * weather * detail::condition_factor(conds[i]);
  }
  double rmin = INFINITY, rmax = -INFINITY;
  for (double v : raw) {
    rmin = std::min(rmin, v);
    rmax = std::max(rmax, v);
  }
  const double span = rmax > rmin ? rmax - rmin : 1.0;

  SynthOutput out;
  out.deterministic.resize(n);
  out.aggregate.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double det = cfg.load_low + (cfg.load_high - cfg.load_low) * (raw[i] - rmin) / span;
    out.deterministic[i] = det;
    const double eps = cfg.noise > 0.0 ? cfg.noise * unif(rng) : 0.0;
    auto& r = out.aggregate.records[i];
    r.timestamp = cfg.start + static_cast<std::int64_t>(i);
    r.load = det * (1.0 + eps);
    r.temps = temps[i];
    r.cond = conds[i];
  }
  for (double share : cfg.shares) {
    Dataset node = out.aggregate;
    for (auto& r : node.records) r.load *= share;
    out.nodes.push_back(std::move(node));
  }
  return out;
}

}  // namespace loadattack::data
