#pragma once

// Dense two-phase simplex (bounded variables) and best-bound branch-and-bound
// over binary variables. Small enough to audit; fast enough for a day-ahead
// unit commitment on a 14-bus case.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadattack/error.hpp"

namespace loadattack::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// All solver tolerances live here so tests and solver agree.
struct Tol {
  static constexpr double bound = 1e-9;         // bound violation allowed in an Optimal answer
  static constexpr double row = 1e-7;           // row residual allowed in an Optimal answer
  static constexpr double primal = 1e-9;        // relative feasibility inside the simplex
  static constexpr double dual = 1e-9;          // reduced-cost optimality
  static constexpr double ratio_pivot = 1e-7;   // smallest |entry| a ratio test may pivot on
  static constexpr double harris = 1e-9;        // relative bound relaxation in the Harris ratio test
  static constexpr double breakdown = 1e-11;    // pivot magnitude treated as numerical failure
  static constexpr double phase1 = 1e-7;        // leftover artificial mass meaning "infeasible"
  static constexpr double integrality = 1e-6;
  static constexpr double gap_abs = 1e-8;
  static constexpr int degenerate_switch = 50;  // consecutive degenerate pivots before Bland
};

struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t num_vars() const { return static_cast<std::size_t>(c.size()); }

  void validate() const {
    const auto n = c.size();
    require(lower.size() == n && upper.size() == n, Errc::ShapeMismatch, "bound vectors");
    require(a_eq.rows() == b_eq.size() && (a_eq.rows() == 0 || a_eq.cols() == n),
            Errc::ShapeMismatch, "equality block");
    require(a_ub.rows() == b_ub.size() && (a_ub.rows() == 0 || a_ub.cols() == n),
            Errc::ShapeMismatch, "inequality block");
    require(c.allFinite() && a_eq.allFinite() && a_ub.allFinite() && b_eq.allFinite() &&
                b_ub.allFinite(),
            Errc::InvalidConfig, "non-finite coefficient");
    for (Eigen::Index j = 0; j < n; ++j) {
      require(!std::isnan(lower(j)) && !std::isnan(upper(j)) && lower(j) <= upper(j) &&
                  lower(j) < kInf && upper(j) > -kInf,
              Errc::InvalidConfig, "bad bounds on variable " + std::to_string(j));
    }
  }
};

enum class Status { Optimal, Infeasible, Unbounded, NodeLimit };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NodeLimit: return "NodeLimit";
  }
  return "?";
}

struct LPSolution {
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  double objective = kInf;
  std::size_t iterations = 0;
  // Reduced costs of the structural columns (Optimal LPs only).
  Eigen::VectorXd reduced_costs;
  // Branch-and-bound bookkeeping.
  std::size_t nodes = 0;
  bool node_limit_hit = false;
};

struct MixedIntegerProgram {
  LinearProgram lp;
  std::vector<std::size_t> binaries;

  void validate() const {
    lp.validate();
    for (auto j : binaries) {
      require(j < lp.num_vars(), Errc::InvalidConfig, "binary index out of range");
      const double lo = lp.lower(j), hi = lp.upper(j);
      require((lo == 0.0 || lo == 1.0) && (hi == 0.0 || hi == 1.0),
              Errc::InvalidConfig, "binary variable bounds must lie in {0,1}");
    }
  }
};

struct BnBConfig {
  double integrality_tol = Tol::integrality;
  double gap_abs = Tol::gap_abs;
  // Relative gap; zero keeps the absolute criterion only.
  double gap_rel = 0.0;
  std::size_t node_limit = 200000;
};

// Incremental constructor for LPs/MIPs written row by row.
struct Term {
  std::size_t var;
  double coef;
};

class ModelBuilder {
 public:
  std::size_t add_var(double lo, double hi, double cost, bool binary = false) {
    lower_.push_back(lo);
    upper_.push_back(hi);
    cost_.push_back(cost);
    if (binary) binaries_.push_back(lower_.size() - 1);
    return lower_.size() - 1;
  }
  void add_le(std::vector<Term> terms, double rhs) { ub_.push_back({std::move(terms), rhs}); }
  void add_ge(std::vector<Term> terms, double rhs) {
    for (auto& t : terms) t.coef = -t.coef;
    ub_.push_back({std::move(terms), -rhs});
  }
  void add_eq(std::vector<Term> terms, double rhs) { eq_.push_back({std::move(terms), rhs}); }

  void set_cost(std::size_t j, double c) { cost_.at(j) = c; }
  void set_bounds(std::size_t j, double lo, double hi) {
    lower_.at(j) = lo;
    upper_.at(j) = hi;
  }

  std::size_t num_vars() const { return lower_.size(); }
  std::size_t num_eq() const { return eq_.size(); }
  std::size_t num_ub() const { return ub_.size(); }

  MixedIntegerProgram build() const {
    const auto n = static_cast<Eigen::Index>(lower_.size());
    MixedIntegerProgram mip;
    auto& lp = mip.lp;
    lp.c = Eigen::Map<const Eigen::VectorXd>(cost_.data(), n);
    lp.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
    lp.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
    auto fill = [n](const std::vector<Row>& rows, Eigen::MatrixXd& a, Eigen::VectorXd& b) {
      a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n);
      b.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (const auto& t : rows[i].terms) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.var)) += t.coef;
        b(static_cast<Eigen::Index>(i)) = rows[i].rhs;
      }
    };
    fill(eq_, lp.a_eq, lp.b_eq);
    fill(ub_, lp.a_ub, lp.b_ub);
    mip.binaries = binaries_;
    return mip;
  }

 private:
  struct Row {
    std::vector<Term> terms;
    double rhs;
  };
  std::vector<double> lower_, upper_, cost_;
  std::vector<std::size_t> binaries_;
  std::vector<Row> eq_, ub_;
};

// Independent re-check of an answer against the original problem data.
inline double max_row_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  if (lp.a_eq.rows() > 0) worst = std::max(worst, (lp.a_eq * x - lp.b_eq).cwiseAbs().maxCoeff());
  if (lp.a_ub.rows() > 0) worst = std::max(worst, (lp.a_ub * x - lp.b_ub).maxCoeff());
  return worst;
}

inline double max_bound_violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    worst = std::max(worst, lp.lower(j) - x(j));
    worst = std::max(worst, x(j) - lp.upper(j));
  }
  return worst;
}

namespace detail {

// Tableau simplex over columns [structurals | slacks of <= rows | artificials].
// Rows are scaled so that their largest coefficient is 1; bounds and costs
// stay in original units.
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp) : lp_(lp) {
    lp.validate();
    n_ = static_cast<Eigen::Index>(lp.num_vars());
    const Eigen::Index meq = lp.a_eq.rows(), mub = lp.a_ub.rows();
    m_ = meq + mub;

    Eigen::MatrixXd a(m_, n_);
    if (meq > 0) a.topRows(meq) = lp.a_eq;
    if (mub > 0) a.bottomRows(mub) = lp.a_ub;
    Eigen::VectorXd b(m_);
    if (meq > 0) b.head(meq) = lp.b_eq;
    if (mub > 0) b.tail(mub) = lp.b_ub;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double s = a.row(i).cwiseAbs().maxCoeff();
      if (s > 0.0) {
        a.row(i) /= s;
        b(i) /= s;
      }
    }

    // Starting point for the structurals: a finite bound, else zero.
    Eigen::VectorXd xs(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double lo = lp.lower(j), hi = lp.upper(j);
      xs(j) = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    }
    const Eigen::VectorXd resid = b - a * xs;

    std::vector<Eigen::Index> art_rows;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool is_ub = i >= meq;
      if (!(is_ub && resid(i) >= 0.0)) art_rows.push_back(i);
    }
    nslack_ = mub;
    nart_ = static_cast<Eigen::Index>(art_rows.size());
    ncols_ = n_ + nslack_ + nart_;

    A_ = Eigen::MatrixXd::Zero(m_, ncols_);
    A_.leftCols(n_) = a;
    for (Eigen::Index k = 0; k < mub; ++k) A_(meq + k, n_ + k) = 1.0;
    b_ = b;

    lo_.resize(ncols_);
    hi_.resize(ncols_);
    x_ = Eigen::VectorXd::Zero(ncols_);
    lo_.head(n_) = lp.lower;
    hi_.head(n_) = lp.upper;
    x_.head(n_) = xs;
    for (Eigen::Index k = 0; k < nslack_; ++k) {
      lo_(n_ + k) = 0.0;
      hi_(n_ + k) = kInf;
    }
    basis_.assign(static_cast<std::size_t>(m_), -1);
    pos_.assign(static_cast<std::size_t>(ncols_), -1);
    for (Eigen::Index k = 0; k < nslack_; ++k) {
      const Eigen::Index row = meq + k;
      if (resid(row) >= 0.0) {
        basis_[static_cast<std::size_t>(row)] = static_cast<int>(n_ + k);
        pos_[static_cast<std::size_t>(n_ + k)] = static_cast<int>(row);
        x_(n_ + k) = resid(row);
      }
    }
    for (Eigen::Index k = 0; k < nart_; ++k) {
      const Eigen::Index row = art_rows[static_cast<std::size_t>(k)];
      const Eigen::Index col = n_ + nslack_ + k;
      const double sigma = resid(row) >= 0.0 ? 1.0 : -1.0;
      A_(row, col) = sigma;
      lo_(col) = 0.0;
      hi_(col) = kInf;
      x_(col) = std::abs(resid(row));
      basis_[static_cast<std::size_t>(row)] = static_cast<int>(col);
      pos_[static_cast<std::size_t>(col)] = static_cast<int>(row);
    }

    init_col_ = basis_;
    init_sign_.assign(static_cast<std::size_t>(m_), 1.0);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto k = static_cast<std::size_t>(i);
      init_sign_[k] = A_(i, init_col_[k]);
    }

    // The starting basis is diagonal, so the tableau is A with artificial rows sign-flipped.
    T_ = A_;
    for (Eigen::Index k = 0; k < nart_; ++k) {
      const Eigen::Index row = art_rows[static_cast<std::size_t>(k)];
      if (A_(row, n_ + nslack_ + k) < 0.0) T_.row(row) *= -1.0;
    }
    cost_ = Eigen::VectorXd::Zero(ncols_);
  }

  Status solve() {
    if (nart_ > 0) {
      cost_.setZero();
      cost_.tail(nart_).setOnes();
      recompute_duals();
      const Status st = primal();
      if (st == Status::Unbounded) fail(Errc::NumericalBreakdown, "phase 1 reported unbounded");
      if (x_.tail(nart_).sum() > Tol::phase1) return Status::Infeasible;
      for (Eigen::Index k = n_ + nslack_; k < ncols_; ++k) {
        hi_(k) = 0.0;
        if (pos_[static_cast<std::size_t>(k)] < 0) x_(k) = 0.0;
      }
      drive_out_artificials();
    }
    cost_.setZero();
    cost_.head(n_) = lp_.c;
    recompute_duals();
    return primal();
  }

  // Re-solve after bound changes, starting from the current (dual feasible) basis.
  Status reoptimize() {
    const Status st = dual();
    if (st != Status::Optimal) return st;
    recompute_duals();
    return primal();
  }

  // Change bounds of a column. Nonbasic columns are parked on the bound that
  // keeps the basis dual feasible.
  void set_bounds(Eigen::Index j, double lo, double hi) {
    lo_(j) = lo;
    hi_(j) = hi;
    if (pos_[static_cast<std::size_t>(j)] >= 0) return;
    double target;
    if (lo == hi) {
      target = lo;
    } else if (d_(j) > Tol::dual && std::isfinite(lo)) {
      target = lo;
    } else if (d_(j) < -Tol::dual && std::isfinite(hi)) {
      target = hi;
    } else if (std::isfinite(lo) && std::isfinite(hi)) {
      target = std::abs(x_(j) - lo) <= std::abs(x_(j) - hi) ? lo : hi;
    } else {
      target = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    }
    move_nonbasic(j, target);
  }

  Eigen::VectorXd structural() const { return x_.head(n_); }
  Eigen::VectorXd reduced_costs() const { return d_.head(n_); }
  double objective() const { return lp_.c.dot(x_.head(n_)); }
  std::size_t iterations() const { return iterations_; }

  // Recompute basic values from a fresh factorization of the basis matrix.
  void refine() {
    Eigen::MatrixXd bmat(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) bmat.col(i) = A_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
    Eigen::VectorXd rhs = b_;
    for (Eigen::Index j = 0; j < ncols_; ++j) {
      if (pos_[static_cast<std::size_t>(j)] < 0 && x_(j) != 0.0) rhs -= A_.col(j) * x_(j);
    }
    Eigen::VectorXd xb = lu.solve(rhs);
    const Eigen::VectorXd r = rhs - bmat * xb;
    xb += lu.solve(r);
    if (!xb.allFinite()) fail(Errc::NumericalBreakdown, "singular basis during refinement");
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int col = basis_[static_cast<std::size_t>(i)];
      double v = xb(i);
      // Snap values that drifted a hair outside their bounds.
      const double tol = 1e-7 * (1.0 + std::abs(v));
      if (v < lo_(col) && v > lo_(col) - tol) v = lo_(col);
      if (v > hi_(col) && v < hi_(col) + tol) v = hi_(col);
      x_(col) = v;
    }
  }

  // Rebuild the tableau, basic values and duals from a fresh factorization.
  void reinvert() {
    Eigen::MatrixXd bmat(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) bmat.col(i) = A_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
    Eigen::MatrixXd t = lu.solve(A_);
    if (!t.allFinite()) fail(Errc::NumericalBreakdown, "singular basis during reinversion");
    T_ = std::move(t);
    for (Eigen::Index i = 0; i < m_; ++i) {
      T_.col(basis_[static_cast<std::size_t>(i)]).setZero();
      T_(i, basis_[static_cast<std::size_t>(i)]) = 1.0;
    }
    refine();
    recompute_duals();
    since_reinvert_ = 0;
  }

 private:
  double ptol(Eigen::Index col, double bound) const {
    (void)col;
    return Tol::primal * (1.0 + std::abs(bound));
  }

  void recompute_duals() {
    Eigen::VectorXd cb(m_);
    for (Eigen::Index i = 0; i < m_; ++i) cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
    d_ = cost_ - T_.transpose() * cb;
    for (Eigen::Index i = 0; i < m_; ++i) d_(basis_[static_cast<std::size_t>(i)]) = 0.0;
  }

  void move_nonbasic(Eigen::Index j, double target) {
    const double delta = target - x_(j);
    if (delta == 0.0) return;
    x_(j) = target;
    const auto col = T_.col(j);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (col(i) != 0.0) x_(basis_[static_cast<std::size_t>(i)]) -= delta * col(i);
    }
  }

  void pivot(Eigen::Index r, Eigen::Index q) {
    const double piv = T_(r, q);
    if (!(std::abs(piv) >= Tol::breakdown)) {
      fail(Errc::NumericalBreakdown, "pivot magnitude " + std::to_string(piv));
    }
    nz_.clear();
    for (Eigen::Index j = 0; j < ncols_; ++j) {
      double& v = T_(r, j);
      if (v != 0.0) {
        v /= piv;
        nz_.push_back(j);
      }
    }
    colq_ = T_.col(q);
    colq_(r) = 0.0;
    for (Eigen::Index j : nz_) {
      const double f = T_(r, j);
      T_.col(j).noalias() -= f * colq_;
    }
    const double dq = d_(q);
    if (dq != 0.0) {
      for (Eigen::Index j : nz_) d_(j) -= dq * T_(r, j);
    }
    d_(q) = 0.0;
    const int leaving = basis_[static_cast<std::size_t>(r)];
    pos_[static_cast<std::size_t>(leaving)] = -1;
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(q);
    pos_[static_cast<std::size_t>(q)] = static_cast<int>(r);
    ++iterations_;
    ++since_refresh_;
    ++since_reinvert_;
    if (since_reinvert_ >= reinvert_interval()) {
      reinvert();
      since_refresh_ = 0;
    } else if (since_refresh_ >= refresh_interval()) {
      recompute_duals();
      since_refresh_ = 0;
    }
  }

  std::size_t refresh_interval() const { return static_cast<std::size_t>(std::max<Eigen::Index>(100, m_)); }

  // Row r of B^-1 sits in the tableau columns of the diagonal starting basis.
  // Combining the original rows with it gives an equation whose range over the
  // current bounds must contain its right-hand side; if not, the bounds are infeasible.
  bool certify_infeasible(Eigen::Index r) const {
    Eigen::VectorXd y(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto k = static_cast<std::size_t>(i);
      y(i) = T_(r, init_col_[k]) * init_sign_[k];
    }
    const Eigen::VectorXd a = A_.transpose() * y;
    const double beta = y.dot(b_);
    const double negligible = 1e-11 * a.cwiseAbs().maxCoeff();
    double lo = 0.0, hi = 0.0, scale = std::abs(beta);
    for (Eigen::Index j = 0; j < ncols_; ++j) {
      const double aj = a(j);
      if (std::abs(aj) <= negligible) continue;
      const double p = aj * lo_(j), q = aj * hi_(j);
      lo += std::min(p, q);
      hi += std::max(p, q);
      if (std::isfinite(p)) scale = std::max(scale, std::abs(p));
      if (std::isfinite(q)) scale = std::max(scale, std::abs(q));
    }
    const double tol = 1e-7 * (1.0 + scale);
    return beta > hi + tol || beta < lo - tol;
  }

  std::size_t reinvert_interval() const { return static_cast<std::size_t>(std::max<Eigen::Index>(1000, 4 * m_)); }

  std::size_t iteration_cap() const { return static_cast<std::size_t>(50 * (m_ + ncols_) + 1000); }

  Status primal() {
    int degenerate = 0;
    bool bland = false;
    const std::size_t start = iterations_;
    std::size_t steps = 0;
    for (;;) {
      if (++steps > iteration_cap()) fail(Errc::NumericalBreakdown, "primal simplex iteration cap");
      // Pricing.
      Eigen::Index q = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < ncols_; ++j) {
        if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
        const double dj = d_(j);
        const bool up = dj < -Tol::dual && x_(j) < hi_(j);
        const bool down = dj > Tol::dual && x_(j) > lo_(j);
        if (!up && !down) continue;
        if (bland) {
          q = j;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          q = j;
        }
      }
      if (q < 0) {
        // Confirm with freshly computed duals before declaring optimality.
        recompute_duals();
        bool clean = true;
        for (Eigen::Index j = 0; j < ncols_ && clean; ++j) {
          if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
          if ((d_(j) < -Tol::dual && x_(j) < hi_(j)) || (d_(j) > Tol::dual && x_(j) > lo_(j))) clean = false;
        }
        if (clean) return Status::Optimal;
        continue;
      }
      const double dir = d_(q) < 0.0 ? 1.0 : -1.0;

      // Ratio test. Harris two-pass: find the largest step allowed when every
      // bound is relaxed by the feasibility tolerance, then take the biggest
      // pivot among rows that block within that step. Bland mode keeps the
      // textbook minimum ratio with lowest-index ties.
      auto limit = [&](Eigen::Index i, double a, double slack_tol) {
        const int col = basis_[static_cast<std::size_t>(i)];
        if (a > 0.0) {
          if (!std::isfinite(lo_(col))) return kInf;
          return (x_(col) - lo_(col) + slack_tol * (1.0 + std::abs(lo_(col)))) / a;
        }
        if (!std::isfinite(hi_(col))) return kInf;
        return (hi_(col) - x_(col) + slack_tol * (1.0 + std::abs(hi_(col)))) / (-a);
      };
      double theta = kInf;
      Eigen::Index r = -1;
      double rpiv = 0.0;
      if (bland) {
        for (Eigen::Index i = 0; i < m_; ++i) {
          const double a = dir * T_(i, q);
          if (std::abs(a) <= Tol::ratio_pivot) continue;
          const double lim = std::max(0.0, limit(i, a, 0.0));
          if (!std::isfinite(lim)) continue;
          if (lim < theta - 1e-12 ||
              (lim <= theta + 1e-12 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(r)])) {
            theta = lim;
            r = i;
            rpiv = std::abs(a);
          }
        }
      } else {
        double bound = kInf;
        for (Eigen::Index i = 0; i < m_; ++i) {
          const double a = dir * T_(i, q);
          if (std::abs(a) <= Tol::ratio_pivot) continue;
          bound = std::min(bound, limit(i, a, Tol::harris));
        }
        if (std::isfinite(bound)) {
          for (Eigen::Index i = 0; i < m_; ++i) {
            const double a = dir * T_(i, q);
            if (std::abs(a) <= Tol::ratio_pivot) continue;
            const double lim = limit(i, a, 0.0);
            if (lim <= bound && std::abs(a) > rpiv) {
              rpiv = std::abs(a);
              r = i;
              theta = std::max(0.0, lim);
            }
          }
        }
      }
      const double span = hi_(q) - lo_(q);
      if (std::isfinite(span) && span <= theta) {
        // Bound flip; basis unchanged.
        move_nonbasic(q, dir > 0.0 ? hi_(q) : lo_(q));
        degenerate = 0;
        bland = false;
        continue;
      }
      if (r < 0) {
        if (since_reinvert_ == 0) return Status::Unbounded;
        reinvert();
        continue;
      }

      const int leaving = basis_[static_cast<std::size_t>(r)];
      const double leave_at = dir * T_(r, q) > 0.0 ? lo_(leaving) : hi_(leaving);
      if (theta > 0.0) {
        const auto col = T_.col(q);
        for (Eigen::Index i = 0; i < m_; ++i) {
          if (col(i) != 0.0) x_(basis_[static_cast<std::size_t>(i)]) -= dir * theta * col(i);
        }
        x_(q) += dir * theta;
      }
      x_(leaving) = leave_at;
      pivot(r, q);

      if (theta <= 1e-12) {
        if (++degenerate > Tol::degenerate_switch) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
      (void)start;
    }
  }

  Status dual() {
    std::size_t steps = 0;
    for (;;) {
      if (++steps > iteration_cap()) fail(Errc::NumericalBreakdown, "dual simplex iteration cap");
      Eigen::Index r = -1;
      double worst = 0.0;
      bool below = false;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const int col = basis_[static_cast<std::size_t>(i)];
        const double v = x_(col);
        if (v < lo_(col) - ptol(col, lo_(col))) {
          const double viol = lo_(col) - v;
          if (viol > worst) {
            worst = viol;
            r = i;
            below = true;
          }
        } else if (v > hi_(col) + ptol(col, hi_(col))) {
          const double viol = v - hi_(col);
          if (viol > worst) {
            worst = viol;
            r = i;
            below = false;
          }
        }
      }
      if (r < 0) return Status::Optimal;

      const int leaving = basis_[static_cast<std::size_t>(r)];
      const double target = below ? lo_(leaving) : hi_(leaving);
      // Harris two-pass on the dual side.
      auto eligible = [&](Eigen::Index j, double a) {
        if (pos_[static_cast<std::size_t>(j)] >= 0 || std::abs(a) <= Tol::ratio_pivot || lo_(j) == hi_(j)) return false;
        const bool can_up = x_(j) < hi_(j);
        const bool can_down = x_(j) > lo_(j);
        // Increasing x_j moves the leaving variable by -a.
        return below ? ((can_up && a < 0.0) || (can_down && a > 0.0)) : ((can_up && a > 0.0) || (can_down && a < 0.0));
      };
      double bound = kInf;
      for (Eigen::Index j = 0; j < ncols_; ++j) {
        const double a = T_(r, j);
        if (!eligible(j, a)) continue;
        bound = std::min(bound, (std::abs(d_(j)) + Tol::dual) / std::abs(a));
      }
      Eigen::Index q = -1;
      double qpiv = 0.0;
      for (Eigen::Index j = 0; j < ncols_ && std::isfinite(bound); ++j) {
        const double a = T_(r, j);
        if (!eligible(j, a)) continue;
        if (std::abs(d_(j)) / std::abs(a) <= bound && std::abs(a) > qpiv) {
          q = j;
          qpiv = std::abs(a);
        }
      }
      if (q < 0) {
        if (worst <= 1e3 * ptol(leaving, target)) {
          // round-off sized violation with nothing to repair it: treat as on the bound
          x_(leaving) = target;
          continue;
        }
        if (since_reinvert_ == 0 || certify_infeasible(r)) return Status::Infeasible;
        reinvert();
        continue;
      }

      const double delta = (x_(leaving) - target) / T_(r, q);
      const auto col = T_.col(q);
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (col(i) != 0.0) x_(basis_[static_cast<std::size_t>(i)]) -= delta * col(i);
      }
      x_(q) += delta;
      x_(leaving) = target;
      pivot(r, q);
    }
  }

  // After phase 1, swap basic artificials (now fixed at zero) for real columns where possible.
  void drive_out_artificials() {
    const Eigen::Index first_art = n_ + nslack_;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const int col = basis_[static_cast<std::size_t>(i)];
      if (col < first_art) continue;
      Eigen::Index q = -1;
      double best = 1e-7;
      for (Eigen::Index j = 0; j < first_art; ++j) {
        if (pos_[static_cast<std::size_t>(j)] >= 0) continue;
        if (std::abs(T_(i, j)) > best) {
          best = std::abs(T_(i, j));
          q = j;
        }
      }
      if (q < 0) continue;  // redundant row
      const double delta = (x_(col) - 0.0) / T_(i, q);
      const auto c = T_.col(q);
      for (Eigen::Index k = 0; k < m_; ++k) {
        if (c(k) != 0.0) x_(basis_[static_cast<std::size_t>(k)]) -= delta * c(k);
      }
      x_(q) += delta;
      x_(col) = 0.0;
      pivot(i, q);
    }
  }

  const LinearProgram& lp_;
  Eigen::Index m_ = 0, n_ = 0, nslack_ = 0, nart_ = 0, ncols_ = 0;
  Eigen::MatrixXd A_, T_;
  Eigen::VectorXd b_, lo_, hi_, x_, cost_, d_;
  std::vector<int> basis_, pos_, init_col_;
  std::vector<double> init_sign_;
  std::vector<Eigen::Index> nz_;
  Eigen::VectorXd colq_;
  std::size_t iterations_ = 0;
  std::size_t since_refresh_ = 0;
  std::size_t since_reinvert_ = 0;
};

inline LPSolution finish(const LinearProgram& lp, Simplex& s, Status st) {
  LPSolution out;
  out.status = st;
  out.iterations = s.iterations();
  if (st != Status::Optimal) return out;
  s.refine();
  out.x = s.structural();
  for (Eigen::Index j = 0; j < out.x.size(); ++j) {
    out.x(j) = std::clamp(out.x(j), lp.lower(j), lp.upper(j));
  }
  out.objective = lp.c.dot(out.x);
  out.reduced_costs = s.reduced_costs();
  if (max_row_violation(lp, out.x) > Tol::row) {
    fail(Errc::NumericalBreakdown,
         "optimal basis fails feasibility re-check (" + std::to_string(max_row_violation(lp, out.x)) + ")");
  }
  return out;
}

}  // namespace detail

inline LPSolution solve_lp(const LinearProgram& lp) {
  detail::Simplex s(lp);
  const Status st = s.solve();
  return detail::finish(lp, s, st);
}

inline LPSolution solve_milp(const MixedIntegerProgram& mip, const BnBConfig& cfg = {}) {
  mip.validate();
  require(cfg.integrality_tol > 0.0 && cfg.gap_abs > 0.0 && cfg.gap_rel >= 0.0, Errc::InvalidConfig,
          "branch-and-bound tolerances must be positive");
  const auto& lp = mip.lp;
  detail::Simplex s(lp);
  LPSolution out;
  Status st = s.solve();
  out.iterations = s.iterations();
  if (st != Status::Optimal) {
    out.status = st;
    return out;
  }

  struct Node {
    double bound;
    std::uint64_t seq;
    std::vector<std::pair<std::size_t, double>> fixes;
  };
  struct Worse {
    bool operator()(const Node& a, const Node& b) const {
      return a.bound != b.bound ? a.bound > b.bound : a.seq > b.seq;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Worse> open;
  std::uint64_t seq = 0;

  std::vector<double> cur_lo(mip.binaries.size()), cur_hi(mip.binaries.size());
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t k = 0; k < mip.binaries.size(); ++k) {
    cur_lo[k] = lp.lower(mip.binaries[k]);
    cur_hi[k] = lp.upper(mip.binaries[k]);
    slot[mip.binaries[k]] = k;
  }

  double incumbent = kInf;
  Eigen::VectorXd best_x;
  auto cutoff = [&] { return incumbent - std::max(cfg.gap_abs, cfg.gap_rel * std::abs(incumbent)); };

  auto apply = [&](const std::vector<std::pair<std::size_t, double>>& fixes) {
    std::vector<double> lo(mip.binaries.size()), hi(mip.binaries.size());
    for (std::size_t k = 0; k < mip.binaries.size(); ++k) {
      lo[k] = lp.lower(mip.binaries[k]);
      hi[k] = lp.upper(mip.binaries[k]);
    }
    for (const auto& [var, val] : fixes) {
      const auto k = slot.at(var);
      lo[k] = hi[k] = val;
    }
    for (std::size_t k = 0; k < mip.binaries.size(); ++k) {
      if (lo[k] != cur_lo[k] || hi[k] != cur_hi[k]) {
        s.set_bounds(static_cast<Eigen::Index>(mip.binaries[k]), lo[k], hi[k]);
        cur_lo[k] = lo[k];
        cur_hi[k] = hi[k];
      }
    }
  };

  std::size_t nodes = 0;
  bool limit = false;
  std::vector<std::pair<std::size_t, double>> current;  // fixes of the node being dived
  bool have_current = true;                              // root
  bool root = true;
  while (true) {
    if (!have_current) {
      while (!open.empty() && open.top().bound >= cutoff()) open.pop();
      if (open.empty()) break;
      current = open.top().fixes;
      open.pop();
      have_current = true;
    }
    if (nodes >= cfg.node_limit) {
      limit = true;
      break;
    }
    ++nodes;
    if (!root) {
      apply(current);
      st = s.reoptimize();
    }
    root = false;
    if (st != Status::Optimal) {
      have_current = false;
      continue;
    }
    const double z = s.objective();
    if (z >= cutoff()) {
      have_current = false;
      continue;
    }
    const Eigen::VectorXd x = s.structural();
    std::size_t branch = SIZE_MAX;
    double most = cfg.integrality_tol;
    for (auto j : mip.binaries) {
      const double f = std::abs(x(static_cast<Eigen::Index>(j)) - std::round(x(static_cast<Eigen::Index>(j))));
      if (f > most) {
        most = f;
        branch = j;
      }
    }
    if (branch == SIZE_MAX) {
      incumbent = z;
      best_x = x;
      have_current = false;
      continue;
    }
    const double xv = x(static_cast<Eigen::Index>(branch));
    const double first = xv >= 0.5 ? 1.0 : 0.0;
    auto other = current;
    other.emplace_back(branch, 1.0 - first);
    open.push(Node{z, seq++, std::move(other)});
    current.emplace_back(branch, first);
  }

  out.nodes = nodes;
  out.iterations = s.iterations();
  out.node_limit_hit = limit;
  if (!std::isfinite(incumbent)) {
    out.status = limit ? Status::NodeLimit : Status::Infeasible;
    return out;
  }

  // Polish: pin binaries to their rounded values and recover clean continuous values.
  std::vector<std::pair<std::size_t, double>> pin;
  for (auto j : mip.binaries) pin.emplace_back(j, std::round(best_x(static_cast<Eigen::Index>(j))));
  apply(pin);
  st = s.reoptimize();
  if (st != Status::Optimal) {
    s.reinvert();
    st = s.reoptimize();
  }
  if (st != Status::Optimal) fail(Errc::NumericalBreakdown, "incumbent not reproducible with pinned binaries");
  LPSolution fin = detail::finish(lp, s, st);
  fin.status = limit ? Status::NodeLimit : Status::Optimal;
  fin.nodes = nodes;
  fin.node_limit_hit = limit;
  return fin;
}

// Free-format MPS writer/reader for cross-checking instances with external solvers.
// Rows are named E<i> (equalities) and L<i> (<= rows), columns X<j>; binaries sit
// inside INTORG/INTEND markers with BV bounds.
inline void write_mps(std::ostream& os, const MixedIntegerProgram& mip, const std::string& name = "LOADATTACK") {
  const auto& lp = mip.lp;
  std::vector<bool> is_bin(lp.num_vars(), false);
  for (auto j : mip.binaries) is_bin[j] = true;
  os.precision(17);
  os << "NAME " << name << "\nROWS\n N OBJ\n";
  for (Eigen::Index i = 0; i < lp.a_eq.rows(); ++i) os << " E E" << i << "\n";
  for (Eigen::Index i = 0; i < lp.a_ub.rows(); ++i) os << " L L" << i << "\n";
  os << "COLUMNS\n";
  bool in_int = false;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(lp.num_vars()); ++j) {
    if (is_bin[static_cast<std::size_t>(j)] != in_int) {
      os << (in_int ? " M 'MARKER' 'INTEND'\n" : " M 'MARKER' 'INTORG'\n");
      in_int = !in_int;
    }
    os << " X" << j << " OBJ " << lp.c(j) << "\n";
    for (Eigen::Index i = 0; i < lp.a_eq.rows(); ++i)
      if (lp.a_eq(i, j) != 0.0) os << " X" << j << " E" << i << " " << lp.a_eq(i, j) << "\n";
    for (Eigen::Index i = 0; i < lp.a_ub.rows(); ++i)
      if (lp.a_ub(i, j) != 0.0) os << " X" << j << " L" << i << " " << lp.a_ub(i, j) << "\n";
  }
  if (in_int) os << " M 'MARKER' 'INTEND'\n";
  os << "RHS\n";
  for (Eigen::Index i = 0; i < lp.a_eq.rows(); ++i)
    if (lp.b_eq(i) != 0.0) os << " RHS E" << i << " " << lp.b_eq(i) << "\n";
  for (Eigen::Index i = 0; i < lp.a_ub.rows(); ++i)
    if (lp.b_ub(i) != 0.0) os << " RHS L" << i << " " << lp.b_ub(i) << "\n";
  os << "BOUNDS\n";
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(lp.num_vars()); ++j) {
    const double lo = lp.lower(j), hi = lp.upper(j);
    if (is_bin[static_cast<std::size_t>(j)] && lo == 0.0 && hi == 1.0) {
      os << " BV BND X" << j << "\n";
      continue;
    }
    if (lo == hi) {
      os << " FX BND X" << j << " " << lo << "\n";
      continue;
    }
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << " FR BND X" << j << "\n";
      continue;
    }
    if (!std::isfinite(lo)) os << " MI BND X" << j << "\n";
    else if (lo != 0.0) os << " LO BND X" << j << " " << lo << "\n";
    if (std::isfinite(hi)) os << " UP BND X" << j << " " << hi << "\n";
  }
  os << "ENDATA\n";
}

inline MixedIntegerProgram read_mps(std::istream& is) {
  enum class Sec { None, Rows, Columns, Rhs, Bounds };
  Sec sec = Sec::None;
  std::map<std::string, std::pair<char, Eigen::Index>> rows;
  Eigen::Index neq = 0, nub = 0;
  std::map<std::string, Eigen::Index> cols;
  std::vector<std::string> col_order;
  struct Entry {
    Eigen::Index col;
    std::string row;
    double v;
  };
  std::vector<Entry> entries;
  std::vector<double> cost;
  std::vector<bool> bin;
  std::vector<std::pair<std::string, double>> rhs;
  std::vector<std::tuple<std::string, std::string, double>> bounds;
  bool in_int = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] != ' ') {
      std::string head;
      ls >> head;
      if (head == "ROWS") sec = Sec::Rows;
      else if (head == "COLUMNS") sec = Sec::Columns;
      else if (head == "RHS") sec = Sec::Rhs;
      else if (head == "BOUNDS") sec = Sec::Bounds;
      else if (head == "ENDATA") break;
      continue;
    }
    std::vector<std::string> f;
    for (std::string w; ls >> w;) f.push_back(w);
    if (f.empty()) continue;
    switch (sec) {
      case Sec::Rows:
        if (f.size() != 2) fail(Errc::SchemaError, "MPS ROWS line: " + line);
        if (f[0] == "E") rows[f[1]] = {'E', neq++};
        else if (f[0] == "L") rows[f[1]] = {'L', nub++};
        else if (f[0] == "N") rows[f[1]] = {'N', 0};
        else fail(Errc::SchemaError, "unsupported MPS row type " + f[0]);
        break;
      case Sec::Columns: {
        if (f.size() >= 3 && (f[1] == "'MARKER'" || f[1] == "MARKER")) {
          in_int = f[2] == "'INTORG'" || f[2] == "INTORG";
          break;
        }
        if (f.size() < 3 || f.size() % 2 == 0) fail(Errc::SchemaError, "MPS COLUMNS line: " + line);
        auto it = cols.find(f[0]);
        if (it == cols.end()) {
          it = cols.emplace(f[0], static_cast<Eigen::Index>(col_order.size())).first;
          col_order.push_back(f[0]);
          cost.push_back(0.0);
          bin.push_back(in_int);
        }
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) {
          const double v = std::stod(f[k + 1]);
          if (rows.at(f[k]).first == 'N') cost[static_cast<std::size_t>(it->second)] = v;
          else entries.push_back({it->second, f[k], v});
        }
        break;
      }
      case Sec::Rhs:
        for (std::size_t k = 1; k + 1 < f.size(); k += 2) rhs.emplace_back(f[k], std::stod(f[k + 1]));
        break;
      case Sec::Bounds:
        if (f.size() < 3) fail(Errc::SchemaError, "MPS BOUNDS line: " + line);
        bounds.emplace_back(f[0], f[2], f.size() > 3 ? std::stod(f[3]) : 0.0);
        break;
      case Sec::None:
        fail(Errc::SchemaError, "MPS data outside a section");
    }
  }
  const auto n = static_cast<Eigen::Index>(col_order.size());
  MixedIntegerProgram mip;
  auto& lp = mip.lp;
  lp.c = Eigen::Map<Eigen::VectorXd>(cost.data(), n);
  lp.a_eq = Eigen::MatrixXd::Zero(neq, n);
  lp.a_ub = Eigen::MatrixXd::Zero(nub, n);
  lp.b_eq = Eigen::VectorXd::Zero(neq);
  lp.b_ub = Eigen::VectorXd::Zero(nub);
  lp.lower = Eigen::VectorXd::Zero(n);
  lp.upper = Eigen::VectorXd::Constant(n, kInf);
  for (const auto& e : entries) {
    const auto& [type, idx] = rows.at(e.row);
    (type == 'E' ? lp.a_eq : lp.a_ub)(idx, e.col) = e.v;
  }
  for (const auto& [row, v] : rhs) {
    const auto& [type, idx] = rows.at(row);
    if (type == 'E') lp.b_eq(idx) = v;
    else if (type == 'L') lp.b_ub(idx) = v;
  }
  for (const auto& [type, col, v] : bounds) {
    const auto j = cols.at(col);
    if (type == "BV") {
      lp.lower(j) = 0.0;
      lp.upper(j) = 1.0;
    } else if (type == "FX") {
      lp.lower(j) = lp.upper(j) = v;
    } else if (type == "FR") {
      lp.lower(j) = -kInf;
      lp.upper(j) = kInf;
    } else if (type == "MI") {
      lp.lower(j) = -kInf;
    } else if (type == "LO") {
      lp.lower(j) = v;
    } else if (type == "UP") {
      lp.upper(j) = v;
    } else {
      fail(Errc::SchemaError, "unsupported MPS bound type " + type);
    }
  }
  for (Eigen::Index j = 0; j < n; ++j)
    if (bin[static_cast<std::size_t>(j)]) mip.binaries.push_back(static_cast<std::size_t>(j));
  return mip;
}

}  // namespace loadattack::milp
