#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qsynth/milp.hpp"

namespace qsynth::milp::detail {

namespace {

constexpr int kDegenerateLimit = 30;
constexpr int kReinvertPeriod = 50;

class Tableau {
 public:
  Tableau(const LpProblem& lp, const LpOptions& opt) : opt_(opt) {
    m_ = static_cast<int>(lp.A.rows());
    n_ = static_cast<int>(lp.A.cols());
    const int total = n_ + m_;

    E_.setZero(m_, total);
    lo_.resize(total);
    hi_.resize(total);
    cost_.setZero(total);
    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp.col_lo[j];
      hi_[j] = lp.col_hi[j];
      cost_[j] = lp.cost[j];
    }
    // Row i reads  r_i - s_i * a_i.x = 0  with the logical r_i bounded by the
    // scaled row bounds.
    for (int i = 0; i < m_; ++i) {
      const double amax = n_ > 0 ? lp.A.row(i).cwiseAbs().maxCoeff() : 0.0;
      const double s = amax > 0.0 ? 1.0 / amax : 1.0;
      E_.row(i).head(n_) = -s * lp.A.row(i);
      E_(i, n_ + i) = 1.0;
      lo_[n_ + i] = s * lp.row_lo[i];
      hi_[n_ + i] = s * lp.row_hi[i];
    }

    T_ = E_;
    head_.resize(m_);
    pos_.assign(total, -1);
    at_upper_.assign(total, false);
    z_.setZero(total);
    for (int i = 0; i < m_; ++i) {
      head_[i] = n_ + i;
      pos_[n_ + i] = i;
    }
    for (int j = 0; j < n_; ++j) {
      at_upper_[j] = cost_[j] < 0.0;
      z_[j] = at_upper_[j] ? hi_[j] : lo_[j];
    }
    if (total > 0) cost_scale_ = std::max(1.0, cost_.cwiseAbs().maxCoeff());
  }

  LpResult run() {
    const int total = n_ + m_;
    const int pivot_cap = 30 * total + 500;
    int degenerate = 0;
    int since_reinvert = 0;
    int iterations = 0;
    Eigen::VectorXd cb(m_);
    Eigen::VectorXd d(total);
    Eigen::VectorXd alpha(m_);

    while (true) {
      if (++iterations > pivot_cap) {
        throw SolverError("simplex exceeded its pivot cap (cycling)");
      }
      compute_basics();

      bool phase1 = false;
      for (int i = 0; i < m_; ++i) {
        const int k = head_[i];
        if (z_[k] < lo_[k] - tol(lo_[k])) {
          cb[i] = -1.0;
          phase1 = true;
        } else if (z_[k] > hi_[k] + tol(hi_[k])) {
          cb[i] = 1.0;
          phase1 = true;
        } else {
          cb[i] = 0.0;
        }
      }
      if (!phase1) {
        for (int i = 0; i < m_; ++i) cb[i] = cost_[head_[i]];
        d = cost_ - T_.transpose() * cb;
      } else {
        d = -(T_.transpose() * cb);
      }
      const double dtol = phase1 ? opt_.optimality_tol : opt_.optimality_tol * cost_scale_;

      const bool bland = degenerate >= kDegenerateLimit;
      int enter = -1;
      double best = 0.0;
      for (int j = 0; j < total; ++j) {
        if (pos_[j] >= 0 || hi_[j] - lo_[j] <= 1e-12) continue;
        const double dj = d[j];
        const bool improving = at_upper_[j] ? dj > dtol : dj < -dtol;
        if (!improving) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          enter = j;
        }
      }

      if (enter < 0) {
        if (since_reinvert > 0) {
          reinvert();
          since_reinvert = 0;
          continue;  // re-check optimality/feasibility on a fresh tableau
        }
        LpResult out;
        out.iterations = iterations;
        out.feasible = !phase1;
        out.x = z_.head(n_);
        out.value = cost_.head(n_).dot(out.x);
        return out;
      }

      const double dir = at_upper_[enter] ? -1.0 : 1.0;
      alpha = -dir * T_.col(enter);

      // Harris pass 1: largest step keeping every basic within its relaxed
      // bound.
      const double flip = hi_[enter] - lo_[enter];
      double theta_max = flip;
      for (int i = 0; i < m_; ++i) {
        double bound;
        if (!blocking_bound(i, alpha[i], bound)) continue;
        const double relaxed = alpha[i] > 0 ? bound + tol(bound) : bound - tol(bound);
        theta_max = std::min(theta_max, (relaxed - z_[head_[i]]) / alpha[i]);
      }

      int leave = -1;
      double leave_bound = 0.0;
      double theta = 0.0;
      if (flip > theta_max) {
        // Harris pass 2: among rows blocking within theta_max take the
        // largest pivot.
        double best_alpha = 0.0;
        for (int i = 0; i < m_; ++i) {
          double bound;
          if (!blocking_bound(i, alpha[i], bound)) continue;
          const double ratio = (bound - z_[head_[i]]) / alpha[i];
          if (ratio <= theta_max && std::abs(alpha[i]) > best_alpha) {
            best_alpha = std::abs(alpha[i]);
            leave = i;
            leave_bound = bound;
            theta = std::max(0.0, ratio);
          }
        }
      }

      if (leave < 0) {
        at_upper_[enter] = !at_upper_[enter];
        z_[enter] = at_upper_[enter] ? hi_[enter] : lo_[enter];
        degenerate = 0;
        continue;
      }

      degenerate = theta <= 1e-12 ? degenerate + 1 : 0;

      const int k = head_[leave];
      z_[enter] += dir * theta;
      z_[k] = leave_bound;
      at_upper_[k] = leave_bound == hi_[k] && hi_[k] != lo_[k];
      pos_[k] = -1;
      pos_[enter] = leave;
      head_[leave] = enter;

      const double piv = T_(leave, enter);
      T_.row(leave) /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave) continue;
        const double f = T_(i, enter);
        if (f != 0.0) T_.row(i) -= f * T_.row(leave);
      }
      if (++since_reinvert >= kReinvertPeriod) {
        reinvert();
        since_reinvert = 0;
      }
    }
  }

 private:
  double tol(double bound) const {
    return opt_.feasibility_tol * std::max(1.0, std::abs(bound));
  }

  // Bound at which basic row i stops the entering variable when it moves
  // at rate a; false when the row never blocks.
  bool blocking_bound(int i, double a, double& bound) const {
    if (std::abs(a) <= opt_.pivot_tol) return false;
    const int k = head_[i];
    const double v = z_[k];
    if (a > 0) {
      if (v > hi_[k] + tol(hi_[k])) return false;
      bound = v < lo_[k] - tol(lo_[k]) ? lo_[k] : hi_[k];
    } else {
      if (v < lo_[k] - tol(lo_[k])) return false;
      bound = v > hi_[k] + tol(hi_[k]) ? hi_[k] : lo_[k];
    }
    return true;
  }

  void compute_basics() {
    Eigen::VectorXd zn = z_;
    for (int i = 0; i < m_; ++i) zn[head_[i]] = 0.0;
    const Eigen::VectorXd xb = -(T_ * zn);
    for (int i = 0; i < m_; ++i) z_[head_[i]] = xb[i];
  }

  void reinvert() {
    Eigen::MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = E_.col(head_[i]);
    T_ = B.partialPivLu().solve(E_);
  }

  LpOptions opt_;
  int m_ = 0;
  int n_ = 0;
  Eigen::MatrixXd E_;
  Eigen::MatrixXd T_;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  Eigen::VectorXd cost_;
  Eigen::VectorXd z_;
  std::vector<int> head_;
  std::vector<int> pos_;
  std::vector<bool> at_upper_;
  double cost_scale_ = 1.0;
};

}  // namespace

LpResult solve_lp(const LpProblem& lp, const LpOptions& options) {
  Tableau tableau(lp, options);
  return tableau.run();
}

}  // namespace qsynth::milp::detail
