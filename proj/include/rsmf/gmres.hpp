#ifndef RSMF_GMRES_HPP
#define RSMF_GMRES_HPP

#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rsmf/dense.hpp"

namespace rsmf {

struct GmresOptions {
  double tol = 1e-8;
  index_t restart = 50;
  index_t maxit = 500;
  std::uint64_t seed = 0;  // reserved for reproducibility knobs; unused by the core loop
};

struct IterationTrace {
  std::vector<double> residual_history;  // relative residuals, length iterations + 1
  index_t iterations = 0;
  bool converged = false;
  index_t restarts = 0;
  bool breakdown = false;

  std::string to_csv() const {
    std::ostringstream os;
    os << "iter,relative_residual\n";
    for (std::size_t i = 0; i < residual_history.size(); ++i)
      os << i << "," << residual_history[i] << "\n";
    return os.str();
  }
};

/// Right-preconditioned restarted GMRES: solves A M^{-1} u = b and returns
/// x = M^{-1} u, so the Arnoldi residual estimates are true residuals.
/// Modified Gram-Schmidt with one reorthogonalization pass whenever the
/// post-MGS overlap exceeds 1e-8; happy-breakdown threshold 1e-14.
inline std::pair<std::vector<double>, IterationTrace> gmres(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply_A,
    const std::function<std::vector<double>(const std::vector<double>&)>& precond,
    const std::vector<double>& b, const GmresOptions& opts = GmresOptions{}) {
  const index_t n = static_cast<index_t>(b.size());
  const index_t m = std::max<index_t>(1, opts.restart);
  IterationTrace trace;
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  const double bnorm = norm2(b);
  auto record = [&](double rel) {
    trace.residual_history.push_back(std::max(rel, std::numeric_limits<double>::denorm_min()));
  };
  if (bnorm == 0.0) {
    trace.converged = true;
    record(0.0);
    return {x, trace};
  }

  std::vector<std::vector<double>> V;
  std::vector<double> g(static_cast<std::size_t>(m) + 1);
  DenseMatrix H(m + 1, m);
  std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));

  bool first_cycle = true;
  while (trace.iterations < opts.maxit) {
    // residual of the current iterate
    std::vector<double> r = apply_A(x);
    for (index_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double beta = norm2(r);
    const double rel0 = beta / bnorm;
    if (first_cycle) record(rel0);
    first_cycle = false;
    if (rel0 <= opts.tol) {
      trace.converged = true;
      break;
    }
    V.assign(1, r);
    for (auto& v : V[0]) v /= beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    H = DenseMatrix(m + 1, m);

    index_t j = 0;
    bool cycle_done = false;
    for (; j < m && trace.iterations < opts.maxit; ++j) {
      std::vector<double> w = apply_A(precond(V[j]));
      for (index_t i = 0; i <= j; ++i) {
        const double h = dot(V[i], w);
        H(i, j) = h;
        for (index_t k = 0; k < n; ++k) w[k] -= h * V[i][k];
      }
      // loss-of-orthogonality check, one corrective pass
      double wn = norm2(w);
      double overlap = 0.0;
      for (index_t i = 0; i <= j; ++i) overlap = std::max(overlap, std::abs(dot(V[i], w)));
      if (wn > 0 && overlap / wn > 1e-8) {
        for (index_t i = 0; i <= j; ++i) {
          const double c = dot(V[i], w);
          H(i, j) += c;
          for (index_t k = 0; k < n; ++k) w[k] -= c * V[i][k];
        }
        wn = norm2(w);
      }
      H(j + 1, j) = wn;
      const bool happy = wn <= 1e-14 * beta;
      if (!happy) {
        V.push_back(w);
        for (auto& v : V.back()) v /= wn;
      }
      // Givens update of column j
      for (index_t i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = denom == 0 ? 1.0 : H(j, j) / denom;
      sn[j] = denom == 0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++trace.iterations;
      const double est = std::abs(g[j + 1]) / bnorm;
      record(est);
      if (happy) {
        trace.breakdown = true;
        ++j;
        cycle_done = true;
        break;
      }
      if (est <= opts.tol) {
        ++j;
        cycle_done = true;
        break;
      }
    }
    // x += M^{-1} (V y), y from the triangular least-squares system
    if (j > 0) {
      std::vector<double> y(static_cast<std::size_t>(j), 0.0);
      for (index_t i = j - 1; i >= 0; --i) {
        double s = g[i];
        for (index_t k2 = i + 1; k2 < j; ++k2) s -= H(i, k2) * y[k2];
        y[i] = s / H(i, i);
      }
      std::vector<double> u(static_cast<std::size_t>(n), 0.0);
      for (index_t i = 0; i < j; ++i)
        for (index_t k2 = 0; k2 < n; ++k2) u[k2] += y[i] * V[i][k2];
      auto z = precond(u);
      for (index_t k2 = 0; k2 < n; ++k2) x[k2] += z[k2];
    }
    // true residual decides convergence
    std::vector<double> r2 = apply_A(x);
    double num = 0;
    for (index_t i = 0; i < n; ++i) {
      const double d = b[i] - r2[i];
      num += d * d;
    }
    const double rel = std::sqrt(num) / bnorm;
    if (rel <= opts.tol) {
      trace.converged = true;
      break;
    }
    if (trace.breakdown) break;  // stagnated exactly; return current best
    if (trace.iterations >= opts.maxit) break;
    ++trace.restarts;
    (void)cycle_done;
  }
  return {x, trace};
}

}  // namespace rsmf

#endif
