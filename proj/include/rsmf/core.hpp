#ifndef RSMF_CORE_HPP
#define RSMF_CORE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsmf {

using index_t = std::int64_t;

/// Error while reading an external text format; carries the 1-based line.
class parse_error : public std::runtime_error {
public:
  parse_error(const std::string& what, long line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  long line() const { return line_; }

private:
  long line_;
};

/// Structurally singular or inconsistent input (empty row/column,
/// index set mismatch in extend-add, cyclic task graph, ...).
class structural_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Numerically singular pivot; carries the offending column / leaf / node.
class singular_error : public std::runtime_error {
public:
  singular_error(const std::string& what, index_t where)
      : std::runtime_error(what + " (index " + std::to_string(where) + ")"),
        where_(where) {}
  index_t where() const { return where_; }

private:
  index_t where_;
};

/// Invalid configuration (bad grid, shallow tree, bad flag combination).
class config_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Requested problem size does not fit.
class size_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::vector<index_t> invert_permutation(const std::vector<index_t>& p) {
  std::vector<index_t> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<index_t>(i);
  return inv;
}

inline bool is_permutation(const std::vector<index_t>& p) {
  std::vector<char> seen(p.size(), 0);
  for (auto v : p) {
    if (v < 0 || static_cast<std::size_t>(v) >= p.size() || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

/// Least-squares slope of log(y) against log(x); the scaling tests use it.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace rsmf

#endif
