#ifndef RSMF_SPARSE_HPP
#define RSMF_SPARSE_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rsmf/core.hpp"
#include "rsmf/dense.hpp"

namespace rsmf {

/// Compressed-column sparse matrix. Row indices are strictly increasing
/// within each column and no (row, col) coordinate is stored twice.
struct SparseMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<index_t> column_starts;  // length n_cols + 1
  std::vector<index_t> row_indices;
  std::vector<double> values;

  index_t nnz() const { return static_cast<index_t>(row_indices.size()); }

  double at(index_t i, index_t j) const {
    for (index_t k = column_starts[j]; k < column_starts[j + 1]; ++k)
      if (row_indices[k] == i) return values[k];
    return 0.0;
  }

  DenseMatrix densify() const {
    DenseMatrix D(n_rows, n_cols);
    for (index_t j = 0; j < n_cols; ++j)
      for (index_t k = column_starts[j]; k < column_starts[j + 1]; ++k)
        D(row_indices[k], j) = values[k];
    return D;
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    std::vector<double> y(n_rows, 0.0);
    for (index_t j = 0; j < n_cols; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      for (index_t k = column_starts[j]; k < column_starts[j + 1]; ++k)
        y[row_indices[k]] += values[k] * xj;
    }
    return y;
  }
};

/// Builds a SparseMatrix from coordinate triplets: duplicates summed,
/// entries sorted per column, exact zeros kept (they are stored entries).
inline SparseMatrix sparse_from_triplets(index_t n_rows, index_t n_cols,
                                         std::vector<index_t> rows, std::vector<index_t> cols,
                                         std::vector<double> vals) {
  std::vector<std::map<index_t, double>> colmaps(static_cast<std::size_t>(n_cols));
  for (std::size_t k = 0; k < vals.size(); ++k) colmaps[cols[k]][rows[k]] += vals[k];
  SparseMatrix A;
  A.n_rows = n_rows;
  A.n_cols = n_cols;
  A.column_starts.assign(static_cast<std::size_t>(n_cols) + 1, 0);
  for (index_t j = 0; j < n_cols; ++j)
    A.column_starts[j + 1] = A.column_starts[j] + static_cast<index_t>(colmaps[j].size());
  A.row_indices.reserve(A.column_starts.back());
  A.values.reserve(A.column_starts.back());
  for (index_t j = 0; j < n_cols; ++j)
    for (const auto& [r, v] : colmaps[j]) {
      A.row_indices.push_back(r);
      A.values.push_back(v);
    }
  return A;
}

/// MatrixMarket coordinate reader: real/integer/pattern/complex fields,
/// general or symmetric. Symmetric inputs are expanded to full storage,
/// duplicates summed. Complex entries are accepted only with zero imaginary
/// parts (the toolkit is real-valued).
inline SparseMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw parse_error("empty MatrixMarket stream", 1);
  ++lineno;
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate")
    throw parse_error("malformed MatrixMarket header: " + line, lineno);
  const bool pattern = field == "pattern";
  const bool complex_field = field == "complex";
  if (!pattern && !complex_field && field != "real" && field != "integer")
    throw parse_error("unsupported MatrixMarket field: " + field, lineno);
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw parse_error("unsupported MatrixMarket symmetry: " + symmetry, lineno);

  index_t n_rows = -1, n_cols = -1, n_entries = -1;
  std::vector<index_t> rows, cols;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '%') continue;
    std::istringstream ls(line);
    if (n_rows < 0) {
      if (!(ls >> n_rows >> n_cols >> n_entries) || n_rows < 0 || n_cols < 0 || n_entries < 0)
        throw parse_error("malformed size line: " + line, lineno);
      continue;
    }
    index_t i, j;
    if (!(ls >> i >> j)) throw parse_error("malformed entry: " + line, lineno);
    if (i < 1 || i > n_rows || j < 1 || j > n_cols)
      throw parse_error("index out of bounds: " + line, lineno);
    double v = 1.0;
    if (!pattern) {
      if (!(ls >> v)) throw parse_error("non-numeric or missing value: " + line, lineno);
      if (complex_field) {
        double im;
        if (!(ls >> im)) throw parse_error("missing imaginary part: " + line, lineno);
        if (im != 0.0)
          throw parse_error("complex value with nonzero imaginary part unsupported: " + line,
                            lineno);
      }
    }
    rows.push_back(i - 1);
    cols.push_back(j - 1);
    vals.push_back(v);
    if (symmetric && i != j) {
      rows.push_back(j - 1);
      cols.push_back(i - 1);
      vals.push_back(v);
    }
  }
  if (n_rows < 0) throw parse_error("missing size line", lineno);
  if (static_cast<index_t>(vals.size()) <
      n_entries)  // symmetric expansion only adds entries
    throw parse_error("fewer entries than declared", lineno);
  return sparse_from_triplets(n_rows, n_cols, std::move(rows), std::move(cols), std::move(vals));
}

inline SparseMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

inline SparseMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open matrix file: " + path);
  return parse_matrix_market(in);
}

/// B(i, j) = A(p_row[i], p_col[j]), i.e. B = P_r A P_c^T in one-line form.
inline SparseMatrix permute(const SparseMatrix& A, const std::vector<index_t>& p_row,
                            const std::vector<index_t>& p_col) {
  auto inv_row = invert_permutation(p_row);
  SparseMatrix B;
  B.n_rows = A.n_rows;
  B.n_cols = A.n_cols;
  B.column_starts.assign(static_cast<std::size_t>(A.n_cols) + 1, 0);
  std::vector<std::pair<index_t, double>> colbuf;
  for (index_t j = 0; j < A.n_cols; ++j) {
    const index_t src = p_col[j];
    colbuf.clear();
    for (index_t k = A.column_starts[src]; k < A.column_starts[src + 1]; ++k)
      colbuf.emplace_back(inv_row[A.row_indices[k]], A.values[k]);
    std::sort(colbuf.begin(), colbuf.end());
    B.column_starts[j + 1] = B.column_starts[j] + static_cast<index_t>(colbuf.size());
    for (auto& [r, v] : colbuf) {
      B.row_indices.push_back(r);
      B.values.push_back(v);
    }
  }
  return B;
}

/// Diagonal row and column scalings from iterative sup-norm equilibration.
struct ScalingPermutation {
  std::vector<double> d_row;
  std::vector<double> d_col;
  std::vector<index_t> p_row;
  std::vector<index_t> p_col;
};

struct Equilibration {
  std::vector<double> d_row;
  std::vector<double> d_col;
  SparseMatrix scaled;
};

/// Alternating row/column sup-norm scaling. The convergence predicate (all
/// row and column maxima within [1 - drift, 1]) is evaluated before any
/// update, so re-equilibrating an equilibrated matrix returns exact unit
/// scalings. Each sweep ends with a column pass, leaving all entries <= 1.
inline Equilibration equilibrate(const SparseMatrix& A, double drift = 1e-2, int max_sweeps = 10) {
  const index_t m = A.n_rows, n = A.n_cols;
  Equilibration eq;
  eq.d_row.assign(static_cast<std::size_t>(m), 1.0);
  eq.d_col.assign(static_cast<std::size_t>(n), 1.0);
  eq.scaled = A;

  std::vector<double> rowmax(static_cast<std::size_t>(m)), colmax(static_cast<std::size_t>(n));
  auto compute_maxima = [&]() {
    std::fill(rowmax.begin(), rowmax.end(), 0.0);
    std::fill(colmax.begin(), colmax.end(), 0.0);
    for (index_t j = 0; j < n; ++j)
      for (index_t k = eq.scaled.column_starts[j]; k < eq.scaled.column_starts[j + 1]; ++k) {
        const double a = std::abs(eq.scaled.values[k]);
        rowmax[eq.scaled.row_indices[k]] = std::max(rowmax[eq.scaled.row_indices[k]], a);
        colmax[j] = std::max(colmax[j], a);
      }
    for (index_t i = 0; i < m; ++i)
      if (rowmax[i] == 0.0) throw structural_error("equilibrate: empty row " + std::to_string(i));
    for (index_t j = 0; j < n; ++j)
      if (colmax[j] == 0.0)
        throw structural_error("equilibrate: empty column " + std::to_string(j));
  };
  auto converged = [&]() {
    for (index_t i = 0; i < m; ++i)
      if (rowmax[i] > 1.0 || rowmax[i] < 1.0 - drift) return false;
    for (index_t j = 0; j < n; ++j)
      if (colmax[j] > 1.0 || colmax[j] < 1.0 - drift) return false;
    return true;
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    compute_maxima();
    if (converged()) return eq;
    for (index_t i = 0; i < m; ++i) eq.d_row[i] /= rowmax[i];
    for (index_t j = 0; j < n; ++j)
      for (index_t k = eq.scaled.column_starts[j]; k < eq.scaled.column_starts[j + 1]; ++k)
        eq.scaled.values[k] /= rowmax[eq.scaled.row_indices[k]];
    std::fill(colmax.begin(), colmax.end(), 0.0);
    for (index_t j = 0; j < n; ++j)
      for (index_t k = eq.scaled.column_starts[j]; k < eq.scaled.column_starts[j + 1]; ++k)
        colmax[j] = std::max(colmax[j], std::abs(eq.scaled.values[k]));
    for (index_t j = 0; j < n; ++j) {
      eq.d_col[j] /= colmax[j];
      for (index_t k = eq.scaled.column_starts[j]; k < eq.scaled.column_starts[j + 1]; ++k)
        eq.scaled.values[k] /= colmax[j];
    }
  }
  compute_maxima();  // revalidates structure; drift may remain at the cap
  return eq;
}

/// 5-point (2D) and 7-point (3D) Poisson model problems on a k-lattice,
/// with lattice coordinates attached for the geometric ordering.
struct ModelProblem {
  SparseMatrix A;
  std::vector<std::vector<double>> coords;  // one point per column of A
};

inline ModelProblem model_problem(const std::string& kind, index_t k) {
  if (k < 2) throw size_error("model_problem: k must be >= 2");
  ModelProblem mp;
  std::vector<index_t> rows, cols;
  std::vector<double> vals;
  if (kind == "poisson2d") {
    if (k > 46340) throw size_error("model_problem: n = k^2 overflows");
    const index_t n = k * k;
    auto id = [k](index_t x, index_t y) { return x + k * y; };
    for (index_t y = 0; y < k; ++y)
      for (index_t x = 0; x < k; ++x) {
        const index_t v = id(x, y);
        rows.push_back(v);
        cols.push_back(v);
        vals.push_back(4.0);
        const index_t nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (auto& q : nb)
          if (q[0] >= 0 && q[0] < k && q[1] >= 0 && q[1] < k) {
            rows.push_back(id(q[0], q[1]));
            cols.push_back(v);
            vals.push_back(-1.0);
          }
        mp.coords.push_back({static_cast<double>(x), static_cast<double>(y)});
      }
    mp.A = sparse_from_triplets(n, n, std::move(rows), std::move(cols), std::move(vals));
  } else if (kind == "poisson3d") {
    if (k > 1290) throw size_error("model_problem: n = k^3 overflows");
    const index_t n = k * k * k;
    auto id = [k](index_t x, index_t y, index_t z) { return x + k * (y + k * z); };
    for (index_t z = 0; z < k; ++z)
      for (index_t y = 0; y < k; ++y)
        for (index_t x = 0; x < k; ++x) {
          const index_t v = id(x, y, z);
          rows.push_back(v);
          cols.push_back(v);
          vals.push_back(6.0);
          const index_t nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                    {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
          for (auto& q : nb)
            if (q[0] >= 0 && q[0] < k && q[1] >= 0 && q[1] < k && q[2] >= 0 && q[2] < k) {
              rows.push_back(id(q[0], q[1], q[2]));
              cols.push_back(v);
              vals.push_back(-1.0);
            }
          mp.coords.push_back(
              {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)});
        }
    mp.A = sparse_from_triplets(n, n, std::move(rows), std::move(cols), std::move(vals));
  } else {
    throw config_error("unknown model problem: " + kind);
  }
  return mp;
}

/// Pattern of |A| + |A^T| as adjacency lists (no self loops), the graph the
/// ordering and symbolic phases work on.
inline std::vector<std::vector<index_t>> symmetrized_adjacency(const SparseMatrix& A) {
  std::vector<std::vector<index_t>> adj(static_cast<std::size_t>(A.n_cols));
  for (index_t j = 0; j < A.n_cols; ++j)
    for (index_t k = A.column_starts[j]; k < A.column_starts[j + 1]; ++k) {
      const index_t i = A.row_indices[k];
      if (i == j) continue;
      adj[j].push_back(i);
      adj[i].push_back(j);
    }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

inline void write_permutation(std::ostream& out, const std::vector<index_t>& p) {
  for (auto v : p) out << v << "\n";
}

inline std::vector<index_t> read_permutation(std::istream& in) {
  std::vector<index_t> p;
  index_t v;
  while (in >> v) p.push_back(v);
  if (!is_permutation(p)) throw parse_error("not a permutation", static_cast<long>(p.size()));
  return p;
}

}  // namespace rsmf

#endif
