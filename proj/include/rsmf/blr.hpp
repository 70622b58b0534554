#ifndef RSMF_BLR_HPP
#define RSMF_BLR_HPP

#include <sstream>
#include <string>
#include <vector>

#include "rsmf/lowrank.hpp"

namespace rsmf {

/// Single-level tile low-rank matrix. Diagonal tiles are dense; off-diagonal
/// tiles keep the low-rank form only when it wins storage
/// (r * (rows + cols) < rows * cols), else they stay dense.
struct BlrMatrix {
  struct Tile {
    bool dense = true;
    DenseMatrix D;
    LowRank lr;

    index_t stored_scalars() const {
      return dense ? D.rows() * D.cols() : lr.stored_scalars();
    }
  };

  index_t n = 0;
  double tol = 0.0;
  std::vector<index_t> tile_begin;  // q + 1 offsets
  std::vector<Tile> tiles;          // row-major q x q

  index_t q() const { return static_cast<index_t>(tile_begin.size()) - 1; }
  Tile& tile(index_t i, index_t j) { return tiles[i * q() + j]; }
  const Tile& tile(index_t i, index_t j) const { return tiles[i * q() + j]; }
  index_t tile_rows(index_t i) const { return tile_begin[i + 1] - tile_begin[i]; }

  index_t stored_scalars() const {
    index_t s = 0;
    for (const auto& t : tiles) s += t.stored_scalars();
    return s;
  }

  index_t max_rank() const {
    index_t r = 0;
    for (const auto& t : tiles)
      if (!t.dense) r = std::max(r, t.lr.rank());
    return r;
  }

  DenseMatrix densify() const {
    DenseMatrix D(n, n);
    for (index_t i = 0; i < q(); ++i)
      for (index_t j = 0; j < q(); ++j)
        D.set_block(tile_begin[i], tile_begin[j],
                    tile(i, j).dense ? tile(i, j).D : tile(i, j).lr.densify());
    return D;
  }

  std::string rank_table_csv() const {
    std::ostringstream os;
    os << "level,block_row,block_col,rank,rows,cols\n";
    for (index_t i = 0; i < q(); ++i)
      for (index_t j = 0; j < q(); ++j) {
        const auto& t = tile(i, j);
        os << 0 << "," << i << "," << j << ","
           << (t.dense ? std::min(tile_rows(i), tile_rows(j)) : t.lr.rank()) << ","
           << tile_rows(i) << "," << tile_rows(j) << "\n";
      }
    return os.str();
  }
};

/// Tile-wise compression of a dense square matrix: truncated SVD per
/// off-diagonal tile with the storage-win rule.
inline BlrMatrix blr_compress(const DenseMatrix& F, index_t tile, double tol) {
  if (F.rows() != F.cols()) throw structural_error("blr_compress: matrix not square");
  if (tile < 8) throw config_error("blr_compress: tile must be >= 8");
  BlrMatrix B;
  B.n = F.rows();
  B.tol = tol;
  for (index_t b = 0; b < B.n; b += tile) B.tile_begin.push_back(b);
  B.tile_begin.push_back(B.n);
  const index_t q = B.q();
  B.tiles.resize(static_cast<std::size_t>(q * q));
  for (index_t i = 0; i < q; ++i)
    for (index_t j = 0; j < q; ++j) {
      const index_t r0 = B.tile_begin[i], c0 = B.tile_begin[j];
      const index_t m = B.tile_rows(i), nn = B.tile_rows(j);
      auto& t = B.tile(i, j);
      if (i == j) {
        t.dense = true;
        t.D = F.block(r0, c0, m, nn);
        continue;
      }
      LowRank lr = truncated_svd(F.block(r0, c0, m, nn), tol);
      if (lr.rank() * (m + nn) < m * nn) {
        t.dense = false;
        t.lr = std::move(lr);
      } else {
        t.dense = true;
        t.D = F.block(r0, c0, m, nn);
      }
    }
  return B;
}

namespace detail {

// tile_out -= A * B over the mixed dense/low-rank representations; the
// accumulation recompresses when the appended rank passes twice the largest
// addend, and densifies when low-rank form stops paying.
inline void blr_schur_update(BlrMatrix::Tile& out, index_t m, index_t n,
                             const BlrMatrix::Tile& A, const BlrMatrix::Tile& B, double tol) {
  const bool a_lr = !A.dense, b_lr = !B.dense;
  DenseMatrix U, V;  // product = U * V^T if product_lr
  bool product_lr = false;
  if (a_lr && b_lr) {
    if (A.lr.rank() == 0 || B.lr.rank() == 0) return;
    product_lr = true;
    DenseMatrix mid = matmul(A.lr.V.transposed(), B.lr.U);  // ra x rb
    if (A.lr.rank() <= B.lr.rank()) {
      U = A.lr.U;
      V = matmul(B.lr.V, mid.transposed());
    } else {
      U = matmul(A.lr.U, mid);
      V = B.lr.V;
    }
  } else if (a_lr) {
    if (A.lr.rank() == 0) return;
    product_lr = true;
    U = A.lr.U;
    V = matmul(B.D.transposed(), A.lr.V);
  } else if (b_lr) {
    if (B.lr.rank() == 0) return;
    product_lr = true;
    U = matmul(A.D, B.lr.U);
    V = B.lr.V;
  }
  if (!out.dense && product_lr) {
    for (auto& v : U.data()) v = -v;
    const index_t max_addend = std::max(out.lr.rank(), U.cols());
    lowrank_append(out.lr, U, V);
    if (out.lr.rank() > 2 * max_addend || out.lr.rank() > std::min(m, n))
      recompress(out.lr, tol);
    if (out.lr.rank() * (m + n) >= m * n) {  // storage win lost
      out.dense = true;
      out.D = out.lr.densify();
      out.lr = LowRank{};
    }
    return;
  }
  if (!out.dense) {  // dense product into a low-rank target: densify target
    out.dense = true;
    out.D = out.lr.densify();
    out.lr = LowRank{};
  }
  if (product_lr)
    out.D = gemm(-1.0, U, V.transposed(), 1.0, out.D);
  else
    out.D = gemm(-1.0, A.D, B.D, 1.0, out.D);
}

}  // namespace detail

/// Tile-wise right-looking LU of a BLR matrix: partial pivoting confined to
/// the dense diagonal tiles, panel updates in compressed form, low-rank
/// Schur products with recompression. Solve applies the tile factors.
class BlrSolver {
public:
  explicit BlrSolver(BlrMatrix B) : B_(std::move(B)) {
    const index_t q = B_.q();
    lu_.reserve(static_cast<std::size_t>(q));
    for (index_t k = 0; k < q; ++k) {
      try {
        lu_.push_back(lu_partial_pivot(B_.tile(k, k).D));
      } catch (const singular_error&) {
        throw singular_error("blr_factor: singular diagonal tile", k);
      }
      B_.tile(k, k).D = DenseMatrix();
      for (index_t j = k + 1; j < q; ++j) {  // row panel: L^{-1} P * tile
        auto& t = B_.tile(k, j);
        if (t.dense)
          t.D = lu_lower_solve(lu_[k], t.D);
        else if (t.lr.rank() > 0)
          t.lr.U = lu_lower_solve(lu_[k], t.lr.U);
      }
      for (index_t i = k + 1; i < q; ++i) {  // column panel: tile * U^{-1}
        auto& t = B_.tile(i, k);
        if (t.dense)
          t.D = lu_right_upper_solve(lu_[k], t.D);
        else if (t.lr.rank() > 0)
          t.lr.V = trsm(Side::left, Uplo::upper, Trans::yes, Diag::non_unit, lu_[k].lu, t.lr.V);
      }
      for (index_t i = k + 1; i < q; ++i)
        for (index_t j = k + 1; j < q; ++j)
          detail::blr_schur_update(B_.tile(i, j), B_.tile_rows(i), B_.tile_rows(j),
                                   B_.tile(i, k), B_.tile(k, j), B_.tol);
    }
  }

  const BlrMatrix& tiles() const { return B_; }

  std::vector<double> solve(const std::vector<double>& b) const {
    DenseMatrix X(B_.n, 1);
    for (index_t i = 0; i < B_.n; ++i) X(i, 0) = b[i];
    X = solve(X);
    std::vector<double> x(static_cast<std::size_t>(B_.n));
    for (index_t i = 0; i < B_.n; ++i) x[i] = X(i, 0);
    return x;
  }

  DenseMatrix solve(DenseMatrix Bm) const { return backward(forward(std::move(Bm))); }

  /// y = L^{-1} Ptilde b over tiles: y_k = L_k^{-1} P_k (b_k - sum L(k,j) y_j)
  DenseMatrix forward(DenseMatrix Bm) const {
    const index_t q = B_.q();
    for (index_t k = 0; k < q; ++k) {
      DenseMatrix t = seg(Bm, k);
      for (index_t j = 0; j < k; ++j)
        tile_gemm_sub(B_.tile(k, j), seg(Bm, j), t);
      Bm.set_block(B_.tile_begin[k], 0, lu_lower_solve(lu_[k], t));
    }
    return Bm;
  }

  /// x = U^{-1} y over tiles: x_k = U_k^{-1} (y_k - sum U(k,j) x_j)
  DenseMatrix backward(DenseMatrix Bm) const {
    const index_t q = B_.q();
    for (index_t k = q - 1; k >= 0; --k) {
      DenseMatrix t = seg(Bm, k);
      for (index_t j = k + 1; j < q; ++j)
        tile_gemm_sub(B_.tile(k, j), seg(Bm, j), t);
      Bm.set_block(B_.tile_begin[k], 0, lu_upper_solve(lu_[k], t));
    }
    return Bm;
  }

  /// z = U^{-T} b over tiles: z_k = U_k^{-T} (b_k - sum U(j,k)^T z_j)
  DenseMatrix upper_transposed(DenseMatrix Bm) const {
    const index_t q = B_.q();
    for (index_t k = 0; k < q; ++k) {
      DenseMatrix t = seg(Bm, k);
      for (index_t j = 0; j < k; ++j) {
        const auto& Ujk = B_.tile(j, k);
        DenseMatrix zj = seg(Bm, j);
        if (Ujk.dense)
          t = gemm(-1.0, Ujk.D.transposed(), zj, 1.0, t);
        else if (Ujk.lr.rank() > 0)
          t = gemm(-1.0, Ujk.lr.V, matmul(Ujk.lr.U.transposed(), zj), 1.0, t);
      }
      Bm.set_block(B_.tile_begin[k], 0,
                   trsm(Side::left, Uplo::upper, Trans::yes, Diag::non_unit, lu_[k].lu, t));
    }
    return Bm;
  }

private:
  DenseMatrix seg(const DenseMatrix& M, index_t k) const {
    return M.block(B_.tile_begin[k], 0, B_.tile_rows(k), M.cols());
  }

  static void tile_gemm_sub(const BlrMatrix::Tile& T, const DenseMatrix& x, DenseMatrix& acc) {
    if (T.dense)
      acc = gemm(-1.0, T.D, x, 1.0, acc);
    else if (T.lr.rank() > 0)
      acc = gemm(-1.0, T.lr.U, matmul(T.lr.V.transposed(), x), 1.0, acc);
  }

  BlrMatrix B_;
  std::vector<DenseLu> lu_;
};

inline BlrSolver blr_factor(BlrMatrix B) { return BlrSolver(std::move(B)); }

}  // namespace rsmf

#endif
