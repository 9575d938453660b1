#pragma once
// Exact integer lattice toolkit over cpp_int: row HNF with transform
// tracking, column-lattice basis/membership/intersection, integer kernel,
// and Smith invariant factors. Column spans represent lattices throughout.

#include "qprism/common.hpp"

namespace qprism {

using MatZ = Mat<cpp_int>;

inline cpp_int floor_div(const cpp_int& a, const cpp_int& b) {
    cpp_int q = a / b, r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) --q;
    return q;
}

// Row Hermite form of M (rows generate the lattice). Returns the echelon
// rows (zero rows dropped); if U is non-null it accumulates the full
// unimodular transform, with row i of *U giving row i of the echelon form
// as a combination of input rows (including the rows beyond the rank).
inline MatZ row_hnf(MatZ M, MatZ* U = nullptr) {
    if (U) *U = mat_identity<cpp_int>(M.rows);
    auto row_sub = [&](int i, int k, const cpp_int& q) {
        for (int c = 0; c < M.cols; ++c) M.at(i, c) -= q * M.at(k, c);
        if (U)
            for (int c = 0; c < U->cols; ++c) U->at(i, c) -= q * U->at(k, c);
    };
    auto row_swap = [&](int i, int k) {
        if (i == k) return;
        for (int c = 0; c < M.cols; ++c) std::swap(M.at(i, c), M.at(k, c));
        if (U)
            for (int c = 0; c < U->cols; ++c) std::swap(U->at(i, c), U->at(k, c));
    };
    auto row_neg = [&](int i) {
        for (int c = 0; c < M.cols; ++c) M.at(i, c) = -M.at(i, c);
        if (U)
            for (int c = 0; c < U->cols; ++c) U->at(i, c) = -U->at(i, c);
    };
    int row = 0;
    for (int col = 0; col < M.cols && row < M.rows; ++col) {
        while (true) {
            int best = -1;
            for (int i = row; i < M.rows; ++i) {
                if (M.at(i, col) == 0) continue;
                if (best < 0 || abs(M.at(i, col)) < abs(M.at(best, col))) best = i;
            }
            if (best < 0) break;
            row_swap(row, best);
            bool clean = true;
            for (int i = row + 1; i < M.rows; ++i) {
                if (M.at(i, col) == 0) continue;
                cpp_int q = floor_div(M.at(i, col), M.at(row, col));
                row_sub(i, row, q);
                if (M.at(i, col) != 0) clean = false;
            }
            if (clean) break;
        }
        if (M.at(row, col) == 0) continue;
        if (M.at(row, col) < 0) row_neg(row);
        for (int i = 0; i < row; ++i) {
            cpp_int q = floor_div(M.at(i, col), M.at(row, col));
            if (q != 0) row_sub(i, row, q);
        }
        ++row;
    }
    // rows >= `row` are zero by construction; U keeps all transform rows,
    // so rows of *U beyond H.rows are kernel combinations of the input rows.
    MatZ H(row, M.cols);
    for (int i = 0; i < row; ++i)
        for (int c = 0; c < M.cols; ++c) H.at(i, c) = M.at(i, c);
    return H;
}

inline MatZ transpose(const MatZ& A) {
    MatZ T(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) T.at(j, i) = A.at(i, j);
    return T;
}

// Canonical basis (columns) of the lattice spanned by the columns of A.
inline MatZ lat_basis(const MatZ& A) { return transpose(row_hnf(transpose(A))); }

// Integer kernel basis (columns x with A x = 0).
inline MatZ lat_kernel(const MatZ& A) {
    // Row-reduce [A^T | I]; rows whose A^T-part vanished carry kernel vectors.
    MatZ W(A.cols, A.rows + A.cols);
    for (int i = 0; i < A.cols; ++i) {
        for (int j = 0; j < A.rows; ++j) W.at(i, j) = A.at(j, i);
        W.at(i, A.rows + i) = 1;
    }
    MatZ H = row_hnf(W);
    std::vector<int> kr;
    for (int i = 0; i < H.rows; ++i) {
        bool zero = true;
        for (int j = 0; j < A.rows; ++j) zero &= (H.at(i, j) == 0);
        if (zero) kr.push_back(i);
    }
    MatZ K(A.cols, static_cast<int>(kr.size()));
    for (size_t t = 0; t < kr.size(); ++t)
        for (int j = 0; j < A.cols; ++j) K.at(j, static_cast<int>(t)) = H.at(kr[t], A.rows + j);
    return K;
}

// Solve A x = b exactly over Z; returns nullopt when b is outside the
// column lattice.
inline std::optional<std::vector<cpp_int>> lat_solve(const MatZ& A,
                                                     const std::vector<cpp_int>& b) {
    if (static_cast<int>(b.size()) != A.rows) fail("ShapeMismatch", "lat_solve rhs");
    MatZ U;
    MatZ H = row_hnf(transpose(A), &U);  // rows of H = rows of U * A^T
    std::vector<cpp_int> r = b;
    std::vector<cpp_int> y(H.rows, 0);
    for (int i = 0; i < H.rows; ++i) {
        int pc = -1;
        for (int c = 0; c < H.cols; ++c)
            if (H.at(i, c) != 0) { pc = c; break; }
        if (pc < 0) continue;
        cpp_int q = r[pc] / H.at(i, pc);
        if (r[pc] % H.at(i, pc) != 0) return std::nullopt;
        y[i] = q;
        for (int c = 0; c < H.cols; ++c) r[c] -= q * H.at(i, c);
    }
    for (const cpp_int& v : r)
        if (v != 0) return std::nullopt;
    std::vector<cpp_int> x(A.cols, 0);
    for (int i = 0; i < H.rows; ++i)
        if (y[i] != 0)
            for (int j = 0; j < A.cols; ++j) x[j] += y[i] * U.at(i, j);
    return x;
}

inline bool lat_member(const MatZ& A, const std::vector<cpp_int>& b) {
    return lat_solve(A, b).has_value();
}

// Basis of (column lattice of A) intersected with (column lattice of B).
inline MatZ lat_intersect(const MatZ& A, const MatZ& B) {
    if (A.rows != B.rows) fail("ShapeMismatch", "lat_intersect");
    MatZ J(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) J.at(i, j) = A.at(i, j);
        for (int j = 0; j < B.cols; ++j) J.at(i, A.cols + j) = -B.at(i, j);
    }
    MatZ K = lat_kernel(J);
    MatZ G(A.rows, K.cols);
    for (int t = 0; t < K.cols; ++t)
        for (int i = 0; i < A.rows; ++i) {
            cpp_int acc = 0;
            for (int j = 0; j < A.cols; ++j) acc += A.at(i, j) * K.at(j, t);
            G.at(i, t) = acc;
        }
    return lat_basis(G);
}

// Sum of column lattices.
inline MatZ lat_sum(const MatZ& A, const MatZ& B) {
    if (A.rows != B.rows) fail("ShapeMismatch", "lat_sum");
    MatZ J(A.rows, A.cols + B.cols);
    for (int i = 0; i < A.rows; ++i) {
        for (int j = 0; j < A.cols; ++j) J.at(i, j) = A.at(i, j);
        for (int j = 0; j < B.cols; ++j) J.at(i, A.cols + j) = B.at(i, j);
    }
    return lat_basis(J);
}

inline bool lat_equal(const MatZ& A, const MatZ& B) {
    return lat_basis(A) == lat_basis(B);
}

// Smith invariant factors d_1 | d_2 | ... (positive, 1s included).
inline std::vector<cpp_int> snf_z(MatZ A) {
    int n = std::min(A.rows, A.cols);
    std::vector<cpp_int> diag;
    int k = 0;
    while (k < n) {
        int bi = -1, bj = -1;
        for (int i = k; i < A.rows; ++i)
            for (int j = k; j < A.cols; ++j)
                if (A.at(i, j) != 0 &&
                    (bi < 0 || abs(A.at(i, j)) < abs(A.at(bi, bj)))) {
                    bi = i;
                    bj = j;
                }
        if (bi < 0) break;
        for (int c = 0; c < A.cols; ++c) std::swap(A.at(k, c), A.at(bi, c));
        for (int r = 0; r < A.rows; ++r) std::swap(A.at(r, k), A.at(r, bj));
        bool again = false;
        for (int i = k + 1; i < A.rows; ++i) {
            if (A.at(i, k) == 0) continue;
            cpp_int q = A.at(i, k) / A.at(k, k);
            for (int c = 0; c < A.cols; ++c) A.at(i, c) -= q * A.at(k, c);
            if (A.at(i, k) != 0) again = true;
        }
        for (int j = k + 1; j < A.cols; ++j) {
            if (A.at(k, j) == 0) continue;
            cpp_int q = A.at(k, j) / A.at(k, k);
            for (int r = 0; r < A.rows; ++r) A.at(r, j) -= q * A.at(r, k);
            if (A.at(k, j) != 0) again = true;
        }
        if (again) continue;
        // enforce divisibility: fold any non-multiple into the pivot's column
        bool fixed = true;
        for (int i = k + 1; i < A.rows && fixed; ++i)
            for (int j = k + 1; j < A.cols && fixed; ++j)
                if (A.at(i, j) % A.at(k, k) != 0) {
                    for (int c = 0; c < A.cols; ++c) A.at(k, c) += A.at(i, c);
                    fixed = false;
                }
        if (!fixed) continue;
        diag.push_back(abs(A.at(k, k)));
        ++k;
    }
    return diag;
}

// Invariants of a finitely generated abelian group.
struct AbInvariants {
    int free_rank = 0;
    std::vector<cpp_int> torsion;  // > 1, divisibility order

    bool operator==(const AbInvariants& o) const {
        return free_rank == o.free_rank && torsion == o.torsion;
    }
    std::string str() const {
        std::ostringstream os;
        os << "Z^" << free_rank;
        for (const auto& t : torsion) os << " + Z/" << t;
        return os.str();
    }
};

// Invariants of Z^n / (column lattice of R).
inline AbInvariants coker_invariants(const MatZ& R, int n) {
    AbInvariants inv;
    if (R.rows != n) fail("ShapeMismatch", "coker_invariants");
    std::vector<cpp_int> d = snf_z(R);
    inv.free_rank = n - static_cast<int>(d.size());
    for (const auto& v : d)
        if (v > 1) inv.torsion.push_back(v);
    return inv;
}

}  // namespace qprism
