#pragma once
// Linear algebra over Z/p^e with exact bookkeeping of p-valuations.
// Smith form convention: D = R * A * C with R, C invertible mod p^e and
// D diagonal with entries p^{s_0} | p^{s_1} | ... (units normalized away).

#include "qprism/common.hpp"

namespace qprism {

struct ZModCtx {
    u64 p = 0;
    int e = 0;
    u64 m = 0;  // p^e

    ZModCtx() = default;
    ZModCtx(u64 p_, int e_) : p(p_), e(e_), m(upow(p_, e_)) {}

    u64 red(u64 x) const { return x % m; }
    u64 red_i(i64 x) const {
        i64 r = x % static_cast<i64>(m);
        if (r < 0) r += static_cast<i64>(m);
        return static_cast<u64>(r);
    }
    u64 red_z(const cpp_int& x) const {
        cpp_int r = x % m;
        if (r < 0) r += m;
        return r.convert_to<u64>();
    }
    u64 add(u64 a, u64 b) const { return (a + b) % m; }
    u64 sub(u64 a, u64 b) const { return (a + m - b % m) % m; }
    u64 neg(u64 a) const { return a % m == 0 ? 0 : m - a % m; }
    u64 mul(u64 a, u64 b) const {
        return static_cast<u64>((static_cast<u128>(a) * b) % m);
    }
    u64 pow(u64 a, u64 k) const {
        u64 r = 1 % m;
        a %= m;
        while (k) {
            if (k & 1) r = mul(r, a);
            a = mul(a, a);
            k >>= 1;
        }
        return r;
    }
    int val(u64 x) const { return valuation(x % m, p, e); }
    bool is_unit(u64 x) const { return (x % m) % p != 0; }

    // inverse of a unit via extended Euclid on (x, p^e)
    u64 inv(u64 x) const {
        x %= m;
        if (!is_unit(x)) fail("NotAUnit", "zmod inverse of non-unit");
        i64 old_r = static_cast<i64>(x), r = static_cast<i64>(m);
        i64 old_s = 1, s = 0;
        while (r != 0) {
            i64 q = old_r / r;
            i64 t = old_r - q * r; old_r = r; r = t;
            t = old_s - q * s; old_s = s; s = t;
        }
        return red_i(old_s);
    }
};

struct ZModSnf {
    Mat<u64> D, R, C;        // D = R * A * C
    std::vector<int> svals;  // length min(rows, cols); e means zero diagonal
};

namespace detail {
inline void swap_rows(Mat<u64>& M, int i, int j) {
    if (i == j) return;
    for (int c = 0; c < M.cols; ++c) std::swap(M.at(i, c), M.at(j, c));
}
inline void swap_cols(Mat<u64>& M, int i, int j) {
    if (i == j) return;
    for (int r = 0; r < M.rows; ++r) std::swap(M.at(r, i), M.at(r, j));
}
// row_i -= f * row_k
inline void row_axpy(const ZModCtx& cx, Mat<u64>& M, int i, int k, u64 f) {
    for (int c = 0; c < M.cols; ++c)
        M.at(i, c) = cx.sub(M.at(i, c), cx.mul(f, M.at(k, c)));
}
inline void col_axpy(const ZModCtx& cx, Mat<u64>& M, int j, int k, u64 f) {
    for (int r = 0; r < M.rows; ++r)
        M.at(r, j) = cx.sub(M.at(r, j), cx.mul(f, M.at(r, k)));
}
inline void row_scale(const ZModCtx& cx, Mat<u64>& M, int i, u64 u) {
    for (int c = 0; c < M.cols; ++c) M.at(i, c) = cx.mul(M.at(i, c), u);
}
}  // namespace detail

// Smith normal form over Z/p^e. Pivot choice: minimal p-valuation in the
// active submatrix, so svals is nondecreasing and gives invariant factors.
inline ZModSnf zmod_snf(const ZModCtx& cx, const Mat<u64>& A) {
    ZModSnf out;
    out.D = A;
    for (auto& x : out.D.a) x %= cx.m;
    out.R = mat_identity<u64>(A.rows);
    out.C = mat_identity<u64>(A.cols);
    int n = std::min(A.rows, A.cols);
    out.svals.assign(n, cx.e);
    for (int k = 0; k < n; ++k) {
        int bi = -1, bj = -1, bv = cx.e;
        for (int i = k; i < A.rows; ++i)
            for (int j = k; j < A.cols; ++j) {
                int v = cx.val(out.D.at(i, j));
                if (v < bv) { bv = v; bi = i; bj = j; }
            }
        if (bi < 0) break;  // submatrix is zero
        detail::swap_rows(out.D, k, bi);
        detail::swap_rows(out.R, k, bi);
        detail::swap_cols(out.D, k, bj);
        detail::swap_cols(out.C, k, bj);
        u64 piv = out.D.at(k, k);
        u64 unit = piv / upow(cx.p, bv);
        detail::row_scale(cx, out.D, k, cx.inv(unit));
        detail::row_scale(cx, out.R, k, cx.inv(unit));
        u64 ps = upow(cx.p, bv);
        for (int i = k + 1; i < A.rows; ++i) {
            u64 x = out.D.at(i, k);
            if (x == 0) continue;
            u64 f = x / ps;  // exact: val(x) >= bv by pivot minimality
            detail::row_axpy(cx, out.D, i, k, f);
            detail::row_axpy(cx, out.R, i, k, f);
        }
        for (int j = k + 1; j < A.cols; ++j) {
            u64 x = out.D.at(k, j);
            if (x == 0) continue;
            u64 f = x / ps;
            detail::col_axpy(cx, out.D, j, k, f);
            detail::col_axpy(cx, out.C, j, k, f);
        }
        out.svals[k] = bv;
    }
    return out;
}

// Kernel generators of A acting on column vectors over Z/p^e.
// With D = R A C and diagonal p^{s_j}: x = C (p^{e-s_j} e_j) for s_j > 0,
// and x = C e_j for columns beyond the pivot range.
inline std::vector<std::vector<u64>> zmod_kernel(const ZModCtx& cx, const Mat<u64>& A) {
    ZModSnf s = zmod_snf(cx, A);
    std::vector<std::vector<u64>> gens;
    for (int j = 0; j < A.cols; ++j) {
        int sv = j < static_cast<int>(s.svals.size()) ? s.svals[j] : cx.e;
        if (sv == 0) continue;
        u64 scale = upow(cx.p, cx.e - sv);
        std::vector<u64> g(A.cols, 0);
        for (int r = 0; r < A.cols; ++r) g[r] = cx.mul(s.C.at(r, j), scale);
        bool nz = false;
        for (u64 v : g) nz |= (v != 0);
        if (nz) gens.push_back(std::move(g));
    }
    return gens;
}

// One solution of A x = b over Z/p^e, if any.
inline std::optional<std::vector<u64>> zmod_solve(const ZModCtx& cx, const Mat<u64>& A,
                                                  const std::vector<u64>& b) {
    if (static_cast<int>(b.size()) != A.rows) fail("ShapeMismatch", "zmod_solve rhs");
    ZModSnf s = zmod_snf(cx, A);
    std::vector<u64> y(A.rows, 0);
    for (int i = 0; i < A.rows; ++i) {
        u64 acc = 0;
        for (int j = 0; j < A.rows; ++j) acc = cx.add(acc, cx.mul(s.R.at(i, j), b[j] % cx.m));
        y[i] = acc;
    }
    std::vector<u64> x0(A.cols, 0);
    int n = std::min(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        if (i < n) {
            int sv = s.svals[i];
            u64 ps = upow(cx.p, sv);
            if (y[i] % ps != 0) return std::nullopt;
            x0[i] = y[i] / ps;  // valid lift of the quotient mod p^{e-sv}
        } else if (y[i] % cx.m != 0) {
            return std::nullopt;
        }
    }
    std::vector<u64> x(A.cols, 0);
    for (int r = 0; r < A.cols; ++r) {
        u64 acc = 0;
        for (int j = 0; j < A.cols; ++j) acc = cx.add(acc, cx.mul(s.C.at(r, j), x0[j]));
        x[r] = acc;
    }
    return x;
}

inline std::vector<u64> zmod_apply(const ZModCtx& cx, const Mat<u64>& A,
                                   const std::vector<u64>& x) {
    std::vector<u64> r(A.rows, 0);
    for (int i = 0; i < A.rows; ++i) {
        u64 acc = 0;
        for (int j = 0; j < A.cols; ++j) acc = cx.add(acc, cx.mul(A.at(i, j), x[j] % cx.m));
        r[i] = acc;
    }
    return r;
}

inline std::optional<Mat<u64>> zmod_inverse(const ZModCtx& cx, const Mat<u64>& A) {
    if (A.rows != A.cols) return std::nullopt;
    ZModSnf s = zmod_snf(cx, A);
    for (int v : s.svals)
        if (v != 0) return std::nullopt;
    // A^{-1} = C D^{-1} R with D = I after unit normalization
    return mat_mul(s.C, s.R);
}

inline Mat<u64> zmod_matmul(const ZModCtx& cx, const Mat<u64>& A, const Mat<u64>& B) {
    if (A.cols != B.rows) fail("ShapeMismatch", "zmod_matmul");
    Mat<u64> r(A.rows, B.cols, 0);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            u64 v = A.at(i, k);
            if (v == 0) continue;
            for (int j = 0; j < B.cols; ++j)
                r.at(i, j) = cx.add(r.at(i, j), cx.mul(v, B.at(k, j)));
        }
    return r;
}

}  // namespace qprism
