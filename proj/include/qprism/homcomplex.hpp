#pragma once
// Bounded complexes of finitely presented abelian groups. Each term is
// Z^{g_i} / (column lattice of rel_i); free terms have no relation columns
// and uniform mod-p^e terms carry a fast Smith path. Supplies Koszul
// complexes of commuting endomorphisms, per-degree cohomology invariants,
// the decalage functor eta_f over Z, mapping cones and shifts, the
// Bockstein comparison, and additive flattening of truncated-ring and
// windowed Laurent matrices.

#include "qprism/laurent.hpp"
#include "qprism/zlattice.hpp"

namespace qprism {

struct FreeComplex {
    int lo = 0;
    std::vector<int> g;      // ambient rank per degree
    std::vector<MatZ> rel;   // relation columns per degree
    std::vector<MatZ> d;     // d[i]: g[i+1] x g[i], one fewer than terms
    u64 pe_p = 0;            // nonzero: every relation is p^e * identity
    int pe_e = 0;

    int hi() const { return lo + static_cast<int>(g.size()) - 1; }
    bool in_range(int deg) const { return deg >= lo && deg <= hi(); }
    int rank(int deg) const { return in_range(deg) ? g[deg - lo] : 0; }
};

inline MatZ matz_zero(int r, int c) { return MatZ(r, c, cpp_int(0)); }

inline MatZ matz_identity_scaled(int n, const cpp_int& s) {
    MatZ m = matz_zero(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = s;
    return m;
}

inline void complex_validate(const FreeComplex& C) {
    size_t t = C.g.size();
    if (t == 0) fail("BadParams", "complex needs at least one term");
    if (C.rel.size() != t || C.d.size() + 1 != t)
        fail("ShapeMismatch", "terms/relations/differentials out of step");
    for (size_t i = 0; i < t; ++i) {
        if (C.rel[i].rows != C.g[i]) fail("ShapeMismatch", "relation rows");
        if (i + 1 < t && (C.d[i].rows != C.g[i + 1] || C.d[i].cols != C.g[i]))
            fail("ShapeMismatch", "differential shape");
    }
    // d maps relations into relations and squares to zero modulo relations
    for (size_t i = 0; i + 1 < t; ++i) {
        for (int c = 0; c < C.rel[i].cols; ++c) {
            std::vector<cpp_int> v(C.g[i]);
            for (int r = 0; r < C.g[i]; ++r) v[r] = C.rel[i].at(r, c);
            std::vector<cpp_int> dv(C.g[i + 1], 0);
            for (int r = 0; r < C.g[i + 1]; ++r)
                for (int cc = 0; cc < C.g[i]; ++cc) dv[r] += C.d[i].at(r, cc) * v[cc];
            bool zero = true;
            for (const auto& x : dv) zero &= (x == 0);
            if (!zero && !lat_member(C.rel[i + 1], dv))
                fail("BadParams", "differential does not preserve relations");
        }
        if (i + 2 < t) {
            for (int c = 0; c < C.g[i]; ++c) {
                std::vector<cpp_int> dv(C.g[i + 1], 0);
                for (int r = 0; r < C.g[i + 1]; ++r) dv[r] = C.d[i].at(r, c);
                std::vector<cpp_int> ddv(C.g[i + 2], 0);
                for (int r = 0; r < C.g[i + 2]; ++r)
                    for (int cc = 0; cc < C.g[i + 1]; ++cc) ddv[r] += C.d[i + 1].at(r, cc) * dv[cc];
                bool zero = true;
                for (const auto& x : ddv) zero &= (x == 0);
                if (!zero && !lat_member(C.rel[i + 2], ddv))
                    fail("BadParams", "d o d nonzero modulo relations");
            }
        }
    }
}

inline FreeComplex make_complex(int lo, std::vector<int> ranks, std::vector<MatZ> diffs,
                                std::vector<MatZ> rels = {}) {
    FreeComplex C;
    C.lo = lo;
    C.g = std::move(ranks);
    C.d = std::move(diffs);
    if (rels.empty())
        for (int gi : C.g) rels.push_back(matz_zero(gi, 0));
    C.rel = std::move(rels);
    complex_validate(C);
    return C;
}

inline FreeComplex pe_complex(u64 p, int e, int lo, std::vector<int> ranks,
                              std::vector<Mat<u64>> diffs) {
    FreeComplex C;
    C.lo = lo;
    C.g = std::move(ranks);
    cpp_int m = upow(p, e);
    for (auto& dm : diffs) {
        MatZ z = matz_zero(dm.rows, dm.cols);
        for (int i = 0; i < dm.rows; ++i)
            for (int j = 0; j < dm.cols; ++j) z.at(i, j) = dm.at(i, j) % m;
        C.d.push_back(std::move(z));
    }
    for (int gi : C.g) C.rel.push_back(matz_identity_scaled(gi, m));
    C.pe_p = p;
    C.pe_e = e;
    complex_validate(C);
    return C;
}

// ---- cohomology ------------------------------------------------------------

namespace detail {

// columns of a basis of {x in Z^{gi} : d x in colspan(L)}; d may be absent
inline MatZ relative_kernel(int gi, const MatZ* dmat, const MatZ* L) {
    if (dmat == nullptr || dmat->rows == 0) return matz_identity_scaled(gi, 1);
    int extra = L ? L->cols : 0;
    MatZ A = matz_zero(dmat->rows, gi + extra);
    for (int r = 0; r < dmat->rows; ++r) {
        for (int c = 0; c < gi; ++c) A.at(r, c) = dmat->at(r, c);
        for (int c = 0; c < extra; ++c) A.at(r, gi + c) = -L->at(r, c);
    }
    MatZ ker = lat_kernel(A);
    MatZ X = matz_zero(gi, ker.cols);
    for (int r = 0; r < gi; ++r)
        for (int c = 0; c < ker.cols; ++c) X.at(r, c) = ker.at(r, c);
    return lat_basis(X);
}

inline AbInvariants pe_cohomology(const FreeComplex& C, int deg) {
    ZModCtx cx(C.pe_p, C.pe_e);
    int i = deg - C.lo;
    int gi = C.g[i];
    int e = C.pe_e;
    auto tou = [&](const cpp_int& v) {
        cpp_int r = v % cx.m;
        if (r < 0) r += cx.m;
        return r.convert_to<u64>();
    };
    bool outgoing = (i + 1 < static_cast<int>(C.g.size())) && C.g[i + 1] > 0;
    std::vector<int> torders(gi, e);
    Mat<u64> cbinv = mat_identity<u64>(gi);
    if (outgoing) {
        Mat<u64> B(C.g[i + 1], gi, 0);
        for (int r = 0; r < B.rows; ++r)
            for (int c = 0; c < gi; ++c) B.at(r, c) = tou(C.d[i].at(r, c));
        auto snf = zmod_snf(cx, B);
        for (int j = 0; j < gi; ++j)
            torders[j] = j < static_cast<int>(snf.svals.size()) ? snf.svals[j] : e;
        auto inv = zmod_inverse(cx, snf.C);
        if (!inv) fail("InternalError", "SNF transform not invertible");
        cbinv = *inv;
    }
    std::vector<int> J;
    for (int j = 0; j < gi; ++j)
        if (torders[j] > 0) J.push_back(j);
    if (J.empty()) return {};
    int acols = i > 0 ? C.g[i - 1] : 0;
    Mat<u64> Ap(gi, acols, 0);
    if (acols > 0) {
        Mat<u64> A(gi, acols, 0);
        for (int r = 0; r < gi; ++r)
            for (int c = 0; c < acols; ++c) A.at(r, c) = tou(C.d[i - 1].at(r, c));
        Ap = zmod_matmul(cx, cbinv, A);
    }
    int nJ = static_cast<int>(J.size());
    Mat<u64> aug(nJ, acols + nJ, 0);
    for (int jj = 0; jj < nJ; ++jj) {
        int j = J[jj];
        u64 div = upow(cx.p, e - torders[j]);
        for (int l = 0; l < acols; ++l) {
            if (Ap.at(j, l) % div != 0) fail("InternalError", "image escapes the kernel");
            aug.at(jj, l) = (Ap.at(j, l) / div) % cx.m;
        }
        aug.at(jj, acols + jj) = upow(cx.p, torders[j]) % cx.m;
    }
    for (int j = 0; j < gi; ++j) {
        if (torders[j] > 0) continue;
        for (int l = 0; l < acols; ++l)
            if (Ap.at(j, l) % cx.m != 0) fail("InternalError", "image escapes the kernel");
    }
    auto snf2 = zmod_snf(cx, aug);
    AbInvariants inv;
    for (int l = 0; l < nJ; ++l) {
        int s = l < static_cast<int>(snf2.svals.size()) ? snf2.svals[l] : e;
        if (s > 0) inv.torsion.emplace_back(upow(cx.p, s));
    }
    return inv;
}

}  // namespace detail

inline AbInvariants complex_cohomology(const FreeComplex& C, int deg) {
    if (!C.in_range(deg) || C.rank(deg) == 0) return {};
    if (C.pe_p != 0) return detail::pe_cohomology(C, deg);
    int i = deg - C.lo;
    int gi = C.g[i];
    const MatZ* dmat = (i + 1 < static_cast<int>(C.g.size())) ? &C.d[i] : nullptr;
    const MatZ* L = (i + 1 < static_cast<int>(C.g.size())) ? &C.rel[i + 1] : nullptr;
    MatZ K = detail::relative_kernel(gi, dmat, L);
    if (K.cols == 0) return {};
    int scols = (i > 0 ? C.d[i - 1].cols : 0) + C.rel[i].cols;
    MatZ Q = matz_zero(K.cols, scols);
    int col = 0;
    auto push_col = [&](const std::vector<cpp_int>& s) {
        auto c = lat_solve(K, s);
        if (!c) fail("InternalError", "boundary outside relative kernel");
        for (int r = 0; r < K.cols; ++r) Q.at(r, col) = (*c)[r];
        ++col;
    };
    if (i > 0)
        for (int c = 0; c < C.d[i - 1].cols; ++c) {
            std::vector<cpp_int> s(gi);
            for (int r = 0; r < gi; ++r) s[r] = C.d[i - 1].at(r, c);
            push_col(s);
        }
    for (int c = 0; c < C.rel[i].cols; ++c) {
        std::vector<cpp_int> s(gi);
        for (int r = 0; r < gi; ++r) s[r] = C.rel[i].at(r, c);
        push_col(s);
    }
    return coker_invariants(Q, K.cols);
}

// ---- Koszul complexes --------------------------------------------------------

inline std::vector<std::vector<int>> popcount_masks(int dn) {
    std::vector<std::vector<int>> by(dn + 1);
    for (int m = 0; m < (1 << dn); ++m) by[__builtin_popcount(static_cast<unsigned>(m))].push_back(m);
    return by;
}

// Cochain Koszul complex of pairwise-commuting additive endomorphisms:
// degree n has one copy of the module per n-subset, with signed insertions.
inline FreeComplex koszul_complex(const std::vector<MatZ>& endos) {
    int dn = static_cast<int>(endos.size());
    if (dn == 0) fail("BadParams", "need at least one endomorphism");
    int m = endos[0].rows;
    for (const auto& E : endos)
        if (E.rows != m || E.cols != m) fail("ShapeMismatch", "endomorphism sizes differ");
    for (int a = 0; a < dn; ++a)
        for (int b = a + 1; b < dn; ++b) {
            MatZ ab = mat_mul(endos[a], endos[b]);
            MatZ ba = mat_mul(endos[b], endos[a]);
            if (!(ab.a == ba.a)) fail("NonCommuting", "endomorphisms must commute exactly");
        }
    auto masks = popcount_masks(dn);
    std::vector<std::map<int, int>> pos(dn + 1);
    for (int n = 0; n <= dn; ++n)
        for (size_t t = 0; t < masks[n].size(); ++t) pos[n][masks[n][t]] = static_cast<int>(t);
    std::vector<int> ranks;
    for (int n = 0; n <= dn; ++n) ranks.push_back(m * static_cast<int>(masks[n].size()));
    std::vector<MatZ> diffs;
    for (int n = 0; n < dn; ++n) {
        MatZ D = matz_zero(ranks[n + 1], ranks[n]);
        for (int S : masks[n])
            for (int iop = 0; iop < dn; ++iop) {
                if (S & (1 << iop)) continue;
                int T = S | (1 << iop);
                int sign = __builtin_popcount(static_cast<unsigned>(S & ((1 << iop) - 1))) % 2 == 0 ? 1 : -1;
                int roff = pos[n + 1][T] * m, coff = pos[n][S] * m;
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < m; ++c)
                        D.at(roff + r, coff + c) += sign * endos[iop].at(r, c);
            }
        diffs.push_back(std::move(D));
    }
    return make_complex(0, ranks, diffs);
}

inline FreeComplex koszul_complex_pe(u64 p, int e, const std::vector<Mat<u64>>& endos) {
    if (endos.empty()) fail("BadParams", "need at least one endomorphism");
    // commutation is only required modulo p^e here
    ZModCtx cx(p, e);
    for (size_t a = 0; a < endos.size(); ++a)
        for (size_t b = a + 1; b < endos.size(); ++b) {
            Mat<u64> ab = zmod_matmul(cx, endos[a], endos[b]);
            Mat<u64> ba = zmod_matmul(cx, endos[b], endos[a]);
            if (!(ab.a == ba.a)) fail("NonCommuting", "endomorphisms must commute mod p^e");
        }
    int dn = static_cast<int>(endos.size());
    int mm = endos[0].rows;
    auto masks = popcount_masks(dn);
    std::vector<std::map<int, int>> pos(dn + 1);
    for (int n = 0; n <= dn; ++n)
        for (size_t t = 0; t < masks[n].size(); ++t) pos[n][masks[n][t]] = static_cast<int>(t);
    std::vector<int> ranks;
    for (int n = 0; n <= dn; ++n) ranks.push_back(mm * static_cast<int>(masks[n].size()));
    std::vector<Mat<u64>> diffs;
    for (int n = 0; n < dn; ++n) {
        Mat<u64> D(ranks[n + 1], ranks[n], 0);
        for (int S : masks[n])
            for (int iop = 0; iop < dn; ++iop) {
                if (S & (1 << iop)) continue;
                int T = S | (1 << iop);
                bool neg = __builtin_popcount(static_cast<unsigned>(S & ((1 << iop) - 1))) % 2 == 1;
                int roff = pos[n + 1][T] * mm, coff = pos[n][S] * mm;
                for (int r = 0; r < mm; ++r)
                    for (int c = 0; c < mm; ++c) {
                        u64 v = endos[iop].at(r, c) % cx.m;
                        if (neg) v = (cx.m - v) % cx.m;
                        D.at(roff + r, coff + c) = cx.add(D.at(roff + r, coff + c), v);
                    }
            }
        diffs.push_back(std::move(D));
    }
    return pe_complex(p, e, 0, ranks, diffs);
}

// ---- decalage ----------------------------------------------------------------

namespace detail {

inline void eta_bases(const FreeComplex& C, const cpp_int& f, std::vector<MatZ>& B,
                      std::vector<MatZ>& W) {
    size_t t = C.g.size();
    B.assign(t, MatZ(0, 0, cpp_int(0)));
    for (size_t i = 0; i < t; ++i) {
        if (i + 1 < t && C.g[i + 1] > 0) {
            MatZ fI = matz_identity_scaled(C.g[i + 1], f);
            B[i] = relative_kernel(C.g[i], &C.d[i], &fI);
        } else {
            B[i] = matz_identity_scaled(C.g[i], 1);
        }
    }
    W.assign(t > 0 ? t - 1 : 0, MatZ(0, 0, cpp_int(0)));
    for (size_t i = 0; i + 1 < t; ++i) {
        W[i] = matz_zero(B[i + 1].cols, B[i].cols);
        for (int c = 0; c < B[i].cols; ++c) {
            std::vector<cpp_int> v(C.g[i + 1], 0);
            for (int r = 0; r < C.g[i + 1]; ++r)
                for (int cc = 0; cc < C.g[i]; ++cc) v[r] += C.d[i].at(r, cc) * B[i].at(cc, c);
            for (auto& x : v) {
                if (x % f != 0) fail("InternalError", "eta basis column escaped f-divisibility");
                x /= f;
            }
            auto w = lat_solve(B[i + 1], v);
            if (!w) fail("InternalError", "eta image outside next basis");
            for (int r = 0; r < B[i + 1].cols; ++r) W[i].at(r, c) = (*w)[r];
        }
    }
}

inline void require_free_z(const FreeComplex& C, const cpp_int& f, const char* who) {
    if (f == 0) fail("FZeroDivisor", std::string(who) + " needs a nonzero f");
    for (const auto& r : C.rel)
        if (r.cols != 0) fail("FZeroDivisor", std::string(who) + " requires free Z terms");
}

}  // namespace detail

// (eta_f C)^i = {x in f^i C^i : dx in f^{i+1} C^{i+1}}, presented on the
// basis f^i B_i; the induced differential is W_i with B_{i+1} W_i = (d B_i)/f.
inline FreeComplex eta_complex(const FreeComplex& C, const cpp_int& f) {
    detail::require_free_z(C, f, "eta");
    std::vector<MatZ> B, W;
    detail::eta_bases(C, f, B, W);
    std::vector<int> ranks;
    for (const auto& b : B) ranks.push_back(b.cols);
    return make_complex(C.lo, ranks, W);
}

// Bockstein complex: terms H^i(C/f) presented on B_i with relations
// [f * coords | d-image coords], differential (d/f) in the same bases.
inline FreeComplex bockstein_complex(const FreeComplex& C, const cpp_int& f) {
    detail::require_free_z(C, f, "bockstein");
    std::vector<MatZ> B, W;
    detail::eta_bases(C, f, B, W);
    size_t t = C.g.size();
    std::vector<int> ranks;
    std::vector<MatZ> rels;
    for (size_t i = 0; i < t; ++i) {
        int k = B[i].cols;
        ranks.push_back(k);
        int scols = C.g[i] + (i > 0 ? C.d[i - 1].cols : 0);
        MatZ R = matz_zero(k, scols);
        int col = 0;
        auto push_col = [&](std::vector<cpp_int> s) {
            auto c = lat_solve(B[i], s);
            if (!c) fail("InternalError", "relation outside kernel basis");
            for (int r = 0; r < k; ++r) R.at(r, col) = (*c)[r];
            ++col;
        };
        for (int tgt = 0; tgt < C.g[i]; ++tgt) {
            std::vector<cpp_int> s(C.g[i], 0);
            s[tgt] = f;
            push_col(std::move(s));
        }
        if (i > 0)
            for (int c = 0; c < C.d[i - 1].cols; ++c) {
                std::vector<cpp_int> s(C.g[i]);
                for (int r = 0; r < C.g[i]; ++r) s[r] = C.d[i - 1].at(r, c);
                push_col(std::move(s));
            }
        rels.push_back(std::move(R));
    }
    return make_complex(C.lo, ranks, W, rels);
}

// Reduce a free Z complex modulo f.
inline FreeComplex mod_f_complex(const FreeComplex& C, const cpp_int& f) {
    detail::require_free_z(C, f, "mod_f");
    std::vector<MatZ> rels;
    for (int gi : C.g) rels.push_back(matz_identity_scaled(gi, f));
    FreeComplex R = make_complex(C.lo, C.g, C.d, rels);
    return R;
}

// The decalage-Bockstein comparison: H^*((eta_f C)/f) against the
// cohomology of the Bockstein complex (H^*(C/f), Bock_f).
inline bool bockstein_comparison(const FreeComplex& C, const cpp_int& f,
                                 int* bad_deg = nullptr) {
    FreeComplex bock = bockstein_complex(C, f);
    FreeComplex etam = mod_f_complex(eta_complex(C, f), f);
    for (int deg = C.lo; deg <= C.hi(); ++deg) {
        if (!(complex_cohomology(bock, deg) == complex_cohomology(etam, deg))) {
            if (bad_deg) *bad_deg = deg;
            return false;
        }
    }
    return true;
}

// ---- cones, shifts, quasi-isomorphism ------------------------------------------

inline FreeComplex shift_complex(FreeComplex C, int k) {
    C.lo += k;
    if (k % 2 != 0)
        for (auto& D : C.d)
            for (auto& v : D.a) v = -v;
    return C;
}

// Cone of phi: C -> D with phi[j]: C^{phi_lo+j} -> D^{phi_lo+j};
// Cone^i = C^{i+1} (+) D^i, d(c, x) = (-d c, phi(c) + d x).
inline FreeComplex cone_complex(const FreeComplex& C, const FreeComplex& D,
                                const std::vector<MatZ>& phi, int phi_lo) {
    auto get_d = [](const FreeComplex& X, int deg) -> MatZ {
        int i = deg - X.lo;
        if (i < 0 || i + 1 >= static_cast<int>(X.g.size())) return matz_zero(X.rank(deg + 1), X.rank(deg));
        return X.d[i];
    };
    auto get_rel = [](const FreeComplex& X, int deg) -> MatZ {
        int i = deg - X.lo;
        if (i < 0 || i >= static_cast<int>(X.g.size())) return matz_zero(0, 0);
        return X.rel[i];
    };
    auto get_phi = [&](int deg) -> MatZ {
        int j = deg - phi_lo;
        if (j < 0 || j >= static_cast<int>(phi.size())) return matz_zero(D.rank(deg), C.rank(deg));
        if (phi[j].rows != D.rank(deg) || phi[j].cols != C.rank(deg))
            fail("ShapeMismatch", "chain map component shape");
        return phi[j];
    };
    // chain map must commute with d modulo target relations
    for (int deg = std::min(C.lo, D.lo) - 1; deg <= std::max(C.hi(), D.hi()); ++deg) {
        MatZ lhs = mat_mul(get_phi(deg + 1), get_d(C, deg));
        MatZ rhs = mat_mul(get_d(D, deg), get_phi(deg));
        for (int c = 0; c < lhs.cols; ++c) {
            std::vector<cpp_int> v(lhs.rows);
            bool zero = true;
            for (int r = 0; r < lhs.rows; ++r) {
                v[r] = lhs.at(r, c) - rhs.at(r, c);
                zero &= (v[r] == 0);
            }
            if (!zero && !lat_member(get_rel(D, deg + 1), v))
                fail("BadParams", "phi is not a chain map");
        }
    }
    int lo = std::min(C.lo - 1, D.lo);
    int hi = std::max(C.hi() - 1, D.hi());
    std::vector<int> ranks;
    std::vector<MatZ> rels, diffs;
    for (int deg = lo; deg <= hi; ++deg) {
        int rc = C.rank(deg + 1), rd = D.rank(deg);
        ranks.push_back(rc + rd);
        MatZ rc_rel = get_rel(C, deg + 1), rd_rel = get_rel(D, deg);
        MatZ R = matz_zero(rc + rd, rc_rel.cols + rd_rel.cols);
        for (int r = 0; r < rc; ++r)
            for (int c = 0; c < rc_rel.cols; ++c) R.at(r, c) = rc_rel.at(r, c);
        for (int r = 0; r < rd; ++r)
            for (int c = 0; c < rd_rel.cols; ++c) R.at(rc + r, rc_rel.cols + c) = rd_rel.at(r, c);
        rels.push_back(std::move(R));
    }
    for (int deg = lo; deg < hi; ++deg) {
        int rc = C.rank(deg + 1), rd = D.rank(deg);
        int rc2 = C.rank(deg + 2), rd2 = D.rank(deg + 1);
        MatZ dd = matz_zero(rc2 + rd2, rc + rd);
        MatZ dC = get_d(C, deg + 1), dD = get_d(D, deg), ph = get_phi(deg + 1);
        for (int r = 0; r < rc2; ++r)
            for (int c = 0; c < rc; ++c) dd.at(r, c) = -dC.at(r, c);
        for (int r = 0; r < rd2; ++r)
            for (int c = 0; c < rc; ++c) dd.at(rc2 + r, c) = ph.at(r, c);
        for (int r = 0; r < rd2; ++r)
            for (int c = 0; c < rd; ++c) dd.at(rc2 + r, rc + c) = dD.at(r, c);
        diffs.push_back(std::move(dd));
    }
    return make_complex(lo, ranks, diffs, rels);
}

inline bool complex_acyclic(const FreeComplex& C) {
    for (int deg = C.lo; deg <= C.hi(); ++deg) {
        AbInvariants h = complex_cohomology(C, deg);
        if (h.free_rank != 0 || !h.torsion.empty()) return false;
    }
    return true;
}

inline bool quasi_iso_check(const FreeComplex& C, const FreeComplex& D,
                            const std::vector<MatZ>& phi, int phi_lo) {
    return complex_acyclic(cone_complex(C, D, phi, phi_lo));
}

// ---- additive flattening -------------------------------------------------------

// Multiplication by c on Z/p^N[v]/v^M in the v-power basis (full declared
// precision; coefficients are read as stored).
inline Mat<u64> qelem_action(const QElem& c) {
    int M = c.par.M;
    u64 m = upow(static_cast<u64>(c.par.p), c.par.N);
    Mat<u64> T(M, M, 0);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j <= i; ++j) T.at(i, j) = c.c[i - j] % m;
    return T;
}

inline Mat<u64> qmat_action(const Mat<QElem>& A) {
    if (A.a.empty()) fail("ShapeMismatch", "empty matrix");
    const RingParams& pr = A.a.front().par;
    int M = pr.M;
    Mat<u64> out(A.rows * M, A.cols * M, 0);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) {
            Mat<u64> blk = qelem_action(A.at(i, j));
            for (int r = 0; r < M; ++r)
                for (int c = 0; c < M; ++c) out.at(i * M + r, j * M + c) = blk.at(r, c);
        }
    return out;
}

// Finite monomial windows for Laurent coefficients.
struct MonomialWindow {
    std::vector<std::vector<i64>> mons;
    std::map<std::vector<i64>, int> index;
};

inline MonomialWindow make_window(std::vector<std::vector<i64>> mons) {
    MonomialWindow w;
    w.mons = std::move(mons);
    for (size_t i = 0; i < w.mons.size(); ++i) {
        if (!w.index.emplace(w.mons[i], static_cast<int>(i)).second)
            fail("BadParams", "duplicate window monomial");
    }
    return w;
}

inline MonomialWindow box_window(const std::vector<i64>& lo, const std::vector<i64>& hi) {
    if (lo.size() != hi.size()) fail("ShapeMismatch", "window bounds");
    std::vector<std::vector<i64>> mons;
    std::vector<i64> cur = lo;
    while (true) {
        mons.push_back(cur);
        size_t i = 0;
        while (i < cur.size()) {
            if (cur[i] < hi[i]) {
                ++cur[i];
                for (size_t j = 0; j < i; ++j) cur[j] = lo[j];
                break;
            }
            ++i;
        }
        if (i == cur.size()) break;
    }
    return make_window(std::move(mons));
}

// Additive action over Z/p^N of a Laurent matrix between windowed free
// modules; coordinates run (module slot, window slot, v power). Products
// leaving the output window are an error, never a silent truncation.
inline Mat<u64> lmat_window_action(const LMat& A, const MonomialWindow& win_in,
                                   const MonomialWindow& win_out) {
    if (A.a.empty()) fail("ShapeMismatch", "empty matrix");
    const AlgebraDesc& dd = A.a.front().desc;
    int M = dd.par.M;
    u64 pn = upow(static_cast<u64>(dd.par.p), dd.par.N);
    int ni = static_cast<int>(win_in.mons.size());
    int no = static_cast<int>(win_out.mons.size());
    Mat<u64> out(A.rows * no * M, A.cols * ni * M, 0);
    for (int t = 0; t < A.cols; ++t)
        for (int i = 0; i < A.rows; ++i) {
            const LaurentElem& f = A.at(i, t);
            for (const auto& [km, coef] : f.terms) {
                for (int wi = 0; wi < ni; ++wi) {
                    std::vector<i64> mout(km.size());
                    for (size_t x = 0; x < km.size(); ++x) mout[x] = km[x] + win_in.mons[wi][x];
                    auto it = win_out.index.find(mout);
                    if (it == win_out.index.end())
                        fail("OutOfWindow", "product monomial leaves the output window");
                    int wo = it->second;
                    for (int b = 0; b < M; ++b)
                        for (int bb = b; bb < M; ++bb) {
                            u64 cc = coef.c[bb - b] % pn;
                            if (cc == 0) continue;
                            int row = (i * no + wo) * M + bb;
                            int colx = (t * ni + wi) * M + b;
                            out.at(row, colx) = (out.at(row, colx) + cc) % pn;
                        }
                }
            }
        }
    return out;
}

}  // namespace qprism
