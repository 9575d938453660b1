#pragma once
// Modules with flat q-connection over the integral Laurent model, the
// dictionary with semilinear group actions, tensor / internal hom / volte,
// q-Higgs fields on the Frobenius twist, Frobenius structures, and Koszul
// realizations of the q-de Rham and q-Higgs complexes over finite windows.

#include <string>
#include <utility>
#include <vector>

#include "qprism/homcomplex.hpp"

namespace qprism {

// gamma_i acts on coordinate columns as v -> G_i gamma_i(v).
struct GammaModule {
    AlgebraDesc desc;
    int n = 0;
    std::vector<LMat> G;
    std::vector<LMat> Ginv;
};

// nabla_i^log acts on coordinate columns as v -> B_i gamma_i(v) + dq_i(v);
// the entries of B_i are the logarithmic coordinates on the basis.
struct QConnModule {
    AlgebraDesc desc;
    int n = 0;
    std::vector<LMat> B;
};

// Theta_i^log acts the same way over the twist-1 algebra, where gamma_i and
// dq_i carry the q^p weights.
struct QHiggsModule {
    AlgebraDesc desc;
    int n = 0;
    std::vector<LMat> T;
};

// phi_host = [p]_q^{-r} P o (Frobenius pullback), with the invertibility
// witness P phi(Q) = [p]_q^c I stored explicitly.
struct FrobStructure {
    LMat P;
    int r = 0;
    LMat Q;
    int c = 0;
};

namespace detail {

inline void module_shape(const AlgebraDesc& dd, int twist, int n,
                         const std::vector<LMat>& ms, const char* who) {
    dd.validate();
    if (dd.twist != twist) fail("BadParams", std::string(who) + " twist mismatch");
    if (dd.level != 0) fail("BadParams", std::string(who) + " needs integral exponents");
    if (n < 1) fail("BadParams", std::string(who) + " needs rank >= 1");
    if (static_cast<int>(ms.size()) != dd.d)
        fail("ShapeMismatch", std::string(who) + " needs one matrix per variable");
    for (const LMat& m : ms)
        if (m.rows != n || m.cols != n)
            fail("ShapeMismatch", std::string(who) + " matrices must be rank x rank");
}

}  // namespace detail

inline void qm_validate(const GammaModule& m) {
    detail::module_shape(m.desc, 0, m.n, m.G, "GammaModule");
    if (m.Ginv.size() != m.G.size()) fail("ShapeMismatch", "missing stored inverses");
}
inline void qm_validate(const QConnModule& m) {
    detail::module_shape(m.desc, 0, m.n, m.B, "QConnModule");
}
inline void qm_validate(const QHiggsModule& m) {
    detail::module_shape(m.desc, 1, m.n, m.T, "QHiggsModule");
}

// ---------------------------------------------------------------------------
// coordinate operators

inline LMat lmat_scale_q(const LMat& a, const QElem& c) {
    return lmat_map(a, [&](const LaurentElem& e) { return l_scale_q(e, c); });
}

inline LMat lmat_transpose(const LMat& a) {
    LMat r(a.cols, a.rows, LaurentElem{});
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) r.at(j, i) = a.at(i, j);
    return r;
}

inline LMat lmat_kron(const LMat& a, const LMat& b) {
    LMat r(a.rows * b.rows, a.cols * b.cols, LaurentElem{});
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j)
            for (int k = 0; k < b.rows; ++k)
                for (int l = 0; l < b.cols; ++l)
                    r.at(i * b.rows + k, j * b.cols + l) = l_mul(a.at(i, j), b.at(k, l));
    return r;
}

// Column-major stacking: vec(F)[j * rows + k] = F[k][j], so that
// vec(A F B) = (B^T (x) A) vec(F).
inline LMat lmat_vec(const LMat& f) {
    AlgebraDesc dd = f.a.front().desc;
    LMat r = lmat_zero(dd, f.rows * f.cols, 1);
    for (int j = 0; j < f.cols; ++j)
        for (int k = 0; k < f.rows; ++k) r.at(j * f.rows + k, 0) = f.at(k, j);
    return r;
}

// The coordinate operator with log matrix M: F -> M gamma_i(F) + dq_i(F).
// Flatness of a family is the symmetry of op_i applied to the j-th matrix.
inline LMat semilinear_op(const LMat& m, int i, const LMat& f) {
    return lmat_add(lmat_mul(m, lmat_gamma(i, f)), lmat_dq(i, f));
}

inline bool flat_family(const std::vector<LMat>& ms) {
    int d = static_cast<int>(ms.size());
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (!lmat_eq(semilinear_op(ms[i], i, ms[j]), semilinear_op(ms[j], j, ms[i])))
                return false;
    return true;
}

inline bool check_flat(const QConnModule& n) { return flat_family(n.B); }
inline bool check_flat(const QHiggsModule& h) { return flat_family(h.T); }

inline bool check_gamma_commutes(const GammaModule& gm) {
    for (int i = 0; i < gm.desc.d; ++i)
        for (int j = i + 1; j < gm.desc.d; ++j) {
            LMat lhs = lmat_mul(gm.G[i], lmat_gamma(i, gm.G[j]));
            LMat rhs = lmat_mul(gm.G[j], lmat_gamma(j, gm.G[i]));
            if (!lmat_eq(lhs, rhs)) return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// dictionary with the group action

// Entrywise exact division by a scalar; non-divisibility reported with the
// caller's error code.
inline LaurentElem l_divide_q(const LaurentElem& f, const QElem& g, const char* code) {
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        try {
            l_insert(r, k, divide_exact(c, g));
        } catch (const qp_error& e) {
            if (e.code() == "NotDivisible")
                fail(code, "entry at " + join_ints(k) + " is not divisible");
            throw;
        }
    }
    return r;
}

// B_i = (G_i - I)/mu entrywise; costs (s, 1) of precision per the division
// rule for mu = q - 1, with the divider's v-window clamp. At s >= 1 mu is a
// zero divisor at truncation, so B is determined by G only modulo the exact
// mu-annihilator; to_gamma . from_gamma is the identity at the source's
// precision, the other composite only after scaling back by mu.
inline QConnModule from_gamma(const GammaModule& gm) {
    qm_validate(gm);
    QElem mu = q_mu(gm.desc.par);
    QConnModule n{gm.desc, gm.n, {}};
    LMat id = lmat_identity(gm.desc, gm.n);
    for (const LMat& g : gm.G) {
        LMat num = lmat_sub(g, id);
        n.B.push_back(lmat_map(
            num, [&](const LaurentElem& e) { return l_divide_q(e, mu, "NotTrivialModMu"); }));
    }
    return n;
}

inline LMat volte_matrix(const QConnModule& n, int i) {
    QElem mu = q_mu(n.desc.par);
    return lmat_add(lmat_identity(n.desc, n.n), lmat_scale_q(n.B[i], mu));
}

struct VolteData {
    std::vector<LMat> V;
    std::vector<LMat> Vinv;
};

// The volte matrices I + mu B_i together with their inverses; mu is nilpotent
// at truncation so the inverses always exist unless precision is degraded.
inline VolteData volte(const QConnModule& n) {
    qm_validate(n);
    VolteData out;
    for (int i = 0; i < n.desc.d; ++i) {
        LMat v = volte_matrix(n, i);
        auto inv = lmat_inverse(v);
        if (!inv) fail("VolteSingular", "volte matrix not invertible at this precision");
        out.V.push_back(std::move(v));
        out.Vinv.push_back(std::move(*inv));
    }
    return out;
}

// G_i = I + mu B_i exactly, with stored inverses.
inline GammaModule to_gamma(const QConnModule& n) {
    VolteData vd = volte(n);
    return GammaModule{n.desc, n.n, std::move(vd.V), std::move(vd.Vinv)};
}

// ---------------------------------------------------------------------------
// tensor, internal hom, Frobenius

// Basis e_a (x) e'_b at index a n' + b: B''_i = I (x) B'_i + B_i (x) (I + mu B'_i).
inline QConnModule tensor(const QConnModule& n, const QConnModule& np) {
    qm_validate(n);
    qm_validate(np);
    if (!(n.desc == np.desc)) fail("ParamsMismatch", "tensor needs one algebra");
    QConnModule out{n.desc, n.n * np.n, {}};
    LMat idn = lmat_identity(n.desc, n.n);
    for (int i = 0; i < n.desc.d; ++i) {
        LMat vp = volte_matrix(np, i);
        out.B.push_back(lmat_add(lmat_kron(idn, np.B[i]), lmat_kron(n.B[i], vp)));
    }
    return out;
}

// Defining equation on an n' x n coordinate matrix F:
//   hom_op(F) (I + mu B_i) = B'_i gamma_i(F) + dq_i(F) - F B_i.
inline LMat hom_apply(const QConnModule& n, const QConnModule& np, int i, const LMat& f) {
    LMat v = volte_matrix(n, i);
    auto c = lmat_inverse(v);
    if (!c) fail("VolteSingular", "hom needs invertible volte matrices");
    LMat num = lmat_sub(semilinear_op(np.B[i], i, f), lmat_mul(f, n.B[i]));
    return lmat_mul(num, *c);
}

// On vec coordinates: Bhom_i = C_i^T (x) B'_i - (B_i C_i)^T (x) I with
// C_i = (I + mu B_i)^{-1}; then hom_op(F) = Bhom_i gamma_i(vec F) + dq_i(vec F).
inline QConnModule hom_module(const QConnModule& n, const QConnModule& np) {
    qm_validate(n);
    qm_validate(np);
    if (!(n.desc == np.desc)) fail("ParamsMismatch", "hom needs one algebra");
    QConnModule out{n.desc, n.n * np.n, {}};
    LMat idp = lmat_identity(n.desc, np.n);
    for (int i = 0; i < n.desc.d; ++i) {
        LMat v = volte_matrix(n, i);
        auto c = lmat_inverse(v);
        if (!c) fail("VolteSingular", "hom needs invertible volte matrices");
        LMat lhs = lmat_kron(lmat_transpose(*c), np.B[i]);
        LMat rhs = lmat_kron(lmat_transpose(lmat_mul(n.B[i], *c)), idp);
        out.B.push_back(lmat_sub(lhs, rhs));
    }
    return out;
}

// Pullback coordinates along the Frobenius: B_i -> [p]_q phi(B_i).
inline QConnModule frob_pullback(const QConnModule& n) {
    qm_validate(n);
    QElem pq = q_tilde_xi(n.desc.par);
    QConnModule out{n.desc, n.n, {}};
    for (const LMat& b : n.B)
        out.B.push_back(lmat_scale_q(lmat_map(b, frob_endo), pq));
    return out;
}

inline QElem q_int_pow(const RingParams& pr, const QElem& x, int e) {
    QElem r = q_one(pr);
    for (int i = 0; i < e; ++i) r = q_mul(r, x);
    return r;
}

// P phi(Q) = [p]_q^c I, exactly.
inline bool check_frob_witness(const AlgebraDesc& dd, const FrobStructure& fs) {
    QElem pc = q_int_pow(dd.par, q_tilde_xi(dd.par), fs.c);
    LMat lhs = lmat_mul(fs.P, lmat_map(fs.Q, frob_endo));
    LMat rhs = lmat_scale_q(lmat_identity(dd, fs.P.rows), pc);
    return lmat_eq(lhs, rhs);
}

namespace detail {

// B_i gamma_i(P) + dq_i(P) = [p]_q P phi(B_i): the operator identity
// nabla o phi_N = phi_N o nabla^{phi*} read on the basis. The gamma twist on
// P comes from the Leibniz rule and is forced by the rank-one solution
// P = U_1^{p-1}, where gamma(P) + dq(P) = (q^{p-1} + [p-1]_q) P = [p]_q P.
inline bool horizontal_family(const std::vector<LMat>& ms, const LMat& p,
                              const QElem& pq) {
    for (int i = 0; i < static_cast<int>(ms.size()); ++i) {
        LMat lhs = semilinear_op(ms[i], i, p);
        LMat rhs = lmat_scale_q(lmat_mul(p, lmat_map(ms[i], frob_endo)), pq);
        if (!lmat_eq(lhs, rhs)) return false;
    }
    return true;
}

}  // namespace detail

inline bool check_horizontal(const QConnModule& n, const FrobStructure& fs) {
    return detail::horizontal_family(n.B, fs.P, q_tilde_xi(n.desc.par));
}
inline bool check_horizontal(const QHiggsModule& h, const FrobStructure& fs) {
    return detail::horizontal_family(h.T, fs.P, q_tilde_xi(h.desc.par));
}

// ---------------------------------------------------------------------------
// finite-window realizations

namespace detail {

// Flatten an additive operator on rank-n coordinate columns to a matrix over
// Z/p^N in the basis (module slot, window monomial, v power).
template <typename Op>
Mat<u64> window_action_impl(const AlgebraDesc& dd, int n, const MonomialWindow& win,
                            Op&& op) {
    const RingParams& pr = dd.par;
    int w = static_cast<int>(win.mons.size());
    int m = pr.M;
    u64 mod = upow(static_cast<u64>(pr.p), pr.N);
    Mat<u64> act(n * w * m, n * w * m, 0);
    for (int t = 0; t < n; ++t)
        for (int wi = 0; wi < w; ++wi)
            for (int b = 0; b < m; ++b) {
                QElem vb(pr, pr.N, pr.M, true);
                vb.c[b] = 1;
                LMat col = lmat_zero(dd, n, 1);
                col.at(t, 0) = l_monomial(dd, win.mons[wi], vb);
                LMat img = op(col);
                int src = (t * w + wi) * m + b;
                for (int tp = 0; tp < n; ++tp)
                    for (const auto& [k, c] : img.at(tp, 0).terms) {
                        auto it = win.index.find(k);
                        if (it == win.index.end())
                            fail("WindowExceeded",
                                 "operator leaves the window at " + join_ints(k));
                        for (int bb = 0; bb < m; ++bb)
                            if (c.c[bb] % mod != 0)
                                act.at((tp * w + it->second) * m + bb, src) = c.c[bb] % mod;
                    }
            }
    return act;
}

}  // namespace detail

inline Mat<u64> conn_window_action(const QConnModule& n, int i, const MonomialWindow& win) {
    return detail::window_action_impl(
        n.desc, n.n, win, [&](const LMat& col) { return semilinear_op(n.B[i], i, col); });
}

inline Mat<u64> higgs_window_action(const QHiggsModule& h, int i, const MonomialWindow& win) {
    return detail::window_action_impl(
        h.desc, h.n, win, [&](const LMat& col) { return semilinear_op(h.T[i], i, col); });
}

// Koszul complex of the flattened nabla_i^log over a finite window; the
// commutation check inside the Koszul constructor enforces flatness of the
// realized operators.
inline FreeComplex qde_rham(const QConnModule& n, const MonomialWindow& win) {
    qm_validate(n);
    std::vector<Mat<u64>> ops;
    for (int i = 0; i < n.desc.d; ++i) ops.push_back(conn_window_action(n, i, win));
    return koszul_complex_pe(static_cast<u64>(n.desc.par.p), n.desc.par.N, ops);
}

inline FreeComplex qhiggs_complex(const QHiggsModule& h, const MonomialWindow& win) {
    qm_validate(h);
    std::vector<Mat<u64>> ops;
    for (int i = 0; i < h.desc.d; ++i) ops.push_back(higgs_window_action(h, i, win));
    return koszul_complex_pe(static_cast<u64>(h.desc.par.p), h.desc.par.N, ops);
}

// ---------------------------------------------------------------------------
// manufactured instances

namespace instances {

inline QElem random_coeff(Rng& rng, const RingParams& pr, bool unit) {
    u64 mod = upow(static_cast<u64>(pr.p), pr.N);
    QElem c(pr, pr.N, pr.M, true);
    for (auto& x : c.c) x = rng.mod(mod);
    if (unit)
        while (c.c[0] % static_cast<u64>(pr.p) == 0) c.c[0] = rng.mod(mod);
    c.canonicalize();
    return c;
}

inline LaurentElem random_entry(Rng& rng, const AlgebraDesc& dd, int spread, int nterms) {
    LaurentElem f(dd);
    for (int t = 0; t < nterms; ++t) {
        std::vector<i64> k(dd.d);
        for (auto& x : k) x = rng.range(-spread, spread);
        l_insert(f, k, random_coeff(rng, dd.par, false));
    }
    return f;
}

// L D U with unit-monomial diagonal: invertible by construction.
inline LMat random_invertible(Rng& rng, const AlgebraDesc& dd, int n, int spread) {
    LMat lo = lmat_identity(dd, n), up = lmat_identity(dd, n), di = lmat_zero(dd, n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            up.at(i, j) = random_entry(rng, dd, spread, 2);
            lo.at(j, i) = random_entry(rng, dd, spread, 2);
        }
    for (int i = 0; i < n; ++i) {
        std::vector<i64> k(dd.d);
        for (auto& x : k) x = rng.range(-spread, spread);
        di.at(i, i) = l_monomial(dd, k, random_coeff(rng, dd.par, true));
    }
    return lmat_mul(lmat_mul(lo, di), up);
}

// Exponent table a[i][t] for the diagonal weight module q^{a} (twist 0) or
// q^{p a} (twist 1); the desc's own weights absorb the twist.
using WeightTable = std::vector<std::vector<i64>>;

inline WeightTable random_weights(Rng& rng, const AlgebraDesc& dd, int n, i64 amax,
                                  i64 step = 1) {
    WeightTable a(dd.d, std::vector<i64>(n));
    for (auto& row : a)
        for (auto& x : row) x = step * rng.range(0, amax);
    return a;
}

// Log matrices of the diagonal weight module twisted by X, computed without
// any division:
//   M_i = X^{-1} (diag(gamma_weight(a)) dq_i(X) + diag(dq_weight(a)) X).
inline std::vector<LMat> twisted_flat_family(const AlgebraDesc& dd, int n, const LMat& x,
                                             const LMat& xinv, const WeightTable& a) {
    std::vector<LMat> ms;
    for (int i = 0; i < dd.d; ++i) {
        LMat g0 = lmat_zero(dd, n, n), an = lmat_zero(dd, n, n);
        for (int t = 0; t < n; ++t) {
            g0.at(t, t) = l_const(dd, gamma_weight(dd, a[i][t]));
            an.at(t, t) = l_const(dd, dq_weight(dd, a[i][t]));
        }
        LMat num = lmat_add(lmat_mul(g0, lmat_dq(i, x)), lmat_mul(an, x));
        ms.push_back(lmat_mul(xinv, num));
    }
    return ms;
}

inline QConnModule random_flat(Rng& rng, const AlgebraDesc& dd, int n, int spread,
                               i64 amax) {
    LMat x = random_invertible(rng, dd, n, spread);
    LMat xinv = *lmat_inverse(x);
    return QConnModule{dd, n, twisted_flat_family(dd, n, x, xinv, random_weights(rng, dd, n, amax))};
}

inline QHiggsModule random_flat_higgs(Rng& rng, const AlgebraDesc& dd, int n, int spread,
                                      i64 amax) {
    LMat x = random_invertible(rng, dd, n, spread);
    LMat xinv = *lmat_inverse(x);
    return QHiggsModule{dd, n, twisted_flat_family(dd, n, x, xinv, random_weights(rng, dd, n, amax))};
}

// G_i = X^{-1} diag(gamma_weight(a)) gamma_i(X), exactly commuting and
// trivial mod mu.
inline GammaModule random_gamma(Rng& rng, const AlgebraDesc& dd, int n, int spread,
                                i64 amax) {
    LMat x = random_invertible(rng, dd, n, spread);
    LMat xinv = *lmat_inverse(x);
    WeightTable a = random_weights(rng, dd, n, amax);
    GammaModule gm{dd, n, {}, {}};
    for (int i = 0; i < dd.d; ++i) {
        LMat g0 = lmat_zero(dd, n, n), g0inv = lmat_zero(dd, n, n);
        for (int t = 0; t < n; ++t) {
            g0.at(t, t) = l_const(dd, gamma_weight(dd, a[i][t]));
            g0inv.at(t, t) = l_const(dd, gamma_weight(dd, -a[i][t]));
        }
        gm.G.push_back(lmat_mul(xinv, lmat_mul(g0, lmat_gamma(i, x))));
        gm.Ginv.push_back(lmat_mul(lmat_gamma(i, xinv), lmat_mul(g0inv, x)));
    }
    return gm;
}

// Frobenius-trivialized instance: X = phi(Y) twists the diagonal weight
// module with weights in p Z, so P = X^{-1} P0 phi(X) has the closed-form
// witness Q = phi(Y)^{-1} P1^{-1} Y with P0 = phi(P1); r = c = 0.
template <typename Module>
std::pair<Module, FrobStructure> frob_instance(Rng& rng, const AlgebraDesc& dd, int n,
                                               int spread, bool qpowers) {
    const RingParams& pr = dd.par;
    LMat y = random_invertible(rng, dd, n, spread);
    LMat yinv = *lmat_inverse(y);
    LMat x = lmat_map(y, frob_endo);
    LMat xinv = lmat_map(yinv, frob_endo);
    WeightTable a = qpowers ? random_weights(rng, dd, n, 1, pr.p)
                            : WeightTable(dd.d, std::vector<i64>(n, 0));
    Module mod{dd, n, twisted_flat_family(dd, n, x, xinv, a)};
    LMat p1 = lmat_zero(dd, n, n), p1inv = lmat_zero(dd, n, n);
    for (int t = 0; t < n; ++t) {
        std::vector<i64> e(dd.d), eneg(dd.d);
        for (int i = 0; i < dd.d; ++i) {
            e[i] = (pr.p - 1) * a[i][t] / pr.p;
            eneg[i] = -e[i];
        }
        p1.at(t, t) = l_monomial(dd, e, q_one(pr));
        p1inv.at(t, t) = l_monomial(dd, eneg, q_one(pr));
    }
    LMat p = lmat_mul(xinv, lmat_mul(lmat_map(p1, frob_endo), lmat_map(x, frob_endo)));
    LMat q = lmat_mul(xinv, lmat_mul(p1inv, y));
    return {std::move(mod), FrobStructure{std::move(p), 0, std::move(q), 0}};
}

inline std::pair<QConnModule, FrobStructure> random_frobenius(Rng& rng, const AlgebraDesc& dd,
                                                              int n, int spread,
                                                              bool qpowers = true) {
    return frob_instance<QConnModule>(rng, dd, n, spread, qpowers);
}

inline std::pair<QHiggsModule, FrobStructure> random_frobenius_higgs(
    Rng& rng, const AlgebraDesc& dd, int n, int spread, bool qpowers = true) {
    return frob_instance<QHiggsModule>(rng, dd, n, spread, qpowers);
}

}  // namespace instances

}  // namespace qprism
