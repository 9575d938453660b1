#pragma once
// Laurent algebras over the truncated q-base ring: d variables with
// exponents in p^{-level} Z (stored as integer numerators), optional
// Frobenius-twist coordinates (twist = 1 forces integral level 0).
// Supplies the gamma-action, q-log-derivatives, Frobenius maps, the
// integral/fractional decomposition, units and matrix inverses.

#include "qprism/rings.hpp"

namespace qprism {

struct AlgebraDesc {
    RingParams par;
    int d = 1;
    int twist = 0;  // 0: variables U_i; 1: variables U_i^{(1)}
    int level = 0;  // exponents in p^{-level} Z

    bool operator==(const AlgebraDesc& o) const {
        return par == o.par && d == o.d && twist == o.twist && level == o.level;
    }
    void validate() const {
        par.validate();
        if (d < 1) fail("BadParams", "need d >= 1");
        if (twist != 0 && twist != 1) fail("BadParams", "twist must be 0 or 1");
        if (level < 0 || level > par.s) fail("BadParams", "level must lie in [0, s]");
        if (twist == 1 && level != 0) fail("BadParams", "twisted algebras are integral");
    }
};

struct LaurentElem {
    AlgebraDesc desc;
    // exponent numerators (at denominator p^level) -> coefficient; no zeros
    std::map<std::vector<i64>, QElem> terms;

    LaurentElem() = default;
    explicit LaurentElem(const AlgebraDesc& dd) : desc(dd) {}

    bool is_zero() const { return terms.empty(); }
    bool operator==(const LaurentElem& o) const {
        return desc == o.desc && terms == o.terms;
    }
};

inline LaurentElem l_zero(const AlgebraDesc& dd) { return LaurentElem(dd); }

inline void l_insert(LaurentElem& f, const std::vector<i64>& k, const QElem& c) {
    // An absent monomial asserts an exact zero, so only full-precision zeros
    // may be pruned; a stored zero at partial precision keeps its stamp.
    if (c.is_exact_zero()) return;
    auto it = f.terms.find(k);
    if (it == f.terms.end()) {
        f.terms.emplace(k, c);
    } else {
        it->second = q_add(it->second, c);
        if (it->second.is_exact_zero()) f.terms.erase(it);
    }
}

inline LaurentElem l_monomial(const AlgebraDesc& dd, const std::vector<i64>& k,
                              const QElem& c) {
    if (static_cast<int>(k.size()) != dd.d) fail("BadParams", "monomial arity");
    LaurentElem f(dd);
    l_insert(f, k, c);
    return f;
}

inline LaurentElem l_const(const AlgebraDesc& dd, const QElem& c) {
    return l_monomial(dd, std::vector<i64>(dd.d, 0), c);
}

inline LaurentElem l_one(const AlgebraDesc& dd) { return l_const(dd, q_one(dd.par)); }

inline LaurentElem l_from_int(const AlgebraDesc& dd, i64 n) {
    return l_const(dd, q_from_int(dd.par, n));
}

// Lift an integral-level element to a deeper level (numerators scale).
inline LaurentElem l_level_lift(const LaurentElem& f, int level) {
    if (level == f.desc.level) return f;
    if (level < f.desc.level) fail("BadParams", "cannot lower level");
    if (f.desc.twist != 0) fail("BadParams", "twisted algebras stay at level 0");
    AlgebraDesc dd = f.desc;
    dd.level = level;
    i64 scale = ipow(dd.par.p, level - f.desc.level);
    LaurentElem r(dd);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        for (auto& x : k2) x *= scale;
        r.terms.emplace(k2, c);
    }
    return r;
}

inline void l_match(LaurentElem& a, LaurentElem& b) {
    if (a.desc == b.desc) return;
    AlgebraDesc da = a.desc, db = b.desc;
    if (da.par == db.par && da.d == db.d && da.twist == 0 && db.twist == 0) {
        int lv = std::max(da.level, db.level);
        a = l_level_lift(a, lv);
        b = l_level_lift(b, lv);
        return;
    }
    fail("ParamsMismatch", "Laurent algebra descriptors differ");
}

inline LaurentElem l_add(LaurentElem a, LaurentElem b) {
    l_match(a, b);
    LaurentElem r = a;
    for (const auto& [k, c] : b.terms) l_insert(r, k, c);
    return r;
}

inline LaurentElem l_neg(const LaurentElem& a) {
    LaurentElem r(a.desc);
    for (const auto& [k, c] : a.terms) r.terms.emplace(k, q_neg(c));
    return r;
}

inline LaurentElem l_sub(const LaurentElem& a, const LaurentElem& b) {
    return l_add(a, l_neg(b));
}

inline LaurentElem l_mul(LaurentElem a, LaurentElem b) {
    l_match(a, b);
    LaurentElem r(a.desc);
    for (const auto& [ka, ca] : a.terms)
        for (const auto& [kb, cb] : b.terms) {
            QElem c = q_mul(ca, cb);
            if (c.is_exact_zero()) continue;
            std::vector<i64> k(ka.size());
            for (size_t i = 0; i < ka.size(); ++i) k[i] = ka[i] + kb[i];
            l_insert(r, k, c);
        }
    return r;
}

inline LaurentElem l_scale_q(const LaurentElem& a, const QElem& c) {
    LaurentElem r(a.desc);
    for (const auto& [k, v] : a.terms) l_insert(r, k, q_mul(v, c));
    return r;
}

inline LaurentElem l_scale(const LaurentElem& a, i64 n) {
    return l_scale_q(a, q_from_int(a.desc.par, n));
}

inline bool l_eq(LaurentElem a, LaurentElem b) {
    l_match(a, b);
    // compare at shared coefficient precision
    auto residual = l_sub(a, b);
    for (const auto& [k, c] : residual.terms)
        if (!c.is_zero()) return false;
    return true;
}

// q-power applied to a single variable exponent. At twist 0 the action is
// U^k -> q^{k_i / p^level} U^k; at twist 1 it is U^{(1)k} -> q^{p k_i} U^{(1)k}.
inline QElem gamma_weight(const AlgebraDesc& dd, i64 ki) {
    if (dd.twist == 0) return q_pow_frac(dd.par, ki, dd.level);
    return q_pow_frac(dd.par, dd.par.p * ki, 0);
}

inline QElem dq_weight(const AlgebraDesc& dd, i64 ki) {
    if (dd.twist == 0) return q_analog(dd.par, ki, dd.level);
    return q_analog(dd.par, dd.par.p * ki, 0);
}

inline LaurentElem gamma_act(int i, const LaurentElem& f) {
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms)
        l_insert(r, k, q_mul(c, gamma_weight(f.desc, k[i])));
    return r;
}

// Logarithmic q-derivative: multiplies each monomial by the q-analog of its
// i-th exponent. Exact, no precision loss; mu * dq_log = gamma - id.
inline LaurentElem dq_log(int i, const LaurentElem& f) {
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        if (k[i] == 0) continue;
        l_insert(r, k, q_mul(c, dq_weight(f.desc, k[i])));
    }
    return r;
}

// Plain partial derivative d/dU_i (integral level 0 only).
inline LaurentElem partial_u(int i, const LaurentElem& f) {
    if (f.desc.level != 0) fail("BadParams", "partial_u needs integral exponents");
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        if (k[i] == 0) continue;
        std::vector<i64> k2 = k;
        k2[i] -= 1;
        l_insert(r, k2, q_scale(c, k[i]));
    }
    return r;
}

// Frobenius endomorphism: U^k -> U^{pk}, phi on coefficients.
inline LaurentElem frob_endo(const LaurentElem& f) {
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        for (auto& x : k2) x *= f.desc.par.p;
        r.terms.emplace(k2, q_frobenius(c));
    }
    return r;
}

// Relative Frobenius F: twisted algebra -> untwisted, U^{(1)k} -> U^{pk},
// coefficients unchanged (base-linear).
inline LaurentElem rel_frobenius_F(const LaurentElem& f) {
    if (f.desc.twist != 1) fail("BadParams", "rel_frobenius_F expects a twisted element");
    AlgebraDesc dd = f.desc;
    dd.twist = 0;
    LaurentElem r(dd);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        for (auto& x : k2) x *= f.desc.par.p;
        r.terms.emplace(k2, c);
    }
    return r;
}

// Untwist map W: U^k -> U^{(1)k} with phi on coefficients; F o W = frob_endo.
inline LaurentElem twist_W(const LaurentElem& f) {
    if (f.desc.twist != 0 || f.desc.level != 0)
        fail("BadParams", "twist_W expects an untwisted integral element");
    AlgebraDesc dd = f.desc;
    dd.twist = 1;
    LaurentElem r(dd);
    for (const auto& [k, c] : f.terms) r.terms.emplace(k, q_frobenius(c));
    return r;
}

// Inverse of rel_frobenius_F on its image: exponents all divisible by p and
// the element declared to come from the twisted algebra.
inline LaurentElem rel_frobenius_F_inv(const LaurentElem& f) {
    if (f.desc.twist != 0) fail("BadParams", "expected an untwisted element");
    AlgebraDesc dd = f.desc;
    dd.twist = 1;
    dd.level = 0;
    LaurentElem r(dd);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        for (auto& x : k2) {
            if (x % f.desc.par.p != 0) fail("NotInImage", "exponent not divisible by p");
            x /= f.desc.par.p;
        }
        r.terms.emplace(k2, c);
    }
    return r;
}

// Split f into the component with integral exponents and the fractional
// components indexed by the nonzero residue vector of numerators mod p^level.
struct IntegralDecomposition {
    LaurentElem integral;  // exponent numerators divisible by p^level
    std::map<std::vector<i64>, LaurentElem> fractional;
};

inline IntegralDecomposition decompose_integral(const LaurentElem& f) {
    if (f.desc.twist != 0) fail("BadParams", "decompose_integral needs twist 0");
    i64 q = ipow(f.desc.par.p, f.desc.level);
    IntegralDecomposition out;
    out.integral = l_zero(f.desc);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> res(k.size()), base(k.size());
        bool integral = true;
        for (size_t i = 0; i < k.size(); ++i) {
            i64 r = k[i] % q;
            if (r < 0) r += q;
            res[i] = r;
            base[i] = k[i] - r;
            integral &= (r == 0);
        }
        if (integral) {
            out.integral.terms.emplace(k, c);
        } else {
            auto it = out.fractional.find(res);
            if (it == out.fractional.end())
                it = out.fractional.emplace(res, l_zero(f.desc)).first;
            it->second.terms.emplace(base, c);
        }
    }
    return out;
}

// Units: x is a unit iff mod (p, v) exactly one monomial survives.
inline bool l_is_unit(const LaurentElem& f) {
    int count = 0;
    for (const auto& [k, c] : f.terms)
        if (c.c[0] % static_cast<u64>(f.desc.par.p) != 0) ++count;
    return count == 1;
}

// Inverse of a unit coefficient in Z/p^N[v]/v^M via Neumann series.
inline QElem q_inv(const QElem& c) {
    if (c.c[0] % static_cast<u64>(c.par.p) == 0) fail("NotAUnit", "coefficient not a unit");
    ZModCtx cx(static_cast<u64>(c.par.p), c.effN);
    u64 u = c.c[0] % cx.m;
    QElem z(c.par, c.effN, c.effM, false);
    z.c[0] = 0;
    QElem scaled = c;
    u64 uinv = cx.inv(u);
    for (auto& x : scaled.c) x = cx.mul(x % cx.m, uinv);
    // z = 1 - u^{-1} c has zero constant term, so z^effM = 0
    QElem one(c.par, c.effN, c.effM, false);
    one.c[0] = 1;
    z = q_sub(one, scaled);
    QElem acc = one;
    for (int t = 1; t < c.effM; ++t) acc = q_add(q_mul(acc, z), one);
    for (auto& x : acc.c) x = cx.mul(x % cx.m, uinv);
    acc.canonicalize();
    return acc;
}

inline LaurentElem l_inverse(const LaurentElem& f) {
    if (!l_is_unit(f)) fail("NotAUnit", "Laurent element is not a unit");
    const std::vector<i64>* m0 = nullptr;
    const QElem* c0 = nullptr;
    for (const auto& [k, c] : f.terms)
        if (c.c[0] % static_cast<u64>(f.desc.par.p) != 0) { m0 = &k; c0 = &c; }
    std::vector<i64> mneg = *m0;
    for (auto& x : mneg) x = -x;
    LaurentElem lead_inv = l_monomial(f.desc, mneg, q_inv(*c0));
    // f * lead_inv = 1 - n with n supported in (p, v); Neumann sum.
    LaurentElem n = l_sub(l_one(f.desc), l_mul(f, lead_inv));
    int bound = f.desc.par.N + f.desc.par.M - 1;
    LaurentElem acc = l_one(f.desc);
    for (int t = 1; t <= bound; ++t) acc = l_add(l_mul(acc, n), l_one(f.desc));
    return l_mul(lead_inv, acc);
}

// --- matrices over the Laurent algebra -------------------------------------

using LMat = Mat<LaurentElem>;

inline LMat lmat_zero(const AlgebraDesc& dd, int r, int c) {
    return LMat(r, c, l_zero(dd));
}

inline LMat lmat_identity(const AlgebraDesc& dd, int n) {
    LMat m = lmat_zero(dd, n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = l_one(dd);
    return m;
}

inline LMat lmat_add(const LMat& a, const LMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "lmat_add");
    LMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = l_add(r.a[i], b.a[i]);
    return r;
}

inline LMat lmat_sub(const LMat& a, const LMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "lmat_sub");
    LMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = l_sub(r.a[i], b.a[i]);
    return r;
}

inline LMat lmat_mul(const LMat& a, const LMat& b) {
    if (a.cols != b.rows) fail("ShapeMismatch", "lmat_mul");
    LMat r = lmat_zero(a.a.empty() ? b.a.front().desc : a.a.front().desc, a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            if (a.at(i, k).is_zero()) continue;
            for (int j = 0; j < b.cols; ++j) {
                if (b.at(k, j).is_zero()) continue;
                r.at(i, j) = l_add(r.at(i, j), l_mul(a.at(i, k), b.at(k, j)));
            }
        }
    return r;
}

inline LMat lmat_scale(const LMat& a, const LaurentElem& s) {
    LMat r = a;
    for (auto& x : r.a) x = l_mul(x, s);
    return r;
}

template <typename Fn>
LMat lmat_map(const LMat& a, Fn&& fn) {
    LMat r = a;
    for (auto& x : r.a) x = fn(x);
    return r;
}

inline LMat lmat_gamma(int i, const LMat& a) {
    return lmat_map(a, [&](const LaurentElem& x) { return gamma_act(i, x); });
}

inline LMat lmat_dq(int i, const LMat& a) {
    return lmat_map(a, [&](const LaurentElem& x) { return dq_log(i, x); });
}

inline LMat lmat_frob(const LMat& a) {
    return lmat_map(a, [](const LaurentElem& x) { return frob_endo(x); });
}

inline bool lmat_eq(const LMat& a, const LMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (size_t i = 0; i < a.a.size(); ++i)
        if (!l_eq(a.a[i], b.a[i])) return false;
    return true;
}

inline LaurentElem lmat_det(const LMat& a) {
    if (a.rows != a.cols) fail("ShapeMismatch", "lmat_det");
    int n = a.rows;
    if (n == 0) fail("ShapeMismatch", "empty determinant");
    if (n == 1) return a.at(0, 0);
    const AlgebraDesc& dd = a.at(0, 0).desc;
    LaurentElem det = l_zero(dd);
    for (int j = 0; j < n; ++j) {
        LMat minor = lmat_zero(dd, n - 1, n - 1);
        for (int r = 1; r < n; ++r) {
            int cc = 0;
            for (int c = 0; c < n; ++c) {
                if (c == j) continue;
                minor.at(r - 1, cc++) = a.at(r, c);
            }
        }
        LaurentElem term = l_mul(a.at(0, j), lmat_det(minor));
        det = (j % 2 == 0) ? l_add(det, term) : l_sub(det, term);
    }
    return det;
}

// Adjugate inverse; requires the determinant to be a ring unit.
inline std::optional<LMat> lmat_inverse(const LMat& a) {
    if (a.rows != a.cols) return std::nullopt;
    int n = a.rows;
    const AlgebraDesc& dd = a.at(0, 0).desc;
    LaurentElem det = lmat_det(a);
    if (!l_is_unit(det)) return std::nullopt;
    LaurentElem dinv = l_inverse(det);
    LMat adj = lmat_zero(dd, n, n);
    if (n == 1) {
        adj.at(0, 0) = l_one(dd);
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                LMat minor = lmat_zero(dd, n - 1, n - 1);
                int rr = 0;
                for (int r = 0; r < n; ++r) {
                    if (r == i) continue;
                    int cc = 0;
                    for (int c = 0; c < n; ++c) {
                        if (c == j) continue;
                        minor.at(rr, cc++) = a.at(r, c);
                    }
                    ++rr;
                }
                LaurentElem m = lmat_det(minor);
                adj.at(j, i) = ((i + j) % 2 == 0) ? m : l_neg(m);
            }
    }
    return lmat_scale(adj, dinv);
}

}  // namespace qprism
