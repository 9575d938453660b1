#pragma once
// Truncated base rings for q-calculus at a fixed prime:
//   QElem:  Z/p^N [v] / (v^M) with v = q^{1/p^s} - 1 and effective-precision
//           tracking (effN, effM) plus an exact-lift flag gating delta.
//   PDElem: divided-power ring over Z/p^N on mu^[0..K), mu^[i] mu^[j] =
//           binom(i+j, i) mu^[i+j], truncated at PD-degree K.
// All arithmetic is exact at the stated precision; operations that lose
// precision say so in their contracts and stamp the result accordingly.

#include "qprism/common.hpp"
#include "qprism/zmod.hpp"

namespace qprism {

struct RingParams {
    i64 p = 3;
    int N = 1;  // p-adic truncation: coefficients mod p^N
    int s = 0;  // base level: v = q^{1/p^s} - 1
    int M = 1;  // v-adic truncation: v^M = 0

    bool operator==(const RingParams& o) const {
        return p == o.p && N == o.N && s == o.s && M == o.M;
    }
    void validate() const {
        if (!is_prime(p)) fail("BadParams", "p must be prime");
        if (N < 1 || M < 1 || s < 0) fail("BadParams", "need N>=1, M>=1, s>=0");
    }
};

struct QElem {
    RingParams par;
    int effN = 0;  // coefficients carry information mod p^effN
    int effM = 0;  // ... at v-indices < effM
    bool exact = false;  // true when the canonical Z[v]-lift is the true value
    std::vector<u64> c;  // size par.M, little-endian in v

    QElem() = default;
    QElem(const RingParams& pr, int eN, int eM, bool ex)
        : par(pr), effN(eN), effM(eM), exact(ex), c(pr.M, 0) {}

    u64 modulus() const { return upow(static_cast<u64>(par.p), effN); }

    void canonicalize() {
        u64 m = modulus();
        for (int i = 0; i < par.M; ++i) c[i] = (i < effM && effN > 0) ? c[i] % m : 0;
    }
    bool is_zero() const {
        for (u64 x : c)
            if (x != 0) return false;
        return true;
    }
    // Zero as a coset, not merely as stored data: a stored zero at partial
    // precision still carries a stamp and must not be discarded.
    bool is_exact_zero() const { return effN == par.N && effM == par.M && is_zero(); }
    bool operator==(const QElem& o) const {
        return par == o.par && effN == o.effN && effM == o.effM && c == o.c;
    }
};

inline QElem q_zero(const RingParams& pr) {
    return QElem(pr, pr.N, pr.M, true);
}

inline QElem q_from_int(const RingParams& pr, i64 n) {
    QElem r(pr, pr.N, pr.M, true);
    i64 m = static_cast<i64>(r.modulus());
    i64 v = n % m;
    if (v < 0) v += m;
    r.c[0] = static_cast<u64>(v);
    return r;
}

inline QElem q_one(const RingParams& pr) { return q_from_int(pr, 1); }

// Align two operands to shared effective precision.
inline void q_align(const QElem& a, const QElem& b, int& eN, int& eM) {
    if (!(a.par == b.par)) fail("ParamsMismatch", "QElem params differ");
    eN = std::min(a.effN, b.effN);
    eM = std::min(a.effM, b.effM);
}

inline QElem q_add(const QElem& a, const QElem& b) {
    int eN, eM;
    q_align(a, b, eN, eM);
    QElem r(a.par, eN, eM, a.exact && b.exact);
    for (int i = 0; i < a.par.M; ++i) r.c[i] = a.c[i] + b.c[i];
    r.canonicalize();
    return r;
}

inline QElem q_neg(const QElem& a) {
    QElem r = a;
    u64 m = r.modulus();
    for (auto& x : r.c) x = x % m == 0 ? 0 : m - x % m;
    r.canonicalize();
    return r;
}

inline QElem q_sub(const QElem& a, const QElem& b) { return q_add(a, q_neg(b)); }

// Stored p-content and v-order, capped at the element's own precision; the
// caps make them sound lower bounds for every member of the coset.
inline int q_content_p(const QElem& a) {
    u64 m = a.modulus();
    int best = a.effN;
    for (int i = 0; i < a.effM; ++i)
        if (a.c[i] % m != 0) best = std::min(best, valuation(a.c[i] % m, static_cast<u64>(a.par.p), a.effN));
    return best;
}
inline int q_order_v(const QElem& a) {
    u64 m = a.modulus();
    for (int i = 0; i < a.effM; ++i)
        if (a.c[i] % m != 0) return i;
    return a.effM;
}

inline QElem q_mul(const QElem& a, const QElem& b) {
    if (!(a.par == b.par)) fail("ParamsMismatch", "QElem params differ");
    // Sharp box: a factor's v-order (p-content) shifts where the other's
    // unknown tail can land. Crediting p-precision past a factor's own effN
    // is only sound on v-indices that factor fully covers, hence the clamp.
    int eN = std::min({a.effN + q_content_p(b), b.effN + q_content_p(a), a.par.N});
    int eM = std::min({a.effM + q_order_v(b), b.effM + q_order_v(a), a.par.M});
    if (eN > a.effN) eM = std::min(eM, b.effM);
    if (eN > b.effN) eM = std::min(eM, a.effM);
    QElem r(a.par, eN, eM, a.exact && b.exact);
    u64 m = r.modulus();
    if (m == 1) { r.canonicalize(); return r; }
    for (int i = 0; i < a.effM; ++i) {
        if (a.c[i] == 0) continue;
        for (int j = 0; j < b.effM && i + j < eM; ++j) {
            if (b.c[j] == 0) continue;
            u64 prod = static_cast<u64>((static_cast<u128>(a.c[i] % m) * (b.c[j] % m)) % m);
            r.c[i + j] = (r.c[i + j] + prod) % m;
        }
    }
    r.canonicalize();
    return r;
}

inline QElem q_scale(const QElem& a, i64 k) {
    QElem r = a;
    u64 m = r.modulus();
    i64 kk = k % static_cast<i64>(m);
    if (kk < 0) kk += static_cast<i64>(m);
    for (auto& x : r.c) x = static_cast<u64>((static_cast<u128>(x) * static_cast<u64>(kk)) % m);
    r.canonicalize();
    return r;
}

inline bool q_eq(const QElem& a, const QElem& b) {
    int eN, eM;
    q_align(a, b, eN, eM);
    u64 m = upow(static_cast<u64>(a.par.p), eN);
    for (int i = 0; i < eM; ++i)
        if (a.c[i] % m != b.c[i] % m) return false;
    return true;
}

// (1 + v)^n for any integer n, exact. Negative n goes through the unit
// inverse of 1 + v (finite geometric series: (1+v)^{-1} = sum (-v)^i).
inline QElem one_plus_v_pow(const RingParams& pr, i64 n) {
    QElem base(pr, pr.N, pr.M, true);
    bool invert = n < 0;
    u64 m = base.modulus();
    if (invert) {
        n = -n;
        for (int i = 0; i < pr.M; ++i) {
            u64 t = (i % 2 == 0) ? 1 : m - 1;
            base.c[i] = t % m;
        }
    } else {
        base.c[0] = 1 % m;
        if (pr.M > 1) base.c[1] = 1 % m;
    }
    QElem r = q_one(pr);
    while (n > 0) {
        if (n & 1) r = q_mul(r, base);
        base = q_mul(base, base);
        n >>= 1;
    }
    return r;
}

// q^{a / p^j} = (1 + v)^{a p^{s-j}}; requires j <= s.
inline QElem q_pow_frac(const RingParams& pr, i64 a, int j) {
    if (j < 0 || j > pr.s) fail("DenominatorTooDeep", "q-power denominator exceeds level");
    return one_plus_v_pow(pr, a * ipow(pr.p, pr.s - j));
}

inline QElem q_q(const RingParams& pr) { return q_pow_frac(pr, 1, 0); }

// mu = q - 1
inline QElem q_mu(const RingParams& pr) {
    return q_sub(q_q(pr), q_one(pr));
}

// mu_j = q^{1/p^j} - 1, so mu_0 = mu and mu_s = v.
inline QElem q_mu_level(const RingParams& pr, int j) {
    return q_sub(q_pow_frac(pr, 1, j), q_one(pr));
}

// q-analog [a/p^j]_q := sum_{t=0}^{a-1} q^{t/p^j} at the representation
// level (never reduced); negative a via -q^{a/p^j} [(-a)/p^j]_q.
inline QElem q_analog(const RingParams& pr, i64 a, int j = 0) {
    if (j < 0 || j > pr.s) fail("DenominatorTooDeep", "q-analog denominator exceeds level");
    if (a < 0) return q_neg(q_mul(q_pow_frac(pr, a, j), q_analog(pr, -a, j)));
    QElem r = q_zero(pr);
    i64 step = ipow(pr.p, pr.s - j);
    QElem g = one_plus_v_pow(pr, step);
    QElem cur = q_one(pr);
    for (i64 t = 0; t < a; ++t) {
        r = q_add(r, cur);
        cur = q_mul(cur, g);
    }
    return r;
}

// xi_r = sum_{a < p^r} q^{a/p^r} = [p^r / p^r]_q-style sum; xi_r mu_r = mu.
inline QElem q_xi(const RingParams& pr, int r) {
    return q_analog(pr, ipow(pr.p, r), r);
}

// [p]_q (the q-analog of p at integral level); tilde-xi in the descent data.
inline QElem q_tilde_xi(const RingParams& pr) { return q_analog(pr, pr.p, 0); }

// Frobenius lift: v |-> (1+v)^p - 1, coefficientwise identity on Z/p^N.
// Preserves (effN, effM) and exactness.
inline QElem q_frobenius(const QElem& x) {
    const RingParams& pr = x.par;
    QElem w = q_sub(one_plus_v_pow(pr, pr.p), q_one(pr));  // v-order 1
    // Horner on the canonical lift at full precision; phi is a ring map, so
    // restamping to x's effective precision afterwards is sound.
    QElem r = q_zero(pr);
    for (int i = pr.M - 1; i >= 0; --i) {
        r = q_mul(r, w);
        if (x.c[i] != 0) r = q_add(r, q_from_int(pr, static_cast<i64>(x.c[i])));
    }
    r.effN = x.effN;
    r.effM = x.effM;
    r.exact = x.exact;
    r.canonicalize();
    return r;
}

namespace detail {
// Lifted polynomial arithmetic in Z[v]/(v^L) for delta.
using ZPoly = std::vector<cpp_int>;
inline ZPoly zp_mul(const ZPoly& a, const ZPoly& b, int L) {
    ZPoly r(L, 0);
    for (int i = 0; i < L; ++i) {
        if (a[i] == 0) continue;
        for (int j = 0; i + j < L; ++j) r[i + j] += a[i] * b[j];
    }
    return r;
}
inline ZPoly zp_pow(ZPoly base, i64 n, int L) {
    ZPoly r(L, 0);
    r[0] = 1;
    while (n > 0) {
        if (n & 1) r = zp_mul(r, base, L);
        base = zp_mul(base, base, L);
        n >>= 1;
    }
    return r;
}
}  // namespace detail

// delta(x) = (phi(x) - x^p) / p computed on the canonical Z[v]-lift.
// Exact inputs keep effN; truncated inputs lose one p-digit.
inline QElem q_delta(const QElem& x) {
    const RingParams& pr = x.par;
    int outN = x.exact ? x.effN : x.effN - 1;
    if (outN < 1) fail("PrecisionExhausted", "delta needs effN >= 2 on truncated input");
    int L = x.effM;
    if (L < 1) fail("PrecisionExhausted", "delta needs effM >= 1");
    detail::ZPoly lift(L, 0);
    for (int i = 0; i < L; ++i) lift[i] = x.c[i];
    // w = (1+v)^p - 1 over Z, truncated at v^L
    detail::ZPoly w(L, 0);
    for (int i = 1; i < L && i <= pr.p; ++i) w[i] = binom(pr.p, i);
    // phi(lift) by Horner in w
    detail::ZPoly ph(L, 0);
    for (int i = L - 1; i >= 0; --i) {
        ph = detail::zp_mul(ph, w, L);
        ph[0] += lift[i];
    }
    detail::ZPoly xp = detail::zp_pow(lift, pr.p, L);
    QElem r(pr, outN, x.effM, x.exact);
    cpp_int mod = cpow(pr.p, outN);
    for (int i = 0; i < L; ++i) {
        cpp_int d = ph[i] - xp[i];
        if (d % pr.p != 0) fail("Internal", "delta numerator not divisible by p");
        cpp_int q = (d / pr.p) % mod;
        if (q < 0) q += mod;
        r.c[i] = q.convert_to<u64>();
    }
    r.canonicalize();
    return r;
}

// Exact division in the truncated ring. The divisor must expose content
// p^a v^b at its least-v term; the result loses (a, b) precision and drops
// the exact flag. When a > 0 the quotient is determined only modulo the
// Toeplitz kernel, whose p-valuations form a staircase in the v-degree; the
// returned v-window is clamped to the prefix on which every kernel generator
// vanishes mod p^{effN - a}, so the advertised box is exactly the determined
// region. Throws NotDivisible / UnrecognizedDivisor / PrecisionExhausted.
inline QElem divide_exact(const QElem& x, const QElem& g) {
    int eN, eM;
    q_align(x, g, eN, eM);
    const RingParams& pr = x.par;
    u64 m = upow(static_cast<u64>(pr.p), eN);
    int b = -1;
    for (int i = 0; i < eM; ++i)
        if (g.c[i] % m != 0) { b = i; break; }
    if (b < 0) fail("UnrecognizedDivisor", "divisor is zero at working precision");
    int a = valuation(g.c[b] % m, static_cast<u64>(pr.p), eN);
    int resN = eN - a, resM = eM - b;
    if (resN < 1 || resM < 1) fail("PrecisionExhausted", "division consumes all precision");
    for (int i = 0; i < b; ++i)
        if (x.c[i] % m != 0)
            fail("NotDivisible", "dividend has smaller v-order than divisor");
    // Solve the lower-triangular Toeplitz system g' * y = x' over Z/p^eN in
    // full (greedy forward substitution can strand a solvable system when a
    // later divisor coefficient is a unit, e.g. g = 2 + v at p = 2).
    ZModCtx cx(static_cast<u64>(pr.p), eN);
    Mat<u64> T(resM, resM, 0);
    for (int i = 0; i < resM; ++i)
        for (int t = 0; t <= i; ++t) {
            if (b + t >= eM) break;
            T.at(i, i - t) = g.c[b + t] % m;
        }
    std::vector<u64> rhs(resM, 0);
    for (int i = 0; i < resM; ++i) rhs[i] = x.c[b + i] % m;
    auto sol = zmod_solve(cx, T, rhs);
    if (!sol) fail("NotDivisible", "no quotient exists at working precision");
    u64 resMod = upow(static_cast<u64>(pr.p), resN);
    if (a > 0) {
        auto ker = zmod_kernel(cx, T);
        int firm = resM;
        for (const auto& gen : ker)
            for (int j = 0; j < firm; ++j)
                if (gen[j] % resMod != 0) { firm = j; break; }
        resM = firm;  // constant term is always firm: T(0,0) = p^a unit
    }
    if (resM < 1) fail("PrecisionExhausted", "division consumes all precision");
    QElem out(pr, resN, resM, false);
    for (int i = 0; i < resM && i < pr.M; ++i) out.c[i] = (*sol)[i] % resMod;
    out.canonicalize();
    return out;
}

// ---------------------------------------------------------------------------
// Divided-power ring

struct PDParams {
    i64 p = 3;
    int N = 1;
    int K = 1;  // PD truncation: mu^[i] = 0 for i >= K

    bool operator==(const PDParams& o) const { return p == o.p && N == o.N && K == o.K; }
    void validate() const {
        if (!is_prime(p)) fail("BadParams", "p must be prime");
        if (N < 1 || K < 1) fail("BadParams", "need N>=1, K>=1");
    }
};

struct PDElem {
    PDParams par;
    std::vector<u64> c;  // c[i] = coefficient of mu^[i], mod p^N

    PDElem() = default;
    explicit PDElem(const PDParams& pr) : par(pr), c(pr.K, 0) {}

    u64 modulus() const { return upow(static_cast<u64>(par.p), par.N); }
    void canonicalize() {
        u64 m = modulus();
        for (auto& x : c) x %= m;
    }
    bool is_zero() const {
        for (u64 x : c)
            if (x != 0) return false;
        return true;
    }
    bool operator==(const PDElem& o) const { return par == o.par && c == o.c; }
};

inline PDElem pd_zero(const PDParams& pr) { return PDElem(pr); }

inline PDElem pd_from_int(const PDParams& pr, i64 n) {
    PDElem r(pr);
    i64 m = static_cast<i64>(r.modulus());
    i64 v = n % m;
    if (v < 0) v += m;
    r.c[0] = static_cast<u64>(v);
    return r;
}

inline PDElem pd_one(const PDParams& pr) { return pd_from_int(pr, 1); }

inline PDElem pd_mu(const PDParams& pr) {
    PDElem r(pr);
    if (pr.K > 1) r.c[1] = 1 % r.modulus();
    return r;
}

inline PDElem pd_add(const PDElem& a, const PDElem& b) {
    if (!(a.par == b.par)) fail("ParamsMismatch", "PDElem params differ");
    PDElem r = a;
    u64 m = r.modulus();
    for (int i = 0; i < a.par.K; ++i) r.c[i] = (r.c[i] + b.c[i]) % m;
    return r;
}

inline PDElem pd_neg(const PDElem& a) {
    PDElem r = a;
    u64 m = r.modulus();
    for (auto& x : r.c) x = x % m == 0 ? 0 : m - x % m;
    return r;
}

inline PDElem pd_sub(const PDElem& a, const PDElem& b) { return pd_add(a, pd_neg(b)); }

inline PDElem pd_mul(const PDElem& a, const PDElem& b) {
    if (!(a.par == b.par)) fail("ParamsMismatch", "PDElem params differ");
    PDElem r(a.par);
    u64 m = r.modulus();
    cpp_int mm = m;
    for (int i = 0; i < a.par.K; ++i) {
        if (a.c[i] == 0) continue;
        for (int j = 0; i + j < a.par.K; ++j) {
            if (b.c[j] == 0) continue;
            cpp_int term = binom(i + j, i) % mm;
            term = (term * a.c[i]) % mm;
            term = (term * b.c[j]) % mm;
            r.c[i + j] = (r.c[i + j] + term.convert_to<u64>()) % m;
        }
    }
    return r;
}

inline PDElem pd_scale(const PDElem& a, const cpp_int& k) {
    PDElem r = a;
    cpp_int m = r.modulus();
    cpp_int kk = k % m;
    if (kk < 0) kk += m;
    u64 ku = kk.convert_to<u64>();
    u64 mu64 = r.modulus();
    for (auto& x : r.c) x = static_cast<u64>((static_cast<u128>(x) * ku) % mu64);
    return r;
}

// t = log(q) = log(1 + mu) = sum_{1<=m<K} (-1)^{m-1} (m-1)! mu^[m].
inline PDElem pd_log_q(const PDParams& pr) {
    PDElem r(pr);
    cpp_int m = r.modulus();
    for (int i = 1; i < pr.K; ++i) {
        cpp_int coef = factorial(i - 1) % m;
        if (i % 2 == 0) coef = (m - coef) % m;
        r.c[i] = coef.convert_to<u64>();
    }
    return r;
}

// Divided power gamma_n(x) for x in the PD ideal (no mu^[0] term).
// Uses gamma_n(c mu^[m]) = c^n (nm)!/(n! (m!)^n) mu^[nm] and the
// composition rule gamma_n(x + y) = sum_{i+j=n} gamma_i(x) gamma_j(y).
inline PDElem pd_gamma(const PDElem& x, int n) {
    const PDParams& pr = x.par;
    if (x.c[0] != 0) fail("NotInPDIdeal", "divided power of element with constant term");
    cpp_int m = cpow(pr.p, pr.N);
    // gammas[j] = gamma_j of the part of x processed so far
    std::vector<PDElem> gammas(static_cast<size_t>(n) + 1, pd_zero(pr));
    gammas[0] = pd_one(pr);
    for (int idx = 1; idx < pr.K; ++idx) {
        if (x.c[idx] == 0) continue;
        // divided powers of the single term c mu^[idx]
        std::vector<PDElem> term(static_cast<size_t>(n) + 1, pd_zero(pr));
        term[0] = pd_one(pr);
        for (int j = 1; j <= n; ++j) {
            i64 deg = static_cast<i64>(j) * idx;
            if (deg >= pr.K) break;
            cpp_int coef = factorial(static_cast<int>(deg)) /
                           (factorial(j) * cpow(factorial(idx), j));
            coef %= m;
            cpp_int cj = cpp_int(x.c[idx]);
            cpp_int cpw = 1;
            for (int t = 0; t < j; ++t) cpw = (cpw * cj) % m;
            coef = (coef * cpw) % m;
            term[j].c[static_cast<int>(deg)] = coef.convert_to<u64>();
        }
        std::vector<PDElem> next(static_cast<size_t>(n) + 1, pd_zero(pr));
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                if (gammas[a].is_zero() || term[b].is_zero()) continue;
                next[a + b] = pd_add(next[a + b], pd_mul(gammas[a], term[b]));
            }
        gammas = std::move(next);
    }
    return gammas[n];
}

// exp of a PD-ideal element: sum_{n >= 0} gamma_n(x); finite because
// gamma_n(x) sits in PD-degree >= n.
inline PDElem pd_exp(const PDElem& x) {
    if (x.c[0] != 0) fail("NotInPDIdeal", "pd_exp needs a PD-ideal element");
    PDElem r = pd_one(x.par);
    for (int n = 1; n < x.par.K; ++n) {
        PDElem g = pd_gamma(x, n);
        if (!g.is_zero()) r = pd_add(r, g);
    }
    return r;
}

// Solve mu * x = y. (mu x)_m = m x_{m-1}, so x_{j} = y_{j+1}/(j+1) with
// ambiguity p^{nu_p(j+1)} per slot and x_{K-1} entirely free.
struct PdSolveResult {
    PDElem x;
    std::vector<u64> modulus;  // x.c[j] is determined mod modulus[j]
};

inline PdSolveResult pd_solve_mu(const PDElem& y) {
    const PDParams& pr = y.par;
    u64 m = upow(static_cast<u64>(pr.p), pr.N);
    if (y.c[0] % m != 0) fail("NoSolution", "mu * x has no constant term");
    PdSolveResult res{pd_zero(pr), std::vector<u64>(pr.K, 1)};
    ZModCtx cx(static_cast<u64>(pr.p), pr.N);
    for (int mm = 1; mm < pr.K; ++mm) {
        int v = valuation(static_cast<u64>(mm), static_cast<u64>(pr.p), pr.N);
        u64 pv = upow(static_cast<u64>(pr.p), v);
        u64 rhs = y.c[mm] % m;
        if (rhs % pv != 0) fail("NoSolution", "coefficient not divisible by PD index");
        u64 unit = static_cast<u64>(mm) / pv;
        res.x.c[mm - 1] = cx.mul(cx.inv(unit % m), rhs / pv);
        res.modulus[mm - 1] = upow(static_cast<u64>(pr.p), pr.N - v);
        res.x.c[mm - 1] %= res.modulus[mm - 1];
    }
    res.modulus[pr.K - 1] = 1;  // free slot
    return res;
}

// Identity check: sum_{m<K} T^[m] prod_{j<m}(X - j)  ==
//                 sum_{m<K} (log(1+T))^[m] X^m
// over Z/p^N, PD-truncated at K in T and degree-truncated at K in X.
// Both sides' T^[a] X^b coefficients are the signed Stirling numbers s(a,b).
inline bool verify_log_identity(i64 p, int N, int K,
                                Mat<u64>* lhs_out = nullptr,
                                Mat<u64>* rhs_out = nullptr) {
    PDParams pr{p, N, K};
    pr.validate();
    u64 m = upow(static_cast<u64>(p), N);
    // LHS: iterate falling-factorial polynomials in X (coefficients mod p^N)
    Mat<u64> lhs(K, K, 0);
    std::vector<u64> poly(static_cast<size_t>(K), 0);
    poly[0] = 1 % m;
    lhs.at(0, 0) = poly[0];
    for (int a = 1; a < K; ++a) {
        // poly <- poly * (X - (a-1))
        std::vector<u64> nxt(static_cast<size_t>(K), 0);
        u64 c = static_cast<u64>((a - 1) % static_cast<i64>(m));
        for (int b = 0; b < K; ++b) {
            if (poly[b] == 0) continue;
            if (b + 1 < K) nxt[b + 1] = (nxt[b + 1] + poly[b]) % m;
            u64 t = static_cast<u64>((static_cast<u128>(poly[b]) * c) % m);
            nxt[b] = (nxt[b] + m - t) % m;
        }
        poly = std::move(nxt);
        for (int b = 0; b < K; ++b) lhs.at(a, b) = poly[b];
    }
    // RHS: divided powers of the log series
    PDElem L = pd_log_q(pr);
    Mat<u64> rhs(K, K, 0);
    rhs.at(0, 0) = 1 % m;
    for (int b = 1; b < K; ++b) {
        PDElem Lb = pd_gamma(L, b);
        for (int a = 0; a < K; ++a) rhs.at(a, b) = Lb.c[a];
    }
    if (lhs_out) *lhs_out = lhs;
    if (rhs_out) *rhs_out = rhs;
    return lhs.a == rhs.a;
}

}  // namespace qprism
