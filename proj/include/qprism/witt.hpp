#pragma once
// Truncated Witt vectors. Arithmetic goes through universal polynomials
// obtained by ghost recursion over Z (integral by construction, memoized
// per prime and index). Ghost coordinates are exposed for torsion-free
// bases only. For W_r over a finite field the module carries Teichmueller
// digit coordinates over Z/p^r, which back the Artin-Schreier-Witt
// fixed-point solver.

#include "qprism/common.hpp"
#include "qprism/zmod.hpp"

namespace qprism {

// ---- finite fields F_{p^k} -------------------------------------------------

using GFElem = std::vector<u64>;  // k coefficients mod p, degree < k

struct GFCtx {
    i64 p = 2;
    int k = 1;
    std::vector<u64> mod;  // monic irreducible of degree k, size k+1

    bool operator==(const GFCtx& o) const {
        return p == o.p && k == o.k && mod == o.mod;
    }

    u64 up() const { return static_cast<u64>(p); }
    u64 field_size() const { return upow(up(), k); }

    GFElem zero() const { return GFElem(static_cast<size_t>(k), 0); }
    GFElem from_int(i64 n) const {
        i64 r = n % p;
        if (r < 0) r += p;
        GFElem e = zero();
        e[0] = static_cast<u64>(r);
        return e;
    }
    GFElem one() const { return from_int(1); }
    GFElem from_z(const cpp_int& z) const {
        cpp_int r = z % p;
        if (r < 0) r += p;
        GFElem e = zero();
        e[0] = r.convert_to<u64>();
        return e;
    }
    // residue class of the polynomial variable
    GFElem gen() const {
        if (k == 1) return from_int(static_cast<i64>(p - static_cast<i64>(mod[0])));
        GFElem e = zero();
        e[1] = 1;
        return e;
    }
    bool is_zero(const GFElem& a) const {
        for (u64 x : a)
            if (x != 0) return false;
        return true;
    }
    GFElem add(const GFElem& a, const GFElem& b) const {
        GFElem r = zero();
        for (int i = 0; i < k; ++i) r[i] = (a[i] + b[i]) % up();
        return r;
    }
    GFElem neg(const GFElem& a) const {
        GFElem r = zero();
        for (int i = 0; i < k; ++i) r[i] = (up() - a[i]) % up();
        return r;
    }
    GFElem sub(const GFElem& a, const GFElem& b) const { return add(a, neg(b)); }
    GFElem mul(const GFElem& a, const GFElem& b) const {
        std::vector<u64> c(2 * k - 1, 0);
        for (int i = 0; i < k; ++i) {
            if (a[i] == 0) continue;
            for (int j = 0; j < k; ++j) c[i + j] = (c[i + j] + a[i] * b[j]) % up();
        }
        // modulus is monic: x^k = -sum mod[j] x^j
        for (int i = 2 * k - 2; i >= k; --i) {
            u64 t = c[i];
            if (t == 0) continue;
            c[i] = 0;
            for (int j = 0; j < k; ++j)
                c[i - k + j] = (c[i - k + j] + t * ((up() - mod[j]) % up())) % up();
        }
        GFElem r = zero();
        for (int i = 0; i < k; ++i) r[i] = c[i];
        return r;
    }
    GFElem pow(GFElem a, u64 e) const {
        GFElem r = one();
        while (e > 0) {
            if (e & 1) r = mul(r, a);
            a = mul(a, a);
            e >>= 1;
        }
        return r;
    }
    GFElem inv(const GFElem& a) const {
        if (is_zero(a)) fail("NotAUnit", "zero has no inverse");
        return pow(a, field_size() - 2);
    }
    GFElem frob(const GFElem& a) const { return pow(a, up()); }
    GFElem frob_inv(const GFElem& a) const { return pow(a, upow(up(), k - 1)); }
    GFElem from_index(u64 idx) const {
        GFElem e = zero();
        for (int i = 0; i < k; ++i) {
            e[i] = idx % up();
            idx /= up();
        }
        return e;
    }
    u64 to_index(const GFElem& a) const {
        u64 idx = 0;
        for (int i = k - 1; i >= 0; --i) idx = idx * up() + a[i];
        return idx;
    }
};

// Shipped irreducible moduli, fixed per (p, k) for reproducible data.
inline GFCtx gf_field(i64 p, int k) {
    static const std::map<std::pair<i64, int>, std::vector<u64>> table = {
        {{2, 1}, {1, 1}},
        {{2, 2}, {1, 1, 1}},
        {{2, 3}, {1, 1, 0, 1}},
        {{2, 4}, {1, 1, 0, 0, 1}},
        {{2, 5}, {1, 0, 1, 0, 0, 1}},
        {{2, 6}, {1, 1, 0, 1, 1, 0, 1}},
        {{3, 1}, {1, 1}},
        {{3, 2}, {2, 2, 1}},
        {{3, 3}, {1, 2, 0, 1}},
        {{5, 1}, {3, 1}},
        {{5, 2}, {2, 4, 1}},
    };
    auto it = table.find({p, k});
    if (it == table.end()) fail("BadParams", "no shipped irreducible for this (p, k)");
    GFCtx cx;
    cx.p = p;
    cx.k = k;
    cx.mod = it->second;
    return cx;
}

// ---- universal Witt polynomials --------------------------------------------
// Variables are numbered r-independently: x_i = 2i, y_i = 2i+1. A term is a
// sorted list of (variable, exponent > 0) pairs.

using UTerm = std::vector<std::pair<int, int>>;
using UPoly = std::map<UTerm, cpp_int>;

inline void upoly_insert(UPoly& f, const UTerm& t, const cpp_int& c) {
    if (c == 0) return;
    auto it = f.find(t);
    if (it == f.end()) {
        f.emplace(t, c);
    } else {
        it->second += c;
        if (it->second == 0) f.erase(it);
    }
}

inline UPoly upoly_varpow(int v, int e) {
    UPoly f;
    upoly_insert(f, UTerm{{v, e}}, 1);
    return f;
}

inline UPoly upoly_add(const UPoly& a, const UPoly& b) {
    UPoly r = a;
    for (const auto& [t, c] : b) upoly_insert(r, t, c);
    return r;
}

inline UPoly upoly_scale(const UPoly& a, const cpp_int& s) {
    UPoly r;
    for (const auto& [t, c] : a) upoly_insert(r, t, c * s);
    return r;
}

inline UPoly upoly_sub(const UPoly& a, const UPoly& b) {
    return upoly_add(a, upoly_scale(b, -1));
}

inline UTerm uterm_mul(const UTerm& a, const UTerm& b) {
    UTerm r;
    size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            r.push_back(a[i++]);
        } else if (i == a.size() || b[j].first < a[i].first) {
            r.push_back(b[j++]);
        } else {
            r.emplace_back(a[i].first, a[i].second + b[j].second);
            ++i;
            ++j;
        }
    }
    return r;
}

inline UPoly upoly_mul(const UPoly& a, const UPoly& b) {
    UPoly r;
    for (const auto& [ta, ca] : a)
        for (const auto& [tb, cb] : b) upoly_insert(r, uterm_mul(ta, tb), ca * cb);
    return r;
}

inline UPoly upoly_pow(const UPoly& a, u64 e) {
    UPoly r;
    upoly_insert(r, {}, 1);
    UPoly base = a;
    while (e > 0) {
        if (e & 1) r = upoly_mul(r, base);
        e >>= 1;
        if (e > 0) base = upoly_mul(base, base);
    }
    return r;
}

inline UPoly upoly_div_exact(const UPoly& a, const cpp_int& d) {
    UPoly r;
    for (const auto& [t, c] : a) {
        if (c % d != 0) fail("InternalError", "ghost recovery lost integrality");
        upoly_insert(r, t, c / d);
    }
    return r;
}

// w_n in the x-variables (parity 0) or y-variables (parity 1)
inline UPoly witt_ghost_upoly(i64 p, int n, int parity) {
    UPoly g;
    cpp_int pi = 1;
    for (int i = 0; i <= n; ++i) {
        upoly_insert(g, UTerm{{2 * i + parity, static_cast<int>(upow(static_cast<u64>(p), n - i))}}, pi);
        pi *= p;
    }
    return g;
}

// op: 'S' sum, 'P' product, 'N' negation, 'F' Frobenius (ghost index shift).
// Components recovered from w_m(result) = g_m, integral by classical theory.
inline UPoly witt_universal(i64 p, char op, int n) {
    static std::map<std::pair<i64, char>, std::vector<UPoly>> cache;
    auto& vec = cache[{p, op}];
    while (static_cast<int>(vec.size()) <= n) {
        int m = static_cast<int>(vec.size());
        UPoly g;
        switch (op) {
            case 'S': g = upoly_add(witt_ghost_upoly(p, m, 0), witt_ghost_upoly(p, m, 1)); break;
            case 'P': g = upoly_mul(witt_ghost_upoly(p, m, 0), witt_ghost_upoly(p, m, 1)); break;
            case 'N': g = upoly_scale(witt_ghost_upoly(p, m, 0), -1); break;
            case 'F': g = witt_ghost_upoly(p, m + 1, 0); break;
            default: fail("InternalError", "unknown universal op");
        }
        cpp_int pi = 1;
        for (int i = 0; i < m; ++i) {
            g = upoly_sub(g, upoly_scale(upoly_pow(vec[i], upow(static_cast<u64>(p), m - i)), pi));
            pi *= p;
        }
        vec.push_back(upoly_div_exact(g, pi));
    }
    return vec[n];
}

// ---- coefficient bases ------------------------------------------------------

struct WittOpsZ {
    static constexpr bool torsion_free = true;
    i64 p = 2;
    using E = cpp_int;
    i64 prime() const { return p; }
    E from_z(const cpp_int& z) const { return z; }
    E add(const E& a, const E& b) const { return a + b; }
    E mul(const E& a, const E& b) const { return a * b; }
    E pow(const E& a, int e) const {
        E r = 1;
        for (int i = 0; i < e; ++i) r *= a;
        return r;
    }
    bool eq(const E& a, const E& b) const { return a == b; }
};

struct WittOpsZMod {
    static constexpr bool torsion_free = false;
    i64 p = 2;
    int N = 1;
    cpp_int m = 2;  // p^N
    using E = cpp_int;
    WittOpsZMod(i64 pp, int NN) : p(pp), N(NN) {
        m = 1;
        for (int i = 0; i < NN; ++i) m *= pp;
    }
    i64 prime() const { return p; }
    E from_z(const cpp_int& z) const {
        cpp_int r = z % m;
        if (r < 0) r += m;
        return r;
    }
    E add(const E& a, const E& b) const { return (a + b) % m; }
    E mul(const E& a, const E& b) const { return (a * b) % m; }
    E pow(const E& a, int e) const {
        E r = 1;
        for (int i = 0; i < e; ++i) r = (r * a) % m;
        return r;
    }
    bool eq(const E& a, const E& b) const { return from_z(a) == from_z(b); }
};

struct WittOpsGF {
    static constexpr bool torsion_free = false;
    GFCtx cx;
    using E = GFElem;
    i64 prime() const { return cx.p; }
    E from_z(const cpp_int& z) const { return cx.from_z(z); }
    E add(const E& a, const E& b) const { return cx.add(a, b); }
    E mul(const E& a, const E& b) const { return cx.mul(a, b); }
    E pow(const E& a, int e) const { return cx.pow(a, static_cast<u64>(e)); }
    bool eq(const E& a, const E& b) const { return a == b; }
};

template <typename Ops>
typename Ops::E upoly_eval(const Ops& ops, const UPoly& f,
                           const std::vector<typename Ops::E>& vals) {
    auto acc = ops.from_z(0);
    for (const auto& [t, c] : f) {
        auto term = ops.from_z(c);
        for (const auto& [v, e] : t) term = ops.mul(term, ops.pow(vals.at(v), e));
        acc = ops.add(acc, term);
    }
    return acc;
}

// ---- Witt vector operations -------------------------------------------------

template <typename Ops>
using WittVecT = std::vector<typename Ops::E>;

template <typename Ops>
WittVecT<Ops> witt_zero(const Ops& ops, int r) {
    return WittVecT<Ops>(static_cast<size_t>(r), ops.from_z(0));
}

template <typename Ops>
WittVecT<Ops> witt_binary(const Ops& ops, char op, const WittVecT<Ops>& x,
                          const WittVecT<Ops>& y) {
    if (x.size() != y.size()) fail("ShapeMismatch", "Witt lengths differ");
    int r = static_cast<int>(x.size());
    std::vector<typename Ops::E> vals(2 * r, ops.from_z(0));
    for (int i = 0; i < r; ++i) {
        vals[2 * i] = x[i];
        vals[2 * i + 1] = y[i];
    }
    WittVecT<Ops> out;
    out.reserve(r);
    for (int n = 0; n < r; ++n) out.push_back(upoly_eval(ops, witt_universal(ops.prime(), op, n), vals));
    return out;
}

template <typename Ops>
WittVecT<Ops> witt_add(const Ops& ops, const WittVecT<Ops>& x, const WittVecT<Ops>& y) {
    return witt_binary(ops, 'S', x, y);
}

template <typename Ops>
WittVecT<Ops> witt_mul(const Ops& ops, const WittVecT<Ops>& x, const WittVecT<Ops>& y) {
    return witt_binary(ops, 'P', x, y);
}

template <typename Ops>
WittVecT<Ops> witt_neg(const Ops& ops, const WittVecT<Ops>& x) {
    int r = static_cast<int>(x.size());
    std::vector<typename Ops::E> vals(2 * r, ops.from_z(0));
    for (int i = 0; i < r; ++i) vals[2 * i] = x[i];
    WittVecT<Ops> out;
    for (int n = 0; n < r; ++n) out.push_back(upoly_eval(ops, witt_universal(ops.prime(), 'N', n), vals));
    return out;
}

template <typename Ops>
WittVecT<Ops> witt_sub(const Ops& ops, const WittVecT<Ops>& x, const WittVecT<Ops>& y) {
    return witt_add(ops, x, witt_neg(ops, y));
}

template <typename Ops>
bool witt_eq(const Ops& ops, const WittVecT<Ops>& x, const WittVecT<Ops>& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i)
        if (!ops.eq(x[i], y[i])) return false;
    return true;
}

template <typename Ops>
WittVecT<Ops> witt_teich(const Ops& ops, int r, const typename Ops::E& a) {
    auto v = witt_zero(ops, r);
    if (r > 0) v[0] = a;
    return v;
}

template <typename Ops>
WittVecT<Ops> witt_from_int(const Ops& ops, int r, i64 n) {
    if (n < 0) return witt_neg(ops, witt_from_int(ops, r, -n));
    auto acc = witt_zero(ops, r);
    if (n == 0) return acc;
    auto one = witt_teich(ops, r, ops.from_z(1));
    int top = 63;
    while (((n >> top) & 1) == 0) --top;
    for (int bit = top; bit >= 0; --bit) {
        acc = witt_add(ops, acc, acc);
        if ((n >> bit) & 1) acc = witt_add(ops, acc, one);
    }
    return acc;
}

template <typename Ops>
WittVecT<Ops> witt_pow(const Ops& ops, const WittVecT<Ops>& x, u64 e) {
    auto r = witt_from_int(ops, static_cast<int>(x.size()), 1);
    auto base = x;
    while (e > 0) {
        if (e & 1) r = witt_mul(ops, r, base);
        base = witt_mul(ops, base, base);
        e >>= 1;
    }
    return r;
}

// Verschiebung: shift components, truncating the top one.
template <typename Ops>
WittVecT<Ops> verschiebung_V(const Ops& ops, const WittVecT<Ops>& x) {
    auto v = witt_zero(ops, static_cast<int>(x.size()));
    for (size_t i = 1; i < x.size(); ++i) v[i] = x[i - 1];
    return v;
}

// Frobenius on a general base drops one ghost component: W_r -> W_{r-1}.
template <typename Ops>
WittVecT<Ops> frobenius_F_shift(const Ops& ops, const WittVecT<Ops>& x) {
    int r = static_cast<int>(x.size());
    if (r == 0) return {};
    std::vector<typename Ops::E> vals(2 * r, ops.from_z(0));
    for (int i = 0; i < r; ++i) vals[2 * i] = x[i];
    WittVecT<Ops> out;
    for (int n = 0; n + 1 < r; ++n) out.push_back(upoly_eval(ops, witt_universal(ops.prime(), 'F', n), vals));
    return out;
}

template <typename Ops>
WittVecT<Ops> witt_truncate(const WittVecT<Ops>& x, int r) {
    WittVecT<Ops> out(x.begin(), x.begin() + r);
    return out;
}

// Ghost coordinates; a ring homomorphism only over p-torsion-free bases.
template <typename Ops>
WittVecT<Ops> witt_ghost(const Ops& ops, const WittVecT<Ops>& x) {
    if constexpr (!Ops::torsion_free) {
        (void)x;
        fail("GhostUndefined", "ghost requires a p-torsion-free base");
    } else {
        int r = static_cast<int>(x.size());
        WittVecT<Ops> g;
        for (int n = 0; n < r; ++n) {
            auto w = ops.from_z(0);
            cpp_int pi = 1;
            for (int i = 0; i <= n; ++i) {
                w = ops.add(w, ops.mul(ops.from_z(pi), ops.pow(x[i], static_cast<int>(upow(static_cast<u64>(ops.prime()), n - i)))));
                pi *= ops.prime();
            }
            g.push_back(w);
        }
        return g;
    }
}

// ---- W_r over finite fields --------------------------------------------------

using WGF = std::vector<GFElem>;  // components over F_{p^k}

// Over a perfect char-p base, Frobenius lifts to a length-preserving ring
// endomorphism acting as the p-th power on each component.
inline WGF wgf_F(const GFCtx& cx, const WGF& x) {
    WGF r = x;
    for (auto& c : r) c = cx.frob(c);
    return r;
}

inline WGF wgf_F_inv(const GFCtx& cx, const WGF& x) {
    WGF r = x;
    for (auto& c : r) c = cx.frob_inv(c);
    return r;
}

// W_r(F_{p^k}) is a unit iff the 0-component is nonzero.
inline bool wgf_is_unit(const GFCtx& cx, const WGF& x) {
    return !x.empty() && !cx.is_zero(x[0]);
}

// Lagrange: the unit group has order q^{r-1}(q-1).
inline WGF wgf_inv(const GFCtx& cx, const WGF& x) {
    if (!wgf_is_unit(cx, x)) fail("NotAUnit", "Witt vector is not a unit");
    WittOpsGF ops{cx};
    int r = static_cast<int>(x.size());
    u64 q = cx.field_size();
    u64 ord = (q - 1) * upow(q, r - 1);
    return witt_pow(ops, x, ord - 1);
}

// Digit coordinates: w = sum_j a_j [x^j] with a_j in Z/p^r; an isomorphism
// of Z/p^r-modules W_r(F_{p^k}) = (Z/p^r)^k on the Teichmueller basis.
inline WGF wgf_from_coords(const GFCtx& cx, int r, const std::vector<u64>& a) {
    if (static_cast<int>(a.size()) != cx.k) fail("ShapeMismatch", "need k digits");
    WittOpsGF ops{cx};
    auto acc = witt_zero(ops, r);
    GFElem xj = cx.one();
    for (int j = 0; j < cx.k; ++j) {
        auto scalar = witt_from_int(ops, r, static_cast<i64>(a[j]));
        acc = witt_add(ops, acc, witt_mul(ops, scalar, witt_teich(ops, r, xj)));
        xj = cx.mul(xj, cx.gen());
    }
    return acc;
}

inline std::vector<u64> wgf_coords(const GFCtx& cx, const WGF& w) {
    WittOpsGF ops{cx};
    int r = static_cast<int>(w.size());
    if (r == 0) return std::vector<u64>(static_cast<size_t>(cx.k), 0);
    // 0-component reads off the digits mod p
    std::vector<u64> a0(w[0].begin(), w[0].end());
    auto u = witt_sub(ops, w, wgf_from_coords(cx, r, a0));
    if (!cx.is_zero(u[0])) fail("InternalError", "digit peel left a 0-component");
    // u = V(F(psi(b))): unshift and undo the component-wise Frobenius
    WGF v;
    for (int i = 1; i < r; ++i) v.push_back(cx.frob_inv(u[i]));
    auto b = wgf_coords(cx, v);
    std::vector<u64> out(static_cast<size_t>(cx.k), 0);
    for (int j = 0; j < cx.k; ++j) out[j] = a0[j] + static_cast<u64>(cx.p) * b[j];
    return out;
}

// ---- matrices over W_r(F_{p^k}) ----------------------------------------------

inline Mat<WGF> wgf_mat_identity(const GFCtx& cx, int r, int n) {
    WittOpsGF ops{cx};
    Mat<WGF> m(n, n, witt_zero(ops, r));
    for (int i = 0; i < n; ++i) m.at(i, i) = witt_from_int(ops, r, 1);
    return m;
}

inline Mat<WGF> wgf_mat_mul(const GFCtx& cx, const Mat<WGF>& a, const Mat<WGF>& b) {
    if (a.cols != b.rows) fail("ShapeMismatch", "wgf_mat_mul");
    WittOpsGF ops{cx};
    int r = static_cast<int>(a.a.front().size());
    Mat<WGF> out(a.rows, b.cols, witt_zero(ops, r));
    for (int i = 0; i < a.rows; ++i)
        for (int t = 0; t < a.cols; ++t)
            for (int j = 0; j < b.cols; ++j)
                out.at(i, j) = witt_add(ops, out.at(i, j), witt_mul(ops, a.at(i, t), b.at(t, j)));
    return out;
}

inline WGF wgf_mat_det(const GFCtx& cx, const Mat<WGF>& a) {
    if (a.rows != a.cols || a.rows == 0) fail("ShapeMismatch", "wgf_mat_det");
    WittOpsGF ops{cx};
    int n = a.rows;
    int r = static_cast<int>(a.a.front().size());
    if (n == 1) return a.at(0, 0);
    auto det = witt_zero(ops, r);
    for (int j = 0; j < n; ++j) {
        Mat<WGF> minor(n - 1, n - 1, witt_zero(ops, r));
        for (int rr = 1; rr < n; ++rr) {
            int cc = 0;
            for (int c = 0; c < n; ++c) {
                if (c == j) continue;
                minor.at(rr - 1, cc++) = a.at(rr, c);
            }
        }
        auto term = witt_mul(ops, a.at(0, j), wgf_mat_det(cx, minor));
        det = (j % 2 == 0) ? witt_add(ops, det, term) : witt_sub(ops, det, term);
    }
    return det;
}

inline Mat<WGF> wgf_mat_inverse(const GFCtx& cx, const Mat<WGF>& a) {
    WittOpsGF ops{cx};
    int n = a.rows;
    int r = static_cast<int>(a.a.front().size());
    auto det = wgf_mat_det(cx, a);
    if (!wgf_is_unit(cx, det)) fail("SingularMatrix", "matrix not invertible over W_r");
    auto dinv = wgf_inv(cx, det);
    Mat<WGF> adj(n, n, witt_zero(ops, r));
    if (n == 1) {
        adj.at(0, 0) = witt_from_int(ops, r, 1);
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                Mat<WGF> minor(n - 1, n - 1, witt_zero(ops, r));
                int rr = 0;
                for (int row = 0; row < n; ++row) {
                    if (row == i) continue;
                    int cc = 0;
                    for (int c = 0; c < n; ++c) {
                        if (c == j) continue;
                        minor.at(rr, cc++) = a.at(row, c);
                    }
                    ++rr;
                }
                auto m = wgf_mat_det(cx, minor);
                adj.at(j, i) = ((i + j) % 2 == 0) ? m : witt_neg(ops, m);
            }
    }
    for (auto& e : adj.a) e = witt_mul(ops, e, dinv);
    return adj;
}

// ---- Artin-Schreier-Witt fixed points -----------------------------------------

struct SemilinearMap {
    GFCtx cx;
    int r = 1;
    Mat<WGF> m;  // n x n; acts as x -> m * F(x)
};

struct AswReport {
    std::vector<std::vector<WGF>> gens;  // each generator: n Witt-vector slots
    std::vector<int> orders;             // generator j has additive order p^orders[j]
    bool free_of_rank_n = false;
    bool spans = false;
};

// Row rank over F_{p^k} by Gaussian elimination.
inline int gf_rank(const GFCtx& cx, std::vector<std::vector<GFElem>> rows) {
    if (rows.empty()) return 0;
    size_t cols = rows[0].size();
    int rank = 0;
    size_t lead = 0;
    for (size_t c = 0; c < cols && static_cast<size_t>(rank) < rows.size(); ++c) {
        size_t piv = lead;
        while (piv < rows.size() && cx.is_zero(rows[piv][c])) ++piv;
        if (piv == rows.size()) continue;
        std::swap(rows[lead], rows[piv]);
        GFElem inv = cx.inv(rows[lead][c]);
        for (size_t cc = 0; cc < cols; ++cc) rows[lead][cc] = cx.mul(rows[lead][cc], inv);
        for (size_t rI = 0; rI < rows.size(); ++rI) {
            if (rI == lead || cx.is_zero(rows[rI][c])) continue;
            GFElem f = rows[rI][c];
            for (size_t cc = 0; cc < cols; ++cc)
                rows[rI][cc] = cx.sub(rows[rI][cc], cx.mul(f, rows[lead][cc]));
        }
        ++lead;
        ++rank;
    }
    return rank;
}

// Fixed module {x : Phi F(x) = x} in W_r(F_{p^k})^n, as the kernel of the
// Z/p^r-linear map Phi.F - id in Teichmueller digit coordinates.
inline AswReport asw_fixed_points(const SemilinearMap& phi) {
    const GFCtx& cx = phi.cx;
    int n = phi.m.rows;
    int r = phi.r;
    int k = cx.k;
    if (phi.m.rows != phi.m.cols || n == 0) fail("ShapeMismatch", "square matrix required");
    if (!wgf_is_unit(cx, wgf_mat_det(cx, phi.m)))
        fail("SingularMatrix", "semilinear map must be invertible");
    WittOpsGF ops{cx};
    int kn = k * n;
    ZModCtx zc(static_cast<u64>(cx.p), r);
    Mat<u64> A(kn, kn, 0);
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < k; ++j) {
            // basis vector: [x^j] in slot t
            std::vector<u64> digits(static_cast<size_t>(k), 0);
            digits[j] = 1;
            WGF base = wgf_from_coords(cx, r, digits);
            std::vector<WGF> v(static_cast<size_t>(n), witt_zero(ops, r));
            v[t] = base;
            // w = Phi * F(v) - v
            std::vector<WGF> w(static_cast<size_t>(n), witt_zero(ops, r));
            WGF fv = wgf_F(cx, base);
            for (int i = 0; i < n; ++i)
                w[i] = witt_mul(ops, phi.m.at(i, t), fv);
            for (int i = 0; i < n; ++i) w[i] = witt_sub(ops, w[i], v[i]);
            int col = t * k + j;
            for (int i = 0; i < n; ++i) {
                auto d = wgf_coords(cx, w[i]);
                for (int jj = 0; jj < k; ++jj) A.at(i * k + jj, col) = d[jj] % zc.m;
            }
        }
    auto snf = zmod_snf(zc, A);
    AswReport rep;
    for (int j = 0; j < A.cols; ++j) {
        int sv = j < static_cast<int>(snf.svals.size()) ? snf.svals[j] : r;
        if (sv == 0) continue;
        u64 scale = upow(static_cast<u64>(cx.p), r - sv);
        std::vector<u64> g(static_cast<size_t>(kn), 0);
        bool nonzero = false;
        for (int i = 0; i < kn; ++i) {
            g[i] = zc.mul(snf.C.at(i, j) % zc.m, scale);
            nonzero |= (g[i] != 0);
        }
        if (!nonzero) continue;
        std::vector<WGF> gen;
        for (int t = 0; t < n; ++t) {
            std::vector<u64> digits(g.begin() + t * k, g.begin() + (t + 1) * k);
            gen.push_back(wgf_from_coords(cx, r, digits));
        }
        rep.gens.push_back(std::move(gen));
        rep.orders.push_back(sv);
    }
    int full = 0;
    bool torsion = false;
    for (int sv : rep.orders) {
        if (sv == r) ++full;
        else torsion = true;
    }
    rep.free_of_rank_n = (full == n) && !torsion;
    // spans iff the generators span (F_q)^n after reduction mod V (Nakayama)
    std::vector<std::vector<GFElem>> red;
    for (const auto& gen : rep.gens) {
        std::vector<GFElem> row;
        for (const auto& slot : gen) row.push_back(slot.empty() ? cx.zero() : slot[0]);
        red.push_back(row);
    }
    rep.spans = !red.empty() && gf_rank(cx, red) == n;
    return rep;
}

// Applies the semilinear map once: x -> Phi * F(x).
inline std::vector<WGF> asw_apply(const SemilinearMap& phi, const std::vector<WGF>& x) {
    const GFCtx& cx = phi.cx;
    WittOpsGF ops{cx};
    int n = phi.m.rows;
    std::vector<WGF> fx;
    fx.reserve(x.size());
    for (const auto& slot : x) fx.push_back(wgf_F(cx, slot));
    std::vector<WGF> out(static_cast<size_t>(n), witt_zero(ops, phi.r));
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < n; ++t)
            out[i] = witt_add(ops, out[i], witt_mul(ops, phi.m.at(i, t), fx[t]));
    return out;
}

}  // namespace qprism
