#pragma once
// Mod-mu stratification dictionaries.  The coefficient ring is the exact
// quotient Z/p^N[U_1^±,...,U_d^±]; stratifications live over the PD-polynomial
// algebra on nu blocks of d divided-power variables, truncated at total PD
// degree K (the truncation ideal is generated by the tau^[j] with |j| >= K,
// so the quotient is a ring and every identity below is exact).

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zmod.hpp"

namespace qprism {

struct PDPolyDesc {
    i64 p = 0;
    int N = 0;  // coefficients mod p^N
    int d = 0;  // Laurent variables U_1..U_d
    int nu = 1; // tau blocks
    int K = 1;  // PD truncation: total degree < K

    bool operator==(const PDPolyDesc&) const = default;

    void validate() const {
        if (!is_prime(p)) fail("BadParams", "p must be prime");
        if (N < 1 || d < 1 || K < 1) fail("BadParams", "N, d, K must be positive");
        if (nu != 1 && nu != 2) fail("BadParams", "nu is 1 or 2");
        upow(static_cast<u64>(p), N);  // overflow guard
    }
};

// term key: Laurent exponents (size d) and PD indices (size nu*d)
using PDKey = std::pair<std::vector<i64>, std::vector<int>>;

struct PDPoly {
    PDPolyDesc desc;
    std::map<PDKey, u64> terms;  // values nonzero mod p^N

    explicit PDPoly(const PDPolyDesc& dd) : desc(dd) {}
};

inline u64 pdp_mod(const PDPolyDesc& dd) { return upow(static_cast<u64>(dd.p), dd.N); }

inline int pd_degree(const std::vector<int>& j) {
    int s = 0;
    for (int x : j) s += x;
    return s;
}

inline void pdp_insert(PDPoly& f, const PDKey& key, u64 c) {
    const PDPolyDesc& dd = f.desc;
    if (static_cast<int>(key.first.size()) != dd.d ||
        static_cast<int>(key.second.size()) != dd.nu * dd.d)
        fail("BadParams", "PD term key shape");
    if (pd_degree(key.second) >= dd.K) return;
    u64 m = pdp_mod(dd);
    auto it = f.terms.find(key);
    u64 v = ((it == f.terms.end() ? 0 : it->second) + c % m) % m;
    if (v == 0) {
        if (it != f.terms.end()) f.terms.erase(it);
    } else {
        f.terms[key] = v;
    }
}

inline PDPoly pdp_zero(const PDPolyDesc& dd) { return PDPoly(dd); }

inline PDPoly pdp_const(const PDPolyDesc& dd, u64 c) {
    PDPoly f(dd);
    pdp_insert(f, {std::vector<i64>(dd.d, 0), std::vector<int>(dd.nu * dd.d, 0)}, c);
    return f;
}

inline PDPoly pdp_one(const PDPolyDesc& dd) { return pdp_const(dd, 1); }

inline PDPoly pdp_monomial(const PDPolyDesc& dd, const std::vector<i64>& u,
                           const std::vector<int>& pd, u64 c) {
    PDPoly f(dd);
    pdp_insert(f, {u, pd}, c);
    return f;
}

inline PDPoly pdp_add(const PDPoly& a, const PDPoly& b) {
    if (!(a.desc == b.desc)) fail("ParamsMismatch", "PD descriptions differ");
    PDPoly r = a;
    for (const auto& [k, c] : b.terms) pdp_insert(r, k, c);
    return r;
}

inline PDPoly pdp_neg(const PDPoly& a) {
    PDPoly r(a.desc);
    u64 m = pdp_mod(a.desc);
    for (const auto& [k, c] : a.terms) r.terms[k] = m - c;
    return r;
}

inline PDPoly pdp_sub(const PDPoly& a, const PDPoly& b) { return pdp_add(a, pdp_neg(b)); }

inline PDPoly pdp_scale(const PDPoly& a, u64 c) {
    PDPoly r(a.desc);
    u64 m = pdp_mod(a.desc);
    for (const auto& [k, v] : a.terms) {
        u64 w = static_cast<u64>((u128(v) * (c % m)) % m);
        if (w != 0) r.terms[k] = w;
    }
    return r;
}

// tau^[a] tau^[b] = binom(a+b, a) tau^[a+b] in each PD slot
inline PDPoly pdp_mul(const PDPoly& a, const PDPoly& b) {
    if (!(a.desc == b.desc)) fail("ParamsMismatch", "PD descriptions differ");
    PDPoly r(a.desc);
    u64 m = pdp_mod(a.desc);
    cpp_int mm = m;
    for (const auto& [ka, ca] : a.terms)
        for (const auto& [kb, cb] : b.terms) {
            if (pd_degree(ka.second) + pd_degree(kb.second) >= a.desc.K) continue;
            PDKey k;
            k.first.resize(ka.first.size());
            for (size_t i = 0; i < k.first.size(); ++i) k.first[i] = ka.first[i] + kb.first[i];
            k.second.resize(ka.second.size());
            cpp_int coef = cpp_int(ca) * cb;
            for (size_t i = 0; i < k.second.size(); ++i) {
                k.second[i] = ka.second[i] + kb.second[i];
                coef *= binom(k.second[i], ka.second[i]);
            }
            pdp_insert(r, k, static_cast<u64>(coef % mm));
        }
    return r;
}

inline bool pdp_eq(const PDPoly& a, const PDPoly& b) {
    return a.desc == b.desc && a.terms == b.terms;
}

inline bool pdp_is_zero(const PDPoly& a) { return a.terms.empty(); }

// formal d/dU_i on the Laurent part
inline PDPoly pdp_dU(const PDPoly& a, int i) {
    if (i < 0 || i >= a.desc.d) fail("BadParams", "derivative index");
    PDPoly r(a.desc);
    u64 m = pdp_mod(a.desc);
    for (const auto& [k, c] : a.terms) {
        i64 e = k.first[i];
        if (e == 0) continue;
        PDKey k2 = k;
        k2.first[i] = e - 1;
        u64 ev = static_cast<u64>(((e % static_cast<i64>(m)) + static_cast<i64>(m)) %
                                  static_cast<i64>(m));
        pdp_insert(r, k2, static_cast<u64>((u128(c) * ev) % m));
    }
    return r;
}

// the part with all tau exponents zero (the image under tau -> 0)
inline PDPoly pdp_tau0(const PDPoly& a) {
    PDPoly r(a.desc);
    for (const auto& [k, c] : a.terms)
        if (pd_degree(k.second) == 0) r.terms[k] = c;
    return r;
}

inline bool pdp_base_only(const PDPoly& a) {
    for (const auto& [k, c] : a.terms)
        if (pd_degree(k.second) != 0) return false;
    return true;
}

// same coefficients over a description with different nu/K (terms cut at K2)
inline PDPoly pdp_redesc(const PDPoly& a, const PDPolyDesc& dd) {
    if (a.desc.p != dd.p || a.desc.N != dd.N || a.desc.d != dd.d)
        fail("ParamsMismatch", "redesc changes the coefficient ring");
    PDPoly r(dd);
    int len = dd.nu * dd.d;
    for (const auto& [k, c] : a.terms) {
        std::vector<int> pd(len, 0);
        for (size_t i = 0; i < k.second.size(); ++i) {
            if (k.second[i] == 0) continue;
            if (static_cast<int>(i) >= len)
                fail("BadParams", "redesc drops a live PD block");
            pd[i] = k.second[i];
        }
        pdp_insert(r, {k.first, pd}, c);
    }
    return r;
}

// --- matrices ---------------------------------------------------------------

using PDMat = Mat<PDPoly>;

inline PDMat pdmat_zero(const PDPolyDesc& dd, int r, int c) {
    return PDMat(r, c, pdp_zero(dd));
}

inline PDMat pdmat_identity(const PDPolyDesc& dd, int n) {
    PDMat m = pdmat_zero(dd, n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = pdp_one(dd);
    return m;
}

inline PDMat pdmat_add(const PDMat& a, const PDMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "pdmat_add");
    PDMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = pdp_add(r.a[i], b.a[i]);
    return r;
}

inline PDMat pdmat_sub(const PDMat& a, const PDMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "pdmat_sub");
    PDMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = pdp_sub(r.a[i], b.a[i]);
    return r;
}

inline PDMat pdmat_mul(const PDMat& a, const PDMat& b) {
    if (a.cols != b.rows) fail("ShapeMismatch", "pdmat_mul");
    const PDPolyDesc& dd = a.a.empty() ? b.a[0].desc : a.a[0].desc;
    PDMat r = pdmat_zero(dd, a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const PDPoly& v = a.at(i, k);
            if (pdp_is_zero(v)) continue;
            for (int j = 0; j < b.cols; ++j)
                r.at(i, j) = pdp_add(r.at(i, j), pdp_mul(v, b.at(k, j)));
        }
    return r;
}

inline bool pdmat_eq(const PDMat& a, const PDMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (size_t i = 0; i < a.a.size(); ++i)
        if (!pdp_eq(a.a[i], b.a[i])) return false;
    return true;
}

inline PDMat pdmat_map(const PDMat& a, const std::function<PDPoly(const PDPoly&)>& f) {
    PDMat r = a;
    for (PDPoly& e : r.a) e = f(e);
    return r;
}

inline PDMat pdmat_dU(const PDMat& a, int i) {
    return pdmat_map(a, [&](const PDPoly& e) { return pdp_dU(e, i); });
}

// --- connections and Higgs data over the base ring --------------------------

// nabla_i = d/dU_i + B_i in the non-log coordinate; entries of B_i are
// tau-free.  nu and K of the description only matter once a stratification
// is built, so they travel along unchanged.
struct ModPConnection {
    PDPolyDesc desc;
    int n = 0;
    std::vector<PDMat> B;
};

// Theta_i = B_i acting linearly; flatness is plain commutation.
struct ModPHiggs {
    PDPolyDesc desc;
    int n = 0;
    std::vector<PDMat> B;
};

namespace detail {

template <typename T>
inline void strat_shape(const T& nc) {
    nc.desc.validate();
    if (nc.desc.nu != 1) fail("BadParams", "connection data lives over one tau block");
    if (nc.n < 1 || static_cast<int>(nc.B.size()) != nc.desc.d)
        fail("BadParams", "one matrix per variable is required");
    for (const PDMat& b : nc.B) {
        if (b.rows != nc.n || b.cols != nc.n) fail("BadParams", "matrix shape");
        for (const PDPoly& e : b.a) {
            if (!(e.desc == nc.desc)) fail("ParamsMismatch", "entry description");
            if (!pdp_base_only(e)) fail("BadParams", "matrix entries must be tau-free");
        }
    }
}

}  // namespace detail

inline void mpc_validate(const ModPConnection& nc) { detail::strat_shape(nc); }
inline void mph_validate(const ModPHiggs& h) { detail::strat_shape(h); }

// [nabla_i, nabla_j] = 0, i.e. dU_i(B_j) - dU_j(B_i) + [B_i, B_j] = 0
inline bool mpc_flat(const ModPConnection& nc) {
    mpc_validate(nc);
    for (int i = 0; i < nc.desc.d; ++i)
        for (int j = i + 1; j < nc.desc.d; ++j) {
            PDMat lhs = pdmat_add(pdmat_sub(pdmat_dU(nc.B[j], i), pdmat_dU(nc.B[i], j)),
                                  pdmat_sub(pdmat_mul(nc.B[i], nc.B[j]),
                                            pdmat_mul(nc.B[j], nc.B[i])));
            for (const PDPoly& e : lhs.a)
                if (!pdp_is_zero(e)) return false;
        }
    return true;
}

inline bool mph_flat(const ModPHiggs& h) {
    mph_validate(h);
    for (int i = 0; i < h.desc.d; ++i)
        for (int j = i + 1; j < h.desc.d; ++j)
            if (!pdmat_eq(pdmat_mul(h.B[i], h.B[j]), pdmat_mul(h.B[j], h.B[i])))
                return false;
    return true;
}

namespace detail {

// multi-indices of the given length with total degree < bound, sorted by
// degree so each index follows all of its predecessors
inline void pd_indices_rec(int len, int bound, std::vector<int>& cur, int pos, int used,
                           std::vector<std::vector<int>>& out) {
    if (pos == len) {
        out.push_back(cur);
        return;
    }
    for (int v = 0; used + v < bound; ++v) {
        cur[pos] = v;
        pd_indices_rec(len, bound, cur, pos + 1, used + v, out);
    }
    cur[pos] = 0;
}

inline std::vector<std::vector<int>> pd_indices(int len, int bound) {
    std::vector<std::vector<int>> out;
    if (bound < 1 || len < 1) return out;
    std::vector<int> cur(len, 0);
    pd_indices_rec(len, bound, cur, 0, 0, out);
    std::sort(out.begin(), out.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
        int da = pd_degree(a), db = pd_degree(b);
        if (da != db) return da < db;
        return a < b;
    });
    return out;
}

// Taylor coefficient family C_j indexed by |j| < K; the recursion steps along
// the first nonzero axis, which is path-independent exactly when the family
// is flat.  deriv toggles the d/dU_i part (connections yes, Higgs no).
template <typename T>
inline std::map<std::vector<int>, PDMat> taylor_coeffs(const T& nc, int K, bool deriv) {
    std::map<std::vector<int>, PDMat> C;
    C.emplace(std::vector<int>(nc.desc.d, 0), pdmat_identity(nc.desc, nc.n));
    for (const auto& j : pd_indices(nc.desc.d, K)) {
        if (pd_degree(j) == 0) continue;
        int i = 0;
        while (j[i] == 0) ++i;
        std::vector<int> prev = j;
        prev[i] -= 1;
        const PDMat& cp = C.at(prev);
        PDMat next = pdmat_mul(nc.B[i], cp);
        if (deriv) next = pdmat_add(pdmat_dU(cp, i), next);
        C.emplace(j, std::move(next));
    }
    return C;
}

template <typename T>
inline PDMat taylor_impl(const T& nc, int K, bool deriv) {
    PDPolyDesc out = nc.desc;
    out.nu = 1;
    out.K = K;
    out.validate();
    auto C = taylor_coeffs(nc, K, deriv);
    PDMat eps = pdmat_zero(out, nc.n, nc.n);
    for (const auto& [j, cj] : C) {
        for (int r = 0; r < nc.n; ++r)
            for (int c = 0; c < nc.n; ++c)
                for (const auto& [k, v] : cj.at(r, c).terms)
                    pdp_insert(eps.at(r, c), {k.first, j}, v);
    }
    return eps;
}

}  // namespace detail

// eps(e) = sum_{|j|<K} prod_i nabla_i^{j_i}(e) tau^[j]
inline PDMat taylor(const ModPConnection& nc, int K) {
    mpc_validate(nc);
    if (!mpc_flat(nc)) fail("NotFlat", "taylor needs a flat connection");
    return detail::taylor_impl(nc, K, true);
}

// h_j = prod_i Theta_i^{j_i}(h)
inline PDMat higgs_taylor(const ModPHiggs& h, int K) {
    mph_validate(h);
    if (!mph_flat(h)) fail("NotFlat", "higgs_taylor needs commuting Theta data");
    return detail::taylor_impl(h, K, false);
}

// --- face maps to the two-block algebra -------------------------------------

namespace detail {

inline PDPolyDesc two_block(const PDPolyDesc& dd) {
    PDPolyDesc out = dd;
    out.nu = 2;
    return out;
}

// compositions m of length len with |m| < bound and the falling-factorial
// Taylor weight prod_i falling(k_i, m_i) attached on the fly by the caller
inline PDPoly face12(const PDPoly& f) {
    PDPolyDesc dd = two_block(f.desc);
    PDPoly r(dd);
    for (const auto& [k, c] : f.terms) {
        std::vector<int> pd(2 * dd.d, 0);
        for (int i = 0; i < dd.d; ++i) pd[i] = k.second[i];
        pdp_insert(r, {k.first, pd}, c);
    }
    return r;
}

// U -> U + tau^(1) by the divided-power Taylor expansion
// f(U + t) = sum_m falling-prod(k, m) U^{k-m} t^[m]; exact at truncation.
inline PDPoly face23(const PDPoly& f, bool substitute) {
    PDPolyDesc dd = two_block(f.desc);
    PDPoly r(dd);
    u64 mod = pdp_mod(dd);
    cpp_int mm = mod;
    for (const auto& [k, c] : f.terms) {
        int jdeg = pd_degree(k.second);
        std::vector<int> base(2 * dd.d, 0);
        for (int i = 0; i < dd.d; ++i) base[dd.d + i] = k.second[i];
        if (!substitute) {
            pdp_insert(r, {k.first, base}, c);
            continue;
        }
        for (const auto& m : pd_indices(dd.d, dd.K - jdeg)) {
            cpp_int w = c;
            std::vector<i64> u = k.first;
            std::vector<int> pd = base;
            for (int i = 0; i < dd.d; ++i) {
                w *= falling(k.first[i], m[i]);
                u[i] -= m[i];
                pd[i] = m[i];
            }
            u64 wr = static_cast<u64>(((w % mm) + mm) % mm);
            if (wr != 0) pdp_insert(r, {u, pd}, wr);
        }
    }
    return r;
}

// tau -> tau^(1) + tau^(2) via PD addition (x+y)^[m] = sum x^[i] y^[m-i]
inline PDPoly face13(const PDPoly& f) {
    PDPolyDesc dd = two_block(f.desc);
    PDPoly r(dd);
    for (const auto& [k, c] : f.terms) {
        std::vector<std::vector<int>> splits{std::vector<int>(2 * dd.d, 0)};
        for (int i = 0; i < dd.d; ++i) {
            int ji = k.second[i];
            if (ji == 0) continue;
            std::vector<std::vector<int>> next;
            for (const auto& s : splits)
                for (int a = 0; a <= ji; ++a) {
                    std::vector<int> t = s;
                    t[i] = a;
                    t[dd.d + i] = ji - a;
                    next.push_back(std::move(t));
                }
            splits = std::move(next);
        }
        for (const auto& pd : splits) pdp_insert(r, {k.first, pd}, c);
    }
    return r;
}

inline PDMat face_mat(const PDMat& a, const std::function<PDPoly(const PDPoly&)>& f) {
    if (a.a.empty()) fail("BadParams", "empty matrix");
    PDMat r(a.rows, a.cols, pdp_zero(two_block(a.a[0].desc)));
    for (size_t i = 0; i < a.a.size(); ++i) r.a[i] = f(a.a[i]);
    return r;
}

template <typename M>
inline bool check_strat_impl(const M& eps, bool substitute) {
    if (eps.rows != eps.cols || eps.rows < 1) return false;
    const PDPolyDesc& dd = eps.a[0].desc;
    if (dd.nu != 1) fail("BadParams", "stratifications live over one tau block");
    // Delta^*(eps) = id: setting tau = 0 leaves the identity
    PDMat at0 = pdmat_map(eps, pdp_tau0);
    if (!pdmat_eq(at0, pdmat_identity(dd, eps.rows))) return false;
    PDMat lhs = pdmat_mul(face_mat(eps, [](const PDPoly& e) { return face12(e); }),
                          face_mat(eps, [&](const PDPoly& e) { return face23(e, substitute); }));
    PDMat rhs = face_mat(eps, [](const PDPoly& e) { return face13(e); });
    return pdmat_eq(lhs, rhs);
}

}  // namespace detail

// p_12^*(eps) p_23^*(eps) = p_13^*(eps) over the two-block algebra, plus
// Delta^*(eps) = id.  The connection-side p_23 shifts the coefficients by
// U -> U + tau^(1); the Higgs-side groupoid leaves coefficients alone.
inline bool check_strat(const PDMat& eps) { return detail::check_strat_impl(eps, true); }
inline bool higgs_check_strat(const PDMat& eps) { return detail::check_strat_impl(eps, false); }

namespace detail {

template <typename T>
inline T extract_impl(const PDMat& eps, bool substitute) {
    bool ok = substitute ? check_strat(eps) : higgs_check_strat(eps);
    if (!ok) fail("NotAStratification", "cocycle or diagonal condition fails");
    const PDPolyDesc& dd = eps.a[0].desc;
    T out{dd, eps.rows, {}};
    for (int i = 0; i < dd.d; ++i) {
        PDMat b = pdmat_zero(dd, eps.rows, eps.cols);
        std::vector<int> ei(dd.d, 0);
        ei[i] = 1;
        for (int r = 0; r < eps.rows; ++r)
            for (int c = 0; c < eps.cols; ++c)
                for (const auto& [k, v] : eps.at(r, c).terms)
                    if (k.second == ei)
                        pdp_insert(b.at(r, c), {k.first, std::vector<int>(dd.d, 0)}, v);
        out.B.push_back(std::move(b));
    }
    return out;
}

}  // namespace detail

// reads nabla_i (resp. Theta_i) off the tau^[1_i] coefficient
inline ModPConnection extract(const PDMat& eps) {
    return detail::extract_impl<ModPConnection>(eps, true);
}

inline ModPHiggs higgs_extract(const PDMat& eps) {
    return detail::extract_impl<ModPHiggs>(eps, false);
}

// quasi-nilpotence to a bound: every Taylor coefficient at |j| = bound
// vanishes mod p^N (all deeper ones then vanish by the recursion)
inline bool mpc_nilpotent(const ModPConnection& nc, int bound) {
    mpc_validate(nc);
    if (bound < 1) fail("BadParams", "bound must be positive");
    auto C = detail::taylor_coeffs(nc, bound + 1, true);
    for (const auto& [j, cj] : C) {
        if (pd_degree(j) != bound) continue;
        for (const PDPoly& e : cj.a)
            if (!pdp_is_zero(e)) return false;
    }
    return true;
}

// --- the PD-polynomial basis isomorphism ------------------------------------

// f: C -> D with C = B<V_1..V_n>, B = A[T]/(T^p), D = A<T_1..T_n>, A = F_p;
// T_i -> T_i and V_i -> u_i T_i^[p] + b_i.  Bijectivity is checked on the
// truncated bases: C-monomials T^a V^[c] with |a| + p|c| < K against
// D-monomials T^[m] with |m| < K; the digit map m = a + p c matches them up.
namespace detail {

// D-elements: PD indices only, coefficients mod p
using DElem = std::map<std::vector<int>, u64>;

inline void d_insert(DElem& f, const std::vector<int>& k, u64 c, i64 p, int K) {
    if (pd_degree(k) >= K) return;
    u64 v = (f.count(k) ? f[k] : 0);
    v = (v + c % static_cast<u64>(p)) % static_cast<u64>(p);
    if (v == 0)
        f.erase(k);
    else
        f[k] = v;
}

inline DElem d_mul(const DElem& a, const DElem& b, i64 p, int K) {
    DElem r;
    for (const auto& [ka, ca] : a)
        for (const auto& [kb, cb] : b) {
            std::vector<int> k(ka.size());
            cpp_int coef = cpp_int(ca) * cb;
            for (size_t i = 0; i < k.size(); ++i) {
                k[i] = ka[i] + kb[i];
                coef *= binom(k[i], ka[i]);
            }
            d_insert(r, k, static_cast<u64>(coef % p), p, K);
        }
    return r;
}

inline DElem d_one(int len) {
    DElem r;
    r[std::vector<int>(len, 0)] = 1;
    return r;
}

// divided power of a PD-ideal element, term by term:
// gamma_t(c T^[k]) = c^t (1/t!) prod_i (t k_i)!/(k_i!^t) T^[tk] (the
// coefficient is an integer), and sums expand through
// gamma_m(x+y) = sum_{a+b=m} gamma_a(x) gamma_b(y).
inline DElem d_gamma(const DElem& x, int m, int len, i64 p, int K) {
    std::vector<DElem> acc(m + 1);
    acc[0] = d_one(len);
    for (const auto& [k, c] : x) {
        if (pd_degree(k) == 0) fail("NotInPDIdeal", "divided power of a unit part");
        std::vector<DElem> term(m + 1);
        term[0] = d_one(len);
        for (int t = 1; t <= m; ++t) {
            std::vector<int> kt(k.size());
            for (size_t i = 0; i < k.size(); ++i) kt[i] = k[i] * t;
            if (pd_degree(kt) >= K) break;
            cpp_int coef = cpow(cpp_int(c), t);
            for (size_t i = 0; i < k.size(); ++i)
                coef *= factorial(t * k[i]) / cpow(factorial(k[i]), t);
            coef /= factorial(t);
            u64 cr = static_cast<u64>(coef % p);
            if (cr != 0) term[t][kt] = cr;
        }
        std::vector<DElem> next(m + 1);
        for (int a = 0; a <= m; ++a)
            for (int b = 0; a + b <= m; ++b) {
                if (acc[a].empty() || term[b].empty()) continue;
                DElem prod = d_mul(acc[a], term[b], p, K);
                for (const auto& [kk, vv] : prod) d_insert(next[a + b], kk, vv, p, K);
            }
        acc = std::move(next);
    }
    return acc[m];
}

}  // namespace detail

// b[i] lists the plain-power monomials of b_i: (exponents a with a_j < p,
// |a| >= 1, coefficient).  In D the plain power T^a equals prod_j a_j! T^[a].
inline bool pd_poly_iso_check(i64 p, int n_vars,
                              const std::vector<u64>& u,
                              const std::vector<std::map<std::vector<int>, u64>>& b,
                              int K) {
    if (!is_prime(p)) fail("BadParams", "p must be prime");
    if (n_vars < 1 || K < 1) fail("BadParams", "n_vars and K must be positive");
    if (static_cast<int>(u.size()) != n_vars || static_cast<int>(b.size()) != n_vars)
        fail("BadParams", "one unit and one shift per variable");
    for (u64 x : u)
        if (x % static_cast<u64>(p) == 0) fail("BadParams", "u_i must be a unit mod p");

    // images of the V_i in D, with plain powers converted to divided powers
    std::vector<detail::DElem> imgV(n_vars);
    for (int i = 0; i < n_vars; ++i) {
        std::vector<int> tp(n_vars, 0);
        tp[i] = static_cast<int>(p);
        detail::d_insert(imgV[i], tp, u[i], p, K);
        for (const auto& [a, c] : b[i]) {
            if (static_cast<int>(a.size()) != n_vars) fail("BadParams", "shift arity");
            if (pd_degree(a) < 1) fail("BadParams", "b_i must lie in (T_1..T_n)");
            cpp_int coef = c;
            for (int j = 0; j < n_vars; ++j) {
                if (a[j] >= p) fail("BadParams", "plain powers live below T^p");
                coef *= factorial(a[j]);
            }
            detail::d_insert(imgV[i], a, static_cast<u64>(coef % p), p, K);
        }
    }

    // enumerate both truncated bases
    std::vector<std::vector<int>> dbasis = detail::pd_indices(n_vars, K);
    std::map<std::vector<int>, int> dpos;
    for (size_t i = 0; i < dbasis.size(); ++i) dpos[dbasis[i]] = static_cast<int>(i);

    std::vector<std::pair<std::vector<int>, std::vector<int>>> cbasis;
    for (const auto& a : detail::pd_indices(n_vars, K)) {
        bool low = true;
        for (int x : a) low &= (x < p);
        if (!low) continue;
        for (const auto& c : detail::pd_indices(n_vars, K)) {
            if (pd_degree(a) + static_cast<int>(p) * pd_degree(c) < K)
                cbasis.emplace_back(a, c);
        }
    }
    if (cbasis.size() != dbasis.size()) return false;

    // matrix of f over F_p: column per C-basis monomial T^a V^[c]
    ZModCtx cx(static_cast<u64>(p), 1);
    Mat<u64> mat(static_cast<int>(dbasis.size()), static_cast<int>(cbasis.size()), 0);
    for (size_t col = 0; col < cbasis.size(); ++col) {
        const auto& [a, c] = cbasis[col];
        detail::DElem img;
        cpp_int lead = 1;
        for (int j = 0; j < n_vars; ++j) lead *= factorial(a[j]);
        detail::d_insert(img, a, static_cast<u64>(lead % p), p, K);
        for (int i = 0; i < n_vars; ++i)
            if (c[i] > 0)
                img = detail::d_mul(img, detail::d_gamma(imgV[i], c[i], n_vars, p, K), p, K);
        for (const auto& [k, v] : img) mat.at(dpos.at(k), static_cast<int>(col)) = v;
    }
    return zmod_kernel(cx, mat).empty();
}

}  // namespace qprism
