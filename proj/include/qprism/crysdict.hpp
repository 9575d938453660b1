#pragma once
// Crystalline dictionary between group actions and honest log connections
// over divided-power coefficients, plus filtration saturation combinatorics
// on integer lattices.
//
// The coefficient ring is Z/p^N<mu>/(mu^[K..]) from rings.hpp, extended by
// Laurent variables U_1..U_d with integral exponents.  gamma_i acts by
// U_i -> (1+mu) U_i and fixes mu, so d_i^log(U^k) = k_i U^k exactly.

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rings.hpp"
#include "zlattice.hpp"

namespace qprism {

struct CrysDesc {
    PDParams par;
    int d = 0;

    bool operator==(const CrysDesc&) const = default;

    void validate() const {
        par.validate();
        if (d < 1) fail("BadParams", "d must be positive");
    }
};

struct CrysElem {
    CrysDesc desc;
    std::map<std::vector<i64>, PDElem> terms;  // values nonzero

    explicit CrysElem(const CrysDesc& dd) : desc(dd) {}
};

inline CrysElem cr_zero(const CrysDesc& dd) { return CrysElem(dd); }

inline void cr_insert(CrysElem& f, const std::vector<i64>& k, const PDElem& c) {
    if (static_cast<int>(k.size()) != f.desc.d) fail("BadParams", "exponent arity");
    auto it = f.terms.find(k);
    if (it == f.terms.end()) {
        if (!c.is_zero()) f.terms.emplace(k, c);
        return;
    }
    it->second = pd_add(it->second, c);
    if (it->second.is_zero()) f.terms.erase(it);
}

inline CrysElem cr_const(const CrysDesc& dd, const PDElem& c) {
    CrysElem f(dd);
    cr_insert(f, std::vector<i64>(dd.d, 0), c);
    return f;
}

inline CrysElem cr_one(const CrysDesc& dd) { return cr_const(dd, pd_one(dd.par)); }

inline CrysElem cr_monomial(const CrysDesc& dd, const std::vector<i64>& k, const PDElem& c) {
    CrysElem f(dd);
    cr_insert(f, k, c);
    return f;
}

inline CrysElem cr_add(const CrysElem& a, const CrysElem& b) {
    if (!(a.desc == b.desc)) fail("ParamsMismatch", "CrysElem descriptions differ");
    CrysElem r = a;
    for (const auto& [k, c] : b.terms) cr_insert(r, k, c);
    return r;
}

inline CrysElem cr_neg(const CrysElem& a) {
    CrysElem r(a.desc);
    for (const auto& [k, c] : a.terms) r.terms.emplace(k, pd_neg(c));
    return r;
}

inline CrysElem cr_sub(const CrysElem& a, const CrysElem& b) { return cr_add(a, cr_neg(b)); }

inline CrysElem cr_mul(const CrysElem& a, const CrysElem& b) {
    if (!(a.desc == b.desc)) fail("ParamsMismatch", "CrysElem descriptions differ");
    CrysElem r(a.desc);
    for (const auto& [ka, ca] : a.terms)
        for (const auto& [kb, cb] : b.terms) {
            PDElem c = pd_mul(ca, cb);
            if (c.is_zero()) continue;
            std::vector<i64> k(ka.size());
            for (size_t i = 0; i < k.size(); ++i) k[i] = ka[i] + kb[i];
            cr_insert(r, k, c);
        }
    return r;
}

inline CrysElem cr_scale_pd(const CrysElem& a, const PDElem& c) {
    CrysElem r(a.desc);
    for (const auto& [k, v] : a.terms) {
        PDElem w = pd_mul(v, c);
        if (!w.is_zero()) r.terms.emplace(k, w);
    }
    return r;
}

inline bool cr_eq(const CrysElem& a, const CrysElem& b) {
    return a.desc == b.desc && a.terms == b.terms;
}

inline bool cr_is_zero(const CrysElem& a) { return a.terms.empty(); }

// (1+mu)^k = sum_j falling(k, j) mu^[j], exact for every integer k because
// the PD truncation cuts the binomial series
inline PDElem pd_q_pow(const PDParams& pr, i64 k) {
    PDElem r(pr);
    cpp_int m = r.modulus();
    for (int j = 0; j < pr.K; ++j) {
        cpp_int c = falling(k, j) % m;
        if (c < 0) c += m;
        r.c[j] = c.convert_to<u64>();
    }
    return r;
}

// gamma_i on coefficients: U_i -> (1+mu) U_i
inline CrysElem cr_gamma(const CrysElem& f, int i) {
    if (i < 0 || i >= f.desc.d) fail("BadParams", "gamma index");
    CrysElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        PDElem w = pd_mul(c, pd_q_pow(f.desc.par, k[i]));
        if (!w.is_zero()) r.terms.emplace(k, w);
    }
    return r;
}

// d_i^log = (1/t) log(gamma_i): multiplies U^k by k_i
inline CrysElem cr_dlog(const CrysElem& f, int i) {
    if (i < 0 || i >= f.desc.d) fail("BadParams", "derivation index");
    CrysElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        PDElem w = pd_scale(c, k[i]);
        if (!w.is_zero()) r.terms.emplace(k, w);
    }
    return r;
}

// d/dU_i, so that d_i^log = U_i d/dU_i
inline CrysElem cr_dU(const CrysElem& f, int i) {
    if (i < 0 || i >= f.desc.d) fail("BadParams", "derivation index");
    CrysElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        if (k[i] == 0) continue;
        PDElem w = pd_scale(c, k[i]);
        if (w.is_zero()) continue;
        std::vector<i64> k2 = k;
        k2[i] -= 1;
        r.terms.emplace(std::move(k2), w);
    }
    return r;
}

// multiply by U_i^e
inline CrysElem cr_shift(const CrysElem& f, int i, i64 e) {
    if (i < 0 || i >= f.desc.d) fail("BadParams", "shift index");
    CrysElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        k2[i] += e;
        r.terms.emplace(std::move(k2), c);
    }
    return r;
}

// --- matrices ------------------------------------------------------------

using CrysMat = Mat<CrysElem>;

inline CrysMat crmat_zero(const CrysDesc& dd, int r, int c) {
    return CrysMat(r, c, cr_zero(dd));
}

inline CrysMat crmat_identity(const CrysDesc& dd, int n) {
    CrysMat m = crmat_zero(dd, n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = cr_one(dd);
    return m;
}

inline CrysMat crmat_add(const CrysMat& a, const CrysMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "crmat_add");
    CrysMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = cr_add(r.a[i], b.a[i]);
    return r;
}

inline CrysMat crmat_sub(const CrysMat& a, const CrysMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) fail("ShapeMismatch", "crmat_sub");
    CrysMat r = a;
    for (size_t i = 0; i < r.a.size(); ++i) r.a[i] = cr_sub(r.a[i], b.a[i]);
    return r;
}

inline CrysMat crmat_mul(const CrysMat& a, const CrysMat& b) {
    if (a.cols != b.rows || a.a.empty()) fail("ShapeMismatch", "crmat_mul");
    const CrysDesc& dd = a.a[0].desc;
    CrysMat r = crmat_zero(dd, a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const CrysElem& v = a.at(i, k);
            if (cr_is_zero(v)) continue;
            for (int j = 0; j < b.cols; ++j)
                r.at(i, j) = cr_add(r.at(i, j), cr_mul(v, b.at(k, j)));
        }
    return r;
}

inline bool crmat_eq(const CrysMat& a, const CrysMat& b) {
    if (a.rows != b.rows || a.cols != b.cols) return false;
    for (size_t i = 0; i < a.a.size(); ++i)
        if (!cr_eq(a.a[i], b.a[i])) return false;
    return true;
}

inline CrysMat crmat_gamma(const CrysMat& a, int i) {
    CrysMat r = a;
    for (CrysElem& e : r.a) e = cr_gamma(e, i);
    return r;
}

inline CrysMat crmat_dlog(const CrysMat& a, int i) {
    CrysMat r = a;
    for (CrysElem& e : r.a) e = cr_dlog(e, i);
    return r;
}

inline CrysMat crmat_dU(const CrysMat& a, int i) {
    CrysMat r = a;
    for (CrysElem& e : r.a) e = cr_dU(e, i);
    return r;
}

inline CrysMat crmat_scale_pd(const CrysMat& a, const PDElem& c) {
    CrysMat r = a;
    for (CrysElem& e : r.a) e = cr_scale_pd(e, c);
    return r;
}

inline CrysMat crmat_shift(const CrysMat& a, int i, i64 e) {
    CrysMat r = a;
    for (CrysElem& el : r.a) el = cr_shift(el, i, e);
    return r;
}

// --- the module type -------------------------------------------------------

enum class CrysForm { group, connection };

// Group form stores the matrices of the gamma_i on a basis (G_i = I mod the
// PD ideal); connection form stores the matrices L_i of the log connection.
struct CrysModule {
    CrysDesc desc;
    int n = 0;
    CrysForm form = CrysForm::group;
    std::vector<CrysMat> mats;
};

namespace detail {

inline void crys_shape(const CrysModule& m) {
    m.desc.validate();
    if (m.n < 1 || static_cast<int>(m.mats.size()) != m.desc.d)
        fail("BadParams", "one matrix per variable is required");
    for (const CrysMat& g : m.mats) {
        if (g.rows != m.n || g.cols != m.n) fail("BadParams", "matrix shape");
        for (const CrysElem& e : g.a)
            if (!(e.desc == m.desc)) fail("ParamsMismatch", "entry description");
    }
}

// every PD coefficient of every Laurent term of (g - id) lies in the PD ideal
inline bool trivial_mod_mu(const CrysMat& g, const CrysDesc& dd) {
    CrysMat x = crmat_sub(g, crmat_identity(dd, g.rows));
    for (const CrysElem& e : x.a)
        for (const auto& [k, c] : e.terms)
            if (c.c[0] % c.modulus() != 0) return false;
    return true;
}

}  // namespace detail

inline bool crys_commutes(const CrysModule& m) {
    for (int i = 0; i < m.desc.d; ++i)
        for (int j = i + 1; j < m.desc.d; ++j) {
            CrysMat lhs = crmat_mul(m.mats[i], crmat_gamma(m.mats[j], i));
            CrysMat rhs = crmat_mul(m.mats[j], crmat_gamma(m.mats[i], j));
            if (!crmat_eq(lhs, rhs)) return false;
        }
    return true;
}

inline bool crys_flat(const CrysModule& m) {
    for (int i = 0; i < m.desc.d; ++i)
        for (int j = i + 1; j < m.desc.d; ++j) {
            CrysMat lhs =
                crmat_add(crmat_dlog(m.mats[j], i), crmat_mul(m.mats[i], m.mats[j]));
            CrysMat rhs =
                crmat_add(crmat_dlog(m.mats[i], j), crmat_mul(m.mats[j], m.mats[i]));
            if (!crmat_eq(lhs, rhs)) return false;
        }
    return true;
}

inline void crys_validate(const CrysModule& m) {
    detail::crys_shape(m);
    if (m.form == CrysForm::group) {
        for (const CrysMat& g : m.mats)
            if (!detail::trivial_mod_mu(g, m.desc))
                fail("NotTrivialModMu", "group matrix is not I mod mu");
        if (!crys_commutes(m)) fail("NotCommuting", "gamma matrices do not commute");
    } else {
        if (!crys_flat(m)) fail("NotFlat", "log connection is not flat");
    }
}

// --- the dictionary ----------------------------------------------------------

// gamma_i = exp(t nabla_i) with nabla_i = d_i^log + L_i:
// G_i = sum_{m<K} gamma_m(t) R_m, R_0 = I, R_{m+1} = d_i^log(R_m) + L_i R_m.
// gamma_m(t) = t^m/m! is PD-integral, so no division occurs.
inline CrysMat exp_action_mat(const CrysDesc& dd, const CrysMat& L, int i) {
    PDElem t = pd_log_q(dd.par);
    CrysMat g = crmat_identity(dd, L.rows);
    CrysMat r = crmat_identity(dd, L.rows);
    for (int m = 1; m < dd.par.K; ++m) {
        r = crmat_add(crmat_dlog(r, i), crmat_mul(L, r));
        g = crmat_add(g, crmat_scale_pd(r, pd_gamma(t, m)));
    }
    return g;
}

inline CrysModule exp_action(const CrysModule& L) {
    detail::crys_shape(L);
    if (L.form != CrysForm::connection) fail("BadParams", "exp_action needs the L-form");
    CrysModule out{L.desc, L.n, CrysForm::group, {}};
    for (int i = 0; i < L.desc.d; ++i)
        out.mats.push_back(exp_action_mat(L.desc, L.mats[i], i));
    return out;
}

// gamma_i = sum_{m<K} mu^[m] U_i^m nabla_i^m in non-log coordinates
// (nabla_i = d/dU_i + U_i^{-1} L_i): S_0 = I, S_{m+1} = dU_i(S_m) + N_i S_m.
// Agrees with exp_action by the falling-factorial identity behind
// verify_log_identity, applied to the single operator U_i nabla_i.
inline CrysModule dp_action_formula(const CrysModule& L) {
    detail::crys_shape(L);
    if (L.form != CrysForm::connection)
        fail("BadParams", "dp_action_formula needs the L-form");
    CrysModule out{L.desc, L.n, CrysForm::group, {}};
    const PDParams& pr = L.desc.par;
    for (int i = 0; i < L.desc.d; ++i) {
        CrysMat ni = crmat_shift(L.mats[i], i, -1);
        CrysMat g = crmat_identity(L.desc, L.n);
        CrysMat s = crmat_identity(L.desc, L.n);
        for (int m = 1; m < pr.K; ++m) {
            s = crmat_add(crmat_dU(s, i), crmat_mul(ni, s));
            PDElem mum(pr);
            mum.c[m] = 1;
            g = crmat_add(g, crmat_shift(crmat_scale_pd(s, mum), i, m));
        }
        out.mats.push_back(std::move(g));
    }
    return out;
}

// Triangular slotwise solve of exp_action(L) = G.  With L known below PD
// slot j, the mu^[j+1] component of G - exp_action(L) equals (j+1) times
// slot j of the missing increment; dividing by j+1 pins that slot mod
// p^{N - v_p(j+1)}.  The canonical representative is chosen, the ambiguity
// is recorded per slot, and the result satisfies exp_action(L) = G on the
// nose whenever every slot division succeeds.
struct LogResult {
    CrysModule L;
    std::vector<u64> slot_modulus;  // slot j of every entry determined mod this
};

inline LogResult log_conn(const CrysModule& G, int min_prec = 1) {
    detail::crys_shape(G);
    if (G.form != CrysForm::group) fail("BadParams", "log_conn needs the G-form");
    const CrysDesc& dd = G.desc;
    const PDParams& pr = dd.par;
    u64 pmod = upow(static_cast<u64>(pr.p), pr.N);
    for (const CrysMat& g : G.mats)
        if (!detail::trivial_mod_mu(g, dd))
            fail("NotTrivialModMu", "group matrix is not I mod mu");

    LogResult res{CrysModule{dd, G.n, CrysForm::connection, {}},
                  std::vector<u64>(pr.K, 1)};
    for (int j = 0; j + 1 < pr.K; ++j) {
        int v = valuation(static_cast<u64>(j + 1), static_cast<u64>(pr.p), pr.N);
        res.slot_modulus[j] = upow(static_cast<u64>(pr.p), pr.N - v);
        if (pr.N - v < min_prec)
            fail("TDivisionAmbiguous", "slot " + std::to_string(j) +
                                           " of the log is only defined mod p^" +
                                           std::to_string(pr.N - v));
    }

    ZModCtx cx(static_cast<u64>(pr.p), pr.N);
    for (int i = 0; i < dd.d; ++i) {
        CrysMat L = crmat_zero(dd, G.n, G.n);
        for (int j = 0; j + 1 < pr.K; ++j) {
            CrysMat defect = crmat_sub(G.mats[i], exp_action_mat(dd, L, i));
            int v = valuation(static_cast<u64>(j + 1), static_cast<u64>(pr.p), pr.N);
            u64 pv = upow(static_cast<u64>(pr.p), v);
            u64 unit = static_cast<u64>(j + 1) / pv;
            for (int r = 0; r < G.n; ++r)
                for (int c = 0; c < G.n; ++c)
                    for (const auto& [k, pd] : defect.at(r, c).terms) {
                        u64 coef = pd.c[j + 1] % pmod;
                        if (coef == 0) continue;
                        if (coef % pv != 0)
                            fail("TDivisionAmbiguous",
                                 "no exact logarithm: PD slot " + std::to_string(j + 1) +
                                     " is not divisible by its index");
                        PDElem add(pr);
                        add.c[j] = cx.mul(cx.inv(unit % pmod), coef / pv);
                        cr_insert(L.at(r, c), k, add);
                    }
        }
        // the triangular solve zeroes every slot below K; this cannot fire
        if (!crmat_eq(exp_action_mat(dd, L, i), G.mats[i]))
            fail("TDivisionAmbiguous", "no exact logarithm at this truncation");
        res.L.mats.push_back(std::move(L));
    }
    return res;
}

// t = mu * unit holds in the truncated model exactly when K <= p: the
// slotwise division of t by mu divides (m-1)! by m for every m < K, and
// m = p is the first index that is not a unit.
inline bool pd_t_is_mu_times_unit(const PDParams& pr) {
    PDElem t = pd_log_q(pr);
    try {
        PdSolveResult s = pd_solve_mu(t);
        if (s.x.c[0] % upow(static_cast<u64>(pr.p), pr.N) == 0) return false;
        return pd_mul(pd_mu(pr), s.x) == t;
    } catch (const qp_error&) {
        return false;
    }
}

// --- filtered lattice combinatorics ----------------------------------------

// Desk model of a filtered module: Z^n with a distinguished integer f >= 2,
// a window [r_lo, r_hi], and a full-rank lattice per window slot.
// Fil^r is the whole module below the window and f^{r-r_hi} Fil^{r_hi}
// above it.  Decreasing is enforced; multiplicativity is not, because
// saturation is the operation that repairs its failure.
struct FilteredModule {
    int n = 0;
    cpp_int f;
    int r_lo = 0, r_hi = 0;
    std::vector<MatZ> fil;  // canonical column bases, one per window slot
};

inline MatZ fm_free(int n) { return mat_identity<cpp_int>(n); }

inline MatZ latz_scale(const MatZ& a, const cpp_int& c) {
    MatZ r = a;
    for (auto& x : r.a) x *= c;
    return r;
}

// divide every entry by c; the caller guarantees exactness
inline MatZ latz_divide(const MatZ& a, const cpp_int& c) {
    MatZ r = a;
    for (auto& x : r.a) {
        if (x % c != 0) fail("InternalError", "inexact lattice division");
        x /= c;
    }
    return r;
}

inline bool latz_subset(const MatZ& a, const MatZ& b) {
    for (int j = 0; j < a.cols; ++j) {
        std::vector<cpp_int> v(a.rows);
        for (int i = 0; i < a.rows; ++i) v[i] = a.at(i, j);
        if (!lat_member(b, v)) return false;
    }
    return true;
}

inline MatZ matz_mul(const MatZ& a, const MatZ& b) {
    if (a.cols != b.rows) fail("ShapeMismatch", "matz_mul");
    MatZ r(a.rows, b.cols, cpp_int(0));
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            if (a.at(i, k) == 0) continue;
            for (int j = 0; j < b.cols; ++j) r.at(i, j) += a.at(i, k) * b.at(k, j);
        }
    return r;
}

inline FilteredModule fm_make(int n, const cpp_int& f, int r_lo, std::vector<MatZ> gens) {
    if (n < 1) fail("BadParams", "rank must be positive");
    if (f < 2) fail("BadParams", "f must be an integer >= 2");
    if (gens.empty()) fail("BadParams", "empty window");
    FilteredModule F{n, f, r_lo, r_lo + static_cast<int>(gens.size()) - 1, {}};
    for (MatZ& g : gens) {
        if (g.rows != n) fail("BadParams", "generator shape");
        MatZ b = lat_basis(g);
        if (b.cols != n) fail("BadParams", "window lattices must have full rank");
        F.fil.push_back(std::move(b));
    }
    for (size_t i = 0; i + 1 < F.fil.size(); ++i)
        if (!latz_subset(F.fil[i + 1], F.fil[i]))
            fail("BadParams", "filtration is not decreasing");
    return F;
}

// Fil^r with the window conventions applied (r may lie outside the window)
inline MatZ fm_fil(const FilteredModule& F, int r) {
    if (r < F.r_lo) return fm_free(F.n);
    if (r <= F.r_hi) return F.fil[static_cast<size_t>(r - F.r_lo)];
    return latz_scale(F.fil.back(), cpow(F.f, r - F.r_hi));
}

inline bool fm_multiplicative(const FilteredModule& F) {
    // outside [r_lo-1, r_hi-1] the conventions make f Fil^r = Fil^{r+1} or finer
    for (int r = F.r_lo - 1; r < F.r_hi; ++r)
        if (!latz_subset(latz_scale(fm_fil(F, r), F.f), fm_fil(F, r + 1))) return false;
    return true;
}

inline void fm_require_multiplicative(const FilteredModule& F) {
    if (!fm_multiplicative(F))
        fail("NotMultiplicative", "f Fil^r is not contained in Fil^{r+1}");
}

inline bool fm_eq(const FilteredModule& F, const FilteredModule& G) {
    if (F.n != G.n || F.f != G.f) return false;
    int lo = std::min(F.r_lo, G.r_lo), hi = std::max(F.r_hi, G.r_hi);
    for (int r = lo; r <= hi; ++r)
        if (!lat_equal(fm_fil(F, r), fm_fil(G, r))) return false;
    return true;
}

// N^+ = union over r of f^{-r} Fil^r inside N[1/f], stored as an integer
// lattice with a denominator.  The union is a lattice sum over the window
// plus the first below-window term; above-window terms add nothing.
struct PlusModule {
    int n = 0;
    cpp_int f;
    MatZ gens;  // N^+ = f^{-denom} (column span of gens)
    int denom = 0;
};

inline PlusModule plus_module(const FilteredModule& F) {
    MatZ acc = latz_scale(fm_free(F.n), cpow(F.f, F.r_hi - F.r_lo + 1));
    for (int r = F.r_lo; r <= F.r_hi; ++r)
        acc = lat_sum(acc, latz_scale(fm_fil(F, r), cpow(F.f, F.r_hi - r)));
    return PlusModule{F.n, F.f, lat_basis(acc), F.r_hi};
}

inline bool plus_eq(const PlusModule& a, const PlusModule& b) {
    if (a.n != b.n || a.f != b.f) return false;
    int m = std::max(a.denom, b.denom);
    return lat_equal(latz_scale(a.gens, cpow(a.f, m - a.denom)),
                     latz_scale(b.gens, cpow(b.f, m - b.denom)));
}

// f^r N^+ intersected with N, as an integer lattice
inline MatZ plus_slice(const PlusModule& P, int r) {
    int s = P.denom - r;
    if (s <= 0) return lat_basis(latz_scale(P.gens, cpow(P.f, -s)));
    cpp_int fs = cpow(P.f, s);
    MatZ cut = lat_intersect(P.gens, latz_scale(fm_free(P.n), fs));
    return lat_basis(latz_divide(cut, fs));
}

// Fil_sat^r = f^r N^+ cap N over the same window.  The output is always
// decreasing and multiplicative, and contains the input slotwise.
inline FilteredModule saturate(const FilteredModule& F) {
    PlusModule P = plus_module(F);
    FilteredModule S{F.n, F.f, F.r_lo, F.r_hi, {}};
    for (int r = F.r_lo; r <= F.r_hi; ++r) S.fil.push_back(plus_slice(P, r));
    return S;
}

inline bool is_saturated(const FilteredModule& F) { return fm_eq(F, saturate(F)); }

// Fil^r := f^r P cap N with the window chosen so both conventions hold:
// r_hi is the least r with f^r P inside N, r_lo - 1 the greatest r with
// f^r P containing N.  P must contain f^e N for some e, i.e. the quotient
// N / (integral part of P) must be f-power torsion.
inline FilteredModule from_plus(int n, const PlusModule& P) {
    if (n != P.n) fail("BadParams", "rank mismatch");
    if (P.n < 1 || P.f < 2) fail("BadParams", "from_plus input");
    MatZ basis = lat_basis(P.gens);
    if (basis.cols != P.n) fail("BadParams", "plus module must have full rank");

    // exponent bound: every elementary divisor must divide a power of f
    std::vector<cpp_int> inv = snf_z(basis);
    cpp_int divs = 1;
    for (const cpp_int& x : inv) divs *= x;
    int e_cap = 0;
    while (divs != 1) {
        cpp_int g = gcd(divs, P.f);
        if (g == 1) fail("BadParams", "plus module is not commensurable along f");
        divs /= g;
        ++e_cap;
    }

    int s_top = 0;
    {
        MatZ cur = basis;
        for (;;) {
            bool div = true;
            for (const auto& x : cur.a)
                if (x % P.f != 0) {
                    div = false;
                    break;
                }
            if (!div) break;
            cur = latz_divide(cur, P.f);
            ++s_top;
        }
    }
    int r_hi = P.denom - s_top;

    int r = r_hi;
    while (!latz_subset(latz_scale(fm_free(P.n), cpow(P.f, P.denom - r)), basis)) {
        --r;
        if (P.denom - r > e_cap + s_top + 1)
            fail("InternalError", "window scan exceeded its bound");
    }
    int r_lo = std::min(r + 1, r_hi);

    std::vector<MatZ> gens;
    for (int rr = r_lo; rr <= r_hi; ++rr) gens.push_back(plus_slice(P, rr));
    return fm_make(P.n, P.f, r_lo, std::move(gens));
}

// v with f v in Fil^{r+1} already lies in Fil^r; saturated filtrations
// satisfy this at every level
inline bool fm_f_division_step(const FilteredModule& F, int r) {
    MatZ up = lat_intersect(fm_fil(F, r + 1), latz_scale(fm_free(F.n), F.f));
    return lat_equal(lat_basis(latz_divide(up, F.f)), fm_fil(F, r));
}

inline bool fm_f_division(const FilteredModule& F) {
    for (int r = F.r_lo - 1; r <= F.r_hi; ++r)
        if (!fm_f_division_step(F, r)) return false;
    return true;
}

// P Fil^r inside Fil^{r-1} for every level; outside [r_lo, r_hi+1] this is
// automatic for integer P on a multiplicative filtration
inline bool griffiths_transversal(const FilteredModule& F, const MatZ& P) {
    fm_require_multiplicative(F);
    if (P.rows != F.n || P.cols != F.n) fail("BadParams", "operator shape");
    for (int r = F.r_lo; r <= F.r_hi + 1; ++r) {
        MatZ img = matz_mul(P, fm_fil(F, r));
        if (!latz_subset(img, fm_fil(F, r - 1))) return false;
    }
    return true;
}

// sum_{m=1}^{bound} (-1)^{m-1} f^{m-1} P^m: the lattice shadow of the series
// converting one transversal operator into the other; multiplicativity makes
// each term f^{m-1} P^m drop filtration by at most one step
inline MatZ log_series_matrix(const cpp_int& f, const MatZ& P, int bound) {
    if (P.rows != P.cols) fail("BadParams", "square operator required");
    if (bound < 1) fail("BadParams", "series bound must be positive");
    MatZ acc(P.rows, P.cols, cpp_int(0));
    MatZ pw = mat_identity<cpp_int>(P.rows);
    cpp_int coef = 1;
    for (int m = 1; m <= bound; ++m) {
        pw = matz_mul(pw, P);
        for (size_t i = 0; i < acc.a.size(); ++i) acc.a[i] += coef * pw.a[i];
        coef = -coef * f;
    }
    return acc;
}

}  // namespace qprism
