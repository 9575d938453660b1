#pragma once
// Frobenius transport between q-Higgs modules over the twisted coordinate
// algebra and q-connections over the untwisted one, the alpha operators
// controlling the non-integral components, quasi-nilpotence certificates,
// the filtered descent (pull) recovering a Higgs module from a connection
// with effective Frobenius, and the Koszul embedding of the Higgs complex
// into the de Rham complex of the pushed module.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>

#include "qconn.hpp"

namespace qprism {

inline AlgebraDesc simpson_untwist(const AlgebraDesc& dd) {
    AlgebraDesc r = dd;
    r.twist = 0;
    r.level = 0;
    return r;
}

inline AlgebraDesc simpson_twist(const AlgebraDesc& dd) {
    if (dd.twist != 0 || dd.level != 0) fail("BadParams", "expected an untwisted integral algebra");
    AlgebraDesc r = dd;
    r.twist = 1;
    return r;
}

// ---------------------------------------------------------------------------
// push: base change along the relative Frobenius F (coefficient-preserving)

inline QConnModule push(const QHiggsModule& h) {
    qm_validate(h);
    QConnModule out{simpson_untwist(h.desc), h.n, {}};
    for (const LMat& t : h.T)
        out.B.push_back(lmat_map(t, rel_frobenius_F));
    return out;
}

// F o phi^(1) = phi o F, so the witness identity and horizontality transport
// entrywise with r, c unchanged.
inline std::pair<QConnModule, FrobStructure> push(const QHiggsModule& h,
                                                  const FrobStructure& fs) {
    QConnModule out = push(h);
    FrobStructure fsn{lmat_map(fs.P, rel_frobenius_F), fs.r,
                      lmat_map(fs.Q, rel_frobenius_F), fs.c};
    return {std::move(out), std::move(fsn)};
}

// ---------------------------------------------------------------------------
// non-logarithmic coordinates and mod-p components

// U^{-e_i} Theta_i^log; exponents drift downward under iteration.
inline LMat nonlog_apply(const std::vector<LMat>& fam, int i, const LMat& col) {
    const AlgebraDesc& dd = col.a.front().desc;
    std::vector<i64> sh(dd.d, 0);
    sh[i] = -1;
    return lmat_scale(semilinear_op(fam[i], i, col), l_monomial(dd, sh, q_one(dd.par)));
}

inline LMat theta_nonlog(const QHiggsModule& h, int i, const LMat& col) {
    return nonlog_apply(h.T, i, col);
}
inline LMat nabla_nonlog(const QConnModule& n, int i, const LMat& col) {
    return nonlog_apply(n.B, i, col);
}

inline LaurentElem dq_nonlog(int i, const LaurentElem& f) {
    std::vector<i64> sh(f.desc.d, 0);
    sh[i] = -1;
    return l_mul(dq_log(i, f), l_monomial(f.desc, sh, q_one(f.desc.par)));
}

// Terms of f whose exponent vector is congruent to k mod p.
inline LaurentElem l_component_mod_p(const LaurentElem& f, const std::vector<i64>& k) {
    i64 p = f.desc.par.p;
    LaurentElem r(f.desc);
    for (const auto& [e, c] : f.terms) {
        bool match = true;
        for (size_t i = 0; i < e.size(); ++i) {
            i64 d = (e[i] - k[i]) % p;
            match &= (d == 0);
        }
        if (match) r.terms.emplace(e, c);
    }
    return r;
}

// ---------------------------------------------------------------------------
// alpha operators: q^k Theta_i^log + [k]_q on the component U^k, 0 < k < p

struct AlphaOp {
    LMat mat;                      // q^k T_i + [k]_q I
    std::optional<LMat> mat_inv;   // present when the matrix itself is a unit
    Mat<u64> act;                  // flattened operator on the window
    Mat<u64> act_inv;
};

inline LMat alpha_apply(const QHiggsModule& h, int i, i64 k, const LMat& col) {
    const RingParams& pr = h.desc.par;
    QElem qk = q_pow_frac(pr, k, 0);
    QElem kq = q_analog(pr, k, 0);
    return lmat_add(lmat_scale_q(semilinear_op(h.T[i], i, col), qk),
                    lmat_scale_q(col, kq));
}

inline AlphaOp alpha(const QHiggsModule& h, int i, i64 k, const MonomialWindow& win) {
    qm_validate(h);
    const RingParams& pr = h.desc.par;
    if (i < 0 || i >= h.desc.d) fail("BadParams", "variable index out of range");
    if (k < 1 || k >= pr.p) fail("BadParams", "alpha needs 1 <= k <= p-1");
    QElem qk = q_pow_frac(pr, k, 0);
    QElem kq = q_analog(pr, k, 0);
    AlphaOp out;
    out.mat = lmat_add(lmat_scale_q(h.T[i], qk),
                       lmat_scale_q(lmat_identity(h.desc, h.n), kq));
    out.mat_inv = lmat_inverse(out.mat);
    out.act = detail::window_action_impl(
        h.desc, h.n, win, [&](const LMat& col) { return alpha_apply(h, i, k, col); });
    ZModCtx cx(static_cast<u64>(pr.p), pr.N);
    auto inv = zmod_inverse(cx, out.act);
    if (!inv) {
        auto ker = zmod_kernel(cx, out.act);
        fail("Singular", "alpha operator not invertible on the window at i=" +
                             std::to_string(i) + " k=" + std::to_string(k) +
                             " (kernel generated by " + std::to_string(ker.size()) +
                             " vectors)");
    }
    out.act_inv = *inv;
    return out;
}

// ---------------------------------------------------------------------------
// quasi-nilpotence certificates

namespace detail {

// Membership in [p]_q within the stamped precision of c.
inline bool member_pq(const QElem& c) {
    if (c.is_zero()) return true;
    try {
        divide_exact(c, q_tilde_xi(c.par));
        return true;
    } catch (const qp_error& e) {
        if (e.code() == "NotDivisible" || e.code() == "PrecisionExhausted") return false;
        throw;
    }
}

// (p, [p]_q) = (p, v^{(p-1) p^s}): the stored coefficients below the v-cut
// must vanish mod p.
inline bool member_p_pq(const QElem& c) {
    i64 cut = (c.par.p - 1) * ipow(c.par.p, c.par.s);
    u64 p = static_cast<u64>(c.par.p);
    for (int j = 0; j < c.par.M && j < cut; ++j)
        if (c.c[j] % p != 0) return false;
    return true;
}

inline bool member_col(const LMat& col, const std::string& mode) {
    for (const LaurentElem& f : col.a)
        for (const auto& [k, c] : f.terms) {
            bool ok = (mode == "[p]_q") ? member_pq(c) : member_p_pq(c);
            if (!ok) return false;
        }
    return true;
}

}  // namespace detail

// Iterates the non-logarithmic operator on each basis vector and tests ideal
// membership coefficientwise.  true: membership reached for every basis
// vector and direction.  false: an iterate is a non-member fixed point, so no
// further step can change the answer.  BoundExceeded: inconclusive.
inline bool nilpotent_family(const AlgebraDesc& dd, int n, const std::vector<LMat>& fam,
                             const std::string& mode, int bound) {
    if (mode != "[p]_q" && mode != "(p,[p]_q)") fail("BadParams", "unknown ideal mode");
    if (bound < 1) fail("BadParams", "bound must be positive");
    for (int t = 0; t < n; ++t)
        for (int i = 0; i < dd.d; ++i) {
            LMat col = lmat_zero(dd, n, 1);
            col.at(t, 0) = l_one(dd);
            for (int step = 1;; ++step) {
                LMat nxt = nonlog_apply(fam, i, col);
                if (detail::member_col(nxt, mode)) break;
                if (lmat_eq(nxt, col)) return false;
                if (step == bound)
                    fail("BoundExceeded", "no membership certificate within " +
                                              std::to_string(bound) + " steps at basis " +
                                              std::to_string(t) + " direction " +
                                              std::to_string(i));
                col = std::move(nxt);
            }
        }
    return true;
}

inline bool check_nilpotent(const QHiggsModule& h, const std::string& mode, int bound) {
    qm_validate(h);
    return nilpotent_family(h.desc, h.n, h.T, mode, bound);
}
inline bool check_nilpotent(const QConnModule& n, const std::string& mode, int bound) {
    qm_validate(n);
    return nilpotent_family(n.desc, n.n, n.B, mode, bound);
}

// ---------------------------------------------------------------------------
// pull: recover a Higgs module from a connection with effective Frobenius

struct NygaardConfig {
    int b = -1;            // filtration exponent; negative means c - r from the witness
    int degree_bound = 4;  // exponent box half-width for the section search
};

struct PullResult {
    QHiggsModule H;
    std::optional<FrobStructure> fs;
    LMat basis;  // columns: the chosen basis of the intersection, in phi* coords
    LMat iso;    // V with psi(V e_t) = basis column t; push(H) -> N after scaling
    int b = 0;
    std::string note;
};

namespace detail {

// Dense coordinates for column vectors over the Laurent algebra supported on
// a fixed monomial box: (component, monomial, v power).
struct BoxIndex {
    std::vector<std::vector<i64>> mons;
    std::map<std::vector<i64>, int> pos;
    int n = 0, M = 0;

    int cols() const { return n * static_cast<int>(mons.size()) * M; }
    int col(int j, int mi, int b) const {
        return (j * static_cast<int>(mons.size()) + mi) * M + b;
    }
};

inline BoxIndex box_index(int d, int n, int M, i64 lo, i64 hi) {
    BoxIndex bx;
    bx.n = n;
    bx.M = M;
    std::vector<i64> cur(d, lo);
    for (;;) {
        bx.pos.emplace(cur, static_cast<int>(bx.mons.size()));
        bx.mons.push_back(cur);
        int i = 0;
        while (i < d && ++cur[i] > hi) cur[i++] = lo;
        if (i == d) break;
    }
    return bx;
}

// Row bookkeeping for the product coordinates psi * f.
struct RowIndex {
    std::map<std::pair<int, std::vector<i64>>, int> mono;  // (component, monomial) -> base
    int M = 0;
    int rows = 0;

    int row(int i, const std::vector<i64>& k) {
        auto key = std::make_pair(i, k);
        auto it = mono.find(key);
        if (it == mono.end()) {
            it = mono.emplace(key, rows).first;
            rows += M;
        }
        return it->second;
    }
};

inline bool mono_integral(const std::vector<i64>& k, i64 p) {
    for (i64 x : k)
        if (x % p != 0) return false;
    return true;
}

// Coefficient matrix of f |-> psi * f on the box coordinates.
inline Mat<u64> psi_product_matrix(const LMat& psi, const BoxIndex& bx, RowIndex& rx) {
    const AlgebraDesc& dd = psi.a.front().desc;
    u64 mod = upow(static_cast<u64>(dd.par.p), dd.par.N);
    int M = dd.par.M;
    rx.M = M;
    std::vector<i64> zero(dd.d, 0);
    for (int i = 0; i < psi.rows; ++i) rx.row(i, zero);  // keep unit-vector targets addressable
    std::vector<std::tuple<int, int, u64>> entries;
    for (int i = 0; i < psi.rows; ++i)
        for (int j = 0; j < psi.cols; ++j)
            for (const auto& [kp, cp] : psi.at(i, j).terms)
                for (size_t mi = 0; mi < bx.mons.size(); ++mi) {
                    std::vector<i64> km(dd.d);
                    for (int a = 0; a < dd.d; ++a) km[a] = kp[a] + bx.mons[mi][a];
                    int rbase = rx.row(i, km);
                    for (int b = 0; b < M; ++b)
                        for (int t = 0; t + b < M; ++t) {
                            u64 v = cp.c[t] % mod;
                            if (v == 0) continue;
                            entries.emplace_back(rbase + t + b,
                                                 bx.col(j, static_cast<int>(mi), b), v);
                        }
                }
    Mat<u64> A(rx.rows, bx.cols(), 0);
    for (auto& [r, c, v] : entries) A.at(r, c) = (A.at(r, c) + v) % mod;
    return A;
}

inline LMat column_from_solution(const AlgebraDesc& dd, const BoxIndex& bx,
                                 const std::vector<u64>& sol) {
    const RingParams& pr = dd.par;
    u64 mod = upow(static_cast<u64>(pr.p), pr.N);
    LMat f = lmat_zero(dd, bx.n, 1);
    for (int j = 0; j < bx.n; ++j)
        for (size_t mi = 0; mi < bx.mons.size(); ++mi) {
            QElem c(pr, pr.N, pr.M, true);
            bool nz = false;
            for (int b = 0; b < bx.M; ++b) {
                c.c[b] = sol[bx.col(j, static_cast<int>(mi), b)] % mod;
                nz |= (c.c[b] != 0);
            }
            if (!nz) continue;
            c.canonicalize();
            l_insert(f.at(j, 0), bx.mons[mi], c);
        }
    return f;
}

}  // namespace detail

// Normative steps: (1) section psi = phi(Q) of the Frobenius, scaled so that
// phi_N o psi = [p]_q^b; (2) candidate generators psi(e_k); (3) basis of
// psi(N) intersected with the integral part; (4) Theta from the restriction
// of the pulled-back connection; (5) witness matrix.  When psi is invertible
// the canonical integral basis spans the intersection and the solve is the
// exact inversion; otherwise the basis is searched by bounded-degree linear
// algebra over Z/p^N.  The Frobenius structure transports exactly along the
// canonical basis when r = c = 0.
inline PullResult pull(const QConnModule& nmod, const FrobStructure& fs,
                       const NygaardConfig& cfg = {}) {
    qm_validate(nmod);
    const AlgebraDesc& dd = nmod.desc;
    const RingParams& pr = dd.par;
    if (fs.c - fs.r < 0) fail("BadExponentB", "witness exponent c - r is negative");
    int b = cfg.b >= 0 ? cfg.b : fs.c - fs.r;
    if (cfg.degree_bound < 0) fail("BadParams", "degree bound must be nonnegative");

    LMat psi = lmat_map(fs.Q, frob_endo);
    PullResult out;
    out.b = b;
    LMat G = lmat_identity(dd, nmod.n);
    LMat fmat = lmat_zero(dd, nmod.n, nmod.n);
    bool canonical = false;
    if (auto psinv = lmat_inverse(psi)) {
        canonical = true;
        fmat = std::move(*psinv);
    }

    if (!canonical) {
        // general search: kill the non-integral product coordinates
        detail::BoxIndex bx =
            detail::box_index(dd.d, nmod.n, pr.M, -cfg.degree_bound, cfg.degree_bound);
        detail::RowIndex rx;
        Mat<u64> A = detail::psi_product_matrix(psi, bx, rx);
        ZModCtx cx(static_cast<u64>(pr.p), pr.N);
        std::vector<int> keep;
        for (const auto& [key, rbase] : rx.mono)
            if (!detail::mono_integral(key.second, pr.p))
                for (int bb = 0; bb < rx.M; ++bb) keep.push_back(rbase + bb);
        Mat<u64> Af(static_cast<int>(keep.size()), A.cols, 0);
        for (size_t r = 0; r < keep.size(); ++r)
            for (int c = 0; c < A.cols; ++c) Af.at(static_cast<int>(r), c) = A.at(keep[r], c);
        auto gens = zmod_kernel(cx, Af);
        std::vector<std::pair<LMat, LMat>> cands;  // (h over A, f)
        for (const auto& g : gens) {
            LMat f = detail::column_from_solution(dd, bx, g);
            LMat h = lmat_mul(psi, f);
            // the basis is a choice of representatives: stored-zero slack at
            // non-integral exponents is dropped, nonzero slack disqualifies
            bool ok = true, nz = false;
            for (LaurentElem& e : h.a) {
                for (auto it = e.terms.begin(); it != e.terms.end();) {
                    if (!detail::mono_integral(it->first, pr.p)) {
                        if (!it->second.is_zero()) { ok = false; break; }
                        it = e.terms.erase(it);
                    } else
                        ++it;
                }
                if (!ok) break;
                nz |= !e.is_zero();
            }
            if (!ok || !nz) continue;
            bool dup = false;
            for (const auto& [hc, fc] : cands) dup |= lmat_eq(hc, h);
            if (!dup) cands.emplace_back(std::move(h), std::move(f));
        }
        if (static_cast<int>(cands.size()) < nmod.n)
            fail("NoBasisWithinBound", "raise the degree bound");
        std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
            auto weight = [](const LMat& m) {
                size_t w = 0;
                for (const LaurentElem& e : m.a) w += e.terms.size();
                return w;
            };
            return weight(a.first) < weight(b.first);
        });
        size_t cap = std::min<size_t>(cands.size(), 12);
        std::vector<int> pick(nmod.n, 0);
        bool found = false;
        std::function<bool(int, size_t)> search = [&](int depth, size_t from) {
            if (depth == nmod.n) {
                LMat gtry = lmat_zero(dd, nmod.n, nmod.n);
                for (int t = 0; t < nmod.n; ++t)
                    for (int j = 0; j < nmod.n; ++j)
                        gtry.at(j, t) = cands[pick[t]].first.at(j, 0);
                LMat ghat = lmat_map(gtry, rel_frobenius_F_inv);
                if (!lmat_inverse(ghat)) return false;
                G = std::move(gtry);
                for (int t = 0; t < nmod.n; ++t)
                    for (int j = 0; j < nmod.n; ++j)
                        fmat.at(j, t) = cands[pick[t]].second.at(j, 0);
                return true;
            }
            for (size_t c = from; c < cap; ++c) {
                pick[depth] = static_cast<int>(c);
                if (search(depth + 1, c + 1)) return true;
            }
            return false;
        };
        found = search(0, 0);
        if (!found) fail("NoBasisWithinBound", "no unit basis among bounded sections");
        out.note = "basis not canonical; Frobenius structure not transported";
    }

    // Theta from the restriction of the pulled-back connection to the basis
    QElem pq = q_tilde_xi(pr);
    std::vector<LMat> bphi;
    for (const LMat& bi : nmod.B) bphi.push_back(lmat_scale_q(lmat_frob(bi), pq));
    std::optional<LMat> ginv;
    bool gid = canonical;
    QHiggsModule h{simpson_twist(dd), nmod.n, {}};
    std::vector<LMat> pushb;
    for (int i = 0; i < dd.d; ++i) {
        LMat raw = lmat_add(lmat_mul(bphi[i], lmat_gamma(i, G)), lmat_dq(i, G));
        if (!gid) {
            if (!ginv) ginv = lmat_inverse(G);
            raw = lmat_mul(*ginv, raw);
        }
        pushb.push_back(raw);
        h.T.push_back(lmat_map(raw, rel_frobenius_F_inv));
    }

    // post-condition: P G intertwines the input connection with the push
    LMat pg = lmat_mul(fs.P, G);
    for (int i = 0; i < dd.d; ++i)
        if (!lmat_eq(semilinear_op(nmod.B[i], i, pg), lmat_mul(pg, pushb[i])))
            fail("PostconditionFailed", "pulled module does not base change back");

    out.H = std::move(h);
    out.basis = std::move(G);
    out.iso = std::move(fmat);
    if (canonical && fs.r == 0 && fs.c == 0) {
        out.fs = FrobStructure{lmat_map(fs.P, twist_W), fs.r, lmat_map(fs.Q, twist_W), fs.c};
        if (!check_frob_witness(out.H.desc, *out.fs) || !check_horizontal(out.H, *out.fs))
            fail("PostconditionFailed", "transported Frobenius fails its checks");
    } else if (canonical) {
        out.note = "witness scalars with c > 0 do not transport exactly";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Koszul embedding of the Higgs complex into the de Rham complex of the push

struct EmbedResult {
    FreeComplex higgs;
    FreeComplex derham;
    std::vector<MatZ> phi;  // chain map per degree, starting at 0
    bool quasi_iso = false;
    bool complement_acyclic = false;
    std::string failure;

    bool verdict() const { return quasi_iso && complement_acyclic; }
};

inline EmbedResult higgs_derham_embed(const QHiggsModule& h, const MonomialWindow& win) {
    qm_validate(h);
    const RingParams& pr = h.desc.par;
    i64 p = pr.p;
    QConnModule nc = push(h);

    // target window: p * win shifted through all residues, so the de Rham
    // side decomposes into p^d translated copies of the source lattice
    std::vector<std::vector<i64>> mons0;
    std::vector<i64> res(h.desc.d, 0);
    for (;;) {
        for (const auto& m : win.mons) {
            std::vector<i64> k(h.desc.d);
            for (int a = 0; a < h.desc.d; ++a) k[a] = p * m[a] + res[a];
            mons0.push_back(std::move(k));
        }
        int i = 0;
        while (i < h.desc.d && ++res[i] >= p) res[i++] = 0;
        if (i == h.desc.d) break;
    }
    MonomialWindow win0 = make_window(std::move(mons0));

    EmbedResult out;
    out.higgs = qhiggs_complex(h, win);
    out.derham = qde_rham(nc, win0);

    int w1 = static_cast<int>(win.mons.size());
    int w0 = static_cast<int>(win0.mons.size());
    int M = pr.M;
    int mmh = h.n * w1 * M, mmn = h.n * w0 * M;
    MatZ phi0 = matz_zero(mmn, mmh);
    for (int t = 0; t < h.n; ++t)
        for (int wi = 0; wi < w1; ++wi) {
            std::vector<i64> k(h.desc.d);
            for (int a = 0; a < h.desc.d; ++a) k[a] = p * win.mons[wi][a];
            int wj = win0.index.at(k);
            for (int b = 0; b < M; ++b)
                phi0.at((t * w0 + wj) * M + b, (t * w1 + wi) * M + b) = 1;
        }
    auto masks = popcount_masks(h.desc.d);
    for (int deg = 0; deg <= h.desc.d; ++deg) {
        int blocks = static_cast<int>(masks[deg].size());
        MatZ ph = matz_zero(mmn * blocks, mmh * blocks);
        for (int bset = 0; bset < blocks; ++bset)
            for (int r = 0; r < mmn; ++r)
                for (int c = 0; c < mmh; ++c)
                    if (phi0.at(r, c) != 0) ph.at(bset * mmn + r, bset * mmh + c) = phi0.at(r, c);
        out.phi.push_back(std::move(ph));
    }
    out.quasi_iso = quasi_iso_check(out.higgs, out.derham, out.phi, 0);
    if (!out.quasi_iso) out.failure = "cone of the Koszul inclusion is not acyclic";

    out.complement_acyclic = true;
    std::vector<i64> k(h.desc.d, 0);
    for (;;) {
        int i = 0;
        while (i < h.desc.d && ++k[i] >= p) k[i++] = 0;
        if (i == h.desc.d) break;
        int pick = 0;
        while (k[pick] == 0) ++pick;
        try {
            alpha(h, pick, k[pick], win);
        } catch (const qp_error& e) {
            if (e.code() != "Singular") throw;
            out.complement_acyclic = false;
            out.failure = e.what();
            break;
        }
    }
    return out;
}

}  // namespace qprism
