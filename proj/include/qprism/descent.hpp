#pragma once
// 1-cocycle descent over the level-s Laurent model: validation, twisting by
// invertible matrices, and the successive-approximation algorithm that moves
// a cocycle trivial mod c1 onto the integral-exponent subalgebra.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qconn.hpp"

namespace qprism {

// Values A_i of the generators gamma_i; trivial mod c1.  The admissible pair
// satisfies c1 = c0 mu_1 with mu in (c1) and c1 in (mu_1).
struct Cocycle {
    AlgebraDesc desc;  // twist 0, level >= 1
    int n = 0;
    std::vector<LMat> A;
    QElem c0, c1;
};

inline void cocycle_shape(const Cocycle& c) {
    if (c.desc.twist != 0 || c.desc.level < 1)
        fail("BadParams", "cocycles live over the level-s algebra, twist 0");
    if (c.n < 1 || static_cast<int>(c.A.size()) != c.desc.d)
        fail("BadParams", "cocycle needs one matrix per generator");
    for (const LMat& a : c.A)
        if (a.rows != c.n || a.cols != c.n) fail("BadParams", "cocycle matrix shape");
}

inline Cocycle make_cocycle(const AlgebraDesc& dd, int n, std::vector<LMat> A) {
    const RingParams& pr = dd.par;
    Cocycle c{dd, n, std::move(A), q_xi(pr, 1), q_mu(pr)};
    cocycle_shape(c);
    return c;
}

inline Cocycle make_cocycle(const AlgebraDesc& dd, int n, std::vector<LMat> A,
                            const QElem& c0, const QElem& c1) {
    Cocycle c{dd, n, std::move(A), c0, c1};
    cocycle_shape(c);
    return c;
}

namespace detail {

// Divisibility at working precision is three-valued: besides yes/no the
// dividend's window can be too small to expose the divisor's lead term, in
// which case nothing is certifiable either way.
enum class DivStatus { yes, no, blind };

inline DivStatus div_status_q(const QElem& x, const QElem& g) {
    if (x.is_zero()) return DivStatus::yes;
    try {
        divide_exact(x, g);
        return DivStatus::yes;
    } catch (const qp_error& e) {
        if (e.code() == "NotDivisible") return DivStatus::no;
        if (e.code() == "UnrecognizedDivisor" || e.code() == "PrecisionExhausted")
            return DivStatus::blind;
        throw;
    }
}

inline DivStatus div_status_l(const LaurentElem& f, const QElem& g) {
    DivStatus st = DivStatus::yes;
    for (const auto& [k, c] : f.terms) {
        DivStatus s = div_status_q(c, g);
        if (s == DivStatus::no) return DivStatus::no;
        if (s == DivStatus::blind) st = DivStatus::blind;
    }
    return st;
}

// certified divisibility: blind counts as not certified
inline bool divisible_q(const QElem& x, const QElem& g) {
    return div_status_q(x, g) == DivStatus::yes;
}

inline bool divisible_l(const LaurentElem& f, const QElem& g) {
    return div_status_l(f, g) == DivStatus::yes;
}

inline bool mono_level_integral(const std::vector<i64>& k, i64 q) {
    for (i64 e : k)
        if (e % q != 0) return false;
    return true;
}

// split f = integral + rest by divisibility of exponents by p^level
inline std::pair<LaurentElem, LaurentElem> split_integral(const LaurentElem& f) {
    i64 q = ipow(f.desc.par.p, f.desc.level);
    LaurentElem in(f.desc), out(f.desc);
    for (const auto& [k, c] : f.terms)
        (mono_level_integral(k, q) ? in : out).terms.emplace(k, c);
    return {std::move(in), std::move(out)};
}

}  // namespace detail

// Admissible pair plus per-generator invariants: invertibility, pairwise
// compatibility A_i gamma_i(A_j) = A_j gamma_j(A_i), triviality mod c1.
inline bool validate(const Cocycle& c) {
    cocycle_shape(c);
    const RingParams& pr = c.desc.par;
    QElem mu1 = q_mu_level(pr, 1);
    if (!q_eq(c.c1, q_mul(c.c0, mu1))) return false;
    if (!detail::divisible_q(q_mu(pr), c.c1)) return false;
    if (!detail::divisible_q(c.c1, mu1)) return false;
    LMat id = lmat_identity(c.desc, c.n);
    for (int i = 0; i < c.desc.d; ++i) {
        if (!lmat_inverse(c.A[i])) return false;
        LMat dev = lmat_sub(c.A[i], id);
        for (const LaurentElem& e : dev.a)
            if (!detail::divisible_l(e, c.c1)) return false;
        for (int j = i + 1; j < c.desc.d; ++j)
            if (!lmat_eq(lmat_mul(c.A[i], lmat_gamma(i, c.A[j])),
                         lmat_mul(c.A[j], lmat_gamma(j, c.A[i]))))
                return false;
    }
    return true;
}

// (alpha X)(gamma_i) = X^{-1} A_i gamma_i(X).  Compatibility of the result
// is inherited exactly: A'_i gamma_i(A'_j) = X^{-1} A_i gamma_i(A_j)
// gamma_i gamma_j(X) and the gamma_i commute, so it is not re-checked here
// (validate does, on demand).  Triviality mod c1 is preserved only for X
// with gamma_i(X) = X mod c1 X, so that too is left to validate, not forced.
inline Cocycle twist(const Cocycle& c, const LMat& X) {
    cocycle_shape(c);
    auto xinv = lmat_inverse(X);
    if (!xinv) fail("SingularTwist", "twisting matrix is not invertible");
    Cocycle out{c.desc, c.n, {}, c.c0, c.c1};
    for (int i = 0; i < c.desc.d; ++i)
        out.A.push_back(lmat_mul(*xinv, lmat_mul(c.A[i], lmat_gamma(i, X))));
    return out;
}

struct ImproveStep {
    LMat X;
    Cocycle out;
};

// One successive-approximation step.  Requires A_i in I + c1 M_n(integral) +
// c1 c0^m M_n; returns X_m in I + c0^{m+1} M_n raising the non-integral
// defect to exponent m+1.  Y solves gamma(Y) - Y = -mu_1 rho(A) monomialwise:
// on the monomial k the divisor is gamma_weight(k_i) - 1 for the generator i
// of minimal p-adic valuation of k_i, with the division-rule precision cost.
inline ImproveStep improve_once(const Cocycle& c, int m) {
    cocycle_shape(c);
    if (m < 0) fail("BadParams", "approximation index must be nonnegative");
    const AlgebraDesc& dd = c.desc;
    const RingParams& pr = dd.par;
    QElem mu1 = q_mu_level(pr, 1);
    QElem scale = q_mul(c.c1, q_int_pow(pr, c.c0, m));
    LMat id = lmat_identity(dd, c.n);

    // defect right-hand sides -mu_1 Q per generator, keyed by monomial
    using MonoMap = std::map<std::vector<i64>, QElem>;
    std::vector<Mat<MonoMap>> rhs(dd.d, Mat<MonoMap>(c.n, c.n, MonoMap{}));
    for (int i = 0; i < dd.d; ++i) {
        LMat dev = lmat_sub(c.A[i], id);
        for (int r = 0; r < c.n; ++r)
            for (int cc = 0; cc < c.n; ++cc) {
                auto [in, rest] = detail::split_integral(dev.at(r, cc));
                detail::DivStatus si = detail::div_status_l(in, c.c1);
                if (si == detail::DivStatus::no)
                    fail("MembershipViolated", "integral deviation is not divisible by c1");
                if (si == detail::DivStatus::blind)
                    fail("PrecisionExhausted", "c1-membership is blind at working precision");
                for (const auto& [k, co] : rest.terms) {
                    if (co.is_zero()) continue;
                    try {
                        QElem val = q_mul(q_neg(mu1), divide_exact(co, scale));
                        if (!val.is_zero()) rhs[i].at(r, cc).emplace(k, std::move(val));
                    } catch (const qp_error& e) {
                        if (e.code() == std::string("NotDivisible"))
                            fail("MembershipViolated",
                                 "non-integral deviation misses exponent " + std::to_string(m));
                        if (e.code() == std::string("UnrecognizedDivisor") ||
                            e.code() == std::string("PrecisionExhausted"))
                            fail("PrecisionExhausted", "scale c1 c0^" + std::to_string(m) +
                                                           " is blind at working precision");
                        throw;
                    }
                }
            }
    }

    // p-adic valuation of the k_i, infinite at zero
    auto vp = [&](const std::vector<i64>& k, int i) {
        i64 a = k[i] < 0 ? -k[i] : k[i];
        if (a == 0) return 1 << 20;
        return valuation(static_cast<u64>(a), static_cast<u64>(pr.p), 62);
    };

    LMat y = lmat_zero(dd, c.n, c.n);
    for (int r = 0; r < c.n; ++r)
        for (int cc = 0; cc < c.n; ++cc) {
            std::vector<std::vector<i64>> monos;
            for (int i = 0; i < dd.d; ++i)
                for (const auto& [k, co] : rhs[i].at(r, cc)) monos.push_back(k);
            std::sort(monos.begin(), monos.end());
            monos.erase(std::unique(monos.begin(), monos.end()), monos.end());
            for (const auto& k : monos) {
                int pick = 0;
                for (int i = 1; i < dd.d; ++i)
                    if (vp(k, i) < vp(k, pick)) pick = i;
                auto it = rhs[pick].at(r, cc).find(k);
                if (it == rhs[pick].at(r, cc).end()) continue;
                QElem divisor = q_sub(gamma_weight(dd, k[pick]), q_one(pr));
                try {
                    QElem sol = divide_exact(it->second, divisor);
                    // stored-zero solutions pick 0 as the representative
                    if (!sol.is_zero()) l_insert(y.at(r, cc), k, sol);
                } catch (const qp_error& e) {
                    if (e.code() == std::string("UnrecognizedDivisor") ||
                        e.code() == std::string("PrecisionExhausted"))
                        fail("PrecisionExhausted",
                             "solve divisor is blind at working precision");
                    throw;
                }
            }
        }

    // A correction that is the identity in value picks exact I as its
    // representative; twisting by it would only smear stored zeros into the
    // support, so the input is passed through untouched.
    LMat X = lmat_add(id, lmat_scale_q(y, q_int_pow(pr, c.c0, m + 1)));
    bool idstep = lmat_eq(X, id);
    ImproveStep st{idstep ? id : std::move(X), Cocycle{dd, 0, {}, c.c0, c.c1}};
    st.out = idstep ? c : twist(c, st.X);

    // certified membership at exponent m+1; a blind certificate discards the
    // step, so every committed step is certified at working precision
    QElem next = q_mul(c.c1, q_int_pow(pr, c.c0, m + 1));
    for (int i = 0; i < dd.d; ++i) {
        LMat dev = lmat_sub(st.out.A[i], id);
        for (const LaurentElem& e : dev.a) {
            auto [in, rest] = detail::split_integral(e);
            detail::DivStatus s1 = detail::div_status_l(in, c.c1);
            detail::DivStatus s2 = detail::div_status_l(rest, next);
            if (!idstep && s1 == detail::DivStatus::no)
                fail("PostconditionFailed", "integral deviation left c1 after the twist");
            if (!idstep && s2 == detail::DivStatus::no)
                fail("PostconditionFailed", "defect did not reach exponent " +
                                                std::to_string(m + 1));
            if (s1 != detail::DivStatus::yes || s2 != detail::DivStatus::yes)
                fail("PrecisionExhausted", "certificate at exponent " +
                                               std::to_string(m + 1) +
                                               " is blind at working precision");
        }
    }
    return st;
}

// Largest e <= cap with the whole non-integral deviation divisible by
// c1 c0^e; -1 when even e = 0 fails.
inline int certified_defect(const Cocycle& c, int cap = -1) {
    cocycle_shape(c);
    const RingParams& pr = c.desc.par;
    if (cap < 0) cap = pr.N * pr.M;
    LMat id = lmat_identity(c.desc, c.n);
    int e = -1;
    while (e < cap) {
        QElem g = q_mul(c.c1, q_int_pow(pr, c.c0, e + 1));
        bool ok = true;
        for (int i = 0; i < c.desc.d && ok; ++i) {
            LMat dev = lmat_sub(c.A[i], id);
            for (const LaurentElem& f : dev.a)
                if (!detail::divisible_l(detail::split_integral(f).second, g)) {
                    ok = false;
                    break;
                }
        }
        if (!ok) break;
        ++e;
    }
    return e;
}

struct DescentReport {
    LMat X;
    Cocycle out;
    int m_attained = -1;  // last committed approximation index
    int defect = -1;      // certified_defect of the output (cap means vacuous)
    bool descended = false;  // residual non-integral deviation is zero in value
    int prec_n = 0;          // when descended: it vanishes mod p^prec_n
    int prec_m = 0;          // and mod v^prec_m
};

// Iterates improve_once while precision allows; X = X_0 ... X_{m_attained}.
// The output is the twist of the input by X exactly.  descended says whether
// the residual non-integral deviation is zero in value at its stamps, with
// the stamps as the precision ideal; a visible residual is instead bounded
// by the certified defect exponent.
inline DescentReport descend(const Cocycle& c) {
    cocycle_shape(c);
    const RingParams& pr = c.desc.par;
    DescentReport rep{lmat_identity(c.desc, c.n), c, -1, -1, false, 0, 0};
    int cap = pr.N * pr.M + 4;
    for (int m = 0; m <= cap; ++m) {
        std::optional<ImproveStep> st;
        try {
            st = improve_once(rep.out, m);
        } catch (const qp_error& e) {
            if (e.code() == std::string("PrecisionExhausted")) break;
            throw;
        }
        bool idstep = lmat_eq(st->X, lmat_identity(c.desc, c.n));
        rep.X = lmat_mul(rep.X, st->X);
        rep.out = std::move(st->out);
        rep.m_attained = m;
        if (idstep) break;
    }

    rep.defect = certified_defect(rep.out);
    rep.descended = true;
    rep.prec_n = pr.N;
    rep.prec_m = pr.M;
    LMat id = lmat_identity(c.desc, c.n);
    for (int i = 0; i < c.desc.d; ++i) {
        LMat dev = lmat_sub(rep.out.A[i], id);
        for (const LaurentElem& e : dev.a) {
            IntegralDecomposition dec = decompose_integral(e);
            for (const auto& [res, part] : dec.fractional)
                for (const auto& [k, co] : part.terms) {
                    if (!co.is_zero()) {
                        rep.descended = false;
                        rep.prec_n = 0;
                        rep.prec_m = 0;
                        return rep;
                    }
                    rep.prec_n = std::min(rep.prec_n, co.effN);
                    rep.prec_m = std::min(rep.prec_m, co.effM);
                }
        }
    }
    return rep;
}

}  // namespace qprism
