#include <catch2/catch_amalgamated.hpp>

#include "qprism/descent.hpp"

using namespace qprism;

namespace {

AlgebraDesc level_desc(i64 p, int N, int s, int M, int d) {
    RingParams pr{p, N, s, M};
    AlgebraDesc dd{pr, d, 0, s};
    dd.validate();
    return dd;
}

LaurentElem exp_scale(const LaurentElem& f, i64 m) {
    LaurentElem r(f.desc);
    for (const auto& [k, c] : f.terms) {
        std::vector<i64> k2 = k;
        for (i64& e : k2) e *= m;
        r.terms.emplace(std::move(k2), c);
    }
    return r;
}

LMat exp_scale(const LMat& a, i64 m) {
    LMat r = a;
    for (LaurentElem& e : r.a) e = exp_scale(e, m);
    return r;
}

// integral-exponent cocycle from a conjugated diagonal q-power action; the
// conjugator spread controls the term density of the values
Cocycle manufacture_base(Rng& rng, const AlgebraDesc& dd, int n, int spread = 0) {
    const RingParams& pr = dd.par;
    i64 q = ipow(pr.p, dd.level);
    LMat x = exp_scale(instances::random_invertible(rng, dd, n, spread), q);
    LMat xinv = *lmat_inverse(x);
    std::vector<LMat> A;
    for (int i = 0; i < dd.d; ++i) {
        LMat g0 = lmat_zero(dd, n, n);
        for (int t = 0; t < n; ++t)
            g0.at(t, t) = l_const(dd, q_pow_frac(pr, rng.range(0, 2), 0));
        A.push_back(lmat_mul(xinv, lmat_mul(g0, lmat_gamma(i, x))));
    }
    return make_cocycle(dd, n, std::move(A));
}

// perturbation with non-integral exponents only
LMat nonintegral_noise(Rng& rng, const AlgebraDesc& dd, int n) {
    i64 q = ipow(dd.par.p, dd.level);
    LMat y = lmat_zero(dd, n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            std::vector<i64> k(dd.d);
            for (int i = 0; i < dd.d; ++i) k[i] = rng.range(-2, 2);
            bool integral = true;
            for (i64 e : k) integral &= (e % q == 0);
            if (integral) k[0] += 1;
            y.at(r, c) = l_monomial(dd, k, q_from_int(dd.par, rng.range(1, 5)));
        }
    return y;
}

bool coc_eq(const Cocycle& a, const Cocycle& b) {
    if (a.n != b.n || a.A.size() != b.A.size()) return false;
    for (size_t i = 0; i < a.A.size(); ++i)
        if (!lmat_eq(a.A[i], b.A[i])) return false;
    return true;
}

std::string code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const qp_error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("cocycle validation checks the pair and the action identities") {
    auto dd = level_desc(2, 4, 1, 6, 2);
    const RingParams& pr = dd.par;
    QElem c1 = q_mu(pr);
    SECTION("trivial and manufactured cocycles validate") {
        Cocycle triv = make_cocycle(dd, 2, {lmat_identity(dd, 2), lmat_identity(dd, 2)});
        REQUIRE(validate(triv));
        Rng rng(8101);
        REQUIRE(validate(manufacture_base(rng, dd, 2)));
    }
    SECTION("incompatible generator values are rejected") {
        LMat a1 = lmat_identity(dd, 2), a2 = lmat_identity(dd, 2);
        a1.at(0, 1) = l_monomial(dd, {2, 0}, c1);
        a2.at(1, 0) = l_const(dd, c1);
        Cocycle c = make_cocycle(dd, 2, {a1, a2});
        REQUIRE_FALSE(validate(c));
    }
    SECTION("deviation outside c1 is rejected") {
        LMat a = lmat_identity(dd, 1);
        a.at(0, 0) = l_add(l_one(dd), l_monomial(dd, {1, 0}, q_mu_level(pr, pr.s)));
        Cocycle c = make_cocycle(dd, 1, {a, lmat_identity(dd, 1)});
        REQUIRE_FALSE(validate(c));
    }
    SECTION("inadmissible constant pairs are rejected") {
        Cocycle c = make_cocycle(dd, 1, {lmat_identity(dd, 1), lmat_identity(dd, 1)},
                                 q_mu(pr), q_mu(pr));
        REQUIRE_FALSE(validate(c));
    }
    SECTION("level zero descriptions are rejected") {
        RingParams pr0{2, 4, 1, 6};
        AlgebraDesc d0{pr0, 1, 0, 0};
        d0.validate();
        REQUIRE(code_of([&] { make_cocycle(d0, 1, {lmat_identity(d0, 1)}); }) ==
                "BadParams");
    }
}

TEST_CASE("twisting is a group action on cocycles") {
    auto dd = level_desc(2, 4, 1, 6, 2);
    Rng rng(8102);
    Cocycle base = manufacture_base(rng, dd, 2);
    SECTION("identity twist is the identity") {
        REQUIRE(coc_eq(twist(base, lmat_identity(dd, 2)), base));
    }
    SECTION("twisting by X then X^{-1} returns the input") {
        LMat x = instances::random_invertible(rng, dd, 2, 1);
        Cocycle moved = twist(base, x);
        REQUIRE(coc_eq(twist(moved, *lmat_inverse(x)), base));
    }
    SECTION("twisting the trivial cocycle produces coboundaries") {
        Cocycle triv = make_cocycle(dd, 2, {lmat_identity(dd, 2), lmat_identity(dd, 2)});
        LMat x = instances::random_invertible(rng, dd, 2, 1);
        LMat xinv = *lmat_inverse(x);
        Cocycle moved = twist(triv, x);
        for (int i = 0; i < dd.d; ++i)
            REQUIRE(lmat_eq(moved.A[i], lmat_mul(xinv, lmat_gamma(i, x))));
    }
    SECTION("singular twists are refused") {
        LMat z = lmat_zero(dd, 2, 2);
        REQUIRE(code_of([&] { twist(base, z); }) == "SingularTwist");
    }
}

TEST_CASE("one improvement step solves the twisted equation monomialwise") {
    auto dd = level_desc(2, 4, 1, 6, 1);
    const RingParams& pr = dd.par;
    QElem c0 = q_xi(pr, 1), c1 = q_mu(pr);
    SECTION("hand-solved single-term defect") {
        // A = 1 + c1 U with U non-integral: Q = U, rhs = -mu_1 U, and the
        // divisor gamma_weight(1) - 1 equals mu_1, so Y = -U and X = 1 - c0 U
        LMat a = lmat_identity(dd, 1);
        a.at(0, 0) = l_add(l_one(dd), l_monomial(dd, {1}, c1));
        Cocycle c = make_cocycle(dd, 1, {a});
        REQUIRE(validate(c));
        REQUIRE(certified_defect(c) == 0);
        auto st = improve_once(c, 0);
        LaurentElem expect = l_sub(l_one(dd), l_monomial(dd, {1}, c0));
        REQUIRE(l_eq(st.X.at(0, 0), expect));
        REQUIRE(certified_defect(st.out) >= 1);
        REQUIRE(coc_eq(st.out, twist(c, st.X)));
    }
    SECTION("cocycles already integral are fixed points") {
        Rng rng(8103);
        Cocycle base = manufacture_base(rng, dd, 2);
        auto st = improve_once(base, 0);
        REQUIRE(lmat_eq(st.X, lmat_identity(dd, 2)));
        REQUIRE(coc_eq(st.out, base));
    }
    SECTION("membership violations are diagnosed") {
        LMat a = lmat_identity(dd, 1);
        a.at(0, 0) = l_add(l_one(dd), l_monomial(dd, {1}, q_mu_level(pr, pr.s)));
        Cocycle c = make_cocycle(dd, 1, {a});
        REQUIRE(code_of([&] { improve_once(c, 0); }) == "MembershipViolated");
    }
}

TEST_CASE("the certified defect increases strictly per committed step") {
    auto dd = level_desc(2, 5, 1, 6, 2);
    Rng rng(8104);
    Cocycle base = manufacture_base(rng, dd, 2);
    LMat x0 = lmat_add(lmat_identity(dd, 2),
                       lmat_scale_q(nonintegral_noise(rng, dd, 2), q_xi(dd.par, 1)));
    Cocycle c = twist(base, x0);
    REQUIRE(validate(c));
    int prev = certified_defect(c);
    REQUIRE(prev == 0);
    Cocycle cur = c;
    int increases = 0;
    for (int step = 0; step < 6; ++step) {
        std::optional<ImproveStep> st;
        try {
            st = improve_once(cur, certified_defect(cur));
        } catch (const qp_error& e) {
            REQUIRE(e.code() == std::string("PrecisionExhausted"));
            break;
        }
        if (lmat_eq(st->X, lmat_identity(dd, 2))) break;
        int next = certified_defect(st->out);
        REQUIRE(next > prev);
        ++increases;
        prev = next;
        cur = st->out;
    }
    REQUIRE(increases >= 1);
}

TEST_CASE("descent lands on the integral subalgebra") {
    SECTION("trivial cocycle descends immediately") {
        auto dd = level_desc(3, 4, 1, 6, 2);
        Cocycle triv = make_cocycle(dd, 2, {lmat_identity(dd, 2), lmat_identity(dd, 2)});
        auto rep = descend(triv);
        REQUIRE(rep.m_attained == 0);
        REQUIRE(rep.descended);
        REQUIRE(lmat_eq(rep.X, lmat_identity(dd, 2)));
        REQUIRE(rep.prec_n == dd.par.N);
        REQUIRE(rep.prec_m == dd.par.M);
        REQUIRE(rep.defect == dd.par.N * dd.par.M);
    }
    SECTION("manufactured twists improve until precision runs out") {
        Rng rng(8105);
        int trial = 0;
        for (i64 p : {2, 3})
            for (int d : {1, 2})
                for (int n : {1, 2}) {
                    ++trial;
                    auto dd = level_desc(p, 4, 1, 6, d);
                    Cocycle base = manufacture_base(rng, dd, n);
                    LMat x0 = lmat_add(
                        lmat_identity(dd, n),
                        lmat_scale_q(nonintegral_noise(rng, dd, n), q_xi(dd.par, 1)));
                    Cocycle c = twist(base, x0);
                    REQUIRE(validate(c));
                    REQUIRE(certified_defect(c) == 0);
                    auto rep = descend(c);
                    // cohomology class invariance, exactly
                    REQUIRE(coc_eq(rep.out, twist(c, rep.X)));
                    INFO("trial " << trial << " m " << rep.m_attained << " defect "
                                  << rep.defect << " descended " << rep.descended
                                  << " prec " << rep.prec_n << "," << rep.prec_m);
                    // at least one committed, certified improvement
                    REQUIRE(rep.m_attained >= 0);
                    REQUIRE(rep.defect >= rep.m_attained + 1);
                    if (rep.descended) REQUIRE(rep.prec_n >= 1);
                }
    }
}
