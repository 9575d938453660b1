#include <catch2/catch_amalgamated.hpp>

#include "qprism/strat.hpp"

using namespace qprism;

namespace {

PDPolyDesc base_desc(i64 p, int N, int d, int K) {
    PDPolyDesc dd{p, N, d, 1, K};
    dd.validate();
    return dd;
}

// tau coefficient of a stratification matrix as a base-only matrix
PDMat tau_coeff(const PDMat& eps, const std::vector<int>& j) {
    const PDPolyDesc& dd = eps.a[0].desc;
    PDMat r = pdmat_zero(dd, eps.rows, eps.cols);
    std::vector<int> zero(dd.nu * dd.d, 0);
    for (int a = 0; a < eps.rows; ++a)
        for (int b = 0; b < eps.cols; ++b)
            for (const auto& [k, v] : eps.at(a, b).terms)
                if (k.second == j) pdp_insert(r.at(a, b), {k.first, zero}, v);
    return r;
}

// (I + E)^{-1} with E strictly triangular, by the finite Neumann sum
PDMat tri_inverse(const PDMat& t) {
    const PDPolyDesc& dd = t.a[0].desc;
    PDMat id = pdmat_identity(dd, t.rows);
    PDMat e = pdmat_sub(t, id);
    PDMat acc = id, pw = id;
    for (int i = 1; i < t.rows; ++i) {
        pw = pdmat_mul(pw, e);
        acc = (i % 2) ? pdmat_sub(acc, pw) : pdmat_add(acc, pw);
    }
    return acc;
}

PDPoly random_base_poly(Rng& rng, const PDPolyDesc& dd, int nterms) {
    PDPoly f = pdp_zero(dd);
    for (int t = 0; t < nterms; ++t) {
        std::vector<i64> k(dd.d);
        for (i64& e : k) e = rng.range(-1, 1);
        pdp_insert(f, {k, std::vector<int>(dd.nu * dd.d, 0)},
                   static_cast<u64>(rng.range(0, ipow(dd.p, dd.N) - 1)));
    }
    return f;
}

// gauge X = L D R with unitriangular L, R and unit-monomial diagonal D;
// both factors invert exactly, so X X^{-1} = I on the nose
std::pair<PDMat, PDMat> random_gauge(Rng& rng, const PDPolyDesc& dd, int n) {
    ZModCtx cx(static_cast<u64>(dd.p), dd.N);
    PDMat lo = pdmat_identity(dd, n), up = pdmat_identity(dd, n);
    PDMat di = pdmat_zero(dd, n, n), dinv = pdmat_zero(dd, n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            lo.at(i, j) = random_base_poly(rng, dd, 1);
            up.at(j, i) = random_base_poly(rng, dd, 1);
        }
    for (int i = 0; i < n; ++i) {
        u64 c = 1 + static_cast<u64>(rng.mod(static_cast<u64>(dd.p - 1)));
        std::vector<i64> k(dd.d);
        for (i64& e : k) e = rng.range(-1, 1);
        std::vector<i64> kneg = k;
        for (i64& e : kneg) e = -e;
        std::vector<int> z(dd.nu * dd.d, 0);
        di.at(i, i) = pdp_monomial(dd, k, z, c);
        dinv.at(i, i) = pdp_monomial(dd, kneg, z, cx.inv(c));
    }
    PDMat x = pdmat_mul(lo, pdmat_mul(di, up));
    PDMat xinv = pdmat_mul(tri_inverse(up), pdmat_mul(dinv, tri_inverse(lo)));
    return {x, xinv};
}

std::vector<PDMat> random_const_diagonals(Rng& rng, const PDPolyDesc& dd, int n) {
    std::vector<PDMat> out;
    for (int i = 0; i < dd.d; ++i) {
        PDMat m = pdmat_zero(dd, n, n);
        for (int t = 0; t < n; ++t)
            m.at(t, t) = pdp_const(dd, static_cast<u64>(rng.range(0, ipow(dd.p, dd.N) - 1)));
        out.push_back(std::move(m));
    }
    return out;
}

// nabla_i = X^{-1} (d/dU_i + D_i) X, D_i constant diagonal
ModPConnection gauged_connection(Rng& rng, const PDPolyDesc& dd, int n) {
    auto [x, xinv] = random_gauge(rng, dd, n);
    auto diag = random_const_diagonals(rng, dd, n);
    ModPConnection nc{dd, n, {}};
    for (int i = 0; i < dd.d; ++i)
        nc.B.push_back(pdmat_add(pdmat_mul(xinv, pdmat_mul(diag[i], x)),
                                 pdmat_mul(xinv, pdmat_dU(x, i))));
    return nc;
}

// Theta_i = X^{-1} D_i X, a commuting family
ModPHiggs gauged_higgs(Rng& rng, const PDPolyDesc& dd, int n) {
    auto [x, xinv] = random_gauge(rng, dd, n);
    auto diag = random_const_diagonals(rng, dd, n);
    ModPHiggs h{dd, n, {}};
    for (int i = 0; i < dd.d; ++i)
        h.B.push_back(pdmat_mul(xinv, pdmat_mul(diag[i], x)));
    return h;
}

}  // namespace

TEST_CASE("zero and constant coefficients have closed-form stratifications") {
    SECTION("the trivial connection gives the identity") {
        PDPolyDesc dd = base_desc(3, 3, 2, 5);
        ModPConnection nc{dd, 2, {pdmat_zero(dd, 2, 2), pdmat_zero(dd, 2, 2)}};
        REQUIRE(mpc_flat(nc));
        PDMat eps = taylor(nc, 5);
        REQUIRE(pdmat_eq(eps, pdmat_identity(eps.a[0].desc, 2)));
        REQUIRE(check_strat(eps));
        ModPConnection back = extract(eps);
        for (const PDMat& b : back.B)
            for (const PDPoly& e : b.a) REQUIRE(pdp_is_zero(e));
    }

    SECTION("a constant scalar expands geometrically") {
        PDPolyDesc dd = base_desc(3, 3, 1, 5);
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_const(dd, 2);
        PDMat eps = taylor(nc, 5);
        PDPoly expect = pdp_zero(eps.a[0].desc);
        u64 pw = 1;
        for (int j = 0; j < 5; ++j) {
            pdp_insert(expect, {{0}, {j}}, pw);
            pw = (pw * 2) % 27;
        }
        REQUIRE(pdp_eq(eps.at(0, 0), expect));
        REQUIRE(check_strat(eps));
    }

    SECTION("two constant directions expand as a product") {
        PDPolyDesc dd = base_desc(2, 4, 2, 4);
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1), pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_const(dd, 3);
        nc.B[1].at(0, 0) = pdp_const(dd, 5);
        REQUIRE(mpc_flat(nc));
        PDMat eps = taylor(nc, 4);
        for (int j1 = 0; j1 < 4; ++j1)
            for (int j2 = 0; j1 + j2 < 4; ++j2) {
                u64 want = static_cast<u64>((ipow(3, j1) * ipow(5, j2)) % 16);
                auto it = eps.at(0, 0).terms.find({{0, 0}, {j1, j2}});
                u64 got = (it == eps.at(0, 0).terms.end()) ? 0 : it->second;
                REQUIRE(got == want);
            }
        REQUIRE(check_strat(eps));
    }
}

TEST_CASE("a linear coefficient pins the coordinate shift in the faces") {
    PDPolyDesc dd = base_desc(5, 2, 1, 4);

    SECTION("B = U against the hand recursion") {
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_monomial(dd, {1}, {0}, 1);
        PDMat eps = taylor(nc, 4);
        // C_0 = 1, C_1 = U, C_2 = 1 + U^2, C_3 = 3U + U^3
        PDPoly expect = pdp_zero(eps.a[0].desc);
        pdp_insert(expect, {{0}, {0}}, 1);
        pdp_insert(expect, {{1}, {1}}, 1);
        pdp_insert(expect, {{0}, {2}}, 1);
        pdp_insert(expect, {{2}, {2}}, 1);
        pdp_insert(expect, {{1}, {3}}, 3);
        pdp_insert(expect, {{3}, {3}}, 1);
        REQUIRE(pdp_eq(eps.at(0, 0), expect));
        // the cocycle only closes when p_23 shifts U by +tau^(1)
        REQUIRE(check_strat(eps));
    }

    SECTION("B = U^{-1} terminates and still satisfies the cocycle") {
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_monomial(dd, {-1}, {0}, 1);
        PDMat eps = taylor(nc, 4);
        // C_2 = d(U^{-1}) + U^{-2} = 0, so the series stops after degree 1
        PDPoly expect = pdp_zero(eps.a[0].desc);
        pdp_insert(expect, {{0}, {0}}, 1);
        pdp_insert(expect, {{-1}, {1}}, 1);
        REQUIRE(pdp_eq(eps.at(0, 0), expect));
        // face23 runs through falling(-1, m) != 0 for every m here
        REQUIRE(check_strat(eps));
    }
}

TEST_CASE("gauged families are flat and taylor/extract are mutually inverse") {
    Rng rng(9301);
    for (i64 p : {2, 3}) {
        for (int d = 1; d <= 2; ++d)
            for (int n = 1; n <= 2; ++n) {
                PDPolyDesc dd = base_desc(p, 3, d, 4);
                ModPConnection nc = gauged_connection(rng, dd, n);
                INFO("p=" << p << " d=" << d << " n=" << n);
                REQUIRE(mpc_flat(nc));
                PDMat eps = taylor(nc, 4);
                REQUIRE(check_strat(eps));

                // coefficient recursion along every axis, not just the first
                for (const auto& j : detail::pd_indices(d, 4)) {
                    if (pd_degree(j) == 0) continue;
                    PDMat cj = tau_coeff(eps, j);
                    for (int i = 0; i < d; ++i) {
                        if (j[i] == 0) continue;
                        std::vector<int> prev = j;
                        prev[i] -= 1;
                        PDMat cp = tau_coeff(eps, prev);
                        REQUIRE(pdmat_eq(cj, pdmat_add(pdmat_dU(cp, i),
                                                       pdmat_mul(nc.B[i], cp))));
                    }
                }

                ModPConnection back = extract(eps);
                for (int i = 0; i < d; ++i) REQUIRE(pdmat_eq(back.B[i], nc.B[i]));
                REQUIRE(pdmat_eq(taylor(back, 4), eps));
            }
    }
}

TEST_CASE("non-cocycles and non-flat data are rejected") {
    SECTION("a bare first-order term fails the cocycle at depth three") {
        PDPolyDesc dd = base_desc(3, 2, 1, 3);
        PDMat eps = pdmat_identity(dd, 1);
        eps.at(0, 0) = pdp_add(eps.at(0, 0), pdp_monomial(dd, {0}, {1}, 1));
        REQUIRE_FALSE(check_strat(eps));
        try {
            extract(eps);
            FAIL("extract accepted a non-cocycle");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "NotAStratification");
        }
    }

    SECTION("the diagonal condition is enforced") {
        PDPolyDesc dd = base_desc(3, 2, 1, 3);
        PDMat eps = pdmat_identity(dd, 1);
        eps.at(0, 0) = pdp_add(eps.at(0, 0), pdp_monomial(dd, {1}, {0}, 1));
        REQUIRE_FALSE(check_strat(eps));
    }

    SECTION("a non-flat pair is refused by taylor") {
        PDPolyDesc dd = base_desc(3, 2, 2, 4);
        ModPConnection nc{dd, 2, {pdmat_zero(dd, 2, 2), pdmat_zero(dd, 2, 2)}};
        nc.B[0].at(0, 1) = pdp_one(dd);
        nc.B[1].at(1, 0) = pdp_one(dd);
        REQUIRE_FALSE(mpc_flat(nc));
        try {
            taylor(nc, 4);
            FAIL("taylor accepted a non-flat connection");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "NotFlat");
        }
    }
}

TEST_CASE("higgs stratifications multiply without a coordinate shift") {
    SECTION("powers of a single field reproduce the coefficients") {
        PDPolyDesc dd = base_desc(3, 3, 1, 5);
        Rng rng(9302);
        ModPHiggs h = gauged_higgs(rng, dd, 2);
        REQUIRE(mph_flat(h));
        PDMat eps = higgs_taylor(h, 5);
        REQUIRE(higgs_check_strat(eps));
        PDMat pw = pdmat_identity(dd, 2);
        for (int j = 0; j < 5; ++j) {
            REQUIRE(pdmat_eq(tau_coeff(eps, {j}), pw));
            pw = pdmat_mul(h.B[0], pw);
        }
        ModPHiggs back = higgs_extract(eps);
        REQUIRE(pdmat_eq(back.B[0], h.B[0]));
        REQUIRE(pdmat_eq(higgs_taylor(back, 5), eps));
    }

    SECTION("commuting pairs round-trip") {
        Rng rng(9303);
        for (i64 p : {2, 5}) {
            PDPolyDesc dd = base_desc(p, 2, 2, 4);
            ModPHiggs h = gauged_higgs(rng, dd, 2);
            REQUIRE(mph_flat(h));
            PDMat eps = higgs_taylor(h, 4);
            REQUIRE(higgs_check_strat(eps));
            ModPHiggs back = higgs_extract(eps);
            for (int i = 0; i < 2; ++i) REQUIRE(pdmat_eq(back.B[i], h.B[i]));
        }
    }

    SECTION("the two dictionaries disagree on a U-dependent family") {
        PDPolyDesc dd = base_desc(5, 2, 1, 4);
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_monomial(dd, {1}, {0}, 1);
        PDMat eps = taylor(nc, 4);
        REQUIRE(check_strat(eps));
        REQUIRE_FALSE(higgs_check_strat(eps));
    }

    SECTION("noncommuting fields are refused") {
        PDPolyDesc dd = base_desc(3, 2, 2, 4);
        ModPHiggs h{dd, 2, {pdmat_zero(dd, 2, 2), pdmat_zero(dd, 2, 2)}};
        h.B[0].at(0, 1) = pdp_one(dd);
        h.B[1].at(1, 0) = pdp_one(dd);
        REQUIRE_FALSE(mph_flat(h));
        try {
            higgs_taylor(h, 4);
            FAIL("higgs_taylor accepted a noncommuting family");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "NotFlat");
        }
    }
}

TEST_CASE("quasi-nilpotence is certified to a bound") {
    PDPolyDesc dd = base_desc(3, 3, 1, 8);

    SECTION("p times a unit is nilpotent at depth N") {
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_const(dd, 3);
        REQUIRE(mpc_nilpotent(nc, 3));
        REQUIRE_FALSE(mpc_nilpotent(nc, 2));
    }

    SECTION("a unit is never nilpotent") {
        ModPConnection nc{dd, 1, {pdmat_zero(dd, 1, 1)}};
        nc.B[0].at(0, 0) = pdp_one(dd);
        REQUIRE_FALSE(mpc_nilpotent(nc, 5));
    }

    SECTION("a strictly triangular constant matrix is nilpotent at its order") {
        ModPConnection nc{dd, 2, {pdmat_zero(dd, 2, 2)}};
        nc.B[0].at(0, 1) = pdp_one(dd);
        REQUIRE(mpc_nilpotent(nc, 2));
        REQUIRE_FALSE(mpc_nilpotent(nc, 1));
    }
}

TEST_CASE("the divided-power basis map is an isomorphism") {
    SECTION("the shift-free case is a basis re-indexing") {
        REQUIRE(pd_poly_iso_check(2, 1, {1}, {{}}, 8));
    }

    SECTION("preconditions are enforced") {
        try {
            pd_poly_iso_check(2, 1, {0}, {{}}, 8);
            FAIL("accepted u = 0");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "BadParams");
        }
        try {
            pd_poly_iso_check(2, 1, {1}, {{{{0}, 1}}}, 8);
            FAIL("accepted a constant shift");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "BadParams");
        }
        try {
            pd_poly_iso_check(2, 1, {1}, {{{{2}, 1}}}, 8);
            FAIL("accepted a plain power at or above p");
        } catch (const qp_error& e) {
            REQUIRE(std::string(e.code()) == "BadParams");
        }
    }

    SECTION("random shifts at p = 2 stay bijective") {
        Rng rng(9304);
        for (int trial = 0; trial < 25; ++trial) {
            int n = 1 + static_cast<int>(rng.mod(2));
            std::vector<u64> u(n, 1);
            std::vector<std::map<std::vector<int>, u64>> b(n);
            for (int i = 0; i < n; ++i) {
                auto mons = detail::pd_indices(n, n + 1);
                for (const auto& a : mons) {
                    if (pd_degree(a) == 0) continue;
                    bool low = true;
                    for (int x : a) low &= (x < 2);
                    if (low && rng.coin()) b[i][a] = 1;
                }
            }
            INFO("trial " << trial << " n=" << n);
            REQUIRE(pd_poly_iso_check(2, n, u, b, 8));
        }
    }

    SECTION("odd p with unit scaling stays bijective") {
        Rng rng(9305);
        for (int trial = 0; trial < 8; ++trial) {
            std::vector<u64> u{1 + static_cast<u64>(rng.mod(2))};
            std::vector<std::map<std::vector<int>, u64>> b(1);
            for (int a = 1; a < 3; ++a)
                if (rng.coin()) b[0][{a}] = 1 + static_cast<u64>(rng.mod(2));
            INFO("trial " << trial);
            REQUIRE(pd_poly_iso_check(3, 1, u, b, 9));
        }
    }
}
