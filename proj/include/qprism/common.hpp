#pragma once
// Shared utilities: error type, integer helpers, exact combinatorics,
// a row-major matrix container, and the seeded RNG used by every suite.

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qprism {

using i64 = std::int64_t;
using u64 = std::uint64_t;
using u128 = unsigned __int128;
using boost::multiprecision::cpp_int;

// Every structured failure carries a stable code string; messages are advice.
class qp_error : public std::runtime_error {
public:
    qp_error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
    throw qp_error(code, msg);
}

inline bool is_prime(i64 n) {
    if (n < 2) return false;
    for (i64 d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

// p^k as u64; the call sites keep p^N comfortably under 2^63.
inline u64 upow(u64 base, int k) {
    u64 r = 1;
    for (int i = 0; i < k; ++i) {
        if (base != 0 && r > UINT64_MAX / base) fail("Overflow", "upow exceeds u64");
        r *= base;
    }
    return r;
}

inline i64 ipow(i64 base, int k) {
    i64 r = 1;
    for (int i = 0; i < k; ++i) r *= base;
    return r;
}

inline cpp_int cpow(const cpp_int& base, int k) {
    cpp_int r = 1;
    for (int i = 0; i < k; ++i) r *= base;
    return r;
}

// nu_p of a nonzero integer; cap is returned for 0 (valuation "infinity").
inline int valuation(u64 x, u64 p, int cap) {
    if (x == 0) return cap;
    int v = 0;
    while (x % p == 0 && v < cap) { x /= p; ++v; }
    return v;
}

inline int valuation_z(cpp_int x, const cpp_int& p, int cap) {
    if (x == 0) return cap;
    if (x < 0) x = -x;
    int v = 0;
    while (x % p == 0 && v < cap) { x /= p; ++v; }
    return v;
}

inline cpp_int factorial(int n) {
    cpp_int r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// binom(n, k) for any integer n (generalized; exact over Z).
inline cpp_int binom(const cpp_int& n, int k) {
    if (k < 0) return 0;
    cpp_int num = 1;
    for (int i = 0; i < k; ++i) num *= (n - i);
    return num / factorial(k);
}

// falling factorial n(n-1)...(n-k+1); exact for any integer n.
inline cpp_int falling(const cpp_int& n, int k) {
    cpp_int r = 1;
    for (int i = 0; i < k; ++i) r *= (n - i);
    return r;
}

// Signed Stirling numbers of the first kind, s(n, k):
// prod_{j=0}^{n-1}(X - j) = sum_k s(n, k) X^k, via s(n+1,k)=s(n,k-1)-n s(n,k).
inline cpp_int stirling1(int n, int k) {
    if (n == 0 && k == 0) return 1;
    if (k < 0 || k > n) return 0;
    std::vector<cpp_int> row(1, 1);
    for (int m = 0; m < n; ++m) {
        std::vector<cpp_int> next(m + 2, 0);
        for (int j = 0; j <= m; ++j) {
            next[j + 1] += row[j];
            next[j] -= cpp_int(m) * row[j];
        }
        row = std::move(next);
    }
    return row[k];
}

template <typename T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}
    Mat(int r, int c, const T& fill)
        : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    T& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    bool operator==(const Mat& o) const {
        return rows == o.rows && cols == o.cols && a == o.a;
    }
};

// Generic helpers for matrices over plain arithmetic types (u64 after the
// caller's own reduction, or cpp_int). Ring-aware matrices get dedicated
// helpers next to their element types.
template <typename T>
Mat<T> mat_identity(int n) {
    Mat<T> m(n, n, T{});
    for (int i = 0; i < n; ++i) m.at(i, i) = T{1};
    return m;
}

template <typename T>
Mat<T> mat_mul(const Mat<T>& a, const Mat<T>& b) {
    if (a.cols != b.rows) fail("ShapeMismatch", "mat_mul dimensions");
    Mat<T> r(a.rows, b.cols, T{});
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const T& v = a.at(i, k);
            if (v == T{}) continue;
            for (int j = 0; j < b.cols; ++j) r.at(i, j) += v * b.at(k, j);
        }
    return r;
}

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(u64 seed) : eng(seed) {}

    u64 next() { return eng(); }
    // uniform in [lo, hi] inclusive
    i64 range(i64 lo, i64 hi) {
        return lo + static_cast<i64>(eng() % static_cast<u64>(hi - lo + 1));
    }
    u64 mod(u64 m) { return m == 0 ? 0 : eng() % m; }
    bool coin() { return (eng() & 1u) != 0; }
};

inline std::string join_ints(const std::vector<i64>& v) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << "]";
    return os.str();
}

}  // namespace qprism
