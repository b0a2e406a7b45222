#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fockcalc {

using Rat = mpq_class;
using Int = mpz_class;

inline Rat rat(long num, long den = 1) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}

inline bool is_integer(const Rat& r) { return r.get_den() == 1; }

/// Largest integer <= r.
inline Int rat_floor(const Rat& r) {
    Int q;
    mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    return q;
}

/// Smallest integer >= r.
inline Int rat_ceil(const Rat& r) {
    Int q;
    mpz_cdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    return q;
}

inline long to_long(const Int& z) {
    if (!z.fits_slong_p()) throw std::overflow_error("integer too large for long");
    return z.get_si();
}

/// Generalized binomial coefficient C(r, m) = r(r-1)...(r-m+1)/m! for m >= 0.
inline Rat binomial(const Rat& r, unsigned long m) {
    Rat b(1);
    for (unsigned long i = 0; i < m; ++i) {
        b *= (r - Rat(static_cast<long>(i)));
        b /= Rat(static_cast<long>(i + 1));
    }
    return b;
}

/// r^k for any integer k (k < 0 requires r != 0).
inline Rat rat_pow(const Rat& r, long k) {
    if (k == 0) return Rat(1);
    if (r == 0 && k < 0) throw std::domain_error("0 to negative power");
    Rat base = k > 0 ? r : Rat(1 / r);
    unsigned long e = k > 0 ? static_cast<unsigned long>(k) : static_cast<unsigned long>(-k);
    Rat acc(1);
    while (e) {
        if (e & 1) acc *= base;
        base *= base;
        e >>= 1;
    }
    return acc;
}

inline std::string rat_str(const Rat& r) {
    if (is_integer(r)) return r.get_num().get_str();
    return r.get_num().get_str() + "/" + r.get_den().get_str();
}

inline Int int_lcm(const Int& a, const Int& b) {
    Int g;
    mpz_lcm(g.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return g;
}

/// True when r*q is an integer, i.e. the denominator of r divides q.
inline bool denominator_divides(const Rat& r, const Int& q) {
    return mpz_divisible_p(q.get_mpz_t(), r.get_den_mpz_t()) != 0;
}

}  // namespace fockcalc
