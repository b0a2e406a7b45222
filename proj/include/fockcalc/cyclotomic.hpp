#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fockcalc/rational.hpp"

namespace fockcalc {

namespace detail {

/// Dense polynomial over Q, coefficients low to high, no trailing zeros.
using Poly = std::vector<Rat>;

inline void poly_trim(Poly& p) {
    while (!p.empty() && p.back() == 0) p.pop_back();
}

inline Poly poly_xn_minus_1(unsigned long n) {
    Poly p(n + 1, Rat(0));
    p[0] = -1;
    p[n] = 1;
    return p;
}

/// Exact quotient; throws if the division leaves a remainder.
inline Poly poly_divexact(Poly num, const Poly& den) {
    if (den.empty()) throw std::domain_error("division by zero polynomial");
    Poly q(num.size() >= den.size() ? num.size() - den.size() + 1 : 0, Rat(0));
    while (num.size() >= den.size()) {
        Rat c = num.back() / den.back();
        std::size_t shift = num.size() - den.size();
        q[shift] = c;
        for (std::size_t i = 0; i < den.size(); ++i) num[shift + i] -= c * den[i];
        poly_trim(num);
        if (num.empty()) break;
        if (num.size() < den.size()) throw std::domain_error("inexact polynomial division");
    }
    if (!num.empty()) throw std::domain_error("inexact polynomial division");
    return q;
}

}  // namespace detail

/// The field Q(zeta_M) in the power basis 1, zeta, ..., zeta^{phi(M)-1},
/// reduced modulo the M-th cyclotomic polynomial. Shared immutable context
/// for all Cyclo values of one run.
class CycloField {
public:
    explicit CycloField(unsigned long order) : order_(order) {
        if (order == 0) throw std::invalid_argument("cyclotomic order must be positive");
        min_poly_ = cyclotomic_poly(order);
        degree_ = min_poly_.size() - 1;
        build_power_table();
    }

    unsigned long order() const { return order_; }
    std::size_t degree() const { return degree_; }

    /// zeta^k in the power basis, any integer k.
    const std::vector<Rat>& zeta_pow(long k) const {
        long m = k % static_cast<long>(order_);
        if (m < 0) m += static_cast<long>(order_);
        return pow_table_[static_cast<std::size_t>(m)];
    }

    /// Reduce a raw coefficient vector (degree may reach 2*degree-2) into the basis.
    std::vector<Rat> reduce(std::vector<Rat> raw) const {
        for (std::size_t i = raw.size(); i-- > degree_;) {
            if (raw[i] == 0) continue;
            const std::vector<Rat>& rep = high_power_[i - degree_];
            for (std::size_t j = 0; j < degree_; ++j) raw[j] += raw[i] * rep[j];
            raw[i] = 0;
        }
        raw.resize(degree_);
        return raw;
    }

    /// M-th cyclotomic polynomial, computed by exact division of x^M - 1 by
    /// the cyclotomic polynomials of the proper divisors.
    static detail::Poly cyclotomic_poly(unsigned long m) {
        static std::map<unsigned long, detail::Poly> cache;
        auto it = cache.find(m);
        if (it != cache.end()) return it->second;
        detail::Poly p = detail::poly_xn_minus_1(m);
        for (unsigned long d = 1; d < m; ++d) {
            if (m % d == 0) p = detail::poly_divexact(p, cyclotomic_poly(d));
        }
        cache[m] = p;
        return p;
    }

private:
    void build_power_table() {
        // zeta^k for k in [0, order): repeatedly multiply by zeta and reduce.
        pow_table_.resize(order_);
        std::vector<Rat> cur(degree_, Rat(0));
        cur[0] = 1;
        for (unsigned long k = 0; k < order_; ++k) {
            pow_table_[k] = cur;
            std::vector<Rat> next(degree_ + 1, Rat(0));
            for (std::size_t i = 0; i < degree_; ++i) next[i + 1] = cur[i];
            cur = reduce_once(std::move(next));
        }
        // representations of zeta^{degree+j} for j in [0, degree-1], used by reduce()
        high_power_.resize(degree_ > 0 ? degree_ : 1);
        std::vector<Rat> h(degree_ + 1, Rat(0));
        if (degree_ > 0) h[degree_] = 1;
        for (std::size_t j = 0; j + 1 <= degree_; ++j) {
            high_power_[j] = reduce_once(h);
            h.insert(h.begin(), Rat(0));
        }
    }

    std::vector<Rat> reduce_once(std::vector<Rat> raw) const {
        // reduce by min_poly_ via long division (raw may have any degree)
        while (raw.size() > degree_) {
            Rat lead = raw.back();
            raw.pop_back();
            if (lead == 0) continue;
            std::size_t shift = raw.size() + 1 - min_poly_.size();
            for (std::size_t i = 0; i + 1 < min_poly_.size(); ++i)
                raw[shift + i] -= lead * min_poly_[i];
        }
        raw.resize(degree_);
        return raw;
    }

    unsigned long order_;
    std::size_t degree_;
    detail::Poly min_poly_;
    std::vector<std::vector<Rat>> pow_table_;
    std::vector<std::vector<Rat>> high_power_;
};

/// An element of Q(zeta_M). Immutable value type; operations combine values
/// from the same field.
class Cyclo {
public:
    Cyclo() : field_(nullptr) {}

    Cyclo(const CycloField* field, std::vector<Rat> coeffs)
        : field_(field), coeffs_(std::move(coeffs)) {
        coeffs_.resize(field_->degree(), Rat(0));
    }

    static Cyclo from_rat(const CycloField* field, const Rat& r) {
        std::vector<Rat> c(field->degree(), Rat(0));
        if (!c.empty()) c[0] = r;
        return Cyclo(field, std::move(c));
    }

    static Cyclo zeta_power(const CycloField* field, long k) {
        return Cyclo(field, field->zeta_pow(k));
    }

    const CycloField* field() const { return field_; }
    const std::vector<Rat>& coeffs() const { return coeffs_; }

    bool is_zero() const {
        for (const Rat& c : coeffs_)
            if (c != 0) return false;
        return true;
    }

    bool is_rational() const {
        for (std::size_t i = 1; i < coeffs_.size(); ++i)
            if (coeffs_[i] != 0) return false;
        return true;
    }

    Rat rational_part() const { return coeffs_.empty() ? Rat(0) : coeffs_[0]; }

    friend Cyclo operator+(const Cyclo& a, const Cyclo& b) {
        check_fields(a, b);
        std::vector<Rat> c = a.coeffs_;
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += b.coeffs_[i];
        return Cyclo(a.field_, std::move(c));
    }

    friend Cyclo operator-(const Cyclo& a, const Cyclo& b) {
        check_fields(a, b);
        std::vector<Rat> c = a.coeffs_;
        for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b.coeffs_[i];
        return Cyclo(a.field_, std::move(c));
    }

    Cyclo operator-() const {
        std::vector<Rat> c = coeffs_;
        for (Rat& x : c) x = -x;
        return Cyclo(field_, std::move(c));
    }

    friend Cyclo operator*(const Cyclo& a, const Cyclo& b) {
        check_fields(a, b);
        std::size_t d = a.field_->degree();
        std::vector<Rat> raw(2 * d, Rat(0));
        for (std::size_t i = 0; i < d; ++i) {
            if (a.coeffs_[i] == 0) continue;
            for (std::size_t j = 0; j < d; ++j) {
                if (b.coeffs_[j] == 0) continue;
                raw[i + j] += a.coeffs_[i] * b.coeffs_[j];
            }
        }
        return Cyclo(a.field_, a.field_->reduce(std::move(raw)));
    }

    Cyclo scaled(const Rat& r) const {
        std::vector<Rat> c = coeffs_;
        for (Rat& x : c) x *= r;
        return Cyclo(field_, std::move(c));
    }

    /// Multiplicative inverse via the extended Euclidean algorithm against the
    /// minimal polynomial. Defined for every nonzero element (field).
    Cyclo inverse() const {
        if (is_zero()) throw std::domain_error("inverse of zero cyclotomic element");
        detail::Poly a(coeffs_.begin(), coeffs_.end());
        detail::poly_trim(a);
        detail::Poly b = CycloField::cyclotomic_poly(field_->order());
        // Extended Euclid: track s with s*a = r (mod b).
        detail::Poly r0 = b, r1 = a;
        detail::Poly s0{}, s1{Rat(1)};
        while (!r1.empty()) {
            // divide r0 by r1
            detail::Poly q(r0.size() >= r1.size() ? r0.size() - r1.size() + 1 : 0, Rat(0));
            detail::Poly rem = r0;
            while (rem.size() >= r1.size() && !rem.empty()) {
                Rat c = rem.back() / r1.back();
                std::size_t shift = rem.size() - r1.size();
                q[shift] = c;
                for (std::size_t i = 0; i < r1.size(); ++i) rem[shift + i] -= c * r1[i];
                detail::poly_trim(rem);
            }
            // s_next = s0 - q * s1
            detail::Poly snext = s0;
            if (snext.size() < q.size() + s1.size()) snext.resize(q.size() + s1.size(), Rat(0));
            for (std::size_t i = 0; i < q.size(); ++i) {
                if (q[i] == 0) continue;
                for (std::size_t j = 0; j < s1.size(); ++j) snext[i + j] -= q[i] * s1[j];
            }
            detail::poly_trim(snext);
            r0 = r1;
            r1 = rem;
            s0 = s1;
            s1 = snext;
        }
        // r0 = gcd(a, Phi_M); coprimality is automatic in a field extension
        if (r0.size() != 1) throw std::domain_error("element not invertible (unexpected gcd)");
        Rat g = r0[0];
        std::vector<Rat> inv(field_->degree(), Rat(0));
        for (std::size_t i = 0; i < s0.size() && i < 2 * field_->degree(); ++i) {
            if (i >= inv.size()) inv.resize(i + 1, Rat(0));
            inv[i] = s0[i] / g;
        }
        return Cyclo(field_, field_->reduce(std::move(inv)));
    }

    friend bool operator==(const Cyclo& a, const Cyclo& b) {
        check_fields(a, b);
        return a.coeffs_ == b.coeffs_;
    }
    friend bool operator!=(const Cyclo& a, const Cyclo& b) { return !(a == b); }

    /// Lexicographic order on coefficient vectors (deterministic tie-breaking).
    friend bool operator<(const Cyclo& a, const Cyclo& b) {
        check_fields(a, b);
        for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
            if (a.coeffs_[i] != b.coeffs_[i]) return a.coeffs_[i] < b.coeffs_[i];
        }
        return false;
    }

    std::string str() const {
        if (is_rational()) return rat_str(rational_part());
        std::string out;
        bool first = true;
        for (std::size_t i = 0; i < coeffs_.size(); ++i) {
            if (coeffs_[i] == 0) continue;
            if (!first) out += " + ";
            out += rat_str(coeffs_[i]);
            if (i >= 1) out += "*zeta" + std::string(i > 1 ? "^" + std::to_string(i) : "");
            first = false;
        }
        if (first) out = "0";
        return out;
    }

private:
    static void check_fields(const Cyclo& a, const Cyclo& b) {
        if (a.field_ != b.field_) throw std::invalid_argument("cyclotomic field mismatch");
    }

    const CycloField* field_;
    std::vector<Rat> coeffs_;
};

}  // namespace fockcalc
