#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "fockcalc/cyclotomic.hpp"
#include "fockcalc/rational.hpp"

namespace fockcalc {

/// Run-wide exact-arithmetic context: z-exponents live in (1/N)Z, roots of
/// unity in Q(zeta_M). M must be a multiple of N so that branch factors
/// e^{2 pi i p n} exist for every representable z-exponent n.
class Context {
public:
    Context(long exponent_denominator, unsigned long cyclo_order)
        : N_(exponent_denominator), field_(cyclo_order) {
        if (N_ <= 0) throw std::invalid_argument("exponent denominator must be positive");
        if (cyclo_order % static_cast<unsigned long>(N_) != 0)
            throw std::invalid_argument("cyclotomic order must be a multiple of N");
    }

    long N() const { return N_; }
    unsigned long M() const { return field_.order(); }
    const CycloField* field() const { return &field_; }

    bool z_exponent_ok(const Rat& r) const { return denominator_divides(r, Int(N_)); }
    bool unity_exponent_ok(const Rat& r) const {
        return denominator_divides(r, Int(static_cast<long>(field_.order())));
    }

private:
    long N_;
    CycloField field_;
};

/// Element of the ring Q(zeta_M)[z^{1/N}, z^{-1/N}]: finitely many terms
/// c * z^r with exact cyclotomic coefficients. Immutable value semantics.
class Scalar {
public:
    Scalar() : ctx_(nullptr) {}
    explicit Scalar(const Context* ctx) : ctx_(ctx) {}

    static Scalar zero(const Context* ctx) { return Scalar(ctx); }

    static Scalar from_cyclo(const Context* ctx, const Cyclo& c) {
        Scalar s(ctx);
        if (!c.is_zero()) s.terms_.emplace(Rat(0), c);
        return s;
    }

    static Scalar from_rat(const Context* ctx, const Rat& r) {
        return from_cyclo(ctx, Cyclo::from_rat(ctx->field(), r));
    }

    static Scalar one(const Context* ctx) { return from_rat(ctx, Rat(1)); }

    /// e^{2 pi i r} as an exact cyclotomic number; the denominator of r must
    /// divide M.
    static Scalar root_of_unity(const Context* ctx, const Rat& r) {
        if (!ctx->unity_exponent_ok(r))
            throw std::domain_error("root of unity exponent " + rat_str(r) +
                                    " not representable at order " + std::to_string(ctx->M()));
        Rat k = r * Rat(static_cast<long>(ctx->M()));
        return from_cyclo(ctx, Cyclo::zeta_power(ctx->field(), to_long(k.get_num())));
    }

    /// The monomial z^r; the denominator of r must divide N.
    static Scalar z_power(const Context* ctx, const Rat& r) {
        if (!ctx->z_exponent_ok(r))
            throw std::domain_error("z exponent " + rat_str(r) +
                                    " not representable with denominator bound " +
                                    std::to_string(ctx->N()));
        Scalar s(ctx);
        s.terms_.emplace(r, Cyclo::from_rat(ctx->field(), Rat(1)));
        return s;
    }

    static Scalar monomial(const Context* ctx, const Cyclo& c, const Rat& r) {
        Scalar s = z_power(ctx, r);
        return s * from_cyclo(ctx, c);
    }

    const Context* ctx() const { return ctx_; }
    const std::map<Rat, Cyclo>& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }
    bool is_monomial() const { return terms_.size() == 1; }

    bool is_one() const {
        if (terms_.size() != 1) return false;
        const auto& [e, c] = *terms_.begin();
        return e == 0 && c.is_rational() && c.rational_part() == 1;
    }

    friend Scalar operator+(const Scalar& a, const Scalar& b) {
        check(a, b);
        Scalar out(a.ctx_ ? a.ctx_ : b.ctx_);
        out.terms_ = a.terms_;
        for (const auto& [e, c] : b.terms_) {
            auto it = out.terms_.find(e);
            if (it == out.terms_.end()) {
                out.terms_.emplace(e, c);
            } else {
                Cyclo s = it->second + c;
                if (s.is_zero())
                    out.terms_.erase(it);
                else
                    it->second = s;
            }
        }
        return out;
    }

    Scalar operator-() const {
        Scalar out(ctx_);
        for (const auto& [e, c] : terms_) out.terms_.emplace(e, -c);
        return out;
    }

    friend Scalar operator-(const Scalar& a, const Scalar& b) { return a + (-b); }

    friend Scalar operator*(const Scalar& a, const Scalar& b) {
        check(a, b);
        Scalar out(a.ctx_ ? a.ctx_ : b.ctx_);
        for (const auto& [ea, ca] : a.terms_) {
            for (const auto& [eb, cb] : b.terms_) {
                Cyclo prod = ca * cb;
                if (prod.is_zero()) continue;
                Rat e = ea + eb;
                auto it = out.terms_.find(e);
                if (it == out.terms_.end()) {
                    out.terms_.emplace(std::move(e), std::move(prod));
                } else {
                    Cyclo s = it->second + prod;
                    if (s.is_zero())
                        out.terms_.erase(it);
                    else
                        it->second = s;
                }
            }
        }
        return out;
    }

    Scalar scaled(const Rat& r) const {
        if (r == 0) return Scalar(ctx_);
        Scalar out(ctx_);
        for (const auto& [e, c] : terms_) out.terms_.emplace(e, c.scaled(r));
        return out;
    }

    /// Exact inverse of a single-term scalar c*z^r, i.e. c^{-1} z^{-r}.
    /// Division by anything else is rejected: the ring is not a field.
    Scalar monomial_inverse() const {
        if (terms_.empty()) throw std::domain_error("inverse of zero scalar");
        if (terms_.size() != 1)
            throw std::domain_error("inverse requested for a non-monomial scalar");
        const auto& [e, c] = *terms_.begin();
        Scalar out(ctx_);
        out.terms_.emplace(-e, c.inverse());
        return out;
    }

    /// Integer power; negative powers require a monomial.
    Scalar pow_int(long k) const {
        if (k == 0) return one(ctx_);
        Scalar base = *this;
        if (k < 0) {
            base = monomial_inverse();
            k = -k;
        }
        Scalar acc = one(ctx_);
        unsigned long e = static_cast<unsigned long>(k);
        while (e) {
            if (e & 1) acc = acc * base;
            base = base * base;
            e >>= 1;
        }
        return acc;
    }

    /// Rational power of a monomial. For non-integer exponents the coefficient
    /// must be exactly 1 (a branch choice would otherwise be needed).
    Scalar pow_rat(const Rat& r) const {
        if (is_integer(r)) return pow_int(to_long(r.get_num()));
        if (terms_.size() != 1)
            throw std::domain_error("rational power of a non-monomial scalar");
        const auto& [e, c] = *terms_.begin();
        if (!(c.is_rational() && c.rational_part() == 1))
            throw std::domain_error("rational power requires coefficient 1");
        return z_power(ctx_, Rat(e * r));
    }

    friend bool operator==(const Scalar& a, const Scalar& b) {
        check(a, b);
        return a.terms_ == b.terms_;
    }
    friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }

    /// Deterministic total order (term-list lexicographic).
    friend bool operator<(const Scalar& a, const Scalar& b) {
        check(a, b);
        auto ia = a.terms_.begin(), ib = b.terms_.begin();
        for (; ia != a.terms_.end() && ib != b.terms_.end(); ++ia, ++ib) {
            if (ia->first != ib->first) return ia->first < ib->first;
            if (ia->second != ib->second) return ia->second < ib->second;
        }
        return ia == a.terms_.end() && ib != b.terms_.end();
    }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string out;
        bool first = true;
        for (const auto& [e, c] : terms_) {
            if (!first) out += " + ";
            out += "(" + c.str() + ")";
            if (e != 0) out += "*z^" + rat_str(e);
            first = false;
        }
        return out;
    }

private:
    static void check(const Scalar& a, const Scalar& b) {
        if (a.ctx_ && b.ctx_ && a.ctx_ != b.ctx_)
            throw std::invalid_argument("scalar context mismatch");
    }

    const Context* ctx_;
    std::map<Rat, Cyclo> terms_;
};

/// Exponent of an exponential scale factor: zeta = a*log z + b*pi*i with a, b
/// rational. Acting on a weight-h vector, e^{zeta L(0)} multiplies by
/// z^{a h} e^{pi i b h}, all exact.
struct ExpLin {
    Rat log_z;
    Rat pi_i;

    Scalar exp_times(const Context* ctx, const Rat& h) const {
        Scalar s = Scalar::z_power(ctx, Rat(log_z * h));
        if (pi_i != 0) s = s * Scalar::root_of_unity(ctx, Rat(pi_i * h / 2));
        return s;
    }

    ExpLin operator-() const { return ExpLin{-log_z, -pi_i}; }
};

}  // namespace fockcalc
