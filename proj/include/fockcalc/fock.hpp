#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fockcalc/series.hpp"

namespace fockcalc {

/// Multiset of positive integers, sorted descending: the basis element
/// alpha(-n1)...alpha(-nk) e^lambda of the Fock module F_lambda.
using Partition = std::vector<long>;

inline Partition partition_sorted(Partition p) {
    std::sort(p.begin(), p.end(), std::greater<long>());
    return p;
}

inline long partition_size(const Partition& p) {
    long s = 0;
    for (long n : p) s += n;
    return s;
}

/// All partitions of n (n >= 0), each sorted descending. Deterministic order.
inline const std::vector<Partition>& partitions_of(long n) {
    thread_local std::map<long, std::vector<Partition>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<Partition> out;
    if (n < 0) return cache.emplace(n, std::move(out)).first->second;
    if (n == 0) {
        out.push_back({});
        return cache.emplace(n, std::move(out)).first->second;
    }
    // largest part first, recursively
    std::vector<long> stack;
    auto rec = [&](auto&& self, long rest, long maxpart) -> void {
        if (rest == 0) {
            out.push_back(stack);
            return;
        }
        for (long k = std::min(rest, maxpart); k >= 1; --k) {
            stack.push_back(k);
            self(self, rest - k, k);
            stack.pop_back();
        }
    };
    rec(rec, n, n);
    return cache.emplace(n, std::move(out)).first->second;
}

inline std::string partition_str(const Partition& p) {
    std::string s = "[";
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i]);
    return s + "]";
}

/// Graded vector in the Fock module F_lambda: a finite exact linear
/// combination of partition-indexed basis elements with Scalar coefficients.
class FockVector {
public:
    FockVector() = default;

    static FockVector zero() { return FockVector(); }

    static FockVector basis(const Context* ctx, const Rat& momentum, Partition p) {
        FockVector v;
        v.momentum_ = momentum;
        v.terms_.emplace(partition_sorted(std::move(p)), Scalar::one(ctx));
        return v;
    }

    /// The lowest-weight vector e^lambda.
    static FockVector lowest(const Context* ctx, const Rat& momentum) {
        return basis(ctx, momentum, {});
    }

    const Rat& momentum() const { return momentum_; }
    const std::map<Partition, Scalar>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    Rat lowest_weight() const { return Rat(momentum_ * momentum_ / 2); }
    Rat weight_of(const Partition& p) const {
        return Rat(lowest_weight() + Rat(partition_size(p)));
    }
    long max_grade() const {
        long g = 0;
        for (const auto& [p, c] : terms_) g = std::max(g, partition_size(p));
        return g;
    }
    long max_part() const {
        long m = 0;
        for (const auto& [p, c] : terms_)
            if (!p.empty()) m = std::max(m, p.front());
        return m;
    }

    bool is_homogeneous() const {
        long g = -1;
        for (const auto& [p, c] : terms_) {
            if (g < 0) g = partition_size(p);
            if (partition_size(p) != g) return false;
        }
        return true;
    }

    void add_term(const Partition& p, const Scalar& c) {
        if (c.is_zero()) return;
        auto it = terms_.find(p);
        if (it == terms_.end()) {
            terms_.emplace(p, c);
        } else {
            Scalar s = it->second + c;
            if (s.is_zero())
                terms_.erase(it);
            else
                it->second = s;
        }
    }

    void set_momentum(const Rat& m) { momentum_ = m; }

    friend FockVector operator+(const FockVector& a, const FockVector& b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        if (a.momentum_ != b.momentum_)
            throw std::invalid_argument("momentum sector mismatch in vector sum");
        FockVector out = a;
        for (const auto& [p, c] : b.terms_) out.add_term(p, c);
        return out;
    }

    FockVector operator-() const {
        FockVector out;
        out.momentum_ = momentum_;
        for (const auto& [p, c] : terms_) out.terms_.emplace(p, -c);
        return out;
    }

    friend FockVector operator-(const FockVector& a, const FockVector& b) { return a + (-b); }

    FockVector scaled(const Scalar& s) const {
        FockVector out;
        out.momentum_ = momentum_;
        if (s.is_zero()) return out;
        for (const auto& [p, c] : terms_) {
            Scalar x = c * s;
            if (!x.is_zero()) out.terms_.emplace(p, x);
        }
        return out;
    }

    FockVector scaled_rat(const Rat& r) const {
        FockVector out;
        out.momentum_ = momentum_;
        if (r == 0) return out;
        for (const auto& [p, c] : terms_) out.terms_.emplace(p, c.scaled(r));
        return out;
    }

    /// Component of total weight w (= lowest weight + grade).
    FockVector weight_component(const Rat& w) const {
        FockVector out;
        out.momentum_ = momentum_;
        for (const auto& [p, c] : terms_)
            if (weight_of(p) == w) out.terms_.emplace(p, c);
        return out;
    }

    std::vector<Rat> weights() const {
        std::vector<Rat> ws;
        for (const auto& [p, c] : terms_) {
            Rat w = weight_of(p);
            if (std::find(ws.begin(), ws.end(), w) == ws.end()) ws.push_back(w);
        }
        return ws;
    }

    friend bool operator==(const FockVector& a, const FockVector& b) {
        if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
        return a.momentum_ == b.momentum_ && a.terms_ == b.terms_;
    }
    friend bool operator!=(const FockVector& a, const FockVector& b) { return !(a == b); }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string out;
        for (const auto& [p, c] : terms_) {
            if (!out.empty()) out += " + ";
            out += "(" + c.str() + ")*" + partition_str(p) + "e^" + rat_str(momentum_);
        }
        return out;
    }

private:
    Rat momentum_{0};
    std::map<Partition, Scalar> terms_;
};

inline bool coeff_is_zero(const FockVector& v) { return v.is_zero(); }
inline FockVector coeff_add(const FockVector& a, const FockVector& b) { return a + b; }
inline FockVector coeff_neg(const FockVector& a) { return -a; }
inline FockVector coeff_scale(const FockVector& a, const Scalar& s) { return a.scaled(s); }
inline FockVector coeff_scale_rat(const FockVector& a, const Rat& r) { return a.scaled_rat(r); }
inline bool coeff_eq(const FockVector& a, const FockVector& b) { return a == b; }

// ---------------------------------------------------------------------------
// Oscillator modes and Virasoro operators
// ---------------------------------------------------------------------------

/// alpha(n): creation for n < 0, the momentum eigenvalue for n = 0, and
/// annihilation via [alpha(m), alpha(-m)] = m for n > 0.
inline FockVector alpha(long n, const FockVector& w) {
    FockVector out;
    out.set_momentum(w.momentum());
    if (n == 0) return w.scaled_rat(w.momentum());
    for (const auto& [p, c] : w.terms()) {
        if (n < 0) {
            Partition q = p;
            q.push_back(-n);
            out.add_term(partition_sorted(std::move(q)), c);
        } else {
            long mult = static_cast<long>(std::count(p.begin(), p.end(), n));
            if (mult == 0) continue;
            Partition q;
            bool removed = false;
            for (long part : p) {
                if (!removed && part == n) {
                    removed = true;
                    continue;
                }
                q.push_back(part);
            }
            out.add_term(q, c.scaled(Rat(n * mult)));
        }
    }
    return out;
}

namespace detail {

/// Normal-ordered pair :alpha(a) alpha(b): with creation applied last.
inline FockVector normal_pair(long a, long b, const FockVector& w) {
    long lo = std::min(a, b), hi = std::max(a, b);
    return alpha(lo, alpha(hi, w));
}

}  // namespace detail

/// Virasoro mode L(n) = 1/2 sum_j :alpha(j) alpha(n-j): (central charge 1).
inline FockVector virasoro_L(long n, const FockVector& w) {
    if (w.is_zero()) return w;
    if (n == 0) {
        FockVector out;
        out.set_momentum(w.momentum());
        for (const auto& [p, c] : w.terms()) out.add_term(p, c.scaled(w.weight_of(p)));
        return out;
    }
    long mp = w.max_grade();  // annihilation indices beyond the grade act as zero
    FockVector acc;
    acc.set_momentum(w.momentum());
    for (long j = n - mp; j <= mp; ++j) {
        FockVector t = detail::normal_pair(j, n - j, w);
        if (!t.is_zero()) acc = acc + t.scaled_rat(rat(1, 2));
    }
    return acc;
}

/// exp(c L(1)) applied exactly; L(1) strictly lowers the grade, so the sum
/// terminates.
inline FockVector exp_L1(const Scalar& c, const FockVector& w) {
    FockVector acc = w;
    FockVector cur = w;
    Rat fact(1);
    for (long k = 1; !cur.is_zero(); ++k) {
        cur = virasoro_L(1, cur);
        fact *= k;
        if (cur.is_zero()) break;
        acc = acc + cur.scaled(c.pow_int(k)).scaled_rat(Rat(1 / fact));
    }
    return acc;
}

/// e^{zeta L(0)} with zeta = a log z + b pi i: multiplies each weight-h
/// component by z^{a h} e^{pi i b h}.
inline FockVector scale_L0(const Context* ctx, const ExpLin& zeta, const FockVector& w) {
    FockVector out;
    out.set_momentum(w.momentum());
    for (const auto& [p, c] : w.terms()) {
        out.add_term(p, c * zeta.exp_times(ctx, w.weight_of(p)));
    }
    return out;
}

/// c^{L(0)} for a monomial scalar c: multiplies weight-h components by c^h.
/// Non-integer weights require coefficient 1 (branch data must be routed
/// through an ExpLin instead).
inline FockVector scale_L0_scalar(const Scalar& c, const FockVector& w) {
    FockVector out;
    out.set_momentum(w.momentum());
    for (const auto& [p, cf] : w.terms()) out.add_term(p, cf * c.pow_rat(w.weight_of(p)));
    return out;
}

// ---------------------------------------------------------------------------
// Contragredient-side operations. A dual vector is stored as a FockVector in
// the same sector; its value on a basis element is the stored coefficient
// (the dual basis of the partition basis). The contragredient Virasoro
// operator acts by L'(n) w' = w' o L(-n).
// ---------------------------------------------------------------------------

/// Pairing of a dual vector with a module vector in the same sector.
inline Scalar pairing(const Context* ctx, const FockVector& dual, const FockVector& w) {
    if (!dual.is_zero() && !w.is_zero() && dual.momentum() != w.momentum())
        throw std::invalid_argument("pairing across different sectors");
    Scalar acc = Scalar::zero(ctx);
    for (const auto& [p, c] : dual.terms()) {
        auto it = w.terms().find(p);
        if (it != w.terms().end()) acc = acc + c * it->second;
    }
    return acc;
}

/// L'(n) on dual vectors: (L'(n) w')(b) = w'(L(-n) b).
inline FockVector dual_virasoro_L(const Context* ctx, long n, const FockVector& dual) {
    FockVector out;
    out.set_momentum(dual.momentum());
    if (dual.is_zero()) return out;
    // L(-n) shifts grade by +n, so the result is supported on grades g with
    // g + n appearing in the support of dual.
    std::vector<long> grades;
    for (const auto& [p, c] : dual.terms()) {
        long g = partition_size(p) - n;
        if (g >= 0 && std::find(grades.begin(), grades.end(), g) == grades.end())
            grades.push_back(g);
    }
    for (long g : grades) {
        for (const Partition& b : partitions_of(g)) {
            FockVector lb = virasoro_L(-n, FockVector::basis(ctx, dual.momentum(), b));
            Scalar v = pairing(ctx, dual, lb);
            out.add_term(b, v);
        }
    }
    return out;
}

/// exp(c L'(1)) on dual vectors; L'(1) = adjoint of L(-1) lowers the dual
/// grade, so the sum terminates.
inline FockVector dual_exp_L1(const Context* ctx, const Scalar& c, const FockVector& dual) {
    FockVector acc = dual;
    FockVector cur = dual;
    Rat fact(1);
    for (long k = 1; !cur.is_zero(); ++k) {
        cur = dual_virasoro_L(ctx, 1, cur);
        fact *= k;
        if (cur.is_zero()) break;
        acc = acc + cur.scaled(c.pow_int(k)).scaled_rat(Rat(1 / fact));
    }
    return acc;
}

/// e^{zeta L'(0)} on dual vectors; weights agree with the module grading.
inline FockVector dual_scale_L0(const Context* ctx, const ExpLin& zeta, const FockVector& dual) {
    return scale_L0(ctx, zeta, dual);
}

}  // namespace fockcalc
