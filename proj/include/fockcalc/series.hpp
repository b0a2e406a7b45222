#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fockcalc/scalar.hpp"

namespace fockcalc {

struct IllDefinedProduct : std::domain_error {
    using std::domain_error::domain_error;
};
struct WindowError : std::domain_error {
    using std::domain_error::domain_error;
};

struct Variable {
    std::string name;
    auto operator<=>(const Variable&) const = default;
};

/// Sparse exponent vector with rational entries; zero exponents are never
/// stored, entries sorted by variable name. Total order is lexicographic on
/// the (variable, exponent) sequence, giving deterministic term ordering and
/// first-difference witnesses.
class ExponentVector {
public:
    ExponentVector() = default;

    static ExponentVector single(const Variable& v, const Rat& e) {
        ExponentVector ev;
        if (e != 0) ev.e_.emplace_back(v, e);
        return ev;
    }

    Rat get(const Variable& v) const {
        for (const auto& [w, e] : e_)
            if (w == v) return e;
        return Rat(0);
    }

    bool has(const Variable& v) const {
        for (const auto& [w, e] : e_)
            if (w == v) return true;
        return false;
    }

    ExponentVector plus(const ExponentVector& o) const {
        ExponentVector out;
        auto ia = e_.begin(), ib = o.e_.begin();
        while (ia != e_.end() || ib != o.e_.end()) {
            if (ib == o.e_.end() || (ia != e_.end() && ia->first < ib->first)) {
                out.e_.push_back(*ia++);
            } else if (ia == e_.end() || ib->first < ia->first) {
                out.e_.push_back(*ib++);
            } else {
                Rat s = ia->first == ib->first ? Rat(ia->second + ib->second) : Rat(0);
                if (s != 0) out.e_.emplace_back(ia->first, s);
                ++ia, ++ib;
            }
        }
        return out;
    }

    ExponentVector without(const Variable& v) const {
        ExponentVector out;
        for (const auto& p : e_)
            if (p.first != v) out.e_.push_back(p);
        return out;
    }

    ExponentVector scaled(const Rat& k) const {
        ExponentVector out;
        if (k == 0) return out;
        for (const auto& [w, e] : e_) out.e_.emplace_back(w, Rat(e * k));
        return out;
    }

    const std::vector<std::pair<Variable, Rat>>& entries() const { return e_; }
    bool empty() const { return e_.empty(); }

    friend bool operator==(const ExponentVector& a, const ExponentVector& b) {
        return a.e_ == b.e_;
    }

    friend bool operator<(const ExponentVector& a, const ExponentVector& b) {
        auto ia = a.e_.begin(), ib = b.e_.begin();
        for (; ia != a.e_.end() && ib != b.e_.end(); ++ia, ++ib) {
            if (ia->first != ib->first) return ia->first < ib->first;
            if (ia->second != ib->second) return ia->second < ib->second;
        }
        return ia == a.e_.end() && ib != b.e_.end();
    }

    std::string str() const {
        if (e_.empty()) return "1";
        std::string out;
        for (const auto& [v, e] : e_) {
            if (!out.empty()) out += "*";
            out += v.name + "^" + rat_str(e);
        }
        return out;
    }

private:
    std::vector<std::pair<Variable, Rat>> e_;
};

/// Extended rational: finite value or +/- infinity.
struct Ext {
    int sign = 0;  // -1: -inf, 0: finite, +1: +inf
    Rat v{};

    static Ext neg_inf() { return Ext{-1, Rat(0)}; }
    static Ext pos_inf() { return Ext{+1, Rat(0)}; }
    static Ext fin(const Rat& r) { return Ext{0, r}; }

    bool infinite() const { return sign != 0; }

    friend bool operator==(const Ext& a, const Ext& b) {
        if (a.sign != b.sign) return false;
        return a.sign != 0 || a.v == b.v;
    }
    friend bool operator<(const Ext& a, const Ext& b) {
        if (a.sign != b.sign) return a.sign < b.sign;
        return a.sign == 0 && a.v < b.v;
    }
    friend bool operator<=(const Ext& a, const Ext& b) { return a < b || a == b; }

    friend Ext operator+(const Ext& a, const Ext& b) {
        if (a.sign == 0 && b.sign == 0) return fin(Rat(a.v + b.v));
        if (a.sign != 0 && b.sign != 0 && a.sign != b.sign)
            throw std::domain_error("indeterminate infinity sum");
        return a.sign != 0 ? a : b;
    }

    Ext negated() const { return Ext{-sign, Rat(-v)}; }

    std::string str() const {
        if (sign < 0) return "-inf";
        if (sign > 0) return "+inf";
        return rat_str(v);
    }
};

struct Interval {
    Ext lo = Ext::neg_inf();
    Ext hi = Ext::pos_inf();

    static Interval all() { return Interval{}; }
    static Interval point(const Rat& r) { return Interval{Ext::fin(r), Ext::fin(r)}; }
    static Interval bounded(const Rat& a, const Rat& b) {
        return Interval{Ext::fin(a), Ext::fin(b)};
    }
    static Interval at_least(const Rat& a) { return Interval{Ext::fin(a), Ext::pos_inf()}; }
    static Interval at_most(const Rat& b) { return Interval{Ext::neg_inf(), Ext::fin(b)}; }

    bool empty() const { return hi < lo; }
    bool contains(const Rat& r) const {
        Ext e = Ext::fin(r);
        return lo <= e && e <= hi;
    }
    bool contains(const Interval& o) const { return o.empty() || (lo <= o.lo && o.hi <= hi); }
    bool is_all() const { return lo.sign < 0 && hi.sign > 0; }

    Interval intersect(const Interval& o) const {
        return Interval{std::max(lo, o.lo, [](const Ext& a, const Ext& b) { return a < b; }),
                        std::min(hi, o.hi, [](const Ext& a, const Ext& b) { return a < b; })};
    }
    Interval hull(const Interval& o) const {
        if (empty()) return o;
        if (o.empty()) return *this;
        return Interval{std::min(lo, o.lo, [](const Ext& a, const Ext& b) { return a < b; }),
                        std::max(hi, o.hi, [](const Ext& a, const Ext& b) { return a < b; })};
    }
    Interval shifted(const Rat& r) const {
        Interval out = *this;
        if (out.lo.sign == 0) out.lo.v += r;
        if (out.hi.sign == 0) out.hi.v += r;
        return out;
    }
    Interval plus(const Interval& o) const { return Interval{lo + o.lo, hi + o.hi}; }
    Interval scaled(const Rat& k) const {
        if (k == 0) return point(Rat(0));
        Interval out{Ext{lo.sign, Rat(lo.v * k)}, Ext{hi.sign, Rat(hi.v * k)}};
        if (k < 0) {
            std::swap(out.lo, out.hi);
            out.lo.sign = -out.lo.sign;
            out.hi.sign = -out.hi.sign;
        }
        return out;
    }
    std::string str() const { return "[" + lo.str() + ", " + hi.str() + "]"; }
};

/// Per-variable interval map. Lookup semantics depend on use: validity
/// defaults to everything, support defaults to the single exponent 0.
using Box = std::map<Variable, Interval>;

inline Interval box_validity(const Box& b, const Variable& v) {
    auto it = b.find(v);
    return it == b.end() ? Interval::all() : it->second;
}
inline Interval box_support(const Box& b, const Variable& v) {
    auto it = b.find(v);
    return it == b.end() ? Interval::point(Rat(0)) : it->second;
}

inline bool window_contains(const Box& win, const ExponentVector& ev) {
    for (const auto& [v, e] : ev.entries()) {
        if (!box_validity(win, v).contains(e)) return false;
    }
    // variables of the window absent from ev have exponent 0
    for (const auto& [v, iv] : win) {
        if (!ev.has(v) && !iv.contains(Rat(0))) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Coefficient customization points. Each coefficient type T provides:
//   bool coeff_is_zero(const T&)
//   T    coeff_add(const T&, const T&)
//   T    coeff_neg(const T&)
//   T    coeff_scale(const T&, const Scalar&)
//   T    coeff_scale_rat(const T&, const Rat&)
//   bool coeff_eq(const T&, const T&)
// ---------------------------------------------------------------------------

inline bool coeff_is_zero(const Scalar& s) { return s.is_zero(); }
inline Scalar coeff_add(const Scalar& a, const Scalar& b) { return a + b; }
inline Scalar coeff_neg(const Scalar& a) { return -a; }
inline Scalar coeff_scale(const Scalar& a, const Scalar& s) { return a * s; }
inline Scalar coeff_scale_rat(const Scalar& a, const Rat& r) { return a.scaled(r); }
inline bool coeff_eq(const Scalar& a, const Scalar& b) { return a == b; }

/// Sparse formal series over a coefficient module T with exponents in Q per
/// variable. Two per-variable interval maps track what is known:
///   validity: stored coefficients equal the true series inside this box;
///             outside it nothing is claimed.
///   support:  the true series (the untruncated object) has no terms outside
///             this box. Constructors derive it structurally.
/// A series is exact in a variable when support lies inside validity there.
template <class T>
class FormalSeries {
public:
    std::map<ExponentVector, T> terms;
    Box validity;
    Box support;

    FormalSeries() = default;

    static FormalSeries zero() { return FormalSeries(); }

    static FormalSeries from_coeff(const T& c) {
        FormalSeries s;
        s.add_term(ExponentVector(), c);
        return s;
    }

    void add_term(const ExponentVector& ev, const T& c) {
        if (coeff_is_zero(c)) return;
        auto it = terms.find(ev);
        if (it == terms.end()) {
            terms.emplace(ev, c);
        } else {
            T s = coeff_add(it->second, c);
            if (coeff_is_zero(s))
                terms.erase(it);
            else
                it->second = std::move(s);
        }
        for (const auto& [v, e] : ev.entries()) {
            auto s = support.find(v);
            if (s == support.end())
                support.emplace(v, Interval::point(Rat(0)).hull(Interval::point(e)));
            else
                s->second = s->second.hull(Interval::point(e));
        }
    }

    T at(const ExponentVector& ev) const {
        auto it = terms.find(ev);
        return it == terms.end() ? T{} : it->second;
    }

    bool is_zero() const { return terms.empty(); }

    bool exact_in(const Variable& v) const {
        return box_validity(validity, v).contains(box_support(support, v));
    }

    FormalSeries neg() const {
        FormalSeries out;
        out.validity = validity;
        out.support = support;
        for (const auto& [ev, c] : terms) out.terms.emplace(ev, coeff_neg(c));
        return out;
    }

    FormalSeries scaled(const Scalar& s) const {
        FormalSeries out;
        out.validity = validity;
        out.support = support;
        if (s.is_zero()) return out;
        for (const auto& [ev, c] : terms) {
            T x = coeff_scale(c, s);
            if (!coeff_is_zero(x)) out.terms.emplace(ev, std::move(x));
        }
        return out;
    }

    /// Restrict validity to the given window, discarding terms outside it.
    FormalSeries restricted(const Box& win) const {
        FormalSeries out;
        out.support = support;
        out.validity = validity;
        for (const auto& [v, iv] : win) {
            out.validity[v] = box_validity(out.validity, v).intersect(iv);
        }
        for (const auto& [ev, c] : terms) {
            if (window_contains(out.validity, ev)) out.terms.emplace(ev, c);
        }
        return out;
    }

    std::vector<Variable> touched_vars() const {
        std::vector<Variable> vs;
        for (const auto& [v, iv] : support) vs.push_back(v);
        for (const auto& [v, iv] : validity) {
            if (support.find(v) == support.end()) vs.push_back(v);
        }
        std::sort(vs.begin(), vs.end());
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
        return vs;
    }

    std::string str() const {
        std::string out;
        for (const auto& [ev, c] : terms) {
            if (!out.empty()) out += "  +  ";
            if constexpr (std::is_same_v<T, Scalar>)
                out += "(" + c.str() + ")*" + ev.str();
            else
                out += "[coeff]*" + ev.str();
        }
        return out.empty() ? "0" : out;
    }
};

template <class T>
FormalSeries<T> series_add(const FormalSeries<T>& a, const FormalSeries<T>& b) {
    FormalSeries<T> out;
    // validity: intersect over all variables named by either operand
    out.validity = a.validity;
    for (const auto& [v, iv] : b.validity)
        out.validity[v] = box_validity(out.validity, v).intersect(iv);
    // support: hull, with absent variables meaning exponent 0
    out.support = a.support;
    for (auto& [v, iv] : out.support) iv = iv.hull(box_support(b.support, v));
    for (const auto& [v, iv] : b.support) {
        if (out.support.find(v) == out.support.end())
            out.support[v] = iv.hull(Interval::point(Rat(0)));
    }
    for (const auto& [ev, c] : a.terms)
        if (window_contains(out.validity, ev)) out.add_term(ev, c);
    for (const auto& [ev, c] : b.terms)
        if (window_contains(out.validity, ev)) out.add_term(ev, c);
    return out;
}

template <class T>
FormalSeries<T> series_sub(const FormalSeries<T>& a, const FormalSeries<T>& b) {
    return series_add(a, b.neg());
}

/// Product of a scalar series with a T-valued series. The output validity is
/// the largest per-variable box on which every contributing exponent split is
/// covered by both operands' validity boxes; a variable in which both true
/// supports are unbounded in opposite directions makes every output
/// coefficient a potentially infinite sum and raises IllDefinedProduct.
template <class T>
FormalSeries<T> series_mul(const FormalSeries<Scalar>& a, const FormalSeries<T>& b) {
    FormalSeries<T> out;
    std::vector<Variable> vars = a.touched_vars();
    for (const Variable& v : b.touched_vars()) vars.push_back(v);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

    for (const Variable& v : vars) {
        Interval sa = box_support(a.support, v), sb = box_support(b.support, v);
        Interval va = box_validity(a.validity, v), vb = box_validity(b.validity, v);
        bool a_lo_open = sa.lo.sign < 0, a_hi_open = sa.hi.sign > 0;
        bool b_lo_open = sb.lo.sign < 0, b_hi_open = sb.hi.sign > 0;
        if ((a_lo_open && b_hi_open) || (a_hi_open && b_lo_open))
            throw IllDefinedProduct("product ill-defined in variable " + v.name +
                                    ": infinitely many exponent splits per coefficient");
        Ext lo = Ext::neg_inf(), hi = Ext::pos_inf();
        auto tighten_lo = [&lo](const Ext& c) {
            if (lo < c) lo = c;
        };
        auto tighten_hi = [&hi](const Ext& c) {
            if (c < hi) hi = c;
        };
        // every split must read factor A inside A's validity...
        if (!(va.lo <= sa.lo)) tighten_lo(va.lo + sb.hi);
        if (!(sa.hi <= va.hi)) tighten_hi(va.hi + sb.lo);
        // ...and factor B inside B's validity
        if (!(vb.lo <= sb.lo)) tighten_lo(vb.lo + sa.hi);
        if (!(sb.hi <= vb.hi)) tighten_hi(vb.hi + sa.lo);
        Interval vc{lo, hi};
        if (!vc.is_all()) out.validity[v] = vc;
        Interval sc = sa.plus(sb);
        if (!(sc.lo == Ext::fin(Rat(0)) && sc.hi == Ext::fin(Rat(0)))) out.support[v] = sc;
    }

    for (const auto& [ea, ca] : a.terms) {
        for (const auto& [eb, cb] : b.terms) {
            ExponentVector e = ea.plus(eb);
            if (!window_contains(out.validity, e)) continue;
            out.add_term(e, coeff_scale(cb, ca));
        }
    }
    // add_term may have widened support entries beyond the structural bound;
    // restore the structural one (it is the sound promise about the true object)
    for (const Variable& v : vars) {
        Interval sa = box_support(a.support, v), sb = box_support(b.support, v);
        Interval sc = sa.plus(sb);
        if (sc.lo == Ext::fin(Rat(0)) && sc.hi == Ext::fin(Rat(0)))
            out.support.erase(v);
        else
            out.support[v] = sc;
    }
    return out;
}

template <class T>
FormalSeries<T> series_mul(const FormalSeries<T>& b, const FormalSeries<Scalar>& a)
    requires(!std::is_same_v<T, Scalar>)
{
    return series_mul(a, b);
}

/// Coefficient of var^k, as a series in the remaining variables.
template <class T>
FormalSeries<T> series_coeff_of(const FormalSeries<T>& s, const Variable& var, const Rat& k) {
    Interval sv = box_support(s.support, var);
    Interval vv = box_validity(s.validity, var);
    if (!vv.contains(k) && sv.contains(k))
        throw WindowError("coefficient of " + var.name + "^" + rat_str(k) +
                          " lies outside the certified window " + vv.str());
    FormalSeries<T> out;
    out.validity = s.validity;
    out.validity.erase(var);
    out.support = s.support;
    out.support.erase(var);
    for (const auto& [ev, c] : s.terms) {
        if (ev.get(var) == k) out.add_term(ev.without(var), c);
    }
    // restore structural supports for the remaining variables
    for (auto& [v, iv] : out.support) iv = box_support(s.support, v);
    return out;
}

/// Coefficient of var^{-1}.
template <class T>
FormalSeries<T> series_residue(const FormalSeries<T>& s, const Variable& var) {
    return series_coeff_of(s, var, Rat(-1));
}

/// Formal d/d(var): term c*var^e becomes e*c*var^{e-1}.
template <class T>
FormalSeries<T> series_derivative(const FormalSeries<T>& s, const Variable& var) {
    FormalSeries<T> out;
    out.validity = s.validity;
    Interval vv = box_validity(s.validity, var);
    if (!vv.is_all()) out.validity[var] = vv.shifted(Rat(-1));
    out.support = s.support;
    Interval sv = box_support(s.support, var);
    out.support[var] = sv.shifted(Rat(-1)).hull(Interval::point(Rat(0)));
    for (const auto& [ev, c] : s.terms) {
        Rat e = ev.get(var);
        if (e == 0) continue;
        ExponentVector base = ev.without(var);
        out.add_term(base.plus(ExponentVector::single(var, Rat(e - 1))), coeff_scale_rat(c, e));
    }
    for (auto& [v, iv] : out.support) {
        if (v == var)
            iv = sv.shifted(Rat(-1)).hull(Interval::point(Rat(0)));
        else
            iv = box_support(s.support, v);
    }
    return out;
}

/// Single monomial c * prod var^e with a one-term scalar coefficient.
struct Monomial {
    Scalar coeff;
    ExponentVector vars;

    static Monomial make(const Scalar& c, const ExponentVector& ev) {
        if (!c.is_monomial()) throw std::invalid_argument("monomial coefficient must be one term");
        return Monomial{c, ev};
    }
    static Monomial var(const Context* ctx, const Variable& v, const Rat& e = Rat(1)) {
        return Monomial{Scalar::one(ctx), ExponentVector::single(v, e)};
    }
    static Monomial scalar(const Scalar& c) { return make(c, ExponentVector()); }

    Monomial negated() const { return Monomial{-coeff, vars}; }

    /// Monomial^k with rational k (coefficient branch rules as Scalar::pow_rat).
    std::pair<Scalar, ExponentVector> pow(const Rat& k) const {
        return {coeff.pow_rat(k), vars.scaled(k)};
    }
};

/// Substitute var -> image termwise: var^e maps to image.coeff^e * image.vars^e.
/// Image variables must not already occur in the series.
template <class T>
FormalSeries<T> series_substitute(const FormalSeries<T>& s, const Variable& var,
                                  const Monomial& image) {
    for (const auto& [w, e] : image.vars.entries()) {
        if (w != var) {
            for (const Variable& t : s.touched_vars())
                if (t == w)
                    throw std::invalid_argument("substitution image variable " + w.name +
                                                " already occurs");
        }
    }
    FormalSeries<T> out;
    Interval vv = box_validity(s.validity, var);
    Interval sv = box_support(s.support, var);
    out.validity = s.validity;
    out.validity.erase(var);
    out.support = s.support;
    out.support.erase(var);
    for (const auto& [w, e] : image.vars.entries()) {
        if (!vv.is_all()) out.validity[w] = vv.scaled(e);
        out.support[w] = sv.scaled(e).hull(box_support(out.support, w));
    }
    for (const auto& [ev, c] : s.terms) {
        Rat e = ev.get(var);
        ExponentVector base = ev.without(var);
        Scalar factor = image.coeff.pow_rat(e);
        out.add_term(base.plus(image.vars.scaled(e)), coeff_scale(c, factor));
    }
    return out;
}

/// Substitute var^n -> z^n e^{2 pi i p n} (evaluation at the branch
/// l_p(z) = log z + 2 p pi i of the logarithm). Requires the series to be
/// exact in var, since coefficients of distinct powers merge.
inline FormalSeries<Scalar> eval_exp_lp(const FormalSeries<Scalar>& s, const Variable& var,
                                        long p, const Context* ctx) {
    if (!s.exact_in(var))
        throw WindowError("evaluation at e^{l_p(z)} requires a series exact in " + var.name);
    FormalSeries<Scalar> out;
    out.validity = s.validity;
    out.validity.erase(var);
    out.support = s.support;
    out.support.erase(var);
    for (const auto& [ev, c] : s.terms) {
        Rat e = ev.get(var);
        Scalar factor = Scalar::z_power(ctx, e);
        if (p != 0) factor = factor * Scalar::root_of_unity(ctx, Rat(e * Rat(p)));
        out.add_term(ev.without(var), c * factor);
    }
    for (auto& [v, iv] : out.support) iv = box_support(s.support, v);
    return out;
}

template <class T>
struct DiffWitness {
    ExponentVector at;
    T lhs;
    T rhs;
};

/// Exact coefficient comparison on a window that both operands certify.
/// Returns the lexicographically first differing exponent, if any.
template <class T>
std::optional<DiffWitness<T>> first_difference(const FormalSeries<T>& a, const FormalSeries<T>& b,
                                               const Box& win) {
    for (const auto& [v, iv] : win) {
        if (!box_validity(a.validity, v).contains(iv))
            throw WindowError("window " + iv.str() + " for " + v.name +
                              " not certified by left operand (" +
                              box_validity(a.validity, v).str() + ")");
        if (!box_validity(b.validity, v).contains(iv))
            throw WindowError("window " + iv.str() + " for " + v.name +
                              " not certified by right operand (" +
                              box_validity(b.validity, v).str() + ")");
    }
    auto ia = a.terms.begin();
    auto ib = b.terms.begin();
    while (ia != a.terms.end() || ib != b.terms.end()) {
        while (ia != a.terms.end() && !window_contains(win, ia->first)) ++ia;
        while (ib != b.terms.end() && !window_contains(win, ib->first)) ++ib;
        if (ia == a.terms.end() && ib == b.terms.end()) break;
        if (ib == b.terms.end() || (ia != a.terms.end() && ia->first < ib->first)) {
            return DiffWitness<T>{ia->first, ia->second, T{}};
        }
        if (ia == a.terms.end() || ib->first < ia->first) {
            return DiffWitness<T>{ib->first, T{}, ib->second};
        }
        if (!coeff_eq(ia->second, ib->second))
            return DiffWitness<T>{ia->first, ia->second, ib->second};
        ++ia, ++ib;
    }
    return std::nullopt;
}

template <class T>
bool equal_on_window(const FormalSeries<T>& a, const FormalSeries<T>& b, const Box& win) {
    return !first_difference(a, b, win).has_value();
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// delta(var) = sum over all integers n of var^n, truncated to the window.
inline FormalSeries<Scalar> delta_series(const Context* ctx, const Variable& var,
                                         const Interval& window) {
    if (window.lo.infinite() || window.hi.infinite())
        throw WindowError("delta series needs a finite window");
    FormalSeries<Scalar> out;
    out.validity[var] = window;
    out.support[var] = Interval::all();
    Int lo = rat_ceil(window.lo.v), hi = rat_floor(window.hi.v);
    for (Int n = lo; n <= hi; ++n)
        out.add_term(ExponentVector::single(var, Rat(n)), Scalar::one(ctx));
    out.support[var] = Interval::all();
    return out;
}

namespace detail {

/// Scan helper: exponent of one output term as a linear function of the
/// expansion indices; breaks the m-loop when a finite-window variable has
/// escaped monotonically.
inline bool monotone_escape(const Rat& value, const Rat& slope, const Interval& win) {
    if (slope > 0 && win.hi.sign == 0 && value > win.hi.v) return true;
    if (slope < 0 && win.lo.sign == 0 && value < win.lo.v) return true;
    return false;
}

}  // namespace detail

/// iota-plus expansion of (a + b)^r in nonnegative powers of the second
/// summand: sum over m >= 0 of C(r, m) a^{r-m} b^m. For r a nonnegative
/// integer the expansion is finite and exact (the window is ignored);
/// otherwise terms are kept inside the window, which must bound the scan.
inline FormalSeries<Scalar> iota_pow(const Context* ctx, const Monomial& a,
                                     const std::optional<Monomial>& b, const Rat& r,
                                     const Box& window = {}) {
    FormalSeries<Scalar> out;
    bool finite = is_integer(r) && r >= 0;
    if (!b.has_value()) {
        auto [c, ev] = a.pow(r);
        out.add_term(ev, c);
        return out;
    }
    // slopes of each variable's exponent as a function of m
    std::vector<std::pair<Variable, Rat>> slopes;
    {
        std::map<Variable, Rat> sl;
        for (const auto& [v, e] : a.vars.entries()) sl[v] -= e;
        for (const auto& [v, e] : b->vars.entries()) sl[v] += e;
        for (const auto& [v, e] : sl)
            if (e != 0) slopes.emplace_back(v, e);
    }
    if (!finite) {
        bool bounded = false;
        for (const auto& [v, sl] : slopes) {
            Interval w = box_validity(window, v);
            if ((sl > 0 && w.hi.sign == 0) || (sl < 0 && w.lo.sign == 0)) bounded = true;
        }
        if (!bounded)
            throw WindowError("iota expansion with exponent " + rat_str(r) +
                              " is not bounded by the window");
    }
    Box moving_win;
    for (const auto& [v, sl] : slopes) {
        Interval w = box_validity(window, v);
        if (!w.is_all()) moving_win[v] = w;
    }
    long m_cap = finite ? to_long(r.get_num()) : -1;
    for (long m = 0;; ++m) {
        if (m_cap >= 0 && m > m_cap) break;
        Rat rm = Rat(r - Rat(m));
        auto [ca, eva] = a.pow(rm);
        auto [cb, evb] = b->pow(Rat(m));
        ExponentVector ev = eva.plus(evb);
        bool inside = finite || window_contains(moving_win, ev);
        if (inside) out.add_term(ev, Scalar::from_rat(ctx, binomial(r, m)) * ca * cb);
        if (!finite) {
            bool escaped = false;
            for (const auto& [v, sl] : slopes) {
                if (detail::monotone_escape(ev.get(v), sl, box_validity(window, v)))
                    escaped = true;
            }
            if (escaped) break;
            if (m > 100000) throw WindowError("iota expansion failed to terminate");
        }
    }
    if (!finite) {
        // validity: the window, on the variables that move with m; support from slopes
        for (const auto& [v, sl] : slopes) {
            out.validity[v] = box_validity(window, v);
            Rat base = Rat(a.vars.get(v) * r);
            out.support[v] = sl > 0 ? Interval::at_least(base) : Interval::at_most(base);
        }
    }
    return out;
}

/// pre^{-1} * delta((a + b) / den) = sum over all integers n of
/// (a + b)^n den^{-n} pre^{-1}, the binomial expanded in nonnegative powers
/// of b. The prefactor usually equals the denominator but may differ, as in
/// x0^{-1} delta((x2 - x1)/(-x0)). All terms inside the window are produced;
/// the scan range for n is derived from the window (via a variable of the
/// denominator, or via a- and b-variables).
inline FormalSeries<Scalar> delta_frac(const Context* ctx, const Monomial& a, const Monomial& b,
                                       const Monomial& den, const Box& window,
                                       const std::optional<Monomial>& prefactor = std::nullopt) {
    const Monomial& pre = prefactor ? *prefactor : den;
    FormalSeries<Scalar> out;
    auto [cp, evp] = pre.pow(Rat(-1));
    // n-range rule 1: a variable of the denominator not occurring in a or b
    std::optional<Interval> n_range;
    for (const auto& [v, d] : den.vars.entries()) {
        if (a.vars.has(v) || b.vars.has(v)) continue;
        Interval w = box_validity(window, v);
        if (w.lo.sign != 0 && w.hi.sign != 0) continue;
        // exponent of v is -d*n - p
        Interval nr = w.shifted(pre.vars.get(v)).scaled(Rat(Rat(-1) / d));
        n_range = n_range ? n_range->intersect(nr) : nr;
    }
    if (!n_range) {
        // rule 2: a variable only in a and one only in b bound (n - m) and m
        std::optional<Interval> nm_range, m_range;
        for (const auto& [v, e] : a.vars.entries()) {
            if (b.vars.has(v) || den.vars.has(v) || pre.vars.has(v)) continue;
            Interval w = box_validity(window, v);
            if (w.lo.sign == 0 || w.hi.sign == 0) {
                Interval r = w.scaled(Rat(Rat(1) / e));
                nm_range = nm_range ? nm_range->intersect(r) : r;
            }
        }
        for (const auto& [v, e] : b.vars.entries()) {
            if (a.vars.has(v) || den.vars.has(v) || pre.vars.has(v)) continue;
            Interval w = box_validity(window, v);
            if (w.lo.sign == 0 || w.hi.sign == 0) {
                Interval r = w.scaled(Rat(Rat(1) / e));
                m_range = m_range ? m_range->intersect(r) : r;
            }
        }
        if (nm_range && m_range) {
            Interval mr = m_range->intersect(Interval::at_least(Rat(0)));
            n_range = nm_range->plus(mr);
        }
    }
    if (!n_range || n_range->lo.sign != 0 || n_range->hi.sign != 0)
        throw WindowError("delta expansion range for n not bounded by the window");

    Int n_lo = rat_ceil(n_range->lo.v), n_hi = rat_floor(n_range->hi.v);
    for (Int nz = n_lo; nz <= n_hi; ++nz) {
        long n = to_long(nz);
        Rat rn(n);
        auto [cd, evd] = den.pow(Rat(-rn));
        Scalar cdp = cd * cp;
        ExponentVector evdp = evd.plus(evp);
        // m-scan as in iota_pow
        std::map<Variable, Rat> sl;
        for (const auto& [v, e] : a.vars.entries()) sl[v] -= e;
        for (const auto& [v, e] : b.vars.entries()) sl[v] += e;
        long m_cap = n >= 0 ? n : -1;
        for (long m = 0;; ++m) {
            if (m_cap >= 0 && m > m_cap) break;
            auto [ca, eva] = a.pow(Rat(rn - Rat(m)));
            auto [cb, evb] = b.pow(Rat(m));
            ExponentVector ev = eva.plus(evb).plus(evdp);
            if (window_contains(window, ev))
                out.add_term(ev, Scalar::from_rat(ctx, binomial(rn, m)) * ca * cb * cdp);
            if (m_cap < 0) {
                bool escaped = false, movable = false;
                for (const auto& [v, s] : sl) {
                    if (s == 0) continue;
                    movable = true;
                    if (detail::monotone_escape(ev.get(v), s, box_validity(window, v)))
                        escaped = true;
                }
                if (escaped) break;
                if (!movable)
                    throw WindowError("delta expansion m-range unbounded for negative n");
                if (m > 100000) throw WindowError("delta expansion failed to terminate");
            }
        }
    }

    // validity = window on every touched variable; structural support bounds
    std::vector<Variable> vars;
    for (const auto& [v, e] : a.vars.entries()) vars.push_back(v);
    for (const auto& [v, e] : b.vars.entries()) vars.push_back(v);
    for (const auto& [v, e] : den.vars.entries()) vars.push_back(v);
    for (const auto& [v, e] : pre.vars.entries()) vars.push_back(v);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    for (const Variable& v : vars) {
        out.validity[v] = box_validity(window, v);
        Rat av = a.vars.get(v), bv = b.vars.get(v), dv = den.vars.get(v),
            pv = pre.vars.get(v);
        if (av - dv != 0) {
            out.support[v] = Interval::all();
        } else {
            Rat slope = Rat(bv - av);
            if (slope > 0)
                out.support[v] = Interval::at_least(Rat(-pv));
            else if (slope < 0)
                out.support[v] = Interval::at_most(Rat(-pv));
            else
                out.support[v] = Interval::point(Rat(-pv));
        }
    }
    return out;
}

/// Exact single-term series.
inline FormalSeries<Scalar> monomial_series(const Monomial& m) {
    FormalSeries<Scalar> out;
    out.add_term(m.vars, m.coeff);
    return out;
}

}  // namespace fockcalc
