#pragma once

#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "fockcalc/fock.hpp"

namespace fockcalc {

namespace detail {

using ExpMap = std::map<Rat, FockVector>;

inline void emadd(ExpMap& m, const Rat& e, const FockVector& v) {
    if (v.is_zero()) return;
    auto it = m.find(e);
    if (it == m.end()) {
        m.emplace(e, v);
    } else {
        FockVector s = it->second + v;
        if (s.is_zero())
            m.erase(it);
        else
            it->second = s;
    }
}

/// exp(s * sum_{n>=1} alpha(n) x^{-n} / n): annihilation exponential, finite
/// on each vector.
inline ExpMap apply_exp_annihilation(const Rat& s, const ExpMap& state) {
    ExpMap out;
    for (const auto& [e, v] : state) {
        // rec over nondecreasing annihilation mode choices
        auto rec = [&](auto&& self, long nmin, const Rat& base_e, const FockVector& cur,
                       const Rat& coeff) -> void {
            emadd(out, base_e, cur.scaled_rat(coeff));
            long top = cur.max_part();
            for (long n = nmin; n <= top; ++n) {
                FockVector w = cur;
                Rat c = coeff;
                for (long k = 1;; ++k) {
                    w = alpha(n, w);
                    if (w.is_zero()) break;
                    c *= s / Rat(n) / Rat(k);
                    self(self, n + 1, Rat(base_e - Rat(n * k)), w, c);
                }
            }
        };
        rec(rec, 1, e, v, Rat(1));
    }
    return out;
}

/// exp(s * sum_{n>=1} alpha(-n) x^{n} / n): creation exponential, truncated so
/// that no term exceeds exponent cap.
inline ExpMap apply_exp_creation(const Rat& s, const ExpMap& state, const Rat& cap) {
    ExpMap out;
    for (const auto& [e, v] : state) {
        Rat room = cap - e;
        if (room < 0) continue;
        long budget = to_long(rat_floor(room));
        auto rec = [&](auto&& self, long nmin, long left, const Rat& base_e, const FockVector& cur,
                       const Rat& coeff) -> void {
            emadd(out, base_e, cur.scaled_rat(coeff));
            for (long n = nmin; n <= left; ++n) {
                FockVector w = cur;
                Rat c = coeff;
                for (long k = 1; n * k <= left; ++k) {
                    w = alpha(-n, w);
                    c *= s / Rat(n) / Rat(k);
                    self(self, n + 1, left - n * k, Rat(base_e + Rat(n * k)), w, c);
                }
            }
        };
        rec(rec, 1, budget, e, v, Rat(1));
    }
    return out;
}

/// Annihilation-plus-zero-mode half of the oscillator factor derived from a
/// part of size n: sum over m >= 0 of C(-m-1, n-1) alpha(m) x^{-m-n}, the zero
/// mode contributing the original sector momentum mu.
inline ExpMap apply_factor_lowering(long n, const Rat& mu, const ExpMap& state) {
    ExpMap out;
    for (const auto& [e, v] : state) {
        Rat c0 = binomial(Rat(-1), static_cast<unsigned long>(n - 1)) * mu;
        emadd(out, Rat(e - Rat(n)), v.scaled_rat(c0));
        long top = v.max_part();
        for (long m = 1; m <= top; ++m) {
            FockVector w = alpha(m, v);
            if (w.is_zero()) continue;
            Rat c = binomial(Rat(-m - 1), static_cast<unsigned long>(n - 1));
            emadd(out, Rat(e - Rat(m + n)), w.scaled_rat(c));
        }
    }
    return out;
}

/// Creation half: sum over m <= -1 of C(-m-1, n-1) alpha(m) x^{-m-n},
/// truncated at exponent cap.
inline ExpMap apply_factor_raising(long n, const ExpMap& state, const Rat& cap) {
    ExpMap out;
    for (const auto& [e, v] : state) {
        for (long m = -1;; --m) {
            Rat enew = Rat(e + Rat(-m - n));
            if (enew > cap) break;
            Rat c = binomial(Rat(-m - 1), static_cast<unsigned long>(n - 1));
            if (c != 0) emadd(out, enew, alpha(m, v).scaled_rat(c));
        }
    }
    return out;
}

inline const Variable& internal_var() {
    static const Variable v{"__mode"};
    return v;
}

/// Coefficients of Y(alpha(-n1)...alpha(-nk) e^lam, x) applied to
/// alpha(-m1)... e^mu, for all exponents <= ehi. Realized as the normal
/// ordered product of the oscillator factors with the momentum exponential
/// E^-(lam,x) E^+(lam,x) e_lam x^{lam alpha(0)}; oscillator zero modes read
/// the source momentum mu.
inline ExpMap pair_mode_map(const Context* ctx, const Rat& lam, const Partition& parts,
                            const Rat& mu, const Partition& p2, const Rat& ehi) {
    ExpMap init;
    FockVector target = FockVector::basis(ctx, Rat(lam + mu), p2);
    init.emplace(Rat(lam * mu), target);

    ExpMap lowered = lam != 0 ? apply_exp_annihilation(Rat(-lam), init) : init;

    std::size_t k = parts.size();
    ExpMap total;
    for (std::size_t mask = 0; mask < (std::size_t(1) << k); ++mask) {
        // factors outside the mask act by their lowering halves first
        ExpMap st = lowered;
        for (std::size_t i = 0; i < k; ++i) {
            if (!(mask >> i & 1)) st = apply_factor_lowering(parts[i], mu, st);
        }
        // raising caps account for the minimal exponent shift of later stages
        std::vector<std::size_t> raised;
        for (std::size_t i = 0; i < k; ++i)
            if (mask >> i & 1) raised.push_back(i);
        Rat tail(0);
        for (std::size_t i : raised) tail += Rat(1 - parts[i]);
        if (lam != 0) st = apply_exp_creation(lam, st, Rat(ehi - tail));
        for (std::size_t j = 0; j < raised.size(); ++j) {
            tail -= Rat(1 - parts[raised[j]]);
            st = apply_factor_raising(parts[raised[j]], st, Rat(ehi - tail));
        }
        for (const auto& [e, v] : st)
            if (e <= ehi) emadd(total, e, v);
    }
    return total;
}

struct PairKey {
    Rat lam;
    Partition p1;
    Rat mu;
    Partition p2;
    auto tie() const { return std::tie(lam, p1, mu, p2); }
    friend bool operator<(const PairKey& a, const PairKey& b) { return a.tie() < b.tie(); }
};

struct PairCacheEntry {
    Rat ehi;
    ExpMap modes;
};

inline ExpMap& cached_pair_modes(const Context* ctx, const Rat& lam, const Partition& p1,
                                 const Rat& mu, const Partition& p2, const Rat& ehi) {
    thread_local std::map<std::pair<const Context*, PairKey>, PairCacheEntry> cache;
    auto key = std::make_pair(ctx, PairKey{lam, p1, mu, p2});
    auto it = cache.find(key);
    if (it == cache.end() || it->second.ehi < ehi) {
        PairCacheEntry e{ehi, pair_mode_map(ctx, lam, p1, mu, p2, ehi)};
        auto [pos, ok] = cache.insert_or_assign(key, std::move(e));
        return pos->second.modes;
    }
    return it->second.modes;
}

}  // namespace detail

/// Series Y(w1, x) w2 for w1 in F_lam, w2 in F_mu, with every coefficient of
/// x^e for e <= ehi present exactly. Lower truncation is structural: the
/// coefficient of x^e has weight wt(w1) + wt(w2) + e, which is bounded below
/// by the target sector's lowest weight.
inline FormalSeries<FockVector> intertwiner_series(const Context* ctx, const FockVector& w1,
                                                   const Variable& x, const FockVector& w2,
                                                   const Rat& ehi) {
    FormalSeries<FockVector> out;
    if (w1.is_zero() || w2.is_zero()) {
        out.validity[x] = Interval::at_most(ehi);
        return out;
    }
    Rat lam = w1.momentum(), mu = w2.momentum();
    Rat floor = Rat(Rat((lam + mu) * (lam + mu)) / 2);
    Rat min_exp = Rat(floor - w1.weight_of(w1.terms().begin()->first) -
                      w2.weight_of(w2.terms().begin()->first));
    for (const auto& [p1, c1] : w1.terms()) {
        for (const auto& [p2, c2] : w2.terms()) {
            const detail::ExpMap& modes = detail::cached_pair_modes(ctx, lam, p1, mu, p2, ehi);
            Scalar c = c1 * c2;
            Rat me = Rat(floor - w1.weight_of(p1) - w2.weight_of(p2));
            if (me < min_exp) min_exp = me;
            for (const auto& [e, v] : modes) {
                if (e > ehi) continue;
                out.add_term(ExponentVector::single(x, e), v.scaled(c));
            }
        }
    }
    out.validity.clear();
    out.validity[x] = Interval::at_most(ehi);
    out.support.clear();
    out.support[x] = Interval::at_least(min_exp);
    return out;
}

/// Coefficient of x^e in Y(w1, x) w2.
inline FockVector intertwiner_coeff(const Context* ctx, const FockVector& w1, const Rat& e,
                                    const FockVector& w2) {
    FormalSeries<FockVector> s = intertwiner_series(ctx, w1, detail::internal_var(), w2, e);
    return s.at(ExponentVector::single(detail::internal_var(), e));
}

/// Module vertex operator: the zero-momentum specialization.
inline FormalSeries<FockVector> vertex_Y(const Context* ctx, const FockVector& v,
                                         const Variable& x, const FockVector& w, const Rat& ehi) {
    if (!v.is_zero() && v.momentum() != 0)
        throw std::invalid_argument("vertex operator argument must lie in the lam = 0 sector");
    return intertwiner_series(ctx, v, x, w, ehi);
}

/// Opposite vertex operator Y*(v, x) = Y(e^{xL(1)} (-x^{-2})^{L(0)} v, x^{-1})
/// on integer-graded algebra vectors v. The series has finitely many powers
/// above any floor; coefficients are exact for every exponent >= elo.
inline FormalSeries<FockVector> opposite_Y(const Context* ctx, const FockVector& v,
                                           const Variable& x, const FockVector& w,
                                           const Rat& elo) {
    if (!v.is_zero() && v.momentum() != 0)
        throw std::invalid_argument("opposite vertex operator argument must have momentum 0");
    FormalSeries<FockVector> out;
    out.validity[x] = Interval::at_least(elo);
    if (v.is_zero() || w.is_zero()) {
        out.support[x] = Interval::at_most(elo);
        return out;
    }
    std::optional<Rat> max_e;
    for (const Rat& hw : v.weights()) {
        FockVector vh = v.weight_component(hw);
        if (!is_integer(hw)) throw std::invalid_argument("algebra vector with non-integer weight");
        long h = to_long(hw.get_num());
        Rat sign = (h % 2 == 0) ? Rat(1) : Rat(-1);
        FockVector u = vh.scaled_rat(sign);
        Rat fact(1);
        for (long j = 0; !u.is_zero(); ++j) {
            if (j > 0) {
                u = virasoro_L(1, u);
                fact *= j;
                if (u.is_zero()) break;
            }
            // contribution x^{j-2h} * Y(L(1)^j v / j!, x^{-1}) w
            Rat yhi = Rat(Rat(j - 2 * h) - elo);  // need y-exponents down to -(yhi)...
            FormalSeries<FockVector> ys =
                intertwiner_series(ctx, u.scaled_rat(Rat(1 / fact)), detail::internal_var(), w,
                                   yhi);
            for (const auto& [ev, vec] : ys.terms) {
                Rat f = ev.get(detail::internal_var());
                Rat e = Rat(Rat(j - 2 * h) - f);
                if (e < elo) continue;
                out.add_term(ExponentVector::single(x, e), vec);
                if (!max_e || e > *max_e) max_e = e;
            }
        }
    }
    out.support.clear();
    out.support[x] = Interval::at_most(max_e ? *max_e : elo);
    out.validity.clear();
    out.validity[x] = Interval::at_least(elo);
    return out;
}

/// Lift a scalar series to a vector-valued one: t |-> t * w.
inline FormalSeries<FockVector> series_vector(const FormalSeries<Scalar>& t, const FockVector& w) {
    FormalSeries<FockVector> out;
    out.validity = t.validity;
    out.support = t.support;
    for (const auto& [ev, c] : t.terms) out.add_term(ev, w.scaled(c));
    for (auto& [v, iv] : out.support) iv = box_support(t.support, v);
    return out;
}

/// exp(t L(1)) w for a scalar-series argument t; terminates by nilpotency of
/// L(1) on each vector.
inline FormalSeries<FockVector> exp_L1_series(const Context* ctx, const FormalSeries<Scalar>& t,
                                              const FockVector& w) {
    FormalSeries<FockVector> acc =
        series_vector(FormalSeries<Scalar>::from_coeff(Scalar::one(ctx)), w);
    if (t.terms.empty() || w.is_zero()) return acc;
    FormalSeries<Scalar> tk = t;
    FockVector lk = virasoro_L(1, w);
    Rat fact(1);
    for (long k = 1; !lk.is_zero(); ++k) {
        acc = series_add(acc, series_vector(tk, lk).scaled(Scalar::from_rat(ctx, Rat(1 / fact))));
        lk = virasoro_L(1, lk);
        if (lk.is_zero()) break;
        tk = series_mul(tk, t);
        fact *= (k + 1);
    }
    return acc;
}

/// base^{mult L(0)} w where base = (a + b) is iota-expanded: each weight-h
/// component is scaled by the expansion of (a+b)^{mult*h} on the window.
inline FormalSeries<FockVector> scale_L0_binomial(const Context* ctx, const Monomial& a,
                                                  const std::optional<Monomial>& b,
                                                  const Rat& mult, const FockVector& w,
                                                  const Box& window) {
    FormalSeries<FockVector> acc;
    bool first = true;
    for (const Rat& hw : w.weights()) {
        FockVector comp = w.weight_component(hw);
        FormalSeries<Scalar> s = iota_pow(ctx, a, b, Rat(mult * hw), window);
        FormalSeries<FockVector> part = series_vector(s, comp);
        acc = first ? part : series_add(acc, part);
        first = false;
    }
    return acc;
}

}  // namespace fockcalc
