#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/diff_ops.hpp"
#include "conclab/functionals.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

// Symmetric order-d coefficient tensor with vanishing generalized diagonal,
// stored sparsely by strictly increasing index tuples (0-based).
struct CoefficientTensor {
    int order = 1;
    int n = 0;
    std::map<std::vector<int>, double> entries;

    CoefficientTensor(int n_, int order_) : order(order_), n(n_) {
        require(order >= 1, "tensor order must be >= 1");
        require(n >= order, "tensor needs at least as many sites as its order");
    }

    // accepts any permutation of distinct indices; rejects repeated indices
    void set(std::vector<int> idx, double value) {
        require(static_cast<int>(idx.size()) == order, "index tuple length mismatch");
        std::sort(idx.begin(), idx.end());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            require(idx[k] >= 0 && idx[k] < n, "tensor index out of range");
            if (k > 0 && idx[k] == idx[k - 1])
                throw error("tensor entry on the generalized diagonal (repeated index)");
        }
        if (value == 0.0)
            entries.erase(idx);
        else
            entries[idx] = value;
    }

    double at_sorted(const std::vector<int>& idx) const {
        auto it = entries.find(idx);
        return it == entries.end() ? 0.0 : it->second;
    }

    double at(std::vector<int> idx) const {
        std::sort(idx.begin(), idx.end());
        return at_sorted(idx);
    }

    static CoefficientTensor all_ones(int n, int order) {
        CoefficientTensor a(n, order);
        std::vector<int> idx(static_cast<std::size_t>(order));
        for (int k = 0; k < order; ++k) idx[static_cast<std::size_t>(k)] = k;
        while (true) {
            a.entries[idx] = 1.0;
            int k = order - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - order + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (int j = k + 1; j < order; ++j)
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
        return a;
    }
};

// (Hilbert-Schmidt over ordered tuples, entrywise sup)
inline std::pair<double, double> tensor_norms(const CoefficientTensor& a) {
    double fact = 1.0;
    for (int k = 2; k <= a.order; ++k) fact *= k;
    double sq = 0.0, sup = 0.0;
    for (const auto& [idx, v] : a.entries) {
        sq += fact * v * v;
        sup = std::max(sup, std::abs(v));
    }
    return {std::sqrt(sq), sup};
}

// Lines `i j ... value`, 1-based strictly increasing indices; '#' comments.
inline CoefficientTensor load_tensor(std::istream& in, int n, int order) {
    CoefficientTensor a(n, order);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string::size_type h = line.find('#');
        if (h != std::string::npos) line.erase(h);
        std::istringstream ss(line);
        std::vector<int> idx;
        int i;
        for (int k = 0; k < order; ++k) {
            if (!(ss >> i)) {
                if (k == 0 && ss.eof()) {
                    idx.clear();
                    break;
                }
                throw error("tensor file line " + std::to_string(lineno) + ": expected " + std::to_string(order) +
                            " indices");
            }
            idx.push_back(i - 1);
        }
        if (idx.empty()) continue; // blank line
        double v;
        if (!(ss >> v)) throw error("tensor file line " + std::to_string(lineno) + ": missing value");
        std::string rest;
        if (ss >> rest) throw error("tensor file line " + std::to_string(lineno) + ": trailing tokens");
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] < 0 || idx[k] >= n)
                throw error("tensor file line " + std::to_string(lineno) + ": index out of range");
            if (k > 0 && idx[k] <= idx[k - 1])
                throw error("tensor file line " + std::to_string(lineno) + ": indices must be strictly increasing");
        }
        if (a.entries.count(idx)) throw error("tensor file line " + std::to_string(lineno) + ": duplicate tuple");
        if (v != 0.0) a.entries[idx] = v;
    }
    return a;
}

inline void save_tensor(std::ostream& out, const CoefficientTensor& a) {
    char buf[64];
    for (const auto& [idx, v] : a.entries) {
        for (int i : idx) out << (i + 1) << ' ';
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << '\n';
    }
}

// f(x) = sum over index sets a_I prod_{i in I} x_i
inline double poly_eval(const std::vector<int>& x, const CoefficientTensor& a) {
    double s = 0.0;
    for (const auto& [idx, v] : a.entries) {
        double p = v;
        for (int i : idx) p *= x[static_cast<std::size_t>(i)];
        s += p;
    }
    return s;
}

inline FunctionTable poly_table(const Space& space, const CoefficientTensor& a) {
    require(space.sites() == a.n, "poly_table: site count mismatch");
    FunctionTable f(space.size());
    for (std::size_t s = 0; s < space.size(); ++s) f[s] = poly_eval(space.decode(s), a);
    return f;
}

// A^{(i)}: fix the last slot to i
inline CoefficientTensor slice_tensor(const CoefficientTensor& a, int i) {
    require(a.order >= 2, "slice_tensor: order must be >= 2");
    CoefficientTensor b(a.n, a.order - 1);
    for (const auto& [idx, v] : a.entries) {
        auto pos = std::find(idx.begin(), idx.end(), i);
        if (pos == idx.end()) continue;
        std::vector<int> rest;
        for (int j : idx)
            if (j != i) rest.push_back(j);
        b.entries[rest] = v;
    }
    return b;
}

namespace detail {

// memoized centered moments E prod_{i in S} (x_i - m_i)
struct CenteredMoments {
    const TabulatedMeasure* mu;
    std::vector<std::vector<int>> states;
    std::vector<double> means;
    std::map<std::vector<int>, double> cache;

    explicit CenteredMoments(const TabulatedMeasure& m) : mu(&m) {
        const Space& sp = m.space();
        states.reserve(m.size());
        for (std::size_t s = 0; s < m.size(); ++s) states.push_back(sp.decode(s));
        means.assign(static_cast<std::size_t>(sp.sites()), 0.0);
        for (std::size_t s = 0; s < m.size(); ++s)
            for (std::size_t i = 0; i < means.size(); ++i) means[i] += m.prob(s) * states[s][i];
    }

    double centered(std::size_t state, int i) const {
        return states[state][static_cast<std::size_t>(i)] - means[static_cast<std::size_t>(i)];
    }

    double moment(std::vector<int> sites) {
        std::sort(sites.begin(), sites.end());
        auto it = cache.find(sites);
        if (it != cache.end()) return it->second;
        double s = 0.0;
        for (std::size_t st = 0; st < mu->size(); ++st) {
            double p = mu->prob(st);
            if (p <= 0.0) continue;
            for (int i : sites) p *= centered(st, i);
            s += p;
        }
        cache.emplace(std::move(sites), s);
        return s;
    }
};

} // namespace detail

// Centered polynomial family, d = 1..4, summed over ordered index tuples of
// the symmetric extension. Writing Y_S for the product of centered
// coordinates over S and M_S for its exact mean:
//   d=1:  a_i Y_i
//   d=2:  a_ij (Y_ij - M_ij)
//   d=3:  a_ijk (Y_ijk - M_ijk - 3 Y_i M_jk)
//   d=4:  a_ijkl (Y_ijkl - M_ijkl - 4 Y_i M_jkl - 6 Y_ij M_kl + 6 M_ij M_kl)
// All means come from exact enumeration, so the expectation vanishes exactly.
inline FunctionTable centered_poly(const TabulatedMeasure& mu, const CoefficientTensor& a) {
    const int d = a.order;
    if (d < 1 || d > 4) throw error("centered_poly: unsupported order " + std::to_string(d) + " (supported: 1..4)");
    require(mu.space().sites() == a.n, "centered_poly: site count mismatch");
    detail::CenteredMoments mom(mu);

    // aggregate over ordered tuples into a constant, linear and pair parts,
    // and the full-degree set part
    double constant = 0.0;
    std::map<std::vector<int>, double> lin, pair2, full;
    for (const auto& [idx, v] : a.entries) {
        double fact = 1.0;
        for (int k = 2; k <= d; ++k) fact *= k;
        full[idx] += fact * v;
        std::vector<int> p = idx;
        std::sort(p.begin(), p.end());
        do {
            if (d >= 2) constant -= v * mom.moment(p);
            if (d == 3) lin[{p[0]}] -= 3.0 * v * mom.moment({p[1], p[2]});
            if (d == 4) {
                lin[{p[0]}] -= 4.0 * v * mom.moment({p[1], p[2], p[3]});
                std::vector<int> ij{p[0], p[1]};
                std::sort(ij.begin(), ij.end());
                double mkl = mom.moment({p[2], p[3]});
                pair2[ij] -= 6.0 * v * mkl;
                constant += 6.0 * v * mom.moment({p[0], p[1]}) * mkl;
            }
        } while (std::next_permutation(p.begin(), p.end()));
    }

    FunctionTable f(mu.size(), 0.0);
    for (std::size_t s = 0; s < mu.size(); ++s) {
        double val = constant;
        for (const auto& [i, c] : lin) val += c * mom.centered(s, i[0]);
        for (const auto& [ij, c] : pair2) val += c * mom.centered(s, ij[0]) * mom.centered(s, ij[1]);
        for (const auto& [idx, c] : full) {
            double p = c;
            for (int i : idx) p *= mom.centered(s, i);
            val += p;
        }
        f[s] = val;
    }
    return f;
}

struct RecursionCheck {
    double c_d = 0.0;      // measured proportionality constant
    double residual = 0.0; // max |h_i f_d - c_d |f_{d-1}^{(i)} - mean||
};

// Single-site difference of the centered family against the sliced family one
// order down; the constant is fitted at the largest entry and then asserted
// uniform through the residual.
inline RecursionCheck h_recursion_check(const TabulatedMeasure& mu, const CoefficientTensor& a) {
    require(a.order >= 2 && a.order <= 4, "h_recursion_check: order must be in {2,3,4}");
    FunctionTable f = centered_poly(mu, a);
    IndexFamily fam = IndexFamily::singletons(a.n);
    DifferenceTensor hf = h_upper(f, mu, fam);

    std::vector<FunctionTable> lower(static_cast<std::size_t>(a.n));
    for (int i = 0; i < a.n; ++i) {
        CoefficientTensor b = slice_tensor(a, i);
        FunctionTable g = centered_poly(mu, b);
        double m = expectation(mu, g);
        for (double& x : g) x = std::abs(x - m);
        lower[static_cast<std::size_t>(i)] = std::move(g);
    }

    RecursionCheck out;
    double best = 0.0;
    for (std::size_t s = 0; s < mu.size(); ++s) {
        if (mu.prob(s) <= 0.0) continue;
        for (int i = 0; i < a.n; ++i) {
            double g = lower[static_cast<std::size_t>(i)][s];
            if (g > best) {
                best = g;
                out.c_d = hf.at(s, static_cast<std::size_t>(i)) / g;
            }
        }
    }
    for (std::size_t s = 0; s < mu.size(); ++s) {
        if (mu.prob(s) <= 0.0) continue;
        for (int i = 0; i < a.n; ++i) {
            double g = lower[static_cast<std::size_t>(i)][s];
            double r = std::abs(hf.at(s, static_cast<std::size_t>(i)) - out.c_d * g);
            out.residual = std::max(out.residual, r);
        }
    }
    return out;
}

enum class TailKind {
    homogeneous_sup, // 2 exp(-t^{2/d} / (c n ||a||_inf^{2/d}))
    centered_hs      // 2 exp(-t^{2/d} / (C ||A||_HS^{2/d}))
};

inline double tail_bound(TailKind kind, int d, int n, double norm, double constant, double t) {
    require(t >= 0.0, "tail_bound: t must be nonnegative");
    require(d >= 1, "tail_bound: d must be >= 1");
    require(norm > 0.0 && constant > 0.0, "tail_bound: norm and constant must be positive");
    double denom = kind == TailKind::homogeneous_sup ? constant * n * std::pow(norm, 2.0 / d)
                                                     : constant * std::pow(norm, 2.0 / d);
    return 2.0 * std::exp(-std::pow(t, 2.0 / d) / denom);
}

struct AdaptiveTailPoint {
    double eta = 0.0;            // adaptive exponent at level t
    double threshold = 0.0;      // (d e) t, where the e^2 exp(-eta) bound applies
    double bound = 0.0;          // e^2 exp(-eta)
    double eta_rescaled = 0.0;   // eta / (d e)^2, valid at level t itself
    double bound_rescaled = 0.0; // e^2 exp(-eta_rescaled)
};

// eta_f(t) = min( t^{2/d} / (2C ||A||_2^{2/d}),
//                 min_{k<d} t^{2/k} / (2C ||h^{(k)} f||_2^{2/k}) )
inline AdaptiveTailPoint tail_bound_adaptive(const std::vector<double>& h_l2_norms, double a_hs_norm, double constant,
                                             int d, double t) {
    require(d >= 1, "tail_bound_adaptive: d must be >= 1");
    require(static_cast<int>(h_l2_norms.size()) == d - 1, "tail_bound_adaptive: need d-1 lower-order norms");
    require(a_hs_norm > 0.0 && constant > 0.0, "tail_bound_adaptive: norms and constant must be positive");
    require(t >= 0.0, "tail_bound_adaptive: t must be nonnegative");
    double eta = std::pow(t, 2.0 / d) / (2.0 * constant * std::pow(a_hs_norm, 2.0 / d));
    for (int k = 1; k < d; ++k) {
        double nk = h_l2_norms[static_cast<std::size_t>(k - 1)];
        require(nk > 0.0, "tail_bound_adaptive: norms must be positive");
        eta = std::min(eta, std::pow(t, 2.0 / k) / (2.0 * constant * std::pow(nk, 2.0 / k)));
    }
    AdaptiveTailPoint out;
    out.eta = eta;
    out.threshold = d * std::exp(1.0) * t;
    out.bound = std::exp(2.0 - eta);
    out.eta_rescaled = eta / (d * std::exp(1.0) * d * std::exp(1.0));
    out.bound_rescaled = std::exp(2.0 - out.eta_rescaled);
    return out;
}

struct ThirdOrderCorrection {
    FunctionTable raw;          // ordered-tuple evaluation of the cubic
    FunctionTable corrected;    // raw minus the linear correction
    std::vector<double> coeffs; // c_i = sum over ordered (j,k) of a_ijk E x_j x_k
};

// Corrects a cubic by the mean of its conditional linear part; everything is
// summed over ordered tuples of the symmetric extension.
inline ThirdOrderCorrection third_order_correction(const TabulatedMeasure& mu, const CoefficientTensor& a) {
    require(a.order == 3, "third_order_correction: order-3 tensor required");
    require(mu.space().sites() == a.n, "third_order_correction: site count mismatch");
    const Space& sp = mu.space();
    std::vector<std::vector<int>> states;
    states.reserve(mu.size());
    for (std::size_t s = 0; s < mu.size(); ++s) states.push_back(sp.decode(s));

    // pair moments E x_j x_k needed by the correction
    std::map<std::pair<int, int>, double> pm;
    auto pair_moment = [&](int j, int k) {
        auto key = std::minmax(j, k);
        auto it = pm.find(key);
        if (it != pm.end()) return it->second;
        double s = 0.0;
        for (std::size_t st = 0; st < mu.size(); ++st)
            s += mu.prob(st) * states[st][static_cast<std::size_t>(j)] * states[st][static_cast<std::size_t>(k)];
        pm.emplace(key, s);
        return s;
    };

    ThirdOrderCorrection out;
    out.coeffs.assign(static_cast<std::size_t>(a.n), 0.0);
    for (const auto& [idx, v] : a.entries) {
        // each of the 6 orderings contributes; grouping by the leading index
        // gives c_i += 2 a_{ijk} E x_j x_k per unordered pair behind it
        for (int pos = 0; pos < 3; ++pos) {
            int i = idx[static_cast<std::size_t>(pos)];
            int j = idx[static_cast<std::size_t>((pos + 1) % 3)];
            int k = idx[static_cast<std::size_t>((pos + 2) % 3)];
            out.coeffs[static_cast<std::size_t>(i)] += 2.0 * v * pair_moment(j, k);
        }
    }

    out.raw.assign(mu.size(), 0.0);
    out.corrected.assign(mu.size(), 0.0);
    for (std::size_t s = 0; s < mu.size(); ++s) {
        double cubic = 6.0 * poly_eval(states[s], a);
        double lin = 0.0;
        for (int i = 0; i < a.n; ++i) lin += out.coeffs[static_cast<std::size_t>(i)] * states[s][static_cast<std::size_t>(i)];
        out.raw[s] = cubic;
        out.corrected[s] = cubic - lin;
    }
    return out;
}

// Pointwise bounds B_k >= sup_x |h^{(k)} f|(x) for the degree-d all-ones
// polynomial over index sets: each distinct ordered k-tuple entry is at most
// 2^{k/2} C(n-k, d-k) by the iterated two-point product bound, repeated
// indices vanish, and there are k! C(n,k) distinct tuples.
inline std::vector<double> all_ones_h_sup_bounds(int n, int d) {
    require(d >= 1 && d <= n, "all_ones_h_sup_bounds: need 1 <= d <= n");
    std::vector<double> b;
    for (int k = 1; k <= d; ++k) {
        double tuples = binomial(n, k);
        for (int j = 2; j <= k; ++j) tuples *= j;
        b.push_back(std::pow(2.0, 0.5 * k) * binomial(n - k, d - k) * std::sqrt(tuples));
    }
    return b;
}

// Same pointwise bounds for a general tensor over index sets: an ordered
// k-tuple entry with underlying set I is at most 2^{k/2} sum_{J superset I} |a_J|.
inline std::vector<double> h_sup_bounds_from_tensor(const CoefficientTensor& a) {
    const int d = a.order;
    std::vector<double> b;
    std::vector<char> pick;
    for (int k = 1; k <= d; ++k) {
        std::map<std::vector<int>, double> subset_sum;
        for (const auto& [idx, v] : a.entries) {
            pick.assign(static_cast<std::size_t>(d), 0);
            std::fill(pick.begin(), pick.begin() + k, 1);
            do {
                std::vector<int> sub;
                for (int j = 0; j < d; ++j)
                    if (pick[static_cast<std::size_t>(j)]) sub.push_back(idx[static_cast<std::size_t>(j)]);
                subset_sum[sub] += std::abs(v);
            } while (std::prev_permutation(pick.begin(), pick.end()));
        }
        double fact = 1.0;
        for (int j = 2; j <= k; ++j) fact *= j;
        double sq = 0.0;
        for (const auto& [sub, s] : subset_sum) sq += fact * s * s;
        b.push_back(std::pow(2.0, 0.5 * k) * std::sqrt(sq));
    }
    return b;
}

// Certified constant c for the sup-scaled tail form
//   q^n(|f - Ef| >= t) <= 2 exp(-t^{2/d} / (c n ||a||_inf^{2/d}))
// from an LSI constant sigma2 and sup bounds B_k on the iterated difference
// tensors. The chain: the moment inequality iterated d times gives
// ||f - Ef||_p <= 2 sum_k (2 sigma2 p)^{k/2} B_k <= 2 (2 sigma2 p)^{d/2} R
// for p >= 2 with R = sum_k B_k (4 sigma2)^{(k-d)/2}; optimizing the Markov
// bound in p yields tail <= e^d exp(-c_exp t^{2/d}) for all t with
// c_exp = d / (4 sigma2 e (2R)^{2/d}), and inflating the decay rate by
// gamma = (d + log 2)/log 2 trades the e^d prefactor for the factor 2.
inline double certified_tail_constant(const std::vector<double>& h_sup_bounds, double sigma2, int d, int n,
                                      double a_sup) {
    require(static_cast<int>(h_sup_bounds.size()) == d, "certified_tail_constant: need d bounds");
    require(sigma2 > 0.0 && a_sup > 0.0 && n >= 1, "certified_tail_constant: positive inputs required");
    double r = 0.0;
    for (int k = 1; k <= d; ++k)
        r += h_sup_bounds[static_cast<std::size_t>(k - 1)] * std::pow(4.0 * sigma2, 0.5 * (k - d));
    require(r > 0.0, "certified_tail_constant: vanishing difference bounds");
    double c_exp = d / (4.0 * sigma2 * std::exp(1.0) * std::pow(2.0 * r, 2.0 / d));
    double gamma = (d + std::log(2.0)) / std::log(2.0);
    return gamma / (c_exp * n * std::pow(a_sup, 2.0 / d));
}

// 4 exp(-t^{2/3} / (2 c2 n)), stated for t > 2 c1 n^{3/2}
inline double cubic_range_tail(double c1, double c2, int n, double t) {
    require(c1 > 0.0 && c2 > 0.0 && n >= 1, "cubic_range_tail: positive constants required");
    require(t >= 0.0, "cubic_range_tail: t must be nonnegative");
    (void)c1;
    return 4.0 * std::exp(-std::pow(t, 2.0 / 3.0) / (2.0 * c2 * n));
}

inline double cubic_range_threshold(double c1, int n) { return 2.0 * c1 * std::pow(static_cast<double>(n), 1.5); }

} // namespace conclab
