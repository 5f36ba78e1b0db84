#pragma once

#include <cmath>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/ising.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

// Real-valued function tabulated over a state codec.
using FunctionTable = std::vector<double>;

// Disintegration kernels for every subset of a family, built once and shared
// by all difference-operator evaluations against the same measure.
struct KernelSet {
    IndexFamily family;
    std::vector<ConditionalKernel> kernels;
    std::size_t n_states = 0;

    KernelSet(const TabulatedMeasure& mu, IndexFamily fam) : family(std::move(fam)), n_states(mu.size()) {
        family.validate(mu.space().sites());
        kernels.reserve(family.size());
        for (const auto& I : family.subsets) kernels.push_back(disintegrate(mu, I));
    }
};

// Order-d array of nonnegative difference magnitudes indexed by (state,
// I_1..I_d), multi-index stored row-major with I_1 slowest.
struct DifferenceTensor {
    int order = 1;
    IndexFamily family;
    std::size_t n_states = 0;
    std::vector<double> values;

    std::size_t multi_count() const {
        std::size_t m = 1;
        for (int k = 0; k < order; ++k) m *= family.size();
        return m;
    }

    double at(std::size_t state, std::size_t flat) const { return values[state * multi_count() + flat]; }

    // Euclidean norm over the multi-index at one state
    double state_norm(std::size_t state) const {
        const std::size_t m = multi_count();
        double s = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            double v = values[state * m + a];
            s += v * v;
        }
        return std::sqrt(s);
    }

    FunctionTable state_norms() const {
        FunctionTable out(n_states);
        for (std::size_t x = 0; x < n_states; ++x) out[x] = state_norm(x);
        return out;
    }
};

namespace detail {

inline void check_tensor_budget(std::size_t n_states, std::size_t fam, int order) {
    long double cells = static_cast<long double>(n_states);
    for (int k = 0; k < order; ++k) cells *= static_cast<long double>(fam);
    if (cells * sizeof(double) > 2.0L * 1024 * 1024 * 1024)
        throw limit_error("difference tensor exceeds the 2 GiB memory budget");
}

// h_I g depends only on the context row: (max - min over the support) / sqrt(2)
inline void h_one_subset(const ConditionalKernel& k, const double* g, double* out, std::size_t stride,
                         std::size_t n_states) {
    for (std::size_t x = 0; x < n_states; ++x) out[x * stride] = 0.0;
    for (std::size_t r = 0; r < k.states.size(); ++r) {
        double lo = 0.0, hi = 0.0;
        bool seen = false;
        for (std::size_t j = 0; j < k.states[r].size(); ++j) {
            if (k.probs[r][j] <= 0.0) continue;
            double v = g[k.states[r][j]];
            if (!seen) {
                lo = hi = v;
                seen = true;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        double val = seen ? (hi - lo) / std::sqrt(2.0) : 0.0;
        for (std::size_t s : k.states[r]) out[s * stride] = val;
    }
}

} // namespace detail

// partial_I f(x) = (1/2 int (f(x) - f(xbar, y))^2 dm)^{1/2}
inline DifferenceTensor d_lower(const FunctionTable& f, const KernelSet& ks) {
    require(f.size() == ks.n_states, "d_lower: function size mismatch");
    DifferenceTensor t;
    t.order = 1;
    t.family = ks.family;
    t.n_states = ks.n_states;
    t.values.assign(ks.n_states * ks.family.size(), 0.0);
    const std::size_t F = ks.family.size();
    for (std::size_t a = 0; a < F; ++a) {
        const ConditionalKernel& k = ks.kernels[a];
        for (std::size_t x = 0; x < ks.n_states; ++x) {
            std::ptrdiff_t r = k.row_of_state[x];
            if (r < 0) continue;
            double s = 0.0;
            const auto& row_states = k.states[static_cast<std::size_t>(r)];
            const auto& row_probs = k.probs[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < row_states.size(); ++j) {
                double d = f[x] - f[row_states[j]];
                s += row_probs[j] * d * d;
            }
            t.values[x * F + a] = std::sqrt(0.5 * s);
        }
    }
    return t;
}

inline DifferenceTensor d_lower(const FunctionTable& f, const TabulatedMeasure& mu, const IndexFamily& family) {
    return d_lower(f, KernelSet(mu, family));
}

// h_I f(x) = 2^{-1/2} sup over positive-mass pairs (y,z) of |f(xbar,y) - f(xbar,z)|
inline DifferenceTensor h_upper(const FunctionTable& f, const KernelSet& ks) {
    require(f.size() == ks.n_states, "h_upper: function size mismatch");
    DifferenceTensor t;
    t.order = 1;
    t.family = ks.family;
    t.n_states = ks.n_states;
    t.values.assign(ks.n_states * ks.family.size(), 0.0);
    const std::size_t F = ks.family.size();
    for (std::size_t a = 0; a < F; ++a)
        detail::h_one_subset(ks.kernels[a], f.data(), t.values.data() + a, F, ks.n_states);
    return t;
}

inline DifferenceTensor h_upper(const FunctionTable& f, const TabulatedMeasure& mu, const IndexFamily& family) {
    return h_upper(f, KernelSet(mu, family));
}

// Iterated tensor h^{(d)} f, coordinatewise h_{I_1}(h_{I_2...I_d} f).
inline DifferenceTensor h_tensor(const FunctionTable& f, const KernelSet& ks, int order) {
    require(order >= 1, "h_tensor: order must be >= 1");
    detail::check_tensor_budget(ks.n_states, ks.family.size(), order);
    DifferenceTensor t = h_upper(f, ks);
    const std::size_t F = ks.family.size();
    std::vector<double> column(ks.n_states);
    for (int d = 2; d <= order; ++d) {
        DifferenceTensor next;
        next.order = d;
        next.family = ks.family;
        next.n_states = ks.n_states;
        const std::size_t tails = t.multi_count();
        next.values.assign(ks.n_states * F * tails, 0.0);
        for (std::size_t tail = 0; tail < tails; ++tail) {
            for (std::size_t x = 0; x < ks.n_states; ++x) column[x] = t.values[x * tails + tail];
            for (std::size_t a = 0; a < F; ++a)
                detail::h_one_subset(ks.kernels[a], column.data(), next.values.data() + a * tails + tail, F * tails,
                                     ks.n_states);
        }
        t = std::move(next);
    }
    return t;
}

inline DifferenceTensor h_tensor(const FunctionTable& f, const TabulatedMeasure& mu, const IndexFamily& family,
                                 int order) {
    return h_tensor(f, KernelSet(mu, family), order);
}

// Ising-only product-form upper bound: one entry per subset |I| = d with value
// 2^{-d/2} |prod_{i in I} (Id - T_i) f|(x); its state norm dominates
// |h^{(d)} f|(x) pointwise.
inline DifferenceTensor h_product_bound(const FunctionTable& f, const Space& space, int order) {
    require(space.kind() == SpaceKind::spins, "h_product_bound: spins only");
    require(order >= 1, "h_product_bound: order must be >= 1");
    const int n = space.sites();
    const std::size_t N = space.size();
    require(f.size() == N, "h_product_bound: function size mismatch");

    DifferenceTensor t;
    t.order = 1; // stored as an order-1 tensor over the family of d-subsets
    t.n_states = N;

    std::vector<int> idx(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) idx[static_cast<std::size_t>(k)] = k;
    std::vector<std::vector<int>> subsets;
    if (order <= n) {
        while (true) {
            subsets.push_back(idx);
            int k = order - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - order + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (int j = k + 1; j < order; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    t.family.subsets = subsets;
    detail::check_tensor_budget(N, subsets.size(), 1);
    t.values.assign(N * subsets.size(), 0.0);

    const double scale = std::pow(2.0, -0.5 * order);
    std::vector<double> g(N);
    for (std::size_t a = 0; a < subsets.size(); ++a) {
        g = f;
        for (int i : subsets[a]) {
            // g <- (Id - T_i) g
            for (std::size_t x = 0; x < N; ++x) {
                std::size_t y = x ^ (std::size_t(1) << i);
                if (x < y) {
                    double gx = g[x], gy = g[y];
                    g[x] = gx - gy;
                    g[y] = gy - gx;
                }
            }
        }
        for (std::size_t x = 0; x < N; ++x) t.values[x * subsets.size() + a] = scale * std::abs(g[x]);
    }
    return t;
}

enum class NormKind { l2, sup };

// L^2(mu) or ess-sup aggregation of the per-state Euclidean norm |T|(x)
inline double tensor_norm(const DifferenceTensor& t, const TabulatedMeasure& mu, NormKind kind) {
    require(t.n_states == mu.size(), "tensor_norm: measure size mismatch");
    double acc = 0.0;
    for (std::size_t x = 0; x < t.n_states; ++x) {
        if (mu.prob(x) <= 0.0) continue;
        double v = t.state_norm(x);
        if (kind == NormKind::l2)
            acc += mu.prob(x) * v * v;
        else
            acc = std::max(acc, v);
    }
    return kind == NormKind::l2 ? std::sqrt(acc) : acc;
}

} // namespace conclab
