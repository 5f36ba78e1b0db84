#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "conclab/common.hpp"

namespace conclab {

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t c = 1;
    for (int i = 0; i < k; ++i) c = c * static_cast<std::uint64_t>(n - i) / (i + 1);
    return c;
}

// An n-site +-1 configuration packed into a machine word, bit i set <=> site i
// is +1.
struct SpinConfig {
    std::uint32_t bits = 0;
    int n = 0;

    int spin(int i) const { return (bits >> i) & 1u ? +1 : -1; }
    SpinConfig flipped(int i) const { return {bits ^ (1u << i), n}; }
};

// Occupancy vector on the slice C_{n,r} of the hypercube.
struct SliceConfig {
    std::uint32_t occupancy = 0;
    int n = 0;
    int r = 0;
};

// A permutation stored as the push-forward vector (x_i = sigma(i)), values in
// {1..n}, all distinct.
struct PermVector {
    std::vector<int> entries;
};

enum class SpaceKind { spins, slice, perms };

// Enumerable product-structured state space with a bijective state <-> index
// codec. Site values: spins -1/+1, slice 0/1, perms 1..n.
class Space {
  public:
    static constexpr int kSpinLimitDefault = 24;
    static constexpr int kPermLimit = 9;

    static Space spins(int n, int limit = kSpinLimitDefault) {
        if (n < 1 || n > limit)
            throw limit_error("spins(" + std::to_string(n) + "): site count exceeds enumeration limit " +
                              std::to_string(limit));
        Space s;
        s.kind_ = SpaceKind::spins;
        s.n_ = n;
        s.size_ = std::uint64_t(1) << n;
        return s;
    }

    static Space slice(int n, int r) {
        if (n < 1 || n > 32)
            throw limit_error("slice(" + std::to_string(n) + "," + std::to_string(r) +
                              "): site count exceeds enumeration limit 32");
        if (r < 0 || r > n) throw error("slice: particle count r must lie in [0, n]");
        Space s;
        s.kind_ = SpaceKind::slice;
        s.n_ = n;
        s.r_ = r;
        s.size_ = binomial(n, r);
        return s;
    }

    static Space perms(int n) {
        if (n < 1 || n > kPermLimit)
            throw limit_error("perms(" + std::to_string(n) + "): site count exceeds enumeration limit " +
                              std::to_string(kPermLimit));
        Space s;
        s.kind_ = SpaceKind::perms;
        s.n_ = n;
        s.size_ = 1;
        for (int i = 2; i <= n; ++i) s.size_ *= i;
        return s;
    }

    SpaceKind kind() const { return kind_; }
    int sites() const { return n_; }
    int particles() const { return r_; }
    std::size_t size() const { return static_cast<std::size_t>(size_); }

    std::vector<int> decode(std::size_t idx) const {
        std::vector<int> v(n_);
        switch (kind_) {
            case SpaceKind::spins:
                for (int i = 0; i < n_; ++i) v[i] = (idx >> i) & 1u ? +1 : -1;
                break;
            case SpaceKind::slice: {
                // combinatorial unranking, site 0 is the most significant choice
                std::uint64_t rank = idx;
                int left = r_;
                for (int i = 0; i < n_; ++i) {
                    std::uint64_t without = binomial(n_ - 1 - i, left);
                    if (rank < without) {
                        v[i] = 0;
                    } else {
                        v[i] = 1;
                        rank -= without;
                        --left;
                    }
                }
                break;
            }
            case SpaceKind::perms: {
                // Lehmer decoding in lexicographic order
                std::vector<int> avail(n_);
                std::iota(avail.begin(), avail.end(), 1);
                std::uint64_t rank = idx;
                std::uint64_t f = size_;
                for (int i = 0; i < n_; ++i) {
                    f /= (n_ - i);
                    std::size_t j = rank / f;
                    rank %= f;
                    v[i] = avail[j];
                    avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(j));
                }
                break;
            }
        }
        return v;
    }

    std::size_t encode(const std::vector<int>& v) const {
        require(static_cast<int>(v.size()) == n_, "encode: wrong number of sites");
        switch (kind_) {
            case SpaceKind::spins: {
                std::size_t idx = 0;
                for (int i = 0; i < n_; ++i)
                    if (v[i] > 0) idx |= std::size_t(1) << i;
                return idx;
            }
            case SpaceKind::slice: {
                std::uint64_t rank = 0;
                int left = r_;
                for (int i = 0; i < n_; ++i) {
                    if (v[i]) {
                        rank += binomial(n_ - 1 - i, left);
                        --left;
                    }
                }
                require(left == 0, "encode: occupancy does not have r particles");
                return static_cast<std::size_t>(rank);
            }
            case SpaceKind::perms: {
                std::uint64_t rank = 0;
                std::uint64_t f = size_;
                std::vector<int> avail(n_);
                std::iota(avail.begin(), avail.end(), 1);
                for (int i = 0; i < n_; ++i) {
                    f /= (n_ - i);
                    auto it = std::find(avail.begin(), avail.end(), v[i]);
                    require(it != avail.end(), "encode: not a permutation vector");
                    rank += static_cast<std::uint64_t>(it - avail.begin()) * f;
                    avail.erase(it);
                }
                return static_cast<std::size_t>(rank);
            }
        }
        throw error("encode: unreachable");
    }

    bool operator==(const Space& o) const { return kind_ == o.kind_ && n_ == o.n_ && r_ == o.r_; }

  private:
    SpaceKind kind_ = SpaceKind::spins;
    int n_ = 0;
    int r_ = 0;
    std::uint64_t size_ = 0;
};

// Explicit probability vector over an enumerated space. Probabilities are kept
// in both linear and log domain; entropy-like quantities read the log domain.
class TabulatedMeasure {
  public:
    TabulatedMeasure(Space space, std::vector<double> probs) : space_(std::move(space)), probs_(std::move(probs)) {
        require(probs_.size() == space_.size(), "measure: probability vector size mismatch");
        double s = 0.0;
        for (double p : probs_) {
            require(p >= 0.0, "measure: negative probability");
            s += p;
        }
        require(std::abs(s - 1.0) <= 1e-12, "measure: probabilities do not sum to 1");
        log_probs_.resize(probs_.size());
        for (std::size_t i = 0; i < probs_.size(); ++i)
            log_probs_[i] = probs_[i] > 0.0 ? std::log(probs_[i]) : -std::numeric_limits<double>::infinity();
    }

    static TabulatedMeasure uniform(const Space& space) {
        std::vector<double> p(space.size(), 1.0 / static_cast<double>(space.size()));
        return TabulatedMeasure(space, std::move(p));
    }

    // Normalizes exp(log_weights) through log-sum-exp; stable for strong
    // fields. Returns the measure and the log normalization constant.
    static std::pair<TabulatedMeasure, double> from_log_weights(const Space& space,
                                                                const std::vector<double>& log_weights) {
        require(log_weights.size() == space.size(), "from_log_weights: size mismatch");
        double m = *std::max_element(log_weights.begin(), log_weights.end());
        double s = 0.0;
        for (double lw : log_weights) s += std::exp(lw - m);
        double log_z = m + std::log(s);
        std::vector<double> probs(log_weights.size());
        double total = 0.0;
        for (std::size_t i = 0; i < log_weights.size(); ++i) total += probs[i] = std::exp(log_weights[i] - log_z);
        for (double& p : probs) p /= total; // absorb the last rounding into an exact renormalization
        TabulatedMeasure mu(space, std::move(probs));
        for (std::size_t i = 0; i < log_weights.size(); ++i) mu.log_probs_[i] = log_weights[i] - log_z;
        return {std::move(mu), log_z};
    }

    const Space& space() const { return space_; }
    std::size_t size() const { return probs_.size(); }
    double prob(std::size_t i) const { return probs_[i]; }
    double log_prob(std::size_t i) const { return log_probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

    void dump(std::ostream& os) const;

  private:
    Space space_;
    std::vector<double> probs_;
    std::vector<double> log_probs_;
};

inline std::string format_state(const Space& sp, const std::vector<int>& v) {
    std::string s;
    switch (sp.kind()) {
        case SpaceKind::spins:
            for (int x : v) s += x > 0 ? '+' : '-';
            break;
        case SpaceKind::slice:
            for (int x : v) s += x ? '1' : '0';
            break;
        case SpaceKind::perms:
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) s += ',';
                s += std::to_string(v[i]);
            }
            break;
    }
    return s;
}

inline void TabulatedMeasure::dump(std::ostream& os) const {
    char buf[64];
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", probs_[i]);
        os << i << ' ' << format_state(space_, space_.decode(i)) << ' ' << buf << '\n';
    }
}

// Family of index subsets I of {0..n-1} (0-based internally).
struct IndexFamily {
    std::vector<std::vector<int>> subsets;

    static IndexFamily singletons(int n) {
        IndexFamily f;
        for (int i = 0; i < n; ++i) f.subsets.push_back({i});
        return f;
    }

    // all two-element subsets; this is both the transposition family on
    // permutations and the Bernoulli-Laplace family on slices
    static IndexFamily pairs(int n) {
        IndexFamily f;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) f.subsets.push_back({i, j});
        return f;
    }

    // ring edges {i, i+1 mod n}
    static IndexFamily ring_pairs(int n) {
        IndexFamily f;
        for (int i = 0; i < n; ++i) {
            int j = (i + 1) % n;
            f.subsets.push_back({std::min(i, j), std::max(i, j)});
        }
        return f;
    }

    std::size_t size() const { return subsets.size(); }

    void validate(int n) const {
        require(!subsets.empty(), "index family: empty");
        for (const auto& I : subsets) {
            require(!I.empty(), "index family: empty subset");
            for (int i : I) require(i >= 0 && i < n, "index family: site out of range");
            require(std::is_sorted(I.begin(), I.end()) && std::adjacent_find(I.begin(), I.end()) == I.end(),
                    "index family: subset not sorted/unique");
        }
        for (std::size_t a = 0; a < subsets.size(); ++a)
            for (std::size_t b = a + 1; b < subsets.size(); ++b)
                require(subsets[a] != subsets[b], "index family: duplicate subset");
    }
};

// Disintegration of a measure with respect to the coordinates in I: the
// complement marginal together with the conditional kernel rows m_{x-bar}.
// Contexts with zero marginal mass carry no row.
struct ConditionalKernel {
    std::vector<int> sites;                                 // I, sorted
    std::vector<int> co_sites;                              // complement, sorted
    std::vector<std::vector<int>> contexts;                 // complement values per row
    std::vector<double> context_mass;                       // marginal of the complement
    std::vector<std::vector<std::vector<int>>> completions; // admissible values on I per row
    std::vector<std::vector<double>> probs;                 // conditional probabilities per row
    std::vector<std::vector<std::size_t>> states;           // glued full-state indices per row
    std::vector<std::ptrdiff_t> row_of_state;               // -1 when the context has zero mass

    std::ptrdiff_t find_context(const std::vector<int>& context) const {
        for (std::size_t r = 0; r < contexts.size(); ++r)
            if (contexts[r] == context) return static_cast<std::ptrdiff_t>(r);
        return -1;
    }
};

inline ConditionalKernel disintegrate(const TabulatedMeasure& mu, std::vector<int> sites) {
    const Space& sp = mu.space();
    std::sort(sites.begin(), sites.end());
    for (int i : sites) require(i >= 0 && i < sp.sites(), "disintegrate: site out of range");
    require(std::adjacent_find(sites.begin(), sites.end()) == sites.end(), "disintegrate: duplicate site");

    ConditionalKernel k;
    k.sites = sites;
    for (int i = 0; i < sp.sites(); ++i)
        if (!std::binary_search(sites.begin(), sites.end(), i)) k.co_sites.push_back(i);

    std::map<std::vector<int>, std::size_t> row_index;
    const std::size_t N = sp.size();
    std::vector<std::size_t> state_row(N);
    std::vector<std::vector<int>> state_completion(N);
    for (std::size_t idx = 0; idx < N; ++idx) {
        std::vector<int> v = sp.decode(idx);
        std::vector<int> ctx(k.co_sites.size());
        for (std::size_t j = 0; j < k.co_sites.size(); ++j) ctx[j] = v[static_cast<std::size_t>(k.co_sites[j])];
        std::vector<int> comp(k.sites.size());
        for (std::size_t j = 0; j < k.sites.size(); ++j) comp[j] = v[static_cast<std::size_t>(k.sites[j])];

        auto [it, fresh] = row_index.try_emplace(ctx, k.contexts.size());
        if (fresh) {
            k.contexts.push_back(ctx);
            k.context_mass.push_back(0.0);
            k.completions.emplace_back();
            k.probs.emplace_back();
            k.states.emplace_back();
        }
        std::size_t r = it->second;
        k.context_mass[r] += mu.prob(idx);
        k.completions[r].push_back(std::move(comp));
        k.probs[r].push_back(mu.prob(idx));
        k.states[r].push_back(idx);
        state_row[idx] = r;
    }

    // normalize positive-mass rows, drop the rest
    std::vector<std::ptrdiff_t> surviving(k.contexts.size(), -1);
    ConditionalKernel out;
    out.sites = k.sites;
    out.co_sites = k.co_sites;
    for (std::size_t r = 0; r < k.contexts.size(); ++r) {
        if (k.context_mass[r] <= 0.0) continue;
        surviving[r] = static_cast<std::ptrdiff_t>(out.contexts.size());
        out.contexts.push_back(std::move(k.contexts[r]));
        out.context_mass.push_back(k.context_mass[r]);
        for (double& p : k.probs[r]) p /= k.context_mass[r];
        out.completions.push_back(std::move(k.completions[r]));
        out.probs.push_back(std::move(k.probs[r]));
        out.states.push_back(std::move(k.states[r]));
    }
    out.row_of_state.resize(N);
    for (std::size_t idx = 0; idx < N; ++idx) out.row_of_state[idx] = surviving[state_row[idx]];
    return out;
}

// States of S_I with positive conditional mass for the given context. In
// general the supports differ between contexts (exclusion constraints), which
// is why every sup in the h-operator must go through this set.
inline std::vector<std::vector<int>> kernel_support(const ConditionalKernel& kernel, const std::vector<int>& context) {
    std::ptrdiff_t r = kernel.find_context(context);
    if (r < 0) throw error("kernel_support: unknown context (zero marginal mass or wrong shape)");
    std::vector<std::vector<int>> support;
    for (std::size_t j = 0; j < kernel.probs[static_cast<std::size_t>(r)].size(); ++j)
        if (kernel.probs[static_cast<std::size_t>(r)][j] > 0.0)
            support.push_back(kernel.completions[static_cast<std::size_t>(r)][j]);
    return support;
}

} // namespace conclab
