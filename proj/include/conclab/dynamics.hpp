#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/functionals.hpp"
#include "conclab/ising.hpp"
#include "conclab/rng.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

enum class ChainKind { glauber, transposition, bernoulli_laplace, ssep };

struct ChainSpec {
    ChainKind kind = ChainKind::glauber;
    std::optional<IsingModel> model; // glauber only
    int n = 0;
    int r = 0; // slice occupancy for bl/ssep
    long long steps = 0;
    long long burn_in = 0;
    long long thinning = 1;
    std::uint64_t seed = 1;

    void validate() const {
        require(steps > burn_in, "chain spec: steps must exceed burn_in");
        require(thinning >= 1, "chain spec: thinning must be >= 1");
        require(n >= 1, "chain spec: n must be >= 1");
        if (kind == ChainKind::glauber) require(model.has_value(), "chain spec: glauber needs a model");
        if (kind == ChainKind::bernoulli_laplace || kind == ChainKind::ssep)
            require(r >= 0 && r <= n, "chain spec: occupancy out of range");
    }

    static ChainSpec glauber_chain(IsingModel m, long long steps, long long burn_in, long long thinning,
                                   std::uint64_t seed) {
        ChainSpec s;
        s.kind = ChainKind::glauber;
        s.n = m.sites();
        s.model = std::move(m);
        s.steps = steps;
        s.burn_in = burn_in;
        s.thinning = thinning;
        s.seed = seed;
        s.validate();
        return s;
    }
    static ChainSpec transposition_chain(int n, long long steps, long long burn_in, long long thinning,
                                         std::uint64_t seed) {
        ChainSpec s;
        s.kind = ChainKind::transposition;
        s.n = n;
        s.steps = steps;
        s.burn_in = burn_in;
        s.thinning = thinning;
        s.seed = seed;
        s.validate();
        return s;
    }
    static ChainSpec bl_chain(int n, int r, long long steps, long long burn_in, long long thinning,
                              std::uint64_t seed) {
        ChainSpec s;
        s.kind = ChainKind::bernoulli_laplace;
        s.n = n;
        s.r = r;
        s.steps = steps;
        s.burn_in = burn_in;
        s.thinning = thinning;
        s.seed = seed;
        s.validate();
        return s;
    }
    static ChainSpec ssep_chain(int n, int r, long long steps, long long burn_in, long long thinning,
                                std::uint64_t seed) {
        ChainSpec s = bl_chain(n, r, steps, burn_in, thinning, seed);
        s.kind = ChainKind::ssep;
        return s;
    }
};

// resample a uniformly chosen site from its conditional
inline void glauber_step(const IsingModel& model, std::vector<int>& sigma, CounterRng& rng) {
    int i = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(model.sites())));
    double p = conditional_plus(model, i, sigma);
    sigma[static_cast<std::size_t>(i)] = rng.next_double() < p ? 1 : -1;
}

// swap a uniformly chosen unordered pair of entries
inline void transposition_step(std::vector<int>& x, CounterRng& rng) {
    const std::size_t n = x.size();
    std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n - 1);
    if (j >= i) ++j;
    std::swap(x[i], x[j]);
}

// ordered pair (i, j) uniform; moves only if i is occupied and j empty
inline void bl_step(std::vector<int>& x, CounterRng& rng) {
    const std::size_t n = x.size();
    std::size_t i = rng.next_below(n);
    std::size_t j = rng.next_below(n - 1);
    if (j >= i) ++j;
    if (x[i] == 1 && x[j] == 0) std::swap(x[i], x[j]);
}

// swap across a uniformly chosen ring edge, the last edge wrapping around
inline void ssep_step(std::vector<int>& x, CounterRng& rng) {
    const std::size_t n = x.size();
    std::size_t i = rng.next_below(n);
    std::swap(x[i], x[(i + 1) % n]);
}

inline Space chain_space(const ChainSpec& spec) {
    switch (spec.kind) {
        case ChainKind::glauber: return Space::spins(spec.n);
        case ChainKind::transposition: return Space::perms(spec.n);
        default: return Space::slice(spec.n, spec.r);
    }
}

// Exact one-step transition matrix of the discrete-time chain, for
// stationarity and reversibility checks at small sizes.
inline std::vector<std::vector<double>> transition_matrix(const ChainSpec& spec) {
    spec.validate();
    Space sp = chain_space(spec);
    const std::size_t N = sp.size();
    const int n = spec.n;
    std::vector<std::vector<double>> P(N, std::vector<double>(N, 0.0));
    for (std::size_t s = 0; s < N; ++s) {
        std::vector<int> x = sp.decode(s);
        if (spec.kind == ChainKind::glauber) {
            for (int i = 0; i < n; ++i) {
                double p = conditional_plus(*spec.model, i, x);
                std::vector<int> y = x;
                y[static_cast<std::size_t>(i)] = 1;
                P[s][sp.encode(y)] += p / n;
                y[static_cast<std::size_t>(i)] = -1;
                P[s][sp.encode(y)] += (1.0 - p) / n;
            }
        } else if (spec.kind == ChainKind::transposition) {
            double w = 1.0 / binomial(n, 2);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    std::vector<int> y = x;
                    std::swap(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
                    P[s][sp.encode(y)] += w;
                }
        } else if (spec.kind == ChainKind::bernoulli_laplace) {
            double w = 1.0 / (static_cast<double>(n) * (n - 1));
            double stay = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i == j) continue;
                    if (x[static_cast<std::size_t>(i)] == 1 && x[static_cast<std::size_t>(j)] == 0) {
                        std::vector<int> y = x;
                        std::swap(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
                        P[s][sp.encode(y)] += w;
                    } else {
                        stay += w;
                    }
                }
            P[s][s] += stay;
        } else { // ssep
            double w = 1.0 / n;
            for (int i = 0; i < n; ++i) {
                std::vector<int> y = x;
                std::swap(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>((i + 1) % n)]);
                P[s][sp.encode(y)] += w;
            }
        }
    }
    return P;
}

// Lemma-style equality between the squared difference operator and the jump
// generator: lhs = E|df|^2 over the pair family, rhs = -E f Gf for the chain
// generator, kappa their measured ratio.
inline DirichletReport generator_identity_check(const TabulatedMeasure& mu, const FunctionTable& f, ChainKind kind) {
    require(kind == ChainKind::bernoulli_laplace || kind == ChainKind::ssep,
            "generator_identity_check: particle-swap chains only");
    const Space& sp = mu.space();
    require(sp.kind() == SpaceKind::slice, "generator_identity_check: slice space required");
    const int n = sp.sites();
    IndexFamily fam = kind == ChainKind::bernoulli_laplace ? IndexFamily::pairs(n) : IndexFamily::ring_pairs(n);

    DirichletReport rep;
    rep.dirichlet = dirichlet_form(f, mu, KernelSet(mu, fam));
    double inner = 0.0;
    for (std::size_t s = 0; s < mu.size(); ++s) {
        if (mu.prob(s) <= 0.0) continue;
        std::vector<int> x = sp.decode(s);
        double gf = 0.0;
        if (kind == ChainKind::bernoulli_laplace) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i == j || x[static_cast<std::size_t>(i)] != 1 || x[static_cast<std::size_t>(j)] != 0)
                        continue;
                    std::vector<int> y = x;
                    std::swap(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
                    gf += f[sp.encode(y)] - f[s];
                }
        } else {
            for (int i = 0; i < n; ++i) {
                std::vector<int> y = x;
                std::swap(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>((i + 1) % n)]);
                gf += f[sp.encode(y)] - f[s];
            }
        }
        inner += mu.prob(s) * f[s] * (-gf);
    }
    rep.generator = inner;
    rep.kappa = inner != 0.0 ? rep.dirichlet / inner : 0.0;
    return rep;
}

struct LsiScaling {
    double value = 0.0;
    bool constant_unspecified = true; // the leading c is not pinned down; reported with c = 1
};

inline LsiScaling named_lsi_scaling(ChainKind kind, int n, int r = 0) {
    require(n >= 2, "named_lsi_scaling: n must be >= 2");
    LsiScaling s;
    switch (kind) {
        case ChainKind::transposition: s.value = std::log(static_cast<double>(n)) / n; break;
        case ChainKind::bernoulli_laplace:
            require(r >= 1 && r <= n - 1, "named_lsi_scaling: occupancy must be interior");
            s.value = std::log(static_cast<double>(n) * n / (static_cast<double>(r) * (n - r))) / n;
            break;
        case ChainKind::ssep: s.value = static_cast<double>(n) * n; break;
        default: throw error("named_lsi_scaling: no published scaling for this chain");
    }
    return s;
}

struct SampleBatch {
    ChainSpec spec;
    std::vector<double> values;
};

using Observable = std::function<double(const std::vector<int>&)>;

// Sequential single-stream run; the RNG stream is a pure function of the
// seed, so reruns are bitwise identical.
inline SampleBatch run_chain(const ChainSpec& spec, const Observable& f, std::uint64_t task = 0) {
    spec.validate();
    CounterRng rng(spec.seed, task);
    std::vector<int> x;
    if (spec.kind == ChainKind::glauber) {
        x.assign(static_cast<std::size_t>(spec.n), 1);
    } else if (spec.kind == ChainKind::transposition) {
        x.resize(static_cast<std::size_t>(spec.n));
        for (int i = 0; i < spec.n; ++i) x[static_cast<std::size_t>(i)] = i + 1;
    } else {
        x.assign(static_cast<std::size_t>(spec.n), 0);
        for (int i = 0; i < spec.r; ++i) x[static_cast<std::size_t>(i)] = 1;
    }
    SampleBatch batch;
    batch.spec = spec;
    batch.values.reserve(static_cast<std::size_t>((spec.steps - spec.burn_in) / spec.thinning));
    for (long long k = 1; k <= spec.steps; ++k) {
        switch (spec.kind) {
            case ChainKind::glauber: glauber_step(*spec.model, x, rng); break;
            case ChainKind::transposition: transposition_step(x, rng); break;
            case ChainKind::bernoulli_laplace: bl_step(x, rng); break;
            case ChainKind::ssep: ssep_step(x, rng); break;
        }
        if (k > spec.burn_in && (k - spec.burn_in) % spec.thinning == 0) batch.values.push_back(f(x));
    }
    return batch;
}

struct TailPoint {
    double t = 0.0;
    double empirical = 0.0;
    double bound = 0.0;
    double std_error = 0.0;
};

using TailCurve = std::vector<TailPoint>;

// fraction of |v - mean| >= t with a binomial standard error
inline TailCurve empirical_tail(const SampleBatch& batch, const std::vector<double>& t_grid) {
    require(!batch.values.empty(), "empirical_tail: empty batch");
    double mean = 0.0;
    for (double v : batch.values) mean += v;
    mean /= static_cast<double>(batch.values.size());
    TailCurve curve;
    for (double t : t_grid) {
        require(t >= 0.0, "empirical_tail: t must be nonnegative");
        std::size_t count = 0;
        for (double v : batch.values)
            if (std::abs(v - mean) >= t) ++count;
        TailPoint p;
        p.t = t;
        p.empirical = static_cast<double>(count) / static_cast<double>(batch.values.size());
        p.std_error = std::sqrt(p.empirical * (1.0 - p.empirical) / static_cast<double>(batch.values.size()));
        curve.push_back(p);
    }
    return curve;
}

} // namespace conclab
