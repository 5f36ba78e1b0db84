#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/functionals.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

inline void check_same_codec(const TabulatedMeasure& mu, const TabulatedMeasure& nu) {
    if (mu.space().kind() != nu.space().kind() || mu.space().sites() != nu.space().sites() ||
        mu.size() != nu.size())
        throw error("measures live on different state codecs");
}

inline double tv(const TabulatedMeasure& mu, const TabulatedMeasure& nu) {
    check_same_codec(mu, nu);
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) s += std::abs(mu.prob(x) - nu.prob(x));
    return 0.5 * s;
}

// distribution of coordinate i
inline std::map<int, double> coord_marginal(const TabulatedMeasure& mu, int i) {
    std::map<int, double> m;
    for (std::size_t s = 0; s < mu.size(); ++s) {
        if (mu.prob(s) <= 0.0) continue;
        m[mu.space().decode(s)[static_cast<std::size_t>(i)]] += mu.prob(s);
    }
    return m;
}

inline double tv_maps(const std::map<int, double>& a, const std::map<int, double>& b) {
    double s = 0.0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        s += std::abs(v - (it == b.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b)
        if (!a.count(k)) s += v;
    return 0.5 * s;
}

struct TransportPlan {
    std::vector<std::size_t> rows, cols; // state indices carrying mass
    std::vector<double> row_mass, col_mass;
    std::vector<std::vector<double>> mass; // rows x cols, nonnegative

    double max_marginal_error() const {
        double worst = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols.size(); ++c) s += mass[r][c];
            worst = std::max(worst, std::abs(s - row_mass[r]));
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows.size(); ++r) s += mass[r][c];
            worst = std::max(worst, std::abs(s - col_mass[c]));
        }
        return worst;
    }
};

namespace detail {

// Exact transportation LP by successive shortest augmenting paths with node
// potentials; costs must be nonnegative.
inline std::vector<std::vector<double>> transport_lp(const std::vector<double>& supply,
                                                     const std::vector<double>& demand,
                                                     const std::vector<std::vector<double>>& cost) {
    const std::size_t R = supply.size(), C = demand.size(), V = R + C;
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (double a : supply) total += a;
    std::vector<std::vector<double>> flow(R, std::vector<double>(C, 0.0));
    std::vector<double> a = supply, b = demand, h(V, 0.0), dist(V);
    std::vector<int> parent(V);
    std::vector<char> done(V);
    const double eps = 1e-15 * std::max(total, 1.0);

    for (std::size_t iter = 0; iter < 4 * V + 64; ++iter) {
        double rem = 0.0;
        for (double x : a) rem += x;
        if (rem <= eps) break;

        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t r = 0; r < R; ++r)
            if (a[r] > eps) dist[r] = 0.0;
        for (std::size_t step = 0; step < V; ++step) {
            std::size_t u = V;
            double best = inf;
            for (std::size_t v = 0; v < V; ++v)
                if (!done[v] && dist[v] < best) {
                    best = dist[v];
                    u = v;
                }
            if (u == V) break;
            done[u] = 1;
            if (u < R) {
                for (std::size_t c = 0; c < C; ++c) {
                    if (done[R + c]) continue; // re-relaxing a finalized node could cycle the parent chain
                    double w = cost[u][c] + h[u] - h[R + c];
                    if (dist[u] + w < dist[R + c] - 1e-18) {
                        dist[R + c] = dist[u] + w;
                        parent[R + c] = static_cast<int>(u);
                    }
                }
            } else {
                std::size_t c = u - R;
                for (std::size_t r = 0; r < R; ++r) {
                    if (done[r] || flow[r][c] <= eps) continue;
                    double w = -cost[r][c] + h[R + c] - h[r];
                    if (dist[u] + w < dist[r] - 1e-18) {
                        dist[r] = dist[u] + w;
                        parent[r] = static_cast<int>(u);
                    }
                }
            }
        }

        std::size_t t = V;
        double bestd = inf;
        for (std::size_t c = 0; c < C; ++c)
            if (b[c] > eps && dist[R + c] < bestd) {
                bestd = dist[R + c];
                t = R + c;
            }
        require(t != V, "transport solver: no augmenting path");
        for (std::size_t v = 0; v < V; ++v)
            if (dist[v] < inf) h[v] += std::min(dist[v], bestd);

        // bottleneck along the parent chain
        double push = b[t - R];
        for (std::size_t v = t; parent[v] >= 0;) {
            std::size_t u = static_cast<std::size_t>(parent[v]);
            if (v < R) push = std::min(push, flow[v][u - R]); // backward edge
            v = u;
            if (parent[v] < 0) push = std::min(push, a[v]);
        }
        for (std::size_t v = t; parent[v] >= 0;) {
            std::size_t u = static_cast<std::size_t>(parent[v]);
            if (v >= R)
                flow[u][v - R] += push;
            else
                flow[v][u - R] -= push;
            v = u;
        }
        b[t - R] -= push;
        // the chain root is a supply row
        std::size_t root = t;
        while (parent[root] >= 0) root = static_cast<std::size_t>(parent[root]);
        a[root] -= push;
    }
    double rem = 0.0;
    for (double x : a) rem += x;
    require(rem <= 1e-10 * std::max(total, 1.0), "transport solver failed to route all mass");
    return flow;
}

} // namespace detail

struct W2Result {
    double value = 0.0;
    TransportPlan plan;
    double gap = 0.0;
    int iterations = 0;
};

namespace detail {

// Minimizes (sum_i pi(x_i != y_i)^2)^{1/2} over couplings by conditional
// gradient: the linearized subproblem is a transport LP, the step size comes
// from exact line search, and the duality gap certifies the tolerance.
inline W2Result w2_core(const std::vector<double>& mu_w, const std::vector<double>& nu_w,
                        const std::vector<std::vector<int>>& coords, const std::vector<std::size_t>& labels,
                        double tol, int max_iter = 4000) {
    const std::size_t M = mu_w.size();
    std::vector<std::size_t> rows, cols;
    for (std::size_t s = 0; s < M; ++s) {
        if (mu_w[s] > 0.0) rows.push_back(s);
        if (nu_w[s] > 0.0) cols.push_back(s);
    }
    const std::size_t R = rows.size(), C = cols.size();
    const std::size_t n = coords.empty() ? 0 : coords[0].size();

    std::vector<std::vector<int>> diff(R, std::vector<int>(C));
    std::vector<std::vector<std::vector<std::size_t>>> differ_at(R,
                                                                 std::vector<std::vector<std::size_t>>(C));
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) {
            int d = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (coords[rows[r]][i] != coords[cols[c]][i]) {
                    ++d;
                    differ_at[r][c].push_back(i);
                }
            diff[r][c] = d;
        }

    // start from the greedy partial-diagonal coupling
    std::vector<std::vector<double>> pi(R, std::vector<double>(C, 0.0));
    {
        std::vector<double> a(R), b(C);
        for (std::size_t r = 0; r < R; ++r) a[r] = mu_w[rows[r]];
        for (std::size_t c = 0; c < C; ++c) b[c] = nu_w[cols[c]];
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                if (rows[r] == cols[c]) {
                    double m = std::min(a[r], b[c]);
                    pi[r][c] += m;
                    a[r] -= m;
                    b[c] -= m;
                }
        std::size_t c = 0;
        for (std::size_t r = 0; r < R; ++r)
            while (a[r] > 0.0 && c < C) {
                double m = std::min(a[r], b[c]);
                pi[r][c] += m;
                a[r] -= m;
                b[c] -= m;
                if (b[c] <= 0.0) ++c;
            }
    }

    auto mismatch = [&](const std::vector<std::vector<double>>& p) {
        std::vector<double> u(n, 0.0);
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                if (p[r][c] > 0.0)
                    for (std::size_t i : differ_at[r][c]) u[i] += p[r][c];
        return u;
    };

    W2Result out;
    std::vector<double> supply(R), demand(C);
    for (std::size_t r = 0; r < R; ++r) supply[r] = mu_w[rows[r]];
    for (std::size_t c = 0; c < C; ++c) demand[c] = nu_w[cols[c]];

    double G = 0.0, gap = std::numeric_limits<double>::infinity();
    std::vector<double> u;
    // active vertex decomposition pi = sum_j weight_j * vertex_j; pairwise
    // steps move mass from the worst active vertex toward the LP vertex,
    // which restores linear convergence for this quadratic objective
    struct Atom {
        std::vector<std::vector<double>> plan;
        std::vector<double> u;
        double weight;
    };
    std::vector<Atom> atoms;
    atoms.push_back({pi, mismatch(pi), 1.0});
    int it = 0;
    for (; it < max_iter; ++it) {
        u = mismatch(pi);
        G = 0.0;
        for (double ui : u) G += ui * ui;
        if (std::sqrt(G) <= tol) {
            gap = 0.0;
            break;
        }
        std::vector<std::vector<double>> grad(R, std::vector<double>(C, 0.0));
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i : differ_at[r][c]) grad[r][c] += 2.0 * u[i];
        std::vector<std::vector<double>> s = detail::transport_lp(supply, demand, grad);
        gap = 0.0;
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) gap += grad[r][c] * (pi[r][c] - s[r][c]);
        if (gap <= tol * std::max(std::sqrt(G), tol)) break;
        std::vector<double> us = mismatch(s);

        // away vertex: the active one most aligned with the gradient
        std::size_t away = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += u[i] * atoms[j].u[i];
            if (d > worst) {
                worst = d;
                away = j;
            }
        }

        // exact line search along pi + gamma (s - vertex_away), the
        // objective being quadratic in the mismatch vector
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = us[i] - atoms[away].u[i];
            num += u[i] * d;
            den += d * d;
        }
        double cap = atoms[away].weight;
        double gamma = den > 0.0 ? std::clamp(-num / den, 0.0, cap) : cap;
        if (gamma <= 0.0) {
            // fall back to a plain step toward s
            double fnum = 0.0, fden = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = us[i] - u[i];
                fnum += u[i] * d;
                fden += d * d;
            }
            double fg = fden > 0.0 ? std::clamp(-fnum / fden, 0.0, 1.0) : 0.0;
            if (fg <= 0.0) break;
            for (auto& at : atoms) at.weight *= 1.0 - fg;
            atoms.push_back({s, us, fg});
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c)
                    pi[r][c] = std::max(0.0, pi[r][c] + fg * (s[r][c] - pi[r][c]));
        } else {
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c)
                    pi[r][c] = std::max(0.0, pi[r][c] + gamma * (s[r][c] - atoms[away].plan[r][c]));
            atoms[away].weight -= gamma;
            atoms.push_back({s, us, gamma});
        }
        std::size_t keep = 0;
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            if (atoms[j].weight <= 1e-15) continue;
            if (keep != j) atoms[keep] = std::move(atoms[j]);
            ++keep;
        }
        atoms.resize(keep);
    }
    if (it >= max_iter)
        throw convergence_error("w2: conditional gradient did not reach the duality-gap tolerance", gap);

    out.value = std::sqrt(G);
    out.gap = gap;
    out.iterations = it;
    out.plan.rows.resize(R);
    out.plan.cols.resize(C);
    for (std::size_t r = 0; r < R; ++r) out.plan.rows[r] = labels[rows[r]];
    for (std::size_t c = 0; c < C; ++c) out.plan.cols[c] = labels[cols[c]];
    out.plan.row_mass = supply;
    out.plan.col_mass = demand;
    out.plan.mass = std::move(pi);
    return out;
}

} // namespace detail

inline W2Result w2(const TabulatedMeasure& mu, const TabulatedMeasure& nu, double tol = 1e-6) {
    check_same_codec(mu, nu);
    require(mu.size() <= 4096, "w2: state space too large (limit 4096 states per side)");
    std::vector<double> a(mu.size()), b(nu.size());
    std::vector<std::vector<int>> coords(mu.size());
    std::vector<std::size_t> labels(mu.size());
    for (std::size_t s = 0; s < mu.size(); ++s) {
        a[s] = mu.prob(s);
        b[s] = nu.prob(s);
        coords[s] = mu.space().decode(s);
        labels[s] = s;
    }
    return detail::w2_core(a, b, coords, labels, tol);
}

struct SandwichReport {
    double lower = 0.0; // (sum_i dTV(mu_i, nu_i)^2)^{1/2}
    double w2 = 0.0;
    double upper = 0.0; // sqrt(n) dTV(mu, nu)
};

inline SandwichReport sandwich_check(const TabulatedMeasure& mu, const TabulatedMeasure& nu, double tol = 1e-6) {
    SandwichReport rep;
    double s = 0.0;
    for (int i = 0; i < mu.space().sites(); ++i) {
        double d = tv_maps(coord_marginal(mu, i), coord_marginal(nu, i));
        s += d * d;
    }
    rep.lower = std::sqrt(s);
    rep.w2 = w2(mu, nu, tol).value;
    // with the unnormalized distance (point masses k coordinates apart are at
    // distance sqrt(k), not 1) the total-variation comparison carries a
    // sqrt(n) factor: the TV-optimal coupling mismatches each coordinate with
    // probability at most d_TV
    rep.upper = std::sqrt(static_cast<double>(mu.space().sites())) * tv(mu, nu);
    return rep;
}

// H(p || q) over the support of p; requires p absolutely continuous w.r.t. q
inline double rel_entropy(const TabulatedMeasure& p, const TabulatedMeasure& q) {
    check_same_codec(p, q);
    double h = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x) {
        double px = p.prob(x);
        if (px <= 0.0) continue;
        if (q.prob(x) <= 0.0) throw error("rel_entropy: p is not absolutely continuous w.r.t. q");
        h += px * std::log(px / q.prob(x));
    }
    return std::max(h, 0.0);
}

struct LemmaBoundReport {
    double h = 0.0;
    double beta_support = 0.0; // min of q over its support
    double bound = 0.0;        // min((2/beta) dTV, (4/beta) dTV^2)
    double slack = 0.0;
};

inline LemmaBoundReport lemma_bound_check(const TabulatedMeasure& p, const TabulatedMeasure& q) {
    LemmaBoundReport rep;
    rep.h = rel_entropy(p, q);
    double beta = 1.0;
    for (std::size_t x = 0; x < q.size(); ++x)
        if (q.prob(x) > 0.0) beta = std::min(beta, q.prob(x));
    rep.beta_support = beta;
    double d = tv(p, q);
    rep.bound = std::min(2.0 / beta * d, 4.0 / beta * d * d);
    rep.slack = rep.bound - rep.h;
    return rep;
}

// Verifies the coordinate decomposition
//   H(p||q) = (1/n) sum_i [ H(p_i||q_i) + int H(pbar_i(.|y_i) || qbar_i(.|y_i)) dp_i ]
// and returns the absolute residual.
inline double entropy_chain_rule_check(const TabulatedMeasure& p, const TabulatedMeasure& q) {
    check_same_codec(p, q);
    const int n = p.space().sites();
    double h = rel_entropy(p, q);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        std::map<int, double> pi = coord_marginal(p, i), qi = coord_marginal(q, i);
        for (const auto& [v, pv] : pi) {
            auto it = qi.find(v);
            if (it == qi.end() || it->second <= 0.0)
                throw error("entropy_chain_rule_check: coordinate marginal not absolutely continuous");
            acc += pv * std::log(pv / it->second);
        }
        // conditionals on the complement given coordinate i
        for (const auto& [v, pv] : pi) {
            double qv = qi.at(v);
            double inner = 0.0;
            for (std::size_t s = 0; s < p.size(); ++s) {
                if (p.prob(s) <= 0.0) continue;
                if (p.space().decode(s)[static_cast<std::size_t>(i)] != v) continue;
                double pc = p.prob(s) / pv;
                double qc = q.prob(s) / qv;
                if (qc <= 0.0) throw error("entropy_chain_rule_check: conditional not absolutely continuous");
                inner += pc * std::log(pc / qc);
            }
            acc += pv * std::max(inner, 0.0);
        }
    }
    return std::abs(h - acc / n);
}

// tensorization prefactor from the coupling-matrix operator norm
inline double marton_constant(double a_norm_2to2) {
    if (a_norm_2to2 >= 1.0)
        throw dobrushin_error("coupling matrix operator norm " + std::to_string(a_norm_2to2) + " is not below 1");
    return 1.0 / ((1.0 - a_norm_2to2) * (1.0 - a_norm_2to2));
}

// slack of Ent_q(f) <= (2C/beta) sum_i int Ent_{q_i(.|context)}(f) dqbar_i for
// a nonnegative f; q must have full support
inline double approx_tensorization_slack(const TabulatedMeasure& q, const FunctionTable& f, double c_constant,
                                         double beta) {
    require(f.size() == q.size(), "approx_tensorization_slack: size mismatch");
    for (std::size_t x = 0; x < q.size(); ++x)
        require(q.prob(x) > 0.0, "approx_tensorization_slack: measure must have full support");
    for (double v : f) require(v >= 0.0, "approx_tensorization_slack: density must be nonnegative");
    double lhs = entropy(q, f);
    double rhs = 0.0;
    const int n = q.space().sites();
    for (int i = 0; i < n; ++i) {
        ConditionalKernel k = disintegrate(q, {i});
        for (std::size_t r = 0; r < k.states.size(); ++r) {
            double m = 0.0, s = 0.0;
            for (std::size_t j = 0; j < k.states[r].size(); ++j) {
                double pj = k.probs[r][j], v = f[k.states[r][j]];
                m += pj * v;
                if (pj > 0.0 && v > 0.0) s += pj * v * std::log(v);
            }
            double ent = m > 0.0 ? s - m * std::log(m) : 0.0;
            rhs += k.context_mass[r] * std::max(ent, 0.0);
        }
    }
    rhs *= 2.0 * c_constant / beta;
    return rhs - lhs;
}

// conditional-probability infimum over all sites and full configurations
inline double beta_conditional(const TabulatedMeasure& q) {
    double beta = 1.0;
    for (int i = 0; i < q.space().sites(); ++i) {
        ConditionalKernel k = disintegrate(q, {i});
        for (const auto& row : k.probs)
            for (double p : row) beta = std::min(beta, p);
    }
    require(beta > 0.0, "beta_conditional: measure must have full support");
    return beta;
}

// Exhaustive verification of the coupling hypothesis
//   W2^2(p_I(.|ctx), q_I(.|ctx)) <= C sum_{i in I} E_{p_I(.|ctx)} dTV^2(p_i(.|.), q_i(.|.))
// over every subset I and context; exponential cost, so n <= 4 only.
// Returns the minimal slack (RHS - LHS) encountered.
inline double w2_contractivity_check(const TabulatedMeasure& p, const TabulatedMeasure& q, double c_constant,
                                     double tol = 1e-6) {
    check_same_codec(p, q);
    const int n = p.space().sites();
    if (n > 4) throw limit_error("w2_contractivity_check supports at most 4 sites");
    std::vector<std::vector<int>> decoded(p.size());
    for (std::size_t s = 0; s < p.size(); ++s) decoded[s] = p.space().decode(s);

    std::vector<ConditionalKernel> pk, qk;
    for (int i = 0; i < n; ++i) {
        pk.push_back(disintegrate(p, {i}));
        qk.push_back(disintegrate(q, {i}));
    }
    auto site_tv = [&](int i, std::size_t state) {
        std::ptrdiff_t rp = pk[static_cast<std::size_t>(i)].row_of_state[state];
        std::ptrdiff_t rq = qk[static_cast<std::size_t>(i)].row_of_state[state];
        require(rp >= 0 && rq >= 0, "w2_contractivity_check: missing conditional row");
        std::map<int, double> mp, mq;
        const auto& kp = pk[static_cast<std::size_t>(i)];
        const auto& kq = qk[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < kp.states[static_cast<std::size_t>(rp)].size(); ++j)
            mp[static_cast<int>(kp.states[static_cast<std::size_t>(rp)][j])] = kp.probs[static_cast<std::size_t>(rp)][j];
        for (std::size_t j = 0; j < kq.states[static_cast<std::size_t>(rq)].size(); ++j)
            mq[static_cast<int>(kq.states[static_cast<std::size_t>(rq)][j])] = kq.probs[static_cast<std::size_t>(rq)][j];
        return tv_maps(mp, mq);
    };

    double min_slack = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> I;
        for (int i = 0; i < n; ++i)
            if (mask & (1 << i)) I.push_back(i);
        ConditionalKernel kp = disintegrate(p, I);
        ConditionalKernel kq = disintegrate(q, I);
        for (std::size_t r = 0; r < kp.contexts.size(); ++r) {
            // align the q row for the same context
            std::size_t rq = kp.states[r].empty()
                                 ? 0
                                 : static_cast<std::size_t>(kq.row_of_state[kp.states[r][0]]);
            require(!kp.states[r].empty() && kq.row_of_state[kp.states[r][0]] >= 0,
                    "w2_contractivity_check: q misses a p context");
            // union support over full states
            std::map<std::size_t, std::pair<double, double>> w;
            for (std::size_t j = 0; j < kp.states[r].size(); ++j) w[kp.states[r][j]].first = kp.probs[r][j];
            for (std::size_t j = 0; j < kq.states[rq].size(); ++j) w[kq.states[rq][j]].second = kq.probs[rq][j];
            std::vector<double> a, b;
            std::vector<std::vector<int>> coords;
            std::vector<std::size_t> labels;
            for (const auto& [s, pr] : w) {
                a.push_back(pr.first);
                b.push_back(pr.second);
                std::vector<int> ci;
                for (int i : I) ci.push_back(decoded[s][static_cast<std::size_t>(i)]);
                coords.push_back(ci);
                labels.push_back(s);
            }
            double lhs = detail::w2_core(a, b, coords, labels, tol).value;
            double rhs = 0.0;
            for (std::size_t j = 0; j < kp.states[r].size(); ++j) {
                double pj = kp.probs[r][j];
                if (pj <= 0.0) continue;
                double inner = 0.0;
                for (int i : I) {
                    double d = site_tv(i, kp.states[r][j]);
                    inner += d * d;
                }
                rhs += pj * inner;
            }
            min_slack = std::min(min_slack, c_constant * rhs - lhs * lhs);
        }
    }
    return min_slack;
}

} // namespace conclab
