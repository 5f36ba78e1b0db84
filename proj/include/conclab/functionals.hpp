#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/diff_ops.hpp"
#include "conclab/rng.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

inline double expectation(const TabulatedMeasure& mu, const FunctionTable& f) {
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) s += mu.prob(x) * f[x];
    return s;
}

// Ent_mu(g) = E g log g - E g log E g, with 0 log 0 = 0
inline double entropy(const TabulatedMeasure& mu, const FunctionTable& g) {
    require(g.size() == mu.size(), "entropy: size mismatch");
    double m = 0.0, s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        double p = mu.prob(x);
        if (p <= 0.0) continue;
        if (g[x] < 0.0) throw error("entropy: negative input on the support");
        m += p * g[x];
        if (g[x] > 0.0) s += p * g[x] * std::log(g[x]);
    }
    if (m <= 0.0) return 0.0;
    return s - m * std::log(m);
}

inline double variance(const TabulatedMeasure& mu, const FunctionTable& f) {
    double m = expectation(mu, f);
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        double d = f[x] - m;
        s += mu.prob(x) * d * d;
    }
    return s;
}

// ||f||_p with respect to mu, p in (0, inf]; evaluated against the largest
// entry so large p does not overflow
inline double lp_norm(const TabulatedMeasure& mu, const FunctionTable& f, double p) {
    require(p > 0.0, "lp_norm: p must be positive");
    double top = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x)
        if (mu.prob(x) > 0.0) top = std::max(top, std::abs(f[x]));
    if (top == 0.0 || std::isinf(p)) return top;
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        double px = mu.prob(x);
        if (px <= 0.0) continue;
        double a = std::abs(f[x]) / top;
        if (a > 0.0) s += px * std::exp(p * std::log(a));
    }
    return top * std::exp(std::log(s) / p);
}

inline double dirichlet_form(const FunctionTable& f, const TabulatedMeasure& mu, const KernelSet& ks) {
    DifferenceTensor t = d_lower(f, ks);
    double s = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        double v = t.state_norm(x);
        s += mu.prob(x) * v * v;
    }
    return s;
}

struct DirichletReport {
    double dirichlet = 0.0; // E |df|^2
    double generator = 0.0; // <f, -Lf> for the averaged kernel dynamics
    double kappa = 0.0;     // dirichlet / generator
};

// Checks E|df|^2 = kappa <f,-Lf> with Lf(x) = int (f(y)-f(x)) dm_x(y) and
// m_x the family-averaged kernel; kappa should come out as |I|.
inline DirichletReport laplacian_identity_check(const FunctionTable& f, const TabulatedMeasure& mu,
                                                const KernelSet& ks) {
    DirichletReport rep;
    rep.dirichlet = dirichlet_form(f, mu, ks);
    const double inv_f = 1.0 / static_cast<double>(ks.family.size());
    double inner = 0.0;
    for (std::size_t x = 0; x < mu.size(); ++x) {
        if (mu.prob(x) <= 0.0) continue;
        double lf = 0.0;
        for (const auto& k : ks.kernels) {
            std::ptrdiff_t r = k.row_of_state[x];
            if (r < 0) continue;
            const auto& rs = k.states[static_cast<std::size_t>(r)];
            const auto& rp = k.probs[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < rs.size(); ++j) lf += inv_f * rp[j] * (f[rs[j]] - f[x]);
        }
        inner += mu.prob(x) * f[x] * (-lf);
    }
    rep.generator = inner;
    rep.kappa = inner != 0.0 ? rep.dirichlet / inner : 0.0;
    return rep;
}

// Both sides of the positive-part representation
//   E|df|^2 = sum_I iint (f(x) - f(xbar,z))_+^2 dm dmu
inline std::pair<double, double> representation_identity(const FunctionTable& f, const TabulatedMeasure& mu,
                                                         const KernelSet& ks) {
    double lhs = dirichlet_form(f, mu, ks);
    double rhs = 0.0;
    for (const auto& k : ks.kernels) {
        for (std::size_t x = 0; x < mu.size(); ++x) {
            if (mu.prob(x) <= 0.0) continue;
            std::ptrdiff_t r = k.row_of_state[x];
            if (r < 0) continue;
            const auto& rs = k.states[static_cast<std::size_t>(r)];
            const auto& rp = k.probs[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < rs.size(); ++j) {
                double d = f[x] - f[rs[j]];
                if (d > 0.0) rhs += mu.prob(x) * rp[j] * d * d;
            }
        }
    }
    return {lhs, rhs};
}

namespace detail {

// Dense quadratic form Q with f^T Q f = E_mu |df|^2; only support states
// carry nonzero rows.
inline Eigen::MatrixXd dirichlet_matrix(const TabulatedMeasure& mu, const KernelSet& ks) {
    const auto N = static_cast<Eigen::Index>(mu.size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(N, N);
    for (const auto& k : ks.kernels) {
        for (std::size_t x = 0; x < mu.size(); ++x) {
            double px = mu.prob(x);
            if (px <= 0.0) continue;
            std::ptrdiff_t r = k.row_of_state[x];
            if (r < 0) continue;
            const auto& rs = k.states[static_cast<std::size_t>(r)];
            const auto& rp = k.probs[static_cast<std::size_t>(r)];
            for (std::size_t j = 0; j < rs.size(); ++j) {
                double w = 0.5 * px * rp[j];
                if (w == 0.0) continue;
                auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(rs[j]);
                Q(xi, xi) += w;
                Q(yi, yi) += w;
                Q(xi, yi) -= w;
                Q(yi, xi) -= w;
            }
        }
    }
    return Q;
}

} // namespace detail

struct PiSolution {
    double constant = 0.0;
    FunctionTable extremal; // mean-zero maximizer of Var / Dirichlet
};

// Smallest sigma^2 with Var(f) <= sigma^2 E|df|^2, as the extreme generalized
// eigenvalue of (variance form, Dirichlet form) on mean-zero functions over
// the support.
inline PiSolution pi_solve(const TabulatedMeasure& mu, const KernelSet& ks) {
    std::vector<std::size_t> supp;
    for (std::size_t x = 0; x < mu.size(); ++x)
        if (mu.prob(x) > 0.0) supp.push_back(x);
    const auto S = static_cast<Eigen::Index>(supp.size());
    require(S >= 2, "pi_constant: support has fewer than two states");

    Eigen::MatrixXd Qfull = detail::dirichlet_matrix(mu, ks);
    Eigen::MatrixXd Q(S, S), V(S, S);
    Eigen::VectorXd w(S);
    for (Eigen::Index a = 0; a < S; ++a) w(a) = mu.prob(supp[static_cast<std::size_t>(a)]);
    for (Eigen::Index a = 0; a < S; ++a)
        for (Eigen::Index b = 0; b < S; ++b) {
            Q(a, b) = Qfull(static_cast<Eigen::Index>(supp[static_cast<std::size_t>(a)]),
                            static_cast<Eigen::Index>(supp[static_cast<std::size_t>(b)]));
            V(a, b) = (a == b ? w(a) : 0.0) - w(a) * w(b);
        }

    // orthonormal basis of the complement of the constant vector
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(S, 1) / std::sqrt(static_cast<double>(S));
    Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(S, S) - ones * ones.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(proj);
    Eigen::MatrixXd U(S, S - 1);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < S; ++i)
        if (pes.eigenvalues()(i) > 0.5) U.col(col++) = pes.eigenvectors().col(i);
    require(col == S - 1, "pi_constant: projector rank unexpected");

    Eigen::MatrixXd A = U.transpose() * V * U;
    Eigen::MatrixXd B = U.transpose() * Q * U;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bes(B);
    double bmax = bes.eigenvalues().maxCoeff();
    if (bmax <= 0.0 || bes.eigenvalues().minCoeff() <= 1e-12 * bmax)
        throw error("pi_constant: Dirichlet form degenerate on mean-zero functions (disconnected dynamics)");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, B);
    Eigen::Index arg = 0;
    double best = ges.eigenvalues().maxCoeff(&arg);

    PiSolution sol;
    sol.constant = best;
    Eigen::VectorXd phi = U * ges.eigenvectors().col(arg);
    // subtract the mu-mean so the extremal is mean-zero as a function
    double mean = 0.0;
    for (Eigen::Index a = 0; a < S; ++a) mean += w(a) * phi(a);
    sol.extremal.assign(mu.size(), 0.0);
    for (Eigen::Index a = 0; a < S; ++a) sol.extremal[supp[static_cast<std::size_t>(a)]] = phi(a) - mean;
    return sol;
}

inline double pi_constant_exact(const TabulatedMeasure& mu, const IndexFamily& family) {
    return pi_solve(mu, KernelSet(mu, family)).constant;
}

enum class DiffOp { lower, upper }; // partial vs h

inline DifferenceTensor apply_diff(const FunctionTable& f, const KernelSet& ks, DiffOp op) {
    return op == DiffOp::lower ? d_lower(f, ks) : h_upper(f, ks);
}

struct RatioSearchOptions {
    int restarts = 6;
    int steps = 300;
    std::uint64_t seed = 1;
    bool include_pi_extremal = true;
};

// Certified lower bound on the LSI constant: max over visited f of
// Ent(f^2) / (2 E |Gamma f|^2), by random restarts plus adaptive coordinate
// perturbation. The returned value is the exactly evaluated ratio at the best
// visited function.
inline double lsi_ratio_search(const TabulatedMeasure& mu, DiffOp op, const IndexFamily& family,
                               const RatioSearchOptions& opt = {}) {
    KernelSet ks(mu, family);
    const std::size_t N = mu.size();
    auto ratio = [&](const FunctionTable& f) -> double {
        double scale = 0.0;
        for (std::size_t x = 0; x < N; ++x)
            if (mu.prob(x) > 0.0) scale = std::max(scale, std::abs(f[x]));
        if (scale <= 0.0 || variance(mu, f) <= 1e-12 * scale * scale) return 0.0;
        DifferenceTensor t = apply_diff(f, ks, op);
        double denom = 0.0;
        for (std::size_t x = 0; x < N; ++x) {
            double v = t.state_norm(x);
            denom += mu.prob(x) * v * v;
        }
        if (denom <= 0.0) return 0.0;
        FunctionTable f2(N);
        for (std::size_t x = 0; x < N; ++x) f2[x] = f[x] * f[x];
        return entropy(mu, f2) / (2.0 * denom);
    };

    double best = 0.0;
    FunctionTable best_f;
    auto consider = [&](const FunctionTable& f) {
        double r = ratio(f);
        if (r > best) {
            best = r;
            best_f = f;
        }
    };

    if (opt.include_pi_extremal) {
        // small-amplitude perturbations of the constant along the PI extremal
        // recover the Poincare constant in the limit; both signs because the
        // cubic correction has a sign
        PiSolution pi = pi_solve(mu, ks);
        for (double eps : {1e-2, 1e-3, 1e-4, 3e-5}) {
            for (double sign : {1.0, -1.0}) {
                FunctionTable f(N, 1.0);
                for (std::size_t x = 0; x < N; ++x) f[x] += sign * eps * pi.extremal[x];
                consider(f);
            }
        }
    }

    for (int rs = 0; rs < opt.restarts; ++rs) {
        CounterRng rng(opt.seed, static_cast<std::uint64_t>(rs) + 1);
        FunctionTable f(N);
        for (std::size_t x = 0; x < N; ++x) f[x] = rng.next_gaussian();
        double cur = ratio(f);
        double step = 0.5;
        int stale = 0;
        for (int it = 0; it < opt.steps; ++it) {
            std::size_t j = static_cast<std::size_t>(rng.next_below(N));
            double delta = step * (rng.next_double() < 0.5 ? 1.0 : -1.0);
            double old = f[j];
            f[j] = old + delta;
            double r = ratio(f);
            if (r > cur) {
                cur = r;
                stale = 0;
            } else {
                f[j] = old;
                if (++stale > 2 * static_cast<int>(N)) {
                    step *= 0.5;
                    stale = 0;
                    if (step < 1e-9) break;
                }
            }
        }
        consider(f);
    }
    (void)best_f;
    return best;
}

struct MomentCheckRow {
    double p = 0.0;
    double lhs = 0.0;  // ||f||_p^2 - ||f||_2^2
    double rhs = 0.0;  // 2 sigma^2 (p-2) ||Gamma f||_p^2
    double slack = 0.0;
};

inline std::vector<MomentCheckRow> moment_inequality_check(const TabulatedMeasure& mu, const KernelSet& ks, DiffOp op,
                                                           double sigma2, const FunctionTable& f,
                                                           const std::vector<double>& p_grid) {
    DifferenceTensor t = apply_diff(f, ks, op);
    FunctionTable gamma = t.state_norms();
    double l2 = lp_norm(mu, f, 2.0);
    std::vector<MomentCheckRow> rows;
    for (double p : p_grid) {
        require(p >= 2.0 && p <= 64.0, "moment_inequality_check: p must lie in [2, 64]");
        MomentCheckRow row;
        row.p = p;
        double lp = lp_norm(mu, f, p);
        double gp = lp_norm(mu, gamma, p);
        row.lhs = lp * lp - l2 * l2;
        row.rhs = 2.0 * sigma2 * (p - 2.0) * gp * gp;
        row.slack = row.rhs - row.lhs;
        rows.push_back(row);
    }
    return rows;
}

// c with E exp(c |f|) <= 2 whenever ||f||_k <= gamma k for all k
inline double exp_moment_constant(double gamma) {
    require(gamma > 0.0, "exp_moment_constant: gamma must be positive");
    return 1.0 / (2.0 * gamma * std::exp(1.0));
}

struct HigherOrderCertificate {
    std::vector<double> h_l2_norms; // ||h^{(k)} f||_2 for k = 1..d-1
    double h_sup_norm = 0.0;        // ||h^{(d)} f||_inf
    double c = 0.0;                 // 1 / (12 sigma^2 e)
    double exp_moment = 0.0;        // E exp(c |f - Ef|^{2/d}), exact mode
    bool moment_verified = false;
};

// Verifies ||h^{(k)} f||_2 <= min(1, sigma^{d-k}) for k < d and
// ||h^{(d)} f||_inf <= 1, then certifies the exponential moment.
inline HigherOrderCertificate higher_order_certificate(const TabulatedMeasure& mu, const KernelSet& ks, double sigma2,
                                                       const FunctionTable& f, int d, bool exact_moment = true) {
    require(d >= 1, "higher_order_certificate: d must be >= 1");
    HigherOrderCertificate cert;
    double sigma = std::sqrt(sigma2);
    const double tol = 1e-12;
    DifferenceTensor t = h_upper(f, ks);
    for (int k = 1; k < d; ++k) {
        if (k > 1) t = h_tensor(f, ks, k);
        double nk = tensor_norm(t, mu, NormKind::l2);
        cert.h_l2_norms.push_back(nk);
        double limit = std::min(1.0, std::pow(sigma, d - k));
        if (nk > limit + tol)
            throw condition_error("higher_order_certificate: ||h^(" + std::to_string(k) + ") f||_2 = " +
                                      std::to_string(nk) + " exceeds " + std::to_string(limit),
                                  k);
    }
    DifferenceTensor td = h_tensor(f, ks, d);
    cert.h_sup_norm = tensor_norm(td, mu, NormKind::sup);
    if (cert.h_sup_norm > 1.0 + tol)
        throw condition_error("higher_order_certificate: ||h^(" + std::to_string(d) + ") f||_inf = " +
                                  std::to_string(cert.h_sup_norm) + " exceeds 1",
                              d);
    cert.c = 1.0 / (12.0 * sigma2 * std::exp(1.0));
    if (exact_moment) {
        double m = expectation(mu, f);
        double s = 0.0;
        for (std::size_t x = 0; x < mu.size(); ++x)
            s += mu.prob(x) * std::exp(cert.c * std::pow(std::abs(f[x] - m), 2.0 / d));
        cert.exp_moment = s;
        cert.moment_verified = s <= 2.0;
    }
    return cert;
}

// Modified LSI slack: (2C/beta) E[|df|^2 e^f] - Ent(e^f); nonnegative when the
// tensorization constant C and beta come from a valid certificate.
inline double mlsi_slack(const TabulatedMeasure& mu, const KernelSet& ks, const FunctionTable& f, double c_at_constant,
                         double beta) {
    const std::size_t N = mu.size();
    FunctionTable ef(N);
    for (std::size_t x = 0; x < N; ++x) ef[x] = std::exp(f[x]);
    double lhs = entropy(mu, ef);
    DifferenceTensor t = d_lower(f, ks);
    double rhs = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        double v = t.state_norm(x);
        rhs += mu.prob(x) * v * v * ef[x];
    }
    rhs *= 2.0 * c_at_constant / beta;
    return rhs - lhs;
}

} // namespace conclab
