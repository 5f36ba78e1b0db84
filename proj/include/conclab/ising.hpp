#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "conclab/common.hpp"
#include "conclab/rng.hpp"
#include "conclab/spaces.hpp"

namespace conclab {

using Matrix = std::vector<std::vector<double>>;

// max absolute row sum
inline double j_norm_1to1(const Matrix& J) {
    double m = 0.0;
    for (const auto& row : J) {
        double s = 0.0;
        for (double x : row) s += std::abs(x);
        m = std::max(m, s);
    }
    return m;
}

inline double max_abs_col_sum(const Matrix& J) {
    if (J.empty()) return 0.0;
    double m = 0.0;
    for (std::size_t j = 0; j < J[0].size(); ++j) {
        double s = 0.0;
        for (const auto& row : J) s += std::abs(row[j]);
        m = std::max(m, s);
    }
    return m;
}

// Spectral norm by power iteration on A^T A. Seeded with the all-ones vector
// (A is entrywise nonnegative in our use, so the leading eigenvector is too).
inline double opnorm_2to2(const Matrix& A, double rel_tol = 1e-10, int max_iter = 10000) {
    const std::size_t n = A.size();
    if (n == 0) return 0.0;
    std::vector<double> v(n, 1.0), av(n), w(n);
    double est = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += A[i][j] * v[j];
            av[i] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += A[i][j] * av[i];
            w[j] = s;
        }
        double norm_av = 0.0, norm_w = 0.0;
        for (double x : av) norm_av += x * x;
        for (double x : w) norm_w += x * x;
        norm_av = std::sqrt(norm_av);
        norm_w = std::sqrt(norm_w);
        if (norm_w == 0.0) return 0.0;
        double next = std::sqrt(norm_w); // ||A^T A v|| -> lambda_max(A^T A) for unit v
        if (it > 0 && std::abs(next - est) <= rel_tol * std::max(1.0, next)) return next;
        est = next;
        for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / norm_w;
    }
    throw convergence_error("opnorm_2to2: power iteration did not converge", est);
}

// Gibbs measure of the pairwise Hamiltonian 1/2 <s,Js> + <h,s> with symmetric
// J and vanishing diagonal.
class IsingModel {
  public:
    IsingModel(Matrix J, std::vector<double> h) : J_(std::move(J)), h_(std::move(h)) {
        const std::size_t n = h_.size();
        require(J_.size() == n, "ising: J size mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            require(J_[i].size() == n, "ising: J not square");
            require(J_[i][i] == 0.0, "ising: J diagonal must vanish");
            for (std::size_t j = 0; j < n; ++j)
                require(J_[i][j] == J_[j][i], "ising: J must be symmetric");
        }
    }

    static IsingModel curie_weiss(int n, double beta0, double field = 0.0) {
        Matrix J(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j) J[i][j] = beta0 / n;
        return IsingModel(std::move(J), std::vector<double>(static_cast<std::size_t>(n), field));
    }

    // symmetric J with ||J||_{1->1} = j_row_target, fields uniform in
    // [-h_max, h_max]
    static IsingModel random_dobrushin(int n, double j_row_target, double h_max, CounterRng& rng) {
        Matrix J(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) J[i][j] = J[j][i] = 2.0 * rng.next_double() - 1.0;
        double norm = j_norm_1to1(J);
        if (norm > 0.0)
            for (auto& row : J)
                for (double& x : row) x *= j_row_target / norm;
        std::vector<double> h(static_cast<std::size_t>(n));
        for (double& x : h) x = h_max * (2.0 * rng.next_double() - 1.0);
        return IsingModel(std::move(J), std::move(h));
    }

    int sites() const { return static_cast<int>(h_.size()); }
    const Matrix& coupling() const { return J_; }
    const std::vector<double>& field() const { return h_; }

    double local_field(const std::vector<int>& sigma, int i) const {
        double m = h_[static_cast<std::size_t>(i)];
        for (int j = 0; j < sites(); ++j) m += J_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * sigma[static_cast<std::size_t>(j)];
        return m;
    }

    double log_weight(const std::vector<int>& sigma) const {
        double e = 0.0;
        for (int i = 0; i < sites(); ++i) {
            double row = 0.0;
            for (int j = 0; j < sites(); ++j) row += J_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * sigma[static_cast<std::size_t>(j)];
            e += 0.5 * row * sigma[static_cast<std::size_t>(i)] + h_[static_cast<std::size_t>(i)] * sigma[static_cast<std::size_t>(i)];
        }
        return e;
    }

    double log_partition(int limit = Space::kSpinLimitDefault) const {
        if (!log_z_) gibbs(limit);
        return *log_z_;
    }

    TabulatedMeasure gibbs(int limit = Space::kSpinLimitDefault) const {
        Space sp = Space::spins(sites(), limit);
        std::vector<double> lw(sp.size());
        for (std::size_t idx = 0; idx < sp.size(); ++idx) lw[idx] = log_weight(sp.decode(idx));
        auto [mu, log_z] = TabulatedMeasure::from_log_weights(sp, lw);
        log_z_ = log_z;
        return std::move(mu);
    }

  private:
    Matrix J_;
    std::vector<double> h_;
    mutable std::optional<double> log_z_;
};

inline TabulatedMeasure gibbs_measure(const IsingModel& model, int limit = Space::kSpinLimitDefault) {
    return model.gibbs(limit);
}

// q_i(+1 | sigma-bar) = 1/2 (1 + tanh(sum_j J_ij sigma_j + h_i)); the value of
// sigma_i itself does not enter (J_ii = 0).
inline double conditional_plus(const IsingModel& model, int i, const std::vector<int>& sigma) {
    require(i >= 0 && i < model.sites(), "conditional_plus: site out of range");
    return 0.5 * (1.0 + std::tanh(model.local_field(sigma, i)));
}

enum class CouplingMode { exact, bound };

// minimal conditional probability beta = min_{i, sigma} q_i(sigma_i | sigma-bar)
inline double beta_min(const IsingModel& model, bool exact = true, int limit = Space::kSpinLimitDefault) {
    if (!exact || model.sites() > limit)
        return 0.5 * (1.0 - std::tanh(j_norm_1to1(model.coupling()) +
                                      [&] {
                                          double m = 0.0;
                                          for (double x : model.field()) m = std::max(m, std::abs(x));
                                          return m;
                                      }()));
    Space sp = Space::spins(model.sites(), limit);
    double worst = 0.0; // largest |local field| over sites and contexts
    for (std::size_t idx = 0; idx < sp.size(); ++idx) {
        std::vector<int> sigma = sp.decode(idx);
        for (int i = 0; i < model.sites(); ++i) {
            // remove the (vanishing) self term: context only
            double m = model.local_field(sigma, i);
            worst = std::max(worst, std::abs(m));
        }
    }
    return 0.5 * (1.0 - std::tanh(worst));
}

// A_ik = sup over configurations differing only at k of
// d_TV(q_i(.|x), q_i(.|z)); bound mode is the Lipschitz estimate |J_ik|.
inline Matrix coupling_matrix(const IsingModel& model, CouplingMode mode, int limit = Space::kSpinLimitDefault) {
    const int n = model.sites();
    Matrix A(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    if (mode == CouplingMode::bound) {
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k)
                if (i != k) A[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = std::abs(model.coupling()[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
        return A;
    }
    if (n > limit)
        throw limit_error("coupling_matrix(exact): site count exceeds enumeration limit " + std::to_string(limit));
    Space sp = Space::spins(n, limit);
    for (std::size_t idx = 0; idx < sp.size(); ++idx) {
        std::vector<int> sigma = sp.decode(idx);
        for (int i = 0; i < n; ++i) {
            double mi = model.local_field(sigma, i);
            for (int k = 0; k < n; ++k) {
                if (k == i) continue;
                double mk = mi - 2.0 * model.coupling()[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * sigma[static_cast<std::size_t>(k)];
                double tv = 0.5 * std::abs(std::tanh(mi) - std::tanh(mk));
                auto& a = A[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
                a = std::max(a, tv);
            }
        }
    }
    return A;
}

// LSI constant of a two-point measure (beta, 1-beta) with respect to its own
// Gibbs-sampler difference operator, maximized over f = (1, t) by a coarse
// scan plus golden-section refinement.
inline double two_point_lsi_constant(double beta, double t_lo = -50.0, double t_hi = 50.0) {
    require(beta > 0.0 && beta < 1.0, "two_point_lsi_constant: beta must be in (0,1)");
    const double q1 = beta, q2 = 1.0 - beta;
    auto ratio = [&](double t) {
        double d = 1.0 - t;
        if (std::abs(d) < 1e-14) return 0.0;
        double a = 1.0, b = t * t;
        double m = q1 * a + q2 * b;
        double ent = q1 * (a > 0 ? a * std::log(a) : 0.0) + q2 * (b > 0 ? b * std::log(b) : 0.0) - m * std::log(m);
        return ent / (2.0 * q1 * q2 * d * d);
    };
    const int grid = 4000;
    double best_t = t_lo, best = -1.0;
    for (int g = 0; g <= grid; ++g) {
        double t = t_lo + (t_hi - t_lo) * g / grid;
        double r = ratio(t);
        if (r > best) {
            best = r;
            best_t = t;
        }
    }
    double step = (t_hi - t_lo) / grid;
    double a = std::max(t_lo, best_t - step), b = std::min(t_hi, best_t + step);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = ratio(x1), f2 = ratio(x2);
    while (b - a > 1e-12) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = ratio(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = ratio(x1);
        }
    }
    return std::max(best, std::max(f1, f2));
}

// Every factor of the certified LSI constant, kept separately so reports can
// show where the constant comes from.
struct CertificateReport {
    double alpha = 0.0;         // 1 - ||J||_{1->1}
    double alpha_tilde = 0.0;   // ||h||_inf
    double beta_min = 0.0;      // minimal conditional probability
    double a_norm = 0.0;        // upper bound on ||A||_{2->2} that was used
    double c_at = 0.0;          // tensorization prefactor 2 (1-||A||)^-2 / beta
    double rho_two_point = 0.0; // worst-case two-point LSI constant
    double sigma2_cert = 0.0;   // certified LSI constant
    double c_tail = 0.0;        // 1 / (12 sigma^2 e)
};

inline CertificateReport lsi_certificate(const IsingModel& model, int limit = Space::kSpinLimitDefault) {
    CertificateReport r;
    r.alpha = 1.0 - j_norm_1to1(model.coupling());
    for (double x : model.field()) r.alpha_tilde = std::max(r.alpha_tilde, std::abs(x));

    Matrix A = coupling_matrix(model, CouplingMode::bound);
    double pi_norm = opnorm_2to2(A) * (1.0 + 1e-8); // small inflation: keep it an upper bound
    double holder = std::sqrt(j_norm_1to1(A) * max_abs_col_sum(A));
    r.a_norm = std::min(pi_norm, holder);
    if (r.a_norm >= 1.0)
        throw dobrushin_error("lsi_certificate: ||A||_{2->2} >= 1, outside the Dobrushin regime");

    r.beta_min = beta_min(model, model.sites() <= limit, limit);
    r.rho_two_point = two_point_lsi_constant(r.beta_min);
    r.c_at = 2.0 / ((1.0 - r.a_norm) * (1.0 - r.a_norm) * r.beta_min);
    r.sigma2_cert = r.c_at * r.rho_two_point;
    r.c_tail = 1.0 / (12.0 * r.sigma2_cert * std::exp(1.0));
    return r;
}

} // namespace conclab
