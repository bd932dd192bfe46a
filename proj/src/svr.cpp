#include "nqi/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

namespace nqi {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kRefreshEvery = 256;
constexpr std::size_t kSmoFirstBudget = 20000;
constexpr std::size_t kSmoBudgetPerPoint = 200;

double dot(const Vec7& a, const Vec7& b)
{
    double s = 0.0;
    for (std::size_t k = 0; k < kFeatureDim; ++k) s += a[k] * b[k];
    return s;
}

// Identical (x, z) rows collapse into one point whose box bound is C times
// its multiplicity. Points come out in lexicographic order.
struct MergedProblem
{
    std::vector<Vec7> x;
    std::vector<double> z;
    std::vector<double> cap;
    std::vector<double> kdiag;
};

MergedProblem merge_duplicates(const SvrProblem& p)
{
    const std::size_t l = p.inputs.size();
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
        if (p.inputs[a] != p.inputs[b]) return p.inputs[a] < p.inputs[b];
        return p.targets[a] < p.targets[b];
    };
    std::stable_sort(order.begin(), order.end(), less);

    MergedProblem m;
    std::vector<std::size_t> mult;
    for (std::size_t k = 0; k < l; ++k) {
        const auto idx = order[k];
        if (k > 0 && p.inputs[idx] == m.x.back() && p.targets[idx] == m.z.back()) {
            ++mult.back();
            continue;
        }
        m.x.push_back(p.inputs[idx]);
        m.z.push_back(p.targets[idx]);
        mult.push_back(1);
    }
    for (std::size_t i = 0; i < m.x.size(); ++i) {
        m.cap.push_back(p.C * static_cast<double>(mult[i]));
        m.kdiag.push_back(dot(m.x[i], m.x[i]));
    }
    return m;
}

// Dual state over 2n variables: alpha[i] (y = +1) pushes the fit up toward
// z_i - eps, alpha[n + i] (y = -1) pushes it down toward z_i + eps.
class SmoSolver
{
public:
    SmoSolver(const MergedProblem& m, double epsilon)
        : m_(m), eps_(epsilon), n_(m.x.size()), alpha_(2 * n_, 0.0), f_(n_, 0.0), krow_(n_, 0.0)
    {
    }

    // Runs until the maximal violation drops below tol or the iteration
    // budget is spent. Returns false on budget exhaustion.
    bool run(double tol, std::size_t& iterations, std::size_t max_iter)
    {
        while (true) {
            refresh_fit();
            std::size_t i = 0;
            double gmax = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < 2 * n_; ++t) {
                if (!in_up(t)) continue;
                const double v = violation_value(t);
                if (v > gmax) {
                    gmax = v;
                    i = t;
                }
            }
            double gmin = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < 2 * n_; ++t)
                if (in_low(t)) gmin = std::min(gmin, violation_value(t));
            last_gap_ = gmax - gmin;
            if (!(gmax - gmin >= tol)) return true;
            if (iterations >= max_iter) return false;

            const std::size_t pi = i % n_;
            for (std::size_t s = 0; s < n_; ++s) krow_[s] = dot(m_.x[pi], m_.x[s]);

            std::size_t j = 2 * n_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < 2 * n_; ++t) {
                if (!in_low(t)) continue;
                const double b = gmax - violation_value(t);
                if (!(b > 0.0)) continue;
                const std::size_t pt = t % n_;
                double a = m_.kdiag[pi] + m_.kdiag[pt] - 2.0 * krow_[pt];
                if (a <= 0.0) a = kTau;
                const double score = -(b * b) / a;
                if (score < best) {
                    best = score;
                    j = t;
                }
            }
            if (j == 2 * n_) return true;

            update_pair(i, j);
            ++iterations;
            if (++since_refresh_ >= kRefreshEvery) rebuild_w();
        }
    }

    Vec7 weights()
    {
        rebuild_w();
        return w_;
    }

    double gap() const { return last_gap_; }
    double alpha(std::size_t t) const { return alpha_[t]; }
    std::size_t size() const { return n_; }

private:
    double y(std::size_t t) const { return t < n_ ? 1.0 : -1.0; }
    double cap(std::size_t t) const { return m_.cap[t % n_]; }

    bool in_up(std::size_t t) const { return t < n_ ? alpha_[t] < cap(t) : alpha_[t] > 0.0; }
    bool in_low(std::size_t t) const { return t < n_ ? alpha_[t] > 0.0 : alpha_[t] < cap(t); }

    // -y_t * gradient_t
    double violation_value(std::size_t t) const
    {
        const std::size_t p = t % n_;
        return t < n_ ? m_.z[p] - f_[p] - eps_ : m_.z[p] - f_[p] + eps_;
    }

    double gradient(std::size_t t) const { return -y(t) * violation_value(t); }

    void refresh_fit()
    {
        for (std::size_t s = 0; s < n_; ++s) f_[s] = dot(w_, m_.x[s]);
    }

    void rebuild_w()
    {
        w_.fill(0.0);
        for (std::size_t s = 0; s < n_; ++s) {
            const double beta = alpha_[s] - alpha_[s + n_];
            if (beta == 0.0) continue;
            for (std::size_t k = 0; k < kFeatureDim; ++k) w_[k] += beta * m_.x[s][k];
        }
        since_refresh_ = 0;
    }

    void update_pair(std::size_t i, std::size_t j)
    {
        const double ci = cap(i), cj = cap(j);
        const double old_i = alpha_[i], old_j = alpha_[j];
        const double gi = gradient(i), gj = gradient(j);
        const double kij = krow_[j % n_];
        double quad = m_.kdiag[i % n_] + m_.kdiag[j % n_] - 2.0 * kij;
        if (quad <= 0.0) quad = kTau;
        double& ai = alpha_[i];
        double& aj = alpha_[j];

        if (y(i) != y(j)) {
            const double delta = (-gi - gj) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > ci - cj) {
                if (ai > ci) {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if (aj > cj) {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            const double delta = (gi - gj) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > ci) {
                if (ai > ci) {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > cj) {
                if (aj > cj) {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }

        const double di = y(i) * (ai - old_i);
        const double dj = y(j) * (aj - old_j);
        const auto& xi = m_.x[i % n_];
        const auto& xj = m_.x[j % n_];
        for (std::size_t k = 0; k < kFeatureDim; ++k) w_[k] += di * xi[k] + dj * xj[k];
    }

    const MergedProblem& m_;
    double eps_;
    std::size_t n_;
    std::vector<double> alpha_;
    std::vector<double> f_;
    std::vector<double> krow_;
    Vec7 w_{};
    std::size_t since_refresh_ = 0;
    double last_gap_ = std::numeric_limits<double>::infinity();
};

// Weight vector for a guessed optimal classification: `beta` holds the pinned
// multipliers of non-edge points, and every edge point's fit is forced onto
// its tube edge (side +1: fit at z - eps, -1: at z + eps). Solves
//
//   w - X_E' beta_E = w_pinned,  1' beta_E = -sum(pinned),  X_E w + b = z_E - side eps
//
// for (w, b, beta_E) in the minimum-norm sense. w is the same for every
// solution, so box feasibility is left to kkt_check.
std::optional<Vec7> solve_edge_system(const MergedProblem& m, double epsilon, const std::vector<double>& beta,
                                      const std::vector<std::size_t>& edge, const std::vector<double>& side)
{
    const std::size_t n = m.x.size();
    std::vector<bool> is_edge(n, false);
    for (auto i : edge) is_edge[i] = true;
    double pinned_sum = 0.0;
    Vec7 w_pinned{};
    for (std::size_t s = 0; s < n; ++s) {
        if (is_edge[s] || beta[s] == 0.0) continue;
        pinned_sum += beta[s];
        for (std::size_t d = 0; d < kFeatureDim; ++d) w_pinned[d] += beta[s] * m.x[s][d];
    }
    if (edge.empty()) return w_pinned;

    const auto k = static_cast<Eigen::Index>(edge.size());
    constexpr auto nw = static_cast<Eigen::Index>(kFeatureDim);
    const Eigen::Index dim = nw + 1 + k;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index d = 0; d < nw; ++d) {
        a(d, d) = 1.0;
        rhs(d) = w_pinned[static_cast<std::size_t>(d)];
    }
    rhs(nw) = -pinned_sum;
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto i = edge[static_cast<std::size_t>(r)];
        const Eigen::Index row = nw + 1 + r;
        for (Eigen::Index d = 0; d < nw; ++d) {
            const double xd = m.x[i][static_cast<std::size_t>(d)];
            a(d, nw + 1 + r) = -xd;
            a(row, d) = xd;
        }
        a(nw, nw + 1 + r) = 1.0;
        a(row, nw) = 1.0;
        rhs(row) = m.z[i] - side[static_cast<std::size_t>(r)] * epsilon;
    }

    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    Eigen::VectorXd sol = cod.solve(rhs);
    sol += cod.solve(rhs - a * sol);
    if (!sol.allFinite()) return std::nullopt;

    Vec7 w{};
    for (Eigen::Index d = 0; d < nw; ++d) w[static_cast<std::size_t>(d)] = sol(d);
    return w;
}

// Edge set read off the SMO multipliers: strictly inside their half box.
std::optional<Vec7> polish(const MergedProblem& m, double epsilon, const SmoSolver& smo)
{
    const std::size_t n = m.x.size();
    std::vector<double> beta(n, 0.0);
    std::vector<std::size_t> edge;
    std::vector<double> side;
    for (std::size_t i = 0; i < n; ++i) {
        const double up = smo.alpha(i), down = smo.alpha(i + n);
        if (up > 0.0 && down > 0.0) return std::nullopt;
        beta[i] = up - down;
        if (up > 0.0 && up < m.cap[i]) {
            edge.push_back(i);
            side.push_back(1.0);
        } else if (down > 0.0 && down < m.cap[i]) {
            edge.push_back(i);
            side.push_back(-1.0);
        }
    }
    return solve_edge_system(m, epsilon, beta, edge, side);
}

// Primal-dual interior point method on the split dual
//
//   minimize 1/2 v'UU'v + c'v  subject to e'v = 0, 0 <= v <= cap
//
// with v = (alpha, alpha*), U = (X; -X), c = (eps - z; eps + z), e = (1; -1).
// U has only kFeatureDim columns, so each Newton system is solved through the
// Woodbury identity in linear time. Used when SMO is slow to settle, which
// happens for large C on near-degenerate data. Returns beta = alpha - alpha*.
std::vector<double> interior_point_dual(const MergedProblem& m, double epsilon, std::size_t& iterations,
                                        std::size_t max_iter)
{
    using Mat7 = Eigen::Matrix<double, kFeatureDim, kFeatureDim>;
    using Col7 = Eigen::Matrix<double, kFeatureDim, 1>;
    const std::size_t n = m.x.size();
    const std::size_t nv = 2 * n;
    auto xrow = [&](std::size_t t) {
        Col7 r;
        for (std::size_t d = 0; d < kFeatureDim; ++d) r(static_cast<Eigen::Index>(d)) = m.x[t % n][d];
        return t < n ? r : Col7(-r);
    };
    // variables are divided by the largest cap so the box is at most [0, 1]
    const double unit = *std::max_element(m.cap.begin(), m.cap.end());
    auto cap = [&](std::size_t t) { return m.cap[t % n] / unit; };
    auto ev = [&](std::size_t t) { return t < n ? 1.0 : -1.0; };

    std::vector<double> c(nv), v(nv), s(nv), q(nv);
    for (std::size_t t = 0; t < nv; ++t) {
        c[t] = (epsilon + (t < n ? -m.z[t] : m.z[t - n])) / unit;
        v[t] = 0.5 * cap(t);
        s[t] = q[t] = 1.0;
    }
    double y = 0.0;

    std::vector<double> dinv(nv), g(nv), dv(nv), ds(nv), dq(nv);
    auto hv = [&](const std::vector<double>& vec, std::vector<double>& out) {
        Col7 w = Col7::Zero();
        for (std::size_t t = 0; t < nv; ++t) w += vec[t] * xrow(t);
        for (std::size_t t = 0; t < nv; ++t) out[t] = xrow(t).dot(w);
    };

    std::vector<double> hvv(nv), rd(nv);
    double hv_scale = 0.0;
    for (std::size_t t = 0; t < nv; ++t) hv_scale = std::max(hv_scale, std::abs(c[t]));
    for (int iter = 0; iter < 200 && iterations < max_iter; ++iter, ++iterations) {
        hv(v, hvv);
        double mu = 0.0;
        double esum = 0.0;
        for (std::size_t t = 0; t < nv; ++t) {
            rd[t] = hvv[t] + c[t] - y * ev(t) - s[t] + q[t];
            mu += v[t] * s[t] + (cap(t) - v[t]) * q[t];
            esum += ev(t) * v[t];
        }
        mu /= static_cast<double>(2 * nv);

        double dual_res = 0.0;
        for (std::size_t t = 0; t < nv; ++t) dual_res = std::max(dual_res, std::abs(rd[t]));
        if (mu < 1e-15 && dual_res < 1e-13 * (1.0 + hv_scale) && std::abs(esum) < 1e-13) break;

        for (std::size_t t = 0; t < nv; ++t) dinv[t] = 1.0 / (s[t] / v[t] + q[t] / (cap(t) - v[t]));
        Mat7 inner = Mat7::Identity();
        for (std::size_t t = 0; t < nv; ++t) inner += dinv[t] * xrow(t) * xrow(t).transpose();
        const Eigen::LDLT<Mat7> inner_ldlt(inner);
        // (D + UU')^-1 r = D^-1 r - D^-1 U inner^-1 U' D^-1 r
        auto solve = [&](const std::vector<double>& rhs, std::vector<double>& out) {
            Col7 u = Col7::Zero();
            for (std::size_t t = 0; t < nv; ++t) u += dinv[t] * rhs[t] * xrow(t);
            const Col7 k = inner_ldlt.solve(u);
            for (std::size_t t = 0; t < nv; ++t) out[t] = dinv[t] * (rhs[t] - xrow(t).dot(k));
        };
        std::vector<double> he(nv), e_vec(nv);
        for (std::size_t t = 0; t < nv; ++t) e_vec[t] = ev(t);
        solve(e_vec, he);
        double ehe = 0.0;
        for (std::size_t t = 0; t < nv; ++t) ehe += e_vec[t] * he[t];
        if (!(ehe > 0.0) || !std::isfinite(ehe)) break;

        auto newton = [&](double sigma_mu, const std::vector<double>* corr_v, const std::vector<double>* corr_t) {
            for (std::size_t t = 0; t < nv; ++t) {
                const double slack = cap(t) - v[t];
                double cs = sigma_mu - v[t] * s[t];
                double cq = sigma_mu - slack * q[t];
                if (corr_v) cs -= (*corr_v)[t];
                if (corr_t) cq -= (*corr_t)[t];
                g[t] = -rd[t] + cs / v[t] - cq / slack;
            }
            std::vector<double> hg(nv);
            solve(g, hg);
            double ehg = 0.0;
            for (std::size_t t = 0; t < nv; ++t) ehg += e_vec[t] * hg[t];
            const double dy = (-esum - ehg) / ehe;
            for (std::size_t t = 0; t < nv; ++t) {
                const double slack = cap(t) - v[t];
                dv[t] = hg[t] + dy * he[t];
                double cs = sigma_mu - v[t] * s[t];
                double cq = sigma_mu - slack * q[t];
                if (corr_v) cs -= (*corr_v)[t];
                if (corr_t) cq -= (*corr_t)[t];
                ds[t] = (cs - s[t] * dv[t]) / v[t];
                dq[t] = (cq + q[t] * dv[t]) / slack;
            }
            return dy;
        };
        auto max_step = [&]() {
            double a = 1.0;
            for (std::size_t t = 0; t < nv; ++t) {
                const double slack = cap(t) - v[t];
                if (dv[t] < 0.0) a = std::min(a, -v[t] / dv[t]);
                if (dv[t] > 0.0) a = std::min(a, slack / dv[t]);
                if (ds[t] < 0.0) a = std::min(a, -s[t] / ds[t]);
                if (dq[t] < 0.0) a = std::min(a, -q[t] / dq[t]);
            }
            return a;
        };

        // Mehrotra predictor-corrector
        newton(0.0, nullptr, nullptr);
        const double a_aff = max_step();
        double mu_aff = 0.0;
        std::vector<double> cv(nv), ct(nv);
        for (std::size_t t = 0; t < nv; ++t) {
            const double slack = cap(t) - v[t];
            mu_aff += (v[t] + a_aff * dv[t]) * (s[t] + a_aff * ds[t]) +
                      (slack - a_aff * dv[t]) * (q[t] + a_aff * dq[t]);
            cv[t] = dv[t] * ds[t];
            ct[t] = -dv[t] * dq[t];
        }
        mu_aff /= static_cast<double>(2 * nv);
        const double sigma = std::pow(mu_aff / mu, 3.0);
        const double dy = newton(sigma * mu, &cv, &ct);
        const double a = std::min(1.0, 0.99 * max_step());
        if (!std::isfinite(a) || !std::isfinite(dy)) break;
        for (std::size_t t = 0; t < nv; ++t) {
            v[t] += a * dv[t];
            s[t] += a * ds[t];
            q[t] += a * dq[t];
        }
        y += a * dy;
    }

    std::vector<double> beta(n);
    for (std::size_t i = 0; i < n; ++i) beta[i] = unit * (v[i] - v[i + n]);
    return beta;
}

// Edge sets guessed from the interior point solution at a ladder of
// distances from the tube edges, plus the set of multipliers strictly inside
// their half box.
std::vector<std::optional<Vec7>> interior_point_candidates(const MergedProblem& m, const SvrProblem& p,
                                                           std::size_t& iterations, std::size_t max_iter)
{
    const double epsilon = p.epsilon;
    const auto beta = interior_point_dual(m, epsilon, iterations, max_iter);
    const std::size_t n = m.x.size();
    Vec7 w{};
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t d = 0; d < kFeatureDim; ++d) w[d] += beta[s] * m.x[s][d];
    const double b = optimal_bias(w, p);

    double zmax = 0.0;
    for (double z : m.z) zmax = std::max(zmax, std::abs(z));
    const double unit = 1.0 + zmax + epsilon;

    std::vector<std::optional<Vec7>> out;
    for (double delta = 1e-10; delta < 2e-2; delta *= 10.0) {
        std::vector<double> pinned(n, 0.0);
        std::vector<std::size_t> edge;
        std::vector<double> side;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = m.z[i] - dot(w, m.x[i]) - b;
            if (std::abs(r - epsilon) <= delta * unit) {
                edge.push_back(i);
                side.push_back(1.0);
            } else if (std::abs(r + epsilon) <= delta * unit) {
                edge.push_back(i);
                side.push_back(-1.0);
            } else if (r > epsilon) {
                pinned[i] = m.cap[i];
            } else if (r < -epsilon) {
                pinned[i] = -m.cap[i];
            }
        }
        out.push_back(solve_edge_system(m, epsilon, pinned, edge, side));
    }

    std::vector<double> pinned(n, 0.0);
    std::vector<std::size_t> edge;
    std::vector<double> side;
    for (std::size_t i = 0; i < n; ++i) {
        const double margin = 1e-6 * m.cap[i];
        if (beta[i] > margin && beta[i] < m.cap[i] - margin) {
            edge.push_back(i);
            side.push_back(1.0);
        } else if (beta[i] < -margin && beta[i] > -m.cap[i] + margin) {
            edge.push_back(i);
            side.push_back(-1.0);
        } else if (beta[i] >= m.cap[i] - margin) {
            pinned[i] = m.cap[i];
        } else if (beta[i] <= -m.cap[i] + margin) {
            pinned[i] = -m.cap[i];
        }
    }
    out.push_back(solve_edge_system(m, epsilon, pinned, edge, side));
    return out;
}

SvrModel finish(const Vec7& w, const SvrProblem& p, std::size_t iterations)
{
    SvrModel model;
    model.w = w;
    model.b = optimal_bias(w, p);
    model.objective = primal_objective(model.w, model.b, p);
    model.kkt_residual = kkt_check(model, p);
    model.iterations = iterations;
    return model;
}

} // namespace

void SvrProblem::validate() const
{
    if (inputs.empty()) throw Error("SVR problem needs at least one training row");
    if (inputs.size() != targets.size()) throw Error("SVR inputs and targets differ in length");
    if (!(C > 0.0) || !std::isfinite(C)) throw Error("SVR penalty C must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("SVR epsilon must be positive");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!std::isfinite(targets[i])) throw Error("non-finite SVR target");
        for (double v : inputs[i])
            if (!std::isfinite(v)) throw Error("non-finite SVR input");
    }
}

double predict(const SvrModel& model, const Vec7& x) { return model.b + dot(model.w, x); }

double predict(const SvrModel& model, const FeatureVector& x)
{
    return predict(model, x.as_array());
}

double predict(const SvrModel& model, std::span<const double> x)
{
    if (x.size() != kFeatureDim)
        throw Error("input dimension " + std::to_string(x.size()) + " does not match model dimension " +
                    std::to_string(kFeatureDim));
    Vec7 v{};
    std::copy(x.begin(), x.end(), v.begin());
    return predict(model, v);
}

double primal_objective(const Vec7& w, double b, const SvrProblem& p)
{
    double loss = 0.0;
    for (std::size_t i = 0; i < p.inputs.size(); ++i) {
        const double r = std::abs(dot(w, p.inputs[i]) + b - p.targets[i]);
        loss += std::max(0.0, r - p.epsilon);
    }
    return 0.5 * dot(w, w) + p.C * loss;
}

double optimal_bias(const Vec7& w, const SvrProblem& p)
{
    // The loss in b is piecewise linear with unit slope changes at
    // u_i - eps and u_i + eps (u_i = z_i - w.x_i). Starting from slope -l the
    // slope reaches zero between the l-th and (l+1)-th breakpoint.
    const std::size_t l = p.inputs.size();
    std::vector<double> knots;
    knots.reserve(2 * l);
    for (std::size_t i = 0; i < l; ++i) {
        const double u = p.targets[i] - dot(w, p.inputs[i]);
        knots.push_back(u - p.epsilon);
        knots.push_back(u + p.epsilon);
    }
    std::nth_element(knots.begin(), knots.begin() + static_cast<std::ptrdiff_t>(l), knots.end());
    const double upper = knots[l];
    const double lower = *std::max_element(knots.begin(), knots.begin() + static_cast<std::ptrdiff_t>(l));
    return 0.5 * (lower + upper);
}

double kkt_check(const SvrModel& model, const SvrProblem& p)
{
    const std::size_t l = p.inputs.size();

    // residual r = (w - sum beta_i x_i, sum beta_i); beta_i is pinned unless
    // the point sits on the tube edge, where it may range over half the box.
    constexpr Eigen::Index kRows = kFeatureDim + 1;
    Eigen::VectorXd r0(kRows);
    for (std::size_t d = 0; d < kFeatureDim; ++d) r0(static_cast<Eigen::Index>(d)) = model.w[d];
    r0(kFeatureDim) = 0.0;

    // Edge points with identical inputs share one column; their boxes add.
    std::map<Vec7, std::pair<double, double>> edge;
    auto pin = [&](std::size_t i, double beta) {
        for (std::size_t d = 0; d < kFeatureDim; ++d) r0(static_cast<Eigen::Index>(d)) -= beta * p.inputs[i][d];
        r0(kFeatureDim) += beta;
    };
    for (std::size_t i = 0; i < l; ++i) {
        const double e = p.targets[i] - (dot(model.w, p.inputs[i]) + model.b);
        // rounding in e grows with the magnitude of the terms it is built from
        double terms = 1.0 + std::abs(p.targets[i]) + std::abs(model.b) + p.epsilon;
        for (std::size_t d = 0; d < kFeatureDim; ++d) terms += std::abs(model.w[d] * p.inputs[i][d]);
        const double band = 1e-12 * terms;
        const bool on_upper = std::abs(e - p.epsilon) <= band;
        const bool on_lower = std::abs(e + p.epsilon) <= band;
        if (on_upper || on_lower) {
            auto& box = edge[p.inputs[i]];
            box.first += on_lower ? -p.C : 0.0;
            box.second += on_upper ? p.C : 0.0;
        } else if (e > p.epsilon) {
            pin(i, p.C);
        } else if (e < -p.epsilon) {
            pin(i, -p.C);
        }
    }
    if (edge.empty()) return r0.cwiseAbs().maxCoeff();

    const auto k = static_cast<Eigen::Index>(edge.size());
    Eigen::MatrixXd a(kRows, k);
    Eigen::VectorXd lo(k), hi(k);
    {
        Eigen::Index j = 0;
        for (const auto& [x, box] : edge) {
            for (std::size_t d = 0; d < kFeatureDim; ++d) a(static_cast<Eigen::Index>(d), j) = -x[d];
            a(kFeatureDim, j) = 1.0;
            lo(j) = box.first;
            hi(j) = box.second;
            ++j;
        }
    }

    // Bounded-variable least squares min |r0 + a beta| over the box by an
    // active-set method: free the bound variable whose gradient points most
    // into the box, solve on the free set, and step back to the first bound
    // crossed when the solution leaves the box.
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    std::vector<bool> is_free(static_cast<std::size_t>(k), false);
    for (Eigen::Index j = 0; j < k; ++j) is_free[static_cast<std::size_t>(j)] = lo(j) < 0.0 && hi(j) > 0.0;

    auto solve_free = [&](Eigen::VectorXd& target) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < k; ++j)
            if (is_free[static_cast<std::size_t>(j)]) free.push_back(j);
        target = beta;
        if (free.empty()) return;
        Eigen::VectorXd rb = r0;
        for (Eigen::Index j = 0; j < k; ++j)
            if (!is_free[static_cast<std::size_t>(j)]) rb += beta(j) * a.col(j);
        Eigen::MatrixXd af(kRows, static_cast<Eigen::Index>(free.size()));
        for (std::size_t c = 0; c < free.size(); ++c) af.col(static_cast<Eigen::Index>(c)) = a.col(free[c]);
        const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(af);
        Eigen::VectorXd sol = cod.solve(-rb);
        sol += cod.solve(-rb - af * sol);
        for (std::size_t c = 0; c < free.size(); ++c) target(free[c]) = sol(static_cast<Eigen::Index>(c));
    };

    const std::size_t max_steps = 20 * static_cast<std::size_t>(k) + 50;
    Eigen::VectorXd target(k);
    std::vector<bool> just_bound(static_cast<std::size_t>(k), false);
    for (std::size_t step = 0; step < max_steps; ++step) {
        solve_free(target);
        bool inside = true;
        double t = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (!is_free[static_cast<std::size_t>(j)]) continue;
            const double d = target(j) - beta(j);
            if (target(j) > hi(j) && d > 0.0) {
                inside = false;
                const double tj = (hi(j) - beta(j)) / d;
                if (tj < t) {
                    t = tj;
                    blocking = j;
                }
            } else if (target(j) < lo(j) && d < 0.0) {
                inside = false;
                const double tj = (lo(j) - beta(j)) / d;
                if (tj < t) {
                    t = tj;
                    blocking = j;
                }
            }
        }
        if (!inside) {
            // move toward the free-set solution until the first bound is hit
            for (Eigen::Index j = 0; j < k; ++j)
                if (is_free[static_cast<std::size_t>(j)])
                    beta(j) = std::clamp(beta(j) + t * (target(j) - beta(j)), lo(j), hi(j));
            if (blocking >= 0) {
                beta(blocking) = target(blocking) > hi(blocking) ? hi(blocking) : lo(blocking);
                is_free[static_cast<std::size_t>(blocking)] = false;
                just_bound[static_cast<std::size_t>(blocking)] = true;
            }
            continue;
        }
        beta = target;

        const Eigen::VectorXd g = a.transpose() * (r0 + a * beta);
        Eigen::Index pick = -1;
        double steepest = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (is_free[static_cast<std::size_t>(j)] || just_bound[static_cast<std::size_t>(j)]) continue;
            const double into = beta(j) <= lo(j) ? -g(j) : (beta(j) >= hi(j) ? g(j) : 0.0);
            if (into > steepest) {
                steepest = into;
                pick = j;
            }
        }
        std::fill(just_bound.begin(), just_bound.end(), false);
        if (pick < 0) break;
        is_free[static_cast<std::size_t>(pick)] = true;
    }
    return (r0 + a * beta).cwiseAbs().maxCoeff();
}

SvrModel train_svr(const SvrProblem& problem, const SvrOptions& options)
{
    problem.validate();
    if (!(options.tol > 0.0)) throw Error("SVR tolerance must be positive");

    const auto merged = merge_duplicates(problem);
    SmoSolver smo(merged, problem.epsilon);
    std::size_t iterations = 0;
    SvrModel best;
    best.kkt_residual = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::optional<Vec7>& w) {
        if (!w) return;
        auto candidate = finish(*w, problem, iterations);
        if (candidate.kkt_residual < best.kkt_residual) best = candidate;
    };

    // SMO gets a first budget; if that runs out the interior point route is
    // tried once before SMO continues. Newton steps count as iterations.
    const std::size_t first_budget =
        std::min(options.max_iter / 2, kSmoFirstBudget + kSmoBudgetPerPoint * merged.x.size());
    bool tried_interior = false;
    double gap_tol = options.tol;
    while (true) {
        const bool within_budget = smo.run(gap_tol, iterations, tried_interior ? options.max_iter : first_budget);
        consider(smo.weights());
        consider(polish(merged, problem.epsilon, smo));
        if (best.kkt_residual <= options.tol) return best;

        if (!within_budget && !tried_interior) {
            tried_interior = true;
            for (const auto& w : interior_point_candidates(merged, problem, iterations, options.max_iter)) {
                consider(w);
                if (best.kkt_residual <= options.tol) return best;
            }
            continue;
        }
        if (!within_budget || gap_tol < 1e-16 || smo.gap() == 0.0)
            throw ConvergenceError("SVR did not reach KKT residual " + std::to_string(options.tol) +
                                       " (best " + std::to_string(best.kkt_residual) + ")",
                                   best);
        gap_tol *= 1e-2;
    }
}

} // namespace nqi
