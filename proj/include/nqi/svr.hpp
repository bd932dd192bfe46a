#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "nqi/error.hpp"
#include "nqi/featurize.hpp"

namespace nqi {

using Vec7 = std::array<double, kFeatureDim>;

struct SvrProblem
{
    std::vector<Vec7> inputs;
    std::vector<double> targets;
    double C = 1.0;
    double epsilon = 0.1;

    // Throws Error unless l >= 1, sizes agree, C > 0, epsilon > 0 and all values finite.
    void validate() const;
};

struct SvrModel
{
    Vec7 w{};
    double b = 0.0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
};

struct SvrOptions
{
    double tol = 1e-8;
    std::size_t max_iter = 10'000'000;
};

class ConvergenceError : public Error
{
public:
    ConvergenceError(const std::string& what, SvrModel best)
        : Error(what), best_(best) {}

    const SvrModel& best() const noexcept { return best_; }

private:
    SvrModel best_;
};

/// Linear epsilon-SVR:
///
///   minimize   1/2 |w|^2 + C * sum_i (xi_i + xi*_i)
///   subject to w.x_i + b - z_i <= eps + xi_i,  z_i - w.x_i - b <= eps + xi*_i,  xi, xi* >= 0
///
/// The dual is solved by SMO with second-order working-set selection on
/// merged duplicate rows, then the free set is solved exactly. When SMO is
/// slow to settle (large C on near-degenerate data) an interior point solve
/// of the dual supplies the edge set instead. When the
/// optimal bias is not unique the midpoint of the optimal interval is
/// returned. Deterministic for a given problem.
///
/// Throws ConvergenceError (carrying the best iterate) if max_iter updates (SMO pair updates plus Newton steps) do
/// not bring the KKT residual below tol.
SvrModel train_svr(const SvrProblem& problem, const SvrOptions& options = {});

double predict(const SvrModel& model, const Vec7& x);
double predict(const SvrModel& model, const FeatureVector& x);
// Throws Error when x.size() differs from the model dimension.
double predict(const SvrModel& model, std::span<const double> x);

double primal_objective(const Vec7& w, double b, const SvrProblem& problem);

/// Distance from zero to the subdifferential of the primal objective at
/// (model.w, model.b), in max-norm. Zero exactly at an optimum.
double kkt_check(const SvrModel& model, const SvrProblem& problem);

/// Midpoint of the set of biases minimizing the primal objective for fixed w.
double optimal_bias(const Vec7& w, const SvrProblem& problem);

} // namespace nqi
