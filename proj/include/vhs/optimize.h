#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

namespace vhs::opt {

struct Box {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::VectorXd project(const Eigen::VectorXd& x) const {
        return x.cwiseMax(lower).cwiseMin(upper);
    }
};

struct Result {
    Eigen::VectorXd x;
    double f = 0.0;
    double pg_norm = 0.0;  // infinity norm of the projected gradient (NaN when unknown)
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
// Returns f(x) and writes the gradient into g.
using ObjectiveGrad = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd& g)>;

struct SimplexOptions {
    int max_evaluations = 60;
    double f_tol = 1e-10;
    double step_fraction = 0.10;
};

// Nelder-Mead with every trial point projected onto the box.
Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Box& box,
                   const SimplexOptions& opts = {});

struct QuasiNewtonOptions {
    int max_iterations = 200;
    double g_tol = 1e-6;
};

// Projected BFGS: variables held at a bound by the gradient are frozen, the
// rest take a quasi-Newton step followed by a projected Armijo backtrack.
// h0 is the initial inverse-Hessian guess (identity when absent). Besides
// pg_norm <= g_tol, a point counts as converged when f cannot be lowered at
// working precision: the steepest-descent backtrack fails or accepted steps
// shrink below 1e-15 with no change in f. Ill-conditioned boundary corners
// end this way.
Result projected_bfgs(const ObjectiveGrad& fg, const Eigen::VectorXd& x0, const Box& box,
                      const std::optional<Eigen::MatrixXd>& h0 = std::nullopt,
                      const QuasiNewtonOptions& opts = {});

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Box& box);

}  // namespace vhs::opt
