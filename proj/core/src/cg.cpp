#include "gpdhp/linops.hpp"

#include "gpdhp/error.hpp"

#include <cmath>
#include <limits>

namespace gpdhp {

int default_cg_max_iter(std::size_t n) noexcept {
    return static_cast<int>(10.0 * std::sqrt(static_cast<double>(n))) + 100;
}

CgResult cg_solve(const LinearMap& op, const Eigen::VectorXd& rhs, const Eigen::VectorXd& preconditioner_diagonal,
                  const CgOptions& options, const Eigen::VectorXd* initial_guess) {
    if (!(options.tol > 0.0)) throw ValidationError("CG tolerance must be positive");
    if (preconditioner_diagonal.size() != rhs.size()) throw DimensionError("preconditioner length mismatch");
    const auto n = rhs.size();
    const int max_iter = options.max_iter > 0 ? options.max_iter : default_cg_max_iter(static_cast<std::size_t>(n));

    CgResult result;
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        result.x = Eigen::VectorXd::Zero(n);
        result.converged = true;
        return result;
    }
    const Eigen::VectorXd inv_diag = preconditioner_diagonal.cwiseMax(std::numeric_limits<double>::min()).cwiseInverse();

    Eigen::VectorXd x = initial_guess ? *initial_guess : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd best = x;
    double best_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;

    // Restarts recompute the true residual, which guards against drift of the
    // recursively updated one.
    for (int restart = 0; restart < 4 && iterations < max_iter; ++restart) {
        Eigen::VectorXd r = rhs - (x.isZero(0.0) ? Eigen::VectorXd::Zero(n) : op(x));
        double rel = r.norm() / rhs_norm;
        if (rel < best_residual) {
            best_residual = rel;
            best = x;
        }
        if (rel <= options.tol) break;

        Eigen::VectorXd z = inv_diag.cwiseProduct(r);
        Eigen::VectorXd p = z;
        double rz = r.dot(z);
        while (iterations < max_iter) {
            const Eigen::VectorXd Ap = op(p);
            const double pAp = p.dot(Ap);
            if (!(pAp > 0.0) || !std::isfinite(pAp)) break;
            const double alpha = rz / pAp;
            x += alpha * p;
            r -= alpha * Ap;
            ++iterations;
            rel = r.norm() / rhs_norm;
            if (rel < best_residual) {
                best_residual = rel;
                best = x;
            }
            if (rel <= options.tol) break;
            z = inv_diag.cwiseProduct(r);
            const double rz_next = r.dot(z);
            p = z + (rz_next / rz) * p;
            rz = rz_next;
        }
        x = best;
        const double true_rel = (rhs - op(x)).norm() / rhs_norm;
        best_residual = true_rel;
        if (true_rel <= options.tol) break;
    }

    result.x = std::move(best);
    result.iterations = iterations;
    result.relative_residual = best_residual;
    result.converged = best_residual <= options.tol;
    return result;
}

CgResult cg_solve(const CollapsedKernelOperator& K, const Eigen::VectorXd& rhs, const CgOptions& options,
                  const Eigen::VectorXd* initial_guess) {
    if (static_cast<std::size_t>(rhs.size()) != K.size()) throw DimensionError("CG right-hand side length mismatch");
    return cg_solve([&K](const Eigen::VectorXd& v) { return K.apply(v); }, rhs, K.diagonal(), options,
                    initial_guess);
}

} // namespace gpdhp
