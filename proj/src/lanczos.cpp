#include <cmath>

#include "dbsuq/errors.hpp"
#include "dbsuq/kl.hpp"
#include "dbsuq/random.hpp"

namespace dbsuq {

EigenDecomposition eig_sym_lanczos(const Eigen::MatrixXd& C, std::size_t count, double tol)
{
    const Eigen::Index n = C.rows();
    if (C.cols() != n) throw std::invalid_argument("eig_sym_lanczos needs a square matrix");
    if (!C.allFinite()) throw std::invalid_argument("eig_sym_lanczos: non-finite entries");
    if (count < 1 || static_cast<Eigen::Index>(count) > n)
        throw std::invalid_argument("eig_sym_lanczos: requested count out of range");
    const Eigen::MatrixXd A = 0.5 * (C + C.transpose());
    const auto k = static_cast<Eigen::Index>(count);

    Eigen::MatrixXd Q(n, n);
    Eigen::VectorXd alpha(n), beta(n);
    SplitMix64 rng(0x5EED);
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q[i] = rng.uniform(-1.0, 1.0);
    q.normalize();

    Eigen::Index steps = 0;
    EigenDecomposition out;
    const Eigen::Index check_every = std::max<Eigen::Index>(k, 8);
    for (Eigen::Index j = 0; j < n; ++j) {
        Q.col(j) = q;
        Eigen::VectorXd w = A * q;
        alpha[j] = q.dot(w);
        // Full reorthogonalisation (twice is enough).
        for (int pass = 0; pass < 2; ++pass)
            w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        beta[j] = w.norm();
        steps = j + 1;

        const bool exhausted = beta[j] <= 1e-14 * std::max(1.0, std::abs(alpha[0]));
        if (steps >= k && (steps % check_every == 0 || exhausted || steps == n)) {
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
            for (Eigen::Index i = 0; i < steps; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < steps) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(T);
            const Eigen::VectorXd theta = small.eigenvalues().reverse();
            const Eigen::MatrixXd S = small.eigenvectors().rowwise().reverse();
            const double scale = std::max(std::abs(theta[0]), 1e-300);
            bool converged = true;
            for (Eigen::Index i = 0; i < k; ++i)
                if (std::abs(beta[j] * S(steps - 1, i)) > tol * scale) converged = false;
            if (converged || exhausted || steps == n) {
                out.lambda = theta.head(k);
                out.vectors = Q.leftCols(steps) * S.leftCols(k);
                break;
            }
        }
        if (beta[j] == 0.0) break;
        q = w / beta[j];
    }
    if (out.lambda.size() != k) throw NumericalError("Lanczos iteration did not converge");
    for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) {
        out.vectors.col(c).normalize();
        Eigen::Index arg = 0;
        out.vectors.col(c).cwiseAbs().maxCoeff(&arg);
        if (out.vectors(arg, c) < 0.0) out.vectors.col(c) *= -1.0;
    }
    return out;
}

}  // namespace dbsuq
