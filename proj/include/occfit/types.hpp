#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <utility>

namespace occfit {

using Vec3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Single error type for the whole library; the code drives CLI exit status.
class Error : public std::runtime_error {
public:
    enum class Code {
        file_not_found,
        parse,
        empty_cloud,
        degenerate_cloud,
        invalid_architecture,
        corrupt_checkpoint,
        degenerate_gradient,
        all_degenerate,
        non_finite_loss,
        empty_level_set,
        solver_diverged,
        insufficient_convergence,
        io,
        config,
        precondition,
    };

    Error(Code code, std::string message, long line = -1)
        : std::runtime_error(std::move(message)), code_(code), line_(line) {}

    Code code() const { return code_; }
    /// Line number for parse errors, -1 otherwise.
    long line() const { return line_; }

private:
    Code code_;
    long line_;
};

struct Box {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    Box inflated(double factor) const {
        Box b;
        const Vec3 c = center();
        b.min = c + factor * (min - c);
        b.max = c + factor * (max - c);
        return b;
    }
};

} // namespace occfit
