#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "occfit/mlp.hpp"
#include "occfit/types.hpp"

namespace occfit {

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double softplus(double a, double beta) {
    const double ba = beta * a;
    return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(ba))) / beta;
}

} // namespace detail

struct FieldEvaluation {
    double occupancy;
    double uncertainty;
    Vec3 gradient; // d(uncertainty)/dx
};

/// Gradient accumulator shaped like a parameter set.
struct GradBuffer {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    explicit GradBuffer(const NetworkParameters& p) {
        for (int l = 0; l < p.layers(); ++l) {
            weights.emplace_back(Matrix::Zero(p.weights[l].rows(), p.weights[l].cols()));
            biases.emplace_back(Vector::Zero(p.biases[l].size()));
        }
    }

    void set_zero() {
        for (Matrix& w : weights) w.setZero();
        for (Vector& b : biases) b.setZero();
    }

    /// Same coordinate order as NetworkParameters::flatten().
    Vector flatten() const {
        std::size_t total = 0;
        for (std::size_t l = 0; l < weights.size(); ++l)
            total += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
        Vector out(total);
        std::size_t k = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const Matrix& w = weights[l];
            for (int r = 0; r < w.rows(); ++r)
                for (int c = 0; c < w.cols(); ++c) out[k++] = w(r, c);
            for (int r = 0; r < biases[l].size(); ++r) out[k++] = biases[l][r];
        }
        return out;
    }

    bool all_finite() const {
        for (const Matrix& w : weights)
            if (!w.allFinite()) return false;
        for (const Vector& b : biases)
            if (!b.allFinite()) return false;
        return true;
    }
};

struct SamplingLossStats {
    std::size_t batch_size = 0;
    std::size_t degenerate = 0; // query terms dropped for vanishing gradient
};

// Batched evaluator over a fixed parameter set. Columns are samples. The
// parameters are borrowed and must stay alive and unmodified while in use;
// distinct evaluators may run concurrently over the same parameters.
class FieldEvaluator {
public:
    static constexpr double kDegenerateGradient = 1e-9;
    static constexpr double kSurfaceTol = 1e-4;
    static constexpr double kProbClamp = 1e-7;

    explicit FieldEvaluator(const NetworkParameters& params) : p_(&params) {
        params.arch.validate();
        const int H = params.arch.hidden_layers;
        a_.resize(H);
        h_.resize(H);
        sp_.resize(H);
        spp_.resize(H);
        ta_.resize(H);
        th_.resize(H);
    }

    const NetworkParameters& params() const { return *p_; }

    /// Forward pass; X is 3 x B. With derivs, softplus slopes are cached for
    /// the gradient passes.
    void forward(const Eigen::Ref<const Matrix>& X, bool want_derivs) {
        const auto& arch = p_->arch;
        const int H = arch.hidden_layers;
        const double beta = arch.softplus_beta;
        X_ = X;
        for (int l = 0; l < H; ++l) {
            if (l == 0)
                a_[l].noalias() = p_->weights[l] * X_;
            else if (l == arch.skip_layer) {
                a_[l].noalias() = p_->weights[l].leftCols(arch.hidden_width) * h_[l - 1];
                a_[l].noalias() += p_->weights[l].rightCols(3) * X_;
            } else
                a_[l].noalias() = p_->weights[l] * h_[l - 1];
            a_[l].colwise() += p_->biases[l];

            h_[l] = a_[l].unaryExpr([beta](double v) { return detail::softplus(v, beta); });
            if (want_derivs) {
                sp_[l] = a_[l].unaryExpr([beta](double v) { return detail::sigmoid(beta * v); });
                spp_[l] = (beta * sp_[l].array() * (1.0 - sp_[l].array())).matrix();
            }
        }
        z_.noalias() = (p_->weights[H] * h_[H - 1]).row(0);
        z_.array() += p_->biases[H][0];
        occ_ = z_.unaryExpr([](double v) { return detail::sigmoid(v); });
        unc_ = (1.0 - 2.0 * occ_.array()).matrix();
    }

    Eigen::Index batch() const { return z_.size(); }
    const RowVector& z() const { return z_; }
    const RowVector& occupancy() const { return occ_; }
    const RowVector& uncertainty() const { return unc_; }

    /// d(uncertainty)/dx for the current batch, 3 x B. Requires forward(.., true).
    Matrix input_gradient() const {
        const auto& arch = p_->arch;
        const int H = arch.hidden_layers;
        const RowVector seed = (-2.0 * occ_.array() * (1.0 - occ_.array())).matrix();
        Matrix D = p_->weights[H].transpose() * seed; // width x B
        Matrix GX = Matrix::Zero(3, batch());
        for (int l = H - 1; l >= 0; --l) {
            D.array() *= sp_[l].array();
            if (l == 0) {
                GX.noalias() += p_->weights[l].transpose() * D;
            } else if (l == arch.skip_layer) {
                GX.noalias() += p_->weights[l].rightCols(3).transpose() * D;
                D = p_->weights[l].leftCols(arch.hidden_width).transpose() * D;
            } else {
                D = p_->weights[l].transpose() * D;
            }
        }
        return GX;
    }

    // Mean squared distance between the one-step pulled queries and their
    // anchors. Differentiates through both the field value and its spatial
    // gradient (tangent forward pass + reverse sweep over the doubled graph).
    double sampling_loss(const Eigen::Ref<const Matrix>& queries,
                         const Eigen::Ref<const Matrix>& anchors, GradBuffer* grads,
                         SamplingLossStats* stats = nullptr) {
        const auto& arch = p_->arch;
        const int H = arch.hidden_layers;
        const int W = arch.hidden_width;
        const Eigen::Index B = queries.cols();
        if (anchors.cols() != B)
            throw Error(Error::Code::precondition, "sampling_loss: queries/anchors size mismatch");

        forward(queries, true);
        const Matrix G = input_gradient();

        Matrix V = Matrix::Zero(3, B);   // dLoss/d(gradient), the tangent seed
        RowVector c1 = RowVector::Zero(B); // dLoss/dU
        std::size_t degenerate = 0;
        double loss = 0.0;
        std::vector<double> sq(static_cast<std::size_t>(B), 0.0);
        for (Eigen::Index b = 0; b < B; ++b) {
            const Vec3 g = G.col(b);
            const double gn = g.norm();
            if (gn < kDegenerateGradient) {
                ++degenerate;
                continue;
            }
            const Vec3 ghat = g / gn;
            const double u = unc_[b];
            const Vec3 r = queries.col(b) - u * ghat - anchors.col(b);
            sq[static_cast<std::size_t>(b)] = r.squaredNorm();
            c1[b] = -2.0 * r.dot(ghat);
            V.col(b) = -(2.0 * u / gn) * (r - ghat * ghat.dot(r));
        }
        const std::size_t M = static_cast<std::size_t>(B) - degenerate;
        if (stats) *stats = {static_cast<std::size_t>(B), degenerate};
        if (M == 0)
            throw Error(Error::Code::all_degenerate, "sampling_loss: every query gradient degenerate");
        for (double s : sq) loss += s;
        loss /= static_cast<double>(M);
        if (!grads) return loss;

        const double inv_m = 1.0 / static_cast<double>(M);
        c1 *= inv_m;
        V *= inv_m;

        // tangent forward seeded with V
        for (int l = 0; l < H; ++l) {
            if (l == 0)
                ta_[l].noalias() = p_->weights[l] * V;
            else if (l == arch.skip_layer) {
                ta_[l].noalias() = p_->weights[l].leftCols(W) * th_[l - 1];
                ta_[l].noalias() += p_->weights[l].rightCols(3) * V;
            } else
                ta_[l].noalias() = p_->weights[l] * th_[l - 1];
            th_[l] = (sp_[l].array() * ta_[l].array()).matrix();
        }
        const RowVector zdot = (p_->weights[H] * th_[H - 1]).row(0);

        const RowVector szp = (occ_.array() * (1.0 - occ_.array())).matrix();
        const RowVector szpp = (szp.array() * (1.0 - 2.0 * occ_.array())).matrix();
        const RowVector Az =
            ((-2.0 * c1.array() * szp.array()) - 2.0 * (szpp.array() * zdot.array())).matrix();
        const RowVector Azdot = (-2.0 * szp.array()).matrix();

        grads->weights[H].noalias() += Az * h_[H - 1].transpose();
        grads->weights[H].noalias() += Azdot * th_[H - 1].transpose();
        grads->biases[H][0] += Az.sum();

        Matrix Ah = p_->weights[H].transpose() * Az;
        Matrix Ath = p_->weights[H].transpose() * Azdot;
        Matrix Aa, Ata;
        for (int l = H - 1; l >= 0; --l) {
            Aa = (sp_[l].array() * Ah.array() + spp_[l].array() * ta_[l].array() * Ath.array()).matrix();
            Ata = (sp_[l].array() * Ath.array()).matrix();
            if (l == 0) {
                grads->weights[l].noalias() += Aa * X_.transpose();
                grads->weights[l].noalias() += Ata * V.transpose();
            } else if (l == arch.skip_layer) {
                grads->weights[l].leftCols(W).noalias() += Aa * h_[l - 1].transpose();
                grads->weights[l].leftCols(W).noalias() += Ata * th_[l - 1].transpose();
                grads->weights[l].rightCols(3).noalias() += Aa * X_.transpose();
                grads->weights[l].rightCols(3).noalias() += Ata * V.transpose();
            } else {
                grads->weights[l].noalias() += Aa * h_[l - 1].transpose();
                grads->weights[l].noalias() += Ata * th_[l - 1].transpose();
            }
            grads->biases[l].noalias() += Aa.rowwise().sum();
            if (l > 0) {
                const auto Wl = l == arch.skip_layer ? p_->weights[l].leftCols(W) : p_->weights[l].leftCols(p_->weights[l].cols());
                Ah.noalias() = Wl.transpose() * Aa;
                Ath.noalias() = Wl.transpose() * Ata;
            }
        }
        return loss;
    }

    /// Mean binary entropy of the occupancy over a point set, with clamped
    /// probabilities. grad_scale * d(mean)/dtheta is accumulated when grads
    /// is non-null.
    double entropy_mean(const Eigen::Ref<const Matrix>& points, double grad_scale,
                        GradBuffer* grads) {
        const auto& arch = p_->arch;
        const int H = arch.hidden_layers;
        const int W = arch.hidden_width;
        const Eigen::Index B = points.cols();
        forward(points, grads != nullptr);

        double mean = 0.0;
        RowVector Az = RowVector::Zero(B);
        for (Eigen::Index b = 0; b < B; ++b) {
            const double o = occ_[b];
            const double oc = std::min(std::max(o, kProbClamp), 1.0 - kProbClamp);
            mean += -oc * std::log(oc) - (1.0 - oc) * std::log1p(-oc);
            if (grads && o > kProbClamp && o < 1.0 - kProbClamp) {
                // dH/dz = ln((1-o)/o) * o(1-o) = -z * sigma'(z)
                Az[b] = grad_scale / static_cast<double>(B) * (-z_[b]) * o * (1.0 - o);
            }
        }
        mean /= static_cast<double>(B);
        if (!grads) return mean;

        grads->weights[H].noalias() += Az * h_[H - 1].transpose();
        grads->biases[H][0] += Az.sum();
        Matrix Ah = p_->weights[H].transpose() * Az;
        Matrix Aa;
        for (int l = H - 1; l >= 0; --l) {
            Aa = (sp_[l].array() * Ah.array()).matrix();
            if (l == 0) {
                grads->weights[l].noalias() += Aa * X_.transpose();
            } else if (l == arch.skip_layer) {
                grads->weights[l].leftCols(W).noalias() += Aa * h_[l - 1].transpose();
                grads->weights[l].rightCols(3).noalias() += Aa * X_.transpose();
            } else {
                grads->weights[l].noalias() += Aa * h_[l - 1].transpose();
            }
            grads->biases[l].noalias() += Aa.rowwise().sum();
            if (l > 0) {
                const auto Wl = l == arch.skip_layer ? p_->weights[l].leftCols(W)
                                                     : p_->weights[l].leftCols(p_->weights[l].cols());
                Ah.noalias() = Wl.transpose() * Aa;
            }
        }
        return mean;
    }

private:
    const NetworkParameters* p_;
    Matrix X_;
    std::vector<Matrix> a_, h_, sp_, spp_;
    std::vector<Matrix> ta_, th_; // tangent chains
    RowVector z_, occ_, unc_;
};

// --- pointwise convenience wrappers ------------------------------------------

inline double occupancy(const NetworkParameters& params, const Vec3& x) {
    FieldEvaluator ev(params);
    ev.forward(x, false);
    return ev.occupancy()[0];
}

inline double margin_uncertainty(const NetworkParameters& params, const Vec3& x) {
    FieldEvaluator ev(params);
    ev.forward(x, false);
    return ev.uncertainty()[0];
}

inline Vec3 spatial_gradient(const NetworkParameters& params, const Vec3& x) {
    FieldEvaluator ev(params);
    ev.forward(x, true);
    return ev.input_gradient().col(0);
}

inline Vec3 occupancy_gradient(const NetworkParameters& params, const Vec3& x) {
    return -0.5 * spatial_gradient(params, x);
}

inline FieldEvaluation evaluate(const NetworkParameters& params, const Vec3& x) {
    FieldEvaluator ev(params);
    ev.forward(x, true);
    return {ev.occupancy()[0], ev.uncertainty()[0], ev.input_gradient().col(0)};
}

/// One Eq.-style pull with the unit-normalized gradient: q - U(q) * ghat.
inline Vec3 single_pull(const NetworkParameters& params, const Vec3& q) {
    FieldEvaluator ev(params);
    ev.forward(q, true);
    const Vec3 g = ev.input_gradient().col(0);
    const double gn = g.norm();
    if (gn < FieldEvaluator::kDegenerateGradient)
        throw Error(Error::Code::degenerate_gradient, "single_pull: vanishing field gradient");
    return q - ev.uncertainty()[0] * g / gn;
}

struct ProjectionResult {
    Vec3 point;
    bool converged;
    int steps;
};

/// Damped Newton projection onto the zero level set of the uncertainty.
inline ProjectionResult project_to_surface(const NetworkParameters& params, const Vec3& q,
                                           int max_steps = 10, double damping = 0.8) {
    if (max_steps < 1) throw Error(Error::Code::precondition, "project_to_surface: max_steps >= 1");
    if (!(damping > 0.0 && damping <= 1.0))
        throw Error(Error::Code::precondition, "project_to_surface: damping in (0, 1]");
    FieldEvaluator ev(params);
    Vec3 x = q;
    for (int step = 0;; ++step) {
        ev.forward(x, true);
        const double u = ev.uncertainty()[0];
        if (std::abs(u) < FieldEvaluator::kSurfaceTol) return {x, true, step};
        if (step == max_steps) return {x, false, step};
        const Vec3 g = ev.input_gradient().col(0);
        const double gn2 = g.squaredNorm();
        if (gn2 < FieldEvaluator::kDegenerateGradient * FieldEvaluator::kDegenerateGradient)
            return {x, false, step};
        x -= damping * u / gn2 * g;
        if (!x.allFinite()) return {q, false, step};
    }
}

} // namespace occfit
