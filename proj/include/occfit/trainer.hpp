#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "occfit/field.hpp"
#include "occfit/kdtree.hpp"
#include "occfit/mlp.hpp"
#include "occfit/point_cloud.hpp"
#include "occfit/rng.hpp"
#include "occfit/types.hpp"

namespace occfit {

enum class LrSchedule { constant, cosine_decay };

struct TrainingConfig {
    long iterations = 20000;
    int batch_size = 256;
    double lambda_entropy = 0.1;
    double learning_rate = 1e-3;
    LrSchedule lr_schedule = LrSchedule::cosine_decay;
    int sigma_k = 50;          // k-th nearest neighbor sets the query noise scale
    double domain_margin = 0.1; // entropy samples fill [-(1+m), 1+m]^3
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 0) throw Error(Error::Code::precondition, "iterations must be >= 0");
        if (batch_size < 1) throw Error(Error::Code::precondition, "batch_size must be >= 1");
        if (lambda_entropy < 0.0) throw Error(Error::Code::precondition, "lambda_entropy must be >= 0");
        if (!(learning_rate > 0.0)) throw Error(Error::Code::precondition, "learning_rate must be > 0");
        if (sigma_k < 1) throw Error(Error::Code::precondition, "sigma_k must be >= 1");
        if (!(domain_margin > 0.0)) throw Error(Error::Code::precondition, "domain_margin must be > 0");
    }
};

inline double scheduled_lr(const TrainingConfig& cfg, long iteration) {
    if (cfg.lr_schedule == LrSchedule::constant) return cfg.learning_rate;
    const double t = cfg.iterations > 0 ? static_cast<double>(iteration) / static_cast<double>(cfg.iterations) : 0.0;
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(M_PI * t));
}

struct QueryBatch {
    Matrix queries;       // 3 x B, noisy samples around the cloud
    Matrix anchors;       // 3 x B, exact nearest cloud point per query
    Matrix domain_points; // 3 x B, uniform entropy samples
    Matrix cloud_points;  // 3 x B, the unperturbed picks
};

/// Per-point noise scales: distance to the sigma_k-th nearest neighbor.
inline std::vector<double> query_noise_scales(const PointCloud& cloud, const KdTree& index,
                                              int sigma_k) {
    std::vector<double> sigma(cloud.size());
    const std::size_t k = static_cast<std::size_t>(sigma_k) + 1; // self included at distance 0
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto nn = index.knn(cloud.points[i], k);
        sigma[i] = nn.back().distance;
    }
    return sigma;
}

inline QueryBatch build_query_batch(const PointCloud& cloud, const KdTree& index,
                                    const std::vector<double>& sigma, const TrainingConfig& cfg,
                                    Rng& rng) {
    const int B = cfg.batch_size;
    QueryBatch batch;
    batch.queries.resize(3, B);
    batch.anchors.resize(3, B);
    batch.domain_points.resize(3, B);
    batch.cloud_points.resize(3, B);

    for (int b = 0; b < B; ++b) {
        const std::size_t pick = rng.index(cloud.size());
        const Vec3 base = cloud.points[pick];
        const Vec3 q = base + sigma[pick] * rng.normal3();
        batch.cloud_points.col(b) = base;
        batch.queries.col(b) = q;
        batch.anchors.col(b) = cloud.points[index.nearest(q).index];
    }
    const double half = 1.0 + cfg.domain_margin;
    for (int b = 0; b < B; ++b) batch.domain_points.col(b) = rng.uniform_in_cube(half);
    return batch;
}

inline QueryBatch build_query_batch(const PointCloud& cloud, const KdTree& index,
                                    const TrainingConfig& cfg, Rng& rng) {
    return build_query_batch(cloud, index, query_noise_scales(cloud, index, cfg.sigma_k), cfg, rng);
}

// --- losses -------------------------------------------------------------------

inline double sampling_loss(const NetworkParameters& params, const QueryBatch& batch,
                            GradBuffer* grads = nullptr, SamplingLossStats* stats = nullptr) {
    FieldEvaluator ev(params);
    return ev.sampling_loss(batch.queries, batch.anchors, grads, stats);
}

/// mean H(o) over the domain minus mean H(o) over the cloud picks.
inline double entropy_loss(const NetworkParameters& params, const QueryBatch& batch,
                           GradBuffer* grads = nullptr, double grad_scale = 1.0) {
    FieldEvaluator ev(params);
    const double dom = ev.entropy_mean(batch.domain_points, grad_scale, grads);
    const double cloud = ev.entropy_mean(batch.cloud_points, -grad_scale, grads);
    return dom - cloud;
}

struct LossValues {
    double sampling = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

inline LossValues total_loss(const NetworkParameters& params, const QueryBatch& batch,
                             const TrainingConfig& cfg, GradBuffer* grads = nullptr,
                             SamplingLossStats* stats = nullptr) {
    LossValues v;
    FieldEvaluator ev(params);
    v.sampling = ev.sampling_loss(batch.queries, batch.anchors, grads, stats);
    v.entropy = ev.entropy_mean(batch.domain_points, cfg.lambda_entropy, grads) -
                ev.entropy_mean(batch.cloud_points, -cfg.lambda_entropy, grads);
    v.total = v.sampling + cfg.lambda_entropy * v.entropy;
    return v;
}

// --- optimizer ------------------------------------------------------------------

/// Adam over a flat coordinate vector (beta1 0.9, beta2 0.999, eps 1e-8).
struct AdamState {
    Vector m;
    Vector v;
    long t = 0;

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}

    void step(Vector& params, const Vector& grad, double lr) {
        ++t;
        m = kBeta1 * m + (1.0 - kBeta1) * grad;
        v = (kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
        params.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
    }
};

struct StepResult {
    LossValues losses;
    bool applied = false; // false when a non-finite loss/gradient aborted the step
};

inline StepResult train_step(NetworkParameters& params, AdamState& adam, const QueryBatch& batch,
                             const TrainingConfig& cfg, long iteration, GradBuffer& grads,
                             FieldEvaluator& ev) {
    grads.set_zero();
    StepResult out;
    SamplingLossStats stats;
    out.losses.sampling = ev.sampling_loss(batch.queries, batch.anchors, &grads, &stats);
    out.losses.entropy = ev.entropy_mean(batch.domain_points, cfg.lambda_entropy, &grads) -
                         ev.entropy_mean(batch.cloud_points, -cfg.lambda_entropy, &grads);
    out.losses.total = out.losses.sampling + cfg.lambda_entropy * out.losses.entropy;

    if (!std::isfinite(out.losses.total) || !grads.all_finite()) return out;

    Vector flat = params.flatten();
    adam.step(flat, grads.flatten(), scheduled_lr(cfg, iteration));
    params.assign_flat(flat);
    out.applied = true;
    return out;
}

inline StepResult train_step(NetworkParameters& params, AdamState& adam, const QueryBatch& batch,
                             const TrainingConfig& cfg, long iteration = 0) {
    GradBuffer grads(params);
    FieldEvaluator ev(params);
    return train_step(params, adam, batch, cfg, iteration, grads, ev);
}

// --- training loop ---------------------------------------------------------------

struct TrainingLogRow {
    long iteration;
    double loss_samp;
    double loss_entr;
    double loss_total;
    double seconds;
};

struct TrainingLog {
    std::vector<TrainingLogRow> rows;

    static constexpr const char* kCsvHeader = "iteration,loss_samp,loss_entr,loss_total,seconds";

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error(Error::Code::io, "cannot write " + path);
        out << kCsvHeader << '\n';
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.3f\n", r.iteration, r.loss_samp,
                          r.loss_entr, r.loss_total, r.seconds);
            out << buf;
        }
    }
};

struct FitResult {
    NetworkParameters params;
    TrainingLog log;
    bool aborted = false; // three consecutive non-finite losses
    long iterations_run = 0;
};

/// Full optimization loop: query batches -> total loss -> Adam. Deterministic
/// for a fixed seed. The cloud must already be normalized to the unit ball.
inline FitResult fit(const PointCloud& cloud, const TrainingConfig& cfg,
                     const NetworkArchitecture& arch = {}) {
    cfg.validate();
    if (cloud.empty()) throw Error(Error::Code::empty_cloud, "fit: empty cloud");
    if (!is_normalized(cloud))
        throw Error(Error::Code::precondition, "fit: cloud must be normalized to the unit ball");

    FitResult result;
    result.params = init_network(arch, cfg.seed);
    if (cfg.iterations == 0) return result;

    const KdTree index(cloud);
    const std::vector<double> sigma = query_noise_scales(cloud, index, cfg.sigma_k);
    Rng rng(cfg.seed);
    AdamState adam(static_cast<Eigen::Index>(arch.parameter_count()));
    GradBuffer grads(result.params);
    FieldEvaluator ev(result.params);

    const auto t0 = std::chrono::steady_clock::now();
    int consecutive_bad = 0;
    for (long it = 0; it < cfg.iterations; ++it) {
        const QueryBatch batch = build_query_batch(cloud, index, sigma, cfg, rng);
        const StepResult step = train_step(result.params, adam, batch, cfg, it, grads, ev);
        result.iterations_run = it + 1;
        if (!step.applied) {
            if (++consecutive_bad >= 3) {
                result.aborted = true;
                break;
            }
            continue;
        }
        consecutive_bad = 0;
        if ((it + 1) % 100 == 0) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.rows.push_back(
                {it + 1, step.losses.sampling, step.losses.entropy, step.losses.total, secs});
        }
    }
    return result;
}

} // namespace occfit
