#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fashrank/dataset.hpp"
#include "fashrank/ids.hpp"

namespace fashrank {

enum class ModelMode { MfOnly, Visual, Temporal };

std::string_view mode_name(ModelMode mode) noexcept;
ModelMode parse_mode(std::string_view name);

/// Partition of the timeline into `epoch_count()` epochs. A timestamp equal to
/// a boundary belongs to the later epoch. `time_min`/`time_max` record the
/// observed data range and only serve to report epoch spans.
struct EpochSchedule {
    std::vector<Timestamp> boundaries;
    Timestamp time_min = 0;
    Timestamp time_max = 0;

    std::size_t epoch_count() const noexcept { return boundaries.size() + 1; }
    void validate() const;

    friend bool operator==(const EpochSchedule&, const EpochSchedule&) = default;
};

std::size_t epoch_of(Timestamp ts, const EpochSchedule& schedule);

struct TemporalParams {
    EpochSchedule schedule;
    RowMatrix weights;             // epoch_count x K_vis, row t = w(t)
    std::vector<RowMatrix> drifts; // epoch_count matrices of K_vis x F
};

/// Learned parameters of the latent-factor, visual and temporal-visual
/// predictors. Item visual factors are never stored; they are derived from
/// the embedding and the item's features at scoring time.
///
/// F == 0 means the model carries no visual-bias/embedding terms and ignores
/// any feature matrix it is given (latent-factor-only models).
struct ModelParams {
    ModelMode mode = ModelMode::Visual;
    IdTable users;
    IdTable items;
    std::size_t K = 0;
    std::size_t K_vis = 0;
    std::size_t F = 0;

    double alpha = 0.0;
    Eigen::VectorXd user_bias;   // |U|
    Eigen::VectorXd item_bias;   // |I|
    Eigen::VectorXd visual_bias; // F
    RowMatrix user_latent;       // |U| x K
    RowMatrix item_latent;       // |I| x K
    RowMatrix user_visual;       // |U| x K_vis
    RowMatrix embedding;         // K_vis x F
    std::optional<TemporalParams> temporal;

    std::size_t user_count() const noexcept { return users.size(); }
    std::size_t item_count() const noexcept { return items.size(); }
    bool is_temporal() const noexcept { return temporal.has_value(); }

    /// Zero-valued parameters with every block sized for the given shape.
    static ModelParams zeros(ModelMode mode, IdTable users, IdTable items, std::size_t K, std::size_t K_vis,
                             std::size_t F, std::size_t epoch_count = 1);

    /// Throws ShapeMismatch / NonFinite when a block violates its declared shape.
    void validate() const;
};

Eigen::VectorXd one_hot(std::size_t k, std::size_t F);

/// The six additive terms of the static predictor, kept apart so callers can
/// inspect or isolate them.
struct ScoreTerms {
    double global = 0.0;      // alpha
    double user_bias = 0.0;   // beta_u
    double item_bias = 0.0;   // beta_i
    double visual_bias = 0.0; // beta^T f
    double latent = 0.0;      // gamma_u^T gamma_i
    double visual = 0.0;      // theta_u^T theta_i

    double total() const noexcept { return global + user_bias + item_bias + visual_bias + latent + visual; }
};

/// Terms for user u and item i, with `f` standing in for the item's feature
/// vector. With `epoch` set, theta_i is the epoch-specific visual factor.
ScoreTerms score_terms(UserIdx u, ItemIdx i, const Eigen::Ref<const Eigen::VectorXd>& f, const ModelParams& params,
                       std::optional<std::size_t> epoch = std::nullopt);

/// Static predictor: alpha + beta_u + beta_i + beta^T f_i + gamma_u^T gamma_i + theta_u^T (E f_i).
double predict_score(UserIdx u, ItemIdx i, const ModelParams& params, const FeatureMatrix& feats);

/// (E f_i) .* w(t) + Delta_E(t) f_i
Eigen::VectorXd visual_item_factor(ItemIdx i, std::size_t epoch, const ModelParams& params,
                                   const FeatureMatrix& feats);

/// Same transform applied to an arbitrary feature vector.
Eigen::VectorXd visual_factor_of(const Eigen::Ref<const Eigen::VectorXd>& f, std::size_t epoch,
                                 const ModelParams& params);

double predict_score_temporal(UserIdx u, ItemIdx i, Timestamp ts, const ModelParams& params,
                              const FeatureMatrix& feats);

/// Dispatches to the static or temporal predictor depending on the model.
double predict(UserIdx u, ItemIdx i, Timestamp ts, const ModelParams& params, const FeatureMatrix& feats);

/// Checks that `feats` can be used with `params`.
void check_features(const ModelParams& params, const FeatureMatrix& feats);

}  // namespace fashrank
