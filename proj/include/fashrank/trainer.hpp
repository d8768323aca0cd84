#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fashrank/dataset.hpp"
#include "fashrank/evaluator.hpp"
#include "fashrank/model.hpp"
#include "fashrank/rng.hpp"

namespace fashrank {

/// When a temporal fit moves its boundaries. OnPlateau alternates: train on
/// fixed boundaries until validation stalls, refine from the best parameters,
/// and resume if the boundaries moved. EverySweep refines after each sweep.
enum class BoundaryRefinement { OnPlateau, EverySweep };

struct TrainConfig {
    ModelMode mode = ModelMode::Visual;
    std::size_t K = 10;
    std::size_t K_vis = 10;
    double learning_rate = 0.05;
    double lambda_theta = 5.0;   // theta_u
    double lambda_latent = 0.0;  // gamma_u, gamma_i
    double lambda_bias = 0.0;    // beta_i, visual bias
    double lambda_embed = 0.0;   // E, Delta_E(t)
    std::size_t max_sweeps = 200;
    std::size_t patience = 5;
    std::size_t epoch_count = 5;
    std::size_t boundary_refine_rounds = 3;
    BoundaryRefinement refinement = BoundaryRefinement::OnPlateau;
    std::uint64_t rng_seed = 1;

    double init_std = 0.1;
    std::size_t validation_negatives = 200;
    std::size_t boundary_probe_size = 20000;

    void validate() const;
    nlohmann::json to_json() const;
};

struct Triple {
    UserIdx user = 0;
    ItemIdx pos = 0;
    ItemIdx neg = 0;
    Timestamp ts = 0;  // of the (user, pos) interaction; selects the epoch for both items
};

/// Biases zero, latent/visual factors and embedding i.i.d. N(0, init_std^2).
/// Temporal models start with w(t) = 1, Delta_E(t) = 0 and boundaries at
/// equal-count quantiles of the interaction timestamps.
ModelParams init_params(const TrainConfig& config, const Dataset& data, const FeatureMatrix& feats, Rng& rng);

EpochSchedule quantile_schedule(const Dataset& data, std::size_t epoch_count);

/// Draws (u, i, j) with u proportional to interaction count, i uniform over
/// P_u and j uniform over the complement by rejection.
class TripleSampler {
public:
    explicit TripleSampler(const Dataset& data);
    Triple sample(Rng& rng) const;

private:
    const Dataset& data_;
    std::vector<std::vector<std::pair<ItemIdx, Timestamp>>> positives_;  // distinct items, first timestamp
};

Triple sample_triple(const Dataset& data, Rng& rng);

/// Derivatives of ln sigma(d), d = x_ui - x_uj, for every parameter block the
/// triple touches. Blocks unused by the model stay empty.
struct PairGradient {
    double d = 0.0;
    double weight = 0.0;  // sigma(-d)
    std::size_t epoch = 0;
    double pos_bias = 0.0;
    double neg_bias = 0.0;
    Eigen::VectorXd visual_bias;
    Eigen::VectorXd user_latent;
    Eigen::VectorXd pos_latent;
    Eigen::VectorXd neg_latent;
    Eigen::VectorXd user_visual;
    RowMatrix embedding;
    Eigen::VectorXd weights;
    RowMatrix drift;
};

/// Fills `out`; reuses its storage across calls.
void pair_gradient(const ModelParams& params, const Triple& t, const FeatureMatrix& feats, PairGradient& out);

/// One ascent step on ln sigma(d) - lambda/2 ||Theta||^2; returns ln sigma(d)
/// evaluated before the update. `workspace` is scratch.
double bpr_sgd_step(ModelParams& params, const Triple& t, const TrainConfig& config, const FeatureMatrix& feats,
                    PairGradient& workspace);

/// Mean ln sigma(d) of `probe` under `schedule` (other parameters fixed).
double probe_objective(const ModelParams& params, std::span<const Triple> probe, const FeatureMatrix& feats,
                       const EpochSchedule& schedule);

/// Coordinate-wise local search over boundaries: each boundary tries plus or
/// minus one tenth of the gap to its neighbours and keeps the best strictly
/// improving position. Repeated `boundary_refine_rounds` times.
EpochSchedule refine_boundaries(const ModelParams& params, std::span<const Triple> probe, const FeatureMatrix& feats,
                                const TrainConfig& config);

struct SweepRecord {
    std::size_t sweep = 0;
    double objective = 0.0;  // mean ln sigma(d) over the sweep's steps
    std::optional<double> val_auc;
    std::vector<Timestamp> boundaries;
};

struct TrainReport {
    nlohmann::json header;
    std::vector<SweepRecord> sweeps;
    std::size_t best_sweep = 0;
    std::optional<double> best_val_auc;

    /// Header line followed by one line per sweep.
    std::string to_json_lines() const;
};

struct FitResult {
    ModelParams params;
    TrainReport report;
};

/// Runs sweeps of |training interactions| SGD steps and keeps the parameters
/// with the best sampled validation AUC, stopping after `patience` sweeps
/// without improvement. Temporal models move their boundaries as set by
/// `config.refinement`.
FitResult fit(const Dataset& data, const FeatureMatrix& feats, const TrainConfig& config, const Splits& splits);

}  // namespace fashrank
