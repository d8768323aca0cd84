#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "fashrank/dataset.hpp"

namespace fashrank {

struct SynthConfig {
    std::size_t n_users = 1000;
    std::size_t n_items = 2000;
    std::size_t F = 50;
    std::size_t interactions_per_user = 20;
    double visual_signal_weight = 0.9;
    std::optional<Timestamp> taste_shift_time;
    double noise_std = 0.1;
    std::uint64_t rng_seed = 1;

    std::size_t active_per_item = 5;
    std::size_t slate_size = 10;
    std::size_t style_count = 10;
    double taste_scale = 2.0;
    std::size_t trending_features = 4;
    double trend_strength = 1.0;
    double style_shift = 1.0;  // in [0, 1]; how far style prototypes move at the shift
    Timestamp time_horizon = 1000;

    void validate() const;
};

/// Hidden preference structure behind a synthetic dataset. A user's taste at
/// time t is a personal part plus a shared trend vector; both switch to their
/// `_after` versions at the shift time.
struct SynthGroundTruth {
    RowMatrix personal;             // n_users x F
    RowMatrix personal_after;       // equals personal when no shift
    Eigen::VectorXd trend_before;   // F
    Eigen::VectorXd trend_after;    // F; equals trend_before when no shift
    Eigen::VectorXd popularity;     // n_items, in [0, 1]
    std::optional<Timestamp> shift_time;

    Eigen::VectorXd taste(UserIdx u, Timestamp ts) const;
    nlohmann::json to_json() const;
};

struct SynthDataset {
    Dataset data;
    FeatureMatrix features;
    SynthGroundTruth truth;
};

/// Each interaction picks the argmax over a random slate of unseen items of
///   w * taste_u(t)^T f_i + (1 - w) * (popularity_i + noise).
/// Features are sparse and non-negative, with `active_per_item` attributes
/// per item valued in [0.5, 1].
SynthDataset generate_synthetic(const SynthConfig& config);

/// interactions.tsv, features.tsv, feature_names.txt, ground_truth.json
void write_synthetic(const SynthDataset& synth, const std::filesystem::path& dir);

}  // namespace fashrank
