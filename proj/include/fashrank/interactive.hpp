#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fashrank/dataset.hpp"
#include "fashrank/model.hpp"

namespace fashrank {

enum class DistanceMetric { Cosine, Euclidean };

struct SessionConfig {
    double phi = 0.5;        // item steering scale
    double phi_prime = 0.1;  // feature boost scale
    std::size_t sample_size = 500;
    std::uint64_t rng_seed = 1;
    DistanceMetric metric = DistanceMetric::Cosine;

    void validate() const;
};

enum class ActionKind { SteerItem, BoostFeature };

struct Action {
    ActionKind kind = ActionKind::SteerItem;
    std::uint32_t index = 0;  // item index or feature index

    friend bool operator==(const Action&, const Action&) = default;
};

/// Divides by the element sum. Negative entries are kept as they are.
/// Throws DegenerateAffinity when |sum| < 1e-12.
Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& p);

/// Per-feature responses of user u summed over `sample`:
///   p_k = sum_i [alpha + beta_u + beta_i + gamma_u^T gamma_i + theta_u^T (E h(k)) + beta^T h(k)].
/// Temporal models use their latest epoch for the visual term.
Eigen::VectorXd affinity_response(UserIdx u, const ModelParams& params, std::span<const ItemIdx> sample);

/// A user's steerable affinity vector. Every state is reachable by replaying
/// `history()` from the initial vector.
class AffinitySession {
public:
    /// Draws R(I) uniformly without replacement (seeded by config.rng_seed),
    /// computes the responses and normalizes them. `seen` items are never
    /// recommended.
    static AffinitySession init(UserIdx u, const ModelParams& params, const SessionConfig& config,
                                std::vector<ItemIdx> seen = {});

    /// p <- N(p + phi f_i)
    void steer_item(ItemIdx i, const FeatureMatrix& feats);
    /// p <- N(p + phi' h(k))
    void boost_feature(std::size_t k);
    void apply(const Action& action, const FeatureMatrix& feats);
    /// Back to the step-0 vector; history is cleared.
    void reset();

    UserIdx user() const noexcept { return user_; }
    const Eigen::VectorXd& affinity() const noexcept { return affinity_; }
    const Eigen::VectorXd& initial_affinity() const noexcept { return initial_; }
    /// Responses before normalization.
    const Eigen::VectorXd& initial_response() const noexcept { return response_; }
    std::size_t step() const noexcept { return history_.size(); }
    const std::vector<Action>& history() const noexcept { return history_; }
    const SessionConfig& config() const noexcept { return config_; }
    const std::vector<ItemIdx>& seen() const noexcept { return seen_; }

    nlohmann::json to_json() const;
    static AffinitySession from_json(const nlohmann::json& j);

private:
    AffinitySession() = default;

    UserIdx user_ = 0;
    SessionConfig config_;
    Eigen::VectorXd response_;
    Eigen::VectorXd initial_;
    Eigen::VectorXd affinity_;
    std::vector<Action> history_;
    std::vector<ItemIdx> seen_;  // sorted
};

/// Rebuilds a session from scratch and re-applies `history`.
AffinitySession replay(UserIdx u, const ModelParams& params, const FeatureMatrix& feats, const SessionConfig& config,
                       std::span<const Action> history, std::vector<ItemIdx> seen = {});

struct Recommendation {
    ItemIdx item = 0;
    double distance = 0.0;
    bool zero_features = false;  // ranked after every non-zero item

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Reference linear scan: every eligible item is scored and the list fully
/// sorted by (zero_features, distance, item). `exclude` must be sorted.
std::vector<Recommendation> recommend_exhaustive(const Eigen::Ref<const Eigen::VectorXd>& affinity,
                                                 const FeatureMatrix& feats, std::size_t n,
                                                 std::span<const ItemIdx> exclude,
                                                 DistanceMetric metric = DistanceMetric::Cosine);

/// Scan with cached item norms and bounded top-n selection. Returns exactly
/// what `recommend_exhaustive` returns.
class NeighborIndex {
public:
    explicit NeighborIndex(const FeatureMatrix& feats);
    std::vector<Recommendation> query(const Eigen::Ref<const Eigen::VectorXd>& affinity, std::size_t n,
                                      std::span<const ItemIdx> exclude,
                                      DistanceMetric metric = DistanceMetric::Cosine) const;

private:
    const FeatureMatrix& feats_;
    std::vector<double> norms_;
};

/// Session-level entry point: excludes the session's seen items plus `exclude`.
std::vector<Recommendation> recommend(const AffinitySession& session, const FeatureMatrix& feats, std::size_t n,
                                      std::span<const ItemIdx> exclude = {});
std::vector<Recommendation> recommend(const AffinitySession& session, const NeighborIndex& index, std::size_t n,
                                      std::span<const ItemIdx> exclude = {});

}  // namespace fashrank
