#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "fashrank/dataset.hpp"
#include "fashrank/model.hpp"
#include "fashrank/rng.hpp"

namespace fashrank {

struct UserSplit {
    std::vector<ItemIdx> train;  // sorted, distinct
    bool evaluable = false;
    ItemIdx validation = 0;
    ItemIdx test = 0;
    Timestamp validation_ts = 0;
    Timestamp test_ts = 0;
};

/// Leave-one-out partition: per evaluable user one held-out test item, one
/// validation item, and the remaining items for training.
struct Splits {
    std::vector<UserSplit> users;
    std::vector<Interaction> train_interactions;
    std::vector<std::size_t> train_item_counts;  // training interactions per item

    /// True for items in the user's train, validation or test sets.
    bool is_observed(UserIdx u, ItemIdx j) const;
    std::size_t evaluable_user_count() const;
};

/// Users with at least three distinct items get a uniformly drawn test
/// interaction and a validation interaction on a different item; every
/// interaction on either held-out item leaves the training set.
Splits split(const Dataset& data, Rng& rng);

enum class Setting { AllItems, ColdStart };
enum class Target { Test, Validation };

std::string_view setting_name(Setting s) noexcept;
Setting parse_setting(std::string_view name);

struct EvalConfig {
    Setting setting = Setting::AllItems;
    std::size_t cold_threshold = 5;
    std::size_t negative_sample_size = 0;  // 0 = every eligible negative
    std::uint64_t rng_seed = 1;
    Target target = Target::Test;
};

/// Negatives j for user u: items outside P_u, V_u and T_u, or a seeded
/// uniform sample of `sample_size` of them drawn without replacement.
std::vector<ItemIdx> evaluation_negatives(UserIdx u, const Splits& splits, std::size_t n_items,
                                          std::size_t sample_size, Rng& rng);
std::vector<std::pair<ItemIdx, ItemIdx>> evaluation_pairs(UserIdx u, const Splits& splits, std::size_t n_items,
                                                          std::size_t sample_size, Rng& rng,
                                                          Target target = Target::Test);

class Scorer {
public:
    virtual ~Scorer() = default;
    virtual double score(UserIdx u, ItemIdx i, Timestamp ts) const = 0;
    /// Scores several items for one user at one time. Implementations may
    /// share per-user work across the batch.
    virtual void score_many(UserIdx u, Timestamp ts, std::span<const ItemIdx> items, std::span<double> out) const;
};

class FunctionScorer final : public Scorer {
public:
    using Fn = std::function<double(UserIdx, ItemIdx, Timestamp)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    double score(UserIdx u, ItemIdx i, Timestamp ts) const override { return fn_(u, i, ts); }

private:
    Fn fn_;
};

/// Wraps a trained model. Batch scoring folds the user's visual factors into
/// a length-F preference vector once per call, so item visual factors are
/// never formed.
class ModelScorer final : public Scorer {
public:
    ModelScorer(const ModelParams& params, const FeatureMatrix& feats);
    double score(UserIdx u, ItemIdx i, Timestamp ts) const override;
    void score_many(UserIdx u, Timestamp ts, std::span<const ItemIdx> items, std::span<double> out) const override;

private:
    const ModelParams& params_;
    const FeatureMatrix& feats_;
};

enum class BaselineKind { Rand, Pop };
BaselineKind parse_baseline(std::string_view name);

/// rand: seeded hash of (u, i); pop: training interaction count of i.
std::unique_ptr<Scorer> baseline_scorer(BaselineKind kind, const Splits& splits, std::uint64_t seed);

struct AucReport {
    double auc = 0.0;
    std::size_t n_users = 0;
    std::size_t n_pairs = 0;
    Setting setting = Setting::AllItems;
};

/// Mean over evaluable users of the fraction of evaluation pairs with
/// score(i) > score(j). Ties count as misses. Under ColdStart only users whose
/// held-out item has fewer than `cold_threshold` training interactions are
/// averaged.
AucReport auc(const Scorer& scorer, const Splits& splits, const Dataset& data, const EvalConfig& config);

}  // namespace fashrank
