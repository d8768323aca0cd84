#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fashrank/ids.hpp"

namespace fashrank {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Interaction {
    UserIdx user = 0;
    ItemIdx item = 0;
    Timestamp timestamp = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Implicit-feedback log over fixed user and item universes.
///
/// Positive sets are derived from the interactions and kept sorted; repeated
/// (user, item) interactions are retained in the log but counted once in the
/// positive set.
class Dataset {
public:
    Dataset() = default;
    Dataset(IdTable users, IdTable items, std::vector<Interaction> interactions);

    const IdTable& users() const noexcept { return users_; }
    const IdTable& items() const noexcept { return items_; }
    std::size_t user_count() const noexcept { return users_.size(); }
    std::size_t item_count() const noexcept { return items_.size(); }

    const std::vector<Interaction>& interactions() const noexcept { return interactions_; }
    std::span<const ItemIdx> positives(UserIdx u) const { return positives_.at(u); }
    bool is_positive(UserIdx u, ItemIdx i) const;

    /// Same universes, different log (e.g. the training portion of a split).
    Dataset with_interactions(std::vector<Interaction> interactions) const;

    Timestamp min_timestamp() const noexcept { return min_ts_; }
    Timestamp max_timestamp() const noexcept { return max_ts_; }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.users_ == b.users_ && a.items_ == b.items_ && a.interactions_ == b.interactions_;
    }

private:
    IdTable users_;
    IdTable items_;
    std::vector<Interaction> interactions_;
    std::vector<std::vector<ItemIdx>> positives_;
    Timestamp min_ts_ = 0;
    Timestamp max_ts_ = 0;
};

/// Dense per-item visual features; row i belongs to item index i.
struct FeatureMatrix {
    RowMatrix values;
    std::vector<std::string> names;

    FeatureMatrix() = default;
    FeatureMatrix(RowMatrix values, std::vector<std::string> names);

    std::size_t item_count() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
    Eigen::Map<const Eigen::VectorXd> row(ItemIdx i) const {
        return {values.data() + static_cast<Eigen::Index>(i) * values.cols(), values.cols()};
    }

    /// Feature-less matrix for `n` items, as used by latent-factor-only runs.
    static FeatureMatrix empty(std::size_t n);
};

}  // namespace fashrank
