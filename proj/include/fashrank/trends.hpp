#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fashrank/dataset.hpp"
#include "fashrank/model.hpp"

namespace fashrank {

struct EpochSpan {
    Timestamp start = 0;
    Timestamp end = 0;  // exclusive, except the last span which ends at the data maximum
};

struct TrendSeries {
    std::size_t feature_index = 0;
    std::string feature_name;
    std::vector<double> values;  // one per epoch
    std::vector<EpochSpan> epoch_spans;

    /// max - min over epochs
    double range() const;
    nlohmann::json to_json() const;
};

struct InfluenceOptions {
    /// Adds the components of Delta_E(t) h(k). Off by default; not part of
    /// the influence score as usually defined.
    bool include_drift = false;
};

/// sum over visual dimensions of (E h(k)) .* w(t), i.e. E[:, k] . w(t).
double feature_influence(std::size_t k, std::size_t epoch, const ModelParams& params,
                         const InfluenceOptions& options = {});

std::vector<EpochSpan> epoch_spans(const EpochSchedule& schedule);

TrendSeries influence_series(std::size_t k, const ModelParams& params, const std::vector<std::string>& names = {},
                             const InfluenceOptions& options = {});

/// Features sorted by descending influence range, ties by index.
std::vector<TrendSeries> top_trending(std::size_t m, const ModelParams& params,
                                      const std::vector<std::string>& names = {},
                                      const InfluenceOptions& options = {});

struct Exemplar {
    ItemIdx item = 0;
    double value = 0.0;
};

/// The n items with the largest f_{i,k}, drawn from `sample` when given,
/// else from the whole catalog; ties go to the lower item index.
std::vector<Exemplar> top_items_for_feature(std::size_t k, const FeatureMatrix& feats, std::size_t n,
                                            std::optional<std::span<const ItemIdx>> sample = std::nullopt);

/// CSV rows `feature,epoch_start,epoch_end,influence`.
std::string trends_csv(std::span<const TrendSeries> series);

}  // namespace fashrank
