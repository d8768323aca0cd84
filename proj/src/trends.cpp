#include "fashrank/trends.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fashrank/errors.hpp"

namespace fashrank {

namespace {

const TemporalParams& temporal_of(const ModelParams& params) {
    if (!params.temporal) throw Error(ErrorCode::TemporalRequired, "trend tracking needs a temporal checkpoint");
    return *params.temporal;
}

void check_feature(std::size_t k, std::size_t F) {
    if (k >= F) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "feature index " + std::to_string(k) + " out of range for F=" + std::to_string(F));
    }
}

}  // namespace

double TrendSeries::range() const {
    if (values.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return *hi - *lo;
}

nlohmann::json TrendSeries::to_json() const {
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : epoch_spans) spans.push_back({{"start", s.start}, {"end", s.end}});
    return {{"feature_index", feature_index}, {"feature_name", feature_name}, {"values", values}, {"epochs", spans}};
}

double feature_influence(std::size_t k, std::size_t epoch, const ModelParams& params, const InfluenceOptions& options) {
    const auto& t = temporal_of(params);
    check_feature(k, params.F);
    if (epoch >= t.schedule.epoch_count()) {
        throw Error(ErrorCode::IndexOutOfRange, "epoch " + std::to_string(epoch) + " out of range");
    }
    const auto col = static_cast<Eigen::Index>(k);
    const auto row = static_cast<Eigen::Index>(epoch);
    double sum = 0.0;
    for (Eigen::Index r = 0; r < params.embedding.rows(); ++r) sum += params.embedding(r, col) * t.weights(row, r);
    if (options.include_drift) {
        for (Eigen::Index r = 0; r < params.embedding.rows(); ++r) sum += t.drifts[epoch](r, col);
    }
    return sum;
}

std::vector<EpochSpan> epoch_spans(const EpochSchedule& schedule) {
    std::vector<EpochSpan> spans;
    Timestamp start = schedule.time_min;
    for (auto b : schedule.boundaries) {
        spans.push_back({start, b});
        start = b;
    }
    spans.push_back({start, std::max(start, schedule.time_max)});
    return spans;
}

TrendSeries influence_series(std::size_t k, const ModelParams& params, const std::vector<std::string>& names,
                             const InfluenceOptions& options) {
    const auto& t = temporal_of(params);
    check_feature(k, params.F);
    TrendSeries s;
    s.feature_index = k;
    s.feature_name = k < names.size() ? names[k] : "f" + std::to_string(k);
    for (std::size_t e = 0; e < t.schedule.epoch_count(); ++e) s.values.push_back(feature_influence(k, e, params, options));
    s.epoch_spans = epoch_spans(t.schedule);
    return s;
}

std::vector<TrendSeries> top_trending(std::size_t m, const ModelParams& params, const std::vector<std::string>& names,
                                      const InfluenceOptions& options) {
    temporal_of(params);
    std::vector<TrendSeries> all;
    for (std::size_t k = 0; k < params.F; ++k) all.push_back(influence_series(k, params, names, options));
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.range() > b.range(); });
    if (all.size() > m) all.resize(m);
    return all;
}

std::vector<Exemplar> top_items_for_feature(std::size_t k, const FeatureMatrix& feats, std::size_t n,
                                            std::optional<std::span<const ItemIdx>> sample) {
    check_feature(k, feats.dim());
    std::vector<Exemplar> pool;
    const auto col = static_cast<Eigen::Index>(k);
    if (sample) {
        for (auto i : *sample) {
            if (i >= feats.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
            pool.push_back({i, feats.values(static_cast<Eigen::Index>(i), col)});
        }
    } else {
        for (ItemIdx i = 0; i < feats.item_count(); ++i) pool.push_back({i, feats.values(static_cast<Eigen::Index>(i), col)});
    }
    const auto better = [](const Exemplar& a, const Exemplar& b) {
        return a.value != b.value ? a.value > b.value : a.item < b.item;
    };
    std::sort(pool.begin(), pool.end(), better);
    pool.erase(std::unique(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.item == b.item; }),
               pool.end());
    if (pool.size() > n) pool.resize(n);
    return pool;
}

std::string trends_csv(std::span<const TrendSeries> series) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "feature,epoch_start,epoch_end,influence\n";
    for (const auto& s : series) {
        for (std::size_t e = 0; e < s.values.size(); ++e) {
            out << s.feature_name << ',' << s.epoch_spans[e].start << ',' << s.epoch_spans[e].end << ',' << s.values[e]
                << '\n';
        }
    }
    return out.str();
}

}  // namespace fashrank
