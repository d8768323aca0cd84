#include "fashrank/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fashrank/errors.hpp"

namespace fashrank {

Dataset::Dataset(IdTable users, IdTable items, std::vector<Interaction> interactions)
    : users_(std::move(users)), items_(std::move(items)), interactions_(std::move(interactions)) {
    positives_.assign(users_.size(), {});
    min_ts_ = std::numeric_limits<Timestamp>::max();
    max_ts_ = std::numeric_limits<Timestamp>::min();
    for (std::size_t n = 0; n < interactions_.size(); ++n) {
        const auto& x = interactions_[n];
        if (x.user >= users_.size()) {
            throw Error(ErrorCode::UnknownUser, "interaction " + std::to_string(n) + " references user index " +
                                                    std::to_string(x.user));
        }
        if (x.item >= items_.size()) {
            throw Error(ErrorCode::UnknownItem, "interaction " + std::to_string(n) + " references item index " +
                                                    std::to_string(x.item));
        }
        if (x.timestamp < 0) {
            throw Error(ErrorCode::InvalidArgument, "interaction " + std::to_string(n) + " has negative timestamp");
        }
        positives_[x.user].push_back(x.item);
        min_ts_ = std::min(min_ts_, x.timestamp);
        max_ts_ = std::max(max_ts_, x.timestamp);
    }
    if (interactions_.empty()) min_ts_ = max_ts_ = 0;
    for (auto& p : positives_) {
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
    }
}

bool Dataset::is_positive(UserIdx u, ItemIdx i) const {
    const auto& p = positives_.at(u);
    return std::binary_search(p.begin(), p.end(), i);
}

Dataset Dataset::with_interactions(std::vector<Interaction> interactions) const {
    return Dataset(users_, items_, std::move(interactions));
}

FeatureMatrix::FeatureMatrix(RowMatrix v, std::vector<std::string> n) : values(std::move(v)), names(std::move(n)) {
    if (names.size() != static_cast<std::size_t>(values.cols())) {
        throw Error(ErrorCode::ShapeMismatch, "feature names: expected " + std::to_string(values.cols()) +
                                                  ", got " + std::to_string(names.size()));
    }
    if (!values.allFinite()) throw Error(ErrorCode::NonFinite, "feature matrix has non-finite entries");
}

FeatureMatrix FeatureMatrix::empty(std::size_t n) {
    return FeatureMatrix(RowMatrix(static_cast<Eigen::Index>(n), 0), {});
}

}  // namespace fashrank
