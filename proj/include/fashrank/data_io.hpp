#pragma once

#include <filesystem>
#include <optional>

#include "fashrank/dataset.hpp"

namespace fashrank {

inline constexpr std::size_t kMinUserInteractions = 5;

/// Reads `user_id<TAB>item_id<TAB>timestamp` rows. Users with fewer than
/// `min_user_interactions` rows are dropped before id tables are built, so
/// ids are numbered in first-appearance order among the surviving rows.
Dataset load_interactions(const std::filesystem::path& path,
                          std::size_t min_user_interactions = kMinUserInteractions);
Dataset parse_interactions(std::istream& in, std::size_t min_user_interactions = kMinUserInteractions);
void write_interactions(const Dataset& data, const std::filesystem::path& path);
void write_interactions(const Dataset& data, std::ostream& out);

/// Reads `item_id<TAB>f_1 ... f_F` rows and aligns them to `items`. Rows for
/// items not in `items` are ignored. Without a names file, features are
/// named "f0", "f1", ...
FeatureMatrix load_features(const std::filesystem::path& path, const std::optional<std::filesystem::path>& names_path,
                            const IdTable& items);
FeatureMatrix parse_features(std::istream& in, const IdTable& items);
std::vector<std::string> load_feature_names(const std::filesystem::path& path);

void write_features(const FeatureMatrix& feats, const IdTable& items, const std::filesystem::path& path);
void write_feature_names(const std::vector<std::string>& names, const std::filesystem::path& path);

}  // namespace fashrank
