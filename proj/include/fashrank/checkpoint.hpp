#pragma once

#include <filesystem>

#include <json.hpp>

#include "fashrank/model.hpp"

namespace fashrank {

inline constexpr char kCheckpointMagic[4] = {'F', 'R', 'N', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (all integers and floats little-endian):
///   "FRNK" | u32 version | u32 mode | u64 K, K_vis, F, N
///   | u64 n_users, {u32 len, bytes}* | u64 n_items, {u32 len, bytes}*
///   | f64 alpha | user_bias | item_bias | visual_bias | user_latent
///   | item_latent | user_visual | embedding            (row-major f64)
///   | temporal only: i64 time_min, time_max, boundaries[N-1],
///                    weights[N x K_vis], drifts[N x K_vis x F]
void write_checkpoint(const ModelParams& params, std::ostream& out);
ModelParams read_checkpoint(std::istream& in);

/// Writes `path` and the JSON manifest sidecar `path + ".json"`.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const nlohmann::json& manifest = nlohmann::json::object());
ModelParams load_checkpoint(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);
/// Empty object when the sidecar is absent.
nlohmann::json load_manifest(const std::filesystem::path& checkpoint);

}  // namespace fashrank
