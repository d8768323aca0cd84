#include "fashrank/ids.hpp"

#include "fashrank/errors.hpp"

namespace fashrank {

IdTable::IdTable(std::vector<std::string> ids) {
    names_.reserve(ids.size());
    for (auto& id : ids) {
        if (index_.contains(id)) {
            throw Error(ErrorCode::InvalidArgument, "duplicate id '" + id + "'");
        }
        intern(id);
    }
}

std::uint32_t IdTable::intern(std::string_view id) {
    std::string key(id);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const auto idx = static_cast<std::uint32_t>(names_.size());
    names_.push_back(key);
    index_.emplace(std::move(key), idx);
    return idx;
}

std::optional<std::uint32_t> IdTable::find(std::string_view id) const {
    if (auto it = index_.find(std::string(id)); it != index_.end()) return it->second;
    return std::nullopt;
}

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::IndexOutOfRange: return "index_out_of_range";
        case ErrorCode::UnknownUser: return "user_not_found";
        case ErrorCode::UnknownItem: return "item_not_found";
        case ErrorCode::ShapeMismatch: return "shape_mismatch";
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::EmptyDataset: return "empty_dataset";
        case ErrorCode::DegenerateDataset: return "degenerate_dataset";
        case ErrorCode::DegenerateAffinity: return "degenerate_affinity";
        case ErrorCode::NonFinite: return "non_finite";
        case ErrorCode::TemporalRequired: return "temporal_required";
        case ErrorCode::NoEvaluableUsers: return "no_evaluable_users";
    }
    return "unknown";
}

}  // namespace fashrank
