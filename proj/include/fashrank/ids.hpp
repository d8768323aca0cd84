#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fashrank {

using UserIdx = std::uint32_t;
using ItemIdx = std::uint32_t;
using Timestamp = std::int64_t;

/// Bidirectional map between external string ids and dense indices,
/// ordered by insertion.
class IdTable {
public:
    IdTable() = default;
    explicit IdTable(std::vector<std::string> ids);

    /// Returns the index of `id`, inserting it at the end if new.
    std::uint32_t intern(std::string_view id);

    std::optional<std::uint32_t> find(std::string_view id) const;
    const std::string& name(std::uint32_t index) const { return names_.at(index); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    bool empty() const noexcept { return names_.empty(); }

    friend bool operator==(const IdTable& a, const IdTable& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace fashrank
