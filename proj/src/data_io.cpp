#include "fashrank/data_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "fashrank/errors.hpp"

namespace fashrank {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    return out;
}

struct RawRow {
    std::string user;
    std::string item;
    Timestamp ts;
};

}  // namespace

Dataset parse_interactions(std::istream& in, std::size_t min_user_interactions) {
    std::vector<RawRow> rows;
    std::unordered_map<std::string, std::size_t> per_user;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim_cr(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected user<TAB>item<TAB>timestamp");
        }
        Timestamp ts = 0;
        const auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), ts);
        if (ec != std::errc() || ptr != fields[2].data() + fields[2].size() || ts < 0) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad timestamp '" +
                                              std::string(fields[2]) + "'");
        }
        rows.push_back({std::string(fields[0]), std::string(fields[1]), ts});
        ++per_user[rows.back().user];
    }

    IdTable users, items;
    std::vector<Interaction> interactions;
    for (const auto& r : rows) {
        if (per_user[r.user] < min_user_interactions) continue;
        interactions.push_back({users.intern(r.user), items.intern(r.item), r.ts});
    }
    if (interactions.empty()) throw Error(ErrorCode::EmptyDataset, "no interactions left after user filtering");
    return Dataset(std::move(users), std::move(items), std::move(interactions));
}

Dataset load_interactions(const std::filesystem::path& path, std::size_t min_user_interactions) {
    auto in = open_in(path);
    return parse_interactions(in, min_user_interactions);
}

void write_interactions(const Dataset& data, std::ostream& out) {
    for (const auto& x : data.interactions()) {
        out << data.users().name(x.user) << '\t' << data.items().name(x.item) << '\t' << x.timestamp << '\n';
    }
}

void write_interactions(const Dataset& data, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_interactions(data, out);
}

FeatureMatrix parse_features(std::istream& in, const IdTable& items) {
    std::unordered_map<std::string, std::vector<double>> rows;
    std::optional<std::size_t> dim;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim_cr(line);
        if (view.empty()) continue;
        const auto fields = split_fields(view);
        const std::size_t f = fields.size() - 1;
        if (dim && *dim != f) {
            throw Error(ErrorCode::ShapeMismatch, "line " + std::to_string(line_no) + ": " + std::to_string(f) +
                                                      " features, expected " + std::to_string(*dim));
        }
        dim = f;
        std::vector<double> values(f);
        for (std::size_t c = 0; c < f; ++c) {
            const auto cell = fields[c + 1];
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), values[c]);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(values[c])) {
                throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ", column " +
                                                  std::to_string(c + 2) + ": bad number '" + std::string(cell) + "'");
            }
        }
        rows.insert_or_assign(std::string(fields[0]), std::move(values));
    }

    const std::size_t F = dim.value_or(0);
    RowMatrix m(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(F));
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto it = rows.find(items.name(static_cast<std::uint32_t>(i)));
        if (it == rows.end()) {
            missing.push_back(items.name(static_cast<std::uint32_t>(i)));
            continue;
        }
        for (std::size_t c = 0; c < F; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = it->second[c];
    }
    if (!missing.empty()) {
        std::string msg = std::to_string(missing.size()) + " item(s) missing features:";
        for (std::size_t n = 0; n < missing.size() && n < 10; ++n) msg += " " + missing[n];
        if (missing.size() > 10) msg += " ...";
        throw Error(ErrorCode::UnknownItem, msg);
    }
    std::vector<std::string> names(F);
    for (std::size_t c = 0; c < F; ++c) names[c] = "f" + std::to_string(c);
    return FeatureMatrix(std::move(m), std::move(names));
}

std::vector<std::string> load_feature_names(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        const auto view = trim_cr(line);
        if (!view.empty()) names.emplace_back(view);
    }
    return names;
}

FeatureMatrix load_features(const std::filesystem::path& path, const std::optional<std::filesystem::path>& names_path,
                            const IdTable& items) {
    auto in = open_in(path);
    auto feats = parse_features(in, items);
    if (names_path) {
        auto names = load_feature_names(*names_path);
        if (names.size() != feats.dim()) {
            throw Error(ErrorCode::ShapeMismatch, "names file has " + std::to_string(names.size()) +
                                                      " entries, features have F=" + std::to_string(feats.dim()));
        }
        feats.names = std::move(names);
    }
    return feats;
}

void write_features(const FeatureMatrix& feats, const IdTable& items, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << std::setprecision(17);
    for (std::size_t i = 0; i < feats.item_count(); ++i) {
        out << items.name(static_cast<std::uint32_t>(i));
        for (std::size_t c = 0; c < feats.dim(); ++c) {
            out << '\t' << feats.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        }
        out << '\n';
    }
}

void write_feature_names(const std::vector<std::string>& names, const std::filesystem::path& path) {
    auto out = open_out(path);
    for (const auto& n : names) out << n << '\n';
}

}  // namespace fashrank
