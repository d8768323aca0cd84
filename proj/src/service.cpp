#include "fashrank/service.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <httplib.h>

#include "fashrank/errors.hpp"
#include "fashrank/trends.hpp"

namespace fashrank {

namespace {

Response error_response(int status, std::string_view code, const std::string& message) {
    return {status, {{"error", code}, {"message", message}}};
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownUser:
        case ErrorCode::UnknownItem: return 404;
        case ErrorCode::DegenerateAffinity: return 422;
        case ErrorCode::TemporalRequired: return 409;
        default: return 400;
    }
}

Response from_error(const Error& e) {
    if (e.code() == ErrorCode::IndexOutOfRange) return error_response(400, "feature_out_of_range", e.what());
    return error_response(status_for(e.code()), error_code_name(e.code()), e.what());
}

template <typename Fn>
Response guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        return from_error(e);
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

Response session_not_found(const std::string& id) {
    return error_response(404, "session_not_found", "no live session '" + id + "'");
}

}  // namespace

std::unordered_map<std::string, ItemMeta> load_item_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::unordered_map<std::string, ItemMeta> meta;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
        if (fields.size() < 2 || fields.size() > 3) {
            throw Error(ErrorCode::Parse, "item meta line " + std::to_string(line_no) + ": expected 2 or 3 fields");
        }
        ItemMeta m{fields[1], std::nullopt};
        if (fields.size() == 3 && !fields[2].empty()) m.image_url = fields[2];
        meta.insert_or_assign(fields[0], std::move(m));
    }
    return meta;
}

RecommenderService::RecommenderService(ModelParams params, FeatureMatrix feats,
                                       std::unordered_map<std::string, ItemMeta> meta,
                                       std::vector<std::vector<ItemIdx>> seen_by_user, ServiceOptions options)
    : params_(std::move(params)),
      feats_(std::move(feats)),
      meta_(std::move(meta)),
      seen_by_user_(std::move(seen_by_user)),
      options_(std::move(options)),
      index_(feats_) {
    params_.validate();
    if (params_.F == 0) throw Error(ErrorCode::InvalidArgument, "serving needs a visual model");
    check_features(params_, feats_);
    options_.session.validate();
}

std::string RecommenderService::new_session_id() {
    thread_local std::random_device rd;
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (int n = 0; n < 4; ++n) out << std::setw(8) << rd();
    return out.str();
}

std::size_t RecommenderService::page_size(std::optional<std::size_t> n) const {
    return std::clamp<std::size_t>(n.value_or(options_.default_page), 1, options_.max_page);
}

nlohmann::json RecommenderService::affinity_summary(const Eigen::VectorXd& affinity) const {
    std::vector<std::size_t> order(static_cast<std::size_t>(affinity.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return affinity[static_cast<Eigen::Index>(a)] > affinity[static_cast<Eigen::Index>(b)];
    });
    order.resize(std::min(order.size(), options_.affinity_summary));
    nlohmann::json out = nlohmann::json::array();
    for (auto k : order) {
        out.push_back({{"feature_index", k},
                       {"feature_name", feats_.names[k]},
                       {"weight", affinity[static_cast<Eigen::Index>(k)]}});
    }
    return out;
}

nlohmann::json RecommenderService::item_card(ItemIdx i, double distance) const {
    const auto& id = params_.items.name(i);
    nlohmann::json card{{"item_id", id}, {"distance", distance}};
    const auto it = meta_.find(id);
    card["title"] = it != meta_.end() ? it->second.title : id;
    card["image_url"] = it != meta_.end() && it->second.image_url ? nlohmann::json(*it->second.image_url)
                                                                    : nlohmann::json(nullptr);
    const auto f = feats_.row(i);
    std::vector<std::size_t> order(feats_.dim());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return f[static_cast<Eigen::Index>(a)] > f[static_cast<Eigen::Index>(b)];
    });
    nlohmann::json tags = nlohmann::json::array();
    for (std::size_t n = 0; n < order.size() && n < 5; ++n) {
        const double v = f[static_cast<Eigen::Index>(order[n])];
        if (v <= 0.0) break;
        tags.push_back({{"feature_index", order[n]}, {"feature_name", feats_.names[order[n]]}, {"value", v}});
    }
    card["features"] = std::move(tags);
    return card;
}

nlohmann::json RecommenderService::session_payload(const std::string& id, const AffinitySession& s,
                                                   std::size_t n) const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : recommend(s, index_, n)) recs.push_back(item_card(r.item, r.distance));
    return {{"session_id", id},
            {"user_id", params_.users.name(s.user())},
            {"step", s.step()},
            {"affinity_top", affinity_summary(s.affinity())},
            {"recommendations", std::move(recs)}};
}

std::shared_ptr<RecommenderService::Entry> RecommenderService::find_session(const std::string& id) {
    evict_expired(Clock::now());
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

Response RecommenderService::create_session(const nlohmann::json& body) {
    return guarded([&]() -> Response {
        const auto user_id = body.at("user_id").get<std::string>();
        const auto u = params_.users.find(user_id);
        if (!u) return error_response(404, "user_not_found", "unknown user '" + user_id + "'");
        std::optional<std::size_t> n;
        if (body.contains("n")) n = body.at("n").get<std::size_t>();
        auto seen = *u < seen_by_user_.size() ? seen_by_user_[*u] : std::vector<ItemIdx>{};
        auto entry = std::make_shared<Entry>(AffinitySession::init(*u, params_, options_.session, std::move(seen)));
        const auto id = new_session_id();
        std::lock_guard entry_lock(entry->mutex);
        {
            std::lock_guard lock(sessions_mutex_);
            sessions_.emplace(id, entry);
        }
        return {201, session_payload(id, entry->session, page_size(n))};
    });
}

Response RecommenderService::recommendations(const std::string& session_id, std::optional<std::size_t> n) {
    return guarded([&]() -> Response {
        auto entry = find_session(session_id);
        if (!entry) return session_not_found(session_id);
        std::lock_guard lock(entry->mutex);
        entry->last_access = Clock::now();
        return {200, session_payload(session_id, entry->session, page_size(n))};
    });
}

Response RecommenderService::apply_action(const std::string& session_id, const nlohmann::json& body) {
    return guarded([&]() -> Response {
        auto entry = find_session(session_id);
        if (!entry) return session_not_found(session_id);
        std::lock_guard lock(entry->mutex);
        entry->last_access = Clock::now();
        auto& s = entry->session;
        const Eigen::VectorXd before = s.affinity();
        const auto type = body.at("type").get<std::string>();
        if (type == "steer_item") {
            const auto item_id = body.at("item_id").get<std::string>();
            const auto i = params_.items.find(item_id);
            if (!i) return error_response(404, "item_not_found", "unknown item '" + item_id + "'");
            s.steer_item(*i, feats_);
        } else if (type == "boost_feature") {
            std::size_t k = 0;
            if (body.contains("feature_name")) {
                const auto name = body.at("feature_name").get<std::string>();
                const auto it = std::find(feats_.names.begin(), feats_.names.end(), name);
                if (it == feats_.names.end()) {
                    return error_response(400, "feature_out_of_range", "unknown feature '" + name + "'");
                }
                k = static_cast<std::size_t>(it - feats_.names.begin());
            } else {
                const auto raw = body.at("feature_index").get<std::int64_t>();
                if (raw < 0) return error_response(400, "feature_out_of_range", "negative feature index");
                k = static_cast<std::size_t>(raw);
            }
            s.boost_feature(k);
        } else if (type == "reset") {
            s.reset();
        } else {
            return error_response(400, "bad_request", "unknown action type '" + type + "'");
        }
        std::optional<std::size_t> n;
        if (body.contains("n")) n = body.at("n").get<std::size_t>();
        auto payload = session_payload(session_id, s, page_size(n));
        // Change of every feature that is in the top list before or after.
        std::vector<std::size_t> keys;
        for (const auto& e : affinity_summary(before)) keys.push_back(e.at("feature_index").get<std::size_t>());
        for (const auto& e : payload.at("affinity_top")) keys.push_back(e.at("feature_index").get<std::size_t>());
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        nlohmann::json delta = nlohmann::json::array();
        for (auto k : keys) {
            const auto kk = static_cast<Eigen::Index>(k);
            delta.push_back({{"feature_index", k},
                             {"feature_name", feats_.names[k]},
                             {"before", before[kk]},
                             {"after", s.affinity()[kk]},
                             {"delta", s.affinity()[kk] - before[kk]}});
        }
        payload["affinity_delta"] = std::move(delta);
        return {200, std::move(payload)};
    });
}

Response RecommenderService::reset(const std::string& session_id) {
    return apply_action(session_id, {{"type", "reset"}});
}

Response RecommenderService::features() const {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t k = 0; k < feats_.dim(); ++k) out.push_back({{"feature_index", k}, {"feature_name", feats_.names[k]}});
    return {200, {{"features", std::move(out)}, {"temporal", params_.is_temporal()}}};
}

nlohmann::json RecommenderService::trend_payload(std::size_t k) const {
    auto j = influence_series(k, params_, feats_.names).to_json();
    nlohmann::json ex = nlohmann::json::array();
    for (const auto& e : top_items_for_feature(k, feats_, options_.exemplars)) {
        auto card = item_card(e.item, 0.0);
        card.erase("distance");
        card["value"] = e.value;
        ex.push_back(std::move(card));
    }
    j["exemplars"] = std::move(ex);
    return j;
}

Response RecommenderService::feature_trend(std::size_t k) const {
    return guarded([&]() -> Response {
        if (!params_.is_temporal()) return error_response(409, "temporal_required", "model is not temporal");
        return {200, trend_payload(k)};
    });
}

Response RecommenderService::top_trends(std::size_t m) const {
    return guarded([&]() -> Response {
        if (!params_.is_temporal()) return error_response(409, "temporal_required", "model is not temporal");
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : top_trending(m, params_, feats_.names)) out.push_back(trend_payload(s.feature_index));
        return {200, {{"series", std::move(out)}}};
    });
}

Response RecommenderService::item(const std::string& item_id) const {
    const auto i = params_.items.find(item_id);
    if (!i) return error_response(404, "item_not_found", "unknown item '" + item_id + "'");
    auto card = item_card(*i, 0.0);
    card.erase("distance");
    return {200, std::move(card)};
}

std::size_t RecommenderService::evict_expired(Clock::time_point now) {
    std::lock_guard lock(sessions_mutex_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        std::unique_lock entry_lock(it->second->mutex, std::try_to_lock);
        // A session that is busy is in use and therefore not idle.
        if (entry_lock.owns_lock() && now - it->second->last_access > options_.session_ttl) {
            entry_lock.unlock();
            it = sessions_.erase(it);
            ++dropped;
        } else {
            ++it;
        }
    }
    return dropped;
}

std::size_t RecommenderService::session_count() const {
    std::lock_guard lock(sessions_mutex_);
    return sessions_.size();
}

void RecommenderService::save_snapshot(const std::filesystem::path& path) const {
    nlohmann::json out = nlohmann::json::object();
    {
        std::lock_guard lock(sessions_mutex_);
        for (const auto& [id, entry] : sessions_) {
            std::lock_guard entry_lock(entry->mutex);
            out[id] = entry->session.to_json();
        }
    }
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot write session snapshot " + path.string());
    f << out.dump() << '\n';
}

void RecommenderService::load_snapshot(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) return;
    nlohmann::json in;
    try {
        in = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "bad session snapshot: " + std::string(e.what()));
    }
    std::lock_guard lock(sessions_mutex_);
    for (const auto& [id, j] : in.items()) {
        auto s = AffinitySession::from_json(j);
        if (s.user() >= params_.user_count() || static_cast<std::size_t>(s.affinity().size()) != feats_.dim()) {
            throw Error(ErrorCode::ShapeMismatch, "snapshot session '" + id + "' does not fit the loaded model");
        }
        sessions_.insert_or_assign(id, std::make_shared<Entry>(std::move(s)));
    }
}

namespace {

void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
}

std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
        return req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        send(res, error_response(400, "bad_request", std::string("invalid JSON: ") + e.what()));
        return std::nullopt;
    }
}

std::optional<std::size_t> query_size(const httplib::Request& req, const char* key) {
    if (!req.has_param(key)) return std::nullopt;
    try {
        const long long v = std::stoll(req.get_param_value(key));
        return v < 0 ? std::optional<std::size_t>(0) : std::optional<std::size_t>(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

void RecommenderService::mount(httplib::Server& server) {
    const auto origin = options_.cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, create_session(*body));
    });
    server.Get(R"(/api/sessions/([0-9a-f]+)/recommendations)",
               [this](const httplib::Request& req, httplib::Response& res) {
                   send(res, recommendations(req.matches[1], query_size(req, "n")));
               });
    server.Post(R"(/api/sessions/([0-9a-f]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto body = parse_body(req, res)) send(res, apply_action(req.matches[1], *body));
    });
    server.Post(R"(/api/sessions/([0-9a-f]+)/reset)", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, reset(req.matches[1]));
    });
    server.Get("/api/features", [this](const httplib::Request&, httplib::Response& res) { send(res, features()); });
    server.Get(R"(/api/features/(\d+)/trend)", [this](const httplib::Request& req, httplib::Response& res) {
        std::size_t k = 0;
        try {
            k = static_cast<std::size_t>(std::stoull(req.matches[1]));
        } catch (const std::exception&) {
            return send(res, error_response(400, "feature_out_of_range", "feature index too large"));
        }
        send(res, feature_trend(k));
    });
    server.Get("/api/trends/top", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, top_trends(query_size(req, "m").value_or(10)));
    });
    server.Get(R"(/api/items/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, item(req.matches[1]));
    });
    if (options_.static_dir) server.set_mount_point("/", options_.static_dir->string());
}

}  // namespace fashrank
