#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "fashrank/evaluator.hpp"
#include "fashrank/interactive.hpp"
#include "fashrank/model.hpp"

namespace httplib {
class Server;
}

namespace fashrank {

struct ItemMeta {
    std::string title;
    std::optional<std::string> image_url;
};

/// `item_id<TAB>title[<TAB>image_url]` rows.
std::unordered_map<std::string, ItemMeta> load_item_meta(const std::filesystem::path& path);

struct ServiceOptions {
    int port = 8080;
    std::chrono::seconds session_ttl{3600};
    std::string cors_origin = "*";
    std::optional<std::filesystem::path> static_dir;
    std::optional<std::filesystem::path> snapshot_path;
    SessionConfig session;
    std::size_t default_page = 12;
    std::size_t max_page = 100;
    std::size_t affinity_summary = 10;
    std::size_t exemplars = 4;
};

struct Response {
    int status = 200;
    nlohmann::json body;
};

/// HTTP-independent request handlers over an immutable model. Sessions are
/// held in memory; each one is guarded by its own mutex so requests for
/// different sessions never wait on each other.
class RecommenderService {
public:
    using Clock = std::chrono::steady_clock;

    RecommenderService(ModelParams params, FeatureMatrix feats, std::unordered_map<std::string, ItemMeta> meta,
                       std::vector<std::vector<ItemIdx>> seen_by_user, ServiceOptions options);

    Response create_session(const nlohmann::json& body);
    Response recommendations(const std::string& session_id, std::optional<std::size_t> n);
    Response apply_action(const std::string& session_id, const nlohmann::json& body);
    Response reset(const std::string& session_id);
    Response features() const;
    Response feature_trend(std::size_t k) const;
    Response top_trends(std::size_t m) const;
    Response item(const std::string& item_id) const;

    /// Drops sessions idle for longer than the TTL as of `now`.
    std::size_t evict_expired(Clock::time_point now);
    std::size_t session_count() const;

    void save_snapshot(const std::filesystem::path& path) const;
    void load_snapshot(const std::filesystem::path& path);

    /// Registers the /api routes (and the static mount, when configured).
    void mount(httplib::Server& server);

    const ModelParams& params() const noexcept { return params_; }
    const FeatureMatrix& feats() const noexcept { return feats_; }
    const ServiceOptions& options() const noexcept { return options_; }

private:
    struct Entry {
        std::mutex mutex;
        AffinitySession session;
        Clock::time_point last_access;
        explicit Entry(AffinitySession s) : session(std::move(s)), last_access(Clock::now()) {}
    };

    std::shared_ptr<Entry> find_session(const std::string& id);
    std::string new_session_id();
    nlohmann::json session_payload(const std::string& id, const AffinitySession& s, std::size_t n) const;
    nlohmann::json affinity_summary(const Eigen::VectorXd& affinity) const;
    nlohmann::json item_card(ItemIdx i, double distance) const;
    nlohmann::json trend_payload(std::size_t k) const;
    std::size_t page_size(std::optional<std::size_t> n) const;

    const ModelParams params_;
    const FeatureMatrix feats_;
    const std::unordered_map<std::string, ItemMeta> meta_;
    const std::vector<std::vector<ItemIdx>> seen_by_user_;
    const ServiceOptions options_;
    const NeighborIndex index_;

    mutable std::mutex sessions_mutex_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace fashrank
