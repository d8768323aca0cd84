#include "fashrank/interactive.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "fashrank/errors.hpp"
#include "fashrank/rng.hpp"

namespace fashrank {

namespace {

constexpr double kMinAffinitySum = 1e-12;

double norm_of(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return std::sqrt(v.dot(v));
}

Recommendation score_item(const Eigen::Ref<const Eigen::VectorXd>& p, double p_norm,
                          const Eigen::Ref<const Eigen::VectorXd>& f, double f_norm, ItemIdx i,
                          DistanceMetric metric) {
    Recommendation r{i, 0.0, f_norm == 0.0};
    if (metric == DistanceMetric::Euclidean) {
        r.distance = norm_of(p - f);
    } else if (r.zero_features || p_norm == 0.0) {
        r.distance = 1.0;
    } else {
        r.distance = 1.0 - p.dot(f) / (p_norm * f_norm);
    }
    return r;
}

bool ranks_before(const Recommendation& a, const Recommendation& b) {
    if (a.zero_features != b.zero_features) return !a.zero_features;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.item < b.item;
}

void check_affinity(const Eigen::Ref<const Eigen::VectorXd>& p, const FeatureMatrix& feats) {
    if (static_cast<std::size_t>(p.size()) != feats.dim()) {
        throw Error(ErrorCode::ShapeMismatch, "affinity length does not match feature dimension");
    }
}

bool excluded(std::span<const ItemIdx> sorted, ItemIdx i) {
    return std::binary_search(sorted.begin(), sorted.end(), i);
}

std::vector<ItemIdx> merge_sorted(std::span<const ItemIdx> a, std::span<const ItemIdx> b) {
    std::vector<ItemIdx> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

void SessionConfig::validate() const {
    if (!(phi > 0.0) || !(phi_prime > 0.0)) throw Error(ErrorCode::InvalidArgument, "phi and phi' must be positive");
    if (sample_size == 0) throw Error(ErrorCode::InvalidArgument, "sample_size must be positive");
}

Eigen::VectorXd normalize(const Eigen::Ref<const Eigen::VectorXd>& p) {
    const double sum = p.sum();
    if (!(std::abs(sum) >= kMinAffinitySum)) {
        throw Error(ErrorCode::DegenerateAffinity, "affinity vector sums to ~0; cannot normalize");
    }
    return p / sum;
}

Eigen::VectorXd affinity_response(UserIdx u, const ModelParams& params, std::span<const ItemIdx> sample) {
    if (u >= params.user_count()) throw Error(ErrorCode::UnknownUser, "unknown user index " + std::to_string(u));
    if (params.F == 0) throw Error(ErrorCode::InvalidArgument, "model has no visual features");
    const auto F = static_cast<Eigen::Index>(params.F);

    // Item-dependent part of each response, then the per-feature visual part.
    std::vector<double> item_term;
    item_term.reserve(sample.size());
    for (auto i : sample) {
        if (i >= params.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
        item_term.push_back(params.alpha + params.user_bias[u] + params.item_bias[i] +
                            params.user_latent.row(u).dot(params.item_latent.row(i)));
    }
    const std::optional<std::size_t> epoch =
        params.temporal ? std::optional(params.temporal->schedule.epoch_count() - 1) : std::nullopt;

    Eigen::VectorXd p(F);
    for (Eigen::Index k = 0; k < F; ++k) {
        const Eigen::VectorXd h = one_hot(static_cast<std::size_t>(k), params.F);
        const Eigen::VectorXd theta_h = epoch ? visual_factor_of(h, *epoch, params) : Eigen::VectorXd(params.embedding * h);
        const double feature_term = params.user_visual.row(u).dot(theta_h.transpose()) + params.visual_bias.dot(h);
        double sum = 0.0;
        for (double c : item_term) sum += c + feature_term;
        p[k] = sum;
    }
    return p;
}

AffinitySession AffinitySession::init(UserIdx u, const ModelParams& params, const SessionConfig& config,
                                      std::vector<ItemIdx> seen) {
    config.validate();
    if (u >= params.user_count()) throw Error(ErrorCode::UnknownUser, "unknown user index " + std::to_string(u));
    auto rng = make_rng(config.rng_seed, Stream::Affinity);
    std::vector<ItemIdx> pool(params.item_count());
    std::iota(pool.begin(), pool.end(), ItemIdx{0});
    const std::size_t m = std::min(config.sample_size, pool.size());
    for (std::size_t a = 0; a < m; ++a) std::swap(pool[a], pool[a + uniform_index(rng, pool.size() - a)]);
    pool.resize(m);

    AffinitySession s;
    s.user_ = u;
    s.config_ = config;
    s.response_ = affinity_response(u, params, pool);
    s.initial_ = normalize(s.response_);
    s.affinity_ = s.initial_;
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    s.seen_ = std::move(seen);
    return s;
}

void AffinitySession::steer_item(ItemIdx i, const FeatureMatrix& feats) {
    check_affinity(affinity_, feats);
    if (i >= feats.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
    affinity_ = normalize(affinity_ + config_.phi * feats.row(i));
    history_.push_back({ActionKind::SteerItem, i});
}

void AffinitySession::boost_feature(std::size_t k) {
    if (k >= static_cast<std::size_t>(affinity_.size())) {
        throw Error(ErrorCode::IndexOutOfRange, "feature index " + std::to_string(k) + " out of range");
    }
    affinity_ = normalize(affinity_ + config_.phi_prime * one_hot(k, static_cast<std::size_t>(affinity_.size())));
    history_.push_back({ActionKind::BoostFeature, static_cast<std::uint32_t>(k)});
}

void AffinitySession::apply(const Action& action, const FeatureMatrix& feats) {
    if (action.kind == ActionKind::SteerItem) {
        steer_item(action.index, feats);
    } else {
        boost_feature(action.index);
    }
}

void AffinitySession::reset() {
    affinity_ = initial_;
    history_.clear();
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json AffinitySession::to_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& a : history_) {
        if (a.kind == ActionKind::SteerItem) {
            hist.push_back({{"type", "steer_item"}, {"item_index", a.index}});
        } else {
            hist.push_back({{"type", "boost_feature"}, {"feature_index", a.index}});
        }
    }
    return {{"user_index", user_},
            {"step", step()},
            {"config",
             {{"phi", config_.phi},
              {"phi_prime", config_.phi_prime},
              {"sample_size", config_.sample_size},
              {"rng_seed", config_.rng_seed},
              {"metric", config_.metric == DistanceMetric::Cosine ? "cosine" : "euclidean"}}},
            {"response", to_vector(response_)},
            {"initial_affinity", to_vector(initial_)},
            {"affinity", to_vector(affinity_)},
            {"seen", seen_},
            {"history", std::move(hist)}};
}

AffinitySession AffinitySession::from_json(const nlohmann::json& j) {
    try {
        AffinitySession s;
        s.user_ = j.at("user_index").get<UserIdx>();
        const auto& c = j.at("config");
        s.config_.phi = c.at("phi").get<double>();
        s.config_.phi_prime = c.at("phi_prime").get<double>();
        s.config_.sample_size = c.at("sample_size").get<std::size_t>();
        s.config_.rng_seed = c.at("rng_seed").get<std::uint64_t>();
        s.config_.metric = c.at("metric").get<std::string>() == "euclidean" ? DistanceMetric::Euclidean
                                                                             : DistanceMetric::Cosine;
        s.config_.validate();
        s.response_ = from_vector(j.at("response").get<std::vector<double>>());
        s.initial_ = from_vector(j.at("initial_affinity").get<std::vector<double>>());
        s.affinity_ = from_vector(j.at("affinity").get<std::vector<double>>());
        s.seen_ = j.at("seen").get<std::vector<ItemIdx>>();
        for (const auto& a : j.at("history")) {
            const auto type = a.at("type").get<std::string>();
            if (type == "steer_item") {
                s.history_.push_back({ActionKind::SteerItem, a.at("item_index").get<std::uint32_t>()});
            } else if (type == "boost_feature") {
                s.history_.push_back({ActionKind::BoostFeature, a.at("feature_index").get<std::uint32_t>()});
            } else {
                throw Error(ErrorCode::Parse, "unknown action type '" + type + "'");
            }
        }
        if (j.at("step").get<std::size_t>() != s.history_.size()) {
            throw Error(ErrorCode::Parse, "session step does not match history length");
        }
        if (s.initial_.size() != s.affinity_.size() || s.response_.size() != s.affinity_.size()) {
            throw Error(ErrorCode::Parse, "session vectors have inconsistent lengths");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("bad session json: ") + e.what());
    }
}

AffinitySession replay(UserIdx u, const ModelParams& params, const FeatureMatrix& feats, const SessionConfig& config,
                       std::span<const Action> history, std::vector<ItemIdx> seen) {
    auto s = AffinitySession::init(u, params, config, std::move(seen));
    for (const auto& a : history) s.apply(a, feats);
    return s;
}

std::vector<Recommendation> recommend_exhaustive(const Eigen::Ref<const Eigen::VectorXd>& affinity,
                                                 const FeatureMatrix& feats, std::size_t n,
                                                 std::span<const ItemIdx> exclude, DistanceMetric metric) {
    check_affinity(affinity, feats);
    const double p_norm = norm_of(affinity);
    std::vector<Recommendation> all;
    for (ItemIdx i = 0; i < feats.item_count(); ++i) {
        if (excluded(exclude, i)) continue;
        const auto f = feats.row(i);
        all.push_back(score_item(affinity, p_norm, f, norm_of(f), i, metric));
    }
    std::sort(all.begin(), all.end(), ranks_before);
    if (all.size() > n) all.resize(n);
    return all;
}

NeighborIndex::NeighborIndex(const FeatureMatrix& feats) : feats_(feats), norms_(feats.item_count()) {
    for (ItemIdx i = 0; i < feats.item_count(); ++i) norms_[i] = norm_of(feats.row(i));
}

std::vector<Recommendation> NeighborIndex::query(const Eigen::Ref<const Eigen::VectorXd>& affinity, std::size_t n,
                                                 std::span<const ItemIdx> exclude, DistanceMetric metric) const {
    check_affinity(affinity, feats_);
    if (n == 0) return {};
    const double p_norm = norm_of(affinity);
    // Max-heap on rank: top() is the worst of the current best n.
    std::priority_queue<Recommendation, std::vector<Recommendation>, decltype(&ranks_before)> heap(ranks_before);
    auto ex = exclude.begin();
    for (ItemIdx i = 0; i < feats_.item_count(); ++i) {
        while (ex != exclude.end() && *ex < i) ++ex;
        if (ex != exclude.end() && *ex == i) continue;
        const auto r = score_item(affinity, p_norm, feats_.row(i), norms_[i], i, metric);
        if (heap.size() < n) {
            heap.push(r);
        } else if (ranks_before(r, heap.top())) {
            heap.pop();
            heap.push(r);
        }
    }
    std::vector<Recommendation> out(heap.size());
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        *it = heap.top();
        heap.pop();
    }
    return out;
}

std::vector<Recommendation> recommend(const AffinitySession& session, const FeatureMatrix& feats, std::size_t n,
                                      std::span<const ItemIdx> exclude) {
    const auto ex = merge_sorted(session.seen(), exclude);
    return recommend_exhaustive(session.affinity(), feats, n, ex, session.config().metric);
}

std::vector<Recommendation> recommend(const AffinitySession& session, const NeighborIndex& index, std::size_t n,
                                      std::span<const ItemIdx> exclude) {
    const auto ex = merge_sorted(session.seen(), exclude);
    return index.query(session.affinity(), n, ex, session.config().metric);
}

}  // namespace fashrank
