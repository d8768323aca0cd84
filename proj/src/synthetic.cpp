#include "fashrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fashrank/data_io.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/rng.hpp"

namespace fashrank {

namespace {

std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    k = std::min(k, n);
    for (std::size_t a = 0; a < k; ++a) std::swap(pool[a], pool[a + uniform_index(rng, n - a)]);
    pool.resize(k);
    return pool;
}

Eigen::VectorXd trend_vector(Rng& rng, std::size_t F, std::size_t count, double strength) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(F));
    for (auto k : sample_without_replacement(rng, F, count)) g[static_cast<Eigen::Index>(k)] = strength;
    return g;
}

std::vector<double> to_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return {v.data(), v.data() + v.size()};
}

}  // namespace

void SynthConfig::validate() const {
    if (n_users < 2 || n_items < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 users and 2 items");
    if (F == 0) throw Error(ErrorCode::InvalidArgument, "F must be positive");
    if (!(visual_signal_weight >= 0.0 && visual_signal_weight <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "visual_signal_weight must lie in [0, 1]");
    }
    if (noise_std < 0.0) throw Error(ErrorCode::InvalidArgument, "noise_std must be non-negative");
    if (interactions_per_user == 0 || interactions_per_user >= n_items) {
        throw Error(ErrorCode::InvalidArgument, "interactions_per_user must lie in [1, n_items)");
    }
    if (!(style_shift >= 0.0 && style_shift <= 1.0)) throw Error(ErrorCode::InvalidArgument, "style_shift must lie in [0, 1]");
    if (slate_size == 0) throw Error(ErrorCode::InvalidArgument, "slate_size must be positive");
    if (time_horizon <= 0) throw Error(ErrorCode::InvalidArgument, "time_horizon must be positive");
}

Eigen::VectorXd SynthGroundTruth::taste(UserIdx u, Timestamp ts) const {
    const bool after = shift_time && ts >= *shift_time;
    return after ? Eigen::VectorXd(personal_after.row(u).transpose() + trend_after)
                 : Eigen::VectorXd(personal.row(u).transpose() + trend_before);
}

nlohmann::json SynthGroundTruth::to_json() const {
    nlohmann::json personal_rows = nlohmann::json::array();
    for (Eigen::Index u = 0; u < personal.rows(); ++u) personal_rows.push_back(to_vector(personal.row(u).transpose()));
    nlohmann::json j;
    j["personal"] = std::move(personal_rows);
    if (shift_time) {
        nlohmann::json after_rows = nlohmann::json::array();
        for (Eigen::Index u = 0; u < personal_after.rows(); ++u) {
            after_rows.push_back(to_vector(personal_after.row(u).transpose()));
        }
        j["personal_after"] = std::move(after_rows);
    }
    j["trend_before"] = to_vector(trend_before);
    j["trend_after"] = to_vector(trend_after);
    j["popularity"] = to_vector(popularity);
    j["shift_time"] = shift_time ? nlohmann::json(*shift_time) : nlohmann::json(nullptr);
    return j;
}

SynthDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    auto rng = make_rng(cfg.rng_seed, Stream::Synthetic);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise_std > 0 ? cfg.noise_std : 1.0);

    const auto F = static_cast<Eigen::Index>(cfg.F);
    const auto n_items = static_cast<Eigen::Index>(cfg.n_items);
    const auto n_users = static_cast<Eigen::Index>(cfg.n_users);

    RowMatrix features = RowMatrix::Zero(n_items, F);
    for (Eigen::Index i = 0; i < n_items; ++i) {
        for (auto k : sample_without_replacement(rng, cfg.F, cfg.active_per_item)) {
            features(i, static_cast<Eigen::Index>(k)) = 0.5 + 0.5 * unit(rng);
        }
    }

    SynthGroundTruth truth;
    truth.shift_time = cfg.taste_shift_time;
    truth.popularity.resize(n_items);
    for (Eigen::Index i = 0; i < n_items; ++i) {
        const double x = unit(rng);
        truth.popularity[i] = x * x * x;
    }

    // Personal tastes are sparse mixtures of shared signed style prototypes,
    // so that no item is attractive to everyone.
    RowMatrix styles(static_cast<Eigen::Index>(cfg.style_count), F);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index n = 0; n < styles.size(); ++n) styles.data()[n] = gauss(rng);
    std::gamma_distribution<double> mix_draw(0.5, 1.0);
    RowMatrix mixes(n_users, styles.rows());
    for (Eigen::Index u = 0; u < n_users; ++u) {
        for (Eigen::Index s = 0; s < mixes.cols(); ++s) mixes(u, s) = mix_draw(rng);
        mixes.row(u) /= mixes.row(u).sum();
    }
    truth.personal = cfg.taste_scale * (mixes * styles);
    truth.trend_before = trend_vector(rng, cfg.F, cfg.trending_features, cfg.trend_strength);
    if (cfg.taste_shift_time) {
        // The previously trending attributes fall out of favour.
        truth.trend_after = trend_vector(rng, cfg.F, cfg.trending_features, cfg.trend_strength) - truth.trend_before;
        // Users keep their style mixture while what each style looks like
        // moves: a style_shift of 1 redraws the prototypes outright.
        RowMatrix fresh(styles.rows(), F);
        for (Eigen::Index n = 0; n < fresh.size(); ++n) fresh.data()[n] = gauss(rng);
        const double keep = std::sqrt(1.0 - cfg.style_shift * cfg.style_shift);
        truth.personal_after = cfg.taste_scale * (mixes * (keep * styles + cfg.style_shift * fresh));
    } else {
        truth.trend_after = truth.trend_before;
        truth.personal_after = truth.personal;
    }

    const double w = cfg.visual_signal_weight;
    IdTable users, items;
    for (Eigen::Index i = 0; i < n_items; ++i) items.intern("i" + std::to_string(i));
    std::vector<Interaction> interactions;
    interactions.reserve(cfg.n_users * cfg.interactions_per_user);
    std::uniform_int_distribution<Timestamp> when(0, cfg.time_horizon);
    std::vector<char> seen(cfg.n_items);
    for (Eigen::Index u = 0; u < n_users; ++u) {
        const auto uid = users.intern("u" + std::to_string(u));
        std::vector<Timestamp> times(cfg.interactions_per_user);
        for (auto& t : times) t = when(rng);
        std::sort(times.begin(), times.end());
        std::fill(seen.begin(), seen.end(), 0);
        for (const auto ts : times) {
            const Eigen::VectorXd taste = truth.taste(uid, ts);
            std::size_t best = cfg.n_items;
            double best_score = -std::numeric_limits<double>::infinity();
            for (std::size_t draw = 0; draw < cfg.slate_size; ++draw) {
                const auto cand = uniform_index(rng, cfg.n_items);
                const double eps = cfg.noise_std > 0 ? noise(rng) : 0.0;
                if (seen[cand]) continue;
                const auto ci = static_cast<Eigen::Index>(cand);
                const double visual = features.row(ci).dot(taste.transpose());
                const double score = w * visual + (1.0 - w) * (truth.popularity[ci] + eps);
                if (score > best_score) {
                    best_score = score;
                    best = cand;
                }
            }
            if (best == cfg.n_items) continue;  // slate hit only seen items
            seen[best] = 1;
            interactions.push_back({uid, static_cast<ItemIdx>(best), ts});
        }
    }

    std::vector<std::string> names(cfg.F);
    for (std::size_t k = 0; k < cfg.F; ++k) names[k] = "attr_" + std::to_string(k);
    return {Dataset(std::move(users), std::move(items), std::move(interactions)),
            FeatureMatrix(std::move(features), std::move(names)), std::move(truth)};
}

void write_synthetic(const SynthDataset& synth, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_interactions(synth.data, dir / "interactions.tsv");
    write_features(synth.features, synth.data.items(), dir / "features.tsv");
    write_feature_names(synth.features.names, dir / "feature_names.txt");
    std::ofstream gt(dir / "ground_truth.json");
    if (!gt) throw Error(ErrorCode::Io, "cannot write ground truth in " + dir.string());
    gt << synth.truth.to_json().dump() << '\n';
}

}  // namespace fashrank
