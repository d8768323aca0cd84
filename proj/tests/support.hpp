#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fashrank/dataset.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/evaluator.hpp"
#include "fashrank/model.hpp"
#include "fashrank/rng.hpp"

namespace testing {

using namespace fashrank;

inline IdTable make_ids(const std::string& prefix, std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < n; ++k) ids.push_back(prefix + std::to_string(k));
    return IdTable(std::move(ids));
}

template <class Derived>
void fill_gauss(Eigen::DenseBase<Derived>& m, Rng& rng, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = g(rng);
}

// Every block filled with N(0, scale^2); temporal boundaries evenly spread over [0, 100].
inline ModelParams random_params(ModelMode mode, std::size_t U, std::size_t I, std::size_t K, std::size_t Kv,
                                 std::size_t F, std::size_t N, Rng& rng, double scale = 0.5) {
    auto p = ModelParams::zeros(mode, make_ids("u", U), make_ids("i", I), K, Kv, F, N);
    std::normal_distribution<double> g(0.0, scale);
    p.alpha = g(rng);
    fill_gauss(p.user_bias, rng, scale);
    fill_gauss(p.item_bias, rng, scale);
    fill_gauss(p.visual_bias, rng, scale);
    fill_gauss(p.user_latent, rng, scale);
    fill_gauss(p.item_latent, rng, scale);
    fill_gauss(p.user_visual, rng, scale);
    fill_gauss(p.embedding, rng, scale);
    if (p.temporal) {
        auto& t = *p.temporal;
        t.schedule.time_min = 0;
        t.schedule.time_max = 100;
        t.schedule.boundaries.clear();
        for (std::size_t k = 1; k < N; ++k) t.schedule.boundaries.push_back(static_cast<Timestamp>(100 * k / N));
        fill_gauss(t.weights, rng, scale);
        t.weights.array() += 1.0;
        for (auto& d : t.drifts) fill_gauss(d, rng, scale);
    }
    return p;
}

inline FeatureMatrix random_features(std::size_t I, std::size_t F, Rng& rng, bool non_negative = true) {
    RowMatrix v(static_cast<Eigen::Index>(I), static_cast<Eigen::Index>(F));
    std::uniform_real_distribution<double> u(non_negative ? 0.0 : -1.0, 1.0);
    for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = u(rng);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < F; ++k) names.push_back("f" + std::to_string(k));
    return FeatureMatrix(std::move(v), std::move(names));
}

// Each user gets `per_user` distinct items at increasing timestamps.
inline Dataset random_dataset(std::size_t U, std::size_t I, std::size_t per_user, Rng& rng) {
    std::vector<Interaction> log;
    for (UserIdx u = 0; u < U; ++u) {
        std::vector<ItemIdx> all(I);
        for (ItemIdx i = 0; i < I; ++i) all[i] = i;
        std::shuffle(all.begin(), all.end(), rng);
        for (std::size_t n = 0; n < per_user && n < I; ++n) {
            log.push_back({u, all[n], static_cast<Timestamp>(n * 10 + uniform_index(rng, 10))});
        }
    }
    return Dataset(make_ids("u", U), make_ids("i", I), std::move(log));
}

// Plain double loop over every evaluable user and every item the user never
// interacted with in the full log. Ties count as misses.
inline double brute_force_auc(const Scorer& s, const Splits& splits, const Dataset& full, bool cold_only = false,
                              std::size_t cold_threshold = 5) {
    std::vector<std::size_t> counts(full.item_count(), 0);
    for (const auto& x : splits.train_interactions) counts[x.item] += 1;
    double sum = 0.0;
    std::size_t users = 0;
    for (UserIdx u = 0; u < full.user_count(); ++u) {
        const auto& us = splits.users[u];
        if (!us.evaluable) continue;
        if (cold_only && counts[us.test] >= cold_threshold) continue;
        std::set<ItemIdx> mine;
        for (const auto& x : full.interactions())
            if (x.user == u) mine.insert(x.item);
        const double si = s.score(u, us.test, us.test_ts);
        std::size_t good = 0, total = 0;
        for (ItemIdx j = 0; j < full.item_count(); ++j) {
            if (mine.count(j)) continue;
            ++total;
            if (si > s.score(u, j, us.test_ts)) ++good;
        }
        if (total == 0) continue;
        sum += static_cast<double>(good) / static_cast<double>(total);
        ++users;
    }
    return users ? sum / static_cast<double>(users) : 0.0;
}

// Code of the fashrank::Error thrown by `f`, if any.
template <class Fn>
std::optional<ErrorCode> error_of(Fn&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace testing
