#include "fashrank/evaluator.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <exception>
#include <thread>

#include "fashrank/errors.hpp"

namespace fashrank {

bool Splits::is_observed(UserIdx u, ItemIdx j) const {
    const auto& s = users.at(u);
    if (s.evaluable && (j == s.test || j == s.validation)) return true;
    return std::binary_search(s.train.begin(), s.train.end(), j);
}

std::size_t Splits::evaluable_user_count() const {
    return static_cast<std::size_t>(std::count_if(users.begin(), users.end(), [](const auto& s) { return s.evaluable; }));
}

Splits split(const Dataset& data, Rng& rng) {
    std::vector<std::vector<std::size_t>> by_user(data.user_count());
    const auto& log = data.interactions();
    for (std::size_t n = 0; n < log.size(); ++n) by_user[log[n].user].push_back(n);

    Splits s;
    s.users.resize(data.user_count());
    s.train_item_counts.assign(data.item_count(), 0);
    std::vector<char> keep(log.size(), 1);
    for (UserIdx u = 0; u < data.user_count(); ++u) {
        const auto& rows = by_user[u];
        auto& us = s.users[u];
        if (data.positives(u).size() >= 3) {
            const auto& test = log[rows[uniform_index(rng, rows.size())]];
            std::vector<std::size_t> others;
            for (auto n : rows) {
                if (log[n].item != test.item) others.push_back(n);
            }
            const auto& val = log[others[uniform_index(rng, others.size())]];
            us.evaluable = true;
            us.test = test.item;
            us.test_ts = test.timestamp;
            us.validation = val.item;
            us.validation_ts = val.timestamp;
            for (auto n : rows) {
                if (log[n].item == us.test || log[n].item == us.validation) keep[n] = 0;
            }
        }
        for (auto n : rows) {
            if (keep[n]) us.train.push_back(log[n].item);
        }
        std::sort(us.train.begin(), us.train.end());
        us.train.erase(std::unique(us.train.begin(), us.train.end()), us.train.end());
    }
    for (std::size_t n = 0; n < log.size(); ++n) {
        if (!keep[n]) continue;
        s.train_interactions.push_back(log[n]);
        ++s.train_item_counts[log[n].item];
    }
    return s;
}

std::string_view setting_name(Setting s) noexcept {
    return s == Setting::AllItems ? "all" : "cold";
}

Setting parse_setting(std::string_view name) {
    if (name == "all" || name == "all_items") return Setting::AllItems;
    if (name == "cold" || name == "cold_start") return Setting::ColdStart;
    throw Error(ErrorCode::InvalidArgument, "unknown setting '" + std::string(name) + "'");
}

std::vector<ItemIdx> evaluation_negatives(UserIdx u, const Splits& splits, std::size_t n_items,
                                          std::size_t sample_size, Rng& rng) {
    std::vector<ItemIdx> negs;
    negs.reserve(n_items);
    for (ItemIdx j = 0; j < n_items; ++j) {
        if (!splits.is_observed(u, j)) negs.push_back(j);
    }
    if (sample_size == 0 || sample_size >= negs.size()) return negs;
    for (std::size_t a = 0; a < sample_size; ++a) std::swap(negs[a], negs[a + uniform_index(rng, negs.size() - a)]);
    negs.resize(sample_size);
    return negs;
}

std::vector<std::pair<ItemIdx, ItemIdx>> evaluation_pairs(UserIdx u, const Splits& splits, std::size_t n_items,
                                                          std::size_t sample_size, Rng& rng, Target target) {
    const auto& us = splits.users.at(u);
    if (!us.evaluable) return {};
    const ItemIdx i = target == Target::Test ? us.test : us.validation;
    std::vector<std::pair<ItemIdx, ItemIdx>> pairs;
    for (auto j : evaluation_negatives(u, splits, n_items, sample_size, rng)) pairs.emplace_back(i, j);
    return pairs;
}

void Scorer::score_many(UserIdx u, Timestamp ts, std::span<const ItemIdx> items, std::span<double> out) const {
    for (std::size_t n = 0; n < items.size(); ++n) out[n] = score(u, items[n], ts);
}

ModelScorer::ModelScorer(const ModelParams& params, const FeatureMatrix& feats) : params_(params), feats_(feats) {
    check_features(params_, feats_);
}

double ModelScorer::score(UserIdx u, ItemIdx i, Timestamp ts) const {
    return predict(u, i, ts, params_, feats_);
}

void ModelScorer::score_many(UserIdx u, Timestamp ts, std::span<const ItemIdx> items, std::span<double> out) const {
    if (u >= params_.user_count()) throw Error(ErrorCode::UnknownUser, "unknown user index " + std::to_string(u));
    const auto& p = params_;
    const double base = p.alpha + p.user_bias[u];
    const auto gamma_u = p.user_latent.row(u);
    Eigen::VectorXd rho;
    if (p.F > 0) {
        const Eigen::VectorXd theta_u = p.user_visual.row(u).transpose();
        if (p.temporal) {
            const auto t = epoch_of(ts, p.temporal->schedule);
            const Eigen::VectorXd weighted =
                theta_u.cwiseProduct(p.temporal->weights.row(static_cast<Eigen::Index>(t)).transpose());
            rho = p.embedding.transpose() * weighted + p.temporal->drifts[t].transpose() * theta_u + p.visual_bias;
        } else {
            rho = p.embedding.transpose() * theta_u + p.visual_bias;
        }
    }
    for (std::size_t n = 0; n < items.size(); ++n) {
        const auto i = items[n];
        if (i >= p.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
        double s = base + p.item_bias[i] + gamma_u.dot(p.item_latent.row(i));
        if (p.F > 0) s += rho.dot(feats_.row(i));
        out[n] = s;
    }
}

BaselineKind parse_baseline(std::string_view name) {
    if (name == "rand") return BaselineKind::Rand;
    if (name == "pop") return BaselineKind::Pop;
    throw Error(ErrorCode::InvalidArgument, "unknown baseline '" + std::string(name) + "'");
}

std::unique_ptr<Scorer> baseline_scorer(BaselineKind kind, const Splits& splits, std::uint64_t seed) {
    if (kind == BaselineKind::Rand) {
        const auto key = splitmix64(seed);
        return std::make_unique<FunctionScorer>([key](UserIdx u, ItemIdx i, Timestamp) {
            const auto h = splitmix64(key ^ splitmix64((static_cast<std::uint64_t>(u) << 32) | i));
            return static_cast<double>(h >> 11) * 0x1.0p-53;
        });
    }
    auto counts = splits.train_item_counts;
    return std::make_unique<FunctionScorer>([counts = std::move(counts)](UserIdx, ItemIdx i, Timestamp) {
        return static_cast<double>(counts.at(i));
    });
}

namespace {

struct UserTerm {
    double fraction = 0.0;
    std::size_t pairs = 0;
    bool counted = false;
};

UserTerm user_term(const Scorer& scorer, const Splits& splits, std::size_t n_items, const EvalConfig& cfg, UserIdx u) {
    const auto& us = splits.users[u];
    UserTerm term;
    if (!us.evaluable) return term;
    const ItemIdx pos = cfg.target == Target::Test ? us.test : us.validation;
    const Timestamp ts = cfg.target == Target::Test ? us.test_ts : us.validation_ts;
    if (cfg.setting == Setting::ColdStart && splits.train_item_counts[pos] >= cfg.cold_threshold) return term;

    Rng rng(splitmix64(cfg.rng_seed ^ splitmix64(0xa0c0ull + u)));
    auto items = evaluation_negatives(u, splits, n_items, cfg.negative_sample_size, rng);
    if (items.empty()) return term;
    items.insert(items.begin(), pos);
    std::vector<double> scores(items.size());
    scorer.score_many(u, ts, items, scores);
    std::size_t wins = 0;
    for (std::size_t n = 1; n < scores.size(); ++n) wins += scores[0] > scores[n] ? 1 : 0;
    term.pairs = items.size() - 1;
    term.fraction = static_cast<double>(wins) / static_cast<double>(term.pairs);
    term.counted = true;
    return term;
}

}  // namespace

AucReport auc(const Scorer& scorer, const Splits& splits, const Dataset& data, const EvalConfig& cfg) {
    if (cfg.cold_threshold < 1) throw Error(ErrorCode::InvalidArgument, "cold_threshold must be >= 1");
    const std::size_t n_users = splits.users.size();
    std::vector<UserTerm> terms(n_users);

    const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
    if (workers == 1 || n_users < 64) {
        for (UserIdx u = 0; u < n_users; ++u) terms[u] = user_term(scorer, splits, data.item_count(), cfg, u);
    } else {
        std::vector<std::exception_ptr> failures(workers);
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (auto u = static_cast<UserIdx>(w); u < n_users; u += static_cast<UserIdx>(workers)) {
                            terms[u] = user_term(scorer, splits, data.item_count(), cfg, u);
                        }
                    } catch (...) {
                        failures[w] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
    }

    // Summed in user order so the result does not depend on the worker count.
    AucReport r;
    r.setting = cfg.setting;
    double sum = 0.0;
    for (const auto& t : terms) {
        if (!t.counted) continue;
        sum += t.fraction;
        ++r.n_users;
        r.n_pairs += t.pairs;
    }
    if (r.n_users == 0) throw Error(ErrorCode::NoEvaluableUsers, "no evaluable users for this setting");
    r.auc = sum / static_cast<double>(r.n_users);
    return r;
}

}  // namespace fashrank
