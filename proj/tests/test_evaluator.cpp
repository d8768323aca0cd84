#include <doctest.h>

#include <set>

#include "fashrank/evaluator.hpp"
#include "fashrank/synthetic.hpp"
#include "support.hpp"

using namespace fashrank;
using testing::error_of;
using testing::make_ids;

namespace {

Dataset user_with_items(std::size_t n_items, std::vector<std::vector<ItemIdx>> per_user) {
    std::vector<Interaction> log;
    for (UserIdx u = 0; u < per_user.size(); ++u) {
        Timestamp t = 0;
        for (auto i : per_user[u]) log.push_back({u, i, t++});
    }
    return Dataset(make_ids("u", per_user.size()), make_ids("i", n_items), std::move(log));
}

// Score table with many ties: small integers.
FunctionScorer table_scorer(std::size_t U, std::size_t I, Rng& rng, int levels) {
    std::vector<double> t(U * I);
    for (auto& x : t) x = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(levels)));
    return FunctionScorer([t, I](UserIdx u, ItemIdx i, Timestamp) { return t[u * I + i]; });
}

}  // namespace

TEST_CASE("split counts") {
    const auto d = user_with_items(10, {{0, 1, 2}, {3, 4}, {5, 6, 7, 8, 9}});
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(d, rng);
    CHECK(s.users[0].evaluable);
    CHECK(s.users[0].train.size() == 1);
    CHECK(s.users[0].test != s.users[0].validation);
    CHECK(!s.users[1].evaluable);
    CHECK(s.users[1].train == std::vector<ItemIdx>{3, 4});
    CHECK(s.users[2].train.size() == 3);
    CHECK(s.evaluable_user_count() == 2);
    CHECK(s.train_interactions.size() == 1 + 2 + 3);
}

TEST_CASE("split sets are disjoint and cover the positives") {
    auto rng = make_rng(2, Stream::Split);
    const auto d = testing::random_dataset(50, 40, 8, rng);
    auto srng = make_rng(9, Stream::Split);
    const auto s = split(d, srng);
    for (UserIdx u = 0; u < 50; ++u) {
        const auto& us = s.users[u];
        REQUIRE(us.evaluable);
        std::set<ItemIdx> all(us.train.begin(), us.train.end());
        CHECK(!all.count(us.test));
        CHECK(!all.count(us.validation));
        CHECK(us.test != us.validation);
        all.insert(us.test);
        all.insert(us.validation);
        const auto pos = d.positives(u);
        CHECK(all == std::set<ItemIdx>(pos.begin(), pos.end()));
    }
    auto again = make_rng(9, Stream::Split);
    const auto s2 = split(d, again);
    for (UserIdx u = 0; u < 50; ++u) {
        CHECK(s2.users[u].test == s.users[u].test);
        CHECK(s2.users[u].validation == s.users[u].validation);
        CHECK(s2.users[u].train == s.users[u].train);
    }
}

TEST_CASE("repeated interactions on a held-out item leave training") {
    std::vector<Interaction> log{{0, 0, 1}, {0, 0, 2}, {0, 1, 3}, {0, 1, 4}, {0, 2, 5}, {0, 2, 6}};
    const Dataset d(make_ids("u", 1), make_ids("i", 3), log);
    auto rng = make_rng(4, Stream::Split);
    const auto s = split(d, rng);
    REQUIRE(s.users[0].evaluable);
    CHECK(s.train_interactions.size() == 2);
    for (const auto& x : s.train_interactions) {
        CHECK(x.item != s.users[0].test);
        CHECK(x.item != s.users[0].validation);
    }
}

TEST_CASE("evaluation pairs") {
    const auto d = user_with_items(5, {{0, 1, 2, 3}});
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(d, rng);
    auto erng = make_rng(1, Stream::Evaluation);
    const auto pairs = evaluation_pairs(0, s, 5, 0, erng);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].first == s.users[0].test);
    CHECK(pairs[0].second == 4);
    CHECK(evaluation_pairs(0, s, 5, 7, erng) == pairs);
    CHECK(evaluation_pairs(0, s, 5, 0, erng, Target::Validation)[0].first == s.users[0].validation);
}

TEST_CASE("sampled negatives never collide with observed items") {
    auto rng = make_rng(3, Stream::Evaluation);
    for (int rep = 0; rep < 10000; ++rep) {
        const std::size_t I = 5 + uniform_index(rng, 30);
        const std::size_t per = 3 + uniform_index(rng, I - 3);
        const auto d = testing::random_dataset(1, I, per, rng);
        const auto s = split(d, rng);
        const std::size_t sample = uniform_index(rng, I + 2);
        const auto negs = evaluation_negatives(0, s, I, sample, rng);
        const auto pos = d.positives(0);
        const std::set<ItemIdx> mine(pos.begin(), pos.end());
        std::set<ItemIdx> distinct;
        for (auto j : negs) {
            CHECK_FALSE(mine.count(j));
            distinct.insert(j);
        }
        CHECK(distinct.size() == negs.size());
        const std::size_t available = I - mine.size();
        CHECK(negs.size() == (sample == 0 ? available : std::min(sample, available)));
    }
}

TEST_CASE("auc edge scorers") {
    auto rng = make_rng(5, Stream::Split);
    const auto d = testing::random_dataset(30, 25, 6, rng);
    const auto s = split(d, rng);
    FunctionScorer perfect([&](UserIdx u, ItemIdx i, Timestamp) { return i == s.users[u].test ? 1.0 : 0.0; });
    CHECK(auc(perfect, s, d, {}).auc == 1.0);
    FunctionScorer flat([](UserIdx, ItemIdx, Timestamp) { return 3.0; });
    CHECK(auc(flat, s, d, {}).auc == 0.0);
    const auto r = auc(perfect, s, d, {});
    CHECK(r.n_users == 30);
    CHECK(r.n_pairs == 30 * (25 - 6));
}

TEST_CASE("random scorer sits at one half") {
    SynthConfig cfg;
    cfg.n_users = 600;
    cfg.n_items = 800;
    cfg.F = 10;
    cfg.interactions_per_user = 10;
    const auto syn = generate_synthetic(cfg);
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(syn.data, rng);
    const auto rand = baseline_scorer(BaselineKind::Rand, s, 17);
    CHECK(std::abs(auc(*rand, s, syn.data, {}).auc - 0.5) < 0.02);
}

TEST_CASE("auc equals the brute-force double loop") {
    auto rng = make_rng(6, Stream::Evaluation);
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t U = 1 + uniform_index(rng, 10), I = 4 + uniform_index(rng, 17);
        const auto d = testing::random_dataset(U, I, 3 + uniform_index(rng, I - 3), rng);
        const auto s = split(d, rng);
        const auto scorer = table_scorer(U, I, rng, 1 + static_cast<int>(uniform_index(rng, 6)));
        if (s.evaluable_user_count() == 0) continue;
        CHECK(auc(scorer, s, d, {}).auc == testing::brute_force_auc(scorer, s, d));
        EvalConfig cold;
        cold.setting = Setting::ColdStart;
        cold.cold_threshold = 1 + uniform_index(rng, 3);
        const bool any_cold = [&] {
            for (UserIdx u = 0; u < U; ++u)
                if (s.users[u].evaluable && s.train_item_counts[s.users[u].test] < cold.cold_threshold) return true;
            return false;
        }();
        if (any_cold) {
            CHECK(auc(scorer, s, d, cold).auc == testing::brute_force_auc(scorer, s, d, true, cold.cold_threshold));
        } else {
            CHECK(error_of([&] { auc(scorer, s, d, cold); }) == ErrorCode::NoEvaluableUsers);
        }
    }
}

TEST_CASE("model scorer batches agree with the predictor") {
    auto rng = make_rng(7, Stream::Evaluation);
    for (auto mode : {ModelMode::MfOnly, ModelMode::Visual, ModelMode::Temporal}) {
        const auto p = testing::random_params(mode, 4, 12, 3, 2, 5, 3, rng);
        const auto f = mode == ModelMode::MfOnly ? FeatureMatrix::empty(12) : testing::random_features(12, 5, rng);
        ModelScorer ms(p, f);
        std::vector<ItemIdx> items(12);
        for (ItemIdx i = 0; i < 12; ++i) items[i] = i;
        std::vector<double> out(12);
        for (UserIdx u = 0; u < 4; ++u) {
            for (Timestamp ts : {5, 40, 95}) {
                ms.score_many(u, ts, items, out);
                for (ItemIdx i = 0; i < 12; ++i) CHECK(testing::rel_err(out[i], predict(u, i, ts, p, f)) < 1e-12);
            }
        }
    }
}

TEST_CASE("negated scores flip the auc") {
    auto rng = make_rng(8, Stream::Evaluation);
    for (int rep = 0; rep < 50; ++rep) {
        const auto d = testing::random_dataset(8, 20, 5, rng);
        const auto s = split(d, rng);
        std::vector<double> t(8 * 20);
        for (auto& x : t) x = std::uniform_real_distribution<double>(0, 1)(rng);
        FunctionScorer a([&](UserIdx u, ItemIdx i, Timestamp) { return t[u * 20 + i]; });
        FunctionScorer b([&](UserIdx u, ItemIdx i, Timestamp) { return -t[u * 20 + i]; });
        CHECK(auc(b, s, d, {}).auc == doctest::Approx(1.0 - auc(a, s, d, {}).auc).epsilon(1e-12));

        // With ties the pair counts split three ways.
        const auto tied = table_scorer(8, 20, rng, 3);
        FunctionScorer neg([&](UserIdx u, ItemIdx i, Timestamp ts) { return -tied.score(u, i, ts); });
        double untied = 0.0;
        std::size_t users = 0;
        for (UserIdx u = 0; u < 8; ++u) {
            if (!s.users[u].evaluable) continue;
            auto nrng = make_rng(1, Stream::Evaluation);
            const auto pairs = evaluation_pairs(u, s, 20, 0, nrng);
            std::size_t distinct = 0;
            for (auto [i, j] : pairs) distinct += tied.score(u, i, 0) != tied.score(u, j, 0);
            untied += static_cast<double>(distinct) / static_cast<double>(pairs.size());
            ++users;
        }
        untied /= static_cast<double>(users);
        CHECK(auc(neg, s, d, {}).auc == doctest::Approx(untied - auc(tied, s, d, {}).auc).epsilon(1e-12));
    }
}

TEST_CASE("sampled negatives approximate exhaustive auc") {
    SynthConfig cfg;
    cfg.n_users = 500;
    cfg.n_items = 1500;
    cfg.F = 20;
    cfg.interactions_per_user = 10;
    const auto syn = generate_synthetic(cfg);
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(syn.data, rng);
    FunctionScorer truth([&](UserIdx u, ItemIdx i, Timestamp ts) { return syn.truth.taste(u, ts).dot(syn.features.row(i)); });
    const double exhaustive = auc(truth, s, syn.data, {}).auc;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        EvalConfig cfg500;
        cfg500.negative_sample_size = 500;
        cfg500.rng_seed = seed;
        const auto r = auc(truth, s, syn.data, cfg500);
        CHECK(r.n_pairs == 500 * r.n_users);
        worst = std::max(worst, std::abs(r.auc - exhaustive));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("baselines") {
    const auto d = user_with_items(6, {{0, 1, 2, 3}, {0, 1, 2, 4}, {0, 1, 3, 5}, {0, 2, 3, 4}});
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(d, rng);
    const auto pop = baseline_scorer(BaselineKind::Pop, s, 1);
    std::vector<double> counts(6, 0.0);
    for (const auto& x : s.train_interactions) counts[x.item] += 1;
    for (UserIdx u = 0; u < 4; ++u)
        for (ItemIdx i = 0; i < 6; ++i) CHECK(pop->score(u, i, 0) == counts[i]);

    // An item with 10 training interactions outranks one with 3 for every user.
    std::vector<Interaction> log;
    for (UserIdx u = 0; u < 12; ++u) {
        log.push_back({u, 0, 1});
        log.push_back({u, 2 + u, 2});
        log.push_back({u, 20 + u, 3});
        log.push_back({u, 40 + u, 4});
    }
    for (UserIdx u = 0; u < 3; ++u) log.push_back({u, 1, 0});
    Splits train_only;
    train_only.users.resize(12);
    train_only.train_item_counts.assign(60, 0);
    for (const auto& x : log) ++train_only.train_item_counts[x.item];
    train_only.train_item_counts[0] = 10;
    const auto p2 = baseline_scorer(BaselineKind::Pop, train_only, 1);
    for (UserIdx u = 0; u < 12; ++u) CHECK(p2->score(u, 0, 0) > p2->score(u, 1, 0));

    const auto r1 = baseline_scorer(BaselineKind::Rand, s, 5);
    const auto r2 = baseline_scorer(BaselineKind::Rand, s, 5);
    const auto r3 = baseline_scorer(BaselineKind::Rand, s, 6);
    bool differs = false;
    for (UserIdx u = 0; u < 4; ++u) {
        for (ItemIdx i = 0; i < 6; ++i) {
            CHECK(r1->score(u, i, 0) == r2->score(u, i, 0));
            CHECK(r1->score(u, i, 0) >= 0.0);
            CHECK(r1->score(u, i, 0) < 1.0);
            differs = differs || r1->score(u, i, 0) != r3->score(u, i, 0);
        }
    }
    CHECK(differs);
    CHECK(parse_baseline("pop") == BaselineKind::Pop);
    CHECK(error_of([] { parse_baseline("nope"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("pop scores on cold items stay below the threshold") {
    SynthConfig cfg;
    cfg.n_users = 300;
    cfg.n_items = 600;
    cfg.F = 10;
    cfg.interactions_per_user = 8;
    const auto syn = generate_synthetic(cfg);
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(syn.data, rng);
    const auto pop = baseline_scorer(BaselineKind::Pop, s, 1);
    for (UserIdx u = 0; u < 300; ++u) {
        const auto& us = s.users[u];
        if (!us.evaluable || s.train_item_counts[us.test] >= 5) continue;
        const double v = pop->score(u, us.test, 0);
        CHECK(v >= 0.0);
        CHECK(v <= 4.0);
        CHECK(v == std::floor(v));
    }
}

TEST_CASE("evaluation errors") {
    const auto d = user_with_items(4, {{0, 1}});
    auto rng = make_rng(1, Stream::Split);
    const auto s = split(d, rng);
    FunctionScorer flat([](UserIdx, ItemIdx, Timestamp) { return 0.0; });
    CHECK(error_of([&] { auc(flat, s, d, {}); }) == ErrorCode::NoEvaluableUsers);
    EvalConfig bad;
    bad.cold_threshold = 0;
    CHECK(error_of([&] { auc(flat, s, d, bad); }) == ErrorCode::InvalidArgument);
    CHECK(parse_setting("cold") == Setting::ColdStart);
    CHECK(setting_name(Setting::AllItems) == "all");
}
