#include "fashrank/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fashrank/errors.hpp"

namespace fashrank {

namespace {

double log_sigmoid(double d) {
    return d > 0 ? -std::log1p(std::exp(-d)) : d - std::log1p(std::exp(d));
}

double sigmoid_neg(double d) {
    return d > 0 ? std::exp(-d) / (1.0 + std::exp(-d)) : 1.0 / (1.0 + std::exp(d));
}

void fill_gaussian(RowMatrix& m, Rng& rng, double std) {
    std::normal_distribution<double> g(0.0, std);
    for (Eigen::Index n = 0; n < m.size(); ++n) m.data()[n] = g(rng);
}

// d = x_ui - x_uj for a triple, with the visual term evaluated in `epoch`
// when the model is temporal. Shares the item-difference feature vector
// through `diff`, `ediff` and `vfac` for the gradient.
struct PairState {
    Eigen::VectorXd diff;   // f_i - f_j
    Eigen::VectorXd ediff;  // E diff
    Eigen::VectorXd vfac;   // derivative of d wrt theta_u
};

double pair_difference(const ModelParams& p, const Triple& t, const FeatureMatrix& feats, std::size_t epoch,
                       PairState& st) {
    const auto u = t.user;
    double d = p.item_bias[t.pos] - p.item_bias[t.neg];
    d += p.user_latent.row(u).dot(p.item_latent.row(t.pos) - p.item_latent.row(t.neg));
    if (p.F == 0) return d;
    st.diff = feats.row(t.pos) - feats.row(t.neg);
    st.ediff.noalias() = p.embedding * st.diff;
    if (p.temporal) {
        st.vfac = st.ediff.cwiseProduct(p.temporal->weights.row(static_cast<Eigen::Index>(epoch)).transpose());
        st.vfac.noalias() += p.temporal->drifts[epoch] * st.diff;
    } else {
        st.vfac = st.ediff;
    }
    d += p.visual_bias.dot(st.diff);
    d += p.user_visual.row(u).dot(st.vfac.transpose());
    return d;
}

void check_triple(const ModelParams& p, const Triple& t) {
    if (t.user >= p.user_count()) throw Error(ErrorCode::UnknownUser, "unknown user index " + std::to_string(t.user));
    if (t.pos >= p.item_count() || t.neg >= p.item_count()) {
        throw Error(ErrorCode::UnknownItem, "triple references an unknown item");
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
    if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
    if (mode != ModelMode::MfOnly && K_vis < 1) throw Error(ErrorCode::InvalidArgument, "K_vis must be >= 1");
    if (epoch_count < 1) throw Error(ErrorCode::InvalidArgument, "epoch_count must be >= 1");
    for (double l : {lambda_theta, lambda_latent, lambda_bias, lambda_embed}) {
        if (!(l >= 0.0)) throw Error(ErrorCode::InvalidArgument, "regularization weights must be non-negative");
    }
    if (!(init_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "init_std must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"mode", mode_name(mode)},
            {"K", K},
            {"K_vis", K_vis},
            {"learning_rate", learning_rate},
            {"lambda_theta", lambda_theta},
            {"lambda_latent", lambda_latent},
            {"lambda_bias", lambda_bias},
            {"lambda_embed", lambda_embed},
            {"max_sweeps", max_sweeps},
            {"patience", patience},
            {"epoch_count", epoch_count},
            {"boundary_refine_rounds", boundary_refine_rounds},
            {"refinement", refinement == BoundaryRefinement::OnPlateau ? "on_plateau" : "every_sweep"},
            {"rng_seed", rng_seed},
            {"init_std", init_std},
            {"validation_negatives", validation_negatives},
            {"boundary_probe_size", boundary_probe_size}};
}

EpochSchedule quantile_schedule(const Dataset& data, std::size_t epoch_count) {
    std::vector<Timestamp> ts;
    ts.reserve(data.interactions().size());
    for (const auto& x : data.interactions()) ts.push_back(x.timestamp);
    std::sort(ts.begin(), ts.end());
    EpochSchedule s;
    s.time_min = data.min_timestamp();
    s.time_max = data.max_timestamp();
    for (std::size_t k = 1; k < epoch_count; ++k) {
        Timestamp b = ts.empty() ? static_cast<Timestamp>(k) : ts[k * ts.size() / epoch_count];
        if (!s.boundaries.empty() && b <= s.boundaries.back()) b = s.boundaries.back() + 1;
        s.boundaries.push_back(b);
    }
    return s;
}

ModelParams init_params(const TrainConfig& config, const Dataset& data, const FeatureMatrix& feats, Rng& rng) {
    config.validate();
    if (data.interactions().empty() || data.user_count() == 0 || data.item_count() == 0) {
        throw Error(ErrorCode::EmptyDataset, "cannot initialize a model from an empty dataset");
    }
    if (config.mode != ModelMode::MfOnly && feats.item_count() != data.item_count()) {
        throw Error(ErrorCode::ShapeMismatch, "feature rows do not match dataset items");
    }
    const std::size_t F = config.mode == ModelMode::MfOnly ? 0 : feats.dim();
    const std::size_t N = config.mode == ModelMode::Temporal ? config.epoch_count : 1;
    auto p = ModelParams::zeros(config.mode, data.users(), data.items(), config.K, config.K_vis, F, N);
    // Latent factors are drawn first so that latent-only and visual runs
    // from the same seed share them.
    fill_gaussian(p.user_latent, rng, config.init_std);
    fill_gaussian(p.item_latent, rng, config.init_std);
    fill_gaussian(p.user_visual, rng, config.init_std);
    fill_gaussian(p.embedding, rng, config.init_std);
    if (p.temporal) p.temporal->schedule = quantile_schedule(data, N);
    p.validate();
    return p;
}

TripleSampler::TripleSampler(const Dataset& data) : data_(data), positives_(data.user_count()) {
    for (const auto& x : data.interactions()) {
        auto& v = positives_[x.user];
        if (std::none_of(v.begin(), v.end(), [&](const auto& e) { return e.first == x.item; })) {
            v.emplace_back(x.item, x.timestamp);
        }
    }
    const bool any = std::any_of(positives_.begin(), positives_.end(), [&](const auto& v) {
        return !v.empty() && v.size() < data.item_count();
    });
    if (!any) {
        throw Error(ErrorCode::DegenerateDataset, "no user has both positive and unobserved items");
    }
}

Triple TripleSampler::sample(Rng& rng) const {
    const auto& log = data_.interactions();
    constexpr int kMaxUserRetries = 1000;
    for (int attempt = 0; attempt < kMaxUserRetries; ++attempt) {
        const auto u = log[uniform_index(rng, log.size())].user;
        const auto& pos = positives_[u];
        if (pos.size() >= data_.item_count()) continue;
        const auto& [i, ts] = pos[uniform_index(rng, pos.size())];
        ItemIdx j;
        do {
            j = static_cast<ItemIdx>(uniform_index(rng, data_.item_count()));
        } while (data_.is_positive(u, j));
        return {u, i, j, ts};
    }
    throw Error(ErrorCode::DegenerateDataset, "could not sample a user with unobserved items");
}

Triple sample_triple(const Dataset& data, Rng& rng) {
    return TripleSampler(data).sample(rng);
}

void pair_gradient(const ModelParams& p, const Triple& t, const FeatureMatrix& feats, PairGradient& g) {
    check_triple(p, t);
    g.epoch = p.temporal ? epoch_of(t.ts, p.temporal->schedule) : 0;
    PairState st;
    g.d = pair_difference(p, t, feats, g.epoch, st);
    if (!std::isfinite(g.d)) {
        throw Error(ErrorCode::NonFinite, "non-finite score difference during SGD (learning rate too high?)");
    }
    const double w = sigmoid_neg(g.d);
    g.weight = w;
    const auto gamma_u = p.user_latent.row(t.user).transpose();
    g.pos_bias = w;
    g.neg_bias = -w;
    g.user_latent = w * (p.item_latent.row(t.pos) - p.item_latent.row(t.neg)).transpose();
    g.pos_latent = w * gamma_u;
    g.neg_latent = -w * gamma_u;
    if (p.F == 0) {
        g.visual_bias.resize(0);
        g.user_visual = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.K_vis));
        g.embedding.resize(static_cast<Eigen::Index>(p.K_vis), 0);
        g.weights.resize(0);
        g.drift.resize(0, 0);
        return;
    }
    const Eigen::VectorXd theta_u = p.user_visual.row(t.user).transpose();
    g.visual_bias = w * st.diff;
    g.user_visual = w * st.vfac;
    if (p.temporal) {
        const Eigen::VectorXd wt = p.temporal->weights.row(static_cast<Eigen::Index>(g.epoch)).transpose();
        g.embedding.noalias() = (w * theta_u.cwiseProduct(wt)) * st.diff.transpose();
        g.weights = w * theta_u.cwiseProduct(st.ediff);
        g.drift.noalias() = (w * theta_u) * st.diff.transpose();
    } else {
        g.embedding.noalias() = (w * theta_u) * st.diff.transpose();
        g.weights.resize(0);
        g.drift.resize(0, 0);
    }
}

double bpr_sgd_step(ModelParams& p, const Triple& t, const TrainConfig& c, const FeatureMatrix& feats,
                    PairGradient& g) {
    pair_gradient(p, t, feats, g);
    const double lr = c.learning_rate;
    p.item_bias[t.pos] += lr * (g.pos_bias - c.lambda_bias * p.item_bias[t.pos]);
    p.item_bias[t.neg] += lr * (g.neg_bias - c.lambda_bias * p.item_bias[t.neg]);
    p.user_latent.row(t.user) += lr * (g.user_latent.transpose() - c.lambda_latent * p.user_latent.row(t.user));
    p.item_latent.row(t.pos) += lr * (g.pos_latent.transpose() - c.lambda_latent * p.item_latent.row(t.pos));
    p.item_latent.row(t.neg) += lr * (g.neg_latent.transpose() - c.lambda_latent * p.item_latent.row(t.neg));
    if (p.K_vis > 0) {
        p.user_visual.row(t.user) += lr * (g.user_visual.transpose() - c.lambda_theta * p.user_visual.row(t.user));
    }
    if (p.F > 0) {
        p.visual_bias += lr * (g.visual_bias - c.lambda_bias * p.visual_bias);
        p.embedding += lr * (g.embedding - c.lambda_embed * p.embedding);
        if (p.temporal) {
            auto w_row = p.temporal->weights.row(static_cast<Eigen::Index>(g.epoch));
            w_row += lr * g.weights.transpose();
            auto& drift = p.temporal->drifts[g.epoch];
            drift += lr * (g.drift - c.lambda_embed * drift);
        }
    }
    return log_sigmoid(g.d);
}

double probe_objective(const ModelParams& p, std::span<const Triple> probe, const FeatureMatrix& feats,
                       const EpochSchedule& schedule) {
    if (probe.empty()) return 0.0;
    PairState st;
    double sum = 0.0;
    for (const auto& t : probe) {
        const auto epoch = p.temporal ? epoch_of(t.ts, schedule) : 0;
        sum += log_sigmoid(pair_difference(p, t, feats, epoch, st));
    }
    return sum / static_cast<double>(probe.size());
}

EpochSchedule refine_boundaries(const ModelParams& p, std::span<const Triple> probe, const FeatureMatrix& feats,
                                const TrainConfig& config) {
    if (!p.temporal) throw Error(ErrorCode::TemporalRequired, "boundary refinement needs a temporal model");
    EpochSchedule s = p.temporal->schedule;
    const std::size_t N = s.epoch_count();
    if (N < 2 || probe.empty()) return s;

    // ln sigma(d) of every probe triple under every epoch's parameters, so a
    // candidate schedule only changes which column is read.
    std::vector<double> table(probe.size() * N);
    PairState st;
    for (std::size_t n = 0; n < probe.size(); ++n) {
        for (std::size_t e = 0; e < N; ++e) table[n * N + e] = log_sigmoid(pair_difference(p, probe[n], feats, e, st));
    }
    const auto objective = [&](const EpochSchedule& cand) {
        double sum = 0.0;
        for (std::size_t n = 0; n < probe.size(); ++n) sum += table[n * N + epoch_of(probe[n].ts, cand)];
        return sum / static_cast<double>(probe.size());
    };

    double best = objective(s);
    for (std::size_t round = 0; round < config.boundary_refine_rounds; ++round) {
        for (std::size_t k = 0; k + 1 < N; ++k) {
            const Timestamp lo = k == 0 ? s.time_min : s.boundaries[k - 1];
            const Timestamp hi = k + 2 == N ? s.time_max : s.boundaries[k + 1];
            const Timestamp step = std::max<Timestamp>(1, (hi - lo) / 10);
            const Timestamp current = s.boundaries[k];
            Timestamp chosen = current;
            for (const Timestamp cand : {current - step, current + step}) {
                if (cand <= lo || cand >= hi) continue;
                EpochSchedule trial = s;
                trial.boundaries[k] = cand;
                const double value = objective(trial);
                if (value > best) {
                    best = value;
                    chosen = cand;
                }
            }
            s.boundaries[k] = chosen;
        }
    }
    s.validate();
    return s;
}

std::string TrainReport::to_json_lines() const {
    std::ostringstream out;
    out << header.dump() << '\n';
    for (const auto& r : sweeps) {
        nlohmann::json j{{"sweep", r.sweep}, {"objective", r.objective}};
        j["val_auc"] = r.val_auc ? nlohmann::json(*r.val_auc) : nlohmann::json(nullptr);
        if (!r.boundaries.empty()) j["boundaries"] = r.boundaries;
        out << j.dump() << '\n';
    }
    return out.str();
}

FitResult fit(const Dataset& data, const FeatureMatrix& feats, const TrainConfig& config, const Splits& splits) {
    config.validate();
    if (splits.train_interactions.empty()) throw Error(ErrorCode::EmptyDataset, "no training interactions");
    const Dataset train = data.with_interactions(splits.train_interactions);

    auto init_rng = make_rng(config.rng_seed, Stream::Init);
    FitResult result{init_params(config, train, feats, init_rng), {}};
    auto& params = result.params;
    auto& report = result.report;
    report.header = {{"config", config.to_json()},
                     {"train_interactions", train.interactions().size()},
                     {"users", train.user_count()},
                     {"items", train.item_count()},
                     {"F", params.F},
                     {"notes",
                      {"user bias and global offset cancel in pairwise differences and are not trained",
                       "epoch weights w(t) are not regularized",
                       "validation AUC uses sampled negatives; report exhaustive AUC via evaluate"}}};
    if (config.max_sweeps == 0) return result;

    const TripleSampler sampler(train);
    auto sample_rng = make_rng(config.rng_seed, Stream::Sampling);
    std::vector<Triple> probe;
    const bool refine = params.temporal && params.temporal->schedule.epoch_count() >= 2;
    if (refine) {
        auto probe_rng = make_rng(config.rng_seed, Stream::BoundaryProbe);
        probe.resize(std::min(config.boundary_probe_size, train.interactions().size()));
        for (auto& t : probe) t = sampler.sample(probe_rng);
    }

    const bool validate = splits.evaluable_user_count() > 0;
    // Plateaus are only visible through validation.
    const bool every_sweep = config.refinement == BoundaryRefinement::EverySweep || !validate;
    EvalConfig val_cfg;
    val_cfg.target = Target::Validation;
    val_cfg.negative_sample_size = config.validation_negatives;
    val_cfg.rng_seed = splitmix64(config.rng_seed ^ static_cast<std::uint64_t>(Stream::Validation));

    ModelParams best = params;
    std::size_t since_best = 0;
    PairGradient workspace;
    const std::size_t steps = train.interactions().size();
    for (std::size_t sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double objective = 0.0;
        for (std::size_t n = 0; n < steps; ++n) {
            objective += bpr_sgd_step(params, sampler.sample(sample_rng), config, feats, workspace);
        }
        SweepRecord rec;
        rec.sweep = sweep;
        rec.objective = objective / static_cast<double>(steps);
        if (refine && every_sweep) params.temporal->schedule = refine_boundaries(params, probe, feats, config);
        if (params.temporal) rec.boundaries = params.temporal->schedule.boundaries;
        if (validate) {
            rec.val_auc = auc(ModelScorer(params, feats), splits, train, val_cfg).auc;
            if (!report.best_val_auc || *rec.val_auc > *report.best_val_auc) {
                report.best_val_auc = rec.val_auc;
                report.best_sweep = sweep;
                best = params;
                since_best = 0;
            } else {
                ++since_best;
            }
        } else {
            best = params;
            report.best_sweep = sweep;
        }
        report.sweeps.push_back(std::move(rec));
        if (!validate || since_best < config.patience) continue;
        if (!refine || every_sweep) break;
        auto schedule = refine_boundaries(best, probe, feats, config);
        if (schedule == best.temporal->schedule) break;
        params = best;
        params.temporal->schedule = std::move(schedule);
        since_best = 0;
    }
    params = std::move(best);
    return result;
}

}  // namespace fashrank
