#include "fashrank/model.hpp"

#include <algorithm>
#include <string>

#include "fashrank/errors.hpp"

namespace fashrank {

namespace {

std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

void expect_shape(const RowMatrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected " +
                                                  shape_str(static_cast<Eigen::Index>(rows),
                                                            static_cast<Eigen::Index>(cols)) +
                                                  ", got " + shape_str(m.rows(), m.cols()));
    }
    if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

void expect_size(const Eigen::VectorXd& v, std::size_t n, const char* what) {
    if (static_cast<std::size_t>(v.size()) != n) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected length " + std::to_string(n) +
                                                  ", got " + std::to_string(v.size()));
    }
    if (!v.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

void check_user_item(UserIdx u, ItemIdx i, const ModelParams& params) {
    if (u >= params.user_count()) throw Error(ErrorCode::UnknownUser, "unknown user index " + std::to_string(u));
    if (i >= params.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
}

}  // namespace

std::string_view mode_name(ModelMode mode) noexcept {
    switch (mode) {
        case ModelMode::MfOnly: return "mf";
        case ModelMode::Visual: return "visual";
        case ModelMode::Temporal: return "temporal";
    }
    return "visual";
}

ModelMode parse_mode(std::string_view name) {
    if (name == "mf" || name == "mf_only") return ModelMode::MfOnly;
    if (name == "visual") return ModelMode::Visual;
    if (name == "temporal") return ModelMode::Temporal;
    throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(name) + "'");
}

void EpochSchedule::validate() const {
    for (std::size_t n = 1; n < boundaries.size(); ++n) {
        if (boundaries[n] <= boundaries[n - 1]) {
            throw Error(ErrorCode::InvalidArgument, "epoch boundaries must be strictly increasing");
        }
    }
}

std::size_t epoch_of(Timestamp ts, const EpochSchedule& schedule) {
    // Number of boundaries <= ts; a boundary itself opens the later epoch.
    const auto it = std::upper_bound(schedule.boundaries.begin(), schedule.boundaries.end(), ts);
    return static_cast<std::size_t>(it - schedule.boundaries.begin());
}

ModelParams ModelParams::zeros(ModelMode mode, IdTable users, IdTable items, std::size_t K, std::size_t K_vis,
                               std::size_t F, std::size_t epoch_count) {
    ModelParams p;
    p.mode = mode;
    p.users = std::move(users);
    p.items = std::move(items);
    if (mode == ModelMode::MfOnly) {
        K_vis = 0;
        F = 0;
    }
    p.K = K;
    p.K_vis = K_vis;
    p.F = F;
    const auto nu = static_cast<Eigen::Index>(p.users.size());
    const auto ni = static_cast<Eigen::Index>(p.items.size());
    const auto k = static_cast<Eigen::Index>(K);
    const auto kv = static_cast<Eigen::Index>(K_vis);
    const auto f = static_cast<Eigen::Index>(F);
    p.user_bias = Eigen::VectorXd::Zero(nu);
    p.item_bias = Eigen::VectorXd::Zero(ni);
    p.visual_bias = Eigen::VectorXd::Zero(f);
    p.user_latent = RowMatrix::Zero(nu, k);
    p.item_latent = RowMatrix::Zero(ni, k);
    p.user_visual = RowMatrix::Zero(nu, kv);
    p.embedding = RowMatrix::Zero(kv, f);
    if (mode == ModelMode::Temporal) {
        TemporalParams t;
        t.weights = RowMatrix::Ones(static_cast<Eigen::Index>(epoch_count), kv);
        t.drifts.assign(epoch_count, RowMatrix::Zero(kv, f));
        t.schedule.boundaries.resize(epoch_count - 1);
        for (std::size_t n = 0; n + 1 < epoch_count; ++n) t.schedule.boundaries[n] = static_cast<Timestamp>(n + 1);
        p.temporal = std::move(t);
    }
    return p;
}

void ModelParams::validate() const {
    if ((mode == ModelMode::Temporal) != temporal.has_value()) {
        throw Error(ErrorCode::InvalidArgument, "temporal parameters present iff mode is temporal");
    }
    if (!std::isfinite(alpha)) throw Error(ErrorCode::NonFinite, "alpha is non-finite");
    expect_size(user_bias, user_count(), "user_bias");
    expect_size(item_bias, item_count(), "item_bias");
    expect_size(visual_bias, F, "visual_bias");
    expect_shape(user_latent, user_count(), K, "user_latent");
    expect_shape(item_latent, item_count(), K, "item_latent");
    expect_shape(user_visual, user_count(), K_vis, "user_visual");
    expect_shape(embedding, K_vis, F, "embedding");
    if (temporal) {
        temporal->schedule.validate();
        const auto n = temporal->schedule.epoch_count();
        expect_shape(temporal->weights, n, K_vis, "weights");
        if (temporal->drifts.size() != n) {
            throw Error(ErrorCode::ShapeMismatch, "drifts: expected " + std::to_string(n) + " epochs");
        }
        for (const auto& d : temporal->drifts) expect_shape(d, K_vis, F, "drift");
    }
}

Eigen::VectorXd one_hot(std::size_t k, std::size_t F) {
    if (k >= F) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "feature index " + std::to_string(k) + " out of range for F=" + std::to_string(F));
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(F));
    h[static_cast<Eigen::Index>(k)] = 1.0;
    return h;
}

void check_features(const ModelParams& params, const FeatureMatrix& feats) {
    if (params.F == 0) return;
    if (feats.dim() != params.F) {
        throw Error(ErrorCode::ShapeMismatch, "feature dimension " + std::to_string(feats.dim()) +
                                                  " does not match model F=" + std::to_string(params.F));
    }
    if (feats.item_count() != params.item_count()) {
        throw Error(ErrorCode::ShapeMismatch, "feature rows " + std::to_string(feats.item_count()) +
                                                  " do not match model items " +
                                                  std::to_string(params.item_count()));
    }
}

Eigen::VectorXd visual_factor_of(const Eigen::Ref<const Eigen::VectorXd>& f, std::size_t epoch,
                                 const ModelParams& params) {
    if (!params.temporal) throw Error(ErrorCode::TemporalRequired, "model has no temporal parameters");
    const auto& t = *params.temporal;
    if (epoch >= t.schedule.epoch_count()) {
        throw Error(ErrorCode::IndexOutOfRange, "epoch " + std::to_string(epoch) + " out of range");
    }
    if (static_cast<std::size_t>(f.size()) != params.F) {
        throw Error(ErrorCode::ShapeMismatch, "feature vector length does not match model F");
    }
    const Eigen::VectorXd base = params.embedding * f;
    const auto w = t.weights.row(static_cast<Eigen::Index>(epoch)).transpose();
    const Eigen::VectorXd drift = t.drifts[epoch] * f;
    return base.cwiseProduct(w) + drift;
}

ScoreTerms score_terms(UserIdx u, ItemIdx i, const Eigen::Ref<const Eigen::VectorXd>& f, const ModelParams& params,
                       std::optional<std::size_t> epoch) {
    check_user_item(u, i, params);
    ScoreTerms s;
    s.global = params.alpha;
    s.user_bias = params.user_bias[u];
    s.item_bias = params.item_bias[i];
    s.latent = params.user_latent.row(u).dot(params.item_latent.row(i));
    if (params.F == 0) return s;
    if (static_cast<std::size_t>(f.size()) != params.F) {
        throw Error(ErrorCode::ShapeMismatch, "feature vector length " + std::to_string(f.size()) +
                                                  " does not match model F=" + std::to_string(params.F));
    }
    s.visual_bias = params.visual_bias.dot(f);
    if (epoch) {
        s.visual = params.user_visual.row(u).dot(visual_factor_of(f, *epoch, params).transpose());
    } else {
        const Eigen::VectorXd theta_i = params.embedding * f;
        s.visual = params.user_visual.row(u).dot(theta_i.transpose());
    }
    return s;
}

double predict_score(UserIdx u, ItemIdx i, const ModelParams& params, const FeatureMatrix& feats) {
    if (params.temporal) {
        throw Error(ErrorCode::InvalidArgument, "static predictor called on a temporal model");
    }
    check_features(params, feats);
    if (params.F == 0) return score_terms(u, i, Eigen::VectorXd(), params).total();
    check_user_item(u, i, params);
    return score_terms(u, i, feats.row(i), params).total();
}

Eigen::VectorXd visual_item_factor(ItemIdx i, std::size_t epoch, const ModelParams& params,
                                   const FeatureMatrix& feats) {
    check_features(params, feats);
    if (i >= params.item_count()) throw Error(ErrorCode::UnknownItem, "unknown item index " + std::to_string(i));
    return visual_factor_of(feats.row(i), epoch, params);
}

double predict_score_temporal(UserIdx u, ItemIdx i, Timestamp ts, const ModelParams& params,
                              const FeatureMatrix& feats) {
    if (!params.temporal) throw Error(ErrorCode::TemporalRequired, "model has no temporal parameters");
    check_features(params, feats);
    const auto epoch = epoch_of(ts, params.temporal->schedule);
    if (params.F == 0) return score_terms(u, i, Eigen::VectorXd(), params, epoch).total();
    check_user_item(u, i, params);
    return score_terms(u, i, feats.row(i), params, epoch).total();
}

double predict(UserIdx u, ItemIdx i, Timestamp ts, const ModelParams& params, const FeatureMatrix& feats) {
    return params.temporal ? predict_score_temporal(u, i, ts, params, feats) : predict_score(u, i, params, feats);
}

}  // namespace fashrank
