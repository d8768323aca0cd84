// Command-line entry point: synth / train / evaluate / trends / serve.

#include <csignal>
#include <map>
#include <fstream>
#include <iostream>

#include "fashrank/checkpoint.hpp"
#include "fashrank/data_io.hpp"
#include "fashrank/errors.hpp"
#include "fashrank/evaluator.hpp"
#include "fashrank/service.hpp"
#include "fashrank/synthetic.hpp"
#include "fashrank/trainer.hpp"
#include "fashrank/trends.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace fashrank;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

FeatureMatrix features_for(const IdTable& items, const std::string& path, const std::string& names) {
    if (path.empty()) return FeatureMatrix::empty(items.size());
    return load_features(path, names.empty() ? std::nullopt : std::optional<fs::path>(names), items);
}

// Re-indexes a dataset's positives onto a checkpoint's item table.
std::vector<std::vector<ItemIdx>> seen_items(const Dataset& data, const ModelParams& params) {
    std::vector<std::vector<ItemIdx>> seen(params.user_count());
    for (const auto& x : data.interactions()) {
        const auto u = params.users.find(data.users().name(x.user));
        const auto i = params.items.find(data.items().name(x.item));
        if (u && i) seen[*u].push_back(*i);
    }
    return seen;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visually-aware personalized ranking"};
    app.require_subcommand(1);

    // synth
    SynthConfig synth;
    std::string synth_out = "data";
    Timestamp shift_time = -1;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted visual preferences");
    synth_cmd->add_option("--users", synth.n_users);
    synth_cmd->add_option("--items", synth.n_items);
    synth_cmd->add_option("--f", synth.F, "Feature dimensionality");
    synth_cmd->add_option("--per-user", synth.interactions_per_user);
    synth_cmd->add_option("--visual-weight", synth.visual_signal_weight);
    synth_cmd->add_option("--shift-time", shift_time, "Timestamp of the planted taste shift (negative: none)");
    synth_cmd->add_option("--noise", synth.noise_std);
    synth_cmd->add_option("--horizon", synth.time_horizon);
    synth_cmd->add_option("--slate", synth.slate_size, "Candidates per choice");
    synth_cmd->add_option("--styles", synth.style_count);
    synth_cmd->add_option("--style-shift", synth.style_shift, "How far style prototypes move at the shift time");
    synth_cmd->add_option("--taste-scale", synth.taste_scale);
    synth_cmd->add_option("--active", synth.active_per_item, "Active attributes per item");
    synth_cmd->add_option("--trend-strength", synth.trend_strength);
    synth_cmd->add_option("--seed", synth.rng_seed);
    synth_cmd->add_option("--out-dir", synth_out);

    // train
    TrainConfig train;
    std::string interactions, features, feature_names, model_out = "model.frnk", mode = "visual";
    auto* train_cmd = app.add_subcommand("train", "Fit a model by pairwise SGD");
    train_cmd->add_option("--interactions", interactions)->required();
    train_cmd->add_option("--features", features);
    train_cmd->add_option("--feature-names", feature_names);
    train_cmd->add_option("--mode", mode)->check(CLI::IsMember({"mf", "visual", "temporal"}));
    train_cmd->add_option("--k", train.K);
    train_cmd->add_option("--kvis", train.K_vis);
    train_cmd->add_option("--lr", train.learning_rate);
    train_cmd->add_option("--lambda-theta", train.lambda_theta);
    train_cmd->add_option("--lambda-latent", train.lambda_latent);
    train_cmd->add_option("--lambda-bias", train.lambda_bias);
    train_cmd->add_option("--lambda-embed", train.lambda_embed);
    train_cmd->add_option("--epochs-n", train.epoch_count, "Number of temporal epochs");
    train_cmd->add_option("--refinement", train.refinement, "When temporal boundaries move")
        ->transform(CLI::CheckedTransformer(std::map<std::string, BoundaryRefinement>{
            {"on_plateau", BoundaryRefinement::OnPlateau}, {"every_sweep", BoundaryRefinement::EverySweep}}));
    train_cmd->add_option("--max-sweeps", train.max_sweeps);
    train_cmd->add_option("--patience", train.patience);
    train_cmd->add_option("--seed", train.rng_seed);
    train_cmd->add_option("--out", model_out);

    // evaluate
    std::string model_path, setting = "all", scorer_kind = "model";
    EvalConfig eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Leave-one-out AUC of a model or baseline");
    eval_cmd->add_option("--model", model_path);
    eval_cmd->add_option("--interactions", interactions)->required();
    eval_cmd->add_option("--features", features);
    eval_cmd->add_option("--feature-names", feature_names);
    eval_cmd->add_option("--setting", setting)->check(CLI::IsMember({"all", "cold"}));
    eval_cmd->add_option("--neg-samples", eval.negative_sample_size);
    eval_cmd->add_option("--cold-threshold", eval.cold_threshold);
    eval_cmd->add_option("--scorer", scorer_kind)->check(CLI::IsMember({"model", "rand", "pop"}));
    eval_cmd->add_option("--seed", eval.rng_seed, "Must match the seed used for training");

    // trends
    std::size_t top_features = 10;
    std::string trends_out = "trends.json";
    bool with_drift = false;
    auto* trends_cmd = app.add_subcommand("trends", "Per-feature influence across learned epochs");
    trends_cmd->add_option("--model", model_path)->required();
    trends_cmd->add_option("--features", features)->required();
    trends_cmd->add_option("--feature-names", feature_names);
    trends_cmd->add_option("--top-features", top_features);
    trends_cmd->add_option("--out", trends_out);
    trends_cmd->add_flag("--with-drift", with_drift, "Add drift components to the influence score");

    // serve
    ServiceOptions serve_opts;
    std::string item_meta, static_dir, host = "0.0.0.0", snapshot;
    long long ttl = 3600;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP+JSON interactive recommendation service");
    serve_cmd->add_option("--model", model_path)->required();
    serve_cmd->add_option("--features", features)->required();
    serve_cmd->add_option("--feature-names", feature_names);
    serve_cmd->add_option("--item-meta", item_meta);
    serve_cmd->add_option("--interactions", interactions, "Used to hide each user's seen items");
    serve_cmd->add_option("--port", serve_opts.port);
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--static", static_dir);
    serve_cmd->add_option("--snapshot", snapshot, "Session snapshot file loaded at start, written at shutdown");
    serve_cmd->add_option("--session-ttl", ttl, "Seconds");
    serve_cmd->add_option("--cors-origin", serve_opts.cors_origin);
    serve_cmd->add_option("--phi", serve_opts.session.phi);
    serve_cmd->add_option("--phi-prime", serve_opts.session.phi_prime);
    serve_cmd->add_option("--sample-size", serve_opts.session.sample_size);
    serve_cmd->add_option("--seed", serve_opts.session.rng_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            if (shift_time >= 0) synth.taste_shift_time = shift_time;
            const auto data = generate_synthetic(synth);
            write_synthetic(data, synth_out);
            std::cout << nlohmann::json{{"out_dir", synth_out},
                                        {"users", data.data.user_count()},
                                        {"items", data.data.item_count()},
                                        {"interactions", data.data.interactions().size()}}
                             .dump()
                      << '\n';
        } else if (*train_cmd) {
            train.mode = parse_mode(mode);
            const auto data = load_interactions(interactions);
            const auto feats = features_for(data.items(), features, feature_names);
            auto split_rng = make_rng(train.rng_seed, Stream::Split);
            const auto splits = split(data, split_rng);
            const auto result = fit(data, feats, train, splits);
            std::cout << result.report.to_json_lines();
            nlohmann::json manifest{{"train", result.report.header},
                                    {"best_sweep", result.report.best_sweep},
                                    {"split_seed", train.rng_seed},
                                    {"interactions", interactions},
                                    {"features", features}};
            if (result.report.best_val_auc) manifest["best_val_auc"] = *result.report.best_val_auc;
            save_checkpoint(result.params, model_out, manifest);
        } else if (*eval_cmd) {
            eval.setting = parse_setting(setting);
            const auto data = load_interactions(interactions);
            auto split_rng = make_rng(eval.rng_seed, Stream::Split);
            const auto splits = split(data, split_rng);
            std::unique_ptr<Scorer> scorer;
            std::optional<ModelParams> params;
            FeatureMatrix feats;
            if (scorer_kind == "model") {
                if (model_path.empty()) throw Error(ErrorCode::InvalidArgument, "--model is required for --scorer model");
                params = load_checkpoint(model_path);
                if (!(params->users == data.users()) || !(params->items == data.items())) {
                    throw Error(ErrorCode::ShapeMismatch, "checkpoint id tables do not match the interaction file");
                }
                feats = features_for(data.items(), params->F > 0 ? features : std::string(), feature_names);
                scorer = std::make_unique<ModelScorer>(*params, feats);
            } else {
                scorer = baseline_scorer(parse_baseline(scorer_kind), splits,
                                         splitmix64(eval.rng_seed ^ static_cast<std::uint64_t>(Stream::Baseline)));
            }
            const auto r = auc(*scorer, splits, data, eval);
            std::cout << nlohmann::json{{"auc", r.auc},
                                        {"n_users", r.n_users},
                                        {"n_pairs", r.n_pairs},
                                        {"setting", setting_name(r.setting)},
                                        {"scorer", scorer_kind}}
                             .dump()
                      << '\n';
        } else if (*trends_cmd) {
            const auto params = load_checkpoint(model_path);
            const auto feats = load_features(features, feature_names.empty() ? std::nullopt
                                                                             : std::optional<fs::path>(feature_names),
                                             params.items);
            const auto series = top_trending(top_features, params, feats.names, {with_drift});
            nlohmann::json out = nlohmann::json::array();
            for (const auto& s : series) {
                auto j = s.to_json();
                nlohmann::json ex = nlohmann::json::array();
                for (const auto& e : top_items_for_feature(s.feature_index, feats, 4)) {
                    ex.push_back({{"item_id", params.items.name(e.item)}, {"value", e.value}});
                }
                j["exemplars"] = std::move(ex);
                out.push_back(std::move(j));
            }
            std::ofstream(trends_out) << nlohmann::json{{"series", out}, {"drift_included", with_drift}}.dump(2) << '\n';
            fs::path csv = trends_out;
            csv.replace_extension(".csv");
            std::ofstream(csv) << trends_csv(series);
            std::cout << nlohmann::json{{"json", trends_out}, {"csv", csv.string()}, {"series", series.size()}}.dump()
                      << '\n';
        } else if (*serve_cmd) {
            auto params = load_checkpoint(model_path);
            auto feats = load_features(features, feature_names.empty() ? std::nullopt
                                                                       : std::optional<fs::path>(feature_names),
                                       params.items);
            std::vector<std::vector<ItemIdx>> seen;
            if (!interactions.empty()) seen = seen_items(load_interactions(interactions), params);
            auto meta = item_meta.empty() ? std::unordered_map<std::string, ItemMeta>{} : load_item_meta(item_meta);
            serve_opts.session_ttl = std::chrono::seconds(ttl);
            if (!static_dir.empty()) serve_opts.static_dir = static_dir;
            if (!snapshot.empty()) serve_opts.snapshot_path = snapshot;
            RecommenderService service(std::move(params), std::move(feats), std::move(meta), std::move(seen),
                                       serve_opts);
            if (serve_opts.snapshot_path) service.load_snapshot(*serve_opts.snapshot_path);
            httplib::Server server;
            service.mount(server);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << host << ":" << serve_opts.port << '\n';
            if (!server.listen(host, serve_opts.port)) throw Error(ErrorCode::Io, "cannot bind port");
            if (serve_opts.snapshot_path) service.save_snapshot(*serve_opts.snapshot_path);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
