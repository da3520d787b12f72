#include "vrstc/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "vrstc/checkpoint.hpp"
#include "vrstc/error.hpp"
#include "vrstc/log.hpp"
#include "vrstc/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vrstc::cli {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
    }
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) {
        throw Error(ErrorKind::io, what + " not found: " + path.string());
    }
}

// JSONL writer that also logs a line every `every` records.
class MetricsFile {
public:
    MetricsFile(const fs::path& path, std::string label, int every = 50)
        : out_(path), label_(std::move(label)), every_(every) {
        if (!out_) throw Error(ErrorKind::io, "cannot write " + path.string());
    }

    training::MetricsSink sink() {
        return [this](const json& record) {
            out_ << record.dump() << '\n';
            if (count_++ % every_ == 0) log_info(label_ + " " + record.dump());
        };
    }

private:
    std::ofstream out_;
    std::string label_;
    int every_;
    int count_ = 0;
};

RunManifest make_manifest(const std::string& command, const PipelineConfig& config) {
    RunManifest m;
    m.command = command;
    m.config = config;
    m.seed = config.seed;
    m.timestamp = utc_timestamp();
    return m;
}

std::vector<OcclusionRecord> read_occlusions(const fs::path& path) {
    require_file(path, "occlusion records");
    try {
        return occlusions_from_json(read_json_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
}

json retrieval_report(const reid::RetrievalMetrics& metrics) { return reid::metrics_report(metrics); }

} // namespace

json RunManifest::to_json() const {
    return {{"command", command}, {"config", config},       {"seed", seed},
            {"inputs", inputs},   {"outputs", outputs},     {"checkpoints", checkpoints},
            {"timestamp", timestamp}};
}

void RunManifest::write(const fs::path& dir) const { write_json_file(dir / "run_manifest.json", to_json()); }

DatasetManifest run_synth(const PipelineConfig& config, const fs::path& out) {
    prepare_dir(out);
    auto manifest = generate_synthetic_dataset(config.synth, out);
    auto run = make_manifest("synth", config);
    run.outputs["dataset"] = (out / "manifest.json").string();
    run.write(out);
    log_info("synth: " + std::to_string(manifest.tracklets.size()) + " tracklets, " +
             std::to_string(manifest.occlusions.size()) + " occluded regions");
    return manifest;
}

void run_pretrain(const PipelineConfig& config, const fs::path& data, const fs::path& out) {
    prepare_dir(out);
    const auto dataset = load_dataset(data);
    MetricsFile metrics(out / "metrics.jsonl", "pretrain");
    auto result = training::pretrain_reid(dataset, config.pretrain, metrics.sink());
    const auto checkpoint = out / "reid.ckpt";
    save_reid_checkpoint(checkpoint, result.checkpoint, {{"stage", "pretrain"}});

    auto run = make_manifest("pretrain", config);
    run.inputs["data"] = data.string();
    run.outputs["checkpoint"] = checkpoint.string();
    run.outputs["metrics"] = (out / "metrics.jsonl").string();
    run.checkpoints["reid.ckpt"] = file_digest(checkpoint);
    run.write(out);
    if (!result.history.empty()) {
        log_info("pretrain: final accuracy " + std::to_string(result.history.back().accuracy));
    }
}

namespace {

// Retrieval with frames below tau dropped, at tau = 0, the working tau and 1.
json discard_sweep(const VideoDataset& dataset, reid::ReidNet& model, const occlusion::ScoreTables& tables,
                   double tau) {
    json sweep = json::array();
    for (double t : {0.0, tau, 1.0}) {
        const auto m = training::evaluate_with_discard(dataset, model, tables, t);
        sweep.push_back({{"tau", t}, {"rank1", m.rank(1)}, {"mAP", m.map}});
    }
    return sweep;
}

} // namespace

ScoreOutcome run_score(const PipelineConfig& config, const fs::path& data, const fs::path& checkpoint,
                       const fs::path& out) {
    prepare_dir(out);
    require_file(checkpoint, "checkpoint");
    const auto dataset = load_dataset(data);
    auto loaded = load_reid_checkpoint(checkpoint);
    const auto tables = occlusion::score_dataset(dataset, occlusion::backbone_extractor(loaded.model));

    ScoreOutcome outcome;
    outcome.tau = config.tau;
    json report = json::object();
    const auto& truth = dataset.occlusions();
    if (!truth.empty()) {
        outcome.auc = occlusion::detection_auc(tables, truth);
        report["auc"] = *outcome.auc;
    }
    if (config.calibrate_tau) {
        if (truth.empty()) {
            throw Error(ErrorKind::data, "tau calibration needs ground-truth occlusion records");
        }
        occlusion::ScoreTables train_tables;
        std::vector<OcclusionRecord> train_truth;
        for (auto i : dataset.indices(Split::train)) {
            const int id = dataset.tracklets()[i].id;
            train_tables[id] = tables.at(id);
        }
        for (const auto& r : truth) {
            if (train_tables.contains(r.tracklet)) train_truth.push_back(r);
        }
        const auto calibration = occlusion::calibrate_tau(train_tables, train_truth, occlusion::default_tau_grid());
        outcome.tau = calibration.tau;
        report["calibration"] = {{"tau", calibration.tau},
                                 {"precision", calibration.quality.precision},
                                 {"recall", calibration.quality.recall},
                                 {"f1", calibration.quality.f1}};
    }
    report["tau"] = outcome.tau;
    if (!truth.empty()) {
        const auto q = occlusion::detection_quality(tables, truth, outcome.tau);
        report["detection"] = {{"precision", q.precision}, {"recall", q.recall}, {"f1", q.f1}};
    }

    if (!dataset.indices(Split::query).empty() && !dataset.indices(Split::gallery).empty()) {
        report["discard_sweep"] = discard_sweep(dataset, loaded.model, tables, outcome.tau);
    }

    const auto flagged = occlusion::flag_dataset(tables, outcome.tau);
    report["flagged_regions"] = flagged.size();
    write_json_file(out / "scores.json", occlusion::scores_to_json(tables), -1);
    write_json_file(out / "occlusions.json", occlusions_to_json(flagged), -1);
    write_json_file(out / "score_report.json", report);
    outcome.report = report;

    auto run = make_manifest("score", config);
    run.config["tau"] = outcome.tau;
    run.inputs = {{"data", data.string()}, {"checkpoint", checkpoint.string()}};
    run.outputs = {{"scores", (out / "scores.json").string()},
                   {"occlusions", (out / "occlusions.json").string()},
                   {"report", (out / "score_report.json").string()}};
    run.checkpoints["reid.ckpt"] = file_digest(checkpoint);
    run.write(out);
    log_info("score: tau " + std::to_string(outcome.tau) + ", " + std::to_string(flagged.size()) + " flagged");
    return outcome;
}

json run_train_stcnet(const PipelineConfig& config, const fs::path& data, const fs::path& guider_path,
                      const fs::path& occlusions, const fs::path& out) {
    prepare_dir(out);
    const auto dataset = load_dataset(data);
    const auto flagged = read_occlusions(occlusions);
    stcnet::Guider guider{nullptr};
    if (config.stcnet.flags.guider) {
        require_file(guider_path, "guider checkpoint");
        guider = stcnet::Guider(load_reid_checkpoint(guider_path).model);
    }
    MetricsFile metrics(out / "metrics.jsonl", "train-stcnet");
    auto result = training::train_stcnet(dataset, flagged, guider, config.stcnet, metrics.sink());
    const auto checkpoint = out / "stcnet.ckpt";
    save_stcnet_checkpoint(checkpoint, result.bundle, {{"flags", config.stcnet.flags}});

    json summary = {{"steps", result.log.size()},
                    {"heldout_l1_initial", result.heldout_l1_initial},
                    {"heldout_l1_final", result.heldout_l1_final},
                    {"guider_checksum_before", result.guider_checksum_before},
                    {"guider_checksum_after", result.guider_checksum_after}};
    write_json_file(out / "summary.json", summary);

    auto run = make_manifest("train-stcnet", config);
    run.inputs = {{"data", data.string()}, {"occlusions", occlusions.string()}};
    if (guider) {
        run.inputs["guider"] = guider_path.string();
        run.checkpoints["guider"] = file_digest(guider_path);
    }
    run.outputs = {{"checkpoint", checkpoint.string()}, {"metrics", (out / "metrics.jsonl").string()}};
    run.checkpoints["stcnet.ckpt"] = file_digest(checkpoint);
    run.write(out);
    log_info("train-stcnet: held-out L1 " + std::to_string(result.heldout_l1_initial) + " -> " +
             std::to_string(result.heldout_l1_final));
    return summary;
}

void run_complete(const PipelineConfig& config, const fs::path& data, const fs::path& stcnet_path,
                  const fs::path& occlusions, const fs::path& out) {
    require_file(stcnet_path, "STCnet checkpoint");
    if (fs::exists(out) && fs::equivalent(out, data)) {
        throw Error(ErrorKind::usage, "completed dataset must not overwrite its source");
    }
    prepare_dir(out);
    const auto dataset = load_dataset(data);
    const auto flagged = read_occlusions(occlusions);
    auto bundle = load_stcnet_checkpoint(stcnet_path);
    const auto digest = file_digest(stcnet_path);
    training::complete_dataset(dataset, flagged, bundle, out, digest);

    auto run = make_manifest("complete", config);
    run.inputs = {{"data", data.string()}, {"stcnet", stcnet_path.string()}, {"occlusions", occlusions.string()}};
    run.outputs["dataset"] = (out / "manifest.json").string();
    run.checkpoints["stcnet.ckpt"] = digest;
    run.write(out);
    log_info("complete: " + std::to_string(flagged.size()) + " regions rewritten");
}

void run_train_reid(const PipelineConfig& config, const fs::path& data, const fs::path& out,
                    const std::optional<fs::path>& init) {
    prepare_dir(out);
    const auto dataset = load_dataset(data);
    std::optional<ReidCheckpoint> start;
    if (init) {
        require_file(*init, "initial checkpoint");
        start = load_reid_checkpoint(*init);
    }
    MetricsFile metrics(out / "metrics.jsonl", "train-reid");
    auto result = training::train_reid(dataset, config.reid, metrics.sink(), start ? &*start : nullptr);
    const auto checkpoint = out / "reid.ckpt";
    save_reid_checkpoint(checkpoint, result.checkpoint, {{"stage", "train-reid"}});

    auto run = make_manifest("train-reid", config);
    run.inputs["data"] = data.string();
    if (init) {
        run.inputs["init"] = init->string();
        run.checkpoints["init"] = file_digest(*init);
    }
    run.outputs = {{"checkpoint", checkpoint.string()}, {"metrics", (out / "metrics.jsonl").string()}};
    run.checkpoints["reid.ckpt"] = file_digest(checkpoint);
    run.write(out);
}

std::string format_report(const json& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    for (const char* key : {"rank1", "rank5", "rank10", "rank20", "mAP"}) {
        if (report.contains(key)) out << key << ": " << report.at(key).get<double>() << '\n';
    }
    out << "queries: " << report.value("evaluated_queries", 0) << " evaluated, "
        << report.value("excluded_queries", 0) << " excluded\n";
    return out.str();
}

namespace {

json finish_evaluation(const reid::RetrievalMetrics& metrics, const fs::path& out, RunManifest run) {
    auto report = retrieval_report(metrics);
    write_json_file(out / "report.json", report);
    std::ofstream(out / "report.txt") << format_report(report);
    run.outputs = {{"report", (out / "report.json").string()}, {"text", (out / "report.txt").string()}};
    run.write(out);
    return report;
}

training::EmbeddingSet embeddings_from_json(const json& items) {
    training::EmbeddingSet set;
    std::vector<torch::Tensor> rows;
    for (const auto& item : items) {
        const auto values = item.at("vector").get<std::vector<double>>();
        rows.push_back(torch::tensor(values, torch::kFloat64));
        set.identities.push_back(item.at("identity").get<int>());
        set.cameras.push_back(item.value("camera", 0));
        set.tracklets.push_back(item.value("tracklet", static_cast<int>(set.tracklets.size())));
    }
    if (rows.empty()) {
        throw Error(ErrorKind::data, "embedding list is empty");
    }
    for (const auto& r : rows) {
        if (r.size(0) != rows[0].size(0)) throw Error(ErrorKind::shape, "embedding dimensions differ");
    }
    set.vectors = torch::stack(rows);
    return set;
}

} // namespace

json run_evaluate(const fs::path& data, const fs::path& checkpoint, const fs::path& out) {
    prepare_dir(out);
    require_file(checkpoint, "checkpoint");
    const auto dataset = load_dataset(data);
    auto loaded = load_reid_checkpoint(checkpoint);
    const auto metrics = training::evaluate_reid(dataset, loaded.model);
    RunManifest run;
    run.command = "evaluate";
    run.config = json::object();
    run.timestamp = utc_timestamp();
    run.inputs = {{"data", data.string()}, {"checkpoint", checkpoint.string()}};
    run.checkpoints["reid.ckpt"] = file_digest(checkpoint);
    return finish_evaluation(metrics, out, run);
}

json run_evaluate_embeddings(const fs::path& embeddings, const fs::path& out) {
    prepare_dir(out);
    require_file(embeddings, "embedding file");
    const auto j = read_json_file(embeddings);
    training::EmbeddingSet queries, gallery;
    bool cross_camera = true;
    try {
        queries = embeddings_from_json(j.at("query"));
        gallery = embeddings_from_json(j.at("gallery"));
        cross_camera = j.value("cross_camera", true);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, embeddings.string() + ": " + e.what());
    }
    if (queries.vectors.size(1) != gallery.vectors.size(1)) {
        throw Error(ErrorKind::shape, "query and gallery embedding dimensions differ");
    }
    const auto metrics = training::evaluate_embeddings(queries, gallery, cross_camera);
    RunManifest run;
    run.command = "evaluate";
    run.config = {{"cross_camera", cross_camera}};
    run.timestamp = utc_timestamp();
    run.inputs["embeddings"] = embeddings.string();
    return finish_evaluation(metrics, out, run);
}

json run_pipeline(const PipelineConfig& config, const fs::path& out) {
    config.validate();
    prepare_dir(out);
    using clock = std::chrono::steady_clock;
    json timing = json::object();
    auto timed = [&](const std::string& name, auto&& stage) {
        const auto start = clock::now();
        stage();
        timing[name] = std::chrono::duration<double>(clock::now() - start).count();
    };

    const auto data = out / "data";
    const auto completed = out / "completed";
    json report = json::object();

    timed("synth", [&] { run_synth(config, data); });
    timed("pretrain", [&] { run_pretrain(config, data, out / "pretrain"); });
    const auto pretrained = out / "pretrain" / "reid.ckpt";
    ScoreOutcome score;
    timed("score", [&] { score = run_score(config, data, pretrained, out / "score"); });
    report["occlusion"] = score.report;

    PipelineConfig stage = config;
    stage.tau = score.tau;
    const auto occlusions = out / "score" / "occlusions.json";
    timed("train-stcnet", [&] {
        report["stcnet"] = run_train_stcnet(stage, data, pretrained, occlusions, out / "stcnet");
    });
    timed("complete", [&] { run_complete(stage, data, out / "stcnet" / "stcnet.ckpt", occlusions, completed); });

    const std::optional<fs::path> init = config.finetune ? std::optional(pretrained) : std::nullopt;
    struct Variant {
        const char* name;
        bool nonlocal;
        fs::path data;
    };
    json reid_reports = json::object();
    for (const Variant& v : {Variant{"baseline_raw", false, data}, Variant{"nonlocal_raw", true, data},
                             Variant{"nonlocal_completed", true, completed}}) {
        PipelineConfig variant = stage;
        variant.reid.nonlocal = v.nonlocal;
        const auto dir = out / v.name;
        timed(std::string("train-reid/") + v.name, [&] { run_train_reid(variant, v.data, dir, init); });
        timed(std::string("evaluate/") + v.name, [&] { reid_reports[v.name] = run_evaluate(v.data, dir / "reid.ckpt", dir); });
    }
    report["reid"] = reid_reports;
    report["occlusion"]["guider_discard_sweep"] = report["occlusion"].value("discard_sweep", json::array());
    timed("discard-sweep", [&] {
        const auto dataset = load_dataset(data);
        auto baseline = load_reid_checkpoint(out / "baseline_raw" / "reid.ckpt");
        const auto tables = occlusion::scores_from_json(read_json_file(out / "score" / "scores.json"));
        report["occlusion"]["discard_sweep"] = discard_sweep(dataset, baseline.model, tables, score.tau);
    });

    write_json_file(out / "report.json", report);
    {
        std::ofstream text(out / "report.txt");
        for (const auto& [name, r] : reid_reports.items()) text << "[" << name << "]\n" << format_report(r);
    }
    write_json_file(out / "timing.json", timing);

    auto run = make_manifest("pipeline", config);
    run.outputs = {{"report", (out / "report.json").string()}, {"timing", (out / "timing.json").string()}};
    for (const auto& name : {"pretrain/reid.ckpt", "stcnet/stcnet.ckpt", "baseline_raw/reid.ckpt",
                             "nonlocal_raw/reid.ckpt", "nonlocal_completed/reid.ckpt"}) {
        run.checkpoints[name] = file_digest(out / name);
    }
    run.write(out);
    return report;
}

// ---------------------------------------------------------------------------

namespace {

struct CommonOptions {
    std::string config_file;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::string profile;
    std::string out;
    std::string data;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_data, bool needs_out = true) {
    app->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Random seed for every stage");
    app->add_option("--profile", o.profile, "Model profile")->check(CLI::IsMember({"tiny", "paper"}));
    auto* out = app->add_option("--out", o.out, "Output directory");
    if (needs_out) out->required();
    if (needs_data) app->add_option("--data", o.data, "Dataset directory")->required();
}

PipelineConfig resolve(const CommonOptions& o) {
    auto config = PipelineConfig::defaults();
    if (!o.config_file.empty()) from_json(read_json_file(o.config_file), config);
    if (o.seed) config.apply_seed(*o.seed);
    if (!o.profile.empty()) config.apply_profile(reid::profile_from_string(o.profile));
    if (o.tau) {
        config.tau = *o.tau;
        config.calibrate_tau = false;
    }
    config.validate();
    return config;
}

} // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Occlusion-robust video person re-identification"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("--quiet", quiet, "Suppress progress logging");

    CommonOptions o;
    std::string checkpoint, guider, occlusions, stcnet_path, finetune, embeddings, scores, completed, preset,
        variant;
    bool calibrate = false, no_temporal = false, no_local = false, no_global = false, no_guider = false;
    std::optional<bool> nonlocal;
    std::optional<int> steps, epochs;

    auto* synth = app.add_subcommand("synth", "Generate the synthetic occluded dataset");
    add_common(synth, o, false);

    auto* pretrain = app.add_subcommand("pretrain", "Train the guider / feature backbone");
    add_common(pretrain, o, true);
    pretrain->add_option("--epochs", epochs);

    auto* score = app.add_subcommand("score", "Score regions and flag occlusions");
    add_common(score, o, true);
    score->add_option("--checkpoint", checkpoint, "Pretrained re-ID checkpoint")->required();
    score->add_option("--tau", o.tau, "Occlusion threshold");
    score->add_flag("--calibrate", calibrate, "Pick tau on the training split");

    auto* train_stcnet = app.add_subcommand("train-stcnet", "Train the completion network");
    add_common(train_stcnet, o, true);
    train_stcnet->add_option("--guider", guider, "Pretrained re-ID checkpoint used as the ID guider");
    train_stcnet->add_option("--occlusions", occlusions, "Flagged regions from `score`")->required();
    train_stcnet->add_option("--preset", preset, "Ablation preset")
        ->check(CLI::IsMember({"spa", "spa+tem", "spa+ae", "spa+tae", "spa+tem+ld", "spa+tem+ld+gd", "full"}));
    train_stcnet->add_flag("--no-temporal", no_temporal);
    train_stcnet->add_option("--variant", variant)->check(CLI::IsMember({"attention", "AE", "TAE"}));
    train_stcnet->add_flag("--no-local-disc", no_local);
    train_stcnet->add_flag("--no-global-disc", no_global);
    train_stcnet->add_flag("--no-guider", no_guider);
    train_stcnet->add_option("--steps", steps);

    auto* complete = app.add_subcommand("complete", "Rewrite flagged regions with STCnet");
    add_common(complete, o, true);
    complete->add_option("--stcnet", stcnet_path, "STCnet checkpoint")->required();
    complete->add_option("--occlusions", occlusions, "Flagged regions from `score`")->required();

    auto* train_reid = app.add_subcommand("train-reid", "Train the final re-ID network");
    add_common(train_reid, o, true);
    train_reid->add_option("--nonlocal", nonlocal, "Insert non-local blocks (true/false)");
    train_reid->add_option("--finetune", finetune, "Start from this checkpoint");
    train_reid->add_option("--epochs", epochs);

    auto* evaluate = app.add_subcommand("evaluate", "Report CMC and mAP");
    add_common(evaluate, o, false);
    evaluate->add_option("--data", o.data, "Dataset directory");
    auto* ckpt_opt = evaluate->add_option("--checkpoint", checkpoint, "Re-ID checkpoint");
    auto* emb_opt = evaluate->add_option("--embeddings", embeddings, "Precomputed embeddings (JSON)");
    ckpt_opt->excludes(emb_opt);

    auto* vis = app.add_subcommand("visualize", "Draw score strips and completion grids");
    add_common(vis, o, true);
    vis->add_option("--scores", scores, "scores.json from `score`")->required();
    vis->add_option("--tau", o.tau, "Threshold for the flag marks");
    vis->add_option("--completed", completed, "Completed dataset directory");
    vis->add_option("--occlusions", occlusions, "Flagged regions to show in the grid");

    auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");
    add_common(pipeline, o, false);
    pipeline->add_option("--tau", o.tau, "Fixed occlusion threshold (skips calibration)");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorKind::usage, e.what());
        }
        const bool was_verbose = verbose_logging();
        verbose_logging() = !quiet;
        struct Restore {
            bool value;
            ~Restore() { verbose_logging() = value; }
        } restore{was_verbose};

        auto config = resolve(o);
        if (epochs) {
            config.pretrain.epochs = *epochs;
            config.reid.epochs = *epochs;
        }
        const fs::path out = o.out;
        const fs::path data = o.data;

        if (*synth) {
            run_synth(config, out);
        } else if (*pretrain) {
            run_pretrain(config, data, out);
        } else if (*score) {
            if (calibrate) config.calibrate_tau = true;
            run_score(config, data, checkpoint, out);
        } else if (*train_stcnet) {
            if (!preset.empty()) config.stcnet.flags = training::AblationFlags::preset(preset);
            auto& f = config.stcnet.flags;
            if (no_temporal) f.temporal = false;
            if (!variant.empty()) f.variant = stcnet::temporal_variant_from_string(variant);
            if (no_local) f.local_disc = false;
            if (no_global) f.global_disc = false;
            if (no_guider) f.guider = false;
            if (steps) config.stcnet.steps = *steps;
            config.stcnet.validate();
            if (f.guider && guider.empty()) {
                throw Error(ErrorKind::usage, "--guider is required unless --no-guider is given");
            }
            run_train_stcnet(config, data, guider, occlusions, out);
        } else if (*complete) {
            run_complete(config, data, stcnet_path, occlusions, out);
        } else if (*train_reid) {
            if (nonlocal) config.reid.nonlocal = *nonlocal;
            std::optional<fs::path> init;
            if (!finetune.empty()) init = fs::path(finetune);
            run_train_reid(config, data, out, init);
        } else if (*evaluate) {
            json report;
            if (!embeddings.empty()) {
                report = run_evaluate_embeddings(embeddings, out);
            } else {
                if (checkpoint.empty() || o.data.empty()) {
                    throw Error(ErrorKind::usage, "evaluate needs --data and --checkpoint, or --embeddings");
                }
                report = run_evaluate(data, checkpoint, out);
            }
            std::cout << format_report(report);
        } else if (*vis) {
            const auto raw = load_dataset(data);
            const auto tables = occlusion::scores_from_json(read_json_file(scores));
            std::optional<VideoDataset> filled;
            if (!completed.empty()) filled.emplace(load_dataset(completed));
            const auto flagged = occlusions.empty() ? occlusion::flag_dataset(tables, config.tau)
                                                    : read_occlusions(occlusions);
            prepare_dir(out);
            const auto summary = visualize::write_visualizations(raw, tables, config.tau,
                                                                 filled ? &*filled : nullptr, flagged, out);
            auto run = make_manifest("visualize", config);
            run.inputs = {{"data", data.string()}, {"scores", scores}};
            if (!completed.empty()) run.inputs["completed"] = completed;
            run.outputs = {{"strips", (out / "strips").string()}};
            if (summary.grid_rows > 0) run.outputs["grid"] = (out / "grid.png").string();
            run.write(out);
        } else if (*pipeline) {
            const auto report = run_pipeline(config, out);
            for (const auto& [name, r] : report.at("reid").items()) std::cout << "[" << name << "]\n" << format_report(r);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "vrstc-error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return e.kind() == ErrorKind::usage ? 2 : 1;
    } catch (const c10::Error& e) {
        std::cerr << "vrstc-error: stage: " << e.what_without_backtrace() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "vrstc-error: stage: " << e.what() << '\n';
        return 1;
    }
}

int dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"vrstc"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data());
}

} // namespace vrstc::cli
