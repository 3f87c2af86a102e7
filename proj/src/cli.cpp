#include "boxprompt/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "boxprompt/compose.hpp"
#include "boxprompt/evalkit.hpp"
#include "boxprompt/mask_ops.hpp"
#include "boxprompt/pipeline.hpp"
#include "boxprompt/segmenter.hpp"
#include "boxprompt/storage.hpp"

namespace boxprompt {

std::string format_fraction(double value) {
    std::string s = fmt::format("{}", value);
    if (s.find_first_of(".eninf") == std::string::npos) s += ".0";
    return s;
}

namespace {

// --- shared helpers --------------------------------------------------------------

/// .npy is read as a probability map; anything else as an 8-bit PNG scaled by 1/255.
ProbabilityMap read_probability_input(const fs::path& path) {
    if (path.extension() == ".npy") return read_probmap(path);
    const Image image = read_image(path);
    ProbabilityMap map(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) map[i] = static_cast<float>(image[i]) / 255.0f;
    return map;
}

std::string format_box(const std::optional<BoundingBox>& box) {
    if (!box) return "empty";
    return fmt::format("{} {} {} {}", box->x_min, box->y_min, box->x_max, box->y_max);
}

Connectivity to_connectivity(int value) { return value == 8 ? Connectivity::Eight : Connectivity::Four; }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string sanitize(std::string name) {
    std::replace(name.begin(), name.end(), '/', '_');
    return name;
}

// --- option structs --------------------------------------------------------------

struct ThresholdArgs {
    std::string in, out;
    double theta = 0.75;
};

struct FilterArgs {
    std::string in, out;
    double theta = 0.75;
    int factor = 4;
    int connectivity = 4;
};

struct BboxArgs {
    std::string in;
    int factor = 1;
    int connectivity = 4;
    bool largest = false;
};

struct MergeArgs {
    std::vector<std::string> tiles;
    std::vector<std::string> boxes;
    std::string out, manifest, id = "composite-0000";
};

struct SplitArgs {
    std::string in, manifest, composite_id, out_dir;
};

struct DiceArgs {
    std::string pred, gt;
};

/// Flags shared by pipeline and sweep; unset flags leave config values alone.
struct ConfigFlags {
    std::string config;
    std::optional<std::string> dataset, source, targets, box_source, fallback;
    std::optional<double> theta1, theta2;
    std::optional<int> factor, connectivity, tile_size, jobs;

    /// Sweep varies the source and theta2 itself, so it attaches without them.
    void attach(CLI::App* app, bool per_run = true) {
        app->add_option("--config", config, "JSON config file (default: $" + std::string(kConfigEnvVar) + ")");
        app->add_option("--dataset", dataset, "Dataset root directory");
        if (per_run) {
            app->add_option("--source", source, "Source domain label");
            app->add_option("--theta2", theta2, "Segmenter confidence threshold")->check(CLI::Range(0.0, 1.0));
        }
        app->add_option("--targets", targets, "Comma-separated target domains (default: all but source)");
        app->add_option("--theta1", theta1, "Coarse-map confidence threshold")->check(CLI::Range(0.0, 1.0));
        app->add_option("--factor", factor, "Downscale factor for filtering")->check(CLI::PositiveNumber);
        app->add_option("--connectivity", connectivity, "4 or 8")->check(CLI::IsMember({4, 8}));
        app->add_option("--tile-size", tile_size, "Tile edge in pixels")->check(CLI::PositiveNumber);
        app->add_option("--box-source", box_source, "filtered|coarse_raw|gt|full_image")
            ->check(CLI::IsMember({"filtered", "coarse_raw", "gt", "full_image"}));
        app->add_option("--fallback", fallback, "full_image_box|skip_case")
            ->check(CLI::IsMember({"full_image_box", "skip_case"}));
        app->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    }

    /// defaults < config file < flags
    PipelineConfig resolve() const {
        PipelineConfig cfg;
        apply(cfg);
        cfg.validate();  // flags alone, before any file is read

        std::string path = config;
        if (path.empty()) {
            if (const char* env = std::getenv(kConfigEnvVar)) path = env;
        }
        if (!path.empty()) {
            cfg = read_config(path);
            apply(cfg);
        }
        cfg.validate();
        return cfg;
    }

private:
    void apply(PipelineConfig& cfg) const {
        if (dataset) cfg.dataset_root = *dataset;
        if (source) cfg.source_domain = *source;
        if (targets) cfg.target_domains = split_list(*targets);
        if (box_source) cfg.box_source = parse_box_source(*box_source);
        if (fallback) cfg.empty_mask_fallback = parse_empty_mask_fallback(*fallback);
        if (theta1) cfg.theta1 = *theta1;
        if (theta2) cfg.theta2 = *theta2;
        if (factor) cfg.downscale_factor = *factor;
        if (connectivity) cfg.connectivity = to_connectivity(*connectivity);
        if (tile_size) cfg.tile_size = *tile_size;
        if (jobs) cfg.jobs = *jobs;
    }
};

struct PipelineArgs {
    ConfigFlags flags;
    std::string segmenter = "mock-perfect";
    std::string phase;
    std::string out = "out";
    std::string predictions;
    std::string manifest;
    std::uint64_t seed = 0;
    bool save_predictions = false;
};

struct SweepArgs {
    ConfigFlags flags;
    std::string thetas = "0.5,0.75,0.9";
    std::string sources;
    std::string segmenter = "mock-noisy";
    std::string out = "sweep";
    std::uint64_t seed = 0;
};

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string format = "text";
    std::string out;
};

// --- subcommands -----------------------------------------------------------------

int cmd_threshold(const ThresholdArgs& a, std::ostream&) {
    write_mask(a.out, threshold(read_probability_input(a.in), a.theta));
    return kExitOk;
}

int cmd_filter(const FilterArgs& a, std::ostream& out) {
    const BinaryMask mask = threshold(read_probability_input(a.in), a.theta);
    const FilterResult result = filter_largest_downscaled(mask, a.factor, to_connectivity(a.connectivity));
    write_mask(a.out, result.kept);
    out << format_box(result.box) << '\n';
    return kExitOk;
}

int cmd_bbox(const BboxArgs& a, std::ostream& out) {
    const BinaryMask mask = read_mask(a.in);
    std::optional<BoundingBox> box;
    if (a.largest) {
        box = filter_largest_downscaled(mask, a.factor, to_connectivity(a.connectivity)).box;
    } else if (auto coarse = bbox_from_mask(downscale_mask(mask, a.factor))) {
        box = rescale_bbox(*coarse, a.factor);
    }
    out << format_box(box) << '\n';
    return kExitOk;
}

int cmd_merge(const MergeArgs& a, std::ostream& out) {
    if (a.tiles.empty() || a.tiles.size() > kSlotsPerComposite) {
        throw Error(ErrorKind::InvalidArgument, "merge takes 1 to 4 --tile arguments");
    }
    // "slot:x_min,y_min,x_max,y_max" in tile coordinates
    std::vector<std::vector<BoundingBox>> boxes(a.tiles.size());
    for (const auto& spec : a.boxes) {
        int slot = -1;
        BoundingBox b;
        char sep = 0, c1 = 0, c2 = 0, c3 = 0;
        std::istringstream ss(spec);
        if (!(ss >> slot >> sep >> b.x_min >> c1 >> b.y_min >> c2 >> b.x_max >> c3 >> b.y_max) || sep != ':' ||
            c1 != ',' || c2 != ',' || c3 != ',' || slot < 0 || slot >= static_cast<int>(a.tiles.size())) {
            throw Error(ErrorKind::InvalidArgument, "bad --box '" + spec + "', expected slot:x_min,y_min,x_max,y_max");
        }
        boxes[slot].push_back(b);
    }

    std::vector<TileInput> tiles;
    for (std::size_t i = 0; i < a.tiles.size(); ++i) {
        tiles.push_back({fs::path(a.tiles[i]).stem().string(), read_image(a.tiles[i]), boxes[i]});
    }
    CompositeBatch batch = merge_tiles(tiles);
    batch.id = a.id;
    write_image(a.out, batch.image);

    if (!a.manifest.empty()) {
        PipelinePlan plan;
        plan.tile_size = batch.tile_size;
        plan.composites.push_back({"", batch});
        PromptManifest manifest = manifest_from_plan(plan);
        const fs::path manifest_dir = fs::path(a.manifest).parent_path();
        manifest.composites[0].image =
            fs::absolute(a.out).lexically_relative(fs::absolute(manifest_dir.empty() ? "." : manifest_dir)).string();
        write_manifest(a.manifest, manifest);
    }
    for (int k = 0; k < kSlotsPerComposite; ++k) {
        for (const auto& b : batch.boxes[k]) out << k << ' ' << format_box(b) << '\n';
    }
    return kExitOk;
}

int cmd_split(const SplitArgs& a, std::ostream& out) {
    const PipelinePlan plan = plan_from_manifest(read_manifest(a.manifest));
    if (plan.composites.empty()) {
        throw Error(ErrorKind::InvalidArgument, "manifest has no composites");
    }
    const CompositeBatch* batch = &plan.composites.front().batch;
    if (!a.composite_id.empty()) {
        auto it = std::find_if(plan.composites.begin(), plan.composites.end(),
                               [&](const PlannedComposite& p) { return p.batch.id == a.composite_id; });
        if (it == plan.composites.end()) {
            throw Error(ErrorKind::InvalidArgument, "composite '" + a.composite_id + "' not in manifest");
        }
        batch = &it->batch;
    }
    const fs::path dir(a.out_dir);
    const fs::path in(a.in);
    if (in.extension() == ".npy") {
        for (const auto& t : split_composite(read_probmap(in), batch->slots, batch->tile_size)) {
            const auto path = dir / fmt::format("{}_{}.npy", t.slot_index, sanitize(t.case_id));
            write_probmap(path, t.tile);
            out << path.string() << '\n';
        }
    } else {
        for (const auto& t : split_grid(read_image(in), batch->slots, batch->tile_size)) {
            const auto path = dir / fmt::format("{}_{}.png", t.slot_index, sanitize(t.case_id));
            write_image(path, t.tile);
            out << path.string() << '\n';
        }
    }
    return kExitOk;
}

int cmd_dice(const DiceArgs& a, std::ostream& out) {
    out << format_fraction(dice(read_mask(a.pred), read_mask(a.gt))) << '\n';
    return kExitOk;
}

std::unique_ptr<Segmenter> make_mock(const std::string& kind, const Dataset& dataset, std::uint64_t seed) {
    if (kind == "mock-perfect") return std::make_unique<PerfectMockSegmenter>(dataset.ground_truth());
    if (kind == "mock-noisy") {
        return std::make_unique<NoisyMockSegmenter>(dataset.ground_truth(), NoisySegmenterSpec{.seed = seed});
    }
    throw Error(ErrorKind::InvalidArgument, "unknown mock segmenter '" + kind + "'");
}

void write_plan(const fs::path& out_dir, const PipelinePlan& plan) {
    const PromptManifest manifest = manifest_from_plan(plan);
    for (std::size_t i = 0; i < plan.composites.size(); ++i) {
        write_image(out_dir / manifest.composites[i].image, plan.composites[i].batch.image);
    }
    write_manifest(out_dir / "manifest.json", manifest);
}

int cmd_pipeline(const PipelineArgs& a, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = a.flags.resolve();
    if (cfg.source_domain.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--source (or source_domain in the config) is required");
    }
    const bool external = a.segmenter == "external";
    if (external && a.phase.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--segmenter external needs --phase emit|score");
    }
    if (!external && !a.phase.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--phase only applies to --segmenter external");
    }
    if (cfg.dataset_root.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--dataset (or dataset_root in the config) is required");
    }
    const fs::path out_dir(a.out);
    const Dataset dataset = load_dataset(cfg.dataset_root);

    DiceReport report;
    if (external && a.phase == "emit") {
        const PipelinePlan plan = plan_composites(dataset, cfg);
        write_plan(out_dir, plan);
        out << (out_dir / "manifest.json").string() << '\n';
        err << fmt::format("emitted {} composites; run the adapter, then --phase score\n", plan.composites.size());
        return kExitOk;
    }
    if (external) {
        const fs::path manifest_path = a.manifest.empty() ? out_dir / "manifest.json" : fs::path(a.manifest);
        const PipelinePlan plan = plan_from_manifest(read_manifest(manifest_path));
        cfg.tile_size = plan.tile_size;
        const fs::path pred_dir = a.predictions.empty() ? out_dir / "predictions" : fs::path(a.predictions);
        if (!fs::is_directory(pred_dir)) {
            throw Error(ErrorKind::MissingPredictions, "prediction directory " + pred_dir.string() + " not found");
        }
        PredictionDirSegmenter segmenter(pred_dir);
        report = execute_plan(dataset, plan, cfg, segmenter);
    } else {
        const PipelinePlan plan = plan_composites(dataset, cfg);
        write_plan(out_dir, plan);
        auto segmenter = make_mock(a.segmenter, dataset, a.seed);
        PredictionSink sink;
        if (a.save_predictions) {
            sink = [dir = out_dir / "predictions"](const PlannedComposite& p, const std::vector<ProbabilityMap>& maps) {
                write_predictions(dir, p.batch, maps);
            };
        }
        report = execute_plan(dataset, plan, cfg, *segmenter, sink);
    }
    write_report(out_dir / "report.json", report, ReportFormat::Structured);
    write_report(out_dir / "report.txt", report, ReportFormat::Text);
    out << render_report_table(report);
    return kExitOk;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
    PipelineConfig cfg = a.flags.resolve();
    if (cfg.dataset_root.empty()) {
        throw Error(ErrorKind::InvalidArgument, "--dataset (or dataset_root in the config) is required");
    }
    std::vector<double> thetas;
    for (const auto& t : split_list(a.thetas)) {
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw Error(ErrorKind::InvalidArgument, "bad theta2 value '" + t + "'");
        }
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidArgument, "theta2 " + t + " outside [0,1]");
        thetas.push_back(v);
    }
    if (thetas.empty()) throw Error(ErrorKind::InvalidArgument, "--theta2 needs at least one value");

    const Dataset dataset = load_dataset(cfg.dataset_root);
    std::vector<std::string> sources = split_list(a.sources);
    if (sources.empty()) {
        for (const auto& [domain, _] : dataset.domains) sources.push_back(domain);
    }
    auto segmenter = make_mock(a.segmenter, dataset, a.seed);

    std::map<double, std::vector<DiceReport>> reports;
    for (const auto& source : sources) {
        PipelineConfig run = cfg;
        run.source_domain = source;
        run.target_domains.clear();
        const PipelinePlan plan = plan_composites(dataset, run);
        for (double theta : thetas) {
            run.theta2 = theta;
            reports[theta].push_back(execute_plan(dataset, plan, run, *segmenter));
        }
    }
    const SweepTable table = sweep_report(reports);
    const fs::path out_dir(a.out);
    write_sweep(out_dir / "sweep.json", table, ReportFormat::Structured);
    write_sweep(out_dir / "sweep.txt", table, ReportFormat::Text);
    out << render_sweep_table(table);
    return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    std::vector<DiceReport> reports;
    for (const auto& path : a.inputs) reports.push_back(read_report(path));

    std::string text;
    if (a.format == "json") {
        if (reports.size() != 1) {
            throw Error(ErrorKind::InvalidArgument, "--format json takes exactly one report");
        }
        text = report_to_json(reports.front()).dump(2) + "\n";
    } else if (reports.size() == 1) {
        text = render_report_table(reports.front());
    } else {
        text = render_summary_table(reports);
        for (const auto& r : reports) text += "\n" + render_report_table(r);
    }
    if (a.out.empty()) {
        out << text;
    } else {
        write_text_file(a.out, text);
    }
    return kExitOk;
}

int exit_code_for(const Error& e) {
    switch (e.category()) {
        case ErrorCategory::Io: return kExitIo;
        case ErrorCategory::Contract: return kExitContract;
        case ErrorCategory::Validation: return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coarse-mask box refinement, composite batching and Dice evaluation", "boxprompt"};
    app.require_subcommand(1);

    ThresholdArgs threshold_args;
    auto* sub_threshold = app.add_subcommand("threshold", "Binarise a probability map (value >= theta)");
    sub_threshold->add_option("--in", threshold_args.in, "Probability map (.npy, or 8-bit .png scaled by 1/255)")->required();
    sub_threshold->add_option("--theta", threshold_args.theta, "Confidence threshold")->check(CLI::Range(0.0, 1.0));
    sub_threshold->add_option("--out", threshold_args.out, "Output mask PNG")->required();

    FilterArgs filter_args;
    auto* sub_filter = app.add_subcommand("filter", "Threshold, keep the largest component, print its box");
    sub_filter->add_option("--in", filter_args.in, "Coarse probability map (.npy or .png)")->required();
    sub_filter->add_option("--theta", filter_args.theta, "Confidence threshold")->check(CLI::Range(0.0, 1.0));
    sub_filter->add_option("--factor", filter_args.factor, "Downscale factor")->check(CLI::PositiveNumber);
    sub_filter->add_option("--connectivity", filter_args.connectivity, "4 or 8")->check(CLI::IsMember({4, 8}));
    sub_filter->add_option("--out", filter_args.out, "Filtered mask PNG")->required();

    BboxArgs bbox_args;
    auto* sub_bbox = app.add_subcommand("bbox", "Print the bounding box of a mask");
    sub_bbox->add_option("--in", bbox_args.in, "Mask PNG")->required();
    sub_bbox->add_option("--factor", bbox_args.factor, "Compute on a downscaled copy")->check(CLI::PositiveNumber);
    sub_bbox->add_option("--connectivity", bbox_args.connectivity, "4 or 8")->check(CLI::IsMember({4, 8}));
    sub_bbox->add_flag("--largest", bbox_args.largest, "Box of the largest component only");

    MergeArgs merge_args;
    auto* sub_merge = app.add_subcommand("merge", "Pack 1-4 square tiles into a 2x2 composite");
    sub_merge->add_option("--tile", merge_args.tiles, "Tile PNG, repeat up to 4 times")->required();
    sub_merge->add_option("--box", merge_args.boxes, "slot:x_min,y_min,x_max,y_max in tile coordinates");
    sub_merge->add_option("--id", merge_args.id, "Composite id");
    sub_merge->add_option("--out", merge_args.out, "Composite PNG")->required();
    sub_merge->add_option("--manifest", merge_args.manifest, "Write a one-composite manifest");

    SplitArgs split_args;
    auto* sub_split = app.add_subcommand("split", "Cut a composite back into its tiles");
    sub_split->add_option("--in", split_args.in, "Composite (.png image or .npy map)")->required();
    sub_split->add_option("--manifest", split_args.manifest, "Manifest describing the slots")->required();
    sub_split->add_option("--composite-id", split_args.composite_id, "Composite to use (default: first)");
    sub_split->add_option("--out-dir", split_args.out_dir, "Output directory")->required();

    DiceArgs dice_args;
    auto* sub_dice = app.add_subcommand("dice", "Dice coefficient of two masks");
    sub_dice->add_option("--pred", dice_args.pred, "Predicted mask PNG")->required();
    sub_dice->add_option("--gt", dice_args.gt, "Ground-truth mask PNG")->required();

    PipelineArgs pipeline_args;
    auto* sub_pipeline = app.add_subcommand("pipeline", "Refine boxes, merge, segment, score");
    pipeline_args.flags.attach(sub_pipeline);
    sub_pipeline->add_option("--segmenter", pipeline_args.segmenter, "mock-perfect|mock-noisy|external")
        ->check(CLI::IsMember({"mock-perfect", "mock-noisy", "external"}));
    sub_pipeline->add_option("--phase", pipeline_args.phase, "emit|score (external segmenter)")
        ->check(CLI::IsMember({"emit", "score"}));
    sub_pipeline->add_option("--out", pipeline_args.out, "Output directory");
    sub_pipeline->add_option("--predictions", pipeline_args.predictions,
                             "Prediction directory for --phase score (default: <out>/predictions)");
    sub_pipeline->add_option("--manifest", pipeline_args.manifest, "Manifest for --phase score (default: <out>/manifest.json)");
    sub_pipeline->add_option("--seed", pipeline_args.seed, "Seed of the noisy mock");
    sub_pipeline->add_flag("--save-predictions", pipeline_args.save_predictions,
                           "Write mock predictions to <out>/predictions");

    SweepArgs sweep_args;
    auto* sub_sweep = app.add_subcommand("sweep", "Source-to-rest Dice for several theta2 values");
    sweep_args.flags.attach(sub_sweep, false);
    sub_sweep->add_option("--theta2", sweep_args.thetas, "Comma-separated theta2 values");
    sub_sweep->add_option("--sources", sweep_args.sources, "Comma-separated source domains (default: all)");
    sub_sweep->add_option("--segmenter", sweep_args.segmenter, "mock-perfect|mock-noisy")
        ->check(CLI::IsMember({"mock-perfect", "mock-noisy"}));
    sub_sweep->add_option("--seed", sweep_args.seed, "Seed of the noisy mock");
    sub_sweep->add_option("--out", sweep_args.out, "Output directory");

    ReportArgs report_args;
    auto* sub_report = app.add_subcommand("report", "Render report JSON files as tables");
    sub_report->add_option("--in", report_args.inputs, "Report JSON, repeatable")->required();
    sub_report->add_option("--format", report_args.format, "text|json")->check(CLI::IsMember({"text", "json"}));
    sub_report->add_option("--out", report_args.out, "Write here instead of standard output");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (sub_threshold->parsed()) return cmd_threshold(threshold_args, out);
        if (sub_filter->parsed()) return cmd_filter(filter_args, out);
        if (sub_bbox->parsed()) return cmd_bbox(bbox_args, out);
        if (sub_merge->parsed()) return cmd_merge(merge_args, out);
        if (sub_split->parsed()) return cmd_split(split_args, out);
        if (sub_dice->parsed()) return cmd_dice(dice_args, out);
        if (sub_pipeline->parsed()) return cmd_pipeline(pipeline_args, out, err);
        if (sub_sweep->parsed()) return cmd_sweep(sweep_args, out);
        if (sub_report->parsed()) return cmd_report(report_args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace boxprompt
