#include "hazeprior/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hazeprior/augment.hpp"
#include "hazeprior/checkpoint.hpp"
#include "hazeprior/config.hpp"
#include "hazeprior/error.hpp"
#include "hazeprior/image_io.hpp"
#include "hazeprior/iqa.hpp"
#include "hazeprior/prior_trainer.hpp"
#include "hazeprior/refiner.hpp"
#include "hazeprior/rng.hpp"

namespace hazeprior {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for flag combinations CLI11 cannot reject on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string bank;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_bank)
{
    cmd->add_option("--config", f.config, "JSON config file");
    cmd->add_option("--preset", f.preset, "default, full-prior or full-refine (applied before the config file)");
    cmd->add_option("--seed", f.seed, "random seed");
    if (with_bank) cmd->add_option("--bank", f.bank, "directory of light-map PNGs");
}

PipelineConfig resolve_config(const CommonFlags& f)
{
    PipelineConfig cfg = preset_config(f.preset.empty() ? "default" : f.preset);
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw DataError("cannot read config file: " + f.config);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw DataError("invalid config file " + f.config + ": " + e.what());
        }
        if (!f.preset.empty() && !doc.contains("preset")) doc["preset"] = f.preset;
        cfg = config_from_json(doc);
    }
    if (!f.bank.empty()) cfg.light_bank = f.bank;
    return cfg;
}

LightBank load_bank(const PipelineConfig& cfg)
{
    return cfg.light_bank ? LightBank::from_directory(*cfg.light_bank) : LightBank{};
}

std::vector<NamedImage> load_rgb_directory(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    auto images = load_directory(dir);
    for (auto& entry : images) entry.image = convert_channels(entry.image, 3);
    return images;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

void write_manifest(const fs::path& path, const std::string& command, const CommonFlags& flags,
                    std::uint64_t seed, const json& inputs, const json& outputs, const json& config)
{
    json m;
    m["command"] = command;
    m["config_path"] = flags.config.empty() ? json(nullptr) : json(flags.config);
    m["preset"] = flags.preset.empty() ? json("default") : json(flags.preset);
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["tool_version"] = kToolVersion;
    m["config"] = config;
    write_text(path, m.dump(2) + "\n");
}

fs::path with_suffix(const fs::path& p, const std::string& suffix)
{
    return fs::path(p.string() + suffix);
}

std::string format_index(std::size_t i)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05zu", i);
    return buf;
}

double parse_threshold(const std::string& s)
{
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || std::isnan(v)) throw UsageError("not a number: '" + s + "'");
    return v;
}

int cmd_augment(const fs::path& in_dir, const fs::path& out_dir, const CommonFlags& flags, int count,
                std::ostream& err)
{
    const PipelineConfig cfg = resolve_config(flags);
    cfg.augment.validate();
    const LightBank bank = load_bank(cfg);
    const std::uint64_t seed = flags.seed.value_or(0);
    const auto clear = load_rgb_directory(in_dir);
    if (clear.empty() && count > 0) throw DataError("no images in " + in_dir.string());

    fs::create_directories(out_dir);
    json outputs = json::array();
    for (int i = 0; i < count; ++i) {
        const NamedImage& src = clear[static_cast<std::size_t>(i) % clear.size()];
        RngStream rng(seed, static_cast<std::uint64_t>(i));
        const Augmented aug = augment(src.image, cfg.augment, rng, bank);
        const std::string stem = format_index(static_cast<std::size_t>(i));
        const NormalizeResult target = minmax_normalize(src.image);
        save_image(aug.image, out_dir / ("aug_" + stem + ".png"));
        save_image(target.image, out_dir / ("clear_" + stem + ".png"));
        json sidecar;
        sidecar["source"] = src.id;
        sidecar["seed"] = seed;
        sidecar["sequence"] = i;
        sidecar["record"] = aug.record;
        write_text(out_dir / ("aug_" + stem + ".json"), sidecar.dump(2) + "\n");
        outputs.push_back("aug_" + stem + ".png");
    }
    write_manifest(out_dir / "manifest.json", "augment", flags, seed, json{{"in", in_dir.string()}},
                   json{{"out", out_dir.string()}, {"count", count}, {"files", outputs}},
                   json{{"augment", cfg.augment}});
    err << "augment: wrote " << count << " pairs to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_train_prior(const fs::path& data_dir, const fs::path& out, const CommonFlags& flags,
                    std::optional<int> steps, const std::string& init, std::ostream& err)
{
    PipelineConfig cfg = resolve_config(flags);
    if (flags.seed) cfg.train.seed = *flags.seed;
    if (steps) cfg.train.steps = *steps;
    cfg.train.validate();
    cfg.augment.validate();
    const LightBank bank = load_bank(cfg);
    const auto clear = load_rgb_directory(data_dir);
    if (clear.empty()) throw DataError("no images in " + data_dir.string());

    std::unique_ptr<RestorerModel> model =
        init.empty() ? std::make_unique<LinearPatchRestorer>(LinearPatchRestorer::identity(cfg.train.model_radius, 3))
                     : load_model(init);
    const TrainResult result = train_prior(clear, cfg.augment, cfg.train, *model, bank);
    if (result.aborted) {
        err << "train-prior: " << result.message << "\n";
        return kExitInternal;
    }
    save_checkpoint(*model, out);
    write_loss_csv(result.loss_trace, with_suffix(out, ".loss.csv"));
    write_manifest(with_suffix(out, ".manifest.json"), "train-prior", flags, cfg.train.seed,
                   json{{"data", data_dir.string()}, {"init", init.empty() ? json(nullptr) : json(init)}},
                   json{{"checkpoint", out.string()}, {"loss_csv", with_suffix(out, ".loss.csv").string()}},
                   json{{"augment", cfg.augment}, {"train", cfg.train}});
    if (!result.loss_trace.empty()) {
        err << "train-prior: " << result.loss_trace.size() << " steps, loss " << result.loss_trace.front() << " -> "
            << result.loss_trace.back() << "\n";
    }
    return kExitOk;
}

int cmd_refine(const fs::path& ckpt, const fs::path& unlabeled, const fs::path& out, const CommonFlags& flags,
               const std::string& v2, std::optional<int> steps, const std::string& metric, std::ostream& err)
{
    PipelineConfig cfg = resolve_config(flags);
    if (flags.seed) cfg.refine.seed = *flags.seed;
    if (steps) cfg.refine.steps = *steps;
    if (!v2.empty()) cfg.refine.v2_thr = parse_threshold(v2);
    if (!metric.empty()) cfg.refine.metric = MetricHandle::parse(metric);
    cfg.refine.validate();
    const LightBank bank = load_bank(cfg);
    const auto prior = load_model(ckpt);
    const auto images = load_rgb_directory(unlabeled);
    if (images.empty()) throw DataError("no images in " + unlabeled.string());

    TeacherStudentState state = TeacherStudentState::from_prior(*prior);
    const RefineResult result = refine_loop(state, images, cfg.refine, bank);
    save_checkpoint(*state.teacher, out);
    write_audit_jsonl(result.audit, with_suffix(out, ".audit.jsonl"));
    write_manifest(with_suffix(out, ".manifest.json"), "refine", flags, cfg.refine.seed,
                   json{{"checkpoint", ckpt.string()}, {"unlabeled", unlabeled.string()}},
                   json{{"checkpoint", out.string()},
                        {"audit", with_suffix(out, ".audit.jsonl").string()},
                        {"probes", result.probe_ids}},
                   json{{"refine", cfg.refine}});
    err << "refine: " << state.accepted << " accepted, " << state.rejected << " rejected\n";
    return kExitOk;
}

int cmd_infer(const fs::path& ckpt, const fs::path& in_dir, const fs::path& out_dir, const std::vector<int>& ensemble,
              std::ostream& err)
{
    const auto model = load_model(ckpt);
    const auto* linear = dynamic_cast<const LinearPatchRestorer*>(model.get());
    if (!fs::is_directory(in_dir)) throw DataError("not a directory: " + in_dir.string());
    const auto files = list_images(in_dir);
    fs::create_directories(out_dir);
    for (const auto& file : files) {
        Image image = load_image(file);
        if (linear != nullptr) image = convert_channels(image, linear->channels());
        Image restored = image;
        if (ensemble.empty()) {
            restored = model->forward(image);
        } else {
            const int patch = ensemble[0];
            const int stride = ensemble[1];
            const auto tiles = tile_positions(image.height(), image.width(), patch, stride);
            err << "infer: " << file.filename().string() << ": " << tiles.size() << " patches\n";
            restored = ensemble_predict(*model, image, patch, stride).mean;
        }
        fs::path name = file.filename();
        name.replace_extension(".png");
        save_image(restored, out_dir / name);
    }
    err << "infer: restored " << files.size() << " images\n";
    return kExitOk;
}

int cmd_score(const fs::path& in_dir, const std::string& metric_spec, int jobs, std::ostream& out)
{
    if (!fs::is_directory(in_dir)) throw DataError("not a directory: " + in_dir.string());
    const MetricHandle metric = MetricHandle::parse(metric_spec);
    const ScoreReport report = score_directory(metric, in_dir, jobs);
    char buf[64];
    out << "image,score\n";
    for (const auto& [id, s] : report.scores) {
        std::snprintf(buf, sizeof(buf), "%.17g", s);
        out << id << "," << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", report.mean);
    out << "mean," << buf << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Nighttime dehazing toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string in_dir, out_path, data_dir, ckpt, unlabeled, v2, metric, init;
    CommonFlags common;
    int count = 1;
    int jobs = 1;
    std::optional<int> steps;
    std::vector<int> ensemble;

    auto* aug = app.add_subcommand("augment", "synthesize degraded/clear training pairs");
    aug->add_option("--in", in_dir, "directory of clear images")->required();
    aug->add_option("--out", out_path, "output directory")->required();
    aug->add_option("--count", count, "number of pairs")->check(CLI::NonNegativeNumber);
    add_common(aug, common, true);

    auto* train = app.add_subcommand("train-prior", "self-prior training on clear images");
    train->add_option("--data", data_dir, "directory of clear images")->required();
    train->add_option("--out", out_path, "checkpoint to write")->required();
    train->add_option("--steps", steps, "override train.steps")->check(CLI::NonNegativeNumber);
    train->add_option("--init", init, "start from this checkpoint instead of the identity model");
    add_common(train, common, true);

    auto* refine = app.add_subcommand("refine", "gated teacher-student refinement on unlabeled images");
    refine->add_option("--checkpoint", ckpt, "self-prior checkpoint")->required();
    refine->add_option("--unlabeled", unlabeled, "directory of unlabeled hazy images")->required();
    refine->add_option("--out", out_path, "checkpoint to write")->required();
    refine->add_option("--steps", steps, "override refine.steps")->check(CLI::NonNegativeNumber);
    refine->add_option("--v2", v2, "override the gate threshold (number, inf or -inf)");
    refine->add_option("--metric", metric, "gate metric: contrast or a command template");
    add_common(refine, common, true);

    auto* infer = app.add_subcommand("infer", "restore a directory of images");
    infer->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    infer->add_option("--in", in_dir, "input directory")->required();
    infer->add_option("--out", out_path, "output directory")->required();
    infer->add_option("--ensemble", ensemble, "patch and stride for ensemble inference")
        ->expected(2)
        ->check(CLI::PositiveNumber);

    auto* score_cmd = app.add_subcommand("score", "no-reference scores as CSV on stdout");
    score_cmd->add_option("--in", in_dir, "directory of images")->required();
    score_cmd->add_option("--metric", metric, "contrast or a command template")->default_val("contrast");
    score_cmd->add_option("--jobs", jobs, "concurrent external metric processes")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << (dynamic_cast<const CLI::CallForVersion*>(&e) != nullptr ? std::string(kToolVersion) + "\n"
                                                                             : app.help());
            return kExitOk;
        }
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (aug->parsed()) return cmd_augment(in_dir, out_path, common, count, err);
        if (train->parsed()) return cmd_train_prior(data_dir, out_path, common, steps, init, err);
        if (refine->parsed()) return cmd_refine(ckpt, unlabeled, out_path, common, v2, steps, metric, err);
        if (infer->parsed()) return cmd_infer(ckpt, in_dir, out_path, ensemble, err);
        if (score_cmd->parsed()) return cmd_score(in_dir, metric, jobs, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const ImageIoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const MetricError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace hazeprior
