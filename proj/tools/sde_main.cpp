#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sde/enhance.hpp"
#include "sde/errors.hpp"
#include "sde/gradcheck.hpp"
#include "sde/harness.hpp"
#include "sde/losses.hpp"
#include "sde/matrix_io.hpp"
#include "sde/serialize.hpp"
#include "sde/spectral.hpp"
#include "sde/svg.hpp"
#include "sde/version.hpp"

namespace fs = std::filesystem;
using namespace sde;

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command, std::uint64_t seed,
                    const Json& config, const std::vector<std::string>& outputs) {
    Json manifest{{"command", command},
                  {"tool_version", std::string(kToolName) + " " + std::string(kToolVersion)},
                  {"rng_algorithm", std::string(kRngAlgorithm)},
                  {"seed", seed},
                  {"config", config},
                  {"outputs", outputs},
                  {"timestamp_utc", utc_timestamp()}};
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

std::string spectrum_csv(std::span<const double> sigma) {
    std::string out = "index,sigma\n";
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_double(sigma[i]) + "\n";
    }
    return out;
}

std::string cumulative_csv(std::span<const double> cumulative) {
    std::string out = "index,cumulative_energy\n";
    for (std::size_t i = 0; i < cumulative.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_double(cumulative[i]) + "\n";
    }
    return out;
}

std::string render_analyze_svg(const SpectralReport& rep, std::span<const double> sigma) {
    SvgCanvas svg(960, 300);

    // Panel 1: component count proportions.
    {
        PlotFrame f{40, 40, 240, 220, 0, 3, 0, 1};
        draw_axes(svg, f, "component proportions");
        const double props[3] = {rep.strong_proportion, rep.weak_proportion, rep.noise_proportion};
        const char* labels[3] = {"strong", "weak", "noise"};
        const char* fills[3] = {"#d62728", "#ff9f40", "#7f7f7f"};
        for (int b = 0; b < 3; ++b) {
            const double x0 = f.x(b + 0.2);
            const double x1 = f.x(b + 0.8);
            const double ytop = f.y(props[b]);
            svg.rect(x0, ytop, x1 - x0, f.y(0) - ytop, fills[b]);
            svg.text((x0 + x1) / 2, f.y(0) + 14, labels[b], 10, "middle");
        }
    }

    // Panel 2: sorted spectrum with threshold lines.
    {
        const double top = sigma.empty() ? 1.0 : sigma[0] * 1.05;
        PlotFrame f{360, 40, 240, 220, 1, static_cast<double>(std::max<std::size_t>(sigma.size(), 2)),
                    0, top};
        draw_axes(svg, f, "singular values");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            pts.emplace_back(f.x(static_cast<double>(i + 1)), f.y(sigma[i]));
        }
        svg.polyline(pts, "#1f77b4");
        if (rep.noise_edge < top) {
            svg.line(f.px, f.y(rep.noise_edge), f.px + f.pw, f.y(rep.noise_edge), "#7f7f7f");
            svg.text(f.px + f.pw + 4, f.y(rep.noise_edge) + 4, "noise edge", 9);
        }
        if (rep.strong_threshold < top && rep.strong_threshold > 0) {
            svg.line(f.px, f.y(rep.strong_threshold), f.px + f.pw, f.y(rep.strong_threshold),
                     "#d62728");
            svg.text(f.px + f.pw + 4, f.y(rep.strong_threshold) + 4, "strong", 9);
        }
    }

    // Panel 3: cumulative energy.
    {
        PlotFrame f{680, 40, 240, 220, 1,
                    static_cast<double>(std::max<std::size_t>(rep.cumulative_energy.size(), 2)), 0,
                    1.0};
        draw_axes(svg, f, "cumulative energy");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < rep.cumulative_energy.size(); ++i) {
            pts.emplace_back(f.x(static_cast<double>(i + 1)), f.y(rep.cumulative_energy[i]));
        }
        svg.polyline(pts, "#2ca02c");
    }
    return svg.str();
}

std::string render_schedules_svg(std::size_t total_steps, std::size_t batch_size) {
    SvgCanvas svg(640, 300);
    double alpha_max = 0.0;
    for (std::size_t t = 0; t <= total_steps; ++t) {
        alpha_max = std::max(alpha_max, alpha_schedule(t, total_steps, batch_size));
    }
    {
        PlotFrame f{40, 40, 240, 220, 0, static_cast<double>(total_steps), 0, alpha_max * 1.05};
        draw_axes(svg, f, "alpha(t)");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t t = 0; t <= total_steps; ++t) {
            pts.emplace_back(f.x(static_cast<double>(t)),
                             f.y(alpha_schedule(t, total_steps, batch_size)));
        }
        svg.polyline(pts, "#1f77b4");
    }
    {
        PlotFrame f{360, 40, 240, 220, 0, static_cast<double>(total_steps), 0, 0.1};
        draw_axes(svg, f, "lambda(t)");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t t = 0; t <= total_steps; ++t) {
            const double p = static_cast<double>(t) / static_cast<double>(total_steps);
            pts.emplace_back(f.x(static_cast<double>(t)), f.y(lambda_schedule(p)));
        }
        svg.polyline(pts, "#2ca02c");
    }
    return svg.str();
}

int cmd_analyze(const std::string& input, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    const Matrix f = read_matrix(input);
    const SpectralDecomposition dec = svd(f);
    if (dec.rank == 0) {
        throw DegenerateInputError("input matrix has numerical rank 0; nothing to analyze");
    }
    const SubspacePartition part = partition(dec, f.rows(), f.cols());
    const SpectralReport rep = spectral_report(dec, part);

    write_file(dir / "spectrum.csv", spectrum_csv(dec.sigma));
    write_file(dir / "partition.json", partition_report_to_json(part, rep).dump(2) + "\n");
    write_file(dir / "cumulative_energy.csv", cumulative_csv(rep.cumulative_energy));
    write_file(dir / "spectrum.svg", render_analyze_svg(rep, dec.sigma));

    write_manifest(dir, "analyze", 0,
                   Json{{"input", input}, {"rows", f.rows()}, {"cols", f.cols()}},
                   {"spectrum.csv", "partition.json", "cumulative_energy.csv", "spectrum.svg"});
    std::printf("analyze: rank %zu, strong %zu / weak %zu / noise %zu\n", dec.rank,
                part.strong.size(), part.weak.size(), part.noise.size());
    return 0;
}

int cmd_enhance(const std::string& input, std::optional<double> alpha,
                std::optional<std::size_t> t, std::optional<std::size_t> total,
                std::optional<std::size_t> batch, std::uint64_t seed, const std::string& out,
                const std::string& format) {
    const fs::path dir = prepare_out_dir(out);
    const Matrix f = read_matrix(input);

    double alpha_value;
    if (alpha) {
        if (t || total || batch) {
            throw ConfigError("pass either --alpha or the schedule triple, not both");
        }
        alpha_value = *alpha;
    } else {
        if (!t || !total || !batch) {
            throw ConfigError("schedule triple requires --step, --total-steps and --batch-size");
        }
        alpha_value = alpha_schedule(*t, *total, *batch);
    }

    const SpectralDecomposition dec = svd(f);
    if (dec.rank == 0 || !(dec.sigma[0] > 0.0)) {
        throw DegenerateInputError("cannot enhance a matrix with zero leading singular value");
    }
    const SubspacePartition part = partition(dec, f.rows(), f.cols());
    Rng rng(seed);
    const DeltaSpec delta = build_delta(dec, part, alpha_value, rng);
    const Matrix enhanced = enhance(f, delta, dec);

    const MatrixFormat fmt = format == "bin" ? MatrixFormat::binary : MatrixFormat::csv;
    const std::string matrix_name = fmt == MatrixFormat::binary ? "enhanced.bin" : "enhanced.csv";
    write_matrix(dir / matrix_name, enhanced, fmt);
    Json dj = delta_spec_to_json(delta);
    dj["alpha"] = alpha_value;
    dj["seed"] = seed;
    write_file(dir / "delta_spec.json", dj.dump(2) + "\n");

    write_manifest(dir, "enhance", seed,
                   Json{{"input", input}, {"alpha", alpha_value}, {"format", format}},
                   {matrix_name, "delta_spec.json"});
    std::printf("enhance: alpha %s applied to %zux%zu matrix\n", format_double(alpha_value).c_str(),
                f.rows(), f.cols());
    return 0;
}

int cmd_schedules(std::size_t total_steps, std::size_t batch_size, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    std::string csv = "t,alpha,lambda\n";
    for (std::size_t t = 0; t <= total_steps; ++t) {
        const double p = static_cast<double>(t) / static_cast<double>(total_steps);
        csv += std::to_string(t) + "," + format_double(alpha_schedule(t, total_steps, batch_size)) +
               "," + format_double(lambda_schedule(p)) + "\n";
    }
    write_file(dir / "schedules.csv", csv);
    write_file(dir / "schedules.svg", render_schedules_svg(total_steps, batch_size));
    write_manifest(dir, "schedules", 0,
                   Json{{"total_steps", total_steps}, {"batch_size", batch_size}},
                   {"schedules.csv", "schedules.svg"});
    std::printf("schedules: %zu steps written\n", total_steps + 1);
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out) {
    const GradcheckSummary summary = run_gradcheck_suite(seed);
    const Json j = grad_summary_to_json(summary);
    if (!out.empty()) {
        const fs::path dir = prepare_out_dir(out);
        write_file(dir / "gradcheck.json", j.dump(2) + "\n");
        write_manifest(dir, "gradcheck", seed, Json{{"seed", seed}}, {"gradcheck.json"});
    }
    std::printf("gradcheck: %s (infonce %.3g, spectral %.3g, sigma-id %.3g, equivariance %.3g)\n",
                summary.pass ? "pass" : "FAIL", summary.infonce_max_rel, summary.spectral_max_rel,
                summary.sigma_identity_max_err, summary.equivariance_max_err);
    return summary.pass ? 0 : 1;
}

struct LoadedConfig {
    SyntheticTaskConfig task;
    TrainConfig train;
    std::vector<std::uint64_t> seeds;
    double fraction = 0.05;
};

LoadedConfig load_config(const std::string& path, bool want_ablate) {
    Json root;
    try {
        root = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw FormatError("config '" + path + "' is not valid JSON: " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    for (auto it = root.begin(); it != root.end(); ++it) {
        if (it.key() != "task" && it.key() != "train" && it.key() != "ablate") {
            throw ConfigError("unknown key '" + it.key() + "'");
        }
    }
    LoadedConfig cfg;
    if (root.contains("task")) cfg.task = task_config_from_json(root.at("task"));
    if (root.contains("train")) cfg.train = train_config_from_json(root.at("train"));
    if (root.contains("ablate")) {
        const Json& a = root.at("ablate");
        if (!a.is_object()) throw ConfigError("'ablate' section must be an object");
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (it.key() != "seeds" && it.key() != "fraction") {
                throw ConfigError("unknown key 'ablate." + it.key() + "'");
            }
        }
        if (a.contains("seeds")) {
            try {
                cfg.seeds = a.at("seeds").get<std::vector<std::uint64_t>>();
            } catch (const Json::exception&) {
                throw ConfigError("bad value for key 'ablate.seeds'");
            }
        }
        if (a.contains("fraction")) {
            try {
                cfg.fraction = a.at("fraction").get<double>();
            } catch (const Json::exception&) {
                throw ConfigError("bad value for key 'ablate.fraction'");
            }
        }
    } else if (want_ablate) {
        cfg.seeds = {1, 2, 3};
    }
    if (cfg.seeds.empty()) cfg.seeds = {cfg.train.seed};
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& out,
              std::optional<std::uint64_t> seed_flag) {
    const fs::path dir = prepare_out_dir(out);
    LoadedConfig cfg = load_config(config_path, false);
    if (seed_flag) {
        cfg.train.seed = *seed_flag;
        cfg.task.seed = *seed_flag;
    }
    if (cfg.task.pairs < 4 * cfg.train.batch_size) {
        throw ConfigError("task.pairs must be at least 4 * train.batch_size");
    }

    const SyntheticTask task = generate_task(cfg.task);
    const TrainResult result = train(task, cfg.train);

    std::string log_lines;
    for (const StepRecord& rec : result.log) log_lines += step_record_to_json(rec).dump() + "\n";
    write_file(dir / "train_log.jsonl", log_lines);

    const double clean = precision_at_1(result.params, task.test_x, task.test_y);
    Rng eval_rng = Rng(cfg.train.seed).fork(0x6576616c);
    const double perturbed =
        perturbed_eval(result.params, task.test_x, task.test_y, 0.05, eval_rng);
    Json summary{{"mode", to_string(cfg.train.mode)},
                 {"seed", cfg.train.seed},
                 {"clean_p1", clean},
                 {"perturbed_p1", perturbed},
                 {"final_feat", result.log.back().loss.feat},
                 {"final_spec", result.log.back().loss.spec}};
    write_file(dir / "result.json", summary.dump(2) + "\n");

    write_manifest(dir, "train", cfg.train.seed,
                   Json{{"task", task_config_to_json(cfg.task)},
                        {"train", train_config_to_json(cfg.train)}},
                   {"train_log.jsonl", "result.json"});
    std::printf("train: %zu steps, clean P@1 %.4f, perturbed P@1 %.4f\n", cfg.train.total_steps,
                clean, perturbed);
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    LoadedConfig cfg = load_config(config_path, true);
    if (cfg.task.pairs < 4 * cfg.train.batch_size) {
        throw ConfigError("task.pairs must be at least 4 * train.batch_size");
    }

    std::size_t workers = 1;
    if (const char* env = std::getenv("SDE_ABLATE_WORKERS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 1) workers = static_cast<std::size_t>(parsed);
    }

    const std::vector<AblationRow> rows =
        ablation_suite(cfg.task, cfg.train, cfg.seeds, cfg.fraction, workers);
    write_file(dir / "ablation.csv", ablation_table_csv(rows));
    write_manifest(dir, "ablate", cfg.train.seed,
                   Json{{"task", task_config_to_json(cfg.task)},
                        {"train", train_config_to_json(cfg.train)},
                        {"seeds", cfg.seeds},
                        {"fraction", cfg.fraction},
                        {"workers", workers}},
                   {"ablation.csv"});
    std::printf("ablate: %zu rows written\n", rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral disentanglement and enhancement toolkit"};
    app.require_subcommand(1);

    std::string input, out = ".", format = "csv", config_path;
    std::uint64_t seed = 1;
    std::optional<double> alpha;
    std::optional<std::size_t> step_t, total_steps_opt, batch_opt;
    std::size_t total_steps = 1000, batch_size = 256;
    std::optional<std::uint64_t> seed_flag;

    auto* analyze = app.add_subcommand("analyze", "spectral report for a matrix file");
    analyze->add_option("input", input, "matrix file (csv or binary)")->required();
    analyze->add_option("--out", out, "output directory");

    auto* enh = app.add_subcommand("enhance", "apply spectral enhancement to a matrix file");
    enh->add_option("input", input, "matrix file (csv or binary)")->required();
    enh->add_option("--alpha", alpha, "explicit curriculum factor");
    enh->add_option("--step", step_t, "schedule step t");
    enh->add_option("--total-steps", total_steps_opt, "schedule total steps T");
    enh->add_option("--batch-size", batch_opt, "schedule batch size");
    enh->add_option("--seed", seed, "rng seed");
    enh->add_option("--out", out, "output directory");
    enh->add_option("--format", format, "output matrix format: csv|bin")
        ->check(CLI::IsMember({"csv", "bin"}));

    auto* sch = app.add_subcommand("schedules", "dump alpha(t), lambda(t) tables and curves");
    sch->add_option("--total-steps", total_steps, "total steps T");
    sch->add_option("--batch-size", batch_size, "batch size");
    sch->add_option("--out", out, "output directory");

    auto* gc = app.add_subcommand("gradcheck", "run the gradient verification suite");
    gc->add_option("--seed", seed, "rng seed");
    gc->add_option("--out", out, "output directory (optional)");

    auto* tr = app.add_subcommand("train", "train on the synthetic task");
    tr->add_option("--config", config_path, "JSON config path")->required();
    tr->add_option("--seed", seed_flag, "override task+train seed");
    tr->add_option("--out", out, "output directory");

    auto* ab = app.add_subcommand("ablate", "run the loss/enhancement ablation grid");
    ab->add_option("--config", config_path, "JSON config path")->required();
    ab->add_option("--out", out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) return cmd_analyze(input, out);
        if (enh->parsed()) {
            return cmd_enhance(input, alpha, step_t, total_steps_opt, batch_opt, seed, out, format);
        }
        if (sch->parsed()) return cmd_schedules(total_steps, batch_size, out);
        if (gc->parsed()) return cmd_gradcheck(seed, gc->count("--out") ? out : "");
        if (tr->parsed()) return cmd_train(config_path, out, seed_flag);
        if (ab->parsed()) return cmd_ablate(config_path, out);
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
