#include "cli.hpp"

#include "ccrobust/calibration.hpp"
#include "ccrobust/distmodel.hpp"
#include "ccrobust/experiments.hpp"
#include "ccrobust/robust.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace ccrobust::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Bad flags, unreadable files and malformed configs.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Kind { Real, Count, Text, Lambda, Path, JsonFile };

struct Flag {
    const char* key;
    const char* name;
    Kind kind;
    const char* help;
};

// every config key that can also be set from the command line
const Flag kFlags[] = {
    {"alpha", "--alpha", Kind::Real, "target probability mass"},
    {"epsilon", "--eps", Kind::Real, "tolerance above alpha"},
    {"delta", "--delta", Kind::Real, "confidence parameter"},
    {"lambda", "--lambda", Kind::Lambda, "quantile inflation weight in (0, 1), or 'optimal'"},
    {"alpha_n", "--alpha-n", Kind::Real, "override the quantile level alpha + lambda * eps"},
    {"m", "--m", Kind::Count, "number of balls (shape-sample size)"},
    {"seed", "--seed", Kind::Count, "seed for every random draw of the run"},
    {"trials", "--trials", Kind::Count, "independent calibration trials"},
    {"mc_samples", "--mc-samples", Kind::Count, "Monte-Carlo samples per estimate"},
    {"norm", "--norm", Kind::Text, "ball norm: l1, l2 or linf"},
    {"threads", "--threads", Kind::Count, "worker threads (results do not depend on it)"},
    {"resolution", "--resolution", Kind::Count, "raster pixels per axis"},
    {"mixture", "--mixture", Kind::Text, "bundled mixture: a, b, c (isotropic, concentrated, four-mode)"},
    {"shape_csv", "--shape-csv", Kind::Path, "headerless CSV of ball centers, one per line"},
    {"training_csv", "--training-csv", Kind::Path, "headerless CSV of training points"},
    {"training_n", "--n", Kind::Count, "training points to draw when no CSV is given (default n_min)"},
    {"model", "--model", Kind::JsonFile, "robust program JSON (default: bundled example)"},
    {"radius", "--radius", Kind::Real, "replace the radius of every robust row"},
};

const Flag& flag_for(const std::string& key) {
    for (const auto& f : kFlags) {
        if (key == f.key)
            return f;
    }
    throw std::logic_error("no flag for config key " + key);
}

json spec_defaults() {
    return {{"alpha", 0.9}, {"epsilon", 0.05}, {"delta", 0.05}, {"lambda", "optimal"}, {"alpha_n", nullptr}};
}

// null marks a key that is accepted but has no default
json defaults_for(const std::string& command) {
    json d = json::object();
    if (command == "samplesize") {
        d = spec_defaults();
    } else if (command == "calibrate") {
        d = spec_defaults();
        d.update({{"norm", "l2"}, {"policy", "strict"}, {"seed", 0}, {"m", 10}, {"mixture", "b"},
                  {"shape_csv", nullptr}, {"training_csv", nullptr}, {"training_n", nullptr}});
    } else if (command == "coverage") {
        d = spec_defaults();
        d.update({{"norm", "l2"}, {"seed", 0}, {"m", 10}, {"mixture", "b"}, {"trials", 200},
                  {"mc_samples", 100000}, {"threads", 1}});
    } else if (command == "raster") {
        d = spec_defaults();
        d.update({{"norm", "l2"}, {"seed", 0}, {"m", 1000}, {"mixture", "c"}, {"mc_samples", 50000},
                  {"resolution", 256}});
    } else if (command == "solve") {
        d = {{"model", nullptr}, {"radius", nullptr}};
    } else {
        throw UsageError("unknown command '" + command + "'");
    }
    return d;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

double parse_real(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw UsageError(what + ": expected a number, got '" + text + "'");
    return v;
}

std::uint64_t parse_count(const std::string& text, const std::string& what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw UsageError(what + ": expected a non-negative integer, got '" + text + "'");
    return v;
}

json flag_value(const Flag& f, const std::string& text) {
    switch (f.kind) {
    case Kind::Real:
        return parse_real(text, f.name);
    case Kind::Count:
        return parse_count(text, f.name);
    case Kind::Lambda:
        return text == "optimal" ? json(text) : json(parse_real(text, f.name));
    case Kind::Text:
        return text;
    case Kind::Path:
        return fs::absolute(text).lexically_normal().string();
    case Kind::JsonFile:
        return read_json_file(text);
    }
    return nullptr;
}

/// Matrix of numbers from a headerless CSV; blank lines are skipped.
PointSet read_csv_points(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        std::vector<double> row;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            const auto first = field.find_first_not_of(" \t");
            const auto last = field.find_last_not_of(" \t");
            field = first == std::string::npos ? "" : field.substr(first, last - first + 1);
            row.push_back(parse_real(field, path + " line " + std::to_string(rows.size() + 1)));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DimensionError(path + ": rows have different numbers of columns");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw EmptySampleError(path + ": no data rows");
    PointSet out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return out;
}

CalibrationSpec spec_from(const json& cfg) { return calibration_spec_from_json(cfg); }

GaussianMixture mixture_from(const json& cfg) { return gaussian_mixture_from_json(cfg.at("mixture")); }

/// Fills in derived values so that the stored config reruns without any
/// default or name lookup.
json resolve(const std::string& command, json cfg) {
    if (cfg.contains("lambda")) {
        const CalibrationSpec spec = spec_from(cfg);
        cfg["lambda"] = spec.lambda();
    }
    if (cfg.contains("mixture")) {
        if (cfg["mixture"].is_string())
            cfg["mixture"] = bundled_mixture(parse_bundled_mixture(cfg["mixture"].get<std::string>()));
        else
            cfg["mixture"] = gaussian_mixture_from_json(cfg["mixture"]);
    }
    if (cfg.contains("norm"))
        cfg["norm"] = NormSpec::parse(cfg["norm"].get<std::string>()).name();
    if (cfg.contains("policy")) {
        const auto p = cfg["policy"].get<std::string>();
        if (p != "strict" && p != "advisory")
            throw UsageError("policy must be 'strict' or 'advisory'");
    }
    for (const char* key : {"shape_csv", "training_csv"}) {
        if (cfg.contains(key) && !cfg[key].is_null())
            cfg[key] = fs::absolute(cfg[key].get<std::string>()).lexically_normal().string();
    }
    if (command == "calibrate" && !cfg["shape_csv"].is_null() && cfg["shape_csv"] == cfg["training_csv"])
        throw UsageError("shape and training samples must come from different sources");
    if (command == "solve") {
        if (cfg["model"].is_null())
            cfg["model"] = bundled_example_program();
        else if (cfg["model"].is_string())
            cfg["model"] = read_json_file(cfg["model"].get<std::string>());
        cfg["model"] = robust_program_from_json(cfg["model"]);
    }
    return cfg;
}

json merge_config(const std::string& command, const json& overrides) {
    json cfg = defaults_for(command);
    if (!overrides.is_object())
        throw UsageError("config must be a JSON object");
    for (const auto& [key, value] : overrides.items()) {
        if (!cfg.contains(key))
            throw UsageError("'" + key + "' is not a setting of " + command);
        cfg[key] = value;
    }
    return cfg;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Collects output files of one run under an optional directory.
class OutputDir {
  public:
    explicit OutputDir(std::optional<fs::path> dir) : dir_(std::move(dir)) {
        if (dir_) {
            std::error_code ec;
            fs::create_directories(*dir_, ec);
            if (ec)
                throw UsageError("cannot create " + dir_->string() + ": " + ec.message());
        }
    }

    bool enabled() const { return dir_.has_value(); }

    template <class Writer>
    void write(const std::string& name, Writer&& writer) {
        if (!dir_)
            return;
        std::ofstream out(*dir_ / name, std::ios::binary);
        if (!out)
            throw UsageError("cannot write " + (*dir_ / name).string());
        writer(out);
        if (!out)
            throw UsageError("write failed for " + (*dir_ / name).string());
        files_.push_back(name);
    }

    void write_text(const std::string& name, const std::string& text) {
        write(name, [&](std::ostream& o) { o << text; });
    }

    void write_manifest(const std::string& command, const json& cfg, const std::vector<std::string>& warnings) {
        if (!dir_)
            return;
        json m = {{"command", command},
                  {"version", std::string(version())},
                  {"seed", cfg.contains("seed") ? cfg["seed"] : json(nullptr)},
                  {"config", cfg},
                  {"outputs", files_},
                  {"warnings", warnings}};
        std::ofstream out(*dir_ / "manifest.json", std::ios::binary);
        if (!(out << dump(m)))
            throw UsageError("cannot write the run manifest");
    }

  private:
    std::optional<fs::path> dir_;
    std::vector<std::string> files_;
};

json box_json(const Box& box) {
    return {{"lower", std::vector<double>(box.lower.data(), box.lower.data() + box.lower.size())},
            {"upper", std::vector<double>(box.upper.data(), box.upper.data() + box.upper.size())}};
}

int cmd_samplesize(const json& cfg, OutputDir& dir, std::ostream& out) {
    const CalibrationSpec spec = spec_from(cfg);
    const ViolationPair bounds = chernoff_violation_bounds(spec.n_min(), spec.alpha(), spec.epsilon(), spec.alpha_n());
    const json result = {{"alpha", spec.alpha()},
                         {"epsilon", spec.epsilon()},
                         {"delta", spec.delta()},
                         {"lambda", spec.lambda()},
                         {"c", sample_size_constant(spec.lambda(), spec.alpha(), spec.epsilon())},
                         {"n_min", spec.n_min()},
                         {"alpha_n", spec.alpha_n()},
                         {"bounds", {{"below", bounds.below}, {"above", bounds.above}}}};
    out << dump(result);
    dir.write_text("samplesize.json", dump(result));
    dir.write_manifest("samplesize", cfg, {});
    return Success;
}

int cmd_calibrate(const json& cfg, OutputDir& dir, std::ostream& out, std::ostream& err) {
    const CalibrationSpec spec = spec_from(cfg);
    const NormSpec norm = NormSpec::parse(cfg["norm"].get<std::string>());
    const auto seed = cfg["seed"].get<std::uint64_t>();
    const std::optional<GaussianMixture> mix =
        cfg["shape_csv"].is_null() || cfg["training_csv"].is_null() ? std::optional(mixture_from(cfg)) : std::nullopt;

    const PointSet shape = cfg["shape_csv"].is_null()
                               ? sample(*mix, RandomStream(seed, 0), cfg["m"].get<std::size_t>())
                               : read_csv_points(cfg["shape_csv"].get<std::string>());
    const std::uint64_t n = cfg["training_n"].is_null() ? spec.n_min() : cfg["training_n"].get<std::uint64_t>();
    const PointSet training = cfg["training_csv"].is_null() ? sample(*mix, RandomStream(seed, 1), n)
                                                            : read_csv_points(cfg["training_csv"].get<std::string>());

    const auto policy = cfg["policy"] == "advisory" ? SampleSizePolicy::Advisory : SampleSizePolicy::Strict;
    const CalibrationResult result = calibrate_radius(shape, norm, training, spec, policy);
    std::vector<std::string> warnings;
    if (result.warning) {
        err << "warning: " << *result.warning << '\n';
        warnings.push_back(*result.warning);
    }
    const json summary = {{"set", result.set},
                          {"alpha_n", spec.alpha_n()},
                          {"n_min", spec.n_min()},
                          {"training_size", training.rows()},
                          {"shape_size", shape.rows()}};
    out << dump(summary);
    dir.write_text("set.json", dump(result.set));
    dir.write_text("calibration.json", dump(summary));
    dir.write_manifest("calibrate", cfg, warnings);
    return Success;
}

int cmd_coverage(const json& cfg, OutputDir& dir, std::ostream& out) {
    ConsistencyConfig exp{mixture_from(cfg), cfg["m"].get<Eigen::Index>(), spec_from(cfg)};
    exp.trials = cfg["trials"].get<std::size_t>();
    exp.coverage_samples = cfg["mc_samples"].get<std::uint64_t>();
    exp.seed = cfg["seed"].get<std::uint64_t>();
    exp.norm = NormSpec::parse(cfg["norm"].get<std::string>());
    exp.threads = cfg["threads"].get<unsigned>();
    const CoverageReport report = run_consistency_experiment(exp);
    const json summary = coverage_summary(report, exp);
    out << dump(summary);
    dir.write("coverage.csv", [&](std::ostream& o) { write_coverage_csv(o, report); });
    dir.write_text("summary.json", dump(summary));
    dir.write_manifest("coverage", cfg, {});
    return Success;
}

int cmd_raster(const json& cfg, OutputDir& dir, std::ostream& out) {
    const GaussianMixture mix = mixture_from(cfg);
    RoleOfMConfig study{mix, spec_from(cfg)};
    study.m_values = {cfg["m"].get<Eigen::Index>()};
    study.seed = cfg["seed"].get<std::uint64_t>();
    study.norm = NormSpec::parse(cfg["norm"].get<std::string>());
    study.volume_samples = cfg["mc_samples"].get<std::uint64_t>();
    study.raster_resolution = cfg["resolution"].get<std::size_t>();
    if (study.raster_resolution == 0)
        throw DomainError("raster resolution must be positive");
    const RoleOfMEntry entry = run_role_of_m_study(study).front();
    const RasterGrid grid = entry.raster ? *entry.raster
                                         : raster_set(entry.set, entry.box, study.raster_resolution);
    const DensityRaster dens = raster_density(mix, entry.box, study.raster_resolution);

    const json summary = {{"m", entry.m},
                          {"radius", entry.radius()},
                          {"box", box_json(entry.box)},
                          {"resolution", grid.resolution},
                          {"inside_fraction", grid.inside_fraction()},
                          {"raster_area", grid.inside_fraction() * entry.box.volume()},
                          {"mc_volume", entry.volume}};
    out << dump(summary);
    dir.write_text("set.json", dump(entry.set));
    dir.write("set.pgm", [&](std::ostream& o) { write_pgm(o, grid); });
    dir.write("set.csv", [&](std::ostream& o) { write_grid_csv(o, grid); });
    dir.write("density.pgm", [&](std::ostream& o) { write_pgm(o, dens); });
    dir.write_text("raster.json", dump(summary));
    dir.write_manifest("raster", cfg, {});
    return Success;
}

int cmd_solve(const json& cfg, OutputDir& dir, std::ostream& out, std::ostream& err) {
    RobustLinearProgram model = robust_program_from_json(cfg["model"]);
    if (!cfg["radius"].is_null())
        model = model.with_radius(cfg["radius"].get<double>());
    const SolveReport report = solve(model);
    const json result = report;
    out << dump(result);
    dir.write_text("solution.json", dump(result));
    std::vector<std::string> warnings;
    if (report.status != SolveStatus::Optimal) {
        warnings.push_back("solver status: " + std::string(to_string(report.status)));
        err << "error: " << warnings.back() << '\n';
    }
    dir.write_manifest("solve", cfg, warnings);
    return report.status == SolveStatus::Optimal ? Success : SolverNotOptimal;
}

int dispatch(const std::string& command, const json& cfg, const std::optional<fs::path>& out_dir,
             std::ostream& out, std::ostream& err) {
    OutputDir dir(out_dir);
    if (command == "samplesize")
        return cmd_samplesize(cfg, dir, out);
    if (command == "calibrate")
        return cmd_calibrate(cfg, dir, out, err);
    if (command == "coverage")
        return cmd_coverage(cfg, dir, out);
    if (command == "raster")
        return cmd_raster(cfg, dir, out);
    if (command == "solve")
        return cmd_solve(cfg, dir, out, err);
    throw UsageError("unknown command '" + command + "'");
}

const char* type_name(Kind kind) {
    switch (kind) {
    case Kind::Real:
        return "REAL";
    case Kind::Count:
        return "UINT";
    case Kind::Lambda:
        return "REAL|optimal";
    case Kind::Text:
        return "NAME";
    case Kind::Path:
    case Kind::JsonFile:
        return "PATH";
    }
    return "";
}

struct CommandOptions {
    std::string config_path;
    std::string out_dir;
    std::string mixture_file;
    std::map<std::string, std::string> raw;
    bool strict = false;
    bool advisory = false;
};

void add_command(CLI::App& app, const std::string& name, const std::string& help, CommandOptions& opts) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "JSON config; flags override its values")->type_name("PATH");
    sub->add_option("--out-dir", opts.out_dir, "write outputs and manifest.json here")->type_name("DIR");
    const json defaults = defaults_for(name);
    for (const auto& [key, value] : defaults.items()) {
        if (key == "policy")
            continue;
        const Flag& f = flag_for(key);
        std::string help = f.help;
        if (!value.is_null())
            help += " [" + (value.is_string() ? value.get<std::string>() : value.dump()) + "]";
        sub->add_option(f.name, opts.raw[key], help)->type_name(type_name(f.kind));
    }
    if (defaults.contains("policy")) {
        auto* strict = sub->add_flag("--strict", opts.strict, "refuse training samples below n_min (default)");
        sub->add_flag("--advisory", opts.advisory, "warn instead of refusing undersized training samples")
            ->excludes(strict);
    }
    if (defaults.contains("mixture"))
        sub->add_option("--mixture-file", opts.mixture_file, "mixture JSON instead of a bundled one")
            ->type_name("PATH")
            ->excludes("--mixture");
}

json config_from_flags(const std::string& command, CLI::App& sub, const CommandOptions& opts) {
    json overrides = json::object();
    if (!opts.config_path.empty())
        overrides = read_json_file(opts.config_path);
    if (!overrides.is_object())
        throw UsageError(opts.config_path + ": config must be a JSON object");
    for (const auto& [key, text] : opts.raw) {
        const Flag& f = flag_for(key);
        if (sub.get_option(f.name)->count() > 0)
            overrides[key] = flag_value(f, text);
    }
    if (opts.strict)
        overrides["policy"] = "strict";
    if (opts.advisory)
        overrides["policy"] = "advisory";
    if (!opts.mixture_file.empty())
        overrides["mixture"] = read_json_file(opts.mixture_file);
    return resolve(command, merge_config(command, overrides));
}

} // namespace

std::string_view version() noexcept { return CCROBUST_VERSION; }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Calibrated union-of-balls uncertainty sets and robust LPs"};
    app.name("ccrobust");
    app.set_version_flag("--version", std::string(version()));
    app.require_subcommand(1);

    std::map<std::string, CommandOptions> options;
    const std::pair<const char*, const char*> commands[] = {
        {"samplesize", "training-sample size and Chernoff bounds for (alpha, eps, delta, lambda)"},
        {"calibrate", "calibrate the common radius of a union of balls"},
        {"coverage", "repeated calibration with Monte-Carlo coverage estimates"},
        {"raster", "calibrate one set and rasterize it with the mixture density"},
        {"solve", "solve a robust linear program"},
    };
    for (const auto& [name, help] : commands)
        add_command(app, name, help, options[name]);

    std::string manifest_path;
    std::string rerun_dir;
    CLI::App* rerun = app.add_subcommand("rerun", "repeat a run from its manifest.json");
    rerun->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
    rerun->add_option("--out-dir", rerun_dir, "directory for the repeated outputs")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);

        if (rerun->parsed()) {
            const json manifest = read_json_file(manifest_path);
            const auto command = manifest.at("command").get<std::string>();
            if (manifest.value("version", "") != version())
                err << "warning: manifest written by version " << manifest.value("version", "?") << '\n';
            const json cfg = resolve(command, merge_config(command, manifest.at("config")));
            return dispatch(command, cfg, fs::path(rerun_dir), out, err);
        }
        for (auto* sub : app.get_subcommands()) {
            const std::string name = sub->get_name();
            const CommandOptions& opts = options.at(name);
            const json cfg = config_from_flags(name, *sub, opts);
            std::optional<fs::path> dir;
            if (!opts.out_dir.empty())
                dir = opts.out_dir;
            return dispatch(name, cfg, dir, out, err);
        }
        return Failure;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Success;
    } catch (const CLI::CallForVersion&) {
        out << version() << '\n';
        return Success;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return ConfigError;
    } catch (const UndersampledError& e) {
        err << "error: " << e.what() << '\n';
        return Undersampled;
    } catch (const std::invalid_argument& e) {
        // dimension, model, empty-sample and unsupported-input errors
        err << "error: " << e.what() << '\n';
        return ConfigError;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return ConfigError;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return ConfigError;
    } catch (const json::exception& e) {
        err << "error: invalid config: " << e.what() << '\n';
        return ConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return Failure;
    }
}

} // namespace ccrobust::cli
