// Command-line front end: reproducible experiments over the histogram
// classifier, the point-based baseline, and the perturbation protocols.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "refhist/baseline.hpp"
#include "refhist/dataset_io.hpp"
#include "refhist/featurizer.hpp"
#include "refhist/model_io.hpp"
#include "refhist/network.hpp"
#include "refhist/perturb.hpp"
#include "refhist/pipeline.hpp"
#include "refhist/point_cloud.hpp"
#include "refhist/seeding.hpp"
#include "refhist/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace refhist;

namespace {

// Flag layering: command line > --config JSON > REFHIST_SEED env (seed
// only) > built-in default. Config keys may be flat or nested under the
// subcommand name.
struct ConfigLayer {
    json root = json::object();
    std::string cmd;

    const json* find(const std::string& key) const {
        if (root.contains(cmd) && root[cmd].is_object() && root[cmd].contains(key))
            return &root[cmd][key];
        if (root.contains(key) && !root[key].is_object()) return &root[key];
        return nullptr;
    }

    template <typename T>
    T value(const std::string& key, T fallback) const {
        if (const json* v = find(key)) return v->get<T>();
        return fallback;
    }

    std::uint64_t seed_default() const {
        if (const json* v = find("seed")) return v->get<std::uint64_t>();
        if (const char* env = std::getenv("REFHIST_SEED")) return std::strtoull(env, nullptr, 10);
        return 0;
    }
};

ConfigLayer preload_config(int argc, char** argv) {
    ConfigLayer layer;
    if (argc > 1) layer.cmd = argv[1];
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        std::string path;
        if (arg.rfind("--config=", 0) == 0)
            path = arg.substr(9);
        else if (arg == "--config" && i + 1 < argc)
            path = argv[i + 1];
        else
            continue;
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        in >> layer.root;
        if (!layer.root.is_object())
            throw std::runtime_error("config file must hold a JSON object: " + path);
    }
    return layer;
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const std::string& s : split_csv(text)) {
        try {
            out.push_back(std::stod(s));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("cannot parse ") + what + " value: " + s);
        }
    }
    return out;
}

std::vector<int> parse_ints(const std::string& text, const char* what) {
    std::vector<int> out;
    for (const std::string& s : split_csv(text)) {
        try {
            out.push_back(std::stoi(s));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("cannot parse ") + what + " value: " + s);
        }
    }
    return out;
}

std::array<double, kNumFeatures> parse_bounds6(const std::string& text, const char* what) {
    const auto v = parse_doubles(text, what);
    if (v.size() != kNumFeatures)
        throw std::runtime_error(std::string(what) + " requires exactly 6 comma-separated values");
    std::array<double, kNumFeatures> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << text;
}

Dataset load_train_val(const std::string& train_path, const std::string& val_path) {
    Dataset train = read_jsonl_file(train_path);
    Dataset out;
    out.samples = std::move(train.samples);
    out.split.assign(out.samples.size(), Split::Train);
    if (!val_path.empty()) {
        Dataset val = read_jsonl_file(val_path);
        for (PointCloud& c : val.samples) {
            out.samples.push_back(std::move(c));
            out.split.push_back(Split::Val);
        }
    }
    return out;
}

// ---------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------

struct GenerateArgs {
    std::string out, profiles, budgets;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int run_generate(const GenerateArgs& a) {
    SceneConfig cfg = a.profiles.empty() ? default_scene_config() : load_scene_config(a.profiles);
    if (a.seed_given) cfg.seed = a.seed;
    if (!a.budgets.empty()) {
        const auto v = parse_ints(a.budgets, "--budgets");
        if (v.size() != kNumClasses)
            throw std::runtime_error("--budgets requires exactly 5 comma-separated counts");
        for (int c = 0; c < kNumClasses; ++c) {
            if (v[c] < 0) throw std::runtime_error("--budgets entries must be >= 0");
            cfg.budgets[c] = static_cast<std::size_t>(v[c]);
        }
    }
    const Dataset dataset = generate(cfg);
    write_jsonl_file(dataset, a.out);
    std::cout << "generated " << dataset.samples.size() << " samples -> " << a.out << "\n";
    return 0;
}

struct SplitArgs {
    std::string input, out_prefix, fractions = "0.7,0.2,0.1";
    std::uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
    const auto fr = parse_doubles(a.fractions, "--fractions");
    if (fr.size() != 3) throw std::runtime_error("--fractions requires exactly 3 values");
    const Dataset dataset = read_jsonl_file(a.input);
    const Dataset assigned = split_by_track(dataset, {fr[0], fr[1], fr[2]}, a.seed);
    for (const Split s : {Split::Train, Split::Val, Split::Test}) {
        Dataset part;
        for (std::size_t i : assigned.indices_of(s)) part.samples.push_back(assigned.samples[i]);
        const fs::path path = a.out_prefix + "." + std::string(to_string(s)) + ".jsonl";
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_jsonl_file(part, path);
        std::cout << to_string(s) << ": " << part.samples.size() << " samples -> " << path.string()
                  << "\n";
    }
    return 0;
}

struct TrainArgs {
    std::string train_path, val_path, out_dir;
    std::string arch = "refhist";
    std::string norm = "stat_clip", manual_lo, manual_hi;
    std::string mode = "raw", activation = "relu";
    std::string hidden = "16,16", point_layers = "16,16", classifier_hidden = "16";
    int epochs = 1000, batch_size = 64, bins = 20;
    double lr = 1e-5;
    std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.lr = a.lr;
    cfg.bins = a.bins;
    cfg.seed = a.seed;
    cfg.input_mode = input_mode_from_string(a.mode);
    cfg.activation = activation_from_string(a.activation);

    const auto hidden = parse_ints(a.hidden, "--hidden");
    if (hidden.size() != 2) throw std::runtime_error("--hidden requires exactly 2 widths");
    cfg.hidden = {hidden[0], hidden[1]};

    const NormKind kind = norm_kind_from_string(a.norm);
    if (kind == NormKind::ManualClip) {
        if (a.manual_lo.empty() || a.manual_hi.empty())
            throw std::runtime_error("manual_clip requires --manual-lo and --manual-hi");
        cfg.norm_strategy = NormStrategy::manual(parse_bounds6(a.manual_lo, "--manual-lo"),
                                                 parse_bounds6(a.manual_hi, "--manual-hi"));
    } else {
        cfg.norm_strategy.kind = kind;
    }

    const Dataset dataset = load_train_val(a.train_path, a.val_path);
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);

    if (a.arch == "refhist") {
        const TrainResult result = train(dataset, cfg);
        save_model(result.model, dir / "model.json");
        save_normalizer(result.norm, dir / "normalizer.json");
        write_text_file(dir / "curve.csv", curve_to_csv(result.curve));
        std::cout << "trained refhist: " << cfg.epochs << " epochs, final val balanced accuracy "
                  << format_double(result.curve.back().val_balanced_accuracy) << "\n";
    } else if (a.arch == "baseline") {
        PointNetConfig net;
        net.point_layers = parse_ints(a.point_layers, "--point-layers");
        net.classifier_hidden = parse_ints(a.classifier_hidden, "--classifier-hidden");
        const BaselineTrainResult result = baseline_train(dataset, cfg, net);
        save_model(result.model, dir / "model.json");
        save_normalizer(result.norm, dir / "normalizer.json");
        write_text_file(dir / "curve.csv", curve_to_csv(result.curve));
        std::cout << "trained baseline: " << cfg.epochs << " epochs, final val balanced accuracy "
                  << format_double(result.curve.back().val_balanced_accuracy) << "\n";
    } else {
        throw std::runtime_error("unknown --arch '" + a.arch + "' (refhist or baseline)");
    }
    return 0;
}

EvalReport evaluate_any(const AnyModel& model, const Normalizer& norm,
                        std::span<const PointCloud> samples, int threads) {
    return std::visit([&](const auto& m) { return evaluate(m, norm, samples, threads); }, model);
}

struct EvalArgs {
    std::string model, normalizer, data, out_report, out_confusion;
    int threads = 1;
};

int run_eval(const EvalArgs& a) {
    const AnyModel model = load_any_model(a.model);
    const Normalizer norm = load_normalizer(a.normalizer);
    const Dataset dataset = read_jsonl_file(a.data);
    const EvalReport report = evaluate_any(model, norm, dataset.samples, a.threads);
    if (!a.out_report.empty()) write_text_file(a.out_report, report_to_json(report) + "\n");
    if (!a.out_confusion.empty()) write_text_file(a.out_confusion, confusion_to_csv(report));
    std::cout << "balanced accuracy " << format_double(report.balanced_accuracy) << " over "
              << dataset.samples.size() << " samples\n";
    if (a.out_report.empty() && a.out_confusion.empty())
        std::cout << report_to_json(report) << "\n";
    return 0;
}

struct NoiseSweepArgs {
    std::string model, normalizer, data, sigmas = "0,0.0125,0.025", out;
    std::uint64_t seed = 0;
    int threads = 1;
};

int run_noise_sweep(const NoiseSweepArgs& a) {
    const AnyModel model = load_any_model(a.model);
    const Normalizer norm = load_normalizer(a.normalizer);
    const Dataset dataset = read_jsonl_file(a.data);
    const auto sigmas = parse_doubles(a.sigmas, "--sigmas");

    std::ostringstream csv;
    csv << "sigma,balanced_accuracy\n";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const NoiseSpec spec{sigmas[i], derive_seed(a.seed, "noise:" + std::to_string(i))};
        const auto perturbed = add_noise(dataset.samples, norm, spec);
        const EvalReport report = evaluate_any(model, norm, perturbed, a.threads);
        csv << format_double(sigmas[i]) << ',' << format_double(report.balanced_accuracy) << '\n';
    }
    if (!a.out.empty())
        write_text_file(a.out, csv.str());
    else
        std::cout << csv.str();
    return 0;
}

struct RemoveSweepArgs {
    std::string model, normalizer, data, features = "x,y,z,radial_distance,doppler_velocity,rcs";
    std::string fractions = "0.05,0.9", out, confusion_prefix;
    std::uint64_t seed = 0;
    int threads = 1;
};

int run_remove_sweep(const RemoveSweepArgs& a) {
    const AnyModel model = load_any_model(a.model);
    const Normalizer norm = load_normalizer(a.normalizer);
    const Dataset dataset = read_jsonl_file(a.data);

    std::vector<FeatureKind> features;
    for (const std::string& name : split_csv(a.features))
        features.push_back(feature_from_string(name));
    const auto fractions = parse_doubles(a.fractions, "--fractions");

    const auto cells = std::visit(
        [&](const auto& m) {
            return importance_sweep(m, norm, dataset.samples, features, fractions, a.seed,
                                    a.threads);
        },
        model);

    if (!a.out.empty())
        write_text_file(a.out, sweep_to_csv(cells));
    else
        std::cout << sweep_to_csv(cells);

    if (!a.confusion_prefix.empty()) {
        for (const SweepCell& cell : cells) {
            const fs::path path = a.confusion_prefix + "_" + std::string(to_string(cell.feature)) +
                                  "_" + format_double(cell.fraction) + ".csv";
            write_text_file(path, confusion_to_csv(cell.report));
        }
    }
    return 0;
}

struct AblateArgs {
    std::string model, normalizer, data, targets, largest, out;
    std::size_t sample = 0;
};

int run_ablate(const AblateArgs& a) {
    const AnyModel any = load_any_model(a.model);
    const MlpModel* model = std::get_if<MlpModel>(&any);
    if (!model)
        throw std::runtime_error(
            "ablate requires a histogram (mlp) model; per-value removal is not defined for the "
            "zero-substitution baseline");
    const Normalizer norm = load_normalizer(a.normalizer);
    const Dataset dataset = read_jsonl_file(a.data);
    if (a.sample >= dataset.samples.size())
        throw std::runtime_error("--sample index out of range for " + a.data);
    const PointCloud& cloud = dataset.samples[a.sample];

    std::vector<AblationTarget> targets;
    if (!a.largest.empty()) {
        const int f = static_cast<int>(feature_from_string(a.largest));
        std::optional<std::size_t> best;
        for (std::size_t p = 0; p < cloud.points.size(); ++p) {
            if (!cloud.points[p][f].has_value()) continue;
            if (!best || *cloud.points[p][f] > *cloud.points[*best][f]) best = p;
        }
        if (!best)
            throw std::runtime_error("nothing to ablate: no present value of feature " +
                                     a.largest + " in sample " + std::to_string(a.sample));
        targets.push_back({*best, static_cast<FeatureKind>(f)});
    }
    for (const std::string& pair : split_csv(a.targets)) {
        if (pair.empty()) continue;
        const auto colon = pair.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("--targets entries must look like point:feature");
        targets.push_back({static_cast<std::size_t>(std::stoull(pair.substr(0, colon))),
                           feature_from_string(pair.substr(colon + 1))});
    }

    const AblationResult result = ablate_sample(*model, norm, cloud, targets);
    const std::string text = ablation_to_json(result) + "\n";
    if (!a.out.empty())
        write_text_file(a.out, text);
    else
        std::cout << text;
    return 0;
}

struct ParamsArgs {
    std::string grid = "4,8,16,32x4,8,16,32", out_file;
    int input = 120, out = 5;
};

int run_params(const ParamsArgs& a) {
    const auto x = a.grid.find('x');
    if (x == std::string::npos) throw std::runtime_error("--grid must look like '4,8,16x4,8,16'");
    const auto layer1 = parse_ints(a.grid.substr(0, x), "--grid");
    const auto layer2 = parse_ints(a.grid.substr(x + 1), "--grid");

    std::ostringstream csv;
    csv << "layer1,layer2,parameters\n";
    for (int h1 : layer1) {
        for (int h2 : layer2) {
            MlpConfig cfg;
            cfg.input_dim = a.input;
            cfg.hidden = {h1, h2};
            cfg.output_dim = a.out;
            csv << h1 << ',' << h2 << ',' << count_parameters(cfg) << '\n';
        }
    }
    if (!a.out_file.empty())
        write_text_file(a.out_file, csv.str());
    else
        std::cout << csv.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const ConfigLayer cfg = preload_config(argc, argv);

        CLI::App app{"Histogram-based radar point-cloud classification toolkit"};
        app.require_subcommand(1);
        app.fallthrough();  // lets --config appear after the subcommand name
        std::string config_path;
        app.add_option("--config", config_path, "JSON file supplying any flag as a default");

        GenerateArgs gen;
        auto* cmd_gen = app.add_subcommand("generate", "Generate a synthetic labeled corpus");
        cmd_gen->add_option("--out", gen.out, "Output JSONL path")->required();
        gen.profiles = cfg.value<std::string>("profiles", "");
        cmd_gen->add_option("--profiles", gen.profiles, "Scene profile config JSON");
        gen.budgets = cfg.value<std::string>("budgets", "");
        cmd_gen->add_option("--budgets", gen.budgets, "Per-class sample counts (5 values)");
        gen.seed = cfg.seed_default();
        gen.seed_given = cfg.find("seed") != nullptr || std::getenv("REFHIST_SEED") != nullptr;
        auto* gen_seed = cmd_gen->add_option("--seed", gen.seed, "Master seed");

        SplitArgs spl;
        auto* cmd_split = app.add_subcommand("split", "Track-exclusive train/val/test split");
        cmd_split->add_option("--input", spl.input, "Input JSONL path")->required();
        cmd_split->add_option("--out-prefix", spl.out_prefix, "Output prefix")->required();
        spl.fractions = cfg.value<std::string>("fractions", spl.fractions);
        cmd_split->add_option("--fractions", spl.fractions, "Three fractions, e.g. 0.7,0.2,0.1");
        spl.seed = cfg.seed_default();
        cmd_split->add_option("--seed", spl.seed, "Master seed");

        TrainArgs tr;
        auto* cmd_train = app.add_subcommand("train", "Train a classifier");
        cmd_train->add_option("--train", tr.train_path, "Training JSONL")->required();
        cmd_train->add_option("--val", tr.val_path, "Validation JSONL");
        cmd_train->add_option("--out-dir", tr.out_dir, "Output directory")->required();
        tr.arch = cfg.value<std::string>("arch", tr.arch);
        cmd_train->add_option("--arch", tr.arch, "refhist or baseline");
        tr.epochs = cfg.value<int>("epochs", tr.epochs);
        cmd_train->add_option("--epochs", tr.epochs, "Training epochs");
        tr.batch_size = cfg.value<int>("batch_size", tr.batch_size);
        cmd_train->add_option("--batch-size", tr.batch_size, "Mini-batch size");
        tr.lr = cfg.value<double>("lr", tr.lr);
        cmd_train->add_option("--lr", tr.lr, "Adam learning rate");
        tr.bins = cfg.value<int>("bins", tr.bins);
        cmd_train->add_option("--bins", tr.bins, "Histogram bins per feature");
        tr.norm = cfg.value<std::string>("norm", tr.norm);
        cmd_train->add_option("--norm", tr.norm, "full_range, manual_clip or stat_clip");
        cmd_train->add_option("--manual-lo", tr.manual_lo, "manual_clip lower bounds (6 values)");
        cmd_train->add_option("--manual-hi", tr.manual_hi, "manual_clip upper bounds (6 values)");
        tr.mode = cfg.value<std::string>("mode", tr.mode);
        cmd_train->add_option("--mode", tr.mode, "Histogram input mode: raw or density");
        tr.hidden = cfg.value<std::string>("hidden", tr.hidden);
        cmd_train->add_option("--hidden", tr.hidden, "MLP hidden widths, e.g. 16,16");
        tr.activation = cfg.value<std::string>("activation", tr.activation);
        cmd_train->add_option("--activation", tr.activation, "relu or tanh");
        cmd_train->add_option("--point-layers", tr.point_layers, "Baseline per-point widths");
        cmd_train->add_option("--classifier-hidden", tr.classifier_hidden,
                              "Baseline classifier widths");
        tr.seed = cfg.seed_default();
        cmd_train->add_option("--seed", tr.seed, "Master seed");

        EvalArgs ev;
        auto* cmd_eval = app.add_subcommand("eval", "Evaluate a model on a dataset");
        cmd_eval->add_option("--model", ev.model, "Model JSON")->required();
        cmd_eval->add_option("--normalizer", ev.normalizer, "Normalizer JSON")->required();
        cmd_eval->add_option("--data", ev.data, "Dataset JSONL")->required();
        cmd_eval->add_option("--out-report", ev.out_report, "EvalReport JSON path");
        cmd_eval->add_option("--out-confusion", ev.out_confusion, "Confusion CSV path");
        ev.threads = cfg.value<int>("threads", 1);
        cmd_eval->add_option("--threads", ev.threads, "Evaluation threads");

        NoiseSweepArgs ns;
        auto* cmd_noise = app.add_subcommand("noise-sweep", "Balanced accuracy vs noise sigma");
        cmd_noise->add_option("--model", ns.model, "Model JSON")->required();
        cmd_noise->add_option("--normalizer", ns.normalizer, "Normalizer JSON")->required();
        cmd_noise->add_option("--data", ns.data, "Dataset JSONL")->required();
        ns.sigmas = cfg.value<std::string>("sigmas", ns.sigmas);
        cmd_noise->add_option("--sigmas", ns.sigmas, "Noise sigmas (normalized units)");
        cmd_noise->add_option("--out", ns.out, "Output CSV path");
        ns.seed = cfg.seed_default();
        cmd_noise->add_option("--seed", ns.seed, "Master seed");
        ns.threads = cfg.value<int>("threads", 1);
        cmd_noise->add_option("--threads", ns.threads, "Evaluation threads");

        RemoveSweepArgs rs;
        auto* cmd_remove =
            app.add_subcommand("remove-sweep", "Feature-removal importance sweep");
        cmd_remove->add_option("--model", rs.model, "Model JSON")->required();
        cmd_remove->add_option("--normalizer", rs.normalizer, "Normalizer JSON")->required();
        cmd_remove->add_option("--data", rs.data, "Dataset JSONL")->required();
        rs.features = cfg.value<std::string>("features", rs.features);
        cmd_remove->add_option("--features", rs.features, "Feature names to remove");
        rs.fractions = cfg.value<std::string>("fractions", rs.fractions);
        cmd_remove->add_option("--fractions", rs.fractions, "Removal fractions");
        cmd_remove->add_option("--out", rs.out, "Summary CSV path");
        cmd_remove->add_option("--confusion-prefix", rs.confusion_prefix,
                               "Write one confusion CSV per cell with this prefix");
        rs.seed = cfg.seed_default();
        cmd_remove->add_option("--seed", rs.seed, "Master seed");
        rs.threads = cfg.value<int>("threads", 1);
        cmd_remove->add_option("--threads", rs.threads, "Evaluation threads");

        AblateArgs ab;
        auto* cmd_ablate = app.add_subcommand("ablate", "Per-sample feature-value ablation");
        cmd_ablate->add_option("--model", ab.model, "Model JSON")->required();
        cmd_ablate->add_option("--normalizer", ab.normalizer, "Normalizer JSON")->required();
        cmd_ablate->add_option("--data", ab.data, "Dataset JSONL")->required();
        cmd_ablate->add_option("--sample", ab.sample, "Sample index")->required();
        cmd_ablate->add_option("--targets", ab.targets, "point:feature pairs, comma separated");
        cmd_ablate->add_option("--largest", ab.largest,
                               "Ablate the largest present value of this feature");
        cmd_ablate->add_option("--out", ab.out, "Report JSON path");

        ParamsArgs pa;
        auto* cmd_params = app.add_subcommand("params", "Parameter-count table for MLP sizes");
        pa.input = cfg.value<int>("input", pa.input);
        cmd_params->add_option("--input", pa.input, "Input dimension");
        pa.out = cfg.value<int>("out", pa.out);
        cmd_params->add_option("--out", pa.out, "Output dimension");
        pa.grid = cfg.value<std::string>("grid", pa.grid);
        cmd_params->add_option("--grid", pa.grid, "layer1 list x layer2 list");
        cmd_params->add_option("--out-file", pa.out_file, "CSV path (stdout if omitted)");

        CLI11_PARSE(app, argc, argv);

        if (cmd_gen->parsed()) {
            gen.seed_given = gen.seed_given || gen_seed->count() > 0;
            return run_generate(gen);
        }
        if (cmd_split->parsed()) return run_split(spl);
        if (cmd_train->parsed()) return run_train(tr);
        if (cmd_eval->parsed()) return run_eval(ev);
        if (cmd_noise->parsed()) return run_noise_sweep(ns);
        if (cmd_remove->parsed()) return run_remove_sweep(rs);
        if (cmd_ablate->parsed()) return run_ablate(ab);
        if (cmd_params->parsed()) return run_params(pa);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
