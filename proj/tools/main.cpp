// mixaug command-line driver: synth / train / eval / augment-preview / report.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixaug/dataio.hpp"
#include "mixaug/errors.hpp"
#include "mixaug/metrics.hpp"
#include "mixaug/network.hpp"
#include "mixaug/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::vector<double> parse_real_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw UsageError("bad number '" + cell + "' in list '" + csv + "'");
        }
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            out.push_back(std::stoull(cell));
        } catch (const std::exception&) {
            throw UsageError("bad seed '" + cell + "' in list '" + csv + "'");
        }
    }
    return out;
}

double median_sorted(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    if (n % 2 == 1) return v[lo + n / 2];
    return 0.5 * (v[lo + n / 2 - 1] + v[lo + n / 2]);
}

struct Summary {
    double median = 0.0;
    double iqr = 0.0;
};

// Tukey-hinge quartiles: both halves include the middle element when n is odd.
Summary summarize(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    Summary s;
    s.median = median_sorted(v, 0, v.size());
    if (v.size() < 2) return s;
    const std::size_t half = v.size() / 2;
    const std::size_t upper_lo = v.size() % 2 == 0 ? half : half;
    const double q1 = median_sorted(v, 0, v.size() % 2 == 0 ? half : half + 1);
    const double q3 = median_sorted(v, upper_lo, v.size());
    s.iqr = q3 - q1;
    return s;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw mixaug::LoadError("cannot open for writing: " + path);
    }
    f << text;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    std::size_t classes = 7;
    std::size_t per_class = 200;
    std::size_t size = 16;
    std::uint64_t seed = 0;
    std::string out;
    std::string imbalance;
    bool landmarks = false;
};

int cmd_synth(const SynthArgs& args) {
    if (args.classes < 2) throw UsageError("--classes must be at least 2");
    if (args.per_class < 2) throw UsageError("--per-class must be at least 2");
    if (args.size < 8) throw UsageError("--size must be at least 8");
    if (args.out.empty()) throw UsageError("--out is required");

    mixaug::SyntheticOptions opts;
    opts.classes = args.classes;
    opts.per_class = args.per_class;
    opts.size = args.size;
    opts.seed = args.seed;
    if (!args.imbalance.empty()) {
        opts.imbalance = parse_real_list(args.imbalance);
        if (opts.imbalance.size() != args.classes) {
            throw UsageError("--imbalance needs exactly one weight per class");
        }
    }

    mixaug::SyntheticDataset data = mixaug::generate_synthetic(opts);
    mixaug::write_synthetic(data, args.out, args.landmarks);
    std::cout << "wrote " << data.train.size() << " train / " << data.eval.size()
              << " eval images (" << args.size << "x" << args.size << ", " << args.classes
              << " classes) under " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string mode = "vanilla";
    std::optional<double> alpha;
    double dropout = 0.0;
    double flip_prob = 0.0;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t patience = 15;
    std::string monitor = "accuracy";
    std::string seeds_csv;
    std::optional<std::uint64_t> seed;
    std::string data;
    std::string out;
};

void apply_json_config(const std::string& path, TrainArgs& args) {
    std::ifstream f(path);
    if (!f) {
        throw UsageError("config file not readable: " + path);
    }
    json cfg;
    try {
        f >> cfg;
    } catch (const json::exception& e) {
        throw UsageError("config file " + path + " is not valid JSON: " + e.what());
    }
    for (const auto& [key, value] : cfg.items()) {
        try {
            if (key == "mode") {
                args.mode = value.get<std::string>();
            } else if (key == "alpha") {
                args.alpha = value.get<double>();
            } else if (key == "dropout") {
                args.dropout = value.get<double>();
            } else if (key == "flip_prob") {
                args.flip_prob = value.get<double>();
            } else if (key == "batch_size") {
                args.batch_size = value.get<std::size_t>();
            } else if (key == "lr") {
                args.lr = value.get<double>();
            } else if (key == "epochs") {
                args.epochs = value.get<std::size_t>();
            } else if (key == "patience") {
                args.patience = value.get<std::size_t>();
            } else if (key == "monitor") {
                args.monitor = value.get<std::string>();
            } else if (key == "seed") {
                args.seed = value.get<std::uint64_t>();
            } else if (key == "seeds") {
                args.seeds_csv = value.get<std::string>();
            } else if (key == "data") {
                args.data = value.get<std::string>();
            } else if (key == "out") {
                args.out = value.get<std::string>();
            } else {
                throw UsageError("unknown config key '" + key + "' in " + path);
            }
        } catch (const json::exception& e) {
            throw UsageError("config key '" + key + "' in " + path + ": " + e.what());
        }
    }
}

int cmd_train(const TrainArgs& args) {
    const mixaug::TrainMode mode = [&] {
        try {
            return mixaug::parse_train_mode(args.mode);
        } catch (const mixaug::ArgumentError& e) {
            throw UsageError(e.what());
        }
    }();
    if (mode != mixaug::TrainMode::vanilla && !args.alpha) {
        throw UsageError("--alpha is required for mixup/mixaugment training");
    }
    if (mode == mixaug::TrainMode::vanilla && args.alpha) {
        throw UsageError("--alpha is only meaningful for mixup/mixaugment training");
    }
    if (args.data.empty()) throw UsageError("--data is required");
    if (args.out.empty()) throw UsageError("--out is required");
    if (!args.seeds_csv.empty() && args.seed) {
        throw UsageError("use either --seed or --seeds, not both");
    }
    std::vector<std::uint64_t> seeds;
    if (!args.seeds_csv.empty()) {
        seeds = parse_seed_list(args.seeds_csv);
    } else {
        seeds.push_back(args.seed.value_or(0));
    }
    if (seeds.empty()) throw UsageError("the seed list is empty");

    mixaug::MonitorMetric monitor;
    try {
        monitor = mixaug::parse_monitor_metric(args.monitor);
    } catch (const mixaug::ArgumentError& e) {
        throw UsageError(e.what());
    }

    const double alpha = args.alpha.value_or(0.1);
    const bool underfit_risk = mode != mixaug::TrainMode::vanilla && alpha >= 4.0;
    if (underfit_risk) {
        std::cerr << "warning: alpha=" << alpha
                  << " is in the range known to cause underfitting; expect degraded accuracy\n";
    }

    const fs::path data_dir(args.data);
    const auto train_set = mixaug::load_dataset((data_dir / "train.csv").string());
    const auto eval_set = mixaug::load_dataset((data_dir / "eval.csv").string());
    const auto manifest = mixaug::read_manifest((data_dir / "eval.csv").string());

    fs::create_directories(args.out);

    std::vector<double> accs, f1s, avgs, epochs_to_best;
    for (std::uint64_t seed : seeds) {
        mixaug::TrainConfig config;
        config.mode = mode;
        config.alpha = alpha;
        config.dropout_rate = args.dropout;
        config.flip_prob = args.flip_prob;
        config.batch_size = args.batch_size;
        config.learning_rate = args.lr;
        config.max_epochs = args.epochs;
        config.patience = args.patience;
        config.monitor = monitor;
        config.seed = seed;

        mixaug::TrainResult result = mixaug::run_training(config, train_set, eval_set);

        const fs::path seed_dir = fs::path(args.out) / ("seed_" + std::to_string(seed));
        fs::create_directories(seed_dir);
        write_text_file((seed_dir / "record.csv").string(),
                        mixaug::train_record_csv(result.record));
        mixaug::save_checkpoint(result.best_params, (seed_dir / "checkpoint.bin").string());
        write_text_file((seed_dir / "metrics.csv").string(),
                        mixaug::metrics_csv(result.best_report, manifest.class_names));
        write_text_file((seed_dir / "metrics.txt").string(),
                        mixaug::metrics_table(result.best_report, manifest.class_names));

        const auto& rec = result.record;
        accs.push_back(result.best_report.accuracy);
        f1s.push_back(result.best_report.macro_f1);
        avgs.push_back(result.best_report.average_accuracy);
        epochs_to_best.push_back(static_cast<double>(rec.best_epoch));
        std::cout << "seed " << seed << ": best epoch " << rec.best_epoch << "/"
                  << rec.stopped_epoch << "  accuracy " << fmt(result.best_report.accuracy, "%.4f")
                  << "  macro_f1 " << fmt(result.best_report.macro_f1, "%.4f") << "  avg_acc "
                  << fmt(result.best_report.average_accuracy, "%.4f") << "\n";
    }

    const Summary acc = summarize(accs), f1 = summarize(f1s), avg = summarize(avgs);
    const Summary e2b = summarize(epochs_to_best);

    std::ostringstream csv;
    csv << "mode,alpha,dropout,flip_prob,seeds,accuracy_median,accuracy_iqr,macro_f1_median,"
           "macro_f1_iqr,average_accuracy_median,average_accuracy_iqr,epochs_to_best_median,"
           "underfit_risk\n";
    csv << mixaug::to_string(mode) << ","
        << (mode == mixaug::TrainMode::vanilla ? "" : fmt(alpha)) << "," << fmt(args.dropout)
        << "," << fmt(args.flip_prob) << "," << seeds.size() << "," << fmt(acc.median) << ","
        << fmt(acc.iqr) << "," << fmt(f1.median) << "," << fmt(f1.iqr) << "," << fmt(avg.median)
        << "," << fmt(avg.iqr) << "," << fmt(e2b.median) << "," << (underfit_risk ? 1 : 0)
        << "\n";
    write_text_file((fs::path(args.out) / "aggregate.csv").string(), csv.str());

    std::ostringstream table;
    table << "Mode        alpha  Dropout  Accuracy        F1-score        Aver. Acc.\n";
    char line[200];
    std::snprintf(line, sizeof(line),
                  "%-10s  %5s  %7.2f  %.4f [%.4f]  %.4f [%.4f]  %.4f [%.4f]\n",
                  mixaug::to_string(mode).c_str(),
                  mode == mixaug::TrainMode::vanilla ? "-" : fmt(alpha, "%.3g").c_str(),
                  args.dropout, acc.median, acc.iqr, f1.median, f1.iqr, avg.median, avg.iqr);
    table << line;
    table << "(median [IQR] over " << seeds.size() << " seed" << (seeds.size() == 1 ? "" : "s")
          << "; median epochs to best: " << fmt(e2b.median, "%.1f") << ")\n";
    if (underfit_risk) {
        table << "warning: alpha >= 4 risks underfitting\n";
    }
    write_text_file((fs::path(args.out) / "aggregate.txt").string(), table.str());
    std::cout << table.str();
    return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    if (args.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (args.data.empty()) throw UsageError("--data is required");

    mixaug::NetworkParams params = mixaug::load_checkpoint(args.checkpoint);
    const mixaug::DatasetManifest manifest = mixaug::read_manifest(args.data);
    const auto dataset = mixaug::load_dataset(manifest);
    if (dataset.empty()) {
        throw mixaug::LoadError("dataset " + args.data + " holds no records");
    }
    const auto& shape = dataset.front().pixels.shape();
    const mixaug::NetworkShape ns = params.shape;
    if (shape[0] != ns.height || shape[1] != ns.width || shape[2] != ns.channels ||
        manifest.k != ns.classes) {
        std::ostringstream os;
        os << "checkpoint/architecture mismatch: checkpoint expects " << ns.height << "x"
           << ns.width << "x" << ns.channels << " with " << ns.classes << " classes, dataset is "
           << shape[0] << "x" << shape[1] << "x" << shape[2] << " with " << manifest.k
           << " classes";
        throw mixaug::LoadError(os.str());
    }

    const mixaug::Tensor probs = mixaug::predict_probs(params, dataset, 32);
    const mixaug::MetricsReport report =
        mixaug::evaluate_predictions(probs, mixaug::labels_tensor(dataset));
    const std::string table = mixaug::metrics_table(report, manifest.class_names);
    if (!args.out.empty()) {
        fs::create_directories(args.out);
        write_text_file((fs::path(args.out) / "metrics.csv").string(),
                        mixaug::metrics_csv(report, manifest.class_names));
        write_text_file((fs::path(args.out) / "metrics.txt").string(), table);
    }
    std::cout << table;
    return 0;
}

// ------------------------------------------------------- augment-preview ----

struct PreviewArgs {
    std::string data;
    double alpha = 0.1;
    std::uint64_t seed = 0;
    std::size_t count = 8;
    std::optional<double> lambda;
    std::string out;
};

int cmd_augment_preview(const PreviewArgs& args) {
    if (args.data.empty()) throw UsageError("--data is required");
    if (args.out.empty()) throw UsageError("--out is required");
    if (args.count == 0) throw UsageError("--count must be positive");
    if (args.lambda && !(*args.lambda >= 0.0 && *args.lambda <= 1.0)) {
        throw UsageError("--lambda must lie in [0,1]");
    }
    if (!args.lambda && !(args.alpha > 0.0)) {
        throw UsageError("--alpha must be positive");
    }

    const mixaug::DatasetManifest manifest = mixaug::read_manifest(args.data);
    const auto dataset = mixaug::load_dataset(manifest);
    if (dataset.size() < 2) {
        throw mixaug::LoadError("augment-preview needs at least 2 images in " + args.data);
    }
    mixaug::Rng rng(args.seed);
    mixaug::Batch batch = mixaug::batch_from_images(dataset);
    mixaug::MixBatch mix = mixaug::make_mixup_batch(batch, args.lambda ? 1.0 : args.alpha, rng);
    if (args.lambda) {
        // forced ratio: rebuild the virtual rows at the requested lambda
        mix.lambda = *args.lambda;
        for (std::size_t r = 0; r < batch.size(); ++r) {
            const auto a = mixaug::batch_row(mix.real_i, r);
            const auto b = mixaug::batch_row(mix.real_j, r);
            const auto mixed = mixaug::mixup_pair(a, b, *args.lambda);
            std::copy(mixed.pixels.data().begin(), mixed.pixels.data().end(),
                      mix.virt.images.data().begin() + r * mixed.pixels.size());
            std::copy(mixed.label.data().begin(), mixed.label.data().end(),
                      mix.virt.labels.data().begin() + r * mixed.label.size());
        }
    }

    fs::create_directories(args.out);
    const std::size_t n = std::min(args.count, batch.size());
    for (std::size_t i = 0; i < n; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "preview_%03zu", i);
        const auto virt = mixaug::batch_row(mix.virt, i);
        mixaug::write_pnm((fs::path(args.out) / (std::string(name) + ".pgm")).string(),
                          virt.pixels);
        std::ostringstream side;
        side << "lambda=" << fmt(mix.lambda) << "\n";
        side << "label=";
        for (std::size_t k = 0; k < virt.label.size(); ++k) {
            if (k) side << ",";
            side << manifest.class_names[k] << ":" << fmt(virt.label[k]);
        }
        side << "\n";
        write_text_file((fs::path(args.out) / (std::string(name) + ".txt")).string(),
                        side.str());
    }
    std::cout << "wrote " << n << " mixed previews (lambda=" << fmt(mix.lambda, "%.4f")
              << ") under " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- report ----

int cmd_report(const std::vector<std::string>& files) {
    if (files.empty()) throw UsageError("report needs at least one CSV file");
    for (const std::string& path : files) {
        std::ifstream f(path);
        if (!f) {
            throw mixaug::LoadError("cannot read " + path);
        }
        std::vector<std::vector<std::string>> rows;
        std::string line;
        while (std::getline(f, line)) {
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (line.size() && line.back() == ',') cells.push_back("");
            rows.push_back(std::move(cells));
        }
        std::vector<std::size_t> widths;
        for (const auto& r : rows) {
            if (widths.size() < r.size()) widths.resize(r.size(), 0);
            for (std::size_t c = 0; c < r.size(); ++c) {
                widths[c] = std::max(widths[c], r[c].size());
            }
        }
        if (files.size() > 1) std::cout << "== " << path << " ==\n";
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                std::cout << r[c];
                if (c + 1 < r.size()) {
                    for (std::size_t p = r[c].size(); p < widths[c] + 2; ++p) std::cout << ' ';
                }
            }
            std::cout << "\n";
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixup / mixaugment image-classification training toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    CLI::App* s = app.add_subcommand("synth", "generate a synthetic expression-glyph dataset");
    s->add_option("--classes", synth.classes, "number of classes (>= 2)");
    s->add_option("--per-class", synth.per_class, "training images per class");
    s->add_option("--size", synth.size, "square image size in pixels");
    s->add_option("--seed", synth.seed, "generator seed");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--imbalance", synth.imbalance, "comma-separated per-class weights");
    s->add_flag("--landmarks", synth.landmarks, "write five-point landmarks into the manifests");

    TrainArgs train;
    std::string config_path;
    double alpha_flag = 0.0;
    std::uint64_t seed_flag = 0;
    CLI::App* t = app.add_subcommand("train", "train the reference CNN");
    t->add_option("--mode", train.mode, "vanilla | mixup | mixaugment");
    CLI::Option* alpha_opt =
        t->add_option("--alpha", alpha_flag, "Beta(alpha,alpha) parameter for mixing");
    t->add_option("--dropout", train.dropout, "dropout rate after dense1 (0 disables)");
    t->add_option("--flip-prob", train.flip_prob, "horizontal flip probability");
    t->add_option("--batch-size", train.batch_size, "mini-batch size");
    t->add_option("--lr", train.lr, "Adam learning rate");
    t->add_option("--epochs", train.epochs, "maximum number of epochs");
    t->add_option("--patience", train.patience, "early-stopping patience in epochs");
    t->add_option("--monitor", train.monitor, "accuracy | macro_f1 | average_accuracy");
    CLI::Option* seed_opt = t->add_option("--seed", seed_flag, "single training seed");
    t->add_option("--seeds", train.seeds_csv, "comma-separated list of seeds");
    t->add_option("--data", train.data, "dataset directory holding train.csv and eval.csv");
    t->add_option("--out", train.out, "output directory");
    t->add_option("--config", config_path, "JSON config file (flags win on conflict)");

    EvalArgs eval_args;
    CLI::App* e = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    e->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
    e->add_option("--data", eval_args.data, "eval manifest path")->required();
    e->add_option("--out", eval_args.out, "optional output directory for metrics files");

    PreviewArgs preview;
    double lambda_flag = 0.0;
    CLI::App* p = app.add_subcommand("augment-preview", "write mixed images for inspection");
    p->add_option("--data", preview.data, "manifest path")->required();
    p->add_option("--alpha", preview.alpha, "Beta(alpha,alpha) parameter");
    p->add_option("--seed", preview.seed, "rng seed");
    p->add_option("--count", preview.count, "number of previews to write");
    CLI::Option* lam_opt = p->add_option(
        "--lambda", lambda_flag, "force a fixed mixing ratio instead of drawing one");
    p->add_option("--out", preview.out, "output directory")->required();

    std::vector<std::string> report_files;
    CLI::App* r = app.add_subcommand("report", "re-render CSV outputs as aligned text tables");
    r->add_option("files", report_files, "CSV files to render");

    // JSON config values act as defaults, so load them before the flag parse.
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) {
                apply_json_config(argv[i + 1], train);
            } else if (arg.rfind("--config=", 0) == 0) {
                apply_json_config(arg.substr(9), train);
            }
        } catch (const UsageError& ex) {
            std::cerr << "error: " << ex.what() << "\n";
            return 2;
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? 0 : 2;
    }
    if (alpha_opt->count()) train.alpha = alpha_flag;
    if (seed_opt->count()) train.seed = seed_flag;
    if (lam_opt->count()) preview.lambda = lambda_flag;

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (t->parsed()) return cmd_train(train);
        if (e->parsed()) return cmd_eval(eval_args);
        if (p->parsed()) return cmd_augment_preview(preview);
        if (r->parsed()) return cmd_report(report_files);
        std::cerr << "error: no subcommand given\n";
        return 2;
    } catch (const UsageError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
