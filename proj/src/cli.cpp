#include "rde/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "rde/cartoonx.hpp"
#include "rde/errors.hpp"
#include "rde/evalharness.hpp"
#include "rde/parallel.hpp"
#include "rde/rng.hpp"

namespace rde::cli {

namespace {

const std::set<std::string> kCommands = {"explain",   "pixel-rde",  "train",   "eval-rd",
                                         "eval-rand", "eval-lambda", "dwt-dump"};

// flag name -> whether it applies per command is not tracked; unknown flags
// are rejected globally, irrelevant ones are ignored by the dispatcher.
const std::set<std::string> kFlags = {
    "input",       "weights",    "out",        "images",     "labels",
    "test-images", "test-labels", "classes",   "epochs",     "batch-size",
    "train-lr",    "steps",      "samples",    "lr",         "lambda-k",
    "distortion",  "strategy",   "wavelet",    "scales",     "seed",
    "alg1-square", "representation", "lambda-list", "grid-points", "threads",
    "config"};

long long parse_int(const std::string& value, const std::string& flag) {
    try {
        std::size_t used = 0;
        long long v = std::stoll(value, &used);
        if (used != value.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw UsageError("--" + flag + ": expected an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& flag) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size())
            throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw UsageError("--" + flag + ": expected a number, got '" + value + "'");
    }
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config file line " + std::to_string(lineno) +
                             ": expected key=value");
        std::string key = line.substr(0, eq);
        if (!kFlags.count(key) || key == "config")
            throw UsageError("config file line " + std::to_string(lineno) +
                             ": unknown key '" + key + "'");
        kv[key] = line.substr(eq + 1);
    }
    return kv;
}

std::string format_meta_double(double v) {
    std::ostringstream o;
    o.precision(12);
    o << v;
    return o.str();
}

void write_mask_csv(const Explanation& explanation, const WaveletSpec& spec,
                    const Image& x, const std::string& path) {
    CsvWriter csv({"index", "value", "scale", "orientation"});
    if (explanation.kind == Explanation::Kind::CartoonX) {
        auto pyr = dwt2(std::vector<double>(static_cast<std::size_t>(x.height) * x.width, 0.0),
                        1, x.height, x.width, spec);
        auto tags = position_tags(pyr);
        for (std::size_t i = 0; i < explanation.mask.size(); ++i)
            csv.add_row({csv_num(static_cast<std::int64_t>(i)), csv_num(explanation.mask[i]),
                         csv_num(static_cast<std::int64_t>(tags[i].scale)),
                         tags[i].orientation});
    } else {
        for (std::size_t i = 0; i < explanation.mask.size(); ++i)
            csv.add_row({csv_num(static_cast<std::int64_t>(i)), csv_num(explanation.mask[i]),
                         "0", "px"});
    }
    csv.write(path);
}

void write_trace_csv(const RdeResult& rde, const std::string& path) {
    CsvWriter csv({"step", "loss", "distortion", "l1"});
    for (std::size_t i = 0; i < rde.loss_trace.size(); ++i)
        csv.add_row({csv_num(static_cast<std::int64_t>(i)), csv_num(rde.loss_trace[i]),
                     csv_num(rde.distortion_trace[i]), csv_num(rde.l1_trace[i])});
    csv.write(path);
}

void write_meta(const RunConfig& config, const Explanation& explanation,
                const std::string& path) {
    std::ostringstream out;
    out << "command=" << config.command << "\n";
    out << "input=" << config.input_path << "\n";
    out << "weights=" << config.weights_path << "\n";
    out << "steps=" << config.rde.steps << "\n";
    out << "samples=" << config.rde.samples << "\n";
    out << "lr=" << format_meta_double(config.rde.learning_rate) << "\n";
    out << "lambda_k=" << format_meta_double(config.rde.lambda_times_k) << "\n";
    out << "distortion=" << distortion_name(config.rde.distortion) << "\n";
    out << "strategy=" << strategy_name(config.strategy) << "\n";
    out << "wavelet=" << family_name(config.wavelet.family) << "\n";
    out << "scales=" << config.wavelet.scales << "\n";
    out << "alg1_square=" << (config.rde.alg1_square ? 1 : 0) << "\n";
    out << "seed=" << config.rde.seed << "\n";
    out << "predicted_label=" << explanation.j_star << "\n";
    out << "predicted_probability="
        << format_meta_double(explanation.p_ref[explanation.j_star]) << "\n";
    if (!explanation.rde.loss_trace.empty())
        out << "final_loss=" << format_meta_double(explanation.rde.loss_trace.back())
            << "\n";
    out << "elapsed_seconds=" << format_meta_double(explanation.rde.elapsed_seconds)
        << "\n";
    atomic_write_file(path, out.str());
}

void require(bool ok, const std::string& message) {
    if (!ok)
        throw UsageError(message);
}

void run_explain(const RunConfig& config, bool cartoonx) {
    require(!config.input_path.empty(), config.command + ": --input is required");
    require(!config.weights_path.empty(), config.command + ": --weights is required");
    require(!config.out_path.empty(), config.command + ": --out is required");

    ReferenceCnn model = ReferenceCnn::load_weights(config.weights_path);
    Image x = load_image(config.input_path);

    Explanation explanation =
        cartoonx ? explain_cartoonx(model, x, config.rde, config.wavelet, config.strategy)
                 : explain_pixel_rde(model, x, config.rde, config.strategy);

    std::filesystem::create_directories(config.out_path);
    std::string base = config.out_path + "/";
    save_image(explanation.image, base + "explanation.pgm");
    write_mask_csv(explanation, config.wavelet, x, base + "mask.csv");
    write_trace_csv(explanation.rde, base + "trace.csv");
    write_meta(config, explanation, base + "meta.txt");

    std::cout << "label=" << explanation.j_star
              << " prob=" << format_meta_double(explanation.p_ref[explanation.j_star])
              << " final_loss="
              << (explanation.rde.loss_trace.empty()
                      ? std::string("n/a")
                      : format_meta_double(explanation.rde.loss_trace.back()))
              << "\n";
}

void run_train(const RunConfig& config) {
    require(!config.images_path.empty(), "train: --images is required");
    require(!config.labels_path.empty(), "train: --labels is required");
    require(!config.out_path.empty(), "train: --out is required");

    LabeledDataset ds = load_idx_dataset(config.images_path, config.labels_path);
    if (ds.images.empty())
        throw FormatError("train: dataset is empty");
    const Image& first = ds.images.front();

    ReferenceCnn model(config.classes, first.channels, first.height, first.width,
                       config.rde.seed);
    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.learning_rate = config.train_lr;
    tc.seed = config.rde.seed;
    std::vector<double> losses = model.train(ds, tc);
    for (std::size_t e = 0; e < losses.size(); ++e)
        std::cout << "epoch=" << e << " mean_loss=" << format_meta_double(losses[e])
                  << "\n";

    if (!config.test_images_path.empty() && !config.test_labels_path.empty()) {
        LabeledDataset test = load_idx_dataset(config.test_images_path,
                                               config.test_labels_path);
        std::cout << "test_accuracy=" << format_meta_double(model.accuracy(test)) << "\n";
    }
    model.save_weights(config.out_path);
    std::cout << "weights=" << config.out_path << "\n";
}

void run_eval_curves(const RunConfig& config, bool rate_curve) {
    require(!config.input_path.empty(), config.command + ": --input is required");
    require(!config.weights_path.empty(), config.command + ": --weights is required");
    require(!config.out_path.empty(), config.command + ": --out is required");
    require(config.representation == "wavelet" || config.representation == "pixel",
            config.command + ": --representation must be wavelet or pixel");

    ReferenceCnn model = ReferenceCnn::load_weights(config.weights_path);
    Image x = load_image(config.input_path);
    bool wavelet = (config.representation == "wavelet");

    Explanation explanation =
        wavelet ? explain_cartoonx(model, x, config.rde, config.wavelet, config.strategy)
                : explain_pixel_rde(model, x, config.rde, config.strategy);

    std::unique_ptr<Representation> repr =
        wavelet ? wavelet_representation(x.channels, x.height, x.width, config.wavelet)
                : pixel_representation(x.channels, x.height, x.width);
    Coefficients h = repr->encode(x.data);
    auto obf = make_obfuscator(config.strategy, h, repr->partition(),
                               rng::derive(config.rde.seed, 0xC0u));

    RelevanceOrder relevance = order_from_mask(explanation.mask);
    RelevanceOrder baseline =
        random_order(repr->coefficient_count(), rng::derive(config.rde.seed, 0xC1u));
    std::vector<double> grid = default_rate_grid(config.grid_points);

    auto run_curve = [&](const RelevanceOrder& order) {
        return rate_curve
                   ? rate_distortion_curve(model, *repr, x, order, *obf,
                                           DistortionKind::L2PostSoftmax, grid,
                                           config.rde.samples, 0)
                   : randomization_curve(model, *repr, x, order, *obf,
                                         DistortionKind::L2PostSoftmax, grid,
                                         config.rde.samples, 0);
    };

    CsvWriter csv({"rate_or_fraction", "mean_distortion", "stderr", "ordering_tag",
                   "representation_tag"});
    auto add_curve = [&](const std::vector<CurvePoint>& curve, const char* tag) {
        for (const auto& pt : curve)
            csv.add_row({csv_num(pt.rate), csv_num(pt.mean_distortion),
                         csv_num(pt.std_error), tag, config.representation});
    };
    add_curve(run_curve(relevance), "relevance");
    add_curve(run_curve(baseline), "random");
    csv.write(config.out_path);
    std::cout << "curve=" << config.out_path << " points=" << grid.size() << "\n";
}

void run_eval_lambda(const RunConfig& config) {
    require(!config.input_path.empty(), "eval-lambda: --input is required");
    require(!config.weights_path.empty(), "eval-lambda: --weights is required");
    require(!config.out_path.empty(), "eval-lambda: --out is required");

    ReferenceCnn model = ReferenceCnn::load_weights(config.weights_path);
    Image x = load_image(config.input_path);

    auto points = lambda_sweep(model, x, config.lambda_list, config.rde, config.wavelet,
                               config.strategy);
    CsvWriter csv({"lambda_k", "method", "distortion", "normalized_l1"});
    for (const auto& pt : points) {
        csv.add_row({csv_num(pt.lambda_times_k), "cartoonx",
                     csv_num(pt.cartoonx_distortion), csv_num(pt.cartoonx_l1_normalized)});
        csv.add_row({csv_num(pt.lambda_times_k), "pixel-rde",
                     csv_num(pt.pixel_distortion), csv_num(pt.pixel_l1_normalized)});
    }
    csv.write(config.out_path);
    std::cout << "sweep=" << config.out_path << " lambdas=" << points.size() << "\n";
}

void run_dwt_dump(const RunConfig& config) {
    require(!config.input_path.empty(), "dwt-dump: --input is required");
    require(!config.out_path.empty(), "dwt-dump: --out is required");

    Image x = load_image(config.input_path);
    WaveletPyramid pyr = dwt2(x, config.wavelet);
    auto tags = position_tags(pyr);
    std::size_t k = pyr.positions_per_channel();

    std::vector<std::vector<double>> flat(x.channels, std::vector<double>(k));
    for (int ch = 0; ch < x.channels; ++ch)
        pyr.flatten_channel(ch, flat[ch]);

    CsvWriter csv({"index", "scale", "orientation", "row", "col", "channel", "value"});
    for (std::size_t i = 0; i < k; ++i)
        for (int ch = 0; ch < x.channels; ++ch)
            csv.add_row({csv_num(static_cast<std::int64_t>(i)),
                         csv_num(static_cast<std::int64_t>(tags[i].scale)),
                         tags[i].orientation, csv_num(static_cast<std::int64_t>(tags[i].row)),
                         csv_num(static_cast<std::int64_t>(tags[i].col)),
                         csv_num(static_cast<std::int64_t>(ch)), csv_num(flat[ch][i])});
    csv.write(config.out_path);
    std::cout << "pyramid=" << config.out_path << " positions=" << k << "\n";
}

} // namespace

std::string usage_text() {
    return "usage: rde <command> [flags]\n"
           "\n"
           "commands:\n"
           "  explain      CartoonX explanation of one image\n"
           "  pixel-rde    Pixel RDE explanation of one image\n"
           "  train        train the reference CNN on an IDX dataset\n"
           "  eval-rd      rate-distortion curve (relevance vs random order)\n"
           "  eval-rand    randomization curve (relevance vs random order)\n"
           "  eval-lambda  sparsity sweep over lambda*k values\n"
           "  dwt-dump     serialize an image's wavelet pyramid to CSV\n"
           "\n"
           "common flags:\n"
           "  --input PATH --weights PATH --out PATH\n"
           "  --steps N (2000) --samples L (64) --lr E (0.001) --lambda-k V (40)\n"
           "  --distortion sq-label-prob|max-label|l2|kl (sq-label-prob)\n"
           "  --strategy adaptive-gaussian|zero (adaptive-gaussian)\n"
           "  --wavelet db1|db2|db3|db4 (db3) --scales J (5)\n"
           "  --seed U64 (env RDE_SEED, else 0) --threads N --alg1-square 0|1 (1)\n"
           "  --config PATH (key=value lines; explicit flags win)\n"
           "\n"
           "train flags: --images --labels [--test-images --test-labels]\n"
           "             [--classes 10 --epochs 3 --batch-size 16 --train-lr 0.05]\n"
           "eval flags:  --representation wavelet|pixel (wavelet)\n"
           "             --grid-points N (21) --lambda-list a,b,c (5,10,20,40,80)\n";
}

RunConfig parse_args(const std::vector<std::string>& args) {
    if (args.empty())
        throw UsageError("missing command\n" + usage_text());
    RunConfig config;
    config.command = args[0];
    if (!kCommands.count(config.command))
        throw UsageError("unknown command '" + config.command + "'\n" + usage_text());

    std::map<std::string, std::string> flags;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0)
            throw UsageError("expected a --flag, got '" + arg + "'");
        std::string name = arg.substr(2);
        if (!kFlags.count(name))
            throw UsageError("unknown flag --" + name);
        if (i + 1 >= args.size())
            throw UsageError("--" + name + ": missing value");
        flags[name] = args[++i];
    }

    // Config file fills in flags not given on the command line.
    if (auto it = flags.find("config"); it != flags.end()) {
        for (auto& [key, value] : read_config_file(it->second))
            flags.emplace(key, value);
    }

    // Seed: flag > RDE_SEED > 0.
    if (auto it = flags.find("seed"); it != flags.end()) {
        config.rde.seed = static_cast<std::uint64_t>(parse_int(it->second, "seed"));
    } else if (const char* env = std::getenv("RDE_SEED")) {
        try {
            config.rde.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError("RDE_SEED: expected an unsigned integer, got '" +
                             std::string(env) + "'");
        }
    }

    auto get = [&flags](const char* name) -> const std::string* {
        auto it = flags.find(name);
        return it == flags.end() ? nullptr : &it->second;
    };

    if (auto* v = get("input")) config.input_path = *v;
    if (auto* v = get("weights")) config.weights_path = *v;
    if (auto* v = get("out")) config.out_path = *v;
    if (auto* v = get("images")) config.images_path = *v;
    if (auto* v = get("labels")) config.labels_path = *v;
    if (auto* v = get("test-images")) config.test_images_path = *v;
    if (auto* v = get("test-labels")) config.test_labels_path = *v;

    if (auto* v = get("classes")) {
        config.classes = static_cast<int>(parse_int(*v, "classes"));
        if (config.classes < 2)
            throw UsageError("--classes: need at least 2");
    }
    if (auto* v = get("epochs")) {
        config.epochs = static_cast<int>(parse_int(*v, "epochs"));
        if (config.epochs < 1)
            throw UsageError("--epochs: must be positive");
    }
    if (auto* v = get("batch-size")) {
        config.batch_size = static_cast<int>(parse_int(*v, "batch-size"));
        if (config.batch_size < 1)
            throw UsageError("--batch-size: must be positive");
    }
    if (auto* v = get("train-lr")) {
        config.train_lr = parse_double(*v, "train-lr");
        if (config.train_lr <= 0.0)
            throw UsageError("--train-lr: must be positive");
    }
    if (auto* v = get("steps")) {
        config.rde.steps = static_cast<int>(parse_int(*v, "steps"));
        if (config.rde.steps < 0)
            throw UsageError("--steps: must be >= 0");
    }
    if (auto* v = get("samples")) {
        config.rde.samples = static_cast<int>(parse_int(*v, "samples"));
        if (config.rde.samples < 1)
            throw UsageError("--samples: must be >= 1");
    }
    if (auto* v = get("lr")) {
        config.rde.learning_rate = parse_double(*v, "lr");
        if (config.rde.learning_rate <= 0.0)
            throw UsageError("--lr: must be positive");
    }
    if (auto* v = get("lambda-k")) {
        config.rde.lambda_times_k = parse_double(*v, "lambda-k");
        if (config.rde.lambda_times_k < 0.0)
            throw UsageError("--lambda-k: must be >= 0");
    }
    if (auto* v = get("distortion")) {
        try {
            config.rde.distortion = distortion_from_name(*v);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    if (auto* v = get("strategy")) {
        try {
            config.strategy = strategy_from_name(*v);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    if (auto* v = get("wavelet")) {
        try {
            config.wavelet.family = family_from_name(*v);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
    }
    if (auto* v = get("scales")) {
        config.wavelet.scales = static_cast<int>(parse_int(*v, "scales"));
        if (config.wavelet.scales < 1)
            throw UsageError("--scales: must be >= 1");
    }
    if (auto* v = get("alg1-square")) {
        long long b = parse_int(*v, "alg1-square");
        if (b != 0 && b != 1)
            throw UsageError("--alg1-square: expected 0 or 1");
        config.rde.alg1_square = (b == 1);
    }
    if (auto* v = get("representation")) {
        if (*v != "wavelet" && *v != "pixel")
            throw UsageError("--representation: expected wavelet or pixel");
        config.representation = *v;
    }
    if (auto* v = get("lambda-list")) {
        config.lambda_list.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ','))
            config.lambda_list.push_back(parse_double(item, "lambda-list"));
        if (config.lambda_list.empty())
            throw UsageError("--lambda-list: expected comma-separated values");
    }
    if (auto* v = get("grid-points")) {
        config.grid_points = static_cast<int>(parse_int(*v, "grid-points"));
        if (config.grid_points < 2)
            throw UsageError("--grid-points: need at least 2");
    }
    if (auto* v = get("threads")) {
        config.threads = static_cast<int>(parse_int(*v, "threads"));
        if (config.threads < 0)
            throw UsageError("--threads: must be >= 0");
    }
    return config;
}

void run(const RunConfig& config) {
    set_thread_cap(config.threads);
    if (config.command == "explain")
        run_explain(config, true);
    else if (config.command == "pixel-rde")
        run_explain(config, false);
    else if (config.command == "train")
        run_train(config);
    else if (config.command == "eval-rd")
        run_eval_curves(config, true);
    else if (config.command == "eval-rand")
        run_eval_curves(config, false);
    else if (config.command == "eval-lambda")
        run_eval_lambda(config);
    else if (config.command == "dwt-dump")
        run_dwt_dump(config);
    else
        throw UsageError("unknown command '" + config.command + "'");
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && (args[0] == "--help" || args[0] == "-h" || args[0] == "help")) {
        std::cout << usage_text();
        return 0;
    }
    try {
        run(parse_args(args));
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace rde::cli
