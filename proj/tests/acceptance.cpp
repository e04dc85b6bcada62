// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Needs the CLI binary path for the end-to-end determinism check:
//   rde-acceptance --cli <path/to/rde> --workdir <scratch> [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rde/cartoonx.hpp"
#include "rde/cli.hpp"
#include "rde/errors.hpp"
#include "rde/evalharness.hpp"
#include "rde/nnmodel.hpp"
#include "rde/rng.hpp"
#include "support/testdata.hpp"

using namespace rde;

namespace {

struct Context {
    std::string cli_path;
    std::filesystem::path workdir;

    // Shared across criteria 6-8; built on first use.
    std::optional<ReferenceCnn> model;
    LabeledDataset test_set;
    double test_accuracy = 0.0;
    std::vector<std::vector<LambdaSweepPoint>> sweep; // [image][lambda]

    std::string file(const std::string& name) const { return (workdir / name).string(); }

    const ReferenceCnn& trained_model() {
        if (!model) {
            LabeledDataset train_set = testdata::make_glyph_dataset(600, 2001);
            test_set = testdata::make_glyph_dataset(200, 2002);
            model.emplace(10, 1, 28, 28, 2003);
            TrainConfig tc;
            tc.epochs = 8;
            tc.batch_size = 16;
            tc.learning_rate = 0.08;
            tc.seed = 2004;
            model->train(train_set, tc);
            test_accuracy = model->accuracy(test_set);
        }
        return *model;
    }

    // Sweep over {5,10,20,40,80} for test images 20..29, used by the trend
    // criterion and the dominance example check.
    const std::vector<std::vector<LambdaSweepPoint>>& sweep_results() {
        if (sweep.empty()) {
            const ReferenceCnn& m = trained_model();
            WaveletSpec spec{Family::db3, 4};
            const std::vector<double> lambdas = {5, 10, 20, 40, 80};
            for (int i = 0; i < 10; ++i) {
                RdeConfig cfg;
                cfg.steps = 500;
                cfg.samples = 16;
                // Faster mask steps than the CLI default so 500 steps reach
                // the lambda-dependent equilibrium the sweep is meant to probe.
                cfg.learning_rate = 0.005;
                cfg.seed = rng::derive(6500, i);
                sweep.push_back(lambda_sweep(m, test_set.images[20 + i], lambdas, cfg,
                                             spec,
                                             ObfuscationStrategy::AdaptiveGaussian));
            }
        }
        return sweep;
    }
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// ---------------------------------------------------------------- criterion 1
bool wavelet_round_trip(Context&, std::string& detail) {
    const Family families[] = {Family::db1, Family::db2, Family::db3, Family::db4};
    struct Shape {
        int c, h, w;
    };
    const Shape shapes[] = {{1, 32, 32}, {3, 32, 32}, {1, 64, 64},
                            {3, 64, 64}, {1, 57, 41}, {3, 57, 41}};
    double t0 = now_seconds();
    double max_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Shape& shape = shapes[i % 6];
        Image img = testdata::random_image(shape.c, shape.h, shape.w, 9000 + i);
        for (Family fam : families)
            for (int scales = 1; scales <= 4; ++scales) {
                auto grid = idwt2(dwt2(img, {fam, scales}));
                for (std::size_t p = 0; p < grid.size(); ++p)
                    max_err = std::max(max_err, std::abs(grid[p] - img.data[p]));
            }
    }
    double elapsed = now_seconds() - t0;
    std::ostringstream ss;
    ss << "max err " << max_err << ", " << elapsed << "s";
    detail = ss.str();
    return max_err <= 1e-8 && elapsed <= 30.0;
}

// ---------------------------------------------------------------- criterion 2
bool adjoint_identity(Context&, std::string& detail) {
    const Family families[] = {Family::db1, Family::db2, Family::db3, Family::db4};
    double worst = 0.0; // violation relative to the allowed bound
    for (Family fam : families)
        for (int scales = 1; scales <= 4; ++scales) {
            WaveletSpec spec{fam, scales};
            const int c = 3, h = 45, w = 38;
            std::size_t n = static_cast<std::size_t>(c) * h * w;
            std::vector<double> zeros(n, 0.0);
            WaveletPyramid proto = dwt2(zeros, c, h, w, spec);
            std::size_t k = proto.positions_per_channel();
            for (int pair = 0; pair < 50; ++pair) {
                std::uint64_t key =
                    rng::derive(7100 + pair, static_cast<std::uint64_t>(fam), scales);
                std::vector<double> hflat(k * c), g(n);
                double hn = 0.0, gn = 0.0;
                for (std::size_t i = 0; i < hflat.size(); ++i) {
                    hflat[i] = rng::uniform(key, i) - 0.5;
                    hn += hflat[i] * hflat[i];
                }
                for (std::size_t i = 0; i < n; ++i) {
                    g[i] = rng::uniform(key, hflat.size() + i) - 0.5;
                    gn += g[i] * g[i];
                }
                WaveletPyramid pyr = proto;
                for (int ch = 0; ch < c; ++ch)
                    pyr.unflatten_channel(
                        ch, std::span<const double>(hflat).subspan(ch * k, k));
                auto decoded = idwt2(pyr);
                WaveletPyramid vjp = vjp_idwt2(g, c, h, w, spec);
                std::vector<double> vjp_flat(k * c);
                for (int ch = 0; ch < c; ++ch)
                    vjp.flatten_channel(ch, std::span<double>(vjp_flat).subspan(ch * k, k));
                double lhs =
                    std::inner_product(decoded.begin(), decoded.end(), g.begin(), 0.0);
                double rhs = std::inner_product(hflat.begin(), hflat.end(),
                                                vjp_flat.begin(), 0.0);
                double bound = 1e-10 * (std::sqrt(hn) * std::sqrt(gn) + 1.0);
                worst = std::max(worst, std::abs(lhs - rhs) / bound);
            }
        }
    std::ostringstream ss;
    ss << "worst violation " << worst << "x of the bound";
    detail = ss.str();
    return worst <= 1.0;
}

// ---------------------------------------------------------------- criterion 3
bool model_gradient_check(Context&, std::string& detail) {
    double t0 = now_seconds();
    const double step = 1e-5;
    double worst_rel = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        ReferenceCnn model(3, 1, 16, 16, 110 + trial);
        Image img = testdata::random_image(1, 16, 16, 210 + trial);
        std::vector<double> upstream(3);
        for (int j = 0; j < 3; ++j)
            upstream[j] = rng::uniform(rng::derive(310, trial), j) - 0.5;
        auto analytic = model.input_vjp(img, upstream);
        auto pairing = [&](const Image& im) {
            auto p = model.predict(im);
            return std::inner_product(p.begin(), p.end(), upstream.begin(), 0.0);
        };
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            Image up = img, down = img;
            up.data[i] += step;
            down.data[i] -= step;
            double fd = (pairing(up) - pairing(down)) / (2.0 * step);
            err += (fd - analytic[i]) * (fd - analytic[i]);
            norm += fd * fd;
        }
        worst_rel = std::max(worst_rel, std::sqrt(err) / std::max(std::sqrt(norm), 1e-300));
    }
    double elapsed = now_seconds() - t0;
    std::ostringstream ss;
    ss << "worst rel err " << worst_rel << ", " << elapsed << "s";
    detail = ss.str();
    return worst_rel <= 1e-4 && elapsed <= 60.0;
}

// ---------------------------------------------------------------- criterion 4
bool objective_gradient_check(Context&, std::string& detail) {
    double worst_rel = 0.0;

    // (a) reference CNN through the wavelet representation, k = 64
    {
        WaveletSpec spec{Family::db1, 2};
        ReferenceCnn model(3, 1, 8, 8, 501);
        auto repr = wavelet_representation(1, 8, 8, spec);
        Image x = testdata::random_image(1, 8, 8, 502);
        for (auto& v : x.data)
            v = 0.25 + 0.5 * v; // keep the decode off the clip rails
        auto obf = zero_obfuscator(repr->coefficient_count(), 1);
        RdeConfig cfg;
        cfg.lambda_times_k = 4.0;
        cfg.samples = 2;
        std::vector<double> mask(repr->coefficient_count());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = 0.3 + 0.4 * rng::uniform(503, i);
        std::vector<double> grad;
        rde_objective(model, *repr, x, mask, *obf, cfg, 0, &grad);
        const double step = 1e-5;
        double err = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            auto up = mask, down = mask;
            up[i] += step;
            down[i] -= step;
            double fd = (rde_objective(model, *repr, x, up, *obf, cfg, 0, nullptr) -
                         rde_objective(model, *repr, x, down, *obf, cfg, 0, nullptr)) /
                        (2.0 * step);
            err += (fd - grad[i]) * (fd - grad[i]);
            norm += fd * fd;
        }
        worst_rel = std::max(worst_rel, std::sqrt(err) / std::max(std::sqrt(norm), 1e-300));
    }

    // (b) smooth analytic model through the pixel representation, k = 16
    {
        std::vector<double> weights(16);
        for (int i = 0; i < 16; ++i)
            weights[i] = ((i % 2) ? -1.0 : 1.0) * (0.8 + 0.15 * i);
        testdata::WeightedSumModel model(1, 4, 4, weights);
        auto repr = pixel_representation(1, 4, 4);
        Image x = testdata::random_image(1, 4, 4, 504);
        for (auto& v : x.data)
            v = 0.25 + 0.5 * v;
        auto obf = zero_obfuscator(16, 1);
        RdeConfig cfg;
        cfg.lambda_times_k = 2.0;
        cfg.samples = 3;
        std::vector<double> mask(16);
        for (int i = 0; i < 16; ++i)
            mask[i] = 0.3 + 0.4 * rng::uniform(505, i);
        std::vector<double> grad;
        rde_objective(model, *repr, x, mask, *obf, cfg, 0, &grad);
        const double step = 1e-5;
        double err = 0.0, norm = 0.0;
        for (int i = 0; i < 16; ++i) {
            auto up = mask, down = mask;
            up[i] += step;
            down[i] -= step;
            double fd = (rde_objective(model, *repr, x, up, *obf, cfg, 0, nullptr) -
                         rde_objective(model, *repr, x, down, *obf, cfg, 0, nullptr)) /
                        (2.0 * step);
            err += (fd - grad[i]) * (fd - grad[i]);
            norm += fd * fd;
        }
        worst_rel = std::max(worst_rel, std::sqrt(err) / std::max(std::sqrt(norm), 1e-300));
    }

    std::ostringstream ss;
    ss << "worst rel err " << worst_rel;
    detail = ss.str();
    return worst_rel <= 1e-4;
}

// ---------------------------------------------------------------- criterion 5
bool oracle_agreement(Context&, std::string& detail) {
    int agreements = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto repr = pixel_representation(1, 1, 8);
        std::size_t coord = rng::derive(100 + seed, 0xAB) % 8;
        testdata::SingleCoordModel model(1, 1, 8, coord, 6.0, 0.7);
        std::vector<double> values(8);
        std::uint64_t key = rng::derive(100 + seed, 0xCD);
        for (std::size_t i = 0; i < 8; ++i)
            values[i] = 0.05 + 0.9 * rng::uniform(key, i);
        values[coord] = 0.95;
        Image x(1, 1, 8);
        x.data = values;
        Coefficients h = repr->encode(x.data);
        auto obf = make_obfuscator(ObfuscationStrategy::AdaptiveGaussian, h,
                                   repr->partition(), 100 + seed);

        RdeConfig cfg;
        cfg.steps = 800;
        cfg.samples = 8;
        cfg.learning_rate = 0.01;
        cfg.lambda_times_k = 0.25;
        cfg.alg1_square = false;
        cfg.seed = seed;
        RdeResult relaxed = rde_optimize(model, *repr, x, cfg, *obf);
        auto exact = exact_rde_mask(model, *repr, x, 1, *obf,
                                    DistortionKind::SqLabelProb, 128);
        bool match = true;
        for (std::size_t i = 0; i < 8; ++i)
            if ((relaxed.mask[i] > 0.5 ? 1 : 0) != exact[i])
                match = false;
        agreements += match;
    }

    int angle_hits = 0;
    auto polar = polar_representation();
    testdata::AngleModel angle_model(4.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Coefficients h(2, 1);
        h.v = {1.0, 0.8};
        Image x(1, 1, 2);
        x.data = polar->decode(h);
        testdata::UniformPolarObfuscator obf(seed);
        auto mask = exact_rde_mask(angle_model, *polar, x, 1, obf,
                                   DistortionKind::SqLabelProb, 64, seed);
        if (mask[0] == 1 && mask[1] == 0)
            ++angle_hits;
    }

    std::ostringstream ss;
    ss << "planted agreement " << agreements << "/20, polar angle " << angle_hits << "/20";
    detail = ss.str();
    return agreements >= 18 && angle_hits == 20;
}

// ---------------------------------------------------------------- criterion 6
bool desk_scale_rate_distortion(Context& ctx, std::string& detail) {
    double t0 = now_seconds();
    const ReferenceCnn& model = ctx.trained_model();
    if (ctx.test_accuracy < 0.90) {
        std::ostringstream ss;
        ss << "held-out accuracy " << ctx.test_accuracy << " < 0.90";
        detail = ss.str();
        return false;
    }

    WaveletSpec spec{Family::db3, 4};
    RdeConfig cfg;
    cfg.steps = 500;
    cfg.samples = 16;

    auto grid = default_rate_grid(21);
    int cartoon_wins = 0, pixel_wins = 0;
    const int images = 20;
    for (int i = 0; i < images; ++i) {
        const Image& x = ctx.test_set.images[i];
        std::uint64_t img_seed = rng::derive(6000, i);
        cfg.seed = img_seed;

        // wavelet representation: CartoonX ordering vs random baseline
        {
            Explanation e = explain_cartoonx(model, x, cfg, spec);
            auto repr = wavelet_representation(1, 28, 28, spec);
            Coefficients h = repr->encode(x.data);
            auto obf = make_obfuscator(ObfuscationStrategy::AdaptiveGaussian, h,
                                       repr->partition(), rng::derive(img_seed, 1));
            auto relevance = order_from_mask(e.mask);
            auto baseline = random_order(repr->coefficient_count(),
                                         rng::derive(img_seed, 2));
            auto curve_rel =
                rate_distortion_curve(model, *repr, x, relevance, *obf,
                                      DistortionKind::L2PostSoftmax, grid, 16, 0);
            auto curve_rnd =
                rate_distortion_curve(model, *repr, x, baseline, *obf,
                                      DistortionKind::L2PostSoftmax, grid, 16, 0);
            if (curve_auc(curve_rel) < curve_auc(curve_rnd))
                ++cartoon_wins;
        }
        // pixel representation: Pixel RDE ordering vs random baseline
        {
            Explanation e = explain_pixel_rde(model, x, cfg);
            auto repr = pixel_representation(1, 28, 28);
            Coefficients h = repr->encode(x.data);
            auto obf = make_obfuscator(ObfuscationStrategy::AdaptiveGaussian, h,
                                       repr->partition(), rng::derive(img_seed, 3));
            auto relevance = order_from_mask(e.mask);
            auto baseline = random_order(repr->coefficient_count(),
                                         rng::derive(img_seed, 4));
            auto curve_rel =
                rate_distortion_curve(model, *repr, x, relevance, *obf,
                                      DistortionKind::L2PostSoftmax, grid, 16, 0);
            auto curve_rnd =
                rate_distortion_curve(model, *repr, x, baseline, *obf,
                                      DistortionKind::L2PostSoftmax, grid, 16, 0);
            if (curve_auc(curve_rel) < curve_auc(curve_rnd))
                ++pixel_wins;
        }
    }
    double elapsed = now_seconds() - t0;
    std::ostringstream ss;
    ss << "accuracy " << ctx.test_accuracy << ", cartoonx wins " << cartoon_wins << "/"
       << images << ", pixel wins " << pixel_wins << "/" << images << ", " << elapsed
       << "s";
    detail = ss.str();
    return cartoon_wins >= 18 && pixel_wins >= 18 && elapsed <= 1800.0;
}

// ---------------------------------------------------------------- criterion 7
bool lambda_trend(Context& ctx, std::string& detail) {
    const auto& sweep = ctx.sweep_results();
    std::vector<double> mean_l1(sweep[0].size(), 0.0);
    for (const auto& points : sweep)
        for (std::size_t j = 0; j < points.size(); ++j)
            mean_l1[j] += points[j].cartoonx_l1_normalized / sweep.size();

    bool ok = true;
    std::ostringstream ss;
    ss << "mean normalized l1:";
    for (std::size_t j = 0; j < mean_l1.size(); ++j) {
        ss << " " << mean_l1[j];
        if (j > 0 && mean_l1[j] > mean_l1[j - 1] + 0.05)
            ok = false;
    }
    detail = ss.str();
    return ok;
}

// ------------------------------------------------------- sweep example check
// At matched lambda*k = 20, CartoonX's (distortion, normalized l1) point
// should dominate Pixel RDE's component-wise on most images.
bool sweep_dominance(Context& ctx, std::string& detail) {
    const auto& sweep = ctx.sweep_results();
    const std::size_t lambda_idx = 2; // lambda*k = 20
    int dominated = 0;
    for (const auto& points : sweep) {
        const auto& pt = points[lambda_idx];
        if (pt.cartoonx_distortion <= pt.pixel_distortion &&
            pt.cartoonx_l1_normalized <= pt.pixel_l1_normalized)
            ++dominated;
    }
    std::ostringstream ss;
    ss << "cartoonx dominates pixel rde on " << dominated << "/" << sweep.size()
       << " images at lambda*k = 20";
    detail = ss.str();
    return dominated >= 7;
}

// ---------------------------------------------------------------- criterion 8
bool cli_determinism(Context& ctx, std::string& detail) {
    if (ctx.cli_path.empty()) {
        detail = "no --cli path given";
        return false;
    }
    const ReferenceCnn& model = ctx.trained_model();
    model.save_weights(ctx.file("acc-model.rdew"));
    save_image(ctx.test_set.images[0], ctx.file("acc-input.pgm"));

    auto run_once = [&](const std::string& out_dir) {
        std::string cmd = ctx.cli_path + " explain --input " + ctx.file("acc-input.pgm") +
                          " --weights " + ctx.file("acc-model.rdew") + " --out " +
                          out_dir +
                          " --steps 40 --samples 8 --scales 4 --seed 4242 >/dev/null";
        return std::system(cmd.c_str());
    };
    if (run_once(ctx.file("det1")) != 0 || run_once(ctx.file("det2")) != 0) {
        detail = "cli invocation failed";
        return false;
    }
    for (const char* name : {"explanation.pgm", "mask.csv", "trace.csv"}) {
        auto a = testdata::read_file(ctx.file(std::string("det1/") + name));
        auto b = testdata::read_file(ctx.file(std::string("det2/") + name));
        if (a != b || a.empty()) {
            detail = std::string("mismatch in ") + name;
            return false;
        }
    }
    detail = "explanation.pgm, mask.csv, trace.csv byte-identical";
    return true;
}

// ---------------------------------------------------------------- criterion 9
bool default_config_snapshot(Context&, std::string& detail) {
    auto config = cli::parse_args({"explain"});
    bool ok = config.rde.steps == 2000 && config.rde.samples == 64 &&
              config.rde.learning_rate == 0.001 &&
              config.wavelet.family == Family::db3 && config.wavelet.scales == 5 &&
              config.rde.distortion == DistortionKind::SqLabelProb &&
              config.strategy == ObfuscationStrategy::AdaptiveGaussian &&
              config.rde.lambda_times_k == 40.0;
    detail = "N=2000 L=64 lr=0.001 db3 J=5 zero-padding";
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    Context ctx;
    int only = 0;
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--cli")
            ctx.cli_path = argv[i + 1];
        else if (flag == "--workdir")
            ctx.workdir = argv[i + 1];
        else if (flag == "--only")
            only = std::atoi(argv[i + 1]);
    }
    if (ctx.workdir.empty())
        ctx.workdir = std::filesystem::temp_directory_path() / "rde-acceptance";
    std::filesystem::create_directories(ctx.workdir);

    struct Entry {
        int id;
        const char* label; // "criterion" for the gate, "check" for extras
        const char* name;
        std::function<bool(Context&, std::string&)> fn;
    };
    const Entry entries[] = {
        {1, "criterion", "wavelet round-trip", wavelet_round_trip},
        {2, "criterion", "adjoint identity", adjoint_identity},
        {3, "criterion", "model gradient check", model_gradient_check},
        {4, "criterion", "objective gradient check", objective_gradient_check},
        {5, "criterion", "oracle agreement", oracle_agreement},
        {6, "criterion", "desk-scale rate-distortion analogue", desk_scale_rate_distortion},
        {7, "criterion", "lambda sweep trend", lambda_trend},
        {8, "criterion", "cli determinism", cli_determinism},
        {9, "criterion", "paper defaults wired", default_config_snapshot},
        {10, "check", "sweep dominance at matched sparsity", sweep_dominance},
    };

    int failures = 0;
    for (const auto& entry : entries) {
        if (only != 0 && entry.id != only)
            continue;
        std::string det;
        bool ok = false;
        double t0 = now_seconds();
        try {
            ok = entry.fn(ctx, det);
        } catch (const std::exception& e) {
            det = std::string("exception: ") + e.what();
        }
        double elapsed = now_seconds() - t0;
        std::printf("[%s] %s %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", entry.label,
                    entry.id, entry.name, det.c_str(), elapsed);
        std::fflush(stdout);
        failures += !ok;
    }
    if (failures)
        std::printf("%d criterion(s) failed\n", failures);
    else
        std::printf("all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
