// Command-line front end: suppression, evaluation, synthetic scenes, and a
// small kernel-vs-reference benchmark.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pairnms/ingest.hpp"
#include "pairnms/metrics.hpp"
#include "pairnms/parallel.hpp"
#include "pairnms/reference.hpp"
#include "pairnms/suppression.hpp"
#include "pairnms/synthcrowd.hpp"

namespace {

using namespace pairnms;

constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitIo = 74;

std::string command_echo(int argc, char** argv) {
    std::string s = "pairnms";
    for (int i = 1; i < argc; ++i) {
        s += ' ';
        s += argv[i];
    }
    return s;
}

// Density stand-in when none is supplied with the data: each box's highest
// full-box overlap with any other box in the same image.
std::map<std::int64_t, double> detection_densities(const std::vector<Detection>& dets) {
    std::map<std::int64_t, double> out;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (j == i) continue;
            best = std::max(best, iou(dets[i].pair.full, dets[j].pair.full));
        }
        out[dets[i].id] = best;
    }
    return out;
}

struct NmsArgs {
    std::string in;
    std::string out;
    std::string method = "greedy-full";
    double threshold = 0.5;
    double sigma = 0.5;
    double score_floor = 1e-3;
};

int run_nms(const NmsArgs& a, const std::string& echo) {
    NmsConfig cfg;
    cfg.method = *parse_method(a.method);
    cfg.threshold = a.threshold;
    cfg.soft_sigma = a.sigma;
    cfg.score_floor = a.score_floor;

    auto records = read_odgt(a.in);
    std::sort(records.begin(), records.end(),
              [](const ImageRecord& x, const ImageRecord& y) { return x.image_id < y.image_id; });

    std::vector<std::vector<Detection>> batch(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) batch[i] = records[i].dets;

    std::vector<std::map<std::int64_t, double>> densities;
    const std::vector<std::map<std::int64_t, double>>* densities_ptr = nullptr;
    if (cfg.method == NmsMethod::Adaptive) {
        densities.reserve(batch.size());
        for (const auto& dets : batch) densities.push_back(detection_densities(dets));
        densities_ptr = &densities;
    }

    auto kept = apply_nms_batch(batch, cfg, densities_ptr);

    std::cout << "# " << echo << "\n";
    std::size_t total_in = 0;
    std::size_t total_kept = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::printf("image %s kept %zu suppressed %zu\n", records[i].image_id.c_str(),
                    kept[i].size(), batch[i].size() - kept[i].size());
        total_in += records[i].dets.size();
        total_kept += kept[i].size();
        std::vector<nlohmann::ordered_json> extras;
        extras.reserve(kept[i].size());
        for (const auto& d : kept[i]) {
            const auto idx = static_cast<std::size_t>(d.id);
            extras.push_back(idx < records[i].det_extras.size()
                                 ? records[i].det_extras[idx]
                                 : nlohmann::ordered_json::object());
        }
        records[i].dets = kept[i];
        records[i].det_extras = std::move(extras);
    }

    write_odgt(records, a.out, echo);
    std::printf("images %zu\n", records.size());
    std::printf("detections_in %zu\n", total_in);
    std::printf("detections_kept %zu\n", total_kept);
    return 0;
}

struct EvalArgs {
    std::string gt;
    std::string det;
    std::string selector = "full";
    double match_iou = 0.5;
    double min_height = 0.0;
    double vis_lo = -1.0;
    double vis_hi = -1.0;
    int fppi_points = 9;
    double fppi_lo = 1e-2;
    double fppi_hi = 1.0;
    std::string curve_out;
    std::string pr_out;
};

int run_eval(const EvalArgs& a, const std::string& echo) {
    EvalConfig cfg;
    cfg.box_selector = a.selector == "visible" ? BoxSelector::Visible : BoxSelector::Full;
    cfg.match_iou = a.match_iou;
    cfg.min_height = a.min_height;
    cfg.fppi_points = a.fppi_points;
    cfg.fppi_lo = a.fppi_lo;
    cfg.fppi_hi = a.fppi_hi;
    if (a.vis_lo >= 0.0 || a.vis_hi >= 0.0) {
        VisibilityBand band;
        if (a.vis_lo >= 0.0) band.lo = a.vis_lo;
        if (a.vis_hi >= 0.0) band.hi = a.vis_hi;
        cfg.visibility_band = band;
    }

    auto images = to_eval_images(read_odgt(a.gt), read_odgt(a.det));
    auto report = evaluate(images, cfg);

    std::cout << "# " << echo << "\n";
    std::printf("log_avg_miss_rate %.9g\n", report.log_avg_miss_rate);
    std::printf("miss_rate_at_max_fppi %.9g\n", report.miss_rate_at_max_fppi);
    std::printf("average_precision %.9g\n", report.average_precision);
    std::printf("recall %.9g\n", report.recall);
    if (cfg.box_selector == BoxSelector::Full) {
        bool any_visible = false;
        for (const auto& img : images)
            for (const auto& gt : img.gts)
                if (!gt.ignore && !gt.visible_missing) { any_visible = true; break; }
        if (any_visible) {
            auto vis_cfg = cfg;
            vis_cfg.box_selector = BoxSelector::Visible;
            const auto vis_report = evaluate(images, vis_cfg);
            std::printf("log_avg_miss_rate_visible %.9g\n", vis_report.log_avg_miss_rate);
        }
    }
    std::printf("num_gt %lld\n", static_cast<long long>(report.counts.num_gt));
    std::printf("num_det %lld\n", static_cast<long long>(report.counts.num_det));
    std::printf("num_tp %lld\n", static_cast<long long>(report.counts.num_tp));
    std::printf("num_fp %lld\n", static_cast<long long>(report.counts.num_fp));

    if (!a.curve_out.empty()) write_curve(report.fppi_curve, a.curve_out, echo);
    if (!a.pr_out.empty()) write_curve(report.pr_curve, a.pr_out, echo);
    return 0;
}

struct SimArgs {
    int scenes = 8;
    std::uint64_t seed = 0;
    int people = 12;
    double height = 200.0;
    double height_jitter = 0.0;
    int cluster_count = 3;
    double cluster_spread = 20.0;
    bool keep_occluded = false;
    std::string out;
    std::string det_out;
    double duplicates = 0.0;
    double center_jitter = 0.0;
    double size_jitter = 0.0;
    double fp_mean = 0.0;
    std::uint64_t noise_seed = 0;
    bool oracle = false;
    std::vector<double> omegas;
    std::string gt;
};

int run_simulate(const SimArgs& a, const std::string& echo) {
    std::vector<CrowdScene> scenes;
    if (!a.gt.empty()) {
        for (auto& rec : read_odgt(a.gt)) {
            CrowdScene s;
            s.image_id = std::move(rec.image_id);
            s.gts = std::move(rec.gts);
            scenes.push_back(std::move(s));
        }
    } else {
        CrowdSceneSpec spec;
        spec.num_people = a.people;
        spec.person_height_mean = a.height;
        spec.person_height_jitter = a.height_jitter;
        spec.clusters.cluster_count = a.cluster_count;
        spec.clusters.cluster_spread = a.cluster_spread;
        spec.keep_fully_occluded = a.keep_occluded;
        spec.seed = a.seed;
        scenes = generate_scenes(spec, a.scenes);
    }

    std::cout << "# " << echo << "\n";

    if (!a.out.empty()) {
        std::vector<ImageRecord> records;
        records.reserve(scenes.size());
        for (const auto& s : scenes) {
            ImageRecord rec;
            rec.image_id = s.image_id;
            rec.gts = s.gts;
            rec.has_gt_field = true;
            records.push_back(std::move(rec));
        }
        write_odgt(records, a.out, echo);
        std::printf("annotations_out %s (%zu images)\n", a.out.c_str(), scenes.size());
    }

    if (!a.det_out.empty()) {
        DetectorNoise noise;
        noise.duplicates_mean = a.duplicates;
        noise.center_jitter = a.center_jitter;
        noise.size_jitter = a.size_jitter;
        noise.fp_per_image_mean = a.fp_mean;
        noise.seed = a.noise_seed;
        auto dets = simulate_detections(scenes, noise);
        std::vector<ImageRecord> records;
        records.reserve(scenes.size());
        std::size_t total = 0;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            ImageRecord rec;
            rec.image_id = scenes[i].image_id;
            rec.dets = std::move(dets[i]);
            rec.has_det_field = true;
            total += rec.dets.size();
            records.push_back(std::move(rec));
        }
        write_odgt(records, a.det_out, echo);
        std::printf("detections_out %s (%zu boxes)\n", a.det_out.c_str(), total);
    }

    if (a.oracle) {
        std::vector<double> omegas = a.omegas;
        if (omegas.empty()) omegas = {0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
        std::printf("%-6s %-15s %10s %10s %10s\n", "omega", "method", "total", "kept",
                    "fraction");
        for (double omega : omegas) {
            for (auto method : {NmsMethod::GreedyFull, NmsMethod::GreedyVisible}) {
                NmsConfig cfg;
                cfg.threshold = omega;
                cfg.method = method;
                const auto r = oracle_nms_survival(scenes, cfg, a.seed);
                std::printf("%-6.2f %-15s %10lld %10lld %10.6f\n", omega, to_string(method),
                            static_cast<long long>(r.total), static_cast<long long>(r.kept),
                            r.fraction());
            }
        }
    }
    return 0;
}

struct BenchArgs {
    std::vector<int> sizes;
    int reps = 5;
    std::uint64_t seed = 1;
};

std::vector<Detection> random_detections(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.0, 900.0);
    std::uniform_real_distribution<double> width(20.0, 120.0);
    std::uniform_real_distribution<double> height(40.0, 240.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Detection> dets;
    dets.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double x1 = pos(rng);
        const double y1 = pos(rng);
        const double w = width(rng);
        const double h = height(rng);
        const double x2 = x1 + w;
        const double y2 = y1 + h;
        const double vx1 = x1 + 0.5 * w * unit(rng);
        const double vy1 = y1 + 0.5 * h * unit(rng);
        const double vx2 = vx1 + (x2 - vx1) * (0.2 + 0.8 * unit(rng));
        const double vy2 = vy1 + (y2 - vy1) * (0.2 + 0.8 * unit(rng));
        Detection d;
        d.pair = PairedBox{BBox(x1, y1, x2, y2), BBox(vx1, vy1, vx2, vy2)};
        d.score = unit(rng);
        d.id = i;
        dets.push_back(d);
    }
    return dets;
}

int run_bench(const BenchArgs& a, const std::string& echo) {
    using clock = std::chrono::steady_clock;
    std::vector<int> sizes = a.sizes;
    if (sizes.empty()) sizes = {200, 1000, 5000};

    std::cout << "# " << echo << "\n";
    std::printf("threads %d\n", max_threads());
    std::printf("%-15s %8s %-10s %5s %12s %12s\n", "method", "n", "impl", "reps", "ms_mean",
                "ms_min");

    std::mt19937_64 rng(a.seed);
    for (int n : sizes) {
        auto dets = random_detections(n, rng);
        for (auto method : {NmsMethod::GreedyFull, NmsMethod::GreedyVisible}) {
            NmsConfig cfg;
            cfg.method = method;
            const auto selector =
                method == NmsMethod::GreedyVisible ? BoxSelector::Visible : BoxSelector::Full;

            auto kernel_ids = [&] {
                std::set<std::int64_t> ids;
                for (const auto& d : apply_nms(dets, cfg)) ids.insert(d.id);
                return ids;
            }();
            auto reference_ids = [&] {
                std::set<std::int64_t> ids;
                for (auto id : reference::greedy_keep_ids(dets, cfg.threshold, selector)) {
                    ids.insert(id);
                }
                return ids;
            }();
            if (kernel_ids != reference_ids) {
                std::fprintf(stderr, "mismatch: kernel and reference disagree at n=%d\n", n);
                return 1;
            }

            for (const char* impl : {"kernel", "reference"}) {
                double total_ms = 0.0;
                double min_ms = 1e300;
                std::size_t sink = 0;
                for (int rep = 0; rep < a.reps; ++rep) {
                    const auto t0 = clock::now();
                    if (impl[0] == 'k') {
                        sink += apply_nms(dets, cfg).size();
                    } else {
                        sink += reference::greedy_keep_ids(dets, cfg.threshold, selector).size();
                    }
                    const std::chrono::duration<double, std::milli> dt = clock::now() - t0;
                    total_ms += dt.count();
                    min_ms = std::min(min_ms, dt.count());
                }
                if (sink == 0 && n > 0) std::fprintf(stderr, "warning: empty results\n");
                std::printf("%-15s %8d %-10s %5d %12.3f %12.3f\n", to_string(method), n, impl,
                            a.reps, total_ms / a.reps, min_ms);
            }
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"paired-box suppression and evaluation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 keeps the library default)");

    const std::vector<std::string> methods{"greedy-full", "greedy-visible", "r2",
                                           "soft-linear", "soft-gaussian", "adaptive"};

    NmsArgs nms_args;
    auto* nms_cmd = app.add_subcommand("nms", "suppress detections image by image");
    nms_cmd->add_option("--in", nms_args.in, "detections file (JSON lines)")
        ->required()
        ->check(CLI::ExistingFile);
    nms_cmd->add_option("--out", nms_args.out, "output file for survivors")->required();
    nms_cmd->add_option("--method", nms_args.method, "suppression method")
        ->check(CLI::IsMember(methods));
    nms_cmd->add_option("--threshold", nms_args.threshold, "overlap threshold omega");
    nms_cmd->add_option("--sigma", nms_args.sigma, "gaussian decay width");
    nms_cmd->add_option("--score-floor", nms_args.score_floor, "soft rescore cutoff");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "score detections against annotations");
    eval_cmd->add_option("--gt", eval_args.gt, "annotations file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--det", eval_args.det, "detections file")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--selector", eval_args.selector, "box used for matching")
        ->check(CLI::IsMember({"full", "visible"}));
    eval_cmd->add_option("--match-iou", eval_args.match_iou, "overlap needed for a match");
    eval_cmd->add_option("--min-height", eval_args.min_height,
                         "annotations shorter than this become ignore regions");
    eval_cmd->add_option("--vis-lo", eval_args.vis_lo, "visible-fraction band lower edge");
    eval_cmd->add_option("--vis-hi", eval_args.vis_hi, "visible-fraction band upper edge");
    eval_cmd->add_option("--fppi-points", eval_args.fppi_points, "reference grid size");
    eval_cmd->add_option("--fppi-lo", eval_args.fppi_lo, "reference grid lower edge");
    eval_cmd->add_option("--fppi-hi", eval_args.fppi_hi, "reference grid upper edge");
    eval_cmd->add_option("--curve-out", eval_args.curve_out, "write the fppi/miss staircase");
    eval_cmd->add_option("--pr-out", eval_args.pr_out, "write the precision/recall points");

    SimArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "synthetic crowd scenes and detections");
    sim_cmd->add_option("--scenes", sim_args.scenes, "number of scenes");
    sim_cmd->add_option("--seed", sim_args.seed, "base seed");
    sim_cmd->add_option("--people", sim_args.people, "people per scene");
    sim_cmd->add_option("--height", sim_args.height, "mean person height in pixels");
    sim_cmd->add_option("--height-jitter", sim_args.height_jitter, "relative height spread");
    sim_cmd->add_option("--cluster-count", sim_args.cluster_count, "clusters per scene");
    sim_cmd->add_option("--cluster-spread", sim_args.cluster_spread,
                        "stddev of x-centers inside a cluster");
    sim_cmd->add_flag("--keep-occluded", sim_args.keep_occluded,
                      "keep fully hidden people in the annotations");
    sim_cmd->add_option("--out", sim_args.out, "write scene annotations here");
    sim_cmd->add_option("--det-out", sim_args.det_out, "write simulated detections here");
    sim_cmd->add_option("--duplicates", sim_args.duplicates, "extra boxes per annotation (mean)");
    sim_cmd->add_option("--center-jitter", sim_args.center_jitter,
                        "center noise as a fraction of box size");
    sim_cmd->add_option("--size-jitter", sim_args.size_jitter, "scale noise stddev");
    sim_cmd->add_option("--fp-mean", sim_args.fp_mean, "clutter boxes per image (mean)");
    sim_cmd->add_option("--noise-seed", sim_args.noise_seed, "detector noise seed");
    sim_cmd->add_flag("--oracle", sim_args.oracle,
                      "suppress the annotations themselves and report survival");
    sim_cmd->add_option("--omega", sim_args.omegas, "oracle sweep thresholds (repeatable)");
    sim_cmd->add_option("--gt", sim_args.gt, "run the oracle on this annotations file")
        ->check(CLI::ExistingFile);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "time the kernels against the reference");
    bench_cmd->add_option("--n", bench_args.sizes, "input sizes (repeatable)");
    bench_cmd->add_option("--reps", bench_args.reps, "repetitions per size");
    bench_cmd->add_option("--seed", bench_args.seed, "input generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (threads > 0) set_threads(threads);
    const std::string echo = command_echo(argc, argv);

    try {
        if (nms_cmd->parsed()) return run_nms(nms_args, echo);
        if (eval_cmd->parsed()) return run_eval(eval_args, echo);
        if (sim_cmd->parsed()) {
            if (sim_args.out.empty() && sim_args.det_out.empty() && !sim_args.oracle) {
                std::cerr << "simulate needs --out, --det-out, or --oracle\n";
                return kExitUsage;
            }
            return run_simulate(sim_args, echo);
        }
        if (bench_cmd->parsed()) return run_bench(bench_args, echo);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}
