#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evflow/eval.hpp"
#include "evflow/io.hpp"
#include "evflow/matcher.hpp"
#include "evflow/oracle.hpp"
#include "evflow/postprocess.hpp"
#include "evflow/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace evflow;

namespace {

struct MatcherCli {
    double dx = std::numbers::sqrt2;
    double dt_ms = 100.0;
    double tau_ms = 3.0;
    std::size_t retention = 20'000;
    bool exclude_center = false;
    bool uniform_weights = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--dx", dx, "spatial search radius, px")->capture_default_str();
        cmd->add_option("--dt-ms", dt_ms, "temporal search window, ms")->capture_default_str();
        cmd->add_option("--tau-ms", tau_ms, "refractory period, ms")->capture_default_str();
        cmd->add_option("--retention", retention, "index maps kept per polarity")
            ->capture_default_str();
        cmd->add_flag("--exclude-center", exclude_center,
                      "drop zero-displacement neighbor pairs");
        cmd->add_flag("--uniform-weights", uniform_weights,
                      "average triplet velocities without the Gaussian weight");
    }

    MatcherParams params() const {
        MatcherParams p;
        p.dx = dx;
        p.dt_us = static_cast<std::uint64_t>(std::llround(dt_ms * 1000.0));
        p.tau_us = static_cast<std::uint64_t>(std::llround(tau_ms * 1000.0));
        p.retention = retention;
        p.exclude_center = exclude_center;
        p.weight_mode = uniform_weights ? WeightMode::uniform : WeightMode::gaussian;
        p.validate();
        return p;
    }

    json to_json() const {
        return {{"dx", dx},           {"dt_ms", dt_ms},
                {"tau_ms", tau_ms},   {"retention", retention},
                {"exclude_center", exclude_center}, {"uniform_weights", uniform_weights}};
    }
};

struct OutDir {
    std::string path;
    json config;
    std::vector<std::string> artifacts;

    void require() const {
        if (path.empty()) throw std::runtime_error("--out-dir is required");
    }
    std::string file(const std::string& name) {
        fs::create_directories(path);
        artifacts.push_back(name);
        return (fs::path(path) / name).string();
    }
    void write_manifest(const std::string& command) {
        fs::create_directories(path);
        json m{{"command", command}, {"config", config}, {"artifacts", artifacts}};
        std::ofstream out(fs::path(path) / "manifest.json");
        out << m.dump(2) << "\n";
    }
};

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

void emit_metrics_text(const json& metrics) {
    for (auto it = metrics.begin(); it != metrics.end(); ++it) {
        std::cout << it.key() << "=" << it.value().dump() << "\n";
    }
}

void save_png(const std::string& path, const RgbImage& img) {
    cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw std::runtime_error("cannot write " + path);
}

Pattern parse_pattern(const std::string& name) {
    if (name == "bar" || name == "vbar") return Pattern::vertical_bar;
    if (name == "hbar") return Pattern::horizontal_bar;
    if (name == "diag") return Pattern::diagonal_edge;
    if (name == "dots") return Pattern::random_dots;
    throw std::runtime_error("unknown pattern `" + name + "` (bar|hbar|diag|dots)");
}

// ---------------------------------------------------------------- estimate

int run_estimate(const std::string& input, int width, int height, const MatcherCli& mcli,
                 int bins, bool no_smooth, int threads, OutDir out) {
    out.require();
    const MatcherParams params = mcli.params();
    ReadReport rep;
    EventBatch batch = read_events_text(input, width, height, &rep);
    if (rep.dropped > 0) {
        std::cerr << "note: dropped " << rep.dropped << " out-of-bounds events\n";
    }
    auto records = process_batch(batch, params, nullptr, threads);

    write_flow_records(out.file("flow_records.txt"), batch, records);
    auto vox = voxelize(batch, records, bins);
    if (!no_smooth) vox = nonzero_average_filter(vox);
    for (int b = 0; b < vox.bin_count(); ++b) {
        write_flo(out.file("flow_bin" + std::to_string(b) + ".flo"), collapse_to_image(vox, b));
    }

    std::size_t defined = 0;
    for (const auto& r : records) defined += r.flow.has_value();
    out.config = {{"input", input},       {"matcher", mcli.to_json()}, {"bins", bins},
                  {"smooth", !no_smooth}, {"threads", threads},        {"width", batch.width},
                  {"height", batch.height}};
    out.write_manifest("estimate");
    std::cout << "events=" << batch.size() << "\ndefined_flows=" << defined
              << "\ncoverage=" << (batch.empty() ? 0.0 : double(defined) / double(batch.size()))
              << "\n";
    return 0;
}

// ---------------------------------------------------------------- evaluate

int run_evaluate_pair(const std::string& pred_path, const std::string& gt_path, double dt_s,
                      double threshold, OutDir out) {
    FlowField pred = read_flo(pred_path);
    FlowField gt = read_flo(gt_path);
    FlowField pred_disp = scale_flow_to_displacement(pred, dt_s);
    json metrics;
    if (auto r = aee(pred_disp, gt, threshold)) {
        metrics["aee"] = r->aee;
        metrics["outlier_pct"] = r->outlier_pct;
        metrics["n_evaluated"] = r->n_evaluated;
    } else {
        metrics["no_overlap"] = true;
    }
    emit_metrics_text(metrics);
    if (!out.path.empty()) {
        write_json_file(out.file("metrics.json"), metrics);
        out.config = {{"pred", pred_path}, {"gt", gt_path}, {"dt", dt_s}, {"threshold", threshold}};
        out.write_manifest("evaluate");
    }
    return 0;
}

int run_evaluate_stream(const std::string& events_path, const std::string& gt_index_path,
                        int width, int height, const MatcherCli& mcli, double threshold,
                        bool no_smooth, bool with_fwl, int threads, OutDir out) {
    const MatcherParams params = mcli.params();
    EventBatch batch = read_events_text(events_path, width, height);
    auto records = process_batch(batch, params, nullptr, threads);
    const fs::path base = fs::path(gt_index_path).parent_path();
    std::vector<GtIntervalField> intervals;
    for (const auto& gi : read_gt_index(gt_index_path)) {
        intervals.push_back({gi.t0, gi.t1, read_flo((base / gi.flo_path).string())});
    }
    auto report = evaluate_stream(batch, records, intervals, threshold, !no_smooth, with_fwl);

    json per_interval = json::array();
    for (const auto& ir : report.intervals) {
        json m{{"t0", ir.t0}, {"t1", ir.t1}, {"n_events", ir.n_events},
               {"pred_coverage", ir.pred_coverage}};
        if (ir.aee) {
            m["aee"] = ir.aee->aee;
            m["outlier_pct"] = ir.aee->outlier_pct;
            m["n_evaluated"] = ir.aee->n_evaluated;
        } else {
            m["no_overlap"] = true;
        }
        if (ir.fwl) m["fwl"] = *ir.fwl;
        per_interval.push_back(m);
    }

    json metrics;
    if (report.aggregate) {
        metrics["aee"] = report.aggregate->aee;
        metrics["outlier_pct"] = report.aggregate->outlier_pct;
        metrics["n_evaluated"] = report.aggregate->n_evaluated;
    } else {
        metrics["no_overlap"] = true;
    }
    if (report.mean_fwl) metrics["fwl"] = *report.mean_fwl;
    metrics["intervals"] = per_interval.size();
    emit_metrics_text(metrics);
    metrics["per_interval"] = per_interval;
    if (!out.path.empty()) {
        write_json_file(out.file("metrics.json"), metrics);
        out.config = {{"events", events_path}, {"gt_index", gt_index_path},
                      {"matcher", mcli.to_json()}, {"threshold", threshold},
                      {"smooth", !no_smooth}};
        out.write_manifest("evaluate");
    }
    return 0;
}

// ---------------------------------------------------------------- simulate

int run_simulate(const SceneSpec& spec, std::uint64_t seed, OutDir out) {
    out.require();
    auto scene = generate(spec, seed);
    write_events_text(out.file("events.txt"), scene.batch);
    write_flo(out.file("gt.flo"), scene.gt.displacement);
    json side{{"pattern", static_cast<int>(spec.pattern)},
              {"requested_vx", spec.vx},
              {"requested_vy", spec.vy},
              {"realized_vx", scene.velocity.x},
              {"realized_vy", scene.velocity.y},
              {"duration_us", spec.duration_us},
              {"width", spec.width},
              {"height", spec.height},
              {"spacing_us", spec.spacing_us},
              {"jitter_us", spec.jitter_us},
              {"noise_rate", spec.noise_rate},
              {"bar_width_px", spec.bar_width_px},
              {"dot_count", spec.dot_count},
              {"seed", seed},
              {"gt_displacement_over_s", scene.gt.interval_s()},
              {"events", scene.batch.size()}};
    write_json_file(out.file("scene.json"), side);
    out.config = side;
    out.write_manifest("simulate");
    std::cout << "events=" << scene.batch.size() << "\n";
    return 0;
}

// ---------------------------------------------------------------- bench

int run_bench(const std::string& input, std::size_t synth_events, int width, int height,
              std::uint64_t seed, const MatcherCli& mcli, OutDir out) {
    const MatcherParams params = mcli.params();
    EventBatch batch;
    if (!input.empty()) {
        batch = read_events_text(input, width, height);
    } else {
        // dot field plus background noise sized to the requested event count
        SceneSpec spec;
        spec.pattern = Pattern::random_dots;
        spec.vx = 180.0;
        spec.width = width > 0 ? width : 346;
        spec.height = height > 0 ? height : 260;
        spec.duration_us = 2'000'000;
        spec.dot_count = 48;
        auto base = generate(spec, seed);
        const std::size_t missing =
            synth_events > base.batch.size() ? synth_events - base.batch.size() : 0;
        spec.noise_rate = static_cast<double>(missing) / (spec.duration_us * 1e-6);
        batch = generate(spec, seed).batch;
    }
    auto rep = bench_throughput(batch, params);
    json j{{"n_events", rep.n_events},
           {"mean_us_per_event", rep.mean_us_per_event},
           {"p99_us_per_event", rep.p99_us_per_event},
           {"events_per_second", rep.events_per_second},
           {"total_seconds", rep.total_seconds}};
    emit_metrics_text(j);
    if (!out.path.empty()) {
        write_json_file(out.file("bench.json"), j);
        out.config = {{"input", input}, {"synthetic_events", synth_events},
                      {"matcher", mcli.to_json()}, {"seed", seed}};
        out.write_manifest("bench");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evflow: event-camera optical flow by triplet matching"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key = value file with [subcommand] sections; flags win");

    // estimate
    auto* est = app.add_subcommand("estimate", "per-event flow and voxelized .flo from events");
    std::string est_input;
    int est_w = 0, est_h = 0, est_bins = 1, est_threads = 1;
    bool est_no_smooth = false;
    MatcherCli est_matcher;
    OutDir est_out;
    est->add_option("--input", est_input, "event text file")->required();
    est->add_option("--width", est_w, "sensor width (0 = infer)");
    est->add_option("--height", est_h, "sensor height (0 = infer)");
    est->add_option("--bins", est_bins, "time bins for voxelization")->capture_default_str();
    est->add_flag("--no-smooth", est_no_smooth, "skip the 3x3 valid-cell average filter");
    est->add_option("--threads", est_threads, "1 or 2 (polarity streams)")->capture_default_str();
    est_matcher.add_flags(est);
    est->add_option("--out-dir", est_out.path, "output directory")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "AEE / %Out (and FWL in stream mode)");
    std::string ev_pred, ev_gt, ev_events, ev_gt_index;
    double ev_dt = 0.0, ev_threshold = 3.0;
    int ev_w = 0, ev_h = 0;
    bool ev_no_smooth = false, ev_fwl = false;
    MatcherCli ev_matcher;
    OutDir ev_out;
    ev->add_option("--pred", ev_pred, "predicted flow .flo (px/s)");
    ev->add_option("--gt", ev_gt, "ground-truth displacement .flo (px)");
    ev->add_option("--dt", ev_dt, "interval seconds used to scale --pred");
    ev->add_option("--events", ev_events, "event text file (stream mode)");
    ev->add_option("--gt-index", ev_gt_index, "lines `t0_us t1_us path.flo` (stream mode)");
    ev->add_option("--width", ev_w, "sensor width (0 = infer)");
    ev->add_option("--height", ev_h, "sensor height (0 = infer)");
    ev->add_option("--threshold", ev_threshold, "outlier threshold, px")->capture_default_str();
    ev->add_flag("--no-smooth", ev_no_smooth, "skip smoothing before evaluation");
    ev->add_flag("--fwl", ev_fwl, "also report the flow warp loss per interval");
    ev_matcher.add_flags(ev);
    ev->add_option("--out-dir", ev_out.path, "output directory (optional)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthetic events with analytic ground truth");
    std::string sim_pattern = "bar";
    SceneSpec sim_spec;
    double sim_duration_ms = 500.0;
    std::uint64_t sim_seed = 1;
    OutDir sim_out;
    sim->add_option("--pattern", sim_pattern, "bar|hbar|diag|dots")->capture_default_str();
    sim->add_option("--vx", sim_spec.vx, "px/s")->capture_default_str();
    sim->add_option("--vy", sim_spec.vy, "px/s")->capture_default_str();
    sim->add_option("--duration-ms", sim_duration_ms, "scene length")->capture_default_str();
    sim->add_option("--width", sim_spec.width)->capture_default_str();
    sim->add_option("--height", sim_spec.height)->capture_default_str();
    sim->add_option("--spacing-us", sim_spec.spacing_us, "re-emission period under the bar body");
    sim->add_option("--jitter-us", sim_spec.jitter_us, "timestamp noise std dev");
    sim->add_option("--noise-rate", sim_spec.noise_rate, "background events per second");
    sim->add_option("--bar-width", sim_spec.bar_width_px)->capture_default_str();
    sim->add_option("--dots", sim_spec.dot_count)->capture_default_str();
    sim->add_option("--seed", sim_seed)->capture_default_str();
    sim->add_option("--out-dir", sim_out.path, "output directory")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "single-thread incremental throughput");
    std::string bench_input;
    std::size_t bench_events = 300'000;
    int bench_w = 0, bench_h = 0;
    std::uint64_t bench_seed = 7;
    MatcherCli bench_matcher;
    OutDir bench_out;
    bench->add_option("--input", bench_input, "event text file (default: synthetic stream)");
    bench->add_option("--events", bench_events, "synthetic stream size")->capture_default_str();
    bench->add_option("--width", bench_w);
    bench->add_option("--height", bench_h);
    bench->add_option("--seed", bench_seed)->capture_default_str();
    bench_matcher.add_flags(bench);
    bench->add_option("--out-dir", bench_out.path, "output directory (optional)");

    // viz
    auto* viz = app.add_subcommand("viz", "render a .flo file as a color-wheel PNG");
    std::string viz_flo, viz_png;
    viz->add_option("--flo", viz_flo, "flow file")->required();
    viz->add_option("--out", viz_png, "output PNG")->required();

    // histogram
    auto* hist = app.add_subcommand("histogram", "triplet velocity distribution CSV");
    std::string hist_input;
    int hist_w = 0, hist_h = 0;
    double hist_bin_width = 10.0;
    MatcherCli hist_matcher;
    OutDir hist_out;
    hist->add_option("--input", hist_input, "event text file")->required();
    hist->add_option("--width", hist_w);
    hist->add_option("--height", hist_h);
    hist->add_option("--mag-bin-width", hist_bin_width, "px/s per magnitude bin")
        ->capture_default_str();
    hist_matcher.add_flags(hist);
    hist->add_option("--out-dir", hist_out.path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (est->parsed()) {
            return run_estimate(est_input, est_w, est_h, est_matcher, est_bins, est_no_smooth,
                                est_threads, est_out);
        }
        if (ev->parsed()) {
            if (!ev_events.empty() || !ev_gt_index.empty()) {
                if (ev_events.empty() || ev_gt_index.empty()) {
                    throw std::runtime_error("stream mode needs both --events and --gt-index");
                }
                return run_evaluate_stream(ev_events, ev_gt_index, ev_w, ev_h, ev_matcher,
                                           ev_threshold, ev_no_smooth, ev_fwl, 1, ev_out);
            }
            if (ev_pred.empty() || ev_gt.empty() || ev_dt <= 0.0) {
                throw std::runtime_error("pair mode needs --pred, --gt and --dt > 0");
            }
            return run_evaluate_pair(ev_pred, ev_gt, ev_dt, ev_threshold, ev_out);
        }
        if (sim->parsed()) {
            sim_spec.pattern = parse_pattern(sim_pattern);
            sim_spec.duration_us =
                static_cast<std::uint64_t>(std::llround(sim_duration_ms * 1000.0));
            return run_simulate(sim_spec, sim_seed, sim_out);
        }
        if (bench->parsed()) {
            return run_bench(bench_input, bench_events, bench_w, bench_h, bench_seed,
                             bench_matcher, bench_out);
        }
        if (viz->parsed()) {
            save_png(viz_png, render_flow(read_flo(viz_flo)));
            std::cout << "wrote " << viz_png << "\n";
            return 0;
        }
        if (hist->parsed()) {
            hist_out.require();
            EventBatch batch = read_events_text(hist_input, hist_w, hist_h);
            std::vector<Triplet> trips;
            process_batch(batch, hist_matcher.params(), &trips);
            auto h = velocity_histogram(trips, hist_bin_width);
            write_histogram_csv(hist_out.file("histogram.csv"), h);
            hist_out.config = {{"input", hist_input}, {"matcher", hist_matcher.to_json()},
                               {"mag_bin_width", hist_bin_width}};
            hist_out.write_manifest("histogram");
            std::cout << "triplets=" << trips.size()
                      << "\ncardinal_or_zero_only=" << (h.cardinal_or_zero_only() ? 1 : 0) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
