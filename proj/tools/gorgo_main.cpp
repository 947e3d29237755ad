#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gorgo/config.hpp"
#include "gorgo/cost.hpp"
#include "gorgo/sim.hpp"
#include "gorgo/telemetry.hpp"
#include "gorgo/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// 0 = ok, 1 = usage, 2 = config, 3 = runtime.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void write_file(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gorgo::DataError("cannot write " + path.string());
    out << contents;
}

ordered_json calibration_json(const gorgo::Calibration& c) {
    ordered_json j;
    j["intercept_ms"] = c.intercept_ms;
    j["slope_ms_per_token"] = c.slope_ms_per_token;
    j["r_squared"] = c.r_squared;
    j["n"] = c.n;
    return j;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string format = "table";
};

void apply_env(CommonOpts& opts) {
    // Only the seed and output directory may come from the environment;
    // everything else lives in the config document.
    if (const char* s = std::getenv("GORGO_SEED"); s != nullptr && !opts.seed_set) {
        opts.seed = std::strtoull(s, nullptr, 10);
        opts.seed_set = true;
    }
    if (const char* o = std::getenv("GORGO_OUT"); o != nullptr && opts.out_dir == ".")
        opts.out_dir = o;
}

gorgo::SimConfig load_config(const CommonOpts& opts) {
    gorgo::SimConfig cfg = gorgo::load_config_file(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    return cfg;
}

void write_run_outputs(const fs::path& dir, const gorgo::SimResult& result) {
    write_file(dir / "events.jsonl", gorgo::export_event_log_jsonl(result.events));
    write_file(dir / "report.json", gorgo::report_to_json(result.report).dump(2) + "\n");
    write_file(dir / "report.txt", gorgo::render_report_table(result.report));
    write_file(dir / "ttft.csv", gorgo::export_ttft_csv(result.report.traces));
}

int cmd_calibrate(const std::string& input, const CommonOpts& opts) {
    std::ifstream in(input);
    if (!in) {
        std::cerr << "calibrate: cannot open " << input << "\n";
        return kExitConfig;
    }
    auto observations = gorgo::read_observations_csv(in);
    gorgo::Calibration c = gorgo::fit_prefill_calibration(observations);
    ordered_json j = calibration_json(c);
    std::cout << j.dump(2) << "\n";
    write_file(fs::path(opts.out_dir) / "calibration.json", j.dump(2) + "\n");
    return kExitOk;
}

int cmd_simulate(const CommonOpts& opts, bool check_only, bool dump_arrivals) {
    gorgo::SimConfig cfg = load_config(opts);
    if (check_only) {
        std::cout << "config ok: " << opts.config_path << " (digest " << gorgo::config_digest(cfg)
                  << ")\n";
        return kExitOk;
    }
    gorgo::SimResult result = gorgo::run_simulation(cfg);
    fs::path dir(opts.out_dir);
    write_run_outputs(dir, result);
    if (dump_arrivals && cfg.workload.kind != gorgo::WorkloadKind::kNone &&
        cfg.workload.kind != gorgo::WorkloadKind::kConcurrent &&
        cfg.workload.kind != gorgo::WorkloadKind::kSweep) {
        auto sampler = gorgo::make_sampler(cfg.workload.prompts, cfg.workload.origins, cfg.seed);
        std::vector<gorgo::ArrivalRecord> arrivals;
        if (cfg.workload.kind == gorgo::WorkloadKind::kPoisson)
            arrivals = gorgo::gen_poisson(cfg.workload.rate_per_s, cfg.workload.duration_s,
                                          *sampler, cfg.seed);
        else
            arrivals = gorgo::gen_throughput(cfg.workload.ceiling_per_s, cfg.workload.duration_s,
                                             *sampler);
        write_file(dir / "arrivals.csv", gorgo::dump_arrivals_csv(arrivals));
    }
    if (opts.format == "json")
        std::cout << gorgo::report_to_json(result.report).dump(2) << "\n";
    else
        std::cout << gorgo::render_report_table(result.report);
    return kExitOk;
}

int cmd_compare(const CommonOpts& opts, const std::string& strategies_csv,
                std::string baseline) {
    std::vector<std::string> strategies;
    std::stringstream ss(strategies_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) strategies.push_back(item);
    }
    if (strategies.size() < 2) throw gorgo::ConfigError("compare: need at least 2 strategies");
    if (baseline.empty()) baseline = strategies.front();

    gorgo::SimConfig cfg = load_config(opts);
    std::vector<gorgo::RunReport> reports;
    fs::path dir(opts.out_dir);
    for (const auto& s : strategies) {
        gorgo::SimConfig run_cfg = cfg;
        run_cfg.policy.strategy = gorgo::strategy_from_string(s);
        gorgo::SimResult result = gorgo::run_simulation(run_cfg);
        write_run_outputs(dir / s, result);
        reports.push_back(std::move(result.report));
    }

    gorgo::PolicyComparison comparison = gorgo::compare_policies(reports, baseline);
    write_file(dir / "comparison.json", gorgo::comparison_to_json(comparison).dump(2) + "\n");
    write_file(dir / "comparison.txt", gorgo::render_comparison_table(comparison));
    write_file(dir / "median_metrics.svg", gorgo::render_comparison_svg(comparison, false));
    write_file(dir / "mean_metrics.svg", gorgo::render_comparison_svg(comparison, true));

    if (opts.format == "json")
        std::cout << gorgo::comparison_to_json(comparison).dump(2) << "\n";
    else
        std::cout << gorgo::render_comparison_table(comparison);
    return kExitOk;
}

int cmd_report(const std::string& input, const CommonOpts& opts) {
    std::ifstream in(input);
    if (!in) {
        std::cerr << "report: cannot open " << input << "\n";
        return kExitConfig;
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw gorgo::DataError("report: input is not valid JSON");

    if (j.contains("policies")) {
        // A comparison document: re-render table and plots.
        gorgo::PolicyComparison c;
        c.baseline = j.at("baseline").get<std::string>();
        c.policies = j.at("policies").get<std::vector<std::string>>();
        for (const auto& [key, m] : j.at("metrics").items()) {
            c.metric_keys.push_back(key);
            c.medians.push_back(m.at("median").get<std::vector<double>>());
            c.means.push_back(m.at("mean").get<std::vector<double>>());
            c.median_ratios.push_back(m.at("median_speedup_vs_baseline").get<std::vector<double>>());
        }
        c.ttft_median_ratio = j.at("ttft_median_speedup_vs_baseline").get<std::vector<double>>();
        if (opts.format == "json")
            std::cout << gorgo::comparison_to_json(c).dump(2) << "\n";
        else
            std::cout << gorgo::render_comparison_table(c);
        write_file(fs::path(opts.out_dir) / "median_metrics.svg",
                   gorgo::render_comparison_svg(c, false));
        write_file(fs::path(opts.out_dir) / "mean_metrics.svg",
                   gorgo::render_comparison_svg(c, true));
        return kExitOk;
    }

    gorgo::RunReport report = gorgo::report_from_json(j);
    if (opts.format == "json")
        std::cout << gorgo::report_to_json(report).dump(2) << "\n";
    else
        std::cout << gorgo::render_report_table(report);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gorgo: geo-distributed LLM load-balancing simulator and benchmark harness"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string calibrate_input, strategies, baseline, report_input;
    bool check_config = false, dump_arrivals = false;

    auto add_common = [&opts](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", opts.config_path, "Path to the run config JSON")
                ->required();
        sub->add_option("--out", opts.out_dir, "Output directory");
        sub->add_option("--seed", opts.seed, "Seed override")->each([&opts](const std::string&) {
            opts.seed_set = true;
        });
        sub->add_option("--format", opts.format, "Stdout format")
            ->check(CLI::IsMember({"json", "table"}));
    };

    CLI::App* calibrate = app.add_subcommand("calibrate", "Fit the prefill-rate regression");
    calibrate->add_option("--input", calibrate_input, "CSV of input_tokens,ttft_ms")->required();
    add_common(calibrate, false);

    CLI::App* simulate = app.add_subcommand("simulate", "Run one simulation");
    add_common(simulate, true);
    simulate->add_flag("--check-config", check_config, "Validate the config and exit");
    simulate->add_flag("--dump-arrivals", dump_arrivals, "Also write the arrival stream CSV");

    CLI::App* compare = app.add_subcommand("compare", "Run several strategies on one workload");
    add_common(compare, true);
    compare->add_option("--strategies", strategies, "Comma-separated strategy list")->required();
    compare->add_option("--baseline", baseline, "Baseline strategy label");

    CLI::App* report = app.add_subcommand("report", "Re-render a report or comparison JSON");
    report->add_option("--input", report_input, "report.json or comparison.json")->required();
    add_common(report, false);

    CLI11_PARSE(app, argc, argv);
    apply_env(opts);

    try {
        if (calibrate->parsed()) return cmd_calibrate(calibrate_input, opts);
        if (simulate->parsed()) return cmd_simulate(opts, check_config, dump_arrivals);
        if (compare->parsed()) return cmd_compare(opts, strategies, baseline);
        if (report->parsed()) return cmd_report(report_input, opts);
    } catch (const gorgo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
