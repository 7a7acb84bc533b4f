// crowdtm CLI: synthetic crowds, transition-matrix transfer pipeline,
// ablation sweeps, and report aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crowdtm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace crowdtm;

namespace {

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) {
        cfg.validate();
        return cfg;
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_config(j);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_gen(const ExperimentConfig& cfg, const fs::path& out_root) {
    const std::string hash = cfg.hash();
    const fs::path dir = out_root / hash;
    CleanDataset clean =
        make_blobs(cfg.data.n, cfg.data.d, cfg.data.classes, cfg.data.class_sep, cfg.seed);
    AnnotatorPool pool = make_pool(cfg.noise.annotators, cfg.noise.groups, cfg.noise.rho,
                                   cfg.noise.rho_max, cfg.data.classes, cfg.data.d, cfg.seed);
    auto assignment =
        assign_annotators(cfg.data.n, cfg.noise.annotators, cfg.noise.avg_annotations, cfg.seed);
    CrowdDataset crowd = corrupt(clean, pool, assignment, cfg.seed);
    write_config_artifact(cfg, dir);
    io::save_instances(crowd.base, dir / "instances.csv", hash);
    io::save_annotations(crowd, dir / "annotations.csv", hash);
    io::save_pool(crowd.pool, dir / "pool.json", hash);
    std::cout << "generated " << crowd.base.size() << " instances, " << crowd.annotations.size()
              << " annotations -> " << dir.string() << "\n";
    return 0;
}

int cmd_run(const ExperimentConfig& cfg, const fs::path& out_root, bool dry_run) {
    if (dry_run) {
        std::cout << "stage plan for method " << method_name(cfg.method) << ":\n";
        for (const auto& s : stage_plan(cfg.method)) std::cout << "  " << s << "\n";
        return 0;
    }
    auto res = run_pipeline(cfg, out_root);
    std::cout << res.metrics.to_json().dump(2) << "\n";
    std::cout << "artifacts: " << res.out_dir.string() << " (" << res.wall_time_seconds << " s)\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const fs::path& out_root, const std::string& param,
               const std::string& values, const std::string& seeds, const std::string& methods) {
    std::vector<std::uint64_t> seed_list;
    for (const auto& s : split_list(seeds))
        seed_list.push_back(std::uint64_t(io::parse_long(s, "--seeds")));
    std::vector<Method> method_list;
    for (const auto& m : split_list(methods)) method_list.push_back(parse_method(m));
    auto rows = run_ablation(cfg, param, split_list(values), seed_list, method_list, out_root);
    std::cout << "sweep complete: " << rows.size() << " runs -> "
              << (out_root / ("sweep_" + param + ".csv")).string() << "\n";
    return 0;
}

int cmd_report(const fs::path& out_root) {
    std::cout << "method      seed  accuracy  trans_err  config_hash\n";
    std::size_t count = 0;
    for (const auto& entry : fs::directory_iterator(out_root)) {
        const fs::path metrics_path = entry.path() / "metrics.json";
        if (!fs::exists(metrics_path)) continue;
        std::ifstream in(metrics_path);
        json j;
        in >> j;
        const std::string hash = j.at("config_hash").get<std::string>();
        // reject reports whose directory config does not match their hash
        std::ifstream cin(entry.path() / "config.json");
        if (cin) {
            json cj;
            cin >> cj;
            if (parse_config(cj).hash() != hash)
                throw DataError("config hash mismatch in " + entry.path().string());
        }
        char line[160];
        std::snprintf(line, sizeof(line), "%-10s %5llu   %7.4f  %9s  %s",
                      j.at("method").get<std::string>().c_str(),
                      static_cast<unsigned long long>(j.at("seed").get<std::uint64_t>()),
                      j.at("test_accuracy").get<double>(),
                      j.at("transition_error").is_null()
                          ? "-"
                          : io::fmt_double(j.at("transition_error").get<double>()).substr(0, 9).c_str(),
                      hash.c_str());
        std::cout << line << "\n";
        ++count;
    }
    if (count == 0) std::cout << "(no runs found under " << out_root.string() << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"annotator- and instance-dependent transition matrix transfer"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", method_override, param, values, seeds;
    std::string methods = "taidtm,taidtm_ft,global_only";
    std::uint64_t seed_override = 0;
    bool has_seed = false, dry_run = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (defaults when omitted)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed_override, "seed override")->each([&](const std::string&) {
            has_seed = true;
        });
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic crowd dataset");
    add_common(gen);
    auto* run = app.add_subcommand("run", "run the full pipeline for one method");
    add_common(run);
    run->add_option("--method", method_override, "method: taidtm|taidtm_ft|global_only|mv|ds");
    run->add_flag("--dry-run", dry_run, "print the stage plan and exit");
    auto* ablate = app.add_subcommand("ablate", "sweep a parameter across seeds and methods");
    add_common(ablate);
    ablate->add_option("--param", param, "swept parameter: r_bar|G|k|rho|method")->required();
    ablate->add_option("--values", values, "comma-separated sweep values")->required();
    ablate->add_option("--seeds", seeds, "comma-separated seeds")->required();
    ablate->add_option("--methods", methods, "comma-separated methods (ignored for method sweeps)");
    auto* report = app.add_subcommand("report", "summarize metrics under an output directory");
    report->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        if (!report->parsed()) {
            cfg = load_config(config_path);
            if (has_seed) cfg.seed = seed_override;
            if (!method_override.empty()) cfg.method = parse_method(method_override);
        }
        if (gen->parsed()) return cmd_gen(cfg, out_dir);
        if (run->parsed()) return cmd_run(cfg, out_dir, dry_run);
        if (ablate->parsed()) return cmd_ablate(cfg, out_dir, param, values, seeds, methods);
        if (report->parsed()) return cmd_report(out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
