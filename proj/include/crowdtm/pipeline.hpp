#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowdtm/classifier.hpp"
#include "crowdtm/config.hpp"
#include "crowdtm/io.hpp"

namespace crowdtm {

struct MetricsRecord {
    std::string method;
    std::uint64_t seed = 0;
    std::string config_hash;
    double test_accuracy = 0.0;
    std::optional<double> transition_error;  // absent for mv/ds
    std::size_t distilled_m = 0;
    std::size_t mj_min = 0;
    double mj_mean = 0.0;
    std::size_t mj_max = 0;
    std::size_t fallback_annotators = 0;

    json to_json() const {
        json j{{"method", method},
               {"seed", seed},
               {"config_hash", config_hash},
               {"test_accuracy", test_accuracy},
               {"transition_error", transition_error ? json(*transition_error) : json(nullptr)},
               {"m", distilled_m},
               {"m_j", {{"min", mj_min}, {"mean", mj_mean}, {"max", mj_max},
                        {"fallback", fallback_annotators}}}};
        return j;
    }
};

struct PipelineResult {
    MetricsRecord metrics;
    double wall_time_seconds = 0.0;
    std::filesystem::path out_dir;
};

inline std::vector<std::string> stage_plan(Method method) {
    switch (method) {
        case Method::MajorityVote:
            return {"generate", "aggregate_mv", "train_classifier", "evaluate"};
        case Method::DawidSkene:
            return {"generate", "aggregate_ds", "train_classifier", "evaluate"};
        case Method::GlobalOnly:
            return {"generate", "distill", "train_global", "train_classifier", "evaluate"};
        case Method::TaidtmFt:
            return {"generate", "distill", "train_global", "finetune_individual",
                    "train_classifier", "evaluate"};
        case Method::Taidtm:
            return {"generate", "distill", "train_global", "finetune_individual",
                    "build_graph", "train_gcn", "train_classifier", "evaluate"};
    }
    return {};
}

namespace detail {

struct StageGuard {
    std::string stage;
    template <typename F>
    auto run(F&& f) {
        try {
            return f();
        } catch (const ConfigError& e) {
            throw ConfigError("stage " + stage + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("stage " + stage + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("stage " + stage + ": " + e.what());
        }
    }
};

} // namespace detail

inline void write_config_artifact(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    io::open_out(dir / "config.json") << cfg.to_json().dump(2) << "\n";
}

/// Executes the pipeline end to end for one (config, seed) cell and writes
/// all artifacts under out_root/<config_hash>/.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg,
                                   const std::filesystem::path& out_root) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::string hash = cfg.hash();
    const std::filesystem::path dir = out_root / hash;
    std::filesystem::create_directories(dir);
    write_config_artifact(cfg, dir);

    detail::StageGuard guard;

    // -- generate -------------------------------------------------------------
    guard.stage = "generate";
    CrowdDataset crowd = guard.run([&] {
        CleanDataset clean = make_blobs(cfg.data.n, cfg.data.d, cfg.data.classes,
                                        cfg.data.class_sep, cfg.seed);
        AnnotatorPool pool = make_pool(cfg.noise.annotators, cfg.noise.groups, cfg.noise.rho,
                                       cfg.noise.rho_max, cfg.data.classes, cfg.data.d, cfg.seed);
        auto assignment =
            assign_annotators(cfg.data.n, cfg.noise.annotators, cfg.noise.avg_annotations, cfg.seed);
        return corrupt(clean, pool, assignment, cfg.seed);
    });
    io::save_instances(crowd.base, dir / "instances.csv", hash);
    io::save_annotations(crowd, dir / "annotations.csv", hash);
    io::save_pool(crowd.pool, dir / "pool.json", hash);

    MetricsRecord rec;
    rec.method = method_name(cfg.method);
    rec.seed = cfg.seed;
    rec.config_hash = hash;

    MlpNetwork classifier;

    if (cfg.method == Method::MajorityVote || cfg.method == Method::DawidSkene) {
        guard.stage = cfg.method == Method::MajorityVote ? "aggregate_mv" : "aggregate_ds";
        AggregatedLabels agg = guard.run([&] {
            return cfg.method == Method::MajorityVote ? majority_vote_all(crowd)
                                                      : dawid_skene_em(crowd).labels;
        });
        guard.stage = "train_classifier";
        ClassifierTrainConfig ccfg;
        ccfg.hidden_widths = cfg.classifier.hidden_widths;
        ccfg.epochs = cfg.classifier.epochs;
        ccfg.batch_size = cfg.classifier.batch_size;
        ccfg.sgd.learning_rate = cfg.classifier.lr;
        ccfg.lr_decay = cfg.classifier.lr_decay;
        classifier = guard.run([&] { return train_on_labels(crowd, agg, ccfg, cfg.seed); });
    } else {
        // -- distill ------------------------------------------------------------
        guard.stage = "distill";
        SgdConfig warmup_sgd;
        warmup_sgd.learning_rate = cfg.distill.lr;
        auto warmup = guard.run([&] {
            return train_warmup(crowd, cfg.classifier.hidden_widths, cfg.distill.warmup_epochs,
                                cfg.distill.batch_size, warmup_sgd, cfg.seed);
        });
        DistilledSet distilled =
            guard.run([&] { return collect_distilled(warmup.net, crowd, cfg.distill.tau); });
        io::save_distilled(distilled, dir / "distilled.csv", hash);
        rec.distilled_m = distilled.m();
        if (!distilled.per_annotator.empty()) {
            rec.mj_min = SIZE_MAX;
            double sum = 0.0;
            for (std::size_t j = 0; j < distilled.per_annotator.size(); ++j) {
                const std::size_t mj = distilled.m_j(j);
                rec.mj_min = std::min(rec.mj_min, mj);
                rec.mj_max = std::max(rec.mj_max, mj);
                sum += double(mj);
                if (mj < cfg.distill.min_examples) ++rec.fallback_annotators;
            }
            rec.mj_mean = sum / double(distilled.per_annotator.size());
        }

        // -- train_global ---------------------------------------------------------
        guard.stage = "train_global";
        TransitionTrainConfig tcfg;
        tcfg.backbone_widths = cfg.transition.backbone_widths;
        tcfg.latent_dim = cfg.transition.latent_dim;
        tcfg.epochs = cfg.transition.global_epochs;
        tcfg.batch_size = cfg.transition.batch_size;
        tcfg.sgd.learning_rate = cfg.transition.lr;
        TransitionNetwork global =
            guard.run([&] { return train_global(crowd, distilled, tcfg, cfg.seed); });
        io::save_transition_network(global, dir / "global_transition.json", hash);

        IndividualHeads heads;
        GcnMapper mapper;
        DenseMatrix a_hat;
        TransitionModel model;
        model.global = &global;

        if (cfg.method != Method::GlobalOnly) {
            guard.stage = "finetune_individual";
            SgdConfig ft_sgd;
            ft_sgd.learning_rate = cfg.transition.finetune_lr;
            heads = guard.run([&] {
                return finetune_all(global, crowd, distilled, cfg.distill.min_examples,
                                    cfg.transition.finetune_epochs, cfg.transition.batch_size,
                                    ft_sgd, cfg.seed);
            });
            io::save_heads(heads, dir / "individual_heads.json", hash);
        }

        if (cfg.method == Method::Taidtm) {
            guard.stage = "build_graph";
            SimilarityGraph graph = guard.run([&] {
                return build_similarity_graph(heads, global.head, cfg.graph.k, cfg.graph.svd_rank,
                                              cfg.graph.similarity_norm == "l1"
                                                  ? SimilarityNorm::L1
                                                  : SimilarityNorm::L2);
            });
            io::save_graph_matrix(graph.similarity, dir / "graph_similarity.csv", hash);
            io::save_graph_matrix(graph.adjacency, dir / "graph_adjacency.csv", hash);
            io::save_graph_matrix(graph.denoised, dir / "graph_denoised.csv", hash);
            io::save_graph_matrix(graph.normalized, dir / "graph_normalized.csv", hash);
            a_hat = graph.normalized;

            guard.stage = "train_gcn";
            auto gcn_rng = make_stream(cfg.seed, "gcn");
            const std::size_t head_dim =
                cfg.transition.latent_dim * cfg.data.classes * cfg.data.classes;
            std::vector<std::size_t> dims;
            for (std::size_t l = 0; l + 1 < cfg.graph.layers; ++l)
                dims.push_back(cfg.graph.hidden_dim);
            dims.push_back(head_dim);
            mapper = init_gcn(cfg.noise.annotators, dims, cfg.graph.final_activation == "relu",
                              gcn_rng);
            GcnTrainConfig gcfg;
            gcfg.epochs = cfg.graph.gcn_epochs;
            gcfg.batch_size = cfg.graph.batch_size;
            gcfg.sgd.learning_rate = cfg.graph.lr;
            guard.run([&] {
                train_gcn(mapper, a_hat, crowd, distilled, global.backbone, cfg.data.classes,
                          gcfg, cfg.seed);
                return 0;
            });
            io::save_gcn(mapper, dir / "gcn.json", hash);
            model.gcn = &mapper;
            model.a_hat = &a_hat;
            model.source = HeadSource::Interdependent;
        } else if (cfg.method == Method::TaidtmFt) {
            model.individual = &heads;
            model.source = HeadSource::Individual;
        } else {
            model.source = HeadSource::Global;
        }

        guard.stage = "train_classifier";
        ClassifierTrainConfig ccfg;
        ccfg.hidden_widths = cfg.classifier.hidden_widths;
        ccfg.epochs = cfg.classifier.epochs;
        ccfg.batch_size = cfg.classifier.batch_size;
        ccfg.sgd.learning_rate = cfg.classifier.lr;
        ccfg.lr_decay = cfg.classifier.lr_decay;
        ccfg.joint_revision = cfg.classifier.joint_revision;
        classifier = guard.run([&] { return train_classifier(crowd, model, ccfg, cfg.seed); });

        // -- transition estimation error -----------------------------------------
        guard.stage = "evaluate";
        std::vector<DenseMatrix> gcn_heads_flat;
        if (cfg.method == Method::Taidtm) {
            auto H = gcn_forward(mapper, a_hat);
            IndividualHeads inter = assemble_heads(H.back(), cfg.transition.latent_dim,
                                                   cfg.data.classes);
            rec.transition_error = transition_error(
                [&](std::size_t i, std::size_t j) {
                    return predict_transition(global.backbone, inter.heads[j],
                                              crowd.base.instances[i], cfg.data.classes);
                },
                crowd, 2000, cfg.seed);
        } else if (cfg.method == Method::TaidtmFt) {
            rec.transition_error = transition_error(
                [&](std::size_t i, std::size_t j) {
                    return predict_transition(global.backbone, heads.heads[j],
                                              crowd.base.instances[i], cfg.data.classes);
                },
                crowd, 2000, cfg.seed);
        } else {
            rec.transition_error = transition_error(
                [&](std::size_t i, std::size_t j) {
                    (void)j;
                    return predict_transition(global, crowd.base.instances[i]);
                },
                crowd, 2000, cfg.seed);
        }
    }

    guard.stage = "evaluate";
    rec.test_accuracy = guard.run([&] { return evaluate_accuracy(classifier, crowd.base); });

    PipelineResult result;
    result.metrics = rec;
    result.out_dir = dir;
    io::open_out(dir / "metrics.json") << rec.to_json().dump(2) << "\n";
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // wall time lives outside metrics.json so identical (config, seed) runs
    // produce byte-identical metrics
    io::open_out(dir / "timing.json")
        << json{{"config_hash", hash}, {"wall_time_seconds", result.wall_time_seconds}}.dump(2)
        << "\n";
    return result;
}

struct SweepRow {
    std::string param;
    std::string value;
    MetricsRecord metrics;
    double wall_time_seconds = 0.0;
};

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& param,
                              const std::string& value) {
    if (param == "r_bar") cfg.noise.avg_annotations = io::parse_double(value, "sweep value");
    else if (param == "G") cfg.noise.groups = std::size_t(io::parse_long(value, "sweep value"));
    else if (param == "k") cfg.graph.k = std::size_t(io::parse_long(value, "sweep value"));
    else if (param == "rho") cfg.noise.rho = io::parse_double(value, "sweep value");
    else if (param == "method") cfg.method = parse_method(value);
    else throw ConfigError("unknown sweep parameter: " + param);
}

/// Cross-product of values x seeds (x methods unless sweeping the method),
/// one metrics row each; writes sweep.csv and aggregated sweep_summary.csv.
inline std::vector<SweepRow> run_ablation(const ExperimentConfig& base, const std::string& param,
                                          const std::vector<std::string>& values,
                                          const std::vector<std::uint64_t>& seeds,
                                          const std::vector<Method>& methods,
                                          const std::filesystem::path& out_root) {
    if (seeds.empty()) throw ConfigError("run_ablation: empty seed list");
    if (values.empty()) throw ConfigError("run_ablation: empty value list");
    std::vector<Method> method_list = param == "method" ? std::vector<Method>{Method::Taidtm}
                                                        : methods;
    if (method_list.empty()) throw ConfigError("run_ablation: empty method list");

    std::vector<SweepRow> rows;
    for (const auto& value : values) {
        for (Method m : method_list) {
            for (std::uint64_t seed : seeds) {
                ExperimentConfig cfg = base;
                apply_sweep_value(cfg, param, value);
                if (param != "method") cfg.method = m;
                cfg.seed = seed;
                auto res = run_pipeline(cfg, out_root);
                rows.push_back({param, value, res.metrics, res.wall_time_seconds});
            }
        }
    }

    auto out = io::open_out(out_root / ("sweep_" + param + ".csv"));
    out << "param,value,method,seed,config_hash,test_accuracy,transition_error,m,wall_time\n";
    for (const auto& r : rows) {
        out << r.param << "," << r.value << "," << r.metrics.method << "," << r.metrics.seed << ","
            << r.metrics.config_hash << "," << io::fmt_double(r.metrics.test_accuracy) << ","
            << (r.metrics.transition_error ? io::fmt_double(*r.metrics.transition_error) : "")
            << "," << r.metrics.distilled_m << "," << io::fmt_double(r.wall_time_seconds) << "\n";
    }

    // aggregate mean/std per (value, method)
    auto summary = io::open_out(out_root / ("sweep_" + param + "_summary.csv"));
    summary << "param,value,method,runs,accuracy_mean,accuracy_std\n";
    for (const auto& value : values) {
        for (Method m : method_list) {
            const std::string mname = param == "method" ? value : method_name(m);
            std::vector<double> accs;
            for (const auto& r : rows)
                if (r.value == value && r.metrics.method == mname)
                    accs.push_back(r.metrics.test_accuracy);
            if (accs.empty()) continue;
            double mean = 0.0;
            for (double a : accs) mean += a;
            mean /= double(accs.size());
            double var = 0.0;
            for (double a : accs) var += (a - mean) * (a - mean);
            const double stddev = accs.size() > 1 ? std::sqrt(var / double(accs.size() - 1)) : 0.0;
            summary << param << "," << value << "," << mname << "," << accs.size() << ","
                    << io::fmt_double(mean) << "," << io::fmt_double(stddev) << "\n";
        }
    }
    return rows;
}

} // namespace crowdtm
