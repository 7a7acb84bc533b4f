#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdtm/errors.hpp"
#include "crowdtm/rng.hpp"

namespace crowdtm {

using json = nlohmann::json;

enum class Method { Taidtm, TaidtmFt, GlobalOnly, MajorityVote, DawidSkene };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::Taidtm: return "taidtm";
        case Method::TaidtmFt: return "taidtm_ft";
        case Method::GlobalOnly: return "global_only";
        case Method::MajorityVote: return "mv";
        case Method::DawidSkene: return "ds";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "taidtm") return Method::Taidtm;
    if (s == "taidtm_ft") return Method::TaidtmFt;
    if (s == "global_only") return Method::GlobalOnly;
    if (s == "mv") return Method::MajorityVote;
    if (s == "ds") return Method::DawidSkene;
    throw ConfigError("unknown method: " + s);
}

struct ExperimentConfig {
    struct Data {
        std::size_t n = 3000;
        std::size_t d = 8;
        std::size_t classes = 4;
        double class_sep = 3.0;
    } data;

    struct Noise {
        std::size_t annotators = 60;  // R
        std::size_t groups = 3;       // G
        double rho = 0.4;
        double rho_max = 0.6;
        double avg_annotations = 2.0;  // r-bar
    } noise;

    struct Distill {
        std::size_t warmup_epochs = 30;
        double tau = 0.4;
        std::size_t min_examples = 5;  // m_j floor
        double lr = 0.05;
        std::size_t batch_size = 32;
    } distill;

    struct Transition {
        std::vector<std::size_t> backbone_widths = {32, 32};
        std::size_t latent_dim = 16;
        std::size_t global_epochs = 20;
        std::size_t finetune_epochs = 40;
        double lr = 0.05;
        double finetune_lr = 0.03;
        std::size_t batch_size = 32;
    } transition;

    struct Graph {
        std::size_t k = 6;
        std::size_t svd_rank = 3;
        std::size_t layers = 2;
        std::size_t hidden_dim = 64;
        std::size_t gcn_epochs = 10;
        std::string final_activation = "identity";  // or "relu"
        std::string similarity_norm = "l2";         // or "l1"
        double lr = 0.05;
        std::size_t batch_size = 64;
    } graph;

    struct Classifier {
        std::vector<std::size_t> hidden_widths = {32, 32};
        std::size_t epochs = 40;
        double lr = 0.05;
        double lr_decay = 1.0;
        std::size_t batch_size = 32;
        bool joint_revision = true;
    } classifier;

    std::uint64_t seed = 1;
    Method method = Method::Taidtm;

    void validate() const {
        if (data.n == 0 || data.d == 0 || data.classes == 0)
            throw ConfigError("config: counts must be positive");
        if (noise.rho > noise.rho_max) throw ConfigError("config: rho must not exceed rho_max");
        if (graph.k > noise.annotators) throw ConfigError("config: k must not exceed R");
        if (noise.groups == 0 || noise.annotators % noise.groups != 0)
            throw ConfigError("config: R must be a positive multiple of G");
        if (graph.final_activation != "identity" && graph.final_activation != "relu")
            throw ConfigError("config: final_activation must be identity or relu");
        if (graph.similarity_norm != "l2" && graph.similarity_norm != "l1")
            throw ConfigError("config: similarity_norm must be l2 or l1");
    }

    json to_json() const {
        return json{
            {"data",
             {{"n", data.n}, {"d", data.d}, {"classes", data.classes}, {"class_sep", data.class_sep}}},
            {"noise",
             {{"annotators", noise.annotators},
              {"groups", noise.groups},
              {"rho", noise.rho},
              {"rho_max", noise.rho_max},
              {"avg_annotations", noise.avg_annotations}}},
            {"distill",
             {{"warmup_epochs", distill.warmup_epochs},
              {"tau", distill.tau},
              {"min_examples", distill.min_examples},
              {"lr", distill.lr},
              {"batch_size", distill.batch_size}}},
            {"transition",
             {{"backbone_widths", transition.backbone_widths},
              {"latent_dim", transition.latent_dim},
              {"global_epochs", transition.global_epochs},
              {"finetune_epochs", transition.finetune_epochs},
              {"lr", transition.lr},
              {"finetune_lr", transition.finetune_lr},
              {"batch_size", transition.batch_size}}},
            {"graph",
             {{"k", graph.k},
              {"svd_rank", graph.svd_rank},
              {"layers", graph.layers},
              {"hidden_dim", graph.hidden_dim},
              {"gcn_epochs", graph.gcn_epochs},
              {"final_activation", graph.final_activation},
              {"similarity_norm", graph.similarity_norm},
              {"lr", graph.lr},
              {"batch_size", graph.batch_size}}},
            {"classifier",
             {{"hidden_widths", classifier.hidden_widths},
              {"epochs", classifier.epochs},
              {"lr", classifier.lr},
              {"lr_decay", classifier.lr_decay},
              {"batch_size", classifier.batch_size},
              {"joint_revision", classifier.joint_revision}}},
            {"seed", seed},
            {"method", method_name(method)}};
    }

    /// Canonical serialization (sorted keys) whose hash identifies the run.
    std::string canonical() const { return to_json().dump(); }

    std::string hash() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a(canonical())));
        return std::string(buf);
    }
};

namespace detail {

inline void require_keys(const json& j, const std::string& section,
                         std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError("config: " + section + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) known = true;
        if (!known) throw ConfigError("config: unknown key '" + it.key() + "' in " + section);
    }
}

template <typename T>
inline void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

/// Schema-strict parse: unknown keys are errors; missing keys keep defaults.
inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    detail::require_keys(j, "root",
                         {"data", "noise", "distill", "transition", "graph", "classifier", "seed",
                          "method"});
    if (j.contains("data")) {
        const auto& s = j.at("data");
        detail::require_keys(s, "data", {"n", "d", "classes", "class_sep"});
        detail::read_if(s, "n", cfg.data.n);
        detail::read_if(s, "d", cfg.data.d);
        detail::read_if(s, "classes", cfg.data.classes);
        detail::read_if(s, "class_sep", cfg.data.class_sep);
    }
    if (j.contains("noise")) {
        const auto& s = j.at("noise");
        detail::require_keys(s, "noise", {"annotators", "groups", "rho", "rho_max", "avg_annotations"});
        detail::read_if(s, "annotators", cfg.noise.annotators);
        detail::read_if(s, "groups", cfg.noise.groups);
        detail::read_if(s, "rho", cfg.noise.rho);
        detail::read_if(s, "rho_max", cfg.noise.rho_max);
        detail::read_if(s, "avg_annotations", cfg.noise.avg_annotations);
    }
    if (j.contains("distill")) {
        const auto& s = j.at("distill");
        detail::require_keys(s, "distill", {"warmup_epochs", "tau", "min_examples", "lr", "batch_size"});
        detail::read_if(s, "warmup_epochs", cfg.distill.warmup_epochs);
        detail::read_if(s, "tau", cfg.distill.tau);
        detail::read_if(s, "min_examples", cfg.distill.min_examples);
        detail::read_if(s, "lr", cfg.distill.lr);
        detail::read_if(s, "batch_size", cfg.distill.batch_size);
    }
    if (j.contains("transition")) {
        const auto& s = j.at("transition");
        detail::require_keys(s, "transition",
                             {"backbone_widths", "latent_dim", "global_epochs", "finetune_epochs",
                              "lr", "finetune_lr", "batch_size"});
        detail::read_if(s, "backbone_widths", cfg.transition.backbone_widths);
        detail::read_if(s, "latent_dim", cfg.transition.latent_dim);
        detail::read_if(s, "global_epochs", cfg.transition.global_epochs);
        detail::read_if(s, "finetune_epochs", cfg.transition.finetune_epochs);
        detail::read_if(s, "lr", cfg.transition.lr);
        detail::read_if(s, "finetune_lr", cfg.transition.finetune_lr);
        detail::read_if(s, "batch_size", cfg.transition.batch_size);
    }
    if (j.contains("graph")) {
        const auto& s = j.at("graph");
        detail::require_keys(s, "graph",
                             {"k", "svd_rank", "layers", "hidden_dim", "gcn_epochs",
                              "final_activation", "similarity_norm", "lr", "batch_size"});
        detail::read_if(s, "k", cfg.graph.k);
        detail::read_if(s, "svd_rank", cfg.graph.svd_rank);
        detail::read_if(s, "layers", cfg.graph.layers);
        detail::read_if(s, "hidden_dim", cfg.graph.hidden_dim);
        detail::read_if(s, "gcn_epochs", cfg.graph.gcn_epochs);
        detail::read_if(s, "final_activation", cfg.graph.final_activation);
        detail::read_if(s, "similarity_norm", cfg.graph.similarity_norm);
        detail::read_if(s, "lr", cfg.graph.lr);
        detail::read_if(s, "batch_size", cfg.graph.batch_size);
    }
    if (j.contains("classifier")) {
        const auto& s = j.at("classifier");
        detail::require_keys(s, "classifier",
                             {"hidden_widths", "epochs", "lr", "lr_decay", "batch_size",
                              "joint_revision"});
        detail::read_if(s, "hidden_widths", cfg.classifier.hidden_widths);
        detail::read_if(s, "epochs", cfg.classifier.epochs);
        detail::read_if(s, "lr", cfg.classifier.lr);
        detail::read_if(s, "lr_decay", cfg.classifier.lr_decay);
        detail::read_if(s, "batch_size", cfg.classifier.batch_size);
        detail::read_if(s, "joint_revision", cfg.classifier.joint_revision);
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("method")) cfg.method = parse_method(j.at("method").get<std::string>());
    cfg.validate();
    return cfg;
}

} // namespace crowdtm
