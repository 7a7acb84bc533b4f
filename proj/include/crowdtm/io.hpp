#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdtm/crowd.hpp"
#include "crowdtm/gcn.hpp"
#include "crowdtm/transition.hpp"

namespace crowdtm {

namespace io {

/// Shortest round-trip decimal form of a double.
inline std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("parse error: bad number '" + s + "' in " + where);
    return v;
}

inline long parse_long(const std::string& s, const std::string& where) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError("parse error: bad integer '" + s + "' in " + where);
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvReader {
    std::ifstream in;
    std::string path;
    std::string config_hash;  // from the leading "# config_hash=" line, if any
    std::size_t line_no = 0;

    explicit CsvReader(const std::filesystem::path& p) : in(p), path(p.string()) {
        if (!in) throw DataError("cannot open " + path);
    }

    bool next(std::string& line) {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            if (line[0] == '#') {
                const std::string tag = "# config_hash=";
                if (line.rfind(tag, 0) == 0) config_hash = line.substr(tag.size());
                continue;
            }
            return true;
        }
        return false;
    }

    std::string where() const { return path + ":" + std::to_string(line_no); }
};

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

// -- instances CSV: id,f0..f{d-1},true_label,split ---------------------------

inline void save_instances(const CleanDataset& ds, const std::filesystem::path& path,
                           const std::string& config_hash, bool withhold_labels = false) {
    auto out = open_out(path);
    out << "# config_hash=" << config_hash << "\n";
    out << "id";
    for (std::size_t j = 0; j < ds.dim; ++j) out << ",f" << j;
    out << ",true_label,split\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << i;
        for (double v : ds.instances[i]) out << "," << fmt_double(v);
        out << "," << (withhold_labels ? -1 : ds.true_labels[i]) << ","
            << split_name(ds.splits[i]) << "\n";
    }
}

inline CleanDataset load_instances(const std::filesystem::path& path, std::size_t num_classes) {
    CsvReader reader(path);
    std::string line;
    if (!reader.next(line)) throw DataError("empty instances file: " + path.string());
    auto header = split_csv(line);
    if (header.size() < 4 || header.front() != "id" || header[header.size() - 2] != "true_label")
        throw DataError("bad instances header at " + reader.where());
    const std::size_t d = header.size() - 3;
    CleanDataset ds;
    ds.dim = d;
    ds.num_classes = num_classes;
    while (reader.next(line)) {
        auto f = split_csv(line);
        if (f.size() != d + 3) throw DataError("bad field count at " + reader.where());
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = parse_double(f[1 + j], reader.where());
        ds.instances.push_back(std::move(x));
        ds.true_labels.push_back(int(parse_long(f[d + 1], reader.where())));
        const std::string& s = f[d + 2];
        if (s == "train") ds.splits.push_back(Split::Train);
        else if (s == "val") ds.splits.push_back(Split::Val);
        else if (s == "test") ds.splits.push_back(Split::Test);
        else throw DataError("unknown split '" + s + "' at " + reader.where());
    }
    return ds;
}

// -- annotations CSV: instance_id,annotator_id,noisy_label -------------------

inline void save_annotations(const CrowdDataset& crowd, const std::filesystem::path& path,
                             const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash=" << config_hash << "\n";
    out << "instance_id,annotator_id,noisy_label\n";
    for (const auto& a : crowd.annotations)
        out << a.instance_id << "," << a.annotator_id << "," << a.noisy_label << "\n";
}

inline std::vector<Annotation> load_annotations(const std::filesystem::path& path,
                                                std::size_t num_instances,
                                                std::size_t num_annotators) {
    CsvReader reader(path);
    std::string line;
    if (!reader.next(line) || line != "instance_id,annotator_id,noisy_label")
        throw DataError("bad annotations header in " + path.string());
    std::vector<Annotation> out;
    while (reader.next(line)) {
        auto f = split_csv(line);
        if (f.size() != 3) throw DataError("bad field count at " + reader.where());
        Annotation a;
        a.instance_id = std::size_t(parse_long(f[0], reader.where()));
        a.annotator_id = std::size_t(parse_long(f[1], reader.where()));
        a.noisy_label = int(parse_long(f[2], reader.where()));
        if (a.instance_id >= num_instances)
            throw DataError("unknown instance id at " + reader.where());
        if (a.annotator_id >= num_annotators)
            throw DataError("unknown annotator id at " + reader.where());
        out.push_back(a);
    }
    return out;
}

// -- pool JSON ----------------------------------------------------------------

inline void save_pool(const AnnotatorPool& pool, const std::filesystem::path& path,
                      const std::string& config_hash) {
    nlohmann::json j{{"config_hash", config_hash},
                     {"annotators", pool.num_annotators},
                     {"groups", pool.num_groups},
                     {"rho", pool.noise_rate},
                     {"rho_max", pool.noise_rate_max},
                     {"flip_rate", pool.flip_rate},
                     {"projections", pool.projections}};
    open_out(path) << j.dump(2) << "\n";
}

inline AnnotatorPool load_pool(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    AnnotatorPool pool;
    pool.num_annotators = j.at("annotators").get<std::size_t>();
    pool.num_groups = j.at("groups").get<std::size_t>();
    pool.noise_rate = j.at("rho").get<double>();
    pool.noise_rate_max = j.at("rho_max").get<double>();
    pool.flip_rate = j.at("flip_rate").get<std::vector<double>>();
    pool.projections = j.at("projections").get<std::vector<std::vector<std::vector<double>>>>();
    return pool;
}

// -- distilled CSV: instance_id,y_star ----------------------------------------

inline void save_distilled(const DistilledSet& set, const std::filesystem::path& path,
                           const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash=" << config_hash << "\n";
    out << "instance_id,y_star\n";
    for (const auto& ex : set.examples) out << ex.instance_id << "," << ex.y_star << "\n";
}

// -- graph edge lists: src,dst,weight ------------------------------------------

inline void save_graph_matrix(const DenseMatrix& m, const std::filesystem::path& path,
                              const std::string& config_hash) {
    auto out = open_out(path);
    out << "# config_hash=" << config_hash << "\n";
    out << "src,dst,weight\n";
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) out << i << "," << j << "," << fmt_double(m(i, j)) << "\n";
}

// -- model checkpoints (JSON, doubles round-trip exactly) ----------------------

inline nlohmann::json mlp_to_json(const MlpNetwork& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        const char* act = l.act == Activation::Relu ? "relu"
                          : l.act == Activation::SoftmaxRows ? "softmax_rows"
                                                             : "identity";
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"weight", l.weight.values()},
                          {"bias", l.bias},
                          {"activation", act}});
    }
    return {{"input_dim", net.input_dim}, {"layers", layers}};
}

inline MlpNetwork mlp_from_json(const nlohmann::json& j) {
    MlpNetwork net;
    net.input_dim = j.at("input_dim").get<std::size_t>();
    std::size_t out_dim = net.input_dim;
    for (const auto& lj : j.at("layers")) {
        MlpLayer l;
        const std::size_t rows = lj.at("rows").get<std::size_t>();
        const std::size_t cols = lj.at("cols").get<std::size_t>();
        l.weight = DenseMatrix(rows, cols);
        l.weight.values() = lj.at("weight").get<std::vector<double>>();
        if (l.weight.values().size() != rows * cols)
            throw DataError("checkpoint: weight size mismatch");
        l.bias = lj.at("bias").get<std::vector<double>>();
        const std::string act = lj.at("activation").get<std::string>();
        l.act = act == "relu" ? Activation::Relu
                : act == "softmax_rows" ? Activation::SoftmaxRows
                                        : Activation::Identity;
        out_dim = cols;
        net.layers.push_back(std::move(l));
    }
    net.output_dim = out_dim;
    return net;
}

inline nlohmann::json head_to_json(const TransitionHead& h) {
    return {{"rows", h.weight.rows()},
            {"cols", h.weight.cols()},
            {"weight", h.weight.values()},
            {"bias", h.bias},
            {"fallback", h.fallback}};
}

inline TransitionHead head_from_json(const nlohmann::json& j) {
    TransitionHead h;
    h.weight = DenseMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    h.weight.values() = j.at("weight").get<std::vector<double>>();
    h.bias = j.at("bias").get<std::vector<double>>();
    h.fallback = j.at("fallback").get<bool>();
    return h;
}

inline void save_transition_network(const TransitionNetwork& net, const std::filesystem::path& path,
                                    const std::string& config_hash) {
    nlohmann::json j{{"config_hash", config_hash},
                     {"classes", net.num_classes},
                     {"backbone", mlp_to_json(net.backbone)},
                     {"head", head_to_json(net.head)}};
    open_out(path) << j.dump() << "\n";
}

inline TransitionNetwork load_transition_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    TransitionNetwork net;
    net.num_classes = j.at("classes").get<std::size_t>();
    net.backbone = mlp_from_json(j.at("backbone"));
    net.head = head_from_json(j.at("head"));
    return net;
}

inline void save_heads(const IndividualHeads& heads, const std::filesystem::path& path,
                       const std::string& config_hash) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& h : heads.heads) arr.push_back(head_to_json(h));
    open_out(path) << nlohmann::json{{"config_hash", config_hash}, {"heads", arr}}.dump() << "\n";
}

inline void save_gcn(const GcnMapper& mapper, const std::filesystem::path& path,
                     const std::string& config_hash) {
    nlohmann::json ws = nlohmann::json::array();
    for (const auto& w : mapper.weights)
        ws.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weight", w.values()}});
    nlohmann::json j{{"config_hash", config_hash},
                     {"relu_final", mapper.relu_final},
                     {"weights", ws}};
    open_out(path) << j.dump() << "\n";
}

} // namespace io

} // namespace crowdtm
