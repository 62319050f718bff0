#include "crush/graphset.hpp"

#include "crush/error.hpp"
#include "crush/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

namespace crush::graphset {

using nlohmann::json;

FragmentGraph build_graph(const tessellation::FragmentMesh& mesh, const TypeKey& type,
                          const features::PmdVector& pmd, const weibull::WeibullFit& fit) {
    if (!(fit.sigma0 > 0) || !std::isfinite(fit.sigma0))
        throw Error(ErrorKind::NonFinite, "label of " + type.label() + " is not a positive number");
    auto g = graph_features(mesh, type, pmd);
    g.label = fit.sigma0;
    return g;
}

FragmentGraph graph_features(const tessellation::FragmentMesh& mesh, const TypeKey& type,
                             const features::PmdVector& pmd) {
    if (!mesh.connected()) throw Error(ErrorKind::DisconnectedGraph, "fragment graph of " + type.label());
    const auto local = mesh.rotated(axis_to_z(type.axis));
    const auto dist = features::distance_features(local);

    FragmentGraph g;
    g.type = type;
    g.mesh_seed = mesh.rng_seed;
    const int n = static_cast<int>(local.size()), m = static_cast<int>(local.adjacency.size());
    g.nodes.resize(n, kNodeWidth);
    for (int c = 0; c < n; ++c) {
        const auto f = features::compute_node_features(local, c);
        for (int k = 0; k < features::kNodeFeatureCount; ++k) g.nodes(c, k) = f[k];
        for (int k = 0; k < features::kDistanceCount; ++k)
            g.nodes(c, features::kNodeFeatureCount + k) = dist.per_node[c][k];
    }
    g.edges.resize(m, kEdgeWidth);
    for (int e = 0; e < m; ++e) {
        const auto f = features::compute_edge_features(local, e);
        for (int k = 0; k < kEdgeWidth; ++k) g.edges(e, k) = f[k];
        const auto& a = local.adjacency[e];
        g.links.push_back({std::min(a.i, a.j), std::max(a.i, a.j)});
    }
    g.graph.resize(kGraphWidth);
    for (int k = 0; k < features::kPmdCount; ++k) g.graph[k] = pmd[k];
    for (int k = 0; k < features::kDistanceCount; ++k) g.graph[features::kPmdCount + k] = dist.per_particle[k];
    return g;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, int cols, const char* what) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != static_cast<std::size_t>(cols))
            throw Error(ErrorKind::ShapeMismatch, std::string(what) + " row has the wrong width");
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json to_json(const TypeKey& key) {
    return {{"diameter", key.diameter},
            {"shape", {key.shape.x(), key.shape.y(), key.shape.z()}},
            {"axis", std::string(crush::to_string(key.axis))}};
}

TypeKey type_key_from_json(const json& j) {
    TypeKey k;
    k.diameter = j.at("diameter").get<double>();
    const auto s = j.at("shape").get<std::vector<double>>();
    if (s.size() != 3) throw Error(ErrorKind::ShapeMismatch, "shape needs 3 entries");
    k.shape = geometry::Vec3(s[0], s[1], s[2]);
    k.axis = parse_axis(j.at("axis").get<std::string>());
    return k;
}

json to_json(const FragmentGraph& g) {
    json links = json::array();
    for (const auto& l : g.links) links.push_back({l[0], l[1]});
    return {{"schema", kGraphSchema},
            {"type", to_json(g.type)},
            {"test_index", g.test_index},
            {"mesh_seed", g.mesh_seed},
            {"label", g.label},
            {"graph", vector_json(g.graph)},
            {"nodes", matrix_json(g.nodes)},
            {"edges", matrix_json(g.edges)},
            {"links", links}};
}

FragmentGraph graph_from_json(const json& j) {
    if (j.value("schema", "") != kGraphSchema)
        throw Error(ErrorKind::SchemaMismatch, "expected " + std::string(kGraphSchema));
    FragmentGraph g;
    g.type = type_key_from_json(j.at("type"));
    g.test_index = j.at("test_index").get<int>();
    g.mesh_seed = j.at("mesh_seed").get<std::uint64_t>();
    g.label = j.at("label").get<double>();
    g.graph = vector_from_json(j.at("graph"));
    if (g.graph.size() != kGraphWidth) throw Error(ErrorKind::ShapeMismatch, "graph vector length");
    g.nodes = matrix_from_json(j.at("nodes"), kNodeWidth, "node");
    g.edges = matrix_from_json(j.at("edges"), kEdgeWidth, "edge");
    for (const auto& l : j.at("links")) {
        const int a = l.at(0).get<int>(), b = l.at(1).get<int>();
        if (a < 0 || b < 0 || a >= g.num_nodes() || b >= g.num_nodes() || a == b)
            throw Error(ErrorKind::ShapeMismatch, "link out of range");
        g.links.push_back({a, b});
    }
    if (static_cast<int>(g.links.size()) != g.num_edges())
        throw Error(ErrorKind::ShapeMismatch, "links and edge rows differ");
    return g;
}

void write_jsonl(std::ostream& out, const std::vector<FragmentGraph>& graphs) {
    for (const auto& g : graphs) out << to_json(g).dump() << '\n';
}

std::vector<FragmentGraph> read_jsonl(std::istream& in) {
    std::vector<FragmentGraph> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(graph_from_json(json::parse(line)));
    return out;
}

std::string_view to_string(Task task) {
    switch (task) {
        case Task::Diameter: return "diameter";
        case Task::Shape: return "shape";
        case Task::Axis: return "axis";
    }
    return "?";
}

Task parse_task(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "diameter") return Task::Diameter;
    if (t == "shape") return Task::Shape;
    if (t == "axis") return Task::Axis;
    throw Error(ErrorKind::UnknownTask, "unknown task '" + std::string(text) + "'");
}

std::vector<TypeKey> type_keys(const std::vector<FragmentGraph>& graphs) {
    std::vector<TypeKey> keys;
    for (const auto& g : graphs) keys.push_back(g.type);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

SplitSpec make_split(Task task, std::vector<TypeKey> types, std::uint64_t rng_seed, double val_fraction) {
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());

    std::vector<double> diameters;
    for (const auto& t : types) diameters.push_back(t.diameter);
    std::sort(diameters.begin(), diameters.end());
    diameters.erase(std::unique(diameters.begin(), diameters.end()), diameters.end());
    const long nd = static_cast<long>(diameters.size());
    const long held = std::clamp(std::lround(7.0 * static_cast<double>(nd) / 20.0), 1L, std::max(1L, nd - 1));
    const double cut = nd > 1 ? diameters[nd - held] : INFINITY;

    auto is_test = [&](const TypeKey& k) {
        switch (task) {
            case Task::Diameter: return k.diameter >= cut;
            case Task::Shape: return table::is_test_shape(k.shape);
            case Task::Axis: return k.axis == Axis::Y;
        }
        return false;
    };

    SplitSpec s;
    s.task = task;
    s.rng_seed = rng_seed;
    std::vector<TypeKey> pool;
    for (const auto& k : types) (is_test(k) ? s.test : pool).push_back(k);
    if (s.test.empty())
        throw Error(ErrorKind::InsufficientData, "no " + std::string(to_string(task)) + " test types in the dataset");
    if (pool.size() < 2)
        throw Error(ErrorKind::InsufficientData, "need at least two training types for a validation part");

    // validation: proportional allocation over diameters, largest remainders
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(pool.size()))), 1, pool.size() - 1);
    std::map<double, std::vector<TypeKey>> strata;
    for (const auto& k : pool) strata[k.diameter].push_back(k);
    std::vector<std::size_t> quota;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t given = 0, idx = 0;
    for (const auto& [d, keys] : strata) {
        const double exact = static_cast<double>(n_val) * static_cast<double>(keys.size()) / static_cast<double>(pool.size());
        quota.push_back(static_cast<std::size_t>(std::floor(exact)));
        given += quota.back();
        remainders.emplace_back(exact - std::floor(exact), idx++);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; given < n_val; ++r, ++given) ++quota[remainders[r].second];

    Rng rng(rng_seed);
    idx = 0;
    for (auto& [d, keys] : strata) {
        for (std::size_t i = keys.size(); i > 1; --i) std::swap(keys[i - 1], keys[rng.below(i)]);
        for (std::size_t i = 0; i < keys.size(); ++i) (i < quota[idx] ? s.val : s.train).push_back(keys[i]);
        ++idx;
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    return s;
}

Part part_of(const SplitSpec& split, const TypeKey& key) {
    auto in = [&](const std::vector<TypeKey>& v) { return std::find(v.begin(), v.end(), key) != v.end(); };
    if (in(split.train)) return Part::Train;
    if (in(split.val)) return Part::Val;
    if (in(split.test)) return Part::Test;
    return Part::None;
}

namespace {

void moments(const std::vector<const Eigen::MatrixXd*>& blocks, int width, Eigen::VectorXd& mean, Eigen::VectorXd& sd) {
    mean = Eigen::VectorXd::Zero(width);
    sd = Eigen::VectorXd::Zero(width);
    double n = 0.0;
    for (const auto* b : blocks) {
        mean += b->colwise().sum().transpose();
        n += static_cast<double>(b->rows());
    }
    if (n == 0.0) {
        sd.setOnes();
        return;
    }
    mean /= n;
    for (const auto* b : blocks) sd += (b->rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
    sd = (sd / n).cwiseSqrt();
    for (int k = 0; k < width; ++k)
        // differences of nearly equal lengths (e.g. disc_rod on a sphere) leave
        // round-off spreads that would blow up held-out values
        if (!(sd[k] > 1e-8 * std::max(1.0, std::abs(mean[k])))) sd[k] = 1.0;
}

}  // namespace

Standardizer fit_standardizer(const std::vector<const FragmentGraph*>& train) {
    if (train.empty()) throw Error(ErrorKind::InsufficientData, "no training graphs to standardize with");
    std::vector<const Eigen::MatrixXd*> nodes, edges;
    std::vector<Eigen::MatrixXd> rows;
    rows.reserve(train.size());
    for (const auto* g : train) {
        nodes.push_back(&g->nodes);
        edges.push_back(&g->edges);
        rows.push_back(g->graph.transpose());
    }
    std::vector<const Eigen::MatrixXd*> graphs;
    for (const auto& r : rows) graphs.push_back(&r);
    Standardizer s;
    moments(nodes, kNodeWidth, s.node_mean, s.node_std);
    moments(edges, kEdgeWidth, s.edge_mean, s.edge_std);
    moments(graphs, kGraphWidth, s.graph_mean, s.graph_std);
    return s;
}

FragmentGraph Standardizer::apply(const FragmentGraph& g) const {
    FragmentGraph out = g;
    out.nodes = ((g.nodes.rowwise() - node_mean.transpose()).array().rowwise() / node_std.transpose().array()).matrix();
    if (g.num_edges() > 0)
        out.edges = ((g.edges.rowwise() - edge_mean.transpose()).array().rowwise() / edge_std.transpose().array()).matrix();
    out.graph = ((g.graph - graph_mean).array() / graph_std.array()).matrix();
    return out;
}

json to_json(const SplitSpec& split, const Standardizer& stats) {
    auto keys = [](const std::vector<TypeKey>& v) {
        json a = json::array();
        for (const auto& k : v) a.push_back(to_json(k));
        return a;
    };
    return {{"schema", kSplitSchema},
            {"task", std::string(to_string(split.task))},
            {"rng_seed", split.rng_seed},
            {"train", keys(split.train)},
            {"val", keys(split.val)},
            {"test", keys(split.test)},
            {"standardizer",
             {{"node_mean", vector_json(stats.node_mean)},
              {"node_std", vector_json(stats.node_std)},
              {"edge_mean", vector_json(stats.edge_mean)},
              {"edge_std", vector_json(stats.edge_std)},
              {"graph_mean", vector_json(stats.graph_mean)},
              {"graph_std", vector_json(stats.graph_std)}}}};
}

SplitSpec split_from_json(const json& j, Standardizer* stats) {
    if (j.value("schema", "") != kSplitSchema)
        throw Error(ErrorKind::SchemaMismatch, "expected " + std::string(kSplitSchema));
    SplitSpec s;
    s.task = parse_task(j.at("task").get<std::string>());
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const auto& k : j.at("train")) s.train.push_back(type_key_from_json(k));
    for (const auto& k : j.at("val")) s.val.push_back(type_key_from_json(k));
    for (const auto& k : j.at("test")) s.test.push_back(type_key_from_json(k));
    if (stats) {
        const auto& t = j.at("standardizer");
        stats->node_mean = vector_from_json(t.at("node_mean"));
        stats->node_std = vector_from_json(t.at("node_std"));
        stats->edge_mean = vector_from_json(t.at("edge_mean"));
        stats->edge_std = vector_from_json(t.at("edge_std"));
        stats->graph_mean = vector_from_json(t.at("graph_mean"));
        stats->graph_std = vector_from_json(t.at("graph_std"));
        if (stats->node_mean.size() != kNodeWidth || stats->edge_mean.size() != kEdgeWidth ||
            stats->graph_mean.size() != kGraphWidth)
            throw Error(ErrorKind::ShapeMismatch, "standardizer widths");
    }
    return s;
}

}  // namespace crush::graphset
