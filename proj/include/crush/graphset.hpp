/**
 * @file graphset.hpp
 * @brief Labeled fragment graphs, task splits and feature standardization.
 */
#pragma once

#include "crush/features.hpp"
#include "crush/types.hpp"
#include "crush/weibull.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace crush::graphset {

constexpr int kNodeWidth = features::kNodeFeatureCount + features::kDistanceCount;  // 19
constexpr int kEdgeWidth = features::kEdgeFeatureCount;                             // 9
constexpr int kGraphWidth = features::kPmdCount + features::kDistanceCount;         // 43

struct FragmentGraph {
    TypeKey type;
    int test_index = 0;
    std::uint64_t mesh_seed = 0;
    Eigen::MatrixXd nodes;                    ///< n x 19: node features, then node distances
    Eigen::MatrixXd edges;                    ///< m x 9
    std::vector<std::array<int, 2>> links;    ///< undirected, i < j, one per edge row
    Eigen::VectorXd graph;                    ///< 43: PMD, then particle distances
    double label = 0.0;                       ///< type sigma0, MPa

    int num_nodes() const { return static_cast<int>(nodes.rows()); }
    int num_edges() const { return static_cast<int>(edges.rows()); }
};

/// Features are taken in the loading frame of `type.axis`. Throws
/// DisconnectedGraph for a disconnected mesh, NonFinite for a bad label.
FragmentGraph build_graph(const tessellation::FragmentMesh& mesh, const TypeKey& type,
                          const features::PmdVector& pmd, const weibull::WeibullFit& fit);
/// Same arrays with label 0, for datasets labeled later.
FragmentGraph graph_features(const tessellation::FragmentMesh& mesh, const TypeKey& type,
                             const features::PmdVector& pmd);

constexpr const char* kGraphSchema = "crush.graph/1";

nlohmann::json to_json(const FragmentGraph& g);
FragmentGraph graph_from_json(const nlohmann::json& j);

/// One graph per line.
void write_jsonl(std::ostream& out, const std::vector<FragmentGraph>& graphs);
std::vector<FragmentGraph> read_jsonl(std::istream& in);

enum class Task { Diameter, Shape, Axis };

std::string_view to_string(Task task);
/// Accepts diameter, shape, axis (any case); throws UnknownTask.
Task parse_task(std::string_view text);

struct SplitSpec {
    Task task = Task::Diameter;
    std::vector<TypeKey> train, val, test;
    std::uint64_t rng_seed = 0;
};

/// Test part: Diameter holds out the largest round(7n/20) of the n distinct
/// diameters (the seven italic diameters on the full table), Shape the italic
/// shapes, Axis the Y axis. Validation takes 10% of the training types (at
/// least one), allocated over diameters in proportion and drawn with rng_seed.
/// Throws InsufficientData when the test or training part would be empty.
SplitSpec make_split(Task task, std::vector<TypeKey> types, std::uint64_t rng_seed, double val_fraction = 0.1);

/// Distinct type keys of a dataset, sorted.
std::vector<TypeKey> type_keys(const std::vector<FragmentGraph>& graphs);

/// z-score statistics of the training graphs; spreads below 1e-8 (relative
/// to max(1, |mean|)) become 1.
struct Standardizer {
    Eigen::VectorXd node_mean, node_std;
    Eigen::VectorXd edge_mean, edge_std;
    Eigen::VectorXd graph_mean, graph_std;

    FragmentGraph apply(const FragmentGraph& g) const;
};

Standardizer fit_standardizer(const std::vector<const FragmentGraph*>& train);

constexpr const char* kSplitSchema = "crush.split/1";

/// The split together with its training statistics.
nlohmann::json to_json(const SplitSpec& split, const Standardizer& stats);
SplitSpec split_from_json(const nlohmann::json& j, Standardizer* stats = nullptr);

nlohmann::json to_json(const TypeKey& key);
TypeKey type_key_from_json(const nlohmann::json& j);

enum class Part { Train, Val, Test, None };
Part part_of(const SplitSpec& split, const TypeKey& key);

}  // namespace crush::graphset
