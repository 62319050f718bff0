/**
 * @file attribution.hpp
 * @brief Per-type mean gradient magnitudes of the model inputs, with CSV and
 *        SVG heatmap export.
 */
#pragma once

#include "crush/learn.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace crush::attribution {

struct AttributionMatrix {
    std::vector<std::string> rows;     ///< type labels, ascending true sigma0
    std::vector<double> sigma0;        ///< true characteristic strength per row
    std::vector<std::string> columns;  ///< feature names
    Eigen::MatrixXd values;            ///< mean |d prediction / d input|
};

struct Attributions {
    AttributionMatrix pmd;       ///< 35 PMD columns
    AttributionMatrix node_edge; ///< 19 node columns then 9 edge columns
};

/// Gradients are taken with respect to the inputs the model consumes
/// (standardized when `graphs` are). Node and edge gradients are averaged
/// over the nodes / edges of each graph, then over the graphs of a type.
Attributions attribute(learn::Model& model, const std::vector<const learn::FragmentGraph*>& graphs);

/// Chain rule to raw units: divides every column by its standardization spread.
Attributions to_raw_units(const Attributions& a, const graphset::Standardizer& stats);

/// "type,sigma0,<columns>" with 17 significant digits.
std::string to_csv(const AttributionMatrix& m);
AttributionMatrix from_csv(const std::string& text);

struct HeatmapOptions {
    bool exclude_last_pmd = false;  ///< drop the instability column from the picture
    std::string title;
};

/// Types along x (ascending strength), features along y. Every cell carries
/// its exact value in data attributes.
std::string render_heatmap(const AttributionMatrix& m, const HeatmapOptions& opts = {});
/// Reads back the cells written by render_heatmap.
AttributionMatrix matrix_from_svg(const std::string& svg);

/// Removes the named column.
AttributionMatrix without_column(const AttributionMatrix& m, const std::string& name);

}  // namespace crush::attribution
