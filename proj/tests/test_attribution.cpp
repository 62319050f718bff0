#include "crush/attribution.hpp"
#include "crush/error.hpp"
#include "gradcheck.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <doctest.h>

#include <sstream>

using namespace crush;
using namespace crush::attribution;
using learn::FragmentGraph;

namespace {

// Graphs of three types with distinct labels, several per type.
std::vector<FragmentGraph> typed_graphs() {
    Rng rng(12);
    std::vector<FragmentGraph> out;
    const double labels[] = {7.0, 3.0, 5.0};
    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 4; ++i) {
            auto g = testing::random_graph(rng, 4 + i, labels[t]);
            g.type = {14.35 + t, geometry::Vec3::Ones(), Axis::Z};
            out.push_back(std::move(g));
        }
    return out;
}

std::vector<const FragmentGraph*> ptrs(const std::vector<FragmentGraph>& v) {
    std::vector<const FragmentGraph*> out;
    for (const auto& g : v) out.push_back(&g);
    return out;
}

learn::Model linear_model(const Eigen::VectorXd& w) {
    learn::ModelConfig c;
    c.arch = learn::Arch::Mlp;
    c.hidden = 1;
    c.n_layers = 1;
    c.activation = learn::Activation::Linear;
    learn::Model m(c);
    m.params().at("mlp.0.W").value = w.transpose();
    m.params().at("mlp.0.b").value(0, 0) = 0.3;
    m.params().at("mlp.head.W").value(0, 0) = 1.0;
    m.params().at("mlp.head.b").value(0, 0) = -0.1;
    return m;
}

}  // namespace

TEST_CASE("attribute: linear model gives |w| on every row, rows ascend in strength") {
    Rng rng(3);
    Eigen::VectorXd w(graphset::kGraphWidth);
    for (int k = 0; k < w.size(); ++k) w[k] = rng.normal();
    auto m = linear_model(w);
    const auto data = typed_graphs();
    const auto a = attribute(m, ptrs(data));
    REQUIRE(a.pmd.values.rows() == 3);
    REQUIRE(a.pmd.values.cols() == 35);
    CHECK(a.pmd.sigma0 == std::vector<double>{3.0, 5.0, 7.0});
    for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 35; ++k) CHECK(std::abs(a.pmd.values(r, k) - std::abs(w[k])) <= 1e-12);
    // the dense model ignores nodes and edges entirely
    CHECK(a.node_edge.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.node_edge.columns.size() == 28);
}

TEST_CASE("attribute: dead input column attributes exactly zero") {
    learn::ModelConfig c;
    c.hidden = 6;
    c.seed = 4;
    learn::Model m(c);
    m.params().at("mlp.0.W").value.col(5).setZero();
    m.params().at("gnn.head.W").value(0, c.hidden + 5) = 0.0;
    for (int k = 0; k < 2; ++k) {
        m.params().at("gnn." + std::to_string(k) + ".edge.W").value.col(2).setZero();
    }
    m.params().at("gnn.0.W1").value.col(3).setZero();
    const auto data = typed_graphs();
    const auto a = attribute(m, ptrs(data));
    CHECK(a.pmd.values.col(5).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.pmd.values.col(4).minCoeff() > 0.0);
    CHECK(a.node_edge.values.col(3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.node_edge.values.col(graphset::kNodeWidth + 2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.pmd.values.minCoeff() >= 0.0);
}

TEST_CASE("attribute: no-PMD model consumes no PMD column") {
    learn::ModelConfig c;
    c.hidden = 6;
    c.use_pmd = false;
    learn::Model m(c);
    const auto data = typed_graphs();
    const auto a = attribute(m, ptrs(data));
    CHECK(a.pmd.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.node_edge.values.maxCoeff() > 0.0);
}

TEST_CASE("attribute: input gradients of a trained model match finite differences") {
    const auto data = typed_graphs();
    auto p = ptrs(data);
    learn::ModelConfig c;
    c.hidden = 8;
    c.dropout = 0.0;
    c.max_epochs = 30;
    c.batch_size = 4;
    auto res = learn::train(p, p, c);
    const auto rep = testing::check_prediction_gradients(res.model, data[2]);
    INFO("worst ", rep.worst, " at ", rep.where);
    CHECK(rep.failed == 0);
}

TEST_CASE("heatmap: CSV and SVG round trips, exclusion flag") {
    Rng rng(5);
    Eigen::VectorXd w(graphset::kGraphWidth);
    for (int k = 0; k < w.size(); ++k) w[k] = rng.normal();
    auto m = linear_model(w);
    const auto data = typed_graphs();
    const auto a = attribute(m, ptrs(data)).pmd;

    const auto csv = to_csv(a);
    const auto back = from_csv(csv);
    CHECK(back.rows == a.rows);
    CHECK(back.columns == a.columns);
    CHECK(back.values == a.values);
    CHECK(back.sigma0 == a.sigma0);

    const auto svg = render_heatmap(a);
    const auto from_svg = matrix_from_svg(svg);
    CHECK(to_csv(from_svg) == csv);

    HeatmapOptions ex;
    ex.exclude_last_pmd = true;
    const auto cut = matrix_from_svg(render_heatmap(a, ex));
    CHECK(cut.columns.size() == 34);
    const auto header = csv.substr(0, csv.find('\n'));
    CHECK(std::count(header.begin(), header.end(), ',') == 36);  // type, sigma0 and 35 PMD columns
    CHECK(cut.values == a.values.leftCols(34));
    CHECK(std::find(cut.columns.begin(), cut.columns.end(), "support_offset") == cut.columns.end());
}

TEST_CASE("heatmap: single cell is valid XML") {
    AttributionMatrix one;
    one.rows = {"d11.86_s1,1,1_Z"};
    one.sigma0 = {4.0};
    one.columns = {"volume"};
    one.values = Eigen::MatrixXd::Constant(1, 1, 0.25);
    const auto svg = render_heatmap(one, {false, "a & b"});
    boost::property_tree::ptree tree;
    std::istringstream in(svg);
    CHECK_NOTHROW(boost::property_tree::read_xml(in, tree));
    int rects = 0;
    for (const auto& [tag, node] : tree.get_child("svg"))
        if (tag == "rect" && node.get_child_optional("<xmlattr>.data-value")) ++rects;
    CHECK(rects == 1);
    CHECK(to_csv(matrix_from_svg(svg)) == to_csv(one));
    CHECK_THROWS_AS(matrix_from_svg("<svg"), Error);
}
