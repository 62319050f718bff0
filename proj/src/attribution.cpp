#include "crush/attribution.hpp"

#include "crush/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace crush::attribution {

using Eigen::MatrixXd;

namespace {

struct Accum {
    double sigma0 = 0.0;
    int count = 0;
    Eigen::VectorXd pmd = Eigen::VectorXd::Zero(features::kPmdCount);
    Eigen::VectorXd ne = Eigen::VectorXd::Zero(graphset::kNodeWidth + graphset::kEdgeWidth);
};

std::vector<std::string> node_edge_names() {
    std::vector<std::string> out;
    for (const char* n : features::node_feature_names()) out.push_back(std::string("node_") + n);
    for (int k = 0; k < features::kDistanceCount; ++k) out.push_back("node_distance_" + std::to_string(k + 1));
    for (const char* n : features::edge_feature_names()) out.push_back(std::string("edge_") + n);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string colour(double t) {
    static const std::array<std::array<double, 3>, 5> stops = {
        {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const int i = std::min(3, static_cast<int>(t));
    const double f = t - i;
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                  static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                  static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
    return buf;
}

}  // namespace

Attributions attribute(learn::Model& model, const std::vector<const learn::FragmentGraph*>& graphs) {
    if (graphs.empty()) throw Error(ErrorKind::InsufficientData, "no graphs to attribute");
    std::map<std::string, Accum> per_type;
    learn::InputGrads in;
    const auto saved = model.params().tensors();
    for (const auto* g : graphs) {
        model.backward(*g, 1.0, nullptr, &in);
        auto& a = per_type[g->type.label()];
        if (a.count > 0 && a.sigma0 != g->label)
            throw Error(ErrorKind::InvalidRecord, "graphs of " + g->type.label() + " carry different labels");
        a.sigma0 = g->label;
        ++a.count;
        a.pmd += in.graph.head(features::kPmdCount).cwiseAbs();
        if (g->num_nodes() > 0)
            a.ne.head(graphset::kNodeWidth) += in.nodes.cwiseAbs().colwise().mean().transpose();
        if (g->num_edges() > 0)
            a.ne.tail(graphset::kEdgeWidth) += in.edges.cwiseAbs().colwise().mean().transpose();
    }
    model.params().tensors() = saved;  // leave the gradient slots as they were

    std::vector<std::pair<std::string, const Accum*>> order;
    for (const auto& [k, a] : per_type) order.emplace_back(k, &a);
    std::stable_sort(order.begin(), order.end(), [](auto& x, auto& y) { return x.second->sigma0 < y.second->sigma0; });

    Attributions out;
    for (auto* m : {&out.pmd, &out.node_edge}) {
        for (const auto& [k, a] : order) {
            m->rows.push_back(k);
            m->sigma0.push_back(a->sigma0);
        }
    }
    for (const auto& d : features::registry()) out.pmd.columns.push_back(d.name);
    out.node_edge.columns = node_edge_names();
    out.pmd.values.resize(static_cast<Eigen::Index>(order.size()), features::kPmdCount);
    out.node_edge.values.resize(static_cast<Eigen::Index>(order.size()), graphset::kNodeWidth + graphset::kEdgeWidth);
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& a = *order[r].second;
        out.pmd.values.row(r) = (a.pmd / a.count).transpose();
        out.node_edge.values.row(r) = (a.ne / a.count).transpose();
    }
    return out;
}

Attributions to_raw_units(const Attributions& a, const graphset::Standardizer& stats) {
    Attributions out = a;
    for (int k = 0; k < features::kPmdCount; ++k) out.pmd.values.col(k) /= stats.graph_std[k];
    for (int k = 0; k < graphset::kNodeWidth; ++k) out.node_edge.values.col(k) /= stats.node_std[k];
    for (int k = 0; k < graphset::kEdgeWidth; ++k)
        out.node_edge.values.col(graphset::kNodeWidth + k) /= stats.edge_std[k];
    return out;
}

std::string to_csv(const AttributionMatrix& m) {
    std::ostringstream out;
    out << "type,sigma0";
    for (const auto& c : m.columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        out << m.rows[r] << ',' << fmt(m.sigma0[r]);
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) out << ',' << fmt(m.values(r, c));
        out << '\n';
    }
    return out.str();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

AttributionMatrix from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::MissingInput, "empty attribution CSV");
    auto head = split_csv(line);
    if (head.size() < 3 || head[0] != "type" || head[1] != "sigma0")
        throw Error(ErrorKind::SchemaMismatch, "attribution CSV header");
    AttributionMatrix m;
    m.columns.assign(head.begin() + 2, head.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // type labels contain commas: the last columns.size() + 1 fields are numbers
        auto f = split_csv(line);
        if (f.size() < m.columns.size() + 2) throw Error(ErrorKind::ShapeMismatch, "short attribution row");
        const std::size_t label_end = f.size() - m.columns.size() - 1;
        std::string label = f[0];
        for (std::size_t i = 1; i < label_end; ++i) label += "," + f[i];
        m.rows.push_back(label);
        m.sigma0.push_back(std::stod(f[label_end]));
        std::vector<double> v;
        for (std::size_t i = label_end + 1; i < f.size(); ++i) v.push_back(std::stod(f[i]));
        rows.push_back(std::move(v));
    }
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m.values(r, c) = rows[r][c];
    return m;
}

AttributionMatrix without_column(const AttributionMatrix& m, const std::string& name) {
    const auto it = std::find(m.columns.begin(), m.columns.end(), name);
    if (it == m.columns.end()) throw Error(ErrorKind::Config, "no column " + name);
    const auto k = static_cast<Eigen::Index>(it - m.columns.begin());
    AttributionMatrix out = m;
    out.columns.erase(out.columns.begin() + k);
    out.values.resize(m.values.rows(), m.values.cols() - 1);
    out.values << m.values.leftCols(k), m.values.rightCols(m.values.cols() - k - 1);
    return out;
}

std::string render_heatmap(const AttributionMatrix& full, const HeatmapOptions& opts) {
    if (full.rows.empty() || full.columns.empty()) throw Error(ErrorKind::InsufficientData, "empty attribution matrix");
    const AttributionMatrix m = opts.exclude_last_pmd && full.columns.back() == features::registry().back().name
                                    ? without_column(full, full.columns.back())
                                    : full;
    const int nt = static_cast<int>(m.rows.size()), nf = static_cast<int>(m.columns.size());
    const double cw = std::clamp(900.0 / nt, 4.0, 40.0), ch = 14.0;
    const double left = 190.0, top = 40.0;
    const double width = left + cw * nt + 90.0, height = top + ch * nf + 60.0;
    const double vmax = std::max(m.values.maxCoeff(), 1e-300);

    std::ostringstream s;
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    s << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << escape(opts.title) << "</text>\n";
    for (int f = 0; f < nf; ++f)
        s << "<text class=\"feature\" data-col=\"" << f << "\" x=\"" << left - 4 << "\" y=\"" << top + ch * f + ch * 0.75
          << "\" text-anchor=\"end\">" << escape(m.columns[f]) << "</text>\n";
    for (int t = 0; t < nt; ++t)
        s << "<g class=\"type\" data-row=\"" << t << "\" data-label=\"" << escape(m.rows[t]) << "\" data-sigma0=\""
          << fmt(m.sigma0[t]) << "\"/>\n";
    for (int t = 0; t < nt; ++t)
        for (int f = 0; f < nf; ++f)
            s << "<rect x=\"" << left + cw * t << "\" y=\"" << top + ch * f << "\" width=\"" << cw << "\" height=\"" << ch
              << "\" fill=\"" << colour(m.values(t, f) / vmax) << "\" data-row=\"" << t << "\" data-col=\"" << f
              << "\" data-value=\"" << fmt(m.values(t, f)) << "\"/>\n";
    // strength axis under the cells
    const double ybase = top + ch * nf;
    for (int t : {0, nt / 2, nt - 1}) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", m.sigma0[t]);
        s << "<text x=\"" << left + cw * (t + 0.5) << "\" y=\"" << ybase + 14 << "\" text-anchor=\"middle\">" << buf
          << "</text>\n";
    }
    s << "<text x=\"" << left + cw * nt / 2 << "\" y=\"" << ybase + 32
      << "\" text-anchor=\"middle\">characteristic strength (MPa), ascending</text>\n";
    // colour bar
    for (int i = 0; i < 20; ++i)
        s << "<rect x=\"" << left + cw * nt + 20 << "\" y=\"" << top + (19 - i) * 6 << "\" width=\"12\" height=\"6\" fill=\""
          << colour(i / 19.0) << "\"/>\n";
    char vb[32];
    std::snprintf(vb, sizeof vb, "%.3g", vmax);
    s << "<text x=\"" << left + cw * nt + 36 << "\" y=\"" << top + 6 << "\">" << vb << "</text>\n";
    s << "<text x=\"" << left + cw * nt + 36 << "\" y=\"" << top + 120 << "\">0</text>\n";
    s << "</svg>\n";
    return s.str();
}

AttributionMatrix matrix_from_svg(const std::string& svg) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(svg);
    try {
        pt::read_xml(in, tree);
    } catch (const pt::xml_parser_error& e) {
        throw Error(ErrorKind::SchemaMismatch, std::string("heatmap is not valid XML: ") + e.what());
    }
    AttributionMatrix m;
    std::map<int, std::string> cols;
    std::map<int, std::pair<std::string, double>> rows;
    std::vector<std::tuple<int, int, double>> cells;
    for (const auto& [tag, node] : tree.get_child("svg")) {
        const auto attr = node.get_child_optional("<xmlattr>");
        if (!attr) continue;
        if (tag == "text" && attr->get("class", "") == "feature")
            cols[attr->get<int>("data-col")] = node.data();
        else if (tag == "g" && attr->get("class", "") == "type")
            rows[attr->get<int>("data-row")] = {attr->get<std::string>("data-label"), attr->get<double>("data-sigma0")};
        else if (tag == "rect" && attr->get_optional<std::string>("data-value"))
            cells.emplace_back(attr->get<int>("data-row"), attr->get<int>("data-col"),
                               std::stod(attr->get<std::string>("data-value")));
    }
    for (const auto& [k, c] : cols) m.columns.push_back(c);
    for (const auto& [k, r] : rows) {
        m.rows.push_back(r.first);
        m.sigma0.push_back(r.second);
    }
    m.values = MatrixXd::Zero(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(m.columns.size()));
    for (const auto& [r, c, v] : cells) m.values(r, c) = v;
    return m;
}

}  // namespace crush::attribution
