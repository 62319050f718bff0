// Central finite-difference checks of the learn module's reverse-mode gradients.
#pragma once

#include "crush/learn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace crush::testing {

struct GradReport {
    double worst = 0.0;  ///< largest |analytic - numeric| / max(|analytic|, |numeric|) over checked entries
    std::string where;
    std::size_t checked = 0;
    std::size_t failed = 0;
};

/// Entries pass when |a - n| <= rel * max(|a|, |n|) + abs_floor.
inline void compare(GradReport& r, double a, double n, const std::string& where, double rel, double abs_floor) {
    ++r.checked;
    const double diff = std::abs(a - n), scale = std::max(std::abs(a), std::abs(n));
    if (diff > rel * scale + abs_floor) ++r.failed;
    const double e = scale > 0 ? diff / scale : 0.0;
    if (diff > abs_floor && e > r.worst) {
        r.worst = e;
        r.where = where;
    }
}

inline learn::FragmentGraph random_graph(Rng& rng, int n, double label) {
    learn::FragmentGraph g;
    g.nodes.resize(n, graphset::kNodeWidth);
    for (Eigen::Index i = 0; i < g.nodes.size(); ++i) g.nodes.data()[i] = rng.normal();
    for (int i = 1; i < n; ++i) g.links.push_back({static_cast<int>(rng.below(i)), i});
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = static_cast<int>(rng.below(n)), b = static_cast<int>(rng.below(n));
        const bool known = std::any_of(g.links.begin(), g.links.end(), [&](auto& l) {
            return l[0] == std::min(a, b) && l[1] == std::max(a, b);
        });
        if (a != b && !known) g.links.push_back({std::min(a, b), std::max(a, b)});
    }
    g.edges.resize(static_cast<Eigen::Index>(g.links.size()), graphset::kEdgeWidth);
    for (Eigen::Index i = 0; i < g.edges.size(); ++i) g.edges.data()[i] = rng.normal();
    g.graph.resize(graphset::kGraphWidth);
    for (Eigen::Index i = 0; i < g.graph.size(); ++i) g.graph[i] = rng.normal();
    g.label = label;
    return g;
}

/// Checks every parameter and every input entry of one prediction. Dropout
/// masks are replayed from `dropout_seed` when it is nonzero.
inline GradReport check_prediction_gradients(learn::Model& model, const learn::FragmentGraph& g,
                                             std::uint64_t dropout_seed = 0, double step = 1e-5,
                                             double rel = 1e-4, double abs_floor = 1e-9) {
    auto eval = [&](const learn::FragmentGraph& x) {
        if (dropout_seed == 0) return model.predict(x);
        Rng r(dropout_seed);
        auto copy = model;
        return copy.backward(x, 0.0, &r);
    };
    model.params().zero_grad();
    learn::InputGrads in;
    std::optional<Rng> rng;
    if (dropout_seed) rng.emplace(dropout_seed);
    model.backward(g, 1.0, rng ? &*rng : nullptr, &in);

    GradReport rep;
    for (auto& t : model.params().tensors()) {
        for (Eigen::Index k = 0; k < t.value.size(); ++k) {
            double& p = t.value.data()[k];
            const double keep = p;
            p = keep + step;
            const double up = eval(g);
            p = keep - step;
            const double down = eval(g);
            p = keep;
            compare(rep, t.grad.data()[k], (up - down) / (2 * step), t.name + "[" + std::to_string(k) + "]", rel,
                    abs_floor);
        }
    }
    auto inputs = [&](auto member, const Eigen::MatrixXd& analytic, const char* what) {
        auto x = g;
        auto& m = x.*member;
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            const double keep = m.data()[k];
            m.data()[k] = keep + step;
            const double up = eval(x);
            m.data()[k] = keep - step;
            const double down = eval(x);
            m.data()[k] = keep;
            compare(rep, analytic.data()[k], (up - down) / (2 * step), std::string(what) + "[" + std::to_string(k) + "]",
                    rel, abs_floor);
        }
    };
    inputs(&learn::FragmentGraph::nodes, in.nodes, "nodes");
    inputs(&learn::FragmentGraph::edges, in.edges, "edges");
    {
        auto x = g;
        for (Eigen::Index k = 0; k < x.graph.size(); ++k) {
            const double keep = x.graph[k];
            x.graph[k] = keep + step;
            const double up = eval(x);
            x.graph[k] = keep - step;
            const double down = eval(x);
            x.graph[k] = keep;
            compare(rep, in.graph[k], (up - down) / (2 * step), "graph[" + std::to_string(k) + "]", rel, abs_floor);
        }
    }
    return rep;
}

}  // namespace crush::testing
