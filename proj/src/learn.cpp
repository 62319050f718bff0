#include "crush/learn.hpp"

#include "crush/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace crush::learn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr int kMlpBranch = 1;
constexpr int kGnnBranch = 2;
constexpr int kDist = features::kDistanceCount;

std::string lower(std::string_view t) {
    std::string s(t);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// One dense layer over the rows of X: Y = mask .* act(X W^T + b).
struct Dense {
    MatrixXd x, z, mask;
};

MatrixXd activate(const MatrixXd& z, Activation a) { return a == Activation::Relu ? MatrixXd(z.cwiseMax(0.0)) : z; }

MatrixXd dense_forward(const MatrixXd& x, const Tensor& w, const Tensor& b, Activation act, double drop, Rng* rng,
                       Dense* cache) {
    MatrixXd z = x * w.value.transpose();
    z.rowwise() += b.value.col(0).transpose();
    MatrixXd y = activate(z, act);
    MatrixXd mask;
    if (rng && drop > 0.0) {
        mask.resize(y.rows(), y.cols());
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
            for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = rng->uniform() < drop ? 0.0 : 1.0 / (1.0 - drop);
        y = y.cwiseProduct(mask);
    }
    if (cache) *cache = {x, std::move(z), std::move(mask)};
    return y;
}

// Returns dX; accumulates into the gradient slots.
MatrixXd dense_backward(const Dense& c, const MatrixXd& dy, Tensor& w, Tensor& b, Activation act) {
    MatrixXd dz = c.mask.size() ? MatrixXd(dy.cwiseProduct(c.mask)) : dy;
    if (act == Activation::Relu) dz = dz.cwiseProduct((c.z.array() > 0.0).cast<double>().matrix());
    w.grad += dz.transpose() * c.x;
    b.grad += dz.colwise().sum().transpose();
    return dz * w.value;
}

std::string layer(const char* branch, int k, const char* what) {
    return std::string(branch) + "." + std::to_string(k) + "." + what;
}

}  // namespace

std::string_view to_string(Arch a) {
    switch (a) {
        case Arch::Mlp: return "mlp";
        case Arch::Gnn: return "gnn";
        case Arch::Hybrid: return "hybrid";
    }
    return "?";
}

std::string_view to_string(Readout r) {
    switch (r) {
        case Readout::Mean: return "mean";
        case Readout::Sum: return "sum";
        case Readout::Max: return "max";
    }
    return "?";
}

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

Arch parse_arch(std::string_view text) {
    const auto t = lower(text);
    if (t == "mlp") return Arch::Mlp;
    if (t == "gnn") return Arch::Gnn;
    if (t == "hybrid") return Arch::Hybrid;
    throw Error(ErrorKind::Config, "unknown architecture '" + t + "'");
}

Readout parse_readout(std::string_view text) {
    const auto t = lower(text);
    if (t == "mean") return Readout::Mean;
    if (t == "sum") return Readout::Sum;
    if (t == "max") return Readout::Max;
    throw Error(ErrorKind::Config, "unknown readout '" + t + "'");
}

Activation parse_activation(std::string_view text) {
    const auto t = lower(text);
    if (t == "relu") return Activation::Relu;
    if (t == "linear") return Activation::Linear;
    throw Error(ErrorKind::Config, "unknown activation '" + t + "'");
}

void ModelConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorKind::Config, what);
    };
    need(hidden >= 1, "hidden must be >= 1");
    need(n_layers >= 1, "n_layers must be >= 1");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    need(weight_decay >= 0.0, "weight_decay must be >= 0");
    need(learning_rate >= 0.0, "learning_rate must be >= 0");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(max_epochs >= 1 && patience >= 1, "max_epochs and patience must be >= 1");
    need(std::isfinite(eps), "eps must be finite");
    need(!(arch == Arch::Mlp && !use_pmd), "an MLP without PMD inputs has nothing to consume");
}

json to_json(const ModelConfig& c) {
    return {{"arch", std::string(to_string(c.arch))},
            {"hidden", c.hidden},
            {"n_layers", c.n_layers},
            {"dropout", c.dropout},
            {"eps", c.eps},
            {"readout", std::string(to_string(c.readout))},
            {"activation", std::string(to_string(c.activation))},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"weight_decay", c.weight_decay},
            {"use_pmd", c.use_pmd},
            {"use_nef", c.use_nef},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.hidden = j.at("hidden").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.eps = j.at("eps").get<double>();
    c.readout = parse_readout(j.at("readout").get<std::string>());
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.use_pmd = j.at("use_pmd").get<bool>();
    c.use_nef = j.at("use_nef").get<bool>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
    if (contains(name)) throw Error(ErrorKind::Config, "duplicate parameter " + name);
    tensors_.push_back({name, MatrixXd::Zero(rows, cols), MatrixXd::Zero(rows, cols)});
    return tensors_.back();
}

Tensor& ParamStore::at(const std::string& name) {
    for (auto& t : tensors_)
        if (t.name == name) return t;
    throw Error(ErrorKind::ShapeMismatch, "no parameter " + name);
}

const Tensor& ParamStore::at(const std::string& name) const { return const_cast<ParamStore*>(this)->at(name); }

bool ParamStore::contains(const std::string& name) const {
    return std::any_of(tensors_.begin(), tensors_.end(), [&](const Tensor& t) { return t.name == name; });
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
}

double ParamStore::squared_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_) s += t.value.squaredNorm();
    return s;
}

std::size_t ParamStore::size() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
}

bool Model::has_mlp() const { return config_.arch != Arch::Gnn && config_.use_pmd; }
bool Model::has_gnn() const { return config_.arch != Arch::Mlp; }

Model::Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    const int h = config_.hidden;
    if (has_mlp()) {
        int in = graphset::kGraphWidth;
        for (int k = 0; k < config_.n_layers; ++k, in = h) {
            params_.add(layer("mlp", k, "W"), h, in);
            params_.add(layer("mlp", k, "b"), h, 1);
        }
        params_.add("mlp.head.W", 1, h);
        params_.add("mlp.head.b", 1, 1);
    }
    if (has_gnn()) {
        int in = config_.use_nef ? graphset::kNodeWidth : kDist;
        for (int k = 0; k < config_.n_layers; ++k, in = h) {
            if (config_.use_nef) {
                params_.add(layer("gnn", k, "edge.W"), in, graphset::kEdgeWidth);
                params_.add(layer("gnn", k, "edge.b"), in, 1);
            }
            params_.add(layer("gnn", k, "W1"), h, in);
            params_.add(layer("gnn", k, "b1"), h, 1);
            params_.add(layer("gnn", k, "W2"), h, h);
            params_.add(layer("gnn", k, "b2"), h, 1);
        }
        const int graph_in = config_.use_pmd ? graphset::kGraphWidth : kDist;
        params_.add("gnn.head.W", 1, h + graph_in);
        params_.add("gnn.head.b", 1, 1);
    }
    Rng rng(config_.seed);
    for (auto& t : params_.tensors()) {
        if (t.name[t.name.rfind('.') + 1] == 'b') continue;  // biases start at zero
        const double a = std::sqrt(6.0 / static_cast<double>(t.value.rows() + t.value.cols()));
        for (Eigen::Index c = 0; c < t.value.cols(); ++c)
            for (Eigen::Index r = 0; r < t.value.rows(); ++r) t.value(r, c) = rng.uniform(-a, a);
    }
}

struct Model::Cache {
    std::vector<Dense> mlp;
    MatrixXd mlp_top;
    struct Gin {
        MatrixXd h, edge_in;
        Dense d1, d2;
    };
    std::vector<Gin> gin;
    MatrixXd h_last;
    VectorXd head_in;
    std::vector<Eigen::Index> argmax;
};

void Model::check_shapes(const FragmentGraph& g) const {
    if (g.graph.size() != graphset::kGraphWidth || g.nodes.cols() != graphset::kNodeWidth ||
        g.edges.cols() != graphset::kEdgeWidth || static_cast<int>(g.links.size()) != g.num_edges())
        throw Error(ErrorKind::ShapeMismatch, "graph arrays do not have the model's widths");
    if (has_gnn() && g.num_nodes() == 0) throw Error(ErrorKind::ShapeMismatch, "graph without nodes");
}

double Model::run(const FragmentGraph& g, Rng* rng, Cache* cache, int branches) const {
    check_shapes(g);
    const auto& P = params_;
    const auto act = config_.activation;
    double y = 0.0;
    if (has_mlp() && (branches & kMlpBranch)) {
        MatrixXd a = g.graph.transpose();
        if (cache) cache->mlp.resize(config_.n_layers);
        for (int k = 0; k < config_.n_layers; ++k)
            a = dense_forward(a, P.at(layer("mlp", k, "W")), P.at(layer("mlp", k, "b")), act, config_.dropout, rng,
                              cache ? &cache->mlp[k] : nullptr);
        if (cache) cache->mlp_top = a;
        y += (a * P.at("mlp.head.W").value.transpose())(0, 0) + P.at("mlp.head.b").value(0, 0);
    }
    if (has_gnn() && (branches & kGnnBranch)) {
        MatrixXd h = config_.use_nef ? g.nodes : MatrixXd(g.nodes.rightCols(kDist));
        if (cache) cache->gin.resize(config_.n_layers);
        for (int k = 0; k < config_.n_layers; ++k) {
            MatrixXd agg = (1.0 + config_.eps) * h;
            MatrixXd e;
            if (config_.use_nef && g.num_edges() > 0) {
                e = g.edges * P.at(layer("gnn", k, "edge.W")).value.transpose();
                e.rowwise() += P.at(layer("gnn", k, "edge.b")).value.col(0).transpose();
            }
            for (std::size_t l = 0; l < g.links.size(); ++l) {
                const auto [i, j] = g.links[l];
                agg.row(i) += h.row(j);
                agg.row(j) += h.row(i);
                if (e.size()) {
                    agg.row(i) += e.row(l);
                    agg.row(j) += e.row(l);
                }
            }
            Cache::Gin* gc = cache ? &cache->gin[k] : nullptr;
            if (gc) gc->h = h, gc->edge_in = g.edges;
            MatrixXd u = dense_forward(agg, P.at(layer("gnn", k, "W1")), P.at(layer("gnn", k, "b1")), act, 0.0,
                                       nullptr, gc ? &gc->d1 : nullptr);
            h = dense_forward(u, P.at(layer("gnn", k, "W2")), P.at(layer("gnn", k, "b2")), act, config_.dropout, rng,
                              gc ? &gc->d2 : nullptr);
        }
        VectorXd r;
        std::vector<Eigen::Index> arg;
        switch (config_.readout) {
            case Readout::Mean: r = h.colwise().mean().transpose(); break;
            case Readout::Sum: r = h.colwise().sum().transpose(); break;
            case Readout::Max:
                r.resize(h.cols());
                arg.resize(h.cols());
                for (Eigen::Index c = 0; c < h.cols(); ++c) r[c] = h.col(c).maxCoeff(&arg[c]);
                break;
        }
        const int graph_in = config_.use_pmd ? graphset::kGraphWidth : kDist;
        VectorXd v(r.size() + graph_in);
        v << r, g.graph.tail(graph_in);
        y += P.at("gnn.head.W").value.row(0).dot(v) + P.at("gnn.head.b").value(0, 0);
        if (cache) {
            cache->h_last = std::move(h);
            cache->head_in = std::move(v);
            cache->argmax = std::move(arg);
        }
    }
    return y;
}

double Model::predict(const FragmentGraph& g) const { return run(g, nullptr, nullptr, kMlpBranch | kGnnBranch); }
double Model::mlp_forward(const FragmentGraph& g) const { return run(g, nullptr, nullptr, kMlpBranch); }
double Model::gnn_forward(const FragmentGraph& g) const { return run(g, nullptr, nullptr, kGnnBranch); }

double Model::backward(const FragmentGraph& g, double seed, Rng* dropout, InputGrads* inputs) {
    Cache c;
    const double y = run(g, dropout, &c, kMlpBranch | kGnnBranch);
    auto& P = params_;
    const auto act = config_.activation;
    if (inputs) {
        inputs->graph = VectorXd::Zero(graphset::kGraphWidth);
        inputs->nodes = MatrixXd::Zero(g.num_nodes(), graphset::kNodeWidth);
        inputs->edges = MatrixXd::Zero(g.num_edges(), graphset::kEdgeWidth);
    }
    if (has_mlp()) {
        auto& hw = P.at("mlp.head.W");
        P.at("mlp.head.b").grad(0, 0) += seed;
        hw.grad += seed * c.mlp_top;
        MatrixXd d = seed * hw.value;
        for (int k = config_.n_layers - 1; k >= 0; --k)
            d = dense_backward(c.mlp[k], d, P.at(layer("mlp", k, "W")), P.at(layer("mlp", k, "b")), act);
        if (inputs) inputs->graph += d.row(0).transpose();
    }
    if (has_gnn()) {
        auto& hw = P.at("gnn.head.W");
        P.at("gnn.head.b").grad(0, 0) += seed;
        hw.grad.row(0) += seed * c.head_in.transpose();
        const VectorXd dv = seed * hw.value.row(0).transpose();
        const Eigen::Index width = c.h_last.cols();
        const int graph_in = config_.use_pmd ? graphset::kGraphWidth : kDist;
        if (inputs) inputs->graph.tail(graph_in) += dv.tail(graph_in);
        const VectorXd dr = dv.head(width);
        const auto n = c.h_last.rows();
        MatrixXd dh = MatrixXd::Zero(n, width);
        switch (config_.readout) {
            case Readout::Mean: dh.rowwise() = dr.transpose() / static_cast<double>(n); break;
            case Readout::Sum: dh.rowwise() = dr.transpose(); break;
            case Readout::Max:
                for (Eigen::Index col = 0; col < width; ++col) dh(c.argmax[col], col) = dr[col];
                break;
        }
        for (int k = config_.n_layers - 1; k >= 0; --k) {
            const auto& gc = c.gin[k];
            MatrixXd du = dense_backward(gc.d2, dh, P.at(layer("gnn", k, "W2")), P.at(layer("gnn", k, "b2")), act);
            MatrixXd dagg = dense_backward(gc.d1, du, P.at(layer("gnn", k, "W1")), P.at(layer("gnn", k, "b1")), act);
            dh = (1.0 + config_.eps) * dagg;
            MatrixXd de = config_.use_nef ? MatrixXd::Zero(g.num_edges(), dagg.cols()) : MatrixXd();
            for (std::size_t l = 0; l < g.links.size(); ++l) {
                const auto [i, j] = g.links[l];
                dh.row(j) += dagg.row(i);
                dh.row(i) += dagg.row(j);
                if (de.size()) de.row(l) = dagg.row(i) + dagg.row(j);
            }
            if (de.size()) {
                auto& ew = P.at(layer("gnn", k, "edge.W"));
                ew.grad += de.transpose() * gc.edge_in;
                P.at(layer("gnn", k, "edge.b")).grad += de.colwise().sum().transpose();
                if (inputs) inputs->edges += de * ew.value;
            }
        }
        if (inputs) {
            if (config_.use_nef)
                inputs->nodes += dh;
            else
                inputs->nodes.rightCols(kDist) += dh;
        }
    }
    return y;
}

LossValue loss_and_grad(Model& model, std::span<const FragmentGraph* const> batch, double lambda, Rng* dropout) {
    if (batch.empty()) throw Error(ErrorKind::InsufficientData, "empty batch");
    auto& params = model.params();
    params.zero_grad();
    const double n = static_cast<double>(batch.size());
    LossValue out;
    // unit seed per sample, rescaled by d(mse)/dy = 2 (y - t) / n once y is known
    std::vector<MatrixXd> acc;
    for (const auto& t : params.tensors()) acc.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
    for (const auto* g : batch) {
        params.zero_grad();
        const double y = model.backward(*g, 1.0, dropout);
        const double r = y - g->label;
        out.mse += r * r / n;
        auto& ts = params.tensors();
        for (std::size_t k = 0; k < ts.size(); ++k) acc[k] += (2.0 * r / n) * ts[k].grad;
    }
    out.loss = out.mse + lambda * params.squared_norm();
    if (!std::isfinite(out.loss)) throw Error(ErrorKind::NonFinite, "training loss is not finite");
    auto& ts = params.tensors();
    for (std::size_t k = 0; k < ts.size(); ++k) ts[k].grad = acc[k] + 2.0 * lambda * ts[k].value;
    return out;
}

Metrics metrics(std::span<const double> predictions, std::span<const double> labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw Error(ErrorKind::InsufficientData, "metrics need equally many predictions and labels");
    Metrics m;
    m.n = predictions.size();
    for (std::size_t i = 0; i < m.n; ++i) {
        const double r = predictions[i] - labels[i];
        m.mae += std::abs(r);
        m.rmse += r * r;
    }
    m.mae /= static_cast<double>(m.n);
    m.rmse = std::sqrt(m.rmse / static_cast<double>(m.n));
    return m;
}

Metrics evaluate(const Model& model, std::span<const FragmentGraph* const> part) {
    std::vector<double> p, t;
    for (const auto* g : part) {
        p.push_back(model.predict(*g));
        t.push_back(g->label);
    }
    return metrics(p, t);
}

void Adam::step(ParamStore& params, double lr) {
    auto& ts = params.tensors();
    if (m.empty())
        for (const auto& x : ts) {
            m.push_back(MatrixXd::Zero(x.value.rows(), x.value.cols()));
            v.push_back(MatrixXd::Zero(x.value.rows(), x.value.cols()));
        }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        m[k] = beta1 * m[k] + (1 - beta1) * ts[k].grad;
        v[k] = beta2 * v[k] + (1 - beta2) * ts[k].grad.cwiseAbs2();
        ts[k].value.array() -= lr * (m[k].array() / c1) / ((v[k].array() / c2).sqrt() + epsilon);
    }
}

TrainResult train(std::span<const FragmentGraph* const> train_part, std::span<const FragmentGraph* const> val_part,
                  const ModelConfig& config) {
    if (train_part.empty() || val_part.empty())
        throw Error(ErrorKind::InsufficientData, "training needs non-empty train and validation parts");
    Model model(config);
    TrainResult res{model, {}, 0, evaluate(model, val_part).mae, false};
    Rng order_rng(mix_seed(config.seed, 1)), drop_rng(mix_seed(config.seed, 2));
    Adam adam;
    std::vector<std::size_t> order(train_part.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const FragmentGraph*> batch;
    int since_best = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        try {
            for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
                batch.clear();
                for (std::size_t i = s; i < std::min(order.size(), s + config.batch_size); ++i)
                    batch.push_back(train_part[order[i]]);
                loss_and_grad(model, batch, config.weight_decay, &drop_rng);
                adam.step(model.params(), config.learning_rate);
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonFinite) throw;
            res.diverged = true;
            break;
        }
        const auto tm = evaluate(model, train_part);
        const double train_loss = tm.rmse * tm.rmse + config.weight_decay * model.params().squared_norm();
        const double val_mae = evaluate(model, val_part).mae;
        if (!std::isfinite(train_loss) || !std::isfinite(val_mae)) {
            res.diverged = true;
            break;
        }
        res.history.push_back({epoch, train_loss, val_mae});
        if (val_mae < res.best_val_mae) {
            res.best_val_mae = val_mae;
            res.best_epoch = epoch;
            res.model = model;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    return res;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,val_mae\n";
    for (const auto& h : history) out << h.epoch << ',' << h.train_loss << ',' << h.val_mae << '\n';
    return out.str();
}

json checkpoint(const Model& model) {
    json tensors = json::array();
    for (const auto& t : model.params().tensors()) {
        std::vector<double> data(t.value.data(), t.value.data() + t.value.size());
        tensors.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"data", data}});
    }
    return {{"schema", kCheckpointSchema}, {"config", to_json(model.config())}, {"tensors", tensors}};
}

Model model_from_checkpoint(const json& j) {
    if (j.value("schema", "") != kCheckpointSchema)
        throw Error(ErrorKind::SchemaMismatch, "expected " + std::string(kCheckpointSchema));
    Model model(config_from_json(j.at("config")));
    auto& ts = model.params().tensors();
    const auto& saved = j.at("tensors");
    if (saved.size() != ts.size()) throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor count");
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const auto& s = saved[k];
        if (s.at("name").get<std::string>() != ts[k].name || s.at("rows").get<Eigen::Index>() != ts[k].value.rows() ||
            s.at("cols").get<Eigen::Index>() != ts[k].value.cols())
            throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor " + ts[k].name);
        const auto data = s.at("data").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(data.size()) != ts[k].value.size())
            throw Error(ErrorKind::ShapeMismatch, "checkpoint data of " + ts[k].name);
        ts[k].value = Eigen::Map<const MatrixXd>(data.data(), ts[k].value.rows(), ts[k].value.cols());
    }
    return model;
}

}  // namespace crush::learn
