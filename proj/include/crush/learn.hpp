/**
 * @file learn.hpp
 * @brief Dense and message-passing regressors of the characteristic strength,
 *        with hand-written reverse-mode gradients, Adam and early stopping.
 *
 * The hybrid model predicts g(x, G) + MLP(x): a GIN-style graph network over
 * the fragment graph plus a dense network over the graph vector x.
 */
#pragma once

#include "crush/graphset.hpp"
#include "crush/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crush::learn {

using graphset::FragmentGraph;

enum class Arch { Mlp, Gnn, Hybrid };
enum class Readout { Mean, Sum, Max };
enum class Activation { Relu, Linear };

std::string_view to_string(Arch a);
std::string_view to_string(Readout r);
std::string_view to_string(Activation a);
Arch parse_arch(std::string_view text);
Readout parse_readout(std::string_view text);
Activation parse_activation(std::string_view text);

struct ModelConfig {
    Arch arch = Arch::Hybrid;
    int hidden = 128;
    int n_layers = 2;
    double dropout = 0.1;
    double eps = 1e-5;  ///< GIN self weight is 1 + eps
    Readout readout = Readout::Mean;
    Activation activation = Activation::Relu;
    double learning_rate = 1e-3;
    int batch_size = 128;
    double weight_decay = 1e-5;  ///< lambda of the squared-parameter penalty
    bool use_pmd = true;         ///< false: no MLP branch, no PMD columns anywhere
    bool use_nef = true;         ///< false: nodes carry only their distance features, no edge features
    int max_epochs = 1000;
    int patience = 50;
    std::uint64_t seed = 0;

    /// Throws Config.
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

struct Tensor {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
};

class ParamStore {
public:
    Tensor& add(const std::string& name, int rows, int cols);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }

    void zero_grad();
    double squared_norm() const;
    std::size_t size() const;  ///< total scalar count

private:
    std::vector<Tensor> tensors_;
};

/// Gradients of one prediction with respect to the model inputs.
struct InputGrads {
    Eigen::VectorXd graph;  ///< 43
    Eigen::MatrixXd nodes;  ///< n x 19
    Eigen::MatrixXd edges;  ///< m x 9
};

class Model {
public:
    /// Parameters drawn from `config.seed` (Glorot uniform weights, zero biases).
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    bool has_mlp() const;
    bool has_gnn() const;

    /// Evaluation-mode prediction (no dropout), MPa.
    double predict(const FragmentGraph& g) const;
    /// Branch outputs in evaluation mode; 0 for an absent branch.
    double mlp_forward(const FragmentGraph& g) const;
    double gnn_forward(const FragmentGraph& g) const;

    /// Prediction; adds seed * d(prediction)/d(param) to every gradient slot.
    /// Dropout is active when `dropout` is given. Fills `inputs` if not null.
    double backward(const FragmentGraph& g, double seed, Rng* dropout, InputGrads* inputs = nullptr);

private:
    struct Cache;
    double run(const FragmentGraph& g, Rng* dropout, Cache* cache, int branches) const;
    void check_shapes(const FragmentGraph& g) const;

    ModelConfig config_;
    ParamStore params_;
};

struct LossValue {
    double loss = 0.0;  ///< mse + lambda * |params|^2
    double mse = 0.0;
};

/// Mean squared error of the batch plus lambda times the squared parameter
/// norm; gradients are written (not accumulated) into the store. Throws
/// NonFinite when the loss is not finite, InsufficientData for an empty batch.
LossValue loss_and_grad(Model& model, std::span<const FragmentGraph* const> batch, double lambda,
                        Rng* dropout = nullptr);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
};

Metrics metrics(std::span<const double> predictions, std::span<const double> labels);
Metrics evaluate(const Model& model, std::span<const FragmentGraph* const> part);

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    int t = 0;
    std::vector<Eigen::MatrixXd> m, v;

    void step(ParamStore& params, double lr);
};

struct HistoryRow {
    int epoch = 0;
    double train_loss = 0.0;  ///< evaluation-mode loss on the training part after the epoch
    double val_mae = 0.0;
};

struct TrainResult {
    Model model;  ///< best-validation parameters
    std::vector<HistoryRow> history;
    int best_epoch = 0;
    double best_val_mae = 0.0;
    bool diverged = false;  ///< a non-finite loss stopped training
};

/// Adam on mini-batches, early stopping on validation MAE. Deterministic per
/// config.seed.
TrainResult train(std::span<const FragmentGraph* const> train_part, std::span<const FragmentGraph* const> val_part,
                  const ModelConfig& config);

std::string history_csv(const std::vector<HistoryRow>& history);

constexpr const char* kCheckpointSchema = "crush.checkpoint/1";

nlohmann::json checkpoint(const Model& model);
Model model_from_checkpoint(const nlohmann::json& j);

}  // namespace crush::learn
