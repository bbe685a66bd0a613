#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evfqi {

/// Huber loss of a single residual.
inline double huber_loss(double pred, double target, double delta) {
    const double err = std::abs(pred - target);
    if (err <= delta) return 0.5 * err * err;
    return delta * (err - 0.5 * delta);
}

/// d huber / d pred
inline double huber_slope(double pred, double target, double delta) {
    return std::clamp(pred - target, -delta, delta);
}

/// Fully connected regressor: rectified hidden layers, one linear output.
/// Samples are stored column-wise in every batch matrix.
template <typename Scalar>
class BasicQNetwork {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    struct Layer {
        Matrix weights;  // out x in
        Vector bias;
    };

    /// Per-layer gradients, same shapes as the layers.
    struct Gradients {
        std::vector<Matrix> weights;
        std::vector<Vector> bias;
    };

    BasicQNetwork() = default;

    /// Zero-initialized network with the given widths: input, hidden..., 1.
    explicit BasicQNetwork(int input_width, const std::vector<int>& hidden = {128, 64}) {
        if (input_width < 1) throw std::invalid_argument("input width must be >= 1");
        int prev = input_width;
        std::vector<int> widths = hidden;
        widths.push_back(1);
        for (int w : widths) {
            if (w < 1) throw std::invalid_argument("layer width must be >= 1");
            layers_.push_back({Matrix::Zero(w, prev), Vector::Zero(w)});
            prev = w;
        }
    }

    /// Uniform fan-in initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    static BasicQNetwork random(int input_width, const std::vector<int>& hidden,
                                std::uint64_t seed) {
        BasicQNetwork net(input_width, hidden);
        std::mt19937_64 rng(seed);
        for (auto& layer : net.layers_) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
                layer.weights.data()[i] = static_cast<Scalar>(dist(rng));
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
                layer.bias[i] = static_cast<Scalar>(dist(rng));
        }
        return net;
    }

    int input_width() const {
        return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
    }
    std::vector<int> widths() const {
        std::vector<int> w{input_width()};
        for (const auto& l : layers_) w.push_back(static_cast<int>(l.weights.rows()));
        return w;
    }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Scalar forward(std::span<const Scalar> x) const {
        if (static_cast<int>(x.size()) != input_width())
            throw std::invalid_argument("input width " + std::to_string(x.size()) +
                                        " does not match network width " +
                                        std::to_string(input_width()));
        Matrix col = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
        return forward_batch(col)(0);
    }

    /// One output per column of `inputs`.
    Vector forward_batch(const Matrix& inputs) const {
        check_rows(inputs.rows());
        Matrix h = inputs;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            Matrix z = layers_[k].weights * h;
            z.colwise() += layers_[k].bias;
            if (k + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
            h = std::move(z);
        }
        return h.row(0).transpose();
    }

    /// Evaluates inputs [prefix ; suffixes.col(i)] for every column i without
    /// materializing the repeated prefix.
    Vector forward_shared_prefix(std::span<const Scalar> prefix, const Matrix& suffixes) const {
        const auto p = static_cast<Eigen::Index>(prefix.size());
        check_rows(p + suffixes.rows());
        const auto& first = layers_.front();
        Vector shared = first.weights.leftCols(p) *
                            Eigen::Map<const Vector>(prefix.data(), p) +
                        first.bias;
        Matrix h = first.weights.rightCols(suffixes.rows()) * suffixes;
        h.colwise() += shared;
        if (layers_.size() > 1) h = h.cwiseMax(Scalar(0));
        for (std::size_t k = 1; k < layers_.size(); ++k) {
            Matrix z = layers_[k].weights * h;
            z.colwise() += layers_[k].bias;
            if (k + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
            h = std::move(z);
        }
        return h.row(0).transpose();
    }

    /// Mean Huber loss over the columns of `inputs`; fills `grad` when given.
    double loss(const Matrix& inputs, const Vector& targets, double delta,
                Gradients* grad = nullptr) const {
        check_rows(inputs.rows());
        if (targets.size() != inputs.cols())
            throw std::invalid_argument("target count does not match input count");
        const auto n = inputs.cols();
        if (n == 0) return 0.0;
        // forward with cached activations
        std::vector<Matrix> acts;
        acts.reserve(layers_.size() + 1);
        acts.push_back(inputs);
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            Matrix z = layers_[k].weights * acts.back();
            z.colwise() += layers_[k].bias;
            if (k + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
            acts.push_back(std::move(z));
        }
        const auto& pred = acts.back();
        double total = 0.0;
        Matrix delta_out(1, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = static_cast<double>(pred(0, i));
            const double y = static_cast<double>(targets(i));
            total += huber_loss(p, y, delta);
            delta_out(0, i) = static_cast<Scalar>(huber_slope(p, y, delta) / static_cast<double>(n));
        }
        if (grad != nullptr) {
            grad->weights.resize(layers_.size());
            grad->bias.resize(layers_.size());
            Matrix d = std::move(delta_out);
            for (std::size_t k = layers_.size(); k-- > 0;) {
                grad->weights[k] = d * acts[k].transpose();
                grad->bias[k] = d.rowwise().sum();
                if (k == 0) break;
                Matrix back = layers_[k].weights.transpose() * d;
                // rectifier derivative from the stored (post-activation) values
                d = back.cwiseProduct((acts[k].array() > Scalar(0)).matrix().template cast<Scalar>());
            }
        }
        return total / static_cast<double>(n);
    }

    nlohmann::json to_json() const {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : layers_) {
            std::vector<double> w;
            w.reserve(static_cast<std::size_t>(l.weights.size()));
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
                    w.push_back(static_cast<double>(l.weights(r, c)));
            std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
            layers.push_back({{"weights", w}, {"bias", b}});
        }
        return {{"widths", widths()}, {"layers", layers}};
    }

    static BasicQNetwork from_json(const nlohmann::json& j) {
        const auto widths = j.at("widths").get<std::vector<int>>();
        if (widths.size() < 2 || widths.back() != 1)
            throw std::invalid_argument("network widths must end with a single output");
        BasicQNetwork net(widths.front(),
                          std::vector<int>(widths.begin() + 1, widths.end() - 1));
        const auto& layers = j.at("layers");
        if (layers.size() != net.layers_.size())
            throw std::invalid_argument("layer count does not match widths");
        for (std::size_t k = 0; k < net.layers_.size(); ++k) {
            auto& l = net.layers_[k];
            const auto w = layers[k].at("weights").get<std::vector<double>>();
            const auto b = layers[k].at("bias").get<std::vector<double>>();
            if (w.size() != static_cast<std::size_t>(l.weights.size()) ||
                b.size() != static_cast<std::size_t>(l.bias.size()))
                throw std::invalid_argument("layer " + std::to_string(k) + " has wrong size");
            std::size_t i = 0;
            for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
                    l.weights(r, c) = static_cast<Scalar>(w[i++]);
            for (std::size_t r = 0; r < b.size(); ++r)
                l.bias[static_cast<Eigen::Index>(r)] = static_cast<Scalar>(b[r]);
        }
        return net;
    }

private:
    void check_rows(Eigen::Index rows) const {
        if (layers_.empty()) throw std::logic_error("network has no layers");
        if (rows != input_width())
            throw std::invalid_argument("input width " + std::to_string(rows) +
                                        " does not match network width " +
                                        std::to_string(input_width()));
    }

    std::vector<Layer> layers_;
};

using QNetwork = BasicQNetwork<float>;

struct TrainConfig {
    int epochs = 8;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double huber_delta = 1.0;
    std::uint64_t seed = 0;
};

struct TrainStats {
    int epochs = 0;
    double final_loss = 0.0;  // mean batch loss of the last epoch
};

/// Mini-batch Adam on mean Huber loss. Shuffle order and batches are fixed by
/// config.seed. Throws std::runtime_error if the loss becomes non-finite.
template <typename Scalar>
TrainStats train_network(BasicQNetwork<Scalar>& net,
                         const typename BasicQNetwork<Scalar>::Matrix& inputs,
                         const typename BasicQNetwork<Scalar>::Vector& targets,
                         const TrainConfig& config) {
    using Net = BasicQNetwork<Scalar>;
    using Matrix = typename Net::Matrix;
    using Vector = typename Net::Vector;
    const auto n = inputs.cols();
    if (n == 0) throw std::invalid_argument("cannot train on an empty dataset");
    if (targets.size() != n) throw std::invalid_argument("target count does not match inputs");
    if (config.epochs < 1 || config.batch_size < 1 || !(config.learning_rate > 0.0))
        throw std::invalid_argument("invalid training configuration");

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto& layers = net.layers();
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;
    for (const auto& l : layers) {
        m_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        v_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        m_b.push_back(Vector::Zero(l.bias.size()));
        v_b.push_back(Vector::Zero(l.bias.size()));
    }

    std::mt19937_64 rng(config.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const auto batch = std::min<Eigen::Index>(config.batch_size, n);
    Matrix xb(inputs.rows(), batch);
    Vector yb(batch);
    typename Net::Gradients grad;
    long long step = 0;
    TrainStats stats;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n; start += batch) {
            const auto size = std::min<Eigen::Index>(batch, n - start);
            if (xb.cols() != size) {
                xb.resize(inputs.rows(), size);
                yb.resize(size);
            }
            for (Eigen::Index i = 0; i < size; ++i) {
                const auto src = order[static_cast<std::size_t>(start + i)];
                xb.col(i) = inputs.col(src);
                yb(i) = targets(src);
            }
            const double batch_loss = net.loss(xb, yb, config.huber_delta, &grad);
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training loss became non-finite at epoch " +
                                         std::to_string(epoch));
            epoch_loss += batch_loss * static_cast<double>(size);
            ++step;
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const auto lr = static_cast<Scalar>(config.learning_rate * std::sqrt(c2) / c1);
            for (std::size_t k = 0; k < layers.size(); ++k) {
                m_w[k] = Scalar(beta1) * m_w[k] + Scalar(1 - beta1) * grad.weights[k];
                v_w[k] = Scalar(beta2) * v_w[k] +
                         Scalar(1 - beta2) * grad.weights[k].cwiseProduct(grad.weights[k]);
                layers[k].weights.array() -=
                    lr * m_w[k].array() / (v_w[k].array().sqrt() + Scalar(eps));
                m_b[k] = Scalar(beta1) * m_b[k] + Scalar(1 - beta1) * grad.bias[k];
                v_b[k] = Scalar(beta2) * v_b[k] +
                         Scalar(1 - beta2) * grad.bias[k].cwiseProduct(grad.bias[k]);
                layers[k].bias.array() -=
                    lr * m_b[k].array() / (v_b[k].array().sqrt() + Scalar(eps));
            }
        }
        stats.epochs = epoch + 1;
        stats.final_loss = epoch_loss / static_cast<double>(n);
    }
    return stats;
}

}  // namespace evfqi
