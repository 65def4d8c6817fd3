#ifndef FCNAD_AUTOENCODER_HPP
#define FCNAD_AUTOENCODER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcnad/error.hpp"
#include "fcnad/netcore.hpp"
#include "fcnad/random.hpp"

namespace fcnad {

struct AutoencoderHyper {
    std::size_t hidden = 500;
    double sparsity_target = 0.05;  ///< rho
    double sparsity_weight = 3.0;   ///< beta_s
    double weight_decay = 3e-3;     ///< lambda
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::size_t batch_size = 256;
    std::size_t epochs = 50;
    double holdout_fraction = 0.1;
    bool tied = false;
    std::uint64_t seed = 1;
};

/// Single-hidden-layer sparse autoencoder; encoder T = sigmoid(W x + b).
struct SparseAutoencoder {
    Eigen::MatrixXd encoder_weights;  ///< h x m
    Eigen::VectorXd encoder_bias;     ///< h
    Eigen::MatrixXd decoder_weights;  ///< m x h (ignored when tied: W' = W^T)
    Eigen::VectorXd decoder_bias;     ///< m
    double sparsity_target = 0.05;
    double sparsity_weight = 3.0;
    double weight_decay = 3e-3;
    bool tied = false;

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(encoder_weights.cols()); }
    std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(encoder_weights.rows()); }

    Eigen::MatrixXd effective_decoder() const {
        return tied ? Eigen::MatrixXd(encoder_weights.transpose()) : decoder_weights;
    }

    bool finite() const {
        return encoder_weights.allFinite() && encoder_bias.allFinite() && decoder_weights.allFinite() &&
               decoder_bias.allFinite();
    }
};

inline SparseAutoencoder make_autoencoder(std::size_t input_dim, const AutoencoderHyper& hyper) {
    if (hyper.hidden == 0 || input_dim == 0) throw Error(ErrorCode::Config, "autoencoder dimensions must be >= 1");
    Rng rng(hyper.seed);
    const double r = std::sqrt(6.0 / static_cast<double>(input_dim + hyper.hidden));
    const auto h = static_cast<Eigen::Index>(hyper.hidden);
    const auto m = static_cast<Eigen::Index>(input_dim);
    SparseAutoencoder ae;
    ae.encoder_weights.resize(h, m);
    ae.decoder_weights.resize(m, h);
    for (Eigen::Index i = 0; i < ae.encoder_weights.size(); ++i) ae.encoder_weights.data()[i] = uniform(rng, -r, r);
    for (Eigen::Index i = 0; i < ae.decoder_weights.size(); ++i) ae.decoder_weights.data()[i] = uniform(rng, -r, r);
    ae.encoder_bias = Eigen::VectorXd::Zero(h);
    ae.decoder_bias = Eigen::VectorXd::Zero(m);
    ae.sparsity_target = hyper.sparsity_target;
    ae.sparsity_weight = hyper.sparsity_weight;
    ae.weight_decay = hyper.weight_decay;
    ae.tied = hyper.tied;
    if (ae.tied) ae.decoder_weights = ae.encoder_weights.transpose();
    return ae;
}

namespace detail {
inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 + (-z.array()).exp()).inverse().matrix();
}
} // namespace detail

/// Encodes each column of `batch` (m x N) into an h x N matrix.
inline Eigen::MatrixXd encode_batch(const SparseAutoencoder& ae, const Eigen::MatrixXd& batch) {
    if (static_cast<std::size_t>(batch.rows()) != ae.input_dim()) {
        throw Error(ErrorCode::Shape, "encode: vector length " + std::to_string(batch.rows()) + ", expected " +
                                          std::to_string(ae.input_dim()));
    }
    return detail::sigmoid((ae.encoder_weights * batch).colwise() + ae.encoder_bias);
}

inline Eigen::VectorXd encode(const SparseAutoencoder& ae, const Eigen::VectorXd& x) {
    return encode_batch(ae, x);
}

inline Eigen::MatrixXd reconstruct(const SparseAutoencoder& ae, const Eigen::MatrixXd& batch) {
    const Eigen::MatrixXd hidden = encode_batch(ae, batch);
    return detail::sigmoid((ae.effective_decoder() * hidden).colwise() + ae.decoder_bias);
}

/// (1/2N) sum ||x - x_hat||^2 over the columns of `batch`.
inline double reconstruction_loss(const SparseAutoencoder& ae, const Eigen::MatrixXd& batch) {
    if (batch.cols() == 0) return 0.0;
    return 0.5 * (reconstruct(ae, batch) - batch).squaredNorm() / static_cast<double>(batch.cols());
}

struct AutoencoderGradient {
    double loss = 0.0;
    Eigen::MatrixXd encoder_weights;
    Eigen::VectorXd encoder_bias;
    Eigen::MatrixXd decoder_weights;  ///< zero-sized when tied (folded into encoder_weights)
    Eigen::VectorXd decoder_bias;
    std::size_t clamped_units = 0;    ///< hidden units whose mean activation hit the KL clamp
};

inline constexpr double kKlClamp = 1e-6;

inline double kl_divergence(double rho, double rho_hat) noexcept {
    return rho * std::log(rho / rho_hat) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - rho_hat));
}

/// Loss = (1/2N) sum ||x - x_hat||^2 + (lambda/2)(||W||^2 + ||W'||^2) + beta_s sum_j KL(rho || rho_hat_j),
/// with gradients by backpropagation. `batch` holds one example per column.
inline AutoencoderGradient loss_and_grad(const SparseAutoencoder& ae, const Eigen::MatrixXd& batch) {
    if (batch.cols() == 0) throw Error(ErrorCode::Config, "loss_and_grad: empty batch");
    const double n = static_cast<double>(batch.cols());
    const Eigen::MatrixXd decoder = ae.effective_decoder();
    const Eigen::MatrixXd hidden = encode_batch(ae, batch);
    const Eigen::MatrixXd output = detail::sigmoid((decoder * hidden).colwise() + ae.decoder_bias);

    AutoencoderGradient g;
    Eigen::VectorXd rho_hat = hidden.rowwise().mean();
    for (Eigen::Index j = 0; j < rho_hat.size(); ++j) {
        if (rho_hat[j] < kKlClamp || rho_hat[j] > 1.0 - kKlClamp) {
            rho_hat[j] = std::clamp(rho_hat[j], kKlClamp, 1.0 - kKlClamp);
            ++g.clamped_units;
        }
    }
    const double rho = ae.sparsity_target;
    double kl = 0.0;
    if (ae.sparsity_weight != 0.0) {
        for (Eigen::Index j = 0; j < rho_hat.size(); ++j) kl += kl_divergence(rho, rho_hat[j]);
    }
    const double decay = ae.tied ? 2.0 * ae.encoder_weights.squaredNorm()
                                 : ae.encoder_weights.squaredNorm() + ae.decoder_weights.squaredNorm();
    const Eigen::MatrixXd diff = output - batch;
    g.loss = 0.5 * diff.squaredNorm() / n + 0.5 * ae.weight_decay * decay + ae.sparsity_weight * kl;

    const Eigen::MatrixXd delta_out = (diff.array() * output.array() * (1.0 - output.array())).matrix() / n;
    Eigen::VectorXd sparse_term = Eigen::VectorXd::Zero(rho_hat.size());
    if (ae.sparsity_weight != 0.0) {
        sparse_term = (ae.sparsity_weight / n) *
                      (-rho / rho_hat.array() + (1.0 - rho) / (1.0 - rho_hat.array())).matrix();
    }
    const Eigen::MatrixXd delta_hidden =
        (((decoder.transpose() * delta_out).colwise() + sparse_term).array() * hidden.array() *
         (1.0 - hidden.array()))
            .matrix();

    Eigen::MatrixXd grad_decoder = delta_out * hidden.transpose() + ae.weight_decay * decoder;
    g.decoder_bias = delta_out.rowwise().sum();
    g.encoder_weights = delta_hidden * batch.transpose() + ae.weight_decay * ae.encoder_weights;
    g.encoder_bias = delta_hidden.rowwise().sum();
    if (ae.tied) {
        g.encoder_weights += grad_decoder.transpose();
    } else {
        g.decoder_weights = std::move(grad_decoder);
    }
    return g;
}

struct TrainingReport {
    std::vector<double> train_loss;       ///< full objective on the training split, index 0 = initial
    std::vector<double> validation_loss;  ///< reconstruction loss on the holdout, index 0 = initial
    std::size_t best_epoch = 0;
    std::size_t clamp_events = 0;
    std::vector<std::string> warnings;
};

/// Mini-batch gradient descent with momentum over the columns of `data` (m x N).
/// Returns the parameters with the lowest holdout reconstruction loss, epoch 0 included.
inline SparseAutoencoder train_autoencoder(const Eigen::MatrixXd& data, const AutoencoderHyper& hyper,
                                           TrainingReport* report = nullptr) {
    TrainingReport local;
    TrainingReport& rep = report ? *report : local;
    const auto total = static_cast<std::size_t>(data.cols());
    if (total < 2) throw Error(ErrorCode::DegenerateData, "autoencoder training needs at least 2 vectors");
    if (!data.allFinite()) throw Error(ErrorCode::NonFinite, "autoencoder training data contains non-finite values");
    if (total < hyper.hidden) {
        rep.warnings.push_back("only " + std::to_string(total) + " training vectors for hidden size " +
                               std::to_string(hyper.hidden));
    }
    if (hyper.batch_size == 0) throw Error(ErrorCode::Config, "batch size must be >= 1");

    Rng rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = total - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

    auto holdout = static_cast<std::size_t>(std::floor(hyper.holdout_fraction * static_cast<double>(total)));
    holdout = std::min(holdout, total - 1);
    const std::size_t train_count = total - holdout;
    Eigen::MatrixXd train(data.rows(), static_cast<Eigen::Index>(train_count));
    Eigen::MatrixXd validation(data.rows(), static_cast<Eigen::Index>(holdout));
    for (std::size_t i = 0; i < train_count; ++i) train.col(static_cast<Eigen::Index>(i)) = data.col(order[i]);
    for (std::size_t i = 0; i < holdout; ++i) {
        validation.col(static_cast<Eigen::Index>(i)) = data.col(order[train_count + i]);
    }
    const Eigen::MatrixXd& monitor = holdout > 0 ? validation : train;

    SparseAutoencoder ae = make_autoencoder(static_cast<std::size_t>(data.rows()), hyper);
    SparseAutoencoder best = ae;
    double best_loss = reconstruction_loss(ae, monitor);
    rep.train_loss.push_back(loss_and_grad(ae, train).loss);
    rep.validation_loss.push_back(best_loss);

    Eigen::MatrixXd vel_w = Eigen::MatrixXd::Zero(ae.encoder_weights.rows(), ae.encoder_weights.cols());
    Eigen::VectorXd vel_b = Eigen::VectorXd::Zero(ae.encoder_bias.size());
    Eigen::MatrixXd vel_w2 = Eigen::MatrixXd::Zero(ae.decoder_weights.rows(), ae.decoder_weights.cols());
    Eigen::VectorXd vel_b2 = Eigen::VectorXd::Zero(ae.decoder_bias.size());

    std::vector<std::size_t> perm(train_count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Eigen::MatrixXd batch;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        for (std::size_t i = train_count - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
        for (std::size_t start = 0; start < train_count; start += hyper.batch_size) {
            const std::size_t count = std::min(hyper.batch_size, train_count - start);
            batch.resize(train.rows(), static_cast<Eigen::Index>(count));
            for (std::size_t c = 0; c < count; ++c) {
                batch.col(static_cast<Eigen::Index>(c)) = train.col(static_cast<Eigen::Index>(perm[start + c]));
            }
            const AutoencoderGradient g = loss_and_grad(ae, batch);
            rep.clamp_events += g.clamped_units;
            if (!std::isfinite(g.loss)) {
                throw Error(ErrorCode::NonFinite, "autoencoder loss became non-finite at epoch " +
                                                      std::to_string(epoch) + ", batch offset " +
                                                      std::to_string(start) + " (learning rate " +
                                                      std::to_string(hyper.learning_rate) + ")");
            }
            vel_w = hyper.momentum * vel_w - hyper.learning_rate * g.encoder_weights;
            vel_b = hyper.momentum * vel_b - hyper.learning_rate * g.encoder_bias;
            vel_b2 = hyper.momentum * vel_b2 - hyper.learning_rate * g.decoder_bias;
            ae.encoder_weights += vel_w;
            ae.encoder_bias += vel_b;
            ae.decoder_bias += vel_b2;
            if (ae.tied) {
                ae.decoder_weights = ae.encoder_weights.transpose();
            } else {
                vel_w2 = hyper.momentum * vel_w2 - hyper.learning_rate * g.decoder_weights;
                ae.decoder_weights += vel_w2;
            }
        }
        const double train_loss = loss_and_grad(ae, train).loss;
        const double val_loss = reconstruction_loss(ae, monitor);
        rep.train_loss.push_back(train_loss);
        rep.validation_loss.push_back(val_loss);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
            throw Error(ErrorCode::NonFinite, "autoencoder loss non-finite after epoch " + std::to_string(epoch));
        }
        if (val_loss < best_loss) {
            best_loss = val_loss;
            best = ae;
            rep.best_epoch = epoch;
        }
    }
    return best;
}

/// The encoder as a 1x1 sigmoid convolution (C_T) over an m-channel grid.
inline ConvLayerSpec as_conv_layer(const SparseAutoencoder& ae, std::string name = "CT") {
    const auto h = static_cast<std::uint32_t>(ae.hidden_dim());
    const auto m = static_cast<std::uint32_t>(ae.input_dim());
    ConvLayerSpec layer{std::move(name), m, h, 1, 1, 1, 0, 1, Activation::Sigmoid, {}, {}};
    layer.weights.resize(static_cast<std::size_t>(h) * m);
    for (std::uint32_t o = 0; o < h; ++o) {
        for (std::uint32_t i = 0; i < m; ++i) {
            layer.weights[static_cast<std::size_t>(o) * m + i] = static_cast<float>(ae.encoder_weights(o, i));
        }
    }
    layer.biases.resize(h);
    for (std::uint32_t o = 0; o < h; ++o) layer.biases[o] = static_cast<float>(ae.encoder_bias[o]);
    return layer;
}

/// Inverse of as_conv_layer for the encoder half (decoder left empty).
inline SparseAutoencoder encoder_from_conv(const ConvLayerSpec& layer) {
    if (layer.kernel_h != 1 || layer.kernel_w != 1 || layer.groups != 1) {
        throw Error(ErrorCode::Shape, layer.name + ": C_T must be an ungrouped 1x1 convolution");
    }
    SparseAutoencoder ae;
    ae.encoder_weights.resize(layer.out_channels, layer.in_channels);
    for (std::uint32_t o = 0; o < layer.out_channels; ++o) {
        for (std::uint32_t i = 0; i < layer.in_channels; ++i) {
            ae.encoder_weights(o, i) = layer.weights[static_cast<std::size_t>(o) * layer.in_channels + i];
        }
    }
    ae.encoder_bias.resize(layer.out_channels);
    for (std::uint32_t o = 0; o < layer.out_channels; ++o) ae.encoder_bias[o] = layer.biases[o];
    return ae;
}

} // namespace fcnad

#endif
