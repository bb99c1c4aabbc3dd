#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hinf/dataset.hpp"
#include "hinf/linalg.hpp"
#include "hinf/loss.hpp"
#include "hinf/tape.hpp"

namespace hinf {

// Structured architecture: shared ReLU trunk -> linear "parameter layer"
// emitting theta(x) -> model layer applying the structural loss. With a
// head_partition each parameter gets its own sub-trunk over its declared
// input subset (generalized additive wiring); links from other inputs simply
// do not exist, so perturbing them cannot move that parameter.

struct NetConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden = {80, 40};  // defaults mirror the reference setup
    std::size_t dtheta = 1;

    // Smooth clamp of parameter-layer outputs to [-bound, bound] via
    // bound * tanh(z / bound); keeps the learned class uniformly bounded
    // without gradient kinks. Non-finite bound disables the clamp.
    double bound = 10.0;

    std::uint64_t seed = 0;

    // Optional: parameter index -> sorted input indices. Must cover every
    // parameter when present.
    std::map<std::size_t, std::vector<std::size_t>> head_partition;

    // Parameter coordinates reported through softplus so they stay positive
    // (the Tobit scale trains this way while the loss sees theta2 itself).
    std::vector<std::size_t> positive_params;

    void validate() const;
};

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t patience = 20;       // early-stop window on validation loss
    double val_fraction = 0.15;      // in [0,1); 0 disables early stopping
    std::uint64_t shuffle_seed = 1;
};

struct TrainTrace {
    std::vector<double> train_loss;  // per-epoch mean over batches
    std::vector<double> val_loss;    // empty when val_fraction == 0
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

class StructuredNet {
public:
    StructuredNet() = default;

    /// Fresh net with He-style scaled-uniform weights from cfg.seed.
    explicit StructuredNet(NetConfig cfg);

    const NetConfig& config() const { return cfg_; }

    /// theta(x); x must have input_dim finite entries.
    Vec theta_forward(cspan x) const;

    /// Gradient of sum_k dl_dtheta[k] * theta_k(x) with respect to every
    /// weight, via the blocked backward pass. Returns the flat weight layout.
    std::vector<double> backprop_weight_gradient(cspan x, cspan dl_dtheta) const;

    /// Same, accumulating (+=) into a caller-owned flat gradient buffer;
    /// the allocation-free path used by the training loop.
    void backprop_accumulate(cspan x, cspan dl_dtheta, mspan grad_out) const;

    /// Reference path: same quantity via the scalar reverse-mode tape.
    /// The blocked pass is equivalence-tested against this.
    std::vector<double> tape_weight_gradient(cspan x, cspan dl_dtheta) const;

    std::size_t param_count() const;
    std::vector<double> flat_params() const;
    void set_flat_params(cspan p);

    // One trunk per head group. Without a partition there is a single group
    // covering all inputs and parameters.
    struct Group {
        std::vector<std::size_t> inputs;   // indices into x
        std::vector<std::size_t> params;   // indices into theta
        std::vector<Mat> w;                // hidden layers then parameter head
        std::vector<Vec> b;
    };
    std::vector<Group>& groups() { return groups_; }
    const std::vector<Group>& groups() const { return groups_; }

private:
    friend struct NetWorkspace;
    NetConfig cfg_;
    std::vector<Group> groups_;
    std::vector<bool> positive_;  // per theta coordinate

    double transform(double z, std::size_t k) const;
    double transform_deriv(double z, std::size_t k) const;
};

/// Width suggestion from the asymptotic sizing H ~ n^{d_C / 2(p + d_C)} log^2 n.
/// Guidance only; never applied automatically.
std::size_t suggest_width(std::size_t n, std::size_t d_c, std::size_t smoothness);

/// Minimize the empirical structural loss by minibatch Adam with optional
/// early stopping on a validation split. Deterministic given seeds.
/// Throws Error("NonFiniteLoss") with epoch/batch if the loss diverges and
/// Error("DimMismatch") when data dims disagree with the loss.
StructuredNet train(const StructuredNet& net, const Dataset& data, const LossModel& loss,
                    const TrainConfig& cfg, TrainTrace* trace = nullptr);

// Model file: magic "HINF", u32 format version, JSON header (config, dims,
// training fingerprint), little-endian f64 weight block, trailing CRC32.
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_net(const StructuredNet& net, const std::string& path,
              const std::string& fingerprint_json = "null");
StructuredNet load_net(const std::string& path);

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace hinf
