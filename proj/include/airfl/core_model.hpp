#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "airfl/rng.hpp"

namespace airfl {

/// Labelled samples in row-major layout. Classification tasks use `labels`;
/// the quadratic (least-squares) test mode uses `targets`.
struct Dataset {
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> inputs;       // size() == num_samples() * dim
    std::vector<int> labels;
    std::vector<double> targets;

    std::size_t num_samples() const noexcept { return dim == 0 ? 0 : inputs.size() / dim; }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * dim, dim}; }
};

/// Indices into a Dataset owned by one device.
using Shard = std::vector<std::size_t>;

enum class Architecture {
    softmax_regression,
    one_hidden_layer,
    quadratic,
};

struct Model {
    Architecture arch = Architecture::softmax_regression;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t hidden = 0;
    std::vector<double> params;

    std::size_t size() const noexcept { return params.size(); }
};

std::size_t parameter_count(Architecture arch, std::size_t input_dim,
                            std::size_t num_classes, std::size_t hidden);

/// All-zero parameters; the hidden-layer net gets small random first-layer
/// weights from `rng` (zeros would leave it stuck at a saddle).
Model make_model(Architecture arch, std::size_t input_dim, std::size_t num_classes,
                 std::size_t hidden, Rng& rng);

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);

/// Mean sample loss over `shard`: cross-entropy for classifiers, 1/2 (w.x - y)^2
/// in quadratic mode.
double local_loss(const Model& model, const Dataset& data, std::span<const std::size_t> shard);

/// Exact average gradient over every sample in `shard`.
std::vector<double> full_gradient(const Model& model, const Dataset& data,
                                  std::span<const std::size_t> shard);

/// Average gradient over a mini-batch drawn uniformly without replacement.
/// With batch_size == shard.size() this is the deterministic full-batch gradient
/// and `rng` is left untouched.
std::vector<double> local_gradient(const Model& model, const Dataset& data,
                                   std::span<const std::size_t> shard,
                                   std::size_t batch_size, Rng& rng);

/// Per-sample gradient, used by variance estimators.
std::vector<double> sample_gradient(const Model& model, const Dataset& data, std::size_t index);

/// w <- w - lr * g, returned as a new model.
Model global_update(const Model& model, std::span<const double> aggregated, double learning_rate);

/// Predictive distribution over classes for one sample (classifiers only).
std::vector<double> predict_proba(const Model& model, std::span<const double> x);

/// Shannon entropy in nats. Probabilities are clamped at 1e-12 before the log;
/// throws if they do not sum to one within 1e-9.
double entropy(std::span<const double> probs);

/// Mean predictive entropy of the model over the shard.
double data_importance(const Model& model, const Dataset& data, std::span<const std::size_t> shard);

double accuracy(const Model& model, const Dataset& data, std::span<const std::size_t> indices);

struct BlobSpec {
    std::size_t classes = 10;
    std::size_t dim = 10;
    double spread = 1.0;
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
};

/// Gaussian blobs: class centres ~ N(0, I), samples = centre + spread * N(0, I).
/// Labels are assigned round-robin so every class has the same count (+-1).
Dataset make_blobs(const BlobSpec& spec);

/// IDX (MNIST-format) reader. Images (magic 0x00000803) are scaled to [0, 1]
/// and flattened; labels use magic 0x00000801.
Dataset read_idx(const std::string& images_path, const std::string& labels_path);

} // namespace airfl
