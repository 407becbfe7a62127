#include "airfl/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "airfl/error.hpp"

namespace airfl {

namespace {

constexpr double prob_floor = 1e-12;

void check_shard(const Dataset& data, std::span<const std::size_t> shard)
{
    if (shard.empty()) fail(ErrorKind::invalid_argument, "empty dataset");
    const auto n = data.num_samples();
    for (auto i : shard) {
        if (i >= n) fail(ErrorKind::invalid_argument, "shard index out of range");
    }
}

void check_model(const Model& model, const Dataset& data)
{
    if (model.input_dim != data.dim) {
        fail(ErrorKind::invalid_argument, "model input dimension does not match dataset");
    }
    if (model.arch == Architecture::quadratic) {
        if (data.targets.size() != data.num_samples()) {
            fail(ErrorKind::invalid_argument, "quadratic mode needs real-valued targets");
        }
    } else if (data.labels.size() != data.num_samples()) {
        fail(ErrorKind::invalid_argument, "classification needs one label per sample");
    }
}

void softmax_inplace(std::vector<double>& z)
{
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        total += v;
    }
    for (auto& v : z) v /= total;
}

// Hidden activations of the one-hidden-layer net.
std::vector<double> hidden_forward(const Model& m, std::span<const double> x)
{
    const auto d = m.input_dim;
    const auto h = m.hidden;
    const double* w1 = m.params.data();
    const double* b1 = w1 + h * d;
    std::vector<double> a(h);
    for (std::size_t j = 0; j < h; ++j) {
        double s = b1[j];
        for (std::size_t i = 0; i < d; ++i) s += w1[j * d + i] * x[i];
        a[j] = std::tanh(s);
    }
    return a;
}

std::vector<double> logits(const Model& m, std::span<const double> x)
{
    const auto c = m.num_classes;
    std::vector<double> z(c);
    if (m.arch == Architecture::softmax_regression) {
        const auto d = m.input_dim;
        const double* w = m.params.data();
        const double* b = w + c * d;
        for (std::size_t k = 0; k < c; ++k) {
            double s = b[k];
            for (std::size_t i = 0; i < d; ++i) s += w[k * d + i] * x[i];
            z[k] = s;
        }
        return z;
    }
    const auto d = m.input_dim;
    const auto h = m.hidden;
    const auto a = hidden_forward(m, x);
    const double* w2 = m.params.data() + h * d + h;
    const double* b2 = w2 + c * h;
    for (std::size_t k = 0; k < c; ++k) {
        double s = b2[k];
        for (std::size_t j = 0; j < h; ++j) s += w2[k * h + j] * a[j];
        z[k] = s;
    }
    return z;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// grad += scale * (per-sample gradient at data[index]).
void accumulate_gradient(const Model& m, const Dataset& data, std::size_t index,
                         double scale, std::vector<double>& grad)
{
    const auto x = data.row(index);
    const auto d = m.input_dim;

    if (m.arch == Architecture::quadratic) {
        const double r = dot(m.params, x) - data.targets[index];
        for (std::size_t i = 0; i < d; ++i) grad[i] += scale * r * x[i];
        return;
    }

    const auto c = m.num_classes;
    const auto y = static_cast<std::size_t>(data.labels[index]);
    auto p = logits(m, x);
    softmax_inplace(p);
    p[y] -= 1.0;  // dL/dz

    if (m.arch == Architecture::softmax_regression) {
        double* gw = grad.data();
        double* gb = gw + c * d;
        for (std::size_t k = 0; k < c; ++k) {
            const double e = scale * p[k];
            for (std::size_t i = 0; i < d; ++i) gw[k * d + i] += e * x[i];
            gb[k] += e;
        }
        return;
    }

    const auto h = m.hidden;
    const auto a = hidden_forward(m, x);
    const double* w2 = m.params.data() + h * d + h;
    double* gw1 = grad.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;

    std::vector<double> back(h, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        const double e = p[k];
        for (std::size_t j = 0; j < h; ++j) {
            gw2[k * h + j] += scale * e * a[j];
            back[j] += e * w2[k * h + j];
        }
        gb2[k] += scale * e;
    }
    for (std::size_t j = 0; j < h; ++j) {
        const double delta = scale * back[j] * (1.0 - a[j] * a[j]);
        for (std::size_t i = 0; i < d; ++i) gw1[j * d + i] += delta * x[i];
        gb1[j] += delta;
    }
}

double sample_loss(const Model& m, const Dataset& data, std::size_t index)
{
    const auto x = data.row(index);
    if (m.arch == Architecture::quadratic) {
        const double r = dot(m.params, x) - data.targets[index];
        return 0.5 * r * r;
    }
    auto p = logits(m, x);
    softmax_inplace(p);
    return -std::log(std::max(p[static_cast<std::size_t>(data.labels[index])], prob_floor));
}

} // namespace

std::size_t parameter_count(Architecture arch, std::size_t input_dim,
                            std::size_t num_classes, std::size_t hidden)
{
    switch (arch) {
    case Architecture::softmax_regression:
        return input_dim * num_classes + num_classes;
    case Architecture::one_hidden_layer:
        return hidden * input_dim + hidden + num_classes * hidden + num_classes;
    case Architecture::quadratic:
        return input_dim;
    }
    return 0;
}

Model make_model(Architecture arch, std::size_t input_dim, std::size_t num_classes,
                 std::size_t hidden, Rng& rng)
{
    require(input_dim > 0, ErrorKind::invalid_argument, "input dimension must be positive");
    if (arch != Architecture::quadratic) {
        require(num_classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
    }
    if (arch == Architecture::one_hidden_layer) {
        require(hidden > 0, ErrorKind::invalid_argument, "hidden width must be positive");
    }
    Model m;
    m.arch = arch;
    m.input_dim = input_dim;
    m.num_classes = arch == Architecture::quadratic ? 0 : num_classes;
    m.hidden = arch == Architecture::one_hidden_layer ? hidden : 0;
    m.params.assign(parameter_count(arch, input_dim, m.num_classes, m.hidden), 0.0);

    if (arch == Architecture::one_hidden_layer) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
        const auto first = hidden * input_dim;
        for (std::size_t i = 0; i < first; ++i) m.params[i] = normal(rng);
        std::normal_distribution<double> out(0.0, 1.0 / std::sqrt(static_cast<double>(hidden)));
        const auto w2 = first + hidden;
        for (std::size_t i = 0; i < num_classes * hidden; ++i) m.params[w2 + i] = out(rng);
    }
    return m;
}

Architecture parse_architecture(const std::string& name)
{
    if (name == "softmax" || name == "softmax_regression") return Architecture::softmax_regression;
    if (name == "mlp" || name == "one_hidden_layer") return Architecture::one_hidden_layer;
    if (name == "quadratic") return Architecture::quadratic;
    fail(ErrorKind::invalid_argument, "unknown model architecture: " + name);
}

std::string to_string(Architecture arch)
{
    switch (arch) {
    case Architecture::softmax_regression: return "softmax";
    case Architecture::one_hidden_layer: return "mlp";
    case Architecture::quadratic: return "quadratic";
    }
    return "?";
}

double local_loss(const Model& model, const Dataset& data, std::span<const std::size_t> shard)
{
    check_shard(data, shard);
    check_model(model, data);
    double total = 0.0;
    for (auto i : shard) total += sample_loss(model, data, i);
    return total / static_cast<double>(shard.size());
}

std::vector<double> full_gradient(const Model& model, const Dataset& data,
                                  std::span<const std::size_t> shard)
{
    check_shard(data, shard);
    check_model(model, data);
    std::vector<double> grad(model.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(shard.size());
    for (auto i : shard) accumulate_gradient(model, data, i, scale, grad);
    return grad;
}

std::vector<double> local_gradient(const Model& model, const Dataset& data,
                                   std::span<const std::size_t> shard,
                                   std::size_t batch_size, Rng& rng)
{
    check_shard(data, shard);
    if (batch_size == 0) fail(ErrorKind::invalid_argument, "batch size must be positive");
    if (batch_size > shard.size()) fail(ErrorKind::invalid_argument, "batch exceeds shard");
    if (batch_size == shard.size()) return full_gradient(model, data, shard);

    check_model(model, data);
    // Partial Fisher-Yates: the first batch_size slots become the sample.
    std::vector<std::size_t> pool(shard.begin(), shard.end());
    for (std::size_t i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<double> grad(model.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) accumulate_gradient(model, data, pool[i], scale, grad);
    return grad;
}

std::vector<double> sample_gradient(const Model& model, const Dataset& data, std::size_t index)
{
    check_model(model, data);
    require(index < data.num_samples(), ErrorKind::invalid_argument, "sample index out of range");
    std::vector<double> grad(model.size(), 0.0);
    accumulate_gradient(model, data, index, 1.0, grad);
    return grad;
}

Model global_update(const Model& model, std::span<const double> aggregated, double learning_rate)
{
    if (aggregated.size() != model.size()) {
        fail(ErrorKind::invalid_argument, "gradient dimension does not match model");
    }
    require(learning_rate > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    Model next = model;
    for (std::size_t i = 0; i < next.params.size(); ++i) {
        next.params[i] -= learning_rate * aggregated[i];
    }
    return next;
}

std::vector<double> predict_proba(const Model& model, std::span<const double> x)
{
    if (model.arch == Architecture::quadratic) {
        fail(ErrorKind::invalid_argument, "quadratic model does not emit probabilities");
    }
    auto p = logits(model, x);
    softmax_inplace(p);
    return p;
}

double entropy(std::span<const double> probs)
{
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        fail(ErrorKind::domain, "probability vector does not sum to one");
    }
    double h = 0.0;
    for (double p : probs) {
        if (p < 0.0) fail(ErrorKind::domain, "negative probability");
        const double q = std::clamp(p, prob_floor, 1.0 - prob_floor);
        h -= q * std::log(q);
    }
    return std::max(h, 0.0);
}

double data_importance(const Model& model, const Dataset& data, std::span<const std::size_t> shard)
{
    check_shard(data, shard);
    check_model(model, data);
    double total = 0.0;
    for (auto i : shard) total += entropy(predict_proba(model, data.row(i)));
    return total / static_cast<double>(shard.size());
}

double accuracy(const Model& model, const Dataset& data, std::span<const std::size_t> indices)
{
    check_shard(data, indices);
    check_model(model, data);
    if (model.arch == Architecture::quadratic) {
        fail(ErrorKind::invalid_argument, "accuracy is undefined for the quadratic model");
    }
    std::size_t hits = 0;
    for (auto i : indices) {
        const auto z = logits(model, data.row(i));
        const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
        if (best == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

Dataset make_blobs(const BlobSpec& spec)
{
    require(spec.classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
    require(spec.dim >= 1, ErrorKind::invalid_argument, "dimension must be positive");
    require(spec.spread >= 0.0, ErrorKind::invalid_argument, "spread must be non-negative");
    Rng rng = make_stream(spec.seed, Stream::data);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> centres(spec.classes * spec.dim);
    for (auto& c : centres) c = normal(rng);

    Dataset data;
    data.dim = spec.dim;
    data.num_classes = spec.classes;
    data.inputs.resize(spec.samples * spec.dim);
    data.labels.resize(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        const auto label = i % spec.classes;
        data.labels[i] = static_cast<int>(label);
        for (std::size_t j = 0; j < spec.dim; ++j) {
            data.inputs[i * spec.dim + j] = centres[label * spec.dim + j] + spec.spread * normal(rng);
        }
    }
    return data;
}

} // namespace airfl
