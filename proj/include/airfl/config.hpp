#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace airfl {

enum class Scheme {
    proposed,
    static_clustering,
    similarity,
    max_power,
    direct,
    mse,
};

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

/// How training data is split across devices. `synthetic` forces the blob
/// generator with an iid split even when IDX paths are configured.
enum class DataMode {
    iid,
    noniid,
    synthetic,
};

DataMode parse_data_mode(const std::string& name);
std::string to_string(DataMode mode);

struct ExperimentConfig {
    std::size_t devices = 50;
    std::size_t clusters = 5;
    std::size_t rounds = 300;
    std::size_t batch = 10;
    double lr = 0.0;            // 0 selects 1 / (100 L)
    double lipschitz = 10.0;
    double power_w = 0.2;
    double noise_dbm = -80.0;   // -inf gives noiseless receivers
    double omega0_db = -37.0;
    double kappa = 3.5;
    double ring_inner_m = 150.0;
    double ring_outer_m = 200.0;
    DataMode data = DataMode::iid;
    Scheme scheme = Scheme::proposed;
    std::uint64_t seed = 1;

    // Clustering weights; NaN selects the geometry-derived default.
    double rho = std::numeric_limits<double>::quiet_NaN();
    double rho1 = std::numeric_limits<double>::quiet_NaN();
    double rho2 = std::numeric_limits<double>::quiet_NaN();
    std::size_t recluster_period = 1;

    std::size_t solver_max_iter = 100;
    double solver_tol = 1e-6;

    std::string model = "softmax";
    std::size_t hidden = 16;

    // Synthetic blobs.
    std::size_t blob_classes = 10;
    std::size_t blob_dim = 10;
    double blob_spread = 1.0;
    std::size_t blob_samples = 2000;
    double test_fraction = 0.1;

    // IDX files (optional).
    std::string idx_train_images;
    std::string idx_train_labels;
    std::string idx_test_images;
    std::string idx_test_labels;

    // Quadratic test mode.
    std::size_t quad_dim = 5;
    std::size_t quad_pairs = 2;
    double quad_noise = 1.0;

    // Sweeps and summaries.
    std::size_t seeds = 1;
    std::vector<double> sweep_clusters{2, 4, 6, 8, 10};
    std::vector<double> sweep_power{0.05, 0.1, 0.2, 0.5, 1.0};
    std::size_t summary_window = 10;

    double learning_rate() const { return lr > 0.0 ? lr : 1.0 / (100.0 * lipschitz); }
    double noise_watts() const;

    /// Sets one key from its textual value; throws on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// Applies "key = value" lines; '#' starts a comment.
    void load(std::istream& in);
    void load_file(const std::string& path);

    /// Throws unless the configuration describes a runnable experiment.
    void validate() const;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

} // namespace airfl
