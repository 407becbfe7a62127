#include "airfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "airfl/clustering.hpp"
#include "airfl/error.hpp"

namespace airfl {

namespace {

Dataset subset(const Dataset& data, std::span<const std::size_t> indices)
{
    Dataset out;
    out.dim = data.dim;
    out.num_classes = data.num_classes;
    out.inputs.reserve(indices.size() * data.dim);
    for (auto i : indices) {
        const auto r = data.row(i);
        out.inputs.insert(out.inputs.end(), r.begin(), r.end());
        if (!data.labels.empty()) out.labels.push_back(data.labels[i]);
        if (!data.targets.empty()) out.targets.push_back(data.targets[i]);
    }
    return out;
}

std::vector<std::size_t> iota_indices(std::size_t n)
{
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng)
{
    // Explicit Fisher-Yates so the permutation does not depend on the standard
    // library's std::shuffle implementation.
    for (std::size_t i = v.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(v[i - 1], v[pick(rng)]);
    }
}

// Splits v into `parts` consecutive blocks whose sizes differ by at most one.
std::vector<Shard> split_even(const std::vector<std::size_t>& v, std::size_t parts)
{
    std::vector<Shard> out(parts);
    const std::size_t base = v.size() / parts;
    const std::size_t extra = v.size() % parts;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < parts; ++p) {
        const std::size_t n = base + (p < extra ? 1 : 0);
        out[p].assign(v.begin() + static_cast<std::ptrdiff_t>(pos), v.begin() + static_cast<std::ptrdiff_t>(pos + n));
        std::sort(out[p].begin(), out[p].end());
        pos += n;
    }
    return out;
}

double global_loss(const Model& model, const Dataset& data, const std::vector<Shard>& shards)
{
    double total = 0.0;
    for (const auto& s : shards) total += local_loss(model, data, s);
    return total / static_cast<double>(shards.size());
}

void write_number(std::ostream& out, double v)
{
    out << format_double(v);
}

} // namespace

std::vector<Shard> partition_data(const Dataset& data, std::span<const std::size_t> indices,
                                  std::size_t num_devices, DataMode mode, Rng& rng)
{
    require(num_devices >= 1, ErrorKind::invalid_argument, "need at least one device");
    require(indices.size() >= num_devices, ErrorKind::invalid_argument, "fewer samples than devices");
    std::vector<std::size_t> pool(indices.begin(), indices.end());

    if (mode != DataMode::noniid) {
        shuffle(pool, rng);
        return split_even(pool, num_devices);
    }

    const std::size_t classes = data.num_classes;
    if (classes < 2 || classes % 2 != 0) fail(ErrorKind::invalid_argument, "noniid split needs an even class count");
    const std::size_t groups = classes / 2;
    if (num_devices % groups != 0) {
        fail(ErrorKind::invalid_argument, "noniid split needs the device count divisible by the number of class pairs");
    }
    const std::size_t per_group = num_devices / groups;
    std::vector<std::vector<std::size_t>> by_group(groups);
    for (auto i : pool) {
        const auto label = data.labels.at(i);
        if (label < 0 || static_cast<std::size_t>(label) >= classes) fail(ErrorKind::invalid_argument, "label out of range");
        by_group[static_cast<std::size_t>(label) / 2].push_back(i);
    }
    std::vector<Shard> shards;
    shards.reserve(num_devices);
    for (auto& g : by_group) {
        if (g.size() < per_group) fail(ErrorKind::invalid_argument, "too few samples in a class pair");
        shuffle(g, rng);
        for (auto& s : split_even(g, per_group)) shards.push_back(std::move(s));
    }
    return shards;
}

std::string metrics_csv_header()
{
    return "round,loss,acc,bias_sq,mse,objective,bound";
}

void write_metrics_row(std::ostream& out, const RoundMetrics& m)
{
    out << m.round << ',';
    write_number(out, m.loss);
    out << ',';
    write_number(out, m.accuracy);
    out << ',';
    write_number(out, m.bias_sq);
    out << ',';
    write_number(out, m.mse);
    out << ',';
    write_number(out, m.objective);
    out << ',';
    write_number(out, m.bound);
    out << '\n';
}

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config))
{
    config_.validate();
    lr_ = config_.learning_rate();
    channel_params_.omega0 = db_to_linear(config_.omega0_db);
    channel_params_.kappa = config_.kappa;
    channel_params_.noise_lead_w = config_.noise_watts();
    channel_params_.noise_ps_w = config_.noise_watts();

    const auto arch = parse_architecture(config_.model);
    const auto k = config_.devices;
    if (arch == Architecture::quadratic) {
        IsotropicQuadraticSpec spec;
        spec.dim = config_.quad_dim;
        spec.num_devices = k;
        spec.pairs_per_axis = config_.quad_pairs;
        spec.lipschitz = config_.lipschitz;
        spec.target_noise = config_.quad_noise;
        spec.seed = config_.seed;
        auto task = make_isotropic_quadratic(spec);
        data_ = std::move(task.data);
        shards_ = std::move(task.shards);
        quadratic_ = make_quadratic_problem(data_, shards_);
    } else {
        Dataset full;
        bool have_test = false;
        const bool use_idx = config_.data != DataMode::synthetic && !config_.idx_train_images.empty();
        if (use_idx) {
            full = read_idx(config_.idx_train_images, config_.idx_train_labels);
            if (!config_.idx_test_images.empty()) {
                test_data_ = read_idx(config_.idx_test_images, config_.idx_test_labels);
                require(test_data_.dim == full.dim, ErrorKind::invalid_argument, "test images differ in size");
                test_data_.num_classes = full.num_classes = std::max(full.num_classes, test_data_.num_classes);
                have_test = true;
            }
        } else {
            BlobSpec spec;
            spec.classes = config_.blob_classes;
            spec.dim = config_.blob_dim;
            spec.spread = config_.blob_spread;
            spec.samples = config_.blob_samples;
            spec.seed = config_.seed;
            full = make_blobs(spec);
        }
        auto order = iota_indices(full.num_samples());
        if (!have_test) {
            auto split_rng = make_stream(config_.seed, Stream::partition, 1);
            shuffle(order, split_rng);
            const auto n_test = static_cast<std::size_t>(std::llround(config_.test_fraction * static_cast<double>(order.size())));
            std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
            std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
            std::sort(test.begin(), test.end());
            std::sort(train.begin(), train.end());
            test_data_ = subset(full, test);
            data_ = subset(full, train);
        } else {
            data_ = std::move(full);
        }
        auto part_rng = make_stream(config_.seed, Stream::partition, 0);
        const auto mode = config_.data == DataMode::synthetic ? DataMode::iid : config_.data;
        shards_ = partition_data(data_, iota_indices(data_.num_samples()), k, mode, part_rng);
        test_indices_ = iota_indices(test_data_.num_samples());
    }
    for (const auto& s : shards_) {
        if (config_.batch > s.size()) fail(ErrorKind::invalid_argument, "batch exceeds shard");
    }

    auto init_rng = make_stream(config_.seed, Stream::init);
    model_ = make_model(arch, data_.dim, data_.num_classes, config_.hidden, init_rng);

    auto geo_rng = make_stream(config_.seed, Stream::geometry);
    geometry_ = sample_ring_geometry(k, config_.ring_inner_m, config_.ring_outer_m, geo_rng);
    linkage_ = default_linkage_params(geometry_, std::max<std::size_t>(data_.num_classes, 2));
    if (!std::isnan(config_.rho)) linkage_.rho = config_.rho;
    if (!std::isnan(config_.rho1)) linkage_.rho1 = config_.rho1;
    if (!std::isnan(config_.rho2)) linkage_.rho2 = config_.rho2;
    budgets_ = PowerBudgets::uniform(k, config_.power_w);

    batch_rngs_.reserve(k);
    for (std::size_t d = 0; d < k; ++d) batch_rngs_.push_back(make_stream(config_.seed, Stream::batching, d));

    double initial_gap = 0.0;
    if (quadratic_) {
        const auto grad = quadratic_->gradient(model_.params);
        delta_sq_ = exact_delta_sq(model_, data_, shards_, config_.batch, grad);
        initial_gap = quadratic_->gap(model_.params);
    } else {
        delta_sq_ = estimate_delta_sq(model_, data_, shards_);
        initial_gap = global_loss(model_, data_, shards_);
    }
    current_delta_sq_ = delta_sq_;
    if (lr_ < 1.0 / (2.0 * config_.lipschitz)) {
        bound_.emplace(config_.lipschitz, lr_, config_.batch, delta_sq_, initial_gap);
    }

    auto row = evaluate(0);
    row.bound = bound_ ? bound_->value() : std::numeric_limits<double>::quiet_NaN();
    metrics_.push_back(row);
}

RoundMetrics Experiment::evaluate(std::size_t round) const
{
    RoundMetrics m;
    m.round = round;
    m.loss = global_loss(model_, data_, shards_);
    if (quadratic_) {
        m.gap = quadratic_->gap(model_.params);
    } else {
        m.gap = m.loss;
        if (!test_indices_.empty()) m.accuracy = accuracy(model_, test_data_, test_indices_);
    }
    return m;
}

void Experiment::choose_clusters(std::size_t round, const std::vector<double>& importances)
{
    const auto n = config_.clusters;
    const bool refresh = !have_assignment_ || (round - 1) % config_.recluster_period == 0;
    switch (config_.scheme) {
    case Scheme::direct:
        if (!have_assignment_) assignment_ = direct_assignment(config_.devices);
        break;
    case Scheme::static_clustering:
        if (!have_assignment_) {
            const std::vector<double> none(config_.devices, 0.0);
            auto clusters = cluster_devices(geometry_, none, n, 0.0).clusters;
            auto leads = select_leads(clusters, geometry_, none, linkage_.rho1, 0.0);
            assignment_ = make_assignment(std::move(clusters), std::move(leads), round);
        }
        break;
    case Scheme::similarity:
        if (refresh) {
            auto clusters = cluster_by_similarity(gradients_, n).clusters;
            auto leads = select_leads(clusters, geometry_, importances, linkage_.rho1, linkage_.rho2);
            assignment_ = make_assignment(std::move(clusters), std::move(leads), round);
        }
        break;
    case Scheme::proposed:
    case Scheme::max_power:
    case Scheme::mse:
        if (refresh) {
            auto clusters = cluster_devices(geometry_, importances, n, linkage_.rho).clusters;
            auto leads = select_leads(clusters, geometry_, importances, linkage_.rho1, linkage_.rho2);
            assignment_ = make_assignment(std::move(clusters), std::move(leads), round);
        }
        break;
    }
    have_assignment_ = true;
    assignment_.round = round;
    validate_assignment(assignment_, config_.devices);
    std::ostringstream out;
    write_assignment_csv(out, assignment_);
    assignments_csv_ += out.str();
}

PowerAllocation Experiment::choose_powers(const PowerProblem& problem, RoundMetrics& row)
{
    SolverOptions options;
    options.max_iterations = config_.solver_max_iter;
    options.tolerance = config_.solver_tol;

    PowerAllocation alloc;
    SolverTrace trace;
    if (config_.scheme == Scheme::max_power) {
        alloc = max_power_allocation(problem);
        trace.initial_objective = objective(problem, alloc);
        trace.converged = true;
    } else if (config_.scheme == Scheme::mse) {
        PowerProblem symbols = problem;
        symbols.coeffs = symbol_mse_coefficients(problem.coeffs);
        auto res = alternating_minimize(symbols, options);
        alloc = std::move(res.alloc);
        trace = std::move(res.trace);
    } else {
        auto res = alternating_minimize(problem, options);
        alloc = std::move(res.alloc);
        trace = std::move(res.trace);
    }
    row.solver_iterations = trace.iterations;
    row.objective = objective(problem, alloc);
    std::ostringstream out;
    write_trace_csv(out, row.round, trace);
    trace_csv_ += out.str();
    return alloc;
}

const RoundMetrics& Experiment::step()
{
    if (finished()) fail(ErrorKind::invalid_argument, "experiment already finished");
    const std::size_t round = rounds_done_ + 1;
    const auto k = config_.devices;

    if (quadratic_ && round > 1) {
        current_delta_sq_ = exact_delta_sq(model_, data_, shards_, config_.batch, quadratic_->gradient(model_.params));
    }

    gradients_.assign(k, {});
    for (std::size_t d = 0; d < k; ++d) {
        gradients_[d] = local_gradient(model_, data_, shards_[d], config_.batch, batch_rngs_[d]);
    }
    const auto stats = compute_stats(gradients_);

    std::vector<double> importances(k, 0.0);
    const bool needs_importance = !quadratic_ && config_.scheme != Scheme::direct &&
                                  config_.scheme != Scheme::static_clustering;
    if (needs_importance) {
        for (std::size_t d = 0; d < k; ++d) importances[d] = data_importance(model_, data_, shards_[d]);
    }
    choose_clusters(round, importances);

    auto chan_rng = make_stream(config_.seed, Stream::channels, round);
    channels_ = sample_channels(geometry_, assignment_, channel_params_, chan_rng);

    RoundMetrics row;
    row.round = round;
    row.aggregated = channels_.num_subordinates();

    std::vector<double> estimate;
    if (stats.var > 0.0) {
        PowerProblem problem;
        problem.chan = channels_;
        problem.budgets = budgets_;
        problem.coeffs = make_coefficients(sum_centered_sq(gradients_, stats), stats.var, model_.size(), k, lr_,
                                           config_.lipschitz);
        allocation_ = choose_powers(problem, row);

        auto noise_rng = make_stream(config_.seed, Stream::noise, round);
        auto noise = draw_noise(channels_, model_.size(), noise_rng);
        auto outcome = aggregate(gradients_, stats, channels_, allocation_, budgets_, std::move(noise));
        aggregation_error(outcome, gradients_, stats, channels_, allocation_);
        const auto moments = error_moments(gradients_, stats, channels_, allocation_);
        row.bias_sq = moments.bias_sq;
        row.mse = moments.mse;
        estimate = std::move(outcome.estimated);
    } else {
        // Every gradient is a constant vector: nothing to normalise or transmit.
        estimate.assign(model_.size(), stats.mean);
        row.aggregated = 0;
    }

    model_ = global_update(model_, estimate, lr_);
    rounds_done_ = round;

    const auto eval = evaluate(round);
    row.loss = eval.loss;
    row.accuracy = eval.accuracy;
    row.gap = eval.gap;
    row.bound = bound_ ? bound_->step(row.bias_sq, row.mse) : std::numeric_limits<double>::quiet_NaN();
    metrics_.push_back(row);
    return metrics_.back();
}

void Experiment::run()
{
    while (!finished()) step();
}

void Experiment::write_metrics_csv(std::ostream& out) const
{
    out << metrics_csv_header() << '\n';
    for (const auto& m : metrics_) write_metrics_row(out, m);
}

namespace {

template <typename Field>
double tail_mean(const std::vector<RoundMetrics>& rows, std::size_t window, Field field)
{
    if (rows.size() == 1) return field(rows.front());
    const std::size_t trained = rows.size() - 1;
    const std::size_t n = std::min(window, trained);
    double total = 0.0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) total += field(rows[i]);
    return total / static_cast<double>(n);
}

} // namespace

double Experiment::final_accuracy() const
{
    return tail_mean(metrics_, config_.summary_window, [](const RoundMetrics& m) { return m.accuracy; });
}

double Experiment::final_loss() const
{
    return tail_mean(metrics_, config_.summary_window, [](const RoundMetrics& m) { return m.loss; });
}

std::pair<double, double> mean_and_std(std::span<const double> values)
{
    if (values.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

SweepPoint summarize_seeds(const ExperimentConfig& config, double value)
{
    SweepPoint point;
    point.value = value;
    for (std::size_t s = 0; s < config.seeds; ++s) {
        ExperimentConfig run = config;
        run.seed = config.seed + s;
        Experiment e(run);
        e.run();
        point.seeds.push_back(run.seed);
        point.accuracy.push_back(e.final_accuracy());
        point.loss.push_back(e.final_loss());
    }
    std::tie(point.mean_accuracy, point.std_accuracy) = mean_and_std(point.accuracy);
    point.mean_loss = mean_and_std(point.loss).first;
    return point;
}

SweepResult run_sweep(const ExperimentConfig& config, const std::string& axis)
{
    SweepResult result;
    result.axis = axis;
    result.scheme = config.scheme;
    if (axis == "clusters") {
        for (double v : config.sweep_clusters) {
            if (!(v >= 1.0) || v != std::floor(v)) fail(ErrorKind::invalid_argument, "cluster counts must be positive integers");
            ExperimentConfig c = config;
            c.clusters = static_cast<std::size_t>(v);
            result.points.push_back(summarize_seeds(c, v));
        }
    } else if (axis == "power") {
        for (double v : config.sweep_power) {
            ExperimentConfig c = config;
            c.power_w = v;
            result.points.push_back(summarize_seeds(c, v));
        }
    } else {
        fail(ErrorKind::invalid_argument, "unknown sweep axis: " + axis);
    }
    return result;
}

void write_sweep_json(std::ostream& out, const SweepResult& result)
{
    nlohmann::json j;
    j["axis"] = result.axis;
    j["scheme"] = to_string(result.scheme);
    j["points"] = nlohmann::json::array();
    for (const auto& p : result.points) {
        j["points"].push_back({{"value", p.value},
                               {"seeds", p.seeds},
                               {"final_accuracy", p.accuracy},
                               {"final_loss", p.loss},
                               {"mean_accuracy", p.mean_accuracy},
                               {"std_accuracy", p.std_accuracy},
                               {"mean_loss", p.mean_loss}});
    }
    out << j.dump(2) << '\n';
}

void write_summary_json(std::ostream& out, const Experiment& experiment)
{
    const auto& c = experiment.config();
    nlohmann::json j{{"scheme", to_string(c.scheme)},
                     {"data", to_string(c.data)},
                     {"model", c.model},
                     {"seed", c.seed},
                     {"rounds", c.rounds},
                     {"devices", c.devices},
                     {"clusters", c.clusters},
                     {"power_w", c.power_w},
                     {"final_accuracy", experiment.final_accuracy()},
                     {"final_loss", experiment.final_loss()},
                     {"summary_window", c.summary_window}};
    out << j.dump(2) << '\n';
}

} // namespace airfl
