#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "airfl/config.hpp"
#include "airfl/error.hpp"
#include "airfl/harness.hpp"
#include "support.hpp"

using namespace airfl;
using doctest::Approx;

namespace {

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.devices = 10;
    c.clusters = 3;
    c.rounds = 5;
    c.batch = 5;
    c.blob_samples = 400;
    c.blob_classes = 4;
    c.blob_dim = 4;
    return c;
}

ExperimentConfig quadratic_config()
{
    ExperimentConfig c;
    c.model = "quadratic";
    c.devices = 8;
    c.clusters = 2;
    c.rounds = 10;
    c.quad_dim = 3;
    c.quad_pairs = 2;
    c.batch = 12;  // full shard: 2 * pairs * dim
    c.lr = 0.01;
    return c;
}

std::string metrics_text(const Experiment& e)
{
    std::ostringstream out;
    e.write_metrics_csv(out);
    return out.str();
}

std::vector<std::string> rows_of_round(const std::string& csv, std::size_t round)
{
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string line;
    const auto prefix = std::to_string(round) + ",";
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) out.push_back(line.substr(prefix.size()));
    }
    return out;
}

Dataset labelled(std::size_t n, std::size_t classes)
{
    Dataset d;
    d.dim = 1;
    d.num_classes = classes;
    for (std::size_t i = 0; i < n; ++i) {
        d.inputs.push_back(static_cast<double>(i));
        d.labels.push_back(static_cast<int>(i % classes));
    }
    return d;
}

} // namespace

TEST_CASE("data partitioning")
{
    SUBCASE("iid balanced")
    {
        const auto d = labelled(60000, 10);
        Rng rng(1);
        const auto idx = test::all_indices(d);
        const auto shards = partition_data(d, idx, 50, DataMode::iid, rng);
        REQUIRE(shards.size() == 50);
        std::vector<int> seen(60000, 0);
        for (const auto& s : shards) {
            CHECK(s.size() == 1200);
            for (auto i : s) ++seen[i];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
    }
    SUBCASE("iid with a remainder")
    {
        const auto d = labelled(103, 3);
        Rng rng(2);
        const auto shards = partition_data(d, test::all_indices(d), 10, DataMode::iid, rng);
        for (const auto& s : shards) CHECK((s.size() == 10 || s.size() == 11));
    }
    SUBCASE("non-iid: two classes per device")
    {
        const auto d = labelled(6000, 10);
        Rng rng(3);
        const auto shards = partition_data(d, test::all_indices(d), 50, DataMode::noniid, rng);
        REQUIRE(shards.size() == 50);
        std::vector<int> seen(6000, 0);
        for (const auto& s : shards) {
            std::set<int> classes;
            for (auto i : s) {
                classes.insert(d.labels[i]);
                ++seen[i];
            }
            CHECK(classes.size() == 2);
            CHECK(*classes.begin() % 2 == 0);
            CHECK(*classes.rbegin() == *classes.begin() + 1);
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
    }
    SUBCASE("divisibility errors")
    {
        const auto d = labelled(600, 10);
        Rng rng(4);
        CHECK_THROWS_AS(partition_data(d, test::all_indices(d), 12, DataMode::noniid, rng), Error);
        const auto odd = labelled(600, 3);
        CHECK_THROWS_AS(partition_data(odd, test::all_indices(odd), 6, DataMode::noniid, rng), Error);
        CHECK_THROWS_AS(partition_data(d, std::vector<std::size_t>{0, 1}, 3, DataMode::iid, rng), Error);
    }
    SUBCASE("deterministic")
    {
        const auto d = labelled(500, 10);
        Rng a(7);
        Rng b(7);
        CHECK(partition_data(d, test::all_indices(d), 10, DataMode::noniid, a) ==
              partition_data(d, test::all_indices(d), 10, DataMode::noniid, b));
    }
}

TEST_CASE("configuration")
{
    ExperimentConfig c;
    CHECK(c.devices == 50);
    CHECK(c.clusters == 5);
    CHECK(c.power_w == 0.2);
    CHECK(c.noise_dbm == -80.0);
    CHECK(c.lipschitz == 10.0);
    CHECK(c.learning_rate() == Approx(1e-3));
    CHECK(c.ring_inner_m == 150.0);
    CHECK(c.ring_outer_m == 200.0);
    CHECK(c.noise_watts() == Approx(1e-11).epsilon(1e-12));

    c.set("devices", "20");
    c.set("scheme", "maxpower");
    c.set("noise_dbm", "-inf");
    c.set("sweep_power", "0.05, 0.2,1");
    CHECK(c.devices == 20);
    CHECK(c.scheme == Scheme::max_power);
    CHECK(c.noise_watts() == 0.0);
    CHECK(c.sweep_power == std::vector<double>{0.05, 0.2, 1.0});
    CHECK(c.get("scheme") == "maxpower");
    CHECK(c.get("power_w") == "0.2");
    CHECK_THROWS_AS(c.set("nope", "1"), Error);
    CHECK_THROWS_AS(c.set("devices", "-3"), Error);
    CHECK_THROWS_AS(c.set("lr", "fast"), Error);
    CHECK_THROWS_AS(c.set("scheme", "best"), Error);

    for (const auto& key : ExperimentConfig::keys()) {
        ExperimentConfig copy;
        CHECK_NOTHROW(copy.set(key, ExperimentConfig{}.get(key)));
    }

    std::istringstream file("# comment\nclusters = 4\n\nseed=9  # trailing\nrho = 12.5\n");
    ExperimentConfig f;
    f.load(file);
    CHECK(f.clusters == 4);
    CHECK(f.seed == 9);
    CHECK(f.rho == 12.5);
    std::istringstream bad("clusters 4\n");
    CHECK_THROWS_AS(f.load(bad), Error);
    CHECK_THROWS_AS(f.load_file("/nonexistent/airfl.cfg"), Error);

    ExperimentConfig v;
    v.clusters = 60;
    CHECK_THROWS_AS(v.validate(), Error);
    CHECK(parse_scheme("static") == Scheme::static_clustering);
    CHECK(to_string(Scheme::max_power) == "maxpower");
    CHECK(parse_data_mode("noniid") == DataMode::noniid);
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("experiment runs")
{
    SUBCASE("T rounds plus the initial row")
    {
        auto c = small_config();
        Experiment e(c);
        e.run();
        CHECK(e.metrics().size() == c.rounds + 1);
        CHECK(e.finished());
        CHECK_THROWS_AS(e.step(), Error);
        for (const auto& m : e.metrics()) {
            CHECK(std::isfinite(m.loss));
            CHECK(m.accuracy >= 0.0);
            CHECK(m.accuracy <= 1.0);
        }
        const auto text = metrics_text(e);
        CHECK(text.rfind("round,loss,acc,bias_sq,mse,objective,bound\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(c.rounds + 2));
    }
    SUBCASE("zero rounds reports the initial model only")
    {
        auto c = small_config();
        c.rounds = 0;
        Experiment e(c);
        e.run();
        REQUIRE(e.metrics().size() == 1);
        CHECK(e.metrics()[0].round == 0);
        CHECK(e.final_loss() == e.metrics()[0].loss);
    }
    SUBCASE("same seed, identical output")
    {
        auto c = small_config();
        c.scheme = Scheme::similarity;
        Experiment a(c);
        Experiment b(c);
        a.run();
        b.run();
        CHECK(metrics_text(a) == metrics_text(b));
        CHECK(a.assignments_csv() == b.assignments_csv());
        CHECK(a.trace_csv() == b.trace_csv());
        c.seed = 2;
        Experiment d(c);
        d.run();
        CHECK(metrics_text(a) != metrics_text(d));
    }
    SUBCASE("two-tier schemes aggregate exactly K - N gradients")
    {
        for (auto scheme : {Scheme::proposed, Scheme::static_clustering, Scheme::similarity, Scheme::max_power,
                            Scheme::mse}) {
            auto c = small_config();
            c.scheme = scheme;
            Experiment e(c);
            e.run();
            for (std::size_t r = 1; r < e.metrics().size(); ++r) CHECK(e.metrics()[r].aggregated == c.devices - c.clusters);
            CHECK(e.assignment().num_leads() == c.clusters);
        }
        auto c = small_config();
        c.scheme = Scheme::direct;
        Experiment e(c);
        e.run();
        for (std::size_t r = 1; r < e.metrics().size(); ++r) CHECK(e.metrics()[r].aggregated == c.devices);
    }
    SUBCASE("static clustering is fixed after the first round")
    {
        auto c = small_config();
        c.scheme = Scheme::static_clustering;
        Experiment e(c);
        e.run();
        const auto first = rows_of_round(e.assignments_csv(), 1);
        CHECK(first.size() == c.devices);
        for (std::size_t r = 2; r <= c.rounds; ++r) CHECK(rows_of_round(e.assignments_csv(), r) == first);
    }
    SUBCASE("max power uses every budget fully")
    {
        auto c = small_config();
        c.scheme = Scheme::max_power;
        c.rounds = 1;
        Experiment e(c);
        e.run();
        const auto& chan = e.channels();
        const auto& a = e.allocation();
        for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
            for (double al : a.alpha[n]) CHECK(al == c.power_w);
            CHECK(lead_power(chan.clusters[n], a.alpha[n], a.beta[n]) == Approx(c.power_w).epsilon(1e-14));
            CHECK(lead_power(chan.clusters[n], a.alpha[n], a.beta[n]) <= c.power_w);
        }
    }
    SUBCASE("solver trace is recorded per round")
    {
        auto c = small_config();
        c.rounds = 2;
        Experiment e(c);
        e.run();
        CHECK(rows_of_round(e.trace_csv(), 1).size() >= 2);
        CHECK(rows_of_round(e.trace_csv(), 2).size() >= 2);
    }
    SUBCASE("summaries and sweeps")
    {
        auto c = small_config();
        c.rounds = 3;
        c.seeds = 2;
        c.sweep_clusters = {2, 3};
        const auto sweep = run_sweep(c, "clusters");
        REQUIRE(sweep.points.size() == 2);
        CHECK(sweep.points[0].value == 2.0);
        CHECK(sweep.points[0].seeds == std::vector<std::uint64_t>{1, 2});
        const auto [mean, sd] = mean_and_std(sweep.points[1].accuracy);
        CHECK(sweep.points[1].mean_accuracy == mean);
        CHECK(sweep.points[1].std_accuracy == sd);
        std::ostringstream js;
        write_sweep_json(js, sweep);
        CHECK(js.str().find("\"axis\": \"clusters\"") != std::string::npos);
        CHECK_THROWS_AS(run_sweep(c, "rounds"), Error);

        const std::vector<double> v{1.0, 2.0, 4.0};
        const auto [m, s] = mean_and_std(v);
        CHECK(m == Approx(7.0 / 3.0));
        CHECK(s == Approx(std::sqrt(((1.0 - m) * (1.0 - m) + (2.0 - m) * (2.0 - m) + (4.0 - m) * (4.0 - m)) / 2.0)));
    }
}

TEST_CASE("noiseless quadratic runs")
{
    SUBCASE("direct scheme equals full-gradient descent")
    {
        auto c = quadratic_config();
        c.scheme = Scheme::direct;
        c.noise_dbm = -std::numeric_limits<double>::infinity();
        c.power_w = 1e12;
        c.solver_max_iter = 2000;
        c.solver_tol = 1e-14;
        Experiment e(c);
        const auto& q = *e.quadratic();
        std::vector<double> w(c.quad_dim, 0.0);
        for (std::size_t r = 1; r <= c.rounds; ++r) {
            e.step();
            const auto g = q.gradient(w);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c.lr * g[i];
            for (std::size_t i = 0; i < w.size(); ++i) {
                CHECK(std::abs(e.model().params[i] - w[i]) <= 1e-9 * std::max(1.0, std::abs(w[i])));
            }
        }
    }
    SUBCASE("single device in direct mode applies its own gradient")
    {
        auto c = quadratic_config();
        c.scheme = Scheme::direct;
        c.devices = 1;
        c.clusters = 1;
        c.noise_dbm = -std::numeric_limits<double>::infinity();
        c.power_w = 1e12;
        Experiment e(c);
        const auto before = e.model().params;
        e.step();
        const auto& g = e.gradients()[0];
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(e.model().params[i] == Approx(before[i] - c.lr * g[i]).epsilon(1e-12));
        }
    }
    SUBCASE("two-tier scheme differs from descent only by the lead omission")
    {
        auto c = quadratic_config();
        c.noise_dbm = -std::numeric_limits<double>::infinity();
        c.power_w = 1e12;
        c.solver_max_iter = 2000;
        c.solver_tol = 1e-14;
        Experiment e(c);
        for (std::size_t r = 1; r <= 3; ++r) {
            const auto before = e.model().params;
            e.step();
            const auto& grads = e.gradients();
            const auto stats = compute_stats(grads);
            std::vector<double> expect(before.size(), 0.0);
            for (const auto& g : grads) {
                for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += g[i] / static_cast<double>(c.devices);
            }
            for (auto lead : e.assignment().leads) {
                for (std::size_t i = 0; i < expect.size(); ++i) {
                    expect[i] -= (grads[lead][i] - stats.mean) / static_cast<double>(c.devices);
                }
            }
            for (std::size_t i = 0; i < expect.size(); ++i) {
                CHECK(e.model().params[i] == Approx(before[i] - c.lr * expect[i]).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("quadratic mode reports the gap and its bound")
{
    auto c = quadratic_config();
    c.batch = 3;
    c.rounds = 30;
    Experiment e(c);
    e.run();
    CHECK(e.delta_sq() > 0.0);
    for (const auto& m : e.metrics()) {
        CHECK(std::isfinite(m.bound));
        CHECK(m.gap >= 0.0);
        CHECK(m.accuracy == 0.0);
    }
    CHECK(e.metrics().front().bound == Approx(e.metrics().front().gap));

    auto fast = quadratic_config();
    fast.lr = 0.06;  // above 1/(2L)
    Experiment f(fast);
    CHECK(std::isnan(f.metrics().front().bound));
}
