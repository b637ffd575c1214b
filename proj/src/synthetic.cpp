#include <algorithm>
#include <cmath>
#include <string>

#include "mtlgr/dataio.hpp"
#include "mtlgr/error.hpp"
#include "mtlgr/random.hpp"

namespace mtlgr {

namespace {

// First k entries of a uniform random permutation of `pool`.
std::vector<int> sample_without_replacement(std::vector<int> pool, int k, Rng& rng) {
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

double draw_coefficient(Rng& rng) {
    std::uniform_real_distribution<double> magnitude(0.5, 1.5);
    std::bernoulli_distribution negative(0.5);
    const double m = magnitude(rng);
    return negative(rng) ? -m : m;
}

double perturb(double value, Rng& rng) {
    std::normal_distribution<double> jitter(0.0, 0.1);
    double out = 0.0;
    do {
        out = value + jitter(rng);
    } while (out == 0.0);
    return out;
}

ModelMatrix draw_model(const SynthParams& params, const TaskGraph& graph, Rng& rng) {
    const int p = params.features;
    const int k = params.tasks;
    const int s = params.sparsity;
    std::vector<int> parent(static_cast<std::size_t>(k), -1);
    for (auto [lo, hi] : graph.edges()) {
        auto& slot = parent[static_cast<std::size_t>(hi)];
        if (slot < 0 || lo < slot) slot = lo;
    }

    std::vector<int> all(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) all[static_cast<std::size_t>(j)] = j;

    ModelMatrix w{Eigen::MatrixXd::Zero(p, k)};
    std::vector<std::vector<int>> supports(static_cast<std::size_t>(k));
    for (int t = 0; t < k; ++t) {
        const int from = parent[static_cast<std::size_t>(t)];
        auto& support = supports[static_cast<std::size_t>(t)];
        if (from < 0 || params.support == SupportMode::independent) {
            support = sample_without_replacement(all, s, rng);
            for (int j : support) w.coefficients(j, t) = draw_coefficient(rng);
            continue;
        }
        const auto& inherited = supports[static_cast<std::size_t>(from)];
        const int keep = params.support == SupportMode::shared ? s : (s + 1) / 2;
        support = sample_without_replacement(inherited, keep, rng);
        for (int j : support) w.coefficients(j, t) = perturb(w.coefficients(j, from), rng);

        // New indices avoid the parent's support when there is room.
        std::vector<int> fresh;
        for (int j : all) {
            if (std::find(inherited.begin(), inherited.end(), j) == inherited.end()) fresh.push_back(j);
        }
        if (static_cast<int>(fresh.size()) < s - keep) {
            fresh.clear();
            for (int j : all) {
                if (std::find(support.begin(), support.end(), j) == support.end()) fresh.push_back(j);
            }
        }
        for (int j : sample_without_replacement(fresh, s - keep, rng)) {
            support.push_back(j);
            w.coefficients(j, t) = draw_coefficient(rng);
        }
    }
    return w;
}

}  // namespace

DatasetBundle synth_sample(const ModelMatrix& model, const TaskGraph& graph, int rows, double noise_std,
                           bool shared_features, std::uint64_t seed) {
    if (rows < 1) fail(Errc::invalid_argument, "synthetic rows must be positive");
    if (!(noise_std >= 0.0)) fail(Errc::invalid_argument, "noise_std must be nonnegative");
    if (graph.task_count() != model.tasks()) fail(Errc::invalid_argument, "graph and model disagree on task count");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index p = model.features();
    auto draw_design = [&] {
        Eigen::MatrixXd x(rows, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = gauss(rng);
        }
        return x;
    };

    DatasetBundle bundle{{}, graph, SplitTag::full, Provenance::synthetic, {}};
    Eigen::MatrixXd shared;
    if (shared_features) shared = draw_design();
    for (Eigen::Index t = 0; t < model.tasks(); ++t) {
        Eigen::MatrixXd x = shared_features ? shared : draw_design();
        Eigen::VectorXd y = x * model.coefficients.col(t);
        if (noise_std > 0.0) {
            for (Eigen::Index i = 0; i < rows; ++i) y[i] += noise_std * gauss(rng);
        }
        bundle.tasks.push_back(complete_task(std::move(x), std::move(y)));
    }
    for (Eigen::Index j = 0; j < p; ++j) bundle.feature_names.push_back("f" + std::to_string(j));
    return bundle;
}

std::pair<DatasetBundle, SyntheticGroundTruth> synth_generate(const SynthParams& params, const TaskGraph& graph,
                                                              std::uint64_t seed) {
    if (params.features < 1 || params.tasks < 1 || params.rows < 1 || params.sparsity < 1) {
        fail(Errc::invalid_argument, "synthetic sizes must be positive");
    }
    if (params.sparsity > params.features) {
        fail(Errc::invalid_argument, "sparsity " + std::to_string(params.sparsity) + " exceeds " +
                                         std::to_string(params.features) + " features");
    }
    if (graph.task_count() != params.tasks) {
        fail(Errc::invalid_argument, "graph has " + std::to_string(graph.task_count()) + " tasks, expected " +
                                         std::to_string(params.tasks));
    }
    Rng model_rng(derive_seed(seed, {0}));
    SyntheticGroundTruth truth;
    truth.true_model = draw_model(params, graph, model_rng);
    truth.noise_std = params.noise_std;

    DatasetBundle bundle = synth_sample(truth.true_model, graph, params.rows, params.noise_std,
                                        params.shared_features, derive_seed(seed, {1}));
    for (const auto& task : bundle.tasks) {
        truth.complete_x.push_back(task.values);
        truth.true_moments.push_back(empirical_moments(task.values, task.response));
    }
    return {std::move(bundle), std::move(truth)};
}

DatasetBundle inject_mcar(const DatasetBundle& bundle, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        fail(Errc::invalid_argument, "MCAR fraction must lie in [0, 1), got " + std::to_string(fraction));
    }
    DatasetBundle out = bundle;
    if (fraction == 0.0) return out;
    for (std::size_t t = 0; t < out.tasks.size(); ++t) {
        auto& task = out.tasks[t];
        std::vector<int> observed;
        for (Eigen::Index idx = 0; idx < task.mask.size(); ++idx) {
            if (task.mask(idx)) observed.push_back(static_cast<int>(idx));
        }
        const auto count = static_cast<int>(std::floor(fraction * static_cast<double>(observed.size())));
        Rng rng(derive_seed(seed, {t}));
        for (int idx : sample_without_replacement(std::move(observed), count, rng)) task.mask(idx) = false;
        try {
            task.missing_rate = missing_rate(task.mask);
        } catch (const Error& e) {
            fail(e.code(), "task " + std::to_string(t + 1) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace mtlgr
