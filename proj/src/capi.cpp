#include "mtlgr/mtlgr.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "mtlgr/bench.hpp"
#include "mtlgr/error.hpp"
#include "mtlgr/random.hpp"

struct mtlgr_graph {
    mtlgr::TaskGraph graph;
};

struct mtlgr_dataset {
    mtlgr::DatasetBundle bundle;
};

struct mtlgr_model {
    mtlgr::SolverReport report;
};

struct mtlgr_config {
    mtlgr::ExperimentConfig config;
};

struct mtlgr_sweep {
    mtlgr::SweepResult result;
};

namespace {

thread_local std::string last_error;

mtlgr_status to_status(mtlgr::Errc code) {
    using mtlgr::Errc;
    switch (code) {
    case Errc::invalid_argument: return MTLGR_INVALID_ARGUMENT;
    case Errc::degenerate_column: return MTLGR_DEGENERATE_COLUMN;
    case Errc::schema: return MTLGR_SCHEMA_ERROR;
    case Errc::invalid_data: return MTLGR_INVALID_DATA;
    case Errc::io: return MTLGR_IO_ERROR;
    case Errc::numerical_failure: return MTLGR_NUMERICAL_FAILURE;
    case Errc::config: return MTLGR_CONFIG_ERROR;
    case Errc::tuning_failure: return MTLGR_TUNING_FAILURE;
    }
    return MTLGR_INTERNAL_ERROR;
}

template <typename Body>
mtlgr_status guarded(Body&& body) {
    try {
        body();
        return MTLGR_OK;
    } catch (const mtlgr::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return MTLGR_INTERNAL_ERROR;
    } catch (const std::exception& e) {
        last_error = e.what();
        return MTLGR_INTERNAL_ERROR;
    }
}

void require(bool condition, const char* what) {
    if (!condition) mtlgr::fail(mtlgr::Errc::invalid_argument, what);
}

mtlgr::Method to_method(mtlgr_method m) {
    switch (m) {
    case MTLGR_MEAN_IMPUTE: return mtlgr::Method::mean_impute;
    case MTLGR_MF_LGR: return mtlgr::Method::mf_lgr;
    case MTLGR_RLGR: return mtlgr::Method::rlgr;
    case MTLGR_RLGR1: return mtlgr::Method::rlgr1;
    }
    mtlgr::fail(mtlgr::Errc::invalid_argument, "unknown method code " + std::to_string(static_cast<int>(m)));
}

mtlgr_method from_method(mtlgr::Method m) {
    switch (m) {
    case mtlgr::Method::mean_impute: return MTLGR_MEAN_IMPUTE;
    case mtlgr::Method::mf_lgr: return MTLGR_MF_LGR;
    case mtlgr::Method::rlgr: return MTLGR_RLGR;
    case mtlgr::Method::rlgr1: return MTLGR_RLGR1;
    }
    return MTLGR_RLGR1;
}

const mtlgr::MaskedTaskData& task_at(const mtlgr_dataset* data, int32_t task) {
    require(data != nullptr, "dataset is NULL");
    require(task >= 0 && task < data->bundle.task_count(), "task index out of range");
    return data->bundle.tasks[static_cast<std::size_t>(task)];
}

void copy_string(const std::string& s, char* buf, size_t len) {
    if (buf == nullptr || len == 0) return;
    const size_t n = std::min(s.size(), len - 1);
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
}

mtlgr::SolverSettings to_settings(const mtlgr_solver_settings* s) {
    mtlgr::SolverSettings out;
    if (s == nullptr) return out;
    out.max_iters = s->max_iters;
    out.tol = s->tol;
    if (s->initial_step > 0.0) out.initial_step = s->initial_step;
    return out;
}

std::vector<mtlgr::MomentPair> method_moments(const mtlgr::DatasetBundle& bundle, mtlgr::Method method,
                                              const mtlgr_hyper& hyper) {
    std::vector<mtlgr::MomentPair> out;
    for (const auto& task : bundle.tasks) {
        switch (method) {
        case mtlgr::Method::mean_impute:
            out.push_back(mtlgr::empirical_moments(mtlgr::mean_impute(task).values, task.response));
            break;
        case mtlgr::Method::mf_lgr: {
            mtlgr::CompletionConfig c;
            c.rank = hyper.rank;
            out.push_back(mtlgr::empirical_moments(mtlgr::mf_complete(task, c), task.response));
            break;
        }
        case mtlgr::Method::rlgr: out.push_back(mtlgr::plugin_moments_rlgr(task)); break;
        case mtlgr::Method::rlgr1: out.push_back(mtlgr::plugin_moments_rlgr1(task, hyper.delta)); break;
        }
    }
    return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

extern "C" {

const char* mtlgr_version(void) { return "1.0.0"; }

const char* mtlgr_status_string(mtlgr_status status) {
    switch (status) {
    case MTLGR_OK: return "ok";
    case MTLGR_INVALID_ARGUMENT: return "invalid-argument";
    case MTLGR_DEGENERATE_COLUMN: return "degenerate-column";
    case MTLGR_SCHEMA_ERROR: return "schema";
    case MTLGR_INVALID_DATA: return "invalid-data";
    case MTLGR_IO_ERROR: return "io";
    case MTLGR_NUMERICAL_FAILURE: return "numerical-failure";
    case MTLGR_CONFIG_ERROR: return "config";
    case MTLGR_TUNING_FAILURE: return "tuning-failure";
    case MTLGR_INTERNAL_ERROR: return "internal";
    }
    return "unknown";
}

const char* mtlgr_last_error(void) { return last_error.c_str(); }

const char* mtlgr_method_name(mtlgr_method method) {
    switch (method) {
    case MTLGR_MEAN_IMPUTE:
    case MTLGR_MF_LGR:
    case MTLGR_RLGR:
    case MTLGR_RLGR1: return mtlgr::method_name(to_method(method));
    }
    return "unknown";
}

mtlgr_status mtlgr_method_parse(const char* tag, mtlgr_method* out) {
    return guarded([&] {
        require(tag != nullptr && out != nullptr, "NULL argument");
        *out = from_method(mtlgr::parse_method(tag));
    });
}

// ---------------------------------------------------------------------------
// graph

mtlgr_status mtlgr_graph_chain(int32_t task_count, mtlgr_graph** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        *out = new mtlgr_graph{mtlgr::chain_graph(task_count)};
    });
}

mtlgr_status mtlgr_graph_from_edges(int32_t task_count, const int32_t* edges, int32_t edge_count, mtlgr_graph** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        require(edge_count >= 0 && (edge_count == 0 || edges != nullptr), "bad edge array");
        std::vector<mtlgr::TaskGraph::Edge> list;
        for (int32_t e = 0; e < edge_count; ++e) list.emplace_back(edges[2 * e], edges[2 * e + 1]);
        *out = new mtlgr_graph{mtlgr::TaskGraph::from_one_based(task_count, list)};
    });
}

void mtlgr_graph_free(mtlgr_graph* graph) { delete graph; }

int32_t mtlgr_graph_task_count(const mtlgr_graph* graph) { return graph ? graph->graph.task_count() : 0; }

int32_t mtlgr_graph_edge_count(const mtlgr_graph* graph) { return graph ? graph->graph.edge_count() : 0; }

mtlgr_status mtlgr_graph_incidence(const mtlgr_graph* graph, int32_t* out) {
    return guarded([&] {
        require(graph != nullptr && out != nullptr, "NULL argument");
        const Eigen::MatrixXi r = mtlgr::build_incidence(graph->graph);
        std::copy(r.data(), r.data() + r.size(), out);
    });
}

mtlgr_status mtlgr_graph_laplacian(const mtlgr_graph* graph, double* out) {
    return guarded([&] {
        require(graph != nullptr && out != nullptr, "NULL argument");
        const Eigen::MatrixXd l = mtlgr::laplacian(graph->graph);
        std::copy(l.data(), l.data() + l.size(), out);
    });
}

// ---------------------------------------------------------------------------
// datasets

void mtlgr_synth_params_default(mtlgr_synth_params* params) {
    if (params == nullptr) return;
    const mtlgr::SynthParams d;
    *params = {d.features, d.tasks, d.rows, d.sparsity, d.noise_std, MTLGR_SUPPORT_CORRELATED, 0};
}

mtlgr_status mtlgr_dataset_synthetic(const mtlgr_synth_params* params, const mtlgr_graph* graph, uint64_t seed,
                                     mtlgr_dataset** out, mtlgr_model** truth) {
    return guarded([&] {
        require(params != nullptr && out != nullptr, "NULL argument");
        mtlgr::SynthParams p;
        p.features = params->features;
        p.tasks = params->tasks;
        p.rows = params->rows;
        p.sparsity = params->sparsity;
        p.noise_std = params->noise_std;
        switch (params->support) {
        case MTLGR_SUPPORT_CORRELATED: p.support = mtlgr::SupportMode::correlated; break;
        case MTLGR_SUPPORT_SHARED: p.support = mtlgr::SupportMode::shared; break;
        case MTLGR_SUPPORT_INDEPENDENT: p.support = mtlgr::SupportMode::independent; break;
        default: mtlgr::fail(mtlgr::Errc::invalid_argument, "unknown support mode");
        }
        p.shared_features = params->shared_features != 0;
        const mtlgr::TaskGraph g = graph ? graph->graph : mtlgr::chain_graph(p.tasks);
        auto [bundle, gt] = mtlgr::synth_generate(p, g, seed);
        auto data = std::make_unique<mtlgr_dataset>(mtlgr_dataset{std::move(bundle)});
        if (truth != nullptr) {
            mtlgr::SolverReport r;
            r.model = gt.true_model;
            r.converged = true;
            *truth = new mtlgr_model{std::move(r)};
        }
        *out = data.release();
    });
}

mtlgr_status mtlgr_dataset_create(int32_t features, mtlgr_dataset** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        require(features >= 1, "features must be positive");
        mtlgr::DatasetBundle bundle{{}, mtlgr::chain_graph(1), mtlgr::SplitTag::full, mtlgr::Provenance::csv, {}};
        for (int32_t j = 0; j < features; ++j) bundle.feature_names.push_back("f" + std::to_string(j));
        *out = new mtlgr_dataset{std::move(bundle)};
    });
}

mtlgr_status mtlgr_dataset_add_task(mtlgr_dataset* data, int32_t rows, const double* values, const uint8_t* mask,
                                    const double* response) {
    return guarded([&] {
        require(data != nullptr && values != nullptr && response != nullptr, "NULL argument");
        require(rows >= 1, "rows must be positive");
        const auto p = static_cast<Eigen::Index>(data->bundle.feature_names.size());
        Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(values, rows, p);
        mtlgr::Mask m = mtlgr::Mask::Constant(rows, p, true);
        if (mask != nullptr) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = mask[i] != 0;
        }
        Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(response, rows);
        data->bundle.tasks.push_back(mtlgr::make_task(std::move(x), std::move(m), std::move(y)));
        data->bundle.graph = mtlgr::chain_graph(data->bundle.task_count());
    });
}

mtlgr_status mtlgr_dataset_set_graph(mtlgr_dataset* data, const mtlgr_graph* graph) {
    return guarded([&] {
        require(data != nullptr && graph != nullptr, "NULL argument");
        require(graph->graph.task_count() == data->bundle.task_count(), "graph task count differs from dataset");
        data->bundle.graph = graph->graph;
    });
}

mtlgr_status mtlgr_dataset_load_csv(const char* const* paths, int32_t count, mtlgr_dataset** out) {
    return guarded([&] {
        require(out != nullptr && paths != nullptr && count > 0, "bad path list");
        std::vector<std::filesystem::path> list;
        for (int32_t i = 0; i < count; ++i) {
            require(paths[i] != nullptr, "NULL path");
            list.emplace_back(paths[i]);
        }
        *out = new mtlgr_dataset{mtlgr::load_task_csv(list)};
    });
}

mtlgr_status mtlgr_dataset_write_csv(const mtlgr_dataset* data, const char* dir, const char* stem) {
    return guarded([&] {
        require(data != nullptr && dir != nullptr && stem != nullptr, "NULL argument");
        mtlgr::write_task_csv(data->bundle, dir, stem);
    });
}

void mtlgr_dataset_free(mtlgr_dataset* data) { delete data; }

int32_t mtlgr_dataset_task_count(const mtlgr_dataset* data) { return data ? data->bundle.task_count() : 0; }

int32_t mtlgr_dataset_feature_count(const mtlgr_dataset* data) {
    return data ? static_cast<int32_t>(data->bundle.feature_names.size()) : 0;
}

int32_t mtlgr_dataset_rows(const mtlgr_dataset* data, int32_t task) {
    if (data == nullptr || task < 0 || task >= data->bundle.task_count()) return -1;
    return static_cast<int32_t>(data->bundle.tasks[static_cast<std::size_t>(task)].rows());
}

double mtlgr_dataset_missing_rate(const mtlgr_dataset* data, int32_t task) {
    if (data == nullptr || task < 0 || task >= data->bundle.task_count()) return kNaN;
    return data->bundle.tasks[static_cast<std::size_t>(task)].missing_rate;
}

mtlgr_status mtlgr_dataset_response(const mtlgr_dataset* data, int32_t task, double* out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        const auto& t = task_at(data, task);
        std::copy(t.response.data(), t.response.data() + t.response.size(), out);
    });
}

mtlgr_status mtlgr_dataset_inject_mcar(const mtlgr_dataset* data, double fraction, uint64_t seed,
                                       mtlgr_dataset** out) {
    return guarded([&] {
        require(data != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_dataset{mtlgr::inject_mcar(data->bundle, fraction, seed)};
    });
}

mtlgr_status mtlgr_dataset_l2_normalize(const mtlgr_dataset* data, mtlgr_dataset** out) {
    return guarded([&] {
        require(data != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_dataset{mtlgr::l2_normalize(data->bundle)};
    });
}

mtlgr_status mtlgr_dataset_scale_like(const mtlgr_dataset* data, const mtlgr_dataset* reference,
                                      mtlgr_dataset** out) {
    return guarded([&] {
        require(data != nullptr && reference != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_dataset{mtlgr::scale_columns(data->bundle, mtlgr::column_norms(reference->bundle))};
    });
}

mtlgr_status mtlgr_dataset_split(const mtlgr_dataset* data, double train_fraction, uint64_t seed,
                                 mtlgr_dataset** train, mtlgr_dataset** test) {
    return guarded([&] {
        require(data != nullptr && train != nullptr && test != nullptr, "NULL argument");
        auto [a, b] = mtlgr::train_test_split(data->bundle, train_fraction, seed);
        auto first = std::make_unique<mtlgr_dataset>(mtlgr_dataset{std::move(a)});
        *test = new mtlgr_dataset{std::move(b)};
        *train = first.release();
    });
}

mtlgr_status mtlgr_dataset_moments(const mtlgr_dataset* data, int32_t task, mtlgr_method method,
                                   const mtlgr_hyper* hyper, double* gamma_mat, double* gamma_vec) {
    return guarded([&] {
        require(hyper != nullptr && gamma_mat != nullptr && gamma_vec != nullptr, "NULL argument");
        const auto& t = task_at(data, task);
        mtlgr::DatasetBundle single{{t}, mtlgr::chain_graph(1), data->bundle.split, data->bundle.provenance, {}};
        const auto m = method_moments(single, to_method(method), *hyper).front();
        std::copy(m.gamma_mat.data(), m.gamma_mat.data() + m.gamma_mat.size(), gamma_mat);
        std::copy(m.gamma_vec.data(), m.gamma_vec.data() + m.gamma_vec.size(), gamma_vec);
    });
}

// ---------------------------------------------------------------------------
// fitting

void mtlgr_solver_settings_default(mtlgr_solver_settings* settings) {
    if (settings == nullptr) return;
    const mtlgr::SolverSettings d;
    *settings = {d.max_iters, d.tol, 0.0};
}

mtlgr_status mtlgr_fit(const mtlgr_dataset* train, mtlgr_method method, const mtlgr_hyper* hyper,
                       const mtlgr_solver_settings* settings, mtlgr_model** out) {
    return guarded([&] {
        require(train != nullptr && hyper != nullptr && out != nullptr, "NULL argument");
        require(train->bundle.task_count() > 0, "dataset has no tasks");
        const auto moments = method_moments(train->bundle, to_method(method), *hyper);
        const mtlgr::Hyperparams h{hyper->mu, hyper->lambda, hyper->delta};
        *out = new mtlgr_model{
            mtlgr::fit(moments, h, mtlgr::build_incidence(train->bundle.graph), to_settings(settings))};
    });
}

void mtlgr_model_free(mtlgr_model* model) { delete model; }

int32_t mtlgr_model_feature_count(const mtlgr_model* model) {
    return model ? static_cast<int32_t>(model->report.model.features()) : 0;
}

int32_t mtlgr_model_task_count(const mtlgr_model* model) {
    return model ? static_cast<int32_t>(model->report.model.tasks()) : 0;
}

mtlgr_status mtlgr_model_coefficients(const mtlgr_model* model, double* out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr, "NULL argument");
        const auto& w = model->report.model.coefficients;
        std::copy(w.data(), w.data() + w.size(), out);
    });
}

int32_t mtlgr_model_iterations(const mtlgr_model* model) { return model ? model->report.iterations : 0; }

int32_t mtlgr_model_converged(const mtlgr_model* model) { return model && model->report.converged ? 1 : 0; }

double mtlgr_model_final_objective(const mtlgr_model* model) {
    if (model == nullptr || model->report.objective_trace.empty()) return kNaN;
    return model->report.objective_trace.back();
}

mtlgr_status mtlgr_model_write_csv(const mtlgr_model* model, const char* path) {
    return guarded([&] {
        require(model != nullptr && path != nullptr, "NULL argument");
        std::ofstream out(path, std::ios::binary);
        if (!out) mtlgr::fail(mtlgr::Errc::io, std::string("cannot write ") + path);
        const auto& w = model->report.model.coefficients;
        out << "feature";
        for (Eigen::Index t = 0; t < w.cols(); ++t) out << ",task_" << (t + 1);
        out << '\n';
        for (Eigen::Index j = 0; j < w.rows(); ++j) {
            out << 'f' << j;
            for (Eigen::Index t = 0; t < w.cols(); ++t) out << ',' << mtlgr::format_double(w(j, t));
            out << '\n';
        }
        if (!out) mtlgr::fail(mtlgr::Errc::io, std::string("write failed for ") + path);
    });
}

mtlgr_status mtlgr_model_predict(const mtlgr_model* model, const mtlgr_dataset* data, const mtlgr_dataset* fill_from,
                                 int32_t task, double* out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr, "NULL argument");
        const auto& t = task_at(data, task);
        const auto& reference = task_at(fill_from ? fill_from : data, task);
        require(task < model->report.model.tasks(), "model has fewer tasks than the dataset");
        const Eigen::MatrixXd x = mtlgr::fill_missing(t, mtlgr::observed_column_means(reference));
        const Eigen::VectorXd y = mtlgr::predict(x, model->report.model.coefficients.col(task));
        std::copy(y.data(), y.data() + y.size(), out);
    });
}

mtlgr_status mtlgr_evaluate(const mtlgr_model* model, const mtlgr_dataset* test, const mtlgr_dataset* train,
                            double* prediction_nmse, double* rmse) {
    return guarded([&] {
        require(model != nullptr && test != nullptr, "NULL argument");
        const mtlgr_dataset* reference = train ? train : test;
        require(test->bundle.task_count() == model->report.model.tasks(), "task count mismatch");
        std::vector<Eigen::VectorXd> predictions;
        std::vector<Eigen::VectorXd> actuals;
        for (int32_t t = 0; t < test->bundle.task_count(); ++t) {
            const auto& task = task_at(test, t);
            const Eigen::MatrixXd x = mtlgr::fill_missing(task, mtlgr::observed_column_means(task_at(reference, t)));
            predictions.push_back(mtlgr::predict(x, model->report.model.coefficients.col(t)));
            actuals.push_back(task.response);
        }
        if (prediction_nmse) *prediction_nmse = mtlgr::prediction_nmse(predictions, actuals);
        if (rmse) *rmse = mtlgr::prediction_rmse(predictions, actuals);
    });
}

mtlgr_status mtlgr_nmse_model(const mtlgr_model* estimate, const mtlgr_model* truth, double* out) {
    return guarded([&] {
        require(estimate != nullptr && truth != nullptr && out != nullptr, "NULL argument");
        *out = mtlgr::nmse_model(estimate->report.model, truth->report.model);
    });
}

// ---------------------------------------------------------------------------
// experiments

mtlgr_status mtlgr_config_default(mtlgr_config** out) {
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        *out = new mtlgr_config{mtlgr::parse_config("{}")};
    });
}

mtlgr_status mtlgr_config_load(const char* path, mtlgr_config** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_config{mtlgr::load_config(path)};
    });
}

mtlgr_status mtlgr_config_parse(const char* json, const char* base_dir, mtlgr_config** out) {
    return guarded([&] {
        require(json != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_config{mtlgr::parse_config(json, base_dir ? base_dir : "")};
    });
}

void mtlgr_config_free(mtlgr_config* config) { delete config; }

mtlgr_status mtlgr_config_set_seed(mtlgr_config* config, uint64_t seed) {
    return guarded([&] {
        require(config != nullptr, "config is NULL");
        config->config.base_seed = seed;
    });
}

mtlgr_status mtlgr_config_set_output_dir(mtlgr_config* config, const char* dir) {
    return guarded([&] {
        require(config != nullptr && dir != nullptr, "NULL argument");
        config->config.output_dir = dir;
    });
}

mtlgr_status mtlgr_config_set_threads(mtlgr_config* config, int32_t threads) {
    return guarded([&] {
        require(config != nullptr, "config is NULL");
        require(threads >= 1, "threads must be >= 1");
        config->config.threads = threads;
    });
}

mtlgr_status mtlgr_config_set_methods(mtlgr_config* config, const mtlgr_method* methods, int32_t count) {
    return guarded([&] {
        require(config != nullptr && methods != nullptr && count > 0, "bad method list");
        std::vector<mtlgr::Method> list;
        for (int32_t i = 0; i < count; ++i) list.push_back(to_method(methods[i]));
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        config->config.methods = std::move(list);
    });
}

mtlgr_status mtlgr_config_hash(const mtlgr_config* config, char* buf, size_t len) {
    return guarded([&] {
        require(config != nullptr && buf != nullptr && len >= 17, "hash buffer needs 17 bytes");
        copy_string(mtlgr::config_hash(config->config), buf, len);
    });
}

int32_t mtlgr_config_level_count(const mtlgr_config* config) {
    return config ? static_cast<int32_t>(config->config.missing_levels.size()) : 0;
}

uint64_t mtlgr_config_seed(const mtlgr_config* config) { return config ? config->config.base_seed : 0; }

mtlgr_status mtlgr_config_generate(const mtlgr_config* config, uint64_t seed, mtlgr_dataset** out,
                                   mtlgr_model** truth) {
    return guarded([&] {
        require(config != nullptr && out != nullptr, "NULL argument");
        const auto* source = std::get_if<mtlgr::SyntheticSource>(&config->config.source);
        if (source == nullptr) mtlgr::fail(mtlgr::Errc::config, "config data source is not synthetic");
        auto [bundle, gt] = mtlgr::synth_generate(source->params, mtlgr::resolve_graph(config->config),
                                                  mtlgr::derive_seed(seed, {0}));
        if (source->base_missing > 0.0) {
            bundle = mtlgr::inject_mcar(bundle, source->base_missing, mtlgr::derive_seed(seed, {1}));
        }
        auto data = std::make_unique<mtlgr_dataset>(mtlgr_dataset{std::move(bundle)});
        if (truth != nullptr) {
            mtlgr::SolverReport r;
            r.model = gt.true_model;
            r.converged = true;
            *truth = new mtlgr_model{std::move(r)};
        }
        *out = data.release();
    });
}

mtlgr_status mtlgr_sweep_run(const mtlgr_config* config, mtlgr_sweep** out) {
    return guarded([&] {
        require(config != nullptr && out != nullptr, "NULL argument");
        *out = new mtlgr_sweep{mtlgr::run_sweep(config->config)};
    });
}

void mtlgr_sweep_free(mtlgr_sweep* sweep) { delete sweep; }

int64_t mtlgr_sweep_row_count(const mtlgr_sweep* sweep) {
    return sweep ? static_cast<int64_t>(sweep->result.rows.size()) : 0;
}

mtlgr_status mtlgr_sweep_row(const mtlgr_sweep* sweep, int64_t index, mtlgr_result_row* out) {
    return guarded([&] {
        require(sweep != nullptr && out != nullptr, "NULL argument");
        require(index >= 0 && index < static_cast<int64_t>(sweep->result.rows.size()), "row index out of range");
        const auto& r = sweep->result.rows[static_cast<std::size_t>(index)];
        out->method = from_method(r.method);
        out->missing_fraction = r.missing_fraction;
        out->replication = r.replication;
        out->nmse_w = r.nmse_w.value_or(kNaN);
        out->nmse_gamma = r.nmse_gamma.value_or(kNaN);
        out->prediction_nmse = r.prediction_nmse.value_or(kNaN);
        out->rmse = r.rmse.value_or(kNaN);
        out->hyper = {r.hyper.mu, r.hyper.lambda, r.hyper.delta, r.hyper.rank};
        out->runtime_ms = r.runtime_ms;
        out->converged = r.converged ? 1 : 0;
        out->iterations = r.iterations;
    });
}

const char* mtlgr_sweep_row_note(const mtlgr_sweep* sweep, int64_t index) {
    if (sweep == nullptr || index < 0 || index >= static_cast<int64_t>(sweep->result.rows.size())) return nullptr;
    return sweep->result.rows[static_cast<std::size_t>(index)].note.c_str();
}

mtlgr_status mtlgr_sweep_write(const mtlgr_sweep* sweep, const mtlgr_config* config, char* raw_path, size_t len) {
    return guarded([&] {
        require(sweep != nullptr && config != nullptr, "NULL argument");
        const auto files = mtlgr::emit_results(sweep->result, config->config);
        copy_string(files.raw.string(), raw_path, len);
    });
}

mtlgr_status mtlgr_tune(const mtlgr_config* config, mtlgr_method method, int32_t level_index, mtlgr_hyper* chosen,
                        double* criterion) {
    return guarded([&] {
        require(config != nullptr && chosen != nullptr, "NULL argument");
        std::optional<std::size_t> level;
        if (level_index >= 0) level = static_cast<std::size_t>(level_index);
        const auto outcome = mtlgr::tune_grid(config->config, to_method(method), level);
        *chosen = {outcome.chosen.mu, outcome.chosen.lambda, outcome.chosen.delta, outcome.chosen.rank};
        if (criterion != nullptr) {
            for (const auto& s : outcome.scores) {
                if (s.point == outcome.chosen) *criterion = s.criterion.value_or(kNaN);
            }
        }
    });
}

mtlgr_status mtlgr_tune_write(const mtlgr_config* config, char* path, size_t len) {
    return guarded([&] {
        require(config != nullptr, "config is NULL");
        const auto& cfg = config->config;
        std::vector<mtlgr::TuningOutcome> outcomes;
        for (auto method : cfg.methods) {
            if (cfg.scope == mtlgr::TuningScope::global) {
                outcomes.push_back(mtlgr::tune_grid(cfg, method, std::nullopt));
            } else {
                for (std::size_t l = 0; l < cfg.missing_levels.size(); ++l) {
                    outcomes.push_back(mtlgr::tune_grid(cfg, method, l));
                }
            }
        }
        copy_string(mtlgr::emit_tuning(outcomes, cfg).string(), path, len);
    });
}

mtlgr_status mtlgr_weibull_fit(const double* samples, int64_t count, double* shape, double* scale) {
    return guarded([&] {
        require(samples != nullptr && shape != nullptr && scale != nullptr && count >= 0, "bad argument");
        const auto fit = mtlgr::weibull_fit(std::span<const double>(samples, static_cast<std::size_t>(count)));
        *shape = fit.shape;
        *scale = fit.scale;
    });
}

double mtlgr_weibull_pdf(double x, double shape, double scale) { return mtlgr::weibull_pdf(x, shape, scale); }

}  // extern "C"
