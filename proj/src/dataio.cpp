#include "mtlgr/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mtlgr/error.hpp"
#include "mtlgr/random.hpp"

namespace mtlgr {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool is_missing_token(const std::string& cell) {
    if (cell.empty()) return true;
    if (cell.size() != 2) return false;
    return (cell[0] == 'N' || cell[0] == 'n') && (cell[1] == 'A' || cell[1] == 'a');
}

double parse_number(const std::string& cell, const std::string& where) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        fail(Errc::invalid_data, where + ": cannot parse '" + cell + "' as a number");
    }
    return value;
}

struct ParsedCsv {
    std::vector<std::string> header;
    MaskedTaskData task;
};

ParsedCsv parse_task_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(Errc::schema, path.string() + ": missing header row");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    ParsedCsv out;
    out.header = split_fields(line);
    if (out.header.size() < 2 || out.header.back() != "target") {
        fail(Errc::schema, path.string() + ": header must list feature columns followed by 'target'");
    }
    const std::size_t p = out.header.size() - 1;

    std::vector<std::vector<double>> rows;
    std::vector<std::vector<bool>> observed;
    std::vector<double> targets;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != p + 1) {
            fail(Errc::invalid_data, where + ": expected " + std::to_string(p + 1) + " fields, got " +
                                         std::to_string(fields.size()));
        }
        std::vector<double> row(p, 0.0);
        std::vector<bool> seen(p, false);
        for (std::size_t j = 0; j < p; ++j) {
            if (is_missing_token(fields[j])) continue;
            row[j] = parse_number(fields[j], where);
            seen[j] = true;
        }
        if (is_missing_token(fields[p])) fail(Errc::invalid_data, where + ": target value is missing");
        targets.push_back(parse_number(fields[p], where));
        rows.push_back(std::move(row));
        observed.push_back(std::move(seen));
    }
    if (in.bad()) fail(Errc::io, "read error on " + path.string());
    if (rows.empty()) fail(Errc::invalid_data, path.string() + ": no data rows");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd values(n, static_cast<Eigen::Index>(p));
    Mask mask(n, static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
            values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            mask(i, j) = observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        y[i] = targets[static_cast<std::size_t>(i)];
    }
    try {
        out.task = make_task(std::move(values), std::move(mask), std::move(y));
    } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

DatasetBundle load_task_csv(std::span<const std::filesystem::path> paths) {
    if (paths.empty()) fail(Errc::invalid_argument, "no CSV files given");
    std::vector<MaskedTaskData> tasks;
    std::vector<std::string> header;
    for (const auto& path : paths) {
        ParsedCsv parsed = parse_task_file(path);
        if (tasks.empty()) {
            header = parsed.header;
        } else if (parsed.header != header) {
            fail(Errc::schema, path.string() + ": header differs from " + paths.front().string());
        }
        tasks.push_back(std::move(parsed.task));
    }
    header.pop_back();
    const int k = static_cast<int>(tasks.size());
    return DatasetBundle{std::move(tasks), chain_graph(k), SplitTag::full, Provenance::csv, std::move(header)};
}

std::vector<std::filesystem::path> write_task_csv(const DatasetBundle& bundle, const std::filesystem::path& dir,
                                                  const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> paths;
    for (int t = 0; t < bundle.task_count(); ++t) {
        const auto& task = bundle.tasks[static_cast<std::size_t>(t)];
        const auto path = dir / (stem + "_" + std::to_string(t + 1) + ".csv");
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(Errc::io, "cannot write " + path.string());
        for (Eigen::Index j = 0; j < task.features(); ++j) {
            out << (j < static_cast<Eigen::Index>(bundle.feature_names.size())
                        ? bundle.feature_names[static_cast<std::size_t>(j)]
                        : "f" + std::to_string(j))
                << ',';
        }
        out << "target\n";
        for (Eigen::Index i = 0; i < task.rows(); ++i) {
            for (Eigen::Index j = 0; j < task.features(); ++j) {
                out << (task.mask(i, j) ? format_double(task.values(i, j)) : std::string("NA")) << ',';
            }
            out << format_double(task.response[i]) << '\n';
        }
        if (!out) fail(Errc::io, "write failed for " + path.string());
        paths.push_back(path);
    }
    return paths;
}

std::vector<Eigen::VectorXd> column_norms(const DatasetBundle& bundle) {
    std::vector<Eigen::VectorXd> norms;
    for (const auto& task : bundle.tasks) {
        norms.push_back(task.mask.select(task.values, 0.0).colwise().norm().transpose());
    }
    return norms;
}

DatasetBundle scale_columns(const DatasetBundle& bundle, const std::vector<Eigen::VectorXd>& norms) {
    if (norms.size() != bundle.tasks.size()) fail(Errc::invalid_argument, "one norm vector per task required");
    DatasetBundle out = bundle;
    for (std::size_t t = 0; t < out.tasks.size(); ++t) {
        auto& task = out.tasks[t];
        const auto& norm = norms[t];
        if (norm.size() != task.features()) fail(Errc::invalid_argument, "norm vector length mismatch");
        for (Eigen::Index j = 0; j < task.features(); ++j) {
            if (!(norm[j] > 0.0)) {
                fail(Errc::degenerate_column, "task " + std::to_string(t + 1) + " feature " + std::to_string(j) +
                                                  " has zero observed norm");
            }
            for (Eigen::Index i = 0; i < task.rows(); ++i) {
                if (task.mask(i, j)) task.values(i, j) /= norm[j];
            }
        }
    }
    return out;
}

DatasetBundle l2_normalize(const DatasetBundle& bundle) { return scale_columns(bundle, column_norms(bundle)); }

std::pair<DatasetBundle, DatasetBundle> train_test_split(const DatasetBundle& bundle, double train_fraction,
                                                         std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        fail(Errc::invalid_argument, "train fraction must lie in (0, 1)");
    }
    DatasetBundle train{{}, bundle.graph, SplitTag::train, bundle.provenance, bundle.feature_names};
    DatasetBundle test{{}, bundle.graph, SplitTag::test, bundle.provenance, bundle.feature_names};
    for (std::size_t t = 0; t < bundle.tasks.size(); ++t) {
        const auto& task = bundle.tasks[t];
        const auto n = task.rows();
        const auto n_train = static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(n)));
        if (n_train < 1 || n_train >= n) {
            fail(Errc::invalid_argument, "task " + std::to_string(t + 1) + " with " + std::to_string(n) +
                                             " rows leaves an empty split side");
        }
        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(derive_seed(seed, {t}));
        std::shuffle(order.begin(), order.end(), rng);
        auto take = [&](Eigen::Index from, Eigen::Index count) {
            std::vector<Eigen::Index> idx(order.begin() + from, order.begin() + from + count);
            std::sort(idx.begin(), idx.end());
            Eigen::MatrixXd x(count, task.features());
            Mask m(count, task.features());
            Eigen::VectorXd y(count);
            for (Eigen::Index r = 0; r < count; ++r) {
                const auto src = idx[static_cast<std::size_t>(r)];
                x.row(r) = task.values.row(src);
                m.row(r) = task.mask.row(src);
                y[r] = task.response[src];
            }
            try {
                return make_task(std::move(x), std::move(m), std::move(y));
            } catch (const Error& e) {
                fail(e.code(), "task " + std::to_string(t + 1) + " after split: " + e.what());
            }
        };
        train.tasks.push_back(take(0, n_train));
        test.tasks.push_back(take(n_train, n - n_train));
    }
    return {std::move(train), std::move(test)};
}

Eigen::VectorXd observed_column_means(const MaskedTaskData& task) {
    Eigen::VectorXd means = Eigen::VectorXd::Zero(task.features());
    for (Eigen::Index j = 0; j < task.features(); ++j) {
        const auto count = task.mask.col(j).count();
        if (count > 0) means[j] = task.mask.col(j).select(task.values.col(j), 0.0).sum() / static_cast<double>(count);
    }
    return means;
}

Eigen::MatrixXd fill_missing(const MaskedTaskData& task, const Eigen::VectorXd& fill) {
    if (fill.size() != task.features()) fail(Errc::invalid_argument, "fill vector length mismatch");
    Eigen::MatrixXd out = task.values;
    for (Eigen::Index j = 0; j < task.features(); ++j) {
        for (Eigen::Index i = 0; i < task.rows(); ++i) {
            if (!task.mask(i, j)) out(i, j) = fill[j];
        }
    }
    return out;
}

double nmse_model(const ModelMatrix& estimate, const ModelMatrix& truth) {
    if (estimate.coefficients.rows() != truth.coefficients.rows() ||
        estimate.coefficients.cols() != truth.coefficients.cols()) {
        fail(Errc::invalid_argument, "model shapes differ");
    }
    const double denom = truth.coefficients.squaredNorm();
    if (!(denom > 0.0)) fail(Errc::invalid_argument, "true model is zero");
    return (estimate.coefficients - truth.coefficients).squaredNorm() / denom;
}

double nmse_cov(std::span<const Eigen::MatrixXd> estimates, std::span<const Eigen::MatrixXd> truths) {
    if (estimates.size() != truths.size() || truths.empty()) {
        fail(Errc::invalid_argument, "need equally many, and at least one, covariance estimates and truths");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (estimates[i].rows() != truths[i].rows() || estimates[i].cols() != truths[i].cols()) {
            fail(Errc::invalid_argument, "covariance shapes differ for task " + std::to_string(i + 1));
        }
        const double denom = truths[i].squaredNorm();
        if (!(denom > 0.0)) fail(Errc::invalid_argument, "true covariance is zero for task " + std::to_string(i + 1));
        total += (estimates[i] - truths[i]).squaredNorm() / denom;
    }
    return total / static_cast<double>(truths.size());
}

namespace {

void check_prediction_shapes(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> actuals) {
    if (predictions.size() != actuals.size() || actuals.empty()) {
        fail(Errc::invalid_argument, "need one prediction vector per task");
    }
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        if (predictions[i].size() != actuals[i].size()) {
            fail(Errc::invalid_argument, "prediction length differs for task " + std::to_string(i + 1));
        }
    }
}

}  // namespace

double prediction_nmse(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> actuals) {
    check_prediction_shapes(predictions, actuals);
    double total = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        const double denom = actuals[i].squaredNorm();
        if (!(denom > 0.0)) fail(Errc::invalid_argument, "actual response is zero for task " + std::to_string(i + 1));
        total += (predictions[i] - actuals[i]).squaredNorm() / denom;
    }
    return total;
}

double prediction_rmse(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> actuals) {
    check_prediction_shapes(predictions, actuals);
    double sse = 0.0;
    Eigen::Index count = 0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        sse += (predictions[i] - actuals[i]).squaredNorm();
        count += actuals[i].size();
    }
    if (count == 0) fail(Errc::invalid_argument, "no predictions");
    return std::sqrt(sse / static_cast<double>(count));
}

}  // namespace mtlgr
