#include "mtlgr/taskgraph.hpp"

#include <algorithm>
#include <string>

#include "mtlgr/error.hpp"

namespace mtlgr {

TaskGraph::TaskGraph(int task_count, const std::vector<Edge>& edges) : task_count_(task_count) {
    if (task_count < 1) {
        fail(Errc::invalid_argument, "task graph needs at least one task, got " + std::to_string(task_count));
    }
    edges_.reserve(edges.size());
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= task_count || b >= task_count) {
            fail(Errc::invalid_argument, "edge (" + std::to_string(a + 1) + ", " + std::to_string(b + 1) +
                                             ") references a task outside 1.." + std::to_string(task_count));
        }
        if (a == b) {
            fail(Errc::invalid_argument, "self-loop on task " + std::to_string(a + 1));
        }
        Edge e = a < b ? Edge{a, b} : Edge{b, a};
        if (std::find(edges_.begin(), edges_.end(), e) != edges_.end()) {
            fail(Errc::invalid_argument,
                 "duplicate edge (" + std::to_string(e.first + 1) + ", " + std::to_string(e.second + 1) + ")");
        }
        edges_.push_back(e);
    }
}

TaskGraph TaskGraph::from_one_based(int task_count, const std::vector<Edge>& edges) {
    std::vector<Edge> shifted;
    shifted.reserve(edges.size());
    for (auto [a, b] : edges) shifted.emplace_back(a - 1, b - 1);
    return TaskGraph(task_count, shifted);
}

int TaskGraph::max_degree() const noexcept {
    std::vector<int> degree(static_cast<std::size_t>(task_count_), 0);
    for (auto [a, b] : edges_) {
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    }
    return *std::max_element(degree.begin(), degree.end());
}

TaskGraph chain_graph(int task_count) {
    if (task_count < 1) {
        fail(Errc::invalid_argument, "chain graph needs at least one task, got " + std::to_string(task_count));
    }
    std::vector<TaskGraph::Edge> edges;
    for (int i = 0; i + 1 < task_count; ++i) edges.emplace_back(i, i + 1);
    return TaskGraph(task_count, edges);
}

Eigen::MatrixXi build_incidence(const TaskGraph& graph) {
    Eigen::MatrixXi r = Eigen::MatrixXi::Zero(graph.task_count(), graph.edge_count());
    int j = 0;
    for (auto [lo, hi] : graph.edges()) {
        r(lo, j) = 1;
        r(hi, j) = -1;
        ++j;
    }
    return r;
}

Eigen::MatrixXd laplacian(const TaskGraph& graph) {
    const Eigen::MatrixXi r = build_incidence(graph);
    const Eigen::MatrixXi l = r * r.transpose();
    return l.cast<double>();
}

}  // namespace mtlgr
