#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mtlgr {

/// Undirected task-relatedness graph. Tasks are 0-based internally; edges
/// keep insertion order so the incidence matrix columns are reproducible.
/// Immutable after construction.
class TaskGraph {
public:
    using Edge = std::pair<int, int>;

    /// Edges are 0-based and may be given in either orientation; they are
    /// stored smaller-index-first. Self-loops, out-of-range endpoints and
    /// duplicates throw Errc::invalid_argument.
    TaskGraph(int task_count, const std::vector<Edge>& edges);

    /// Same as the constructor but with 1-based task indices, as used in
    /// config files and the C API.
    static TaskGraph from_one_based(int task_count, const std::vector<Edge>& edges);

    int task_count() const noexcept { return task_count_; }
    int edge_count() const noexcept { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    int max_degree() const noexcept;

private:
    int task_count_;
    std::vector<Edge> edges_;
};

/// Path graph 1-2-...-K.
TaskGraph chain_graph(int task_count);

/// K x |E| signed incidence matrix: +1 at the smaller endpoint of each edge,
/// -1 at the larger, 0 elsewhere. Stored as integers.
Eigen::MatrixXi build_incidence(const TaskGraph& graph);

/// R * R^T, i.e. degree matrix minus adjacency.
Eigen::MatrixXd laplacian(const TaskGraph& graph);

}  // namespace mtlgr
