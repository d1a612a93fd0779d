/// @file spatial.hpp
/// @brief Exact nearest-neighbor index over 3D point clouds (k-d tree).
///
/// Exactness matters: downstream gradients depend on the argmin identity of
/// the nearest-neighbor assignment, so approximate search is not an option.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace morphassim {

class KdTree {
  public:
    /// Builds the index; points are copied. Throws SchemaError when empty.
    explicit KdTree(const Eigen::MatrixX3d& points);

    /// Index (into the construction matrix) and squared distance of the
    /// exact nearest point to q. Ties resolve to the lowest point index.
    struct Hit {
        int index;
        double sq_dist;
    };
    Hit nearest(const Eigen::Vector3d& q) const;

    /// Exact k nearest points, ascending by (squared distance, index).
    /// k is clamped to the point count.
    std::vector<Hit> knn(const Eigen::Vector3d& q, int k) const;

    Eigen::Index size() const { return pts_.rows(); }
    const Eigen::MatrixX3d& points() const { return pts_; }

  private:
    struct Node {
        int axis = -1;          // -1 marks a leaf
        double split = 0.0;     // coordinate of the splitting plane
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    int build(int begin, int end);
    void search(int node, const Eigen::Vector3d& q, Hit& best) const;
    void search_k(int node, const Eigen::Vector3d& q, std::size_t k,
                  std::vector<Hit>& heap) const;

    Eigen::MatrixX3d pts_;
    std::vector<int> order_;  // permutation of point ids, partitioned by the tree
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace morphassim
