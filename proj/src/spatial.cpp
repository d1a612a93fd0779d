/// @file spatial.cpp
/// @brief Median-split k-d tree with exact nearest-neighbor queries.
#include "morphassim/spatial.hpp"

#include <algorithm>
#include <limits>

#include "morphassim/errors.hpp"

namespace morphassim {

namespace {
constexpr int kLeafSize = 8;
}

KdTree::KdTree(const Eigen::MatrixX3d& points) : pts_(points) {
    if (pts_.rows() == 0) throw SchemaError("KdTree: empty point set");
    order_.resize(static_cast<std::size_t>(pts_.rows()));
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(static_cast<std::size_t>(2 * pts_.rows() / kLeafSize + 8));
    root_ = build(0, static_cast<int>(pts_.rows()));
}

int KdTree::build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
        node.begin = begin;
        node.end = end;
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size() - 1);
    }

    // Split on the widest axis at the median point.
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(pts_.row(order_[static_cast<std::size_t>(i)]).transpose());
        hi = hi.cwiseMax(pts_.row(order_[static_cast<std::size_t>(i)]).transpose());
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         const double ca = pts_(a, axis), cb = pts_(b, axis);
                         return ca < cb || (ca == cb && a < b);
                     });
    node.axis = axis;
    node.split = pts_(order_[static_cast<std::size_t>(mid)], axis);

    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
}

void KdTree::search(int ni, const Eigen::Vector3d& q, Hit& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int id = order_[static_cast<std::size_t>(i)];
            const double d2 = (pts_.row(id).transpose() - q).squaredNorm();
            if (d2 < best.sq_dist || (d2 == best.sq_dist && id < best.index)) {
                best.sq_dist = d2;
                best.index = id;
            }
        }
        return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (delta * delta <= best.sq_dist) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Eigen::Vector3d& q) const {
    Hit best{-1, std::numeric_limits<double>::infinity()};
    search(root_, q, best);
    return best;
}

namespace {
// Max-heap order on (sq_dist, index): the worst of the current k sits on top.
bool hit_less(const KdTree::Hit& a, const KdTree::Hit& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}
}  // namespace

void KdTree::search_k(int ni, const Eigen::Vector3d& q, std::size_t k,
                      std::vector<Hit>& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int id = order_[static_cast<std::size_t>(i)];
            const Hit cand{id, (pts_.row(id).transpose() - q).squaredNorm()};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end(), hit_less);
            } else if (hit_less(cand, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), hit_less);
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end(), hit_less);
            }
        }
        return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_k(near, q, k, heap);
    if (heap.size() < k || delta * delta <= heap.front().sq_dist) search_k(far, q, k, heap);
}

std::vector<KdTree::Hit> KdTree::knn(const Eigen::Vector3d& q, int k) const {
    if (k <= 0) throw SchemaError("KdTree::knn: k must be positive");
    const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                   static_cast<std::size_t>(pts_.rows()));
    std::vector<Hit> heap;
    heap.reserve(want);
    search_k(root_, q, want, heap);
    std::sort(heap.begin(), heap.end(), hit_less);
    return heap;
}

}  // namespace morphassim
