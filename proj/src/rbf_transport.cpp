/// @file rbf_transport.cpp
/// @brief Local thin-plate-spline interpolation and field transport.
#include "morphassim/rbf_transport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <vector>

#include "morphassim/detail/le_io.hpp"
#include "morphassim/errors.hpp"
#include "morphassim/spatial.hpp"

namespace morphassim {

namespace {

/// φ(r) = r²·ln r evaluated from the squared distance; φ(0) = 0.
double tps_kernel_sq(double sq_dist) {
    if (sq_dist <= 0.0) return 0.0;
    return 0.5 * sq_dist * std::log(sq_dist);
}

}  // namespace

RbfMap fit_rbf_map(const Eigen::MatrixX3d& centers, const Eigen::MatrixXd& values, int k) {
    if (centers.rows() == 0) throw SchemaError("fit_rbf_map: no centers");
    if (centers.rows() != values.rows())
        throw SchemaError("fit_rbf_map: center/value row mismatch");
    if (!centers.allFinite() || !values.allFinite())
        throw SchemaError("fit_rbf_map: non-finite data");
    if (k < 1 || k > centers.rows())
        throw SchemaError("fit_rbf_map: k must be in [1, center count]");

    // Duplicate centers would make every neighborhood containing the pair
    // singular; reject them up front.
    std::vector<int> idx(static_cast<std::size_t>(centers.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        for (int c = 0; c < 3; ++c) {
            if (centers(a, c) != centers(b, c)) return centers(a, c) < centers(b, c);
        }
        return a < b;
    });
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (centers.row(idx[i - 1]) == centers.row(idx[i]))
            throw SchemaError("fit_rbf_map: duplicate center at rows " +
                              std::to_string(idx[i - 1]) + " and " + std::to_string(idx[i]));

    return RbfMap{centers, values, k, "tps-r2lnr"};
}

Eigen::MatrixXd rbf_interpolate(const RbfMap& map, const Eigen::MatrixX3d& queries) {
    if (map.kernel != "tps-r2lnr")
        throw SchemaError("rbf_interpolate: unknown kernel '" + map.kernel + "'");
    if (!queries.allFinite()) throw SchemaError("rbf_interpolate: non-finite query");
    const Eigen::Index d = map.values.cols();
    Eigen::MatrixXd out(queries.rows(), d);
    if (queries.rows() == 0) return out;

    const KdTree tree(map.centers);
    const int k = std::min<int>(map.k, static_cast<int>(map.centers.rows()));
    const int m = k + 4;  // kernel weights + linear tail (1, x, y, z)

    Eigen::MatrixXd A(m, m);
    Eigen::MatrixXd rhs(m, d);
    for (Eigen::Index qi = 0; qi < queries.rows(); ++qi) {
        const Eigen::Vector3d q = queries.row(qi).transpose();
        const auto hits = tree.knn(q, k);

        A.setZero();
        rhs.setZero();
        for (int i = 0; i < k; ++i) {
            const Eigen::Vector3d ci = map.centers.row(hits[static_cast<std::size_t>(i)].index).transpose();
            for (int j = i + 1; j < k; ++j) {
                const Eigen::Vector3d cj =
                    map.centers.row(hits[static_cast<std::size_t>(j)].index).transpose();
                const double phi = tps_kernel_sq((ci - cj).squaredNorm());
                A(i, j) = phi;
                A(j, i) = phi;
            }
            A(i, k) = 1.0;
            A.block<1, 3>(i, k + 1) = ci.transpose();
            A(k, i) = 1.0;
            A.block<3, 1>(k + 1, i) = ci;
            rhs.row(i) = map.values.row(hits[static_cast<std::size_t>(i)].index);
        }

        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible())
            throw NumericalError("rbf_interpolate: singular local system at query index " +
                                 std::to_string(qi) + " (degenerate neighborhood)");
        const Eigen::MatrixXd sol = lu.solve(rhs);

        Eigen::RowVectorXd val = sol.row(k);  // constant tail term
        val += q.transpose() * sol.bottomRows(3);
        for (int i = 0; i < k; ++i) {
            const Eigen::Vector3d ci = map.centers.row(hits[static_cast<std::size_t>(i)].index).transpose();
            val += tps_kernel_sq((q - ci).squaredNorm()) * sol.row(i);
        }
        out.row(qi) = val;
    }
    return out;
}

namespace {

Eigen::MatrixXd sample_field(const FieldFn& g, const Eigen::MatrixXd& points) {
    Eigen::MatrixXd out;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Eigen::VectorXd v = g(points.row(i).head<3>().transpose());
        if (i == 0) out.resize(points.rows(), v.size());
        if (v.size() != out.cols())
            throw SchemaError("field function changed its value dimension");
        out.row(i) = v.transpose();
    }
    return out;
}

}  // namespace

Eigen::MatrixXd pushforward_field(const FieldFn& g, const RbfMap& inverse_map,
                                  const Eigen::MatrixX3d& target_points) {
    if (inverse_map.values.cols() != 3)
        throw SchemaError("pushforward_field: inverse map must produce 3D positions");
    return sample_field(g, rbf_interpolate(inverse_map, target_points));
}

Eigen::MatrixXd pullback_field(const FieldFn& g, const RbfMap& forward_map,
                               const Eigen::MatrixX3d& source_points) {
    if (forward_map.values.cols() != 3)
        throw SchemaError("pullback_field: forward map must produce 3D positions");
    return sample_field(g, rbf_interpolate(forward_map, source_points));
}

void save_rbf_map(const std::string& path, const RbfMap& map) {
    nlohmann::json hdr;
    hdr["kernel"] = map.kernel;
    hdr["k"] = map.k;
    hdr["rows"] = map.centers.rows();
    hdr["value_cols"] = map.values.cols();
    const std::string htxt = hdr.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_rbf_map: cannot open '" + path + "'");
    detail::put_u64_le(os, htxt.size());
    os.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    for (Eigen::Index r = 0; r < map.centers.rows(); ++r)
        for (Eigen::Index c = 0; c < 3; ++c) detail::put_f64_le(os, map.centers(r, c));
    for (Eigen::Index r = 0; r < map.values.rows(); ++r)
        for (Eigen::Index c = 0; c < map.values.cols(); ++c)
            detail::put_f64_le(os, map.values(r, c));
    if (!os) throw IoError("save_rbf_map: failed writing '" + path + "'");
}

RbfMap load_rbf_map(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_rbf_map: cannot open '" + path + "'");
    const std::uint64_t hlen = detail::get_u64_le(is);
    if (!is || hlen > (1u << 20)) throw IoError("load_rbf_map: bad header length");
    std::string htxt(hlen, '\0');
    is.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw IoError("load_rbf_map: truncated header in '" + path + "'");

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(htxt);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("load_rbf_map: bad header: ") + e.what());
    }
    RbfMap map;
    map.kernel = hdr.at("kernel").get<std::string>();
    map.k = hdr.at("k").get<int>();
    const auto rows = hdr.at("rows").get<Eigen::Index>();
    const auto vcols = hdr.at("value_cols").get<Eigen::Index>();
    map.centers.resize(rows, 3);
    map.values.resize(rows, vcols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < 3; ++c) map.centers(r, c) = detail::get_f64_le(is);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < vcols; ++c) map.values(r, c) = detail::get_f64_le(is);
    if (!is) throw IoError("load_rbf_map: truncated payload in '" + path + "'");
    return map;
}

}  // namespace morphassim
