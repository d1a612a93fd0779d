/// @file flownet.cpp
/// @brief Fourier-feature network: evaluation, tape construction, model I/O.
#include "morphassim/flownet.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "morphassim/errors.hpp"
#include "morphassim/rng.hpp"

namespace morphassim {

Eigen::VectorXd rff_embed(const Eigen::Vector3d& x, const RffConfig& cfg) {
    Eigen::VectorXd out(cfg.embed_dim());
    out.head<3>() = x;
    for (int i = 0; i < cfg.n_rff; ++i) {
        const double w = static_cast<double>(1 << i);
        for (int k = 0; k < 3; ++k) out[3 + 3 * i + k] = std::cos(w * x[k]);
    }
    for (int i = 0; i < cfg.n_rff; ++i) {
        const double w = static_cast<double>(1 << i);
        for (int k = 0; k < 3; ++k) out[3 + 3 * cfg.n_rff + 3 * i + k] = std::sin(w * x[k]);
    }
    return out;
}

Eigen::MatrixXd rff_embed_rows(const Eigen::MatrixX3d& X, const RffConfig& cfg) {
    Eigen::MatrixXd out(X.rows(), cfg.embed_dim());
    out.leftCols<3>() = X;
    for (int i = 0; i < cfg.n_rff; ++i) {
        const double w = static_cast<double>(1 << i);
        out.middleCols(3 + 3 * i, 3) = (w * X.array()).cos();
        out.middleCols(3 + 3 * cfg.n_rff + 3 * i, 3) = (w * X.array()).sin();
    }
    return out;
}

FlowNet FlowNet::make(const RffConfig& rff, const std::vector<int>& hidden, std::uint64_t seed) {
    FlowNet net;
    net.rff = rff;
    Rng rng(seed);
    std::vector<int> dims;
    dims.push_back(rff.embed_dim());
    for (int h : hidden) dims.push_back(h);
    dims.push_back(3);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l], fan_out = dims[l + 1];
        if (fan_in <= 0 || fan_out <= 0) throw SchemaError("FlowNet::make: non-positive layer width");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

void FlowNet::validate() const {
    if (weights.empty() || weights.size() != biases.size())
        throw SchemaError("FlowNet: inconsistent layer lists");
    if (weights.front().cols() != rff.embed_dim())
        throw SchemaError("FlowNet: first layer input dim does not match the embedding");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].size() != weights[l].rows())
            throw SchemaError("FlowNet: bias/weight shape mismatch at layer " + std::to_string(l));
        if (l + 1 < weights.size() && weights[l + 1].cols() != weights[l].rows())
            throw SchemaError("FlowNet: layer dimension chain broken at layer " + std::to_string(l));
    }
    if (weights.back().rows() != 3) throw SchemaError("FlowNet: output dimension must be 3");
}

Eigen::MatrixX3d FlowNet::velocity(const Eigen::MatrixX3d& X) const {
    Eigen::MatrixXd h = rff_embed_rows(X, rff);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = ((h * weights[l].transpose()).rowwise() + biases[l].transpose()).eval();
        if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
    }
    return h;
}

std::vector<Eigen::MatrixX3d> flow_forward(const FlowNet& net, const Eigen::MatrixX3d& X,
                                           const FlowConfig& cfg) {
    net.validate();
    if (cfg.n_steps <= 0) throw SchemaError("flow_forward: n_steps must be positive");
    std::vector<Eigen::MatrixX3d> traj;
    traj.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
    traj.push_back(X);
    for (int i = 0; i < cfg.n_steps; ++i) {
        const Eigen::MatrixX3d v = net.velocity(traj.back());
        Eigen::MatrixX3d next = traj.back() + cfg.dt() * v;
        if (!next.allFinite())
            throw NumericalError("flow_forward: non-finite value at step " + std::to_string(i + 1));
        traj.push_back(std::move(next));
    }
    return traj;
}

TapeNet tape_parameters(ad::Tape& tape, const FlowNet& net) {
    TapeNet p;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        p.w.push_back(tape.parameter(net.weights[l]));
        p.b.push_back(tape.parameter(net.biases[l]));
    }
    return p;
}

ad::Tape::Id tape_rff_embed(ad::Tape& tape, ad::Tape::Id X, const RffConfig& cfg) {
    std::vector<ad::Tape::Id> parts;
    parts.push_back(X);
    for (int i = 0; i < cfg.n_rff; ++i) parts.push_back(tape.cos_cf(X, static_cast<double>(1 << i)));
    for (int i = 0; i < cfg.n_rff; ++i) parts.push_back(tape.sin_cf(X, static_cast<double>(1 << i)));
    return tape.hstack(parts);
}

ad::Tape::Id tape_net_apply(ad::Tape& tape, const TapeNet& params, ad::Tape::Id embedded) {
    ad::Tape::Id h = embedded;
    for (std::size_t l = 0; l < params.w.size(); ++l) {
        h = tape.affine(h, params.w[l], params.b[l]);
        if (l + 1 < params.w.size()) h = tape.relu(h);
    }
    return h;
}

void save_flownet(const std::string& path, const FlowNet& net, const FlowConfig& cfg) {
    nlohmann::json hdr;
    hdr["n_rff"] = net.rff.n_rff;
    hdr["n_steps"] = cfg.n_steps;
    hdr["layers"] = nlohmann::json::array();
    for (const auto& w : net.weights)
        hdr["layers"].push_back({{"out", w.rows()}, {"in", w.cols()}});
    const std::string htxt = hdr.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("save_flownet: cannot open '" + path + "'");
    const std::uint64_t hlen = htxt.size();
    std::array<unsigned char, 8> lenb{};
    for (int i = 0; i < 8; ++i) lenb[static_cast<std::size_t>(i)] = static_cast<unsigned char>(hlen >> (8 * i));
    os.write(reinterpret_cast<const char*>(lenb.data()), 8);
    os.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    auto put = [&](double d) {
        std::uint64_t u;
        std::memcpy(&u, &d, 8);
        std::array<unsigned char, 8> b{};
        for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(u >> (8 * i));
        os.write(reinterpret_cast<const char*>(b.data()), 8);
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const auto& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) put(w(r, c));
        for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) put(net.biases[l][r]);
    }
    if (!os) throw IoError("save_flownet: failed writing '" + path + "'");
}

std::pair<FlowNet, FlowConfig> load_flownet(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_flownet: cannot open '" + path + "'");
    std::array<unsigned char, 8> lenb{};
    is.read(reinterpret_cast<char*>(lenb.data()), 8);
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenb[static_cast<std::size_t>(i)]) << (8 * i);
    std::string htxt(hlen, '\0');
    is.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw IoError("load_flownet: truncated header in '" + path + "'");

    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(htxt);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("load_flownet: bad header: ") + e.what());
    }
    FlowNet net;
    FlowConfig cfg;
    net.rff.n_rff = hdr.at("n_rff").get<int>();
    cfg.n_steps = hdr.at("n_steps").get<int>();
    auto get = [&](Eigen::Index count, Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                std::array<unsigned char, 8> b{};
                is.read(reinterpret_cast<char*>(b.data()), 8);
                std::uint64_t u = 0;
                for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
                double d;
                std::memcpy(&d, &u, 8);
                m(r, c) = d;
            }
        (void)count;
    };
    for (const auto& jl : hdr.at("layers")) {
        const auto rows = jl.at("out").get<Eigen::Index>();
        const auto cols = jl.at("in").get<Eigen::Index>();
        Eigen::MatrixXd w, b;
        get(rows * cols, w, rows, cols);
        get(rows, b, rows, 1);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd(b.col(0)));
    }
    if (!is) throw IoError("load_flownet: truncated payload in '" + path + "'");
    net.validate();
    return {net, cfg};
}

}  // namespace morphassim
