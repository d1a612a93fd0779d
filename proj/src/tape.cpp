/// @file tape.cpp
/// @brief Reverse-mode tape: eager forward evaluation, exact reverse sweep.
#include "morphassim/tape.hpp"

#include <cmath>

#include "morphassim/errors.hpp"

namespace morphassim::ad {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw SchemaError(std::string(who) + ": shape mismatch");
}

}  // namespace

Tape::Id Tape::push(Node n) {
    compute(n);
    nodes_.push_back(std::move(n));
    grads_valid_ = false;
    return static_cast<Id>(nodes_.size() - 1);
}

void Tape::compute(Node& n) {
    switch (n.op) {
        case Op::Constant:
        case Op::Parameter:
            break;  // leaves keep their assigned value
        case Op::Affine: {
            const Mat& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            const Mat& w = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
            const Mat& b = nodes_[static_cast<std::size_t>(n.inputs[2])].value;
            if (x.cols() != w.cols() || b.rows() != w.rows() || b.cols() != 1)
                throw SchemaError("Tape::affine: dimension mismatch");
            n.value = (x * w.transpose()).rowwise() + b.col(0).transpose();
            break;
        }
        case Op::HStack: {
            Eigen::Index rows = nodes_[static_cast<std::size_t>(n.inputs[0])].value.rows();
            Eigen::Index cols = 0;
            for (Id in : n.inputs) {
                const Mat& v = nodes_[static_cast<std::size_t>(in)].value;
                if (v.rows() != rows) throw SchemaError("Tape::hstack: row mismatch");
                cols += v.cols();
            }
            n.value.resize(rows, cols);
            Eigen::Index at = 0;
            for (Id in : n.inputs) {
                const Mat& v = nodes_[static_cast<std::size_t>(in)].value;
                n.value.middleCols(at, v.cols()) = v;
                at += v.cols();
            }
            break;
        }
        case Op::Relu:
            n.value = nodes_[static_cast<std::size_t>(n.inputs[0])].value.cwiseMax(0.0);
            break;
        case Op::SinCf:
            n.value = (n.alpha * nodes_[static_cast<std::size_t>(n.inputs[0])].value.array()).sin();
            break;
        case Op::CosCf:
            n.value = (n.alpha * nodes_[static_cast<std::size_t>(n.inputs[0])].value.array()).cos();
            break;
        case Op::Add: {
            const Mat& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            const Mat& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
            check_same_shape(a, b, "Tape::add");
            n.value = a + b;
            break;
        }
        case Op::Sub: {
            const Mat& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            const Mat& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
            check_same_shape(a, b, "Tape::sub");
            n.value = a - b;
            break;
        }
        case Op::Scale:
            n.value = n.alpha * nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            break;
        case Op::GatherRows: {
            const Mat& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            n.value.resize(static_cast<Eigen::Index>(n.rows.size()), x.cols());
            for (std::size_t i = 0; i < n.rows.size(); ++i) {
                if (n.rows[i] < 0 || n.rows[i] >= x.rows())
                    throw SchemaError("Tape::gather_rows: index out of range");
                n.value.row(static_cast<Eigen::Index>(i)) = x.row(n.rows[i]);
            }
            break;
        }
        case Op::RowDot: {
            const Mat& a = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            const Mat& b = nodes_[static_cast<std::size_t>(n.inputs[1])].value;
            check_same_shape(a, b, "Tape::row_dot");
            n.value = (a.array() * b.array()).rowwise().sum().matrix();
            break;
        }
        case Op::Abs:
            n.value = nodes_[static_cast<std::size_t>(n.inputs[0])].value.cwiseAbs();
            break;
        case Op::Sum:
            n.value = Mat::Constant(1, 1, nodes_[static_cast<std::size_t>(n.inputs[0])].value.sum());
            break;
        case Op::SqNorm:
            n.value = Mat::Constant(1, 1, nodes_[static_cast<std::size_t>(n.inputs[0])].value.squaredNorm());
            break;
        case Op::RowNormSum: {
            const Mat& x = nodes_[static_cast<std::size_t>(n.inputs[0])].value;
            if (n.frozen.size() == 0) {
                // first forward: capture unit directions (zero rows stay zero)
                n.frozen = Mat::Zero(x.rows(), x.cols());
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    const double nm = x.row(i).norm();
                    if (nm > 0.0) n.frozen.row(i) = x.row(i) / nm;
                }
            }
            // value = Σ_i row_i·u_i; at the build point this equals Σ‖row_i‖ exactly
            n.value = Mat::Constant(1, 1, (x.array() * n.frozen.array()).sum());
            break;
        }
    }
}

Tape::Id Tape::constant(Mat v) {
    Node n;
    n.op = Op::Constant;
    n.value = std::move(v);
    return push(std::move(n));
}

Tape::Id Tape::parameter(Mat v) {
    Node n;
    n.op = Op::Parameter;
    n.value = std::move(v);
    return push(std::move(n));
}

Tape::Id Tape::affine(Id x, Id w, Id b) { return push({Op::Affine, {x, w, b}, {}, {}, 0.0, {}, {}}); }

Tape::Id Tape::hstack(const std::vector<Id>& parts) {
    if (parts.empty()) throw SchemaError("Tape::hstack: no inputs");
    return push({Op::HStack, parts, {}, {}, 0.0, {}, {}});
}

Tape::Id Tape::relu(Id x) { return push({Op::Relu, {x}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::sin_cf(Id x, double omega) { return push({Op::SinCf, {x}, {}, {}, omega, {}, {}}); }
Tape::Id Tape::cos_cf(Id x, double omega) { return push({Op::CosCf, {x}, {}, {}, omega, {}, {}}); }
Tape::Id Tape::add(Id a, Id b) { return push({Op::Add, {a, b}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::sub(Id a, Id b) { return push({Op::Sub, {a, b}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::scale(Id x, double alpha) { return push({Op::Scale, {x}, {}, {}, alpha, {}, {}}); }

Tape::Id Tape::gather_rows(Id x, std::vector<int> rows) {
    Node n;
    n.op = Op::GatherRows;
    n.inputs = {x};
    n.rows = std::move(rows);
    return push(std::move(n));
}

Tape::Id Tape::row_dot(Id a, Id b) { return push({Op::RowDot, {a, b}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::abs(Id x) { return push({Op::Abs, {x}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::sum(Id x) { return push({Op::Sum, {x}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::sqnorm(Id x) { return push({Op::SqNorm, {x}, {}, {}, 0.0, {}, {}}); }
Tape::Id Tape::rownorm_sum(Id x) { return push({Op::RowNormSum, {x}, {}, {}, 0.0, {}, {}}); }

const Mat& Tape::value(Id id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }

double Tape::scalar_value(Id id) const {
    const Mat& v = value(id);
    if (v.rows() != 1 || v.cols() != 1) throw SchemaError("Tape::scalar_value: node is not scalar");
    return v(0, 0);
}

void Tape::set_parameter(Id id, const Mat& v) {
    Node& n = nodes_.at(static_cast<std::size_t>(id));
    if (n.op != Op::Parameter && n.op != Op::Constant)
        throw SchemaError("Tape::set_parameter: node is not a leaf");
    check_same_shape(n.value, v, "Tape::set_parameter");
    n.value = v;
    grads_valid_ = false;
}

void Tape::revalue() {
    for (Node& n : nodes_) compute(n);
    grads_valid_ = false;
}

void Tape::backward(Id loss) {
    const Node& ln = nodes_.at(static_cast<std::size_t>(loss));
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
        throw SchemaError("Tape::backward: loss node is not scalar");

    for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(loss)].grad(0, 0) = 1.0;

    for (std::size_t ri = static_cast<std::size_t>(loss) + 1; ri-- > 0;) {
        Node& n = nodes_[ri];
        if (n.grad.size() == 0 || (n.op != Op::Parameter && n.grad.cwiseAbs().maxCoeff() == 0.0))
            continue;
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::Constant:
            case Op::Parameter:
                break;
            case Op::Affine: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                Node& w = nodes_[static_cast<std::size_t>(n.inputs[1])];
                Node& b = nodes_[static_cast<std::size_t>(n.inputs[2])];
                x.grad.noalias() += g * w.value;
                w.grad.noalias() += g.transpose() * x.value;
                b.grad.col(0).noalias() += g.colwise().sum().transpose();
                break;
            }
            case Op::HStack: {
                Eigen::Index at = 0;
                for (Id in : n.inputs) {
                    Node& v = nodes_[static_cast<std::size_t>(in)];
                    v.grad += g.middleCols(at, v.value.cols());
                    at += v.value.cols();
                }
                break;
            }
            case Op::Relu: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                // subgradient at 0 defined as 0
                x.grad.array() += g.array() * (x.value.array() > 0.0).cast<double>();
                break;
            }
            case Op::SinCf: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                x.grad.array() += g.array() * n.alpha * (n.alpha * x.value.array()).cos();
                break;
            }
            case Op::CosCf: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                x.grad.array() -= g.array() * n.alpha * (n.alpha * x.value.array()).sin();
                break;
            }
            case Op::Add:
                nodes_[static_cast<std::size_t>(n.inputs[0])].grad += g;
                nodes_[static_cast<std::size_t>(n.inputs[1])].grad += g;
                break;
            case Op::Sub:
                nodes_[static_cast<std::size_t>(n.inputs[0])].grad += g;
                nodes_[static_cast<std::size_t>(n.inputs[1])].grad -= g;
                break;
            case Op::Scale:
                nodes_[static_cast<std::size_t>(n.inputs[0])].grad += n.alpha * g;
                break;
            case Op::GatherRows: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                for (std::size_t i = 0; i < n.rows.size(); ++i)
                    x.grad.row(n.rows[i]) += g.row(static_cast<Eigen::Index>(i));
                break;
            }
            case Op::RowDot: {
                Node& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
                Node& b = nodes_[static_cast<std::size_t>(n.inputs[1])];
                a.grad.array() += b.value.array().colwise() * g.col(0).array();
                b.grad.array() += a.value.array().colwise() * g.col(0).array();
                break;
            }
            case Op::Abs: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                x.grad.array() += g.array() * x.value.array().sign();
                break;
            }
            case Op::Sum:
                nodes_[static_cast<std::size_t>(n.inputs[0])].grad.array() += g(0, 0);
                break;
            case Op::SqNorm: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                x.grad += 2.0 * g(0, 0) * x.value;
                break;
            }
            case Op::RowNormSum: {
                Node& x = nodes_[static_cast<std::size_t>(n.inputs[0])];
                x.grad += g(0, 0) * n.frozen;
                break;
            }
        }
    }
    grads_valid_ = true;
}

const Mat& Tape::grad(Id id) const {
    if (!grads_valid_) throw SchemaError("Tape::grad: backward has not run since the last change");
    return nodes_.at(static_cast<std::size_t>(id)).grad;
}

}  // namespace morphassim::ad
