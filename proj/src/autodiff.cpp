#include "dpc/autodiff.hpp"

#include <sstream>

namespace dpc::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kDiv: return "div";
        case Op::kAxpb: return "axpb";
        case Op::kSquare: return "square";
        case Op::kCube: return "cube";
        case Op::kSigmoid: return "sigmoid";
        case Op::kRelu: return "relu";
        case Op::kClamp: return "clamp";
        case Op::kSteRound: return "ste_round";
        case Op::kAffine: return "affine";
        case Op::kSum: return "sum";
        case Op::kIndex: return "index";
        case Op::kConcat: return "concat";
    }
    return "?";
}

Tape::Tape(std::size_t reserve_nodes) {
    nodes_.reserve(reserve_nodes);
    zero_ = Eigen::MatrixXd::Zero(1, 1);
}

const Tape::Node& Tape::node(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw GraphError("variable does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::scalar(double v) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = v;
    return emit(Op::kLeaf, {}, std::move(m));
}

Var Tape::vector(const Eigen::VectorXd& v) { return emit(Op::kLeaf, {}, v); }

Var Tape::matrix(const Eigen::MatrixXd& m) { return emit(Op::kLeaf, {}, m); }

Var Tape::view(const Eigen::MatrixXd* m) {
    Node n;
    n.op = Op::kLeaf;
    n.view = m;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::emit(Op op, std::span<const Var> parents, Eigen::MatrixXd value, double p0, double p1) {
    if (op != Op::kLeaf && !value.allFinite()) {
        throw NumericFault(std::string("non-finite value from op '") + op_name(op) +
                           "' at node " + std::to_string(nodes_.size()));
    }
    Node n;
    n.op = op;
    n.p0 = p0;
    n.p1 = p1;
    n.value = std::move(value);
    if (parents.size() > n.parents.size()) {
        throw GraphError("op arity too large");
    }
    n.arity = static_cast<std::uint8_t>(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        if (parents[i].tape != this) throw GraphError("mixing variables from different tapes");
        n.parents[i] = parents[i].id;
    }
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Eigen::MatrixXd& Tape::value(Var v) const { return node(v).val(); }

double Tape::value_scalar(Var v) const {
    const auto& m = node(v).val();
    if (m.size() != 1) throw GraphError("value_scalar on non-scalar node");
    return m(0, 0);
}

bool Tape::has_grad(Var v) const {
    node(v);
    return static_cast<std::size_t>(v.id) < grads_.size() && grads_[static_cast<std::size_t>(v.id)].size() != 0;
}

const Eigen::MatrixXd& Tape::grad(Var v) const {
    const auto& n = node(v);
    const auto id = static_cast<std::size_t>(v.id);
    if (id < grads_.size() && grads_[id].size() != 0) return grads_[id];
    // Untouched by the last backward pass: adjoint is zero.
    const_cast<Tape*>(this)->zero_ = Eigen::MatrixXd::Zero(n.val().rows(), n.val().cols());
    return zero_;
}

double Tape::grad_scalar(Var v) const {
    const auto& g = grad(v);
    if (g.size() != 1) throw GraphError("grad_scalar on non-scalar node");
    return g(0, 0);
}

void Tape::backward(Var output) {
    const auto& out = node(output);
    if (out.val().size() != 1) {
        throw GraphError("backward requires a scalar output; reduce with sum() first");
    }
    grads_.clear();
    grads_.resize(nodes_.size());
    grads_[static_cast<std::size_t>(output.id)] = Eigen::MatrixXd::Ones(1, 1);

    auto accum = [&](std::int32_t pid, const Eigen::MatrixXd& g) {
        auto& slot = grads_[static_cast<std::size_t>(pid)];
        if (slot.size() == 0) {
            slot = g;
        } else {
            slot += g;
        }
    };

    for (std::int32_t i = output.id; i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        const Eigen::MatrixXd& g = grads_[idx];
        if (g.size() == 0) continue;
        const Node& n = nodes_[idx];
        if (n.op == Op::kLeaf) continue;
        const auto p = [&](int k) -> const Eigen::MatrixXd& {
            return nodes_[static_cast<std::size_t>(n.parents[static_cast<std::size_t>(k)])].val();
        };
        switch (n.op) {
            case Op::kAdd:
                accum(n.parents[0], g);
                accum(n.parents[1], g);
                break;
            case Op::kSub:
                accum(n.parents[0], g);
                accum(n.parents[1], -g);
                break;
            case Op::kMul:
                accum(n.parents[0], g.cwiseProduct(p(1)));
                accum(n.parents[1], g.cwiseProduct(p(0)));
                break;
            case Op::kDiv:
                accum(n.parents[0], g.cwiseQuotient(p(1)));
                accum(n.parents[1], -g.cwiseProduct(n.val()).cwiseQuotient(p(1)));
                break;
            case Op::kAxpb:
                accum(n.parents[0], n.p0 * g);
                break;
            case Op::kSquare:
                accum(n.parents[0], 2.0 * g.cwiseProduct(p(0)));
                break;
            case Op::kCube:
                accum(n.parents[0], 3.0 * g.cwiseProduct(p(0).cwiseProduct(p(0))));
                break;
            case Op::kSigmoid: {
                const Eigen::MatrixXd& s = n.val();
                accum(n.parents[0],
                      g.cwiseProduct(s.cwiseProduct(Eigen::MatrixXd::Ones(s.rows(), s.cols()) - s)));
                break;
            }
            case Op::kRelu: {
                const Eigen::MatrixXd mask = (p(0).array() > 0.0).cast<double>().matrix();
                accum(n.parents[0], g.cwiseProduct(mask));
                break;
            }
            case Op::kClamp: {
                const Eigen::MatrixXd mask =
                    ((p(0).array() > n.p0) && (p(0).array() < n.p1)).cast<double>().matrix();
                accum(n.parents[0], g.cwiseProduct(mask));
                break;
            }
            case Op::kSteRound: {
                // Straight-through surrogate: derivative of the scaled sigmoid
                // centered at the rounding threshold, regardless of the mode
                // used for the forward value.
                const double mu = n.p0;
                const Eigen::ArrayXXd s = 1.0 / (1.0 + (-mu * (p(0).array() - 0.5)).exp());
                accum(n.parents[0], g.cwiseProduct((mu * s * (1.0 - s)).matrix()));
                break;
            }
            case Op::kAffine: {
                accum(n.parents[0], g * p(1).transpose());
                accum(n.parents[1], p(0).transpose() * g);
                accum(n.parents[2], g);
                break;
            }
            case Op::kSum: {
                const auto& src = p(0);
                accum(n.parents[0],
                      Eigen::MatrixXd::Constant(src.rows(), src.cols(), g(0, 0)));
                break;
            }
            case Op::kIndex: {
                const auto& src = p(0);
                Eigen::MatrixXd gi = Eigen::MatrixXd::Zero(src.rows(), src.cols());
                gi(static_cast<Eigen::Index>(n.p0), 0) = g(0, 0);
                accum(n.parents[0], gi);
                break;
            }
            case Op::kConcat: {
                Eigen::Index row = 0;
                for (std::uint8_t k = 0; k < n.arity; ++k) {
                    const auto& src = p(k);
                    accum(n.parents[k], g.middleRows(row, src.rows()));
                    row += src.rows();
                }
                break;
            }
            case Op::kLeaf:
                break;
        }
    }
}

std::string Tape::dump_json() const {
    std::ostringstream out;
    out << "{\"nodes\":[";
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (i) out << ",";
        out << "{\"id\":" << i << ",\"op\":\"" << op_name(n.op) << "\",\"rows\":" << n.val().rows()
            << ",\"cols\":" << n.val().cols() << ",\"parents\":[";
        for (std::uint8_t k = 0; k < n.arity; ++k) {
            if (k) out << ",";
            out << n.parents[k];
        }
        out << "]";
        if (n.val().size() == 1) out << ",\"value\":" << n.val()(0, 0);
        out << "}";
    }
    out << "]}";
    return out.str();
}

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) throw GraphError("operation on invalid variable");
    return *a.tape;
}

void check_same_shape(Var a, Var b, const char* what) {
    if (!a.valid() || !b.valid()) throw GraphError("operation on invalid variable");
    const auto& va = a.tape->value(a);
    const auto& vb = b.tape->value(b);
    if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
        throw GraphError(std::string(what) + ": shape mismatch (" + std::to_string(va.rows()) +
                         "x" + std::to_string(va.cols()) + " vs " + std::to_string(vb.rows()) +
                         "x" + std::to_string(vb.cols()) + ")");
    }
}

}  // namespace

Var operator+(Var a, Var b) {
    check_same_shape(a, b, "add");
    const std::array<Var, 2> ps{a, b};
    return tape_of(a).emit(Op::kAdd, ps, a.tape->value(a) + b.tape->value(b));
}

Var operator-(Var a, Var b) {
    check_same_shape(a, b, "sub");
    const std::array<Var, 2> ps{a, b};
    return tape_of(a).emit(Op::kSub, ps, a.tape->value(a) - b.tape->value(b));
}

Var operator*(Var a, Var b) {
    check_same_shape(a, b, "mul");
    const std::array<Var, 2> ps{a, b};
    return tape_of(a).emit(Op::kMul, ps, a.tape->value(a).cwiseProduct(b.tape->value(b)));
}

Var operator/(Var a, Var b) {
    check_same_shape(a, b, "div");
    const std::array<Var, 2> ps{a, b};
    return tape_of(a).emit(Op::kDiv, ps, a.tape->value(a).cwiseQuotient(b.tape->value(b)));
}

Var operator-(Var a) { return axpb(a, -1.0, 0.0); }

Var axpb(Var x, double a, double b) {
    const std::array<Var, 1> ps{x};
    Eigen::MatrixXd v = a * x.tape->value(x);
    v.array() += b;
    return tape_of(x).emit(Op::kAxpb, ps, std::move(v), a, b);
}

Var square(Var x) {
    const std::array<Var, 1> ps{x};
    const auto& v = x.tape->value(x);
    return tape_of(x).emit(Op::kSquare, ps, v.cwiseProduct(v));
}

Var cube(Var x) {
    const std::array<Var, 1> ps{x};
    const auto& v = x.tape->value(x);
    return tape_of(x).emit(Op::kCube, ps, v.cwiseProduct(v).cwiseProduct(v));
}

Var sigmoid(Var x) {
    const std::array<Var, 1> ps{x};
    const auto& v = x.tape->value(x);
    return tape_of(x).emit(Op::kSigmoid, ps, (1.0 / (1.0 + (-v.array()).exp())).matrix());
}

Var relu(Var x) {
    const std::array<Var, 1> ps{x};
    return tape_of(x).emit(Op::kRelu, ps, x.tape->value(x).cwiseMax(0.0));
}

Var clamp(Var x, double lo, double hi) {
    if (lo > hi) throw GraphError("clamp: lo > hi");
    const std::array<Var, 1> ps{x};
    return tape_of(x).emit(Op::kClamp, ps, x.tape->value(x).cwiseMax(lo).cwiseMin(hi), lo, hi);
}

Var ste_round(Var x, double slope, SteMode mode) {
    if (slope <= 0.0) throw GraphError("ste_round: slope must be positive");
    const std::array<Var, 1> ps{x};
    const auto& v = x.tape->value(x);
    Eigen::MatrixXd fwd;
    if (mode == SteMode::kRelaxed) {
        fwd = (1.0 / (1.0 + (-slope * (v.array() - 0.5)).exp())).matrix();
    } else {
        fwd = (v.array() > 0.5).cast<double>().matrix();
    }
    return tape_of(x).emit(Op::kSteRound, ps, std::move(fwd), slope);
}

Var affine(Var w, Var x, Var b) {
    const auto& mw = w.tape->value(w);
    const auto& mx = x.tape->value(x);
    const auto& mb = b.tape->value(b);
    if (mx.cols() != 1 || mb.cols() != 1 || mw.cols() != mx.rows() || mw.rows() != mb.rows()) {
        throw GraphError("affine: incompatible shapes");
    }
    const std::array<Var, 3> ps{w, x, b};
    return tape_of(x).emit(Op::kAffine, ps, mw * mx + mb);
}

Var sum(Var x) {
    const std::array<Var, 1> ps{x};
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = x.tape->value(x).sum();
    return tape_of(x).emit(Op::kSum, ps, std::move(v));
}

Var index(Var x, int i) {
    const auto& v = x.tape->value(x);
    if (v.cols() != 1 || i < 0 || i >= v.rows()) throw GraphError("index: out of range");
    const std::array<Var, 1> ps{x};
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = v(i, 0);
    return tape_of(x).emit(Op::kIndex, ps, std::move(out), static_cast<double>(i));
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw GraphError("concat: no parts");
    if (parts.size() == 1) return parts[0];
    // Chain in groups of up to 6 (the node arity limit).
    constexpr std::size_t kMaxArity = 6;
    if (parts.size() > kMaxArity) {
        std::vector<Var> reduced;
        for (std::size_t i = 0; i < parts.size(); i += kMaxArity) {
            const std::size_t n = std::min(kMaxArity, parts.size() - i);
            reduced.push_back(concat(parts.subspan(i, n)));
        }
        return concat(reduced);
    }
    Eigen::Index rows = 0;
    for (const Var& v : parts) {
        const auto& m = v.tape->value(v);
        if (m.cols() != 1) throw GraphError("concat: parts must be column vectors");
        rows += m.rows();
    }
    Eigen::MatrixXd out(rows, 1);
    Eigen::Index at = 0;
    for (const Var& v : parts) {
        const auto& m = v.tape->value(v);
        out.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    return tape_of(parts[0]).emit(Op::kConcat, parts, std::move(out));
}

Var clamp_penalty(Var x, double lo, double hi) {
    if (lo > hi) throw GraphError("clamp_penalty: lo > hi");
    return square(relu(lo - x)) + square(relu(x - hi));
}

}  // namespace dpc::ad
