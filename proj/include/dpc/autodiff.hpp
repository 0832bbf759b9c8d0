#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpc/errors.hpp"

namespace dpc::ad {

// Rounding behavior of ste_round. Hard mode is the production path
// (threshold at 0.5, surrogate sigmoid gradient). Relaxed mode replaces the
// forward value with the sigmoid itself so that finite differences of the
// resulting function match the recorded backward exactly; test oracles use it.
enum class SteMode { kHard, kRelaxed };

enum class Op : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kAxpb,      // a*x + b, elementwise
    kSquare,
    kCube,
    kSigmoid,
    kRelu,
    kClamp,     // clamp to [p0, p1]; pass-through gradient strictly inside
    kSteRound,  // p0 = sigmoid slope
    kAffine,    // W*x + b
    kSum,       // reduce to 1x1
    kIndex,     // p0 = row index
    kConcat,    // stack parents vertically
};

const char* op_name(Op op);

class Tape;

// Lightweight handle into a tape. Copyable, trivially destructible.
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
public:
    explicit Tape(std::size_t reserve_nodes = 256);

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. view() stores a pointer: the caller keeps the matrix alive and
    // unchanged for the tape's lifetime (used for policy weights, which would
    // otherwise be copied once per rollout).
    Var scalar(double v);
    Var vector(const Eigen::VectorXd& v);
    Var matrix(const Eigen::MatrixXd& m);
    Var view(const Eigen::MatrixXd* m);

    std::size_t size() const { return nodes_.size(); }

    const Eigen::MatrixXd& value(Var v) const;
    double value_scalar(Var v) const;

    // Reverse pass from a scalar output. Clears previous adjoints, seeds the
    // output with 1 and walks the tape once in reverse creation order (which
    // is a topological order for an eagerly built graph).
    void backward(Var output);

    bool has_grad(Var v) const;
    const Eigen::MatrixXd& grad(Var v) const;
    double grad_scalar(Var v) const;

    // Graph snapshot for debugging.
    std::string dump_json() const;

    // Used by the op builders below.
    Var emit(Op op, std::span<const Var> parents, Eigen::MatrixXd value,
             double p0 = 0.0, double p1 = 0.0);

private:
    struct Node {
        Op op = Op::kLeaf;
        std::uint8_t arity = 0;
        std::array<std::int32_t, 6> parents{-1, -1, -1, -1, -1, -1};
        double p0 = 0.0;
        double p1 = 0.0;
        Eigen::MatrixXd value;
        const Eigen::MatrixXd* view = nullptr;

        const Eigen::MatrixXd& val() const { return view ? *view : value; }
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    std::vector<Eigen::MatrixXd> grads_;  // empty matrix == zero adjoint
    Eigen::MatrixXd zero_;                // scratch for grad() on untouched nodes
};

// --- graph ops -------------------------------------------------------------

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);  // elementwise; shapes must match
Var operator/(Var a, Var b);  // elementwise
Var operator-(Var a);

Var axpb(Var x, double a, double b);
inline Var operator+(Var a, double c) { return axpb(a, 1.0, c); }
inline Var operator+(double c, Var a) { return axpb(a, 1.0, c); }
inline Var operator-(Var a, double c) { return axpb(a, 1.0, -c); }
inline Var operator-(double c, Var a) { return axpb(a, -1.0, c); }
inline Var operator*(Var a, double c) { return axpb(a, c, 0.0); }
inline Var operator*(double c, Var a) { return axpb(a, c, 0.0); }
inline Var operator/(Var a, double c) { return axpb(a, 1.0 / c, 0.0); }

Var square(Var x);
Var cube(Var x);
Var sigmoid(Var x);
Var relu(Var x);
Var clamp(Var x, double lo, double hi);
inline Var clamp_min(Var x, double lo) {
    return clamp(x, lo, std::numeric_limits<double>::infinity());
}
Var ste_round(Var x, double slope, SteMode mode);
Var affine(Var w, Var x, Var b);
Var sum(Var x);
Var index(Var x, int i);
Var concat(std::span<const Var> parts);

// Elementwise min/max with graph-valued bounds, built from relu.
inline Var vmax(Var a, Var b) { return a + relu(b - a); }
inline Var vmin(Var a, Var b) { return a - relu(a - b); }

// Quadratic one-sided bound violation: relu(lo-x)^2 + relu(x-hi)^2.
Var clamp_penalty(Var x, double lo, double hi);

// --- double overloads ------------------------------------------------------
// Mirror the graph ops so that code templated on the scalar type runs
// unchanged in plain numeric mode.

inline double square(double x) { return x * x; }
inline double cube(double x) { return x * x * x; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }
inline double clamp_min(double x, double lo) { return std::max(x, lo); }
inline double ste_round(double x, double slope, SteMode mode) {
    if (mode == SteMode::kRelaxed) return 1.0 / (1.0 + std::exp(-slope * (x - 0.5)));
    return x > 0.5 ? 1.0 : 0.0;
}
inline double vmax(double a, double b) { return std::max(a, b); }
inline double vmin(double a, double b) { return std::min(a, b); }
inline double clamp_penalty(double x, double lo, double hi) {
    const double under = relu(lo - x);
    const double over = relu(x - hi);
    return under * under + over * over;
}

// Numeric readout, usable from templated code.
inline double numeric(double x) { return x; }
inline double numeric(Var v) { return v.tape->value_scalar(v); }

}  // namespace dpc::ad
