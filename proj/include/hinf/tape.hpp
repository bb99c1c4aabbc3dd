#pragma once

#include <cstdint>
#include <vector>

#include "hinf/common.hpp"

namespace hinf {

// Scalar reverse-mode computation graph.
//
// Nodes are recorded in topological (construction) order with the local
// partials evaluated during the forward pass, so the reverse sweep visits
// each node exactly once and costs O(#nodes). Leaves registered through
// leaf() are the differentiable parameters; constant() nodes carry no
// adjoint slot. The graph is acyclic by construction.
//
// This is the reference gradient path: the network's blocked backward pass
// is equivalence-tested against gradients computed here.
class Tape {
public:
    using id = std::int32_t;

    id leaf(double v) {
        id n = push(v);
        leaves_.push_back(n);
        return n;
    }
    id constant(double v) { return push(v); }

    id add(id a, id b) { return push(val(a) + val(b), a, 1.0, b, 1.0); }
    id sub(id a, id b) { return push(val(a) - val(b), a, 1.0, b, -1.0); }
    id mul(id a, id b) { return push(val(a) * val(b), a, val(b), b, val(a)); }
    id div(id a, id b) {
        double ib = 1.0 / val(b);
        return push(val(a) * ib, a, ib, b, -val(a) * ib * ib);
    }
    id neg(id a) { return push(-val(a), a, -1.0); }
    id exp_(id a);
    id log_(id a);
    id tanh_(id a);
    id relu_(id a);       // derivative at exactly 0 is 0
    id logistic_(id a);
    id softplus_(id a);
    id norm_cdf_(id a);
    id norm_pdf_(id a);
    id square(id a) { return push(val(a) * val(a), a, 2.0 * val(a)); }

    double val(id n) const { return nodes_[static_cast<std::size_t>(n)].v; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t leaf_count() const { return leaves_.size(); }

    /// Adjoints of `output` with respect to every leaf, in registration order.
    std::vector<double> grad_reverse(id output) const;

private:
    struct Node {
        double v;
        id p0 = -1, p1 = -1;
        double d0 = 0.0, d1 = 0.0;
    };

    id push(double v, id p0 = -1, double d0 = 0.0, id p1 = -1, double d1 = 0.0) {
        nodes_.push_back(Node{v, p0, p1, d0, d1});
        return static_cast<id>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<id> leaves_;
};

// Operator-overloading view onto a Tape, for readable expression building.
struct TVar {
    Tape* tape = nullptr;
    Tape::id node = -1;
    double val() const { return tape->val(node); }
};

inline TVar tvar(Tape& t, Tape::id n) { return TVar{&t, n}; }
inline TVar operator+(TVar a, TVar b) { return {a.tape, a.tape->add(a.node, b.node)}; }
inline TVar operator-(TVar a, TVar b) { return {a.tape, a.tape->sub(a.node, b.node)}; }
inline TVar operator*(TVar a, TVar b) { return {a.tape, a.tape->mul(a.node, b.node)}; }
inline TVar operator/(TVar a, TVar b) { return {a.tape, a.tape->div(a.node, b.node)}; }
inline TVar operator-(TVar a) { return {a.tape, a.tape->neg(a.node)}; }
inline TVar operator+(TVar a, double c) { return a + TVar{a.tape, a.tape->constant(c)}; }
inline TVar operator+(double c, TVar a) { return a + c; }
inline TVar operator-(TVar a, double c) { return a + (-c); }
inline TVar operator-(double c, TVar a) { return (-a) + c; }
inline TVar operator*(double c, TVar a) { return TVar{a.tape, a.tape->constant(c)} * a; }
inline TVar operator*(TVar a, double c) { return c * a; }
inline TVar exp(TVar a) { return {a.tape, a.tape->exp_(a.node)}; }
inline TVar log(TVar a) { return {a.tape, a.tape->log_(a.node)}; }
inline TVar tanh(TVar a) { return {a.tape, a.tape->tanh_(a.node)}; }
inline TVar relu(TVar a) { return {a.tape, a.tape->relu_(a.node)}; }
inline TVar logistic(TVar a) { return {a.tape, a.tape->logistic_(a.node)}; }
inline TVar softplus(TVar a) { return {a.tape, a.tape->softplus_(a.node)}; }

}  // namespace hinf
