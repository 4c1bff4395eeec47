#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dpc/error.hpp"
#include "dpc/log.hpp"
#include "dpc/sde.hpp"

namespace dpc::ad {

class Tape;

/// Handle to a rank-2 tensor recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear recording of operations; `backward` replays adjoints in reverse order and sums the
/// contributions of every use of a node.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value)>;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
  Var variable(Matrix value) { return push(std::move(value), true, nullptr); }

  /// Records a node whose gradient is needed iff any parent needs one. The adjoint is called
  /// as f(tape, grad_out) or f(tape, grad_out, value) when it needs the node's own output.
  template <class F>
  Var record(Matrix value, std::initializer_list<Var> parents, F&& backward) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || requires_grad(p);
    return record(std::move(value), needs, std::forward<F>(backward));
  }

  template <class F>
  Var record(Matrix value, bool needs_grad, F&& backward) {
    if (!needs_grad) return push(std::move(value), false, nullptr);
    if constexpr (std::is_invocable_v<F&, Tape&, const Matrix&, const Matrix&>) {
      return push(std::move(value), true, Backward(std::forward<F>(backward)));
    } else {
      return push(std::move(value), true,
                  [f = std::forward<F>(backward)](Tape& t, const Matrix& g, const Matrix&) {
                    f(t, g);
                  });
    }
  }

  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  const Matrix& value(Var v) const { return nodes_.at(v.id()).value; }
  std::size_t size() const { return nodes_.size(); }

  template <class Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
      throw DimensionError("gradient shape mismatch on tape node " + std::to_string(v.id()));
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  void backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward: variable belongs to another tape");
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
      throw ContractError("backward requires a scalar loss, got " + std::to_string(lv.rows()) +
                          "x" + std::to_string(lv.cols()));
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    accumulate(loss, Matrix::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad, n.value);
    }
  }

  /// Gradient of the last backward pass; zeros when the node received none.
  Matrix grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var push(Matrix value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), needs_grad, false});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

inline double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on a non-scalar tensor");
  return v(0, 0);
}

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
}

inline void require_scalar(const Var& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) throw DimensionError(std::string(op) + ": expected a scalar");
}

}  // namespace detail

inline Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

inline Var transpose(Var a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& tape, const Matrix& g) { tape.accumulate(a, g.transpose()); });
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

/// Elementwise product.
inline Var mul(Var a, Var b) {
  detail::require_same_shape(a, b, "mul");
  Matrix v = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
    if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
  });
}

inline Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a},
                          [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

/// Matrix times a recorded scalar.
inline Var scale(Var a, Var s) {
  detail::require_scalar(s, "scale");
  const double sv = s.scalar();
  return a.tape()->record(a.value() * sv, {a, s}, [a, s](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g * s.scalar());
    if (tape.requires_grad(s))
      tape.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

/// Adds a 1 x c row to every row of an r x c matrix.
inline Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: row vector has " + std::to_string(row.cols()) +
                         " columns, matrix has " + std::to_string(a.cols()));
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(v), {a, row}, [a, row](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(row)) tape.accumulate(row, g.colwise().sum());
  });
}

inline Var sum(Var a) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a},
                          [a](Tape& tape, const Matrix& g) {
                            tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
                          });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

inline Var exp(Var a) {
  return a.tape()->record(a.value().array().exp().matrix(), {a},
                          [a](Tape& tape, const Matrix& g, const Matrix& out) {
                            tape.accumulate(a, g.cwiseProduct(out));
                          });
}

/// ELU with alpha = 1.
inline Var elu(Var a) {
  Matrix v = a.value().unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  return a.tape()->record(std::move(v), {a}, [a](Tape& tape, const Matrix& g, const Matrix& out) {
    tape.accumulate(a, g.binaryExpr(out, [](double gi, double yi) {
      return yi > 0.0 ? gi : gi * (yi + 1.0);
    }));
  });
}

/// Applies a scalar function with known derivative to a 1 x 1 tensor.
template <class F, class DF>
Var scalar_map(Var s, F f, DF df) {
  detail::require_scalar(s, "scalar_map");
  const double x = s.scalar();
  return s.tape()->record(Matrix::Constant(1, 1, f(x)), {s}, [s, df, x](Tape& tape, const Matrix& g) {
    tape.accumulate(s, Matrix::Constant(1, 1, g(0, 0) * df(x)));
  });
}

/// Pairwise squared Euclidean distances between the rows of a (n x d) and b (p x d).
inline Var sqdist(Var a, Var b) {
  if (a.cols() != b.cols())
    throw DimensionError("sqdist: feature dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()) + " differ");
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  const Vector na = A.rowwise().squaredNorm();
  const Vector nb = B.rowwise().squaredNorm();
  Matrix d = (-2.0 * A * B.transpose()).colwise() + na;
  d.rowwise() += nb.transpose();
  return a.tape()->record(std::move(d), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    const Matrix& A = a.value();
    const Matrix& B = b.value();
    if (tape.requires_grad(a))
      tape.accumulate(a, 2.0 * (g.rowwise().sum().asDiagonal() * A - g * B));
    if (tape.requires_grad(b))
      tape.accumulate(b, 2.0 * (g.colwise().sum().transpose().asDiagonal() * B -
                                g.transpose() * A));
  });
}

/// a + s I for square a and recorded scalar s.
inline Var add_diagonal(Var a, Var s) {
  detail::require_scalar(s, "add_diagonal");
  if (a.rows() != a.cols()) throw DimensionError("add_diagonal: matrix is not square");
  Matrix v = a.value();
  v.diagonal().array() += s.scalar();
  return a.tape()->record(std::move(v), {a, s}, [a, s](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.requires_grad(s)) tape.accumulate(s, Matrix::Constant(1, 1, g.trace()));
  });
}

/// Tr(a b).
inline Var trace_product(Var a, Var b) {
  if (a.cols() != b.rows() || a.rows() != b.cols())
    throw DimensionError("trace_product: shapes are not transpose-compatible");
  const double v = a.value().cwiseProduct(b.value().transpose()).sum();
  return a.tape()->record(Matrix::Constant(1, 1, v), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.requires_grad(a)) tape.accumulate(a, g(0, 0) * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, g(0, 0) * a.value().transpose());
  });
}

struct JitterPolicy {
  double initial = 1e-10;
  double growth = 10.0;
  double max = 1e-6;
};

/// Solves A X = B for symmetric positive definite A through a Cholesky factorization of the
/// symmetric part of A. On factorization failure a diagonal jitter is added and escalated.
/// `lambda_hint` is only used in the error report.
inline Var cholesky_solve(Var a, Var b, double lambda_hint = 0.0, JitterPolicy jitter = {}) {
  if (a.rows() != a.cols()) throw DimensionError("cholesky_solve: matrix is not square");
  if (a.rows() != b.rows())
    throw DimensionError("cholesky_solve: right-hand side has " + std::to_string(b.rows()) +
                         " rows, matrix has " + std::to_string(a.rows()));
  Matrix sym = 0.5 * (a.value() + a.value().transpose());
  Eigen::LLT<Matrix> llt(sym);
  for (double j = jitter.initial; llt.info() != Eigen::Success; j *= jitter.growth) {
    if (j > jitter.max * (1.0 + 1e-12)) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
      const Vector ev = es.eigenvalues().cwiseAbs();
      const double cond = ev.minCoeff() > 0.0 ? ev.maxCoeff() / ev.minCoeff()
                                              : std::numeric_limits<double>::infinity();
      throw SingularGramError(lambda_hint, cond);
    }
    Matrix jittered = sym;
    jittered.diagonal().array() += j;
    llt.compute(jittered);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0e", j);
    log_warn(std::string("cholesky_solve: factorization failed, retrying with jitter ") + buf);
  }
  Matrix x = llt.solve(b.value());
  return a.tape()->record(std::move(x), {a, b},
                          [a, b, llt = std::move(llt)](Tape& tape, const Matrix& g,
                                                       const Matrix& x) {
                            Matrix gb = llt.solve(g);
                            if (tape.requires_grad(a)) {
                              Matrix ga = gb * x.transpose();
                              tape.accumulate(a, -0.5 * (ga + ga.transpose()));
                            }
                            if (tape.requires_grad(b)) tape.accumulate(b, gb);
                          });
}

}  // namespace dpc::ad
