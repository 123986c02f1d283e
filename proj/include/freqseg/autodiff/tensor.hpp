#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace freqseg::ad {

/// NCHW extent of a rank-4 tensor. Scalars are 1x1x1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Shared handle to a dense real array that can take part in a Tape.
///
/// Copies alias the same storage; values are written by the producing
/// operation and treated as immutable afterwards. Gradient storage is
/// allocated lazily by the tape during backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<double> data();
  std::span<const double> data() const;
  double at(int n, int c, int h, int w) const;
  double& at(int n, int c, int h, int w);
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient storage, allocated zeroed on first access.
  std::span<double> mutable_grad() const;
  void zero_grad() const;
  void clear_grad() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

/// Named trainable tensor. Names are unique within a model.
struct Parameter {
  std::string name;
  Tensor tensor;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace freqseg::ad
