#include "freqseg/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "freqseg/error.hpp"

namespace freqseg::ad {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1) {
    throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  }
  node_->shape = shape;
  node_->value.assign(shape.numel(), fill);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1) {
    throw ShapeError("tensor dimensions must be positive, got " + shape.str());
  }
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, value, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = node_->shape;
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

double& Tensor::at(int n, int c, int h, int w) {
  const Shape& s = node_->shape;
  return node_->value[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on non-scalar tensor " + shape().str());
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() const { node_->grad.assign(node_->value.size(), 0.0); }
void Tensor::clear_grad() const {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                     " vs " + b.shape().str());
  }
}

}  // namespace freqseg::ad
