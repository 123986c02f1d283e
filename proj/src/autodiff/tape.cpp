#include "freqseg/autodiff/tape.hpp"

#include "freqseg/error.hpp"

namespace freqseg::ad {

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording()) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool Tape::wants(const std::vector<Tensor>& inputs) const {
  if (!recording()) return false;
  for (const Tensor& t : inputs) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
  if (!recording()) return;
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(Tensor loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ArgumentError("backward requires a single-element loss tensor, got " +
                        (loss.defined() ? loss.shape().str() : std::string("undefined")));
  }
  for (Entry& e : entries_) {
    e.output.zero_grad();
    for (Tensor& in : e.inputs) {
      if (in.defined() && in.requires_grad()) in.zero_grad();
    }
  }
  loss.mutable_grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->fn();
  }
}

}  // namespace freqseg::ad
